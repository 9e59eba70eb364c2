//! Verification harness: closed-form modal oracles for the decoupled
//! linear problems, manufactured-solution convergence studies, and the
//! continuous-dependence probe.

use crate::coupled::{run_simulation, Forcing, SimConfig, Snapshot};
use crate::error::{Result, SimError};
use crate::grid::{Field, Grid, NormKind};
use crate::material::MediumParams;

/// Exact mode amplitude of `a'' + b kappa a' + c2 kappa a = 0` with
/// a(0) = p0_amp, a'(0) = p1_amp, from the characteristic roots
/// `lambda^2 + b kappa lambda + c2 kappa = 0`. Returns (a, a').
pub fn modal_oracle_damped_wave(
    kappa_h: f64,
    c2: f64,
    b: f64,
    p0_amp: f64,
    p1_amp: f64,
    t: f64,
) -> (f64, f64) {
    let bk = b * kappa_h;
    let disc = bk * bk - 4.0 * c2 * kappa_h;
    if disc > 0.0 {
        // overdamped: two real roots, monotone decay
        let sq = disc.sqrt();
        let l1 = 0.5 * (-bk + sq);
        let l2 = 0.5 * (-bk - sq);
        let a = (p1_amp - l2 * p0_amp) / (l1 - l2);
        let b_coef = p0_amp - a;
        (
            a * (l1 * t).exp() + b_coef * (l2 * t).exp(),
            a * l1 * (l1 * t).exp() + b_coef * l2 * (l2 * t).exp(),
        )
    } else if disc == 0.0 {
        let l = -0.5 * bk;
        let c1 = p0_amp;
        let c2_coef = p1_amp - l * p0_amp;
        let e = (l * t).exp();
        (
            (c1 + c2_coef * t) * e,
            (c2_coef + l * (c1 + c2_coef * t)) * e,
        )
    } else {
        // underdamped: complex-conjugate pair
        let sigma = -0.5 * bk;
        let omega = 0.5 * (-disc).sqrt();
        let e = (sigma * t).exp();
        let (s, c) = (omega * t).sin_cos();
        let c2_coef = (p1_amp - sigma * p0_amp) / omega;
        let amp = e * (p0_amp * c + c2_coef * s);
        let amp_t = sigma * amp + e * omega * (-p0_amp * s + c2_coef * c);
        (amp, amp_t)
    }
}

/// Exact decay of a Dirichlet heat mode with perfusion:
/// amp0 * exp(-(kappa_a kappa_h + rho_b C_b W) t / (rho_a C_a)).
pub fn modal_oracle_heat(kappa_h: f64, medium: &MediumParams, amp0: f64, t: f64) -> f64 {
    let rate = (medium.kappa_a * kappa_h + medium.rho_b * medium.cap_b * medium.perfusion)
        / (medium.rho_a * medium.cap_a);
    amp0 * (-rate * t).exp()
}

/// One refinement level of a convergence study.
#[derive(Clone, Copy, Debug)]
pub struct LevelResult {
    pub n: usize,
    pub dt: f64,
    pub error_p: f64,
    pub error_theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyAxis {
    /// Refine the grid at fixed (small) dt; order fitted against h.
    Spatial,
    /// Refine dt at fixed grid; order fitted against dt.
    Temporal,
}

#[derive(Clone, Debug)]
pub struct StudyResult {
    pub axis: StudyAxis,
    pub levels: Vec<LevelResult>,
    /// Least-squares log-log slope over the finest three levels of the
    /// pressure error.
    pub order: f64,
}

fn rebuild_grid(base: Grid, n: usize) -> Result<Grid> {
    if base.dims() == 1 {
        Grid::new_1d(base.extent(0), n)
    } else {
        Grid::new_2d([base.extent(0), base.extent(1)], [n, n])
    }
}

/// Final-time L2 errors of one manufactured-solution run against the
/// exact fields.
pub fn mms_errors(cfg: &SimConfig) -> Result<(f64, f64)> {
    let ms = match &cfg.forcing {
        Forcing::Manufactured(ms) => *ms,
        Forcing::None => {
            return Err(SimError::invalid(
                "forcing",
                "convergence study needs a manufactured solution",
            ))
        }
    };
    let out = run_simulation(cfg);
    if let Some(e) = out.error {
        return Err(e);
    }
    let last = out
        .snapshots
        .last()
        .ok_or_else(|| SimError::invalid("run", "no snapshots produced"))?;
    let p_exact = ms.p_field(cfg.grid, last.t);
    let theta_exact = ms.theta_field(cfg.grid, last.t);
    let err_p = last.p.sub(&p_exact)?.norm(NormKind::L2);
    let err_theta = last.theta.sub(&theta_exact)?.norm(NormKind::L2);
    Ok((err_p, err_theta))
}

fn fit_order(levels: &[LevelResult], axis: StudyAxis, base: Grid, on_theta: bool) -> f64 {
    let take = levels.len().min(3);
    let pts: Vec<(f64, f64)> = levels[levels.len() - take..]
        .iter()
        .map(|l| {
            let x = match axis {
                StudyAxis::Spatial => base.extent(0) / (l.n as f64 + 1.0),
                StudyAxis::Temporal => l.dt,
            };
            let err = if on_theta { l.error_theta } else { l.error_p };
            (x.ln(), err.max(1e-300).ln())
        })
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Run a manufactured-solution refinement study. Levels run concurrently,
/// at most `threads` at a time.
pub fn convergence_study(
    base: &SimConfig,
    levels: &[(usize, f64)],
    axis: StudyAxis,
    threads: usize,
) -> Result<StudyResult> {
    if levels.len() < 3 {
        return Err(SimError::invalid("levels", "need at least 3 refinement levels"));
    }
    let mut results: Vec<Option<Result<LevelResult>>> = (0..levels.len()).map(|_| None).collect();
    let threads = threads.max(1);
    for chunk_start in (0..levels.len()).step_by(threads) {
        let chunk_end = (chunk_start + threads).min(levels.len());
        let mut outputs: Vec<(usize, Result<LevelResult>)> = Vec::new();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for idx in chunk_start..chunk_end {
                let (n, dt) = levels[idx];
                let base = base.clone();
                handles.push((
                    idx,
                    scope.spawn(move || -> Result<LevelResult> {
                        let mut cfg = base;
                        cfg.grid = rebuild_grid(cfg.grid, n)?;
                        cfg.dt = dt;
                        let steps = (cfg.t_end / dt).round().max(1.0) as usize;
                        cfg.output_every = steps.max(1);
                        let (error_p, error_theta) = mms_errors(&cfg)?;
                        Ok(LevelResult {
                            n,
                            dt,
                            error_p,
                            error_theta,
                        })
                    }),
                ));
            }
            for (idx, h) in handles {
                outputs.push((idx, h.join().expect("study thread panicked")));
            }
        });
        for (idx, r) in outputs {
            results[idx] = Some(r);
        }
    }
    let levels_out: Vec<LevelResult> = results
        .into_iter()
        .map(|r| r.expect("level not run"))
        .collect::<Result<_>>()?;
    // fit on the pressure error; for a heat-only manufactured solution
    // (zero pressure amplitude) fit on the temperature error instead
    let on_theta = matches!(&base.forcing, Forcing::Manufactured(ms) if ms.p_amp == 0.0);
    let order = fit_order(&levels_out, axis, base.grid, on_theta);
    Ok(StudyResult {
        axis,
        levels: levels_out,
        order,
    })
}

/// Sup-in-time combined difference norm of two trajectories, the discrete
/// surrogate of the solution-space norm used by the ball diagnostics.
pub fn trajectory_difference_norm(a: &[Snapshot], b: &[Snapshot]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SimError::ShapeMismatch("trajectory lengths differ".into()));
    }
    let mut sup: f64 = 0.0;
    for (sa, sb) in a.iter().zip(b) {
        let dp = sa.p.sub(&sb.p)?;
        let dpt = sa.pt.sub(&sb.pt)?;
        let dptt = sa.ptt.sub(&sb.ptt)?;
        let dth = sa.theta.sub(&sb.theta)?;
        let dth_t = sa.theta_t.sub(&sb.theta_t)?;
        let combined = dp.norm(NormKind::H3ViaGradLap)
            + dpt.norm(NormKind::H2ViaLap)
            + dptt.norm(NormKind::L2)
            + dth.norm(NormKind::H2ViaLap)
            + dth_t.norm(NormKind::L2);
        sup = sup.max(combined);
    }
    Ok(sup)
}

/// Comparison of a time-stepped single mode against the closed-form
/// oracle, across several step sizes.
#[derive(Clone, Debug)]
pub struct ModalCheck {
    /// (dt, final relative L2 error) per level, coarsest first.
    pub errors: Vec<(f64, f64)>,
    /// Log-log slope of error vs dt over the finest three levels.
    pub temporal_order: f64,
    /// Error at the finest level.
    pub finest_error: f64,
}

fn order_from_dt_errors(errors: &[(f64, f64)]) -> f64 {
    let take = errors.len().min(3);
    let pts: Vec<(f64, f64)> = errors[errors.len() - take..]
        .iter()
        .map(|&(dt, e)| (dt.ln(), e.max(1e-300).ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Evolve the lowest Dirichlet heat mode and compare against the modal
/// oracle at t_end, for each step size in `dts`.
pub fn heat_modal_check(
    grid: Grid,
    medium: &MediumParams,
    t_end: f64,
    dts: &[f64],
) -> Result<ModalCheck> {
    use crate::linear::{heat_step, ThermalState};
    let mode = Field::sine_mode(grid, [1, 1]);
    let kappa = grid.stencil_eigenvalue([1, 1]);
    let zero = Field::zeros(grid);
    // the pure mode test excludes the ambient forcing
    let medium = MediumParams {
        theta_a: 0.0,
        ..*medium
    };
    let mut errors = Vec::new();
    for &dt in dts {
        let steps = (t_end / dt).round().max(1.0) as usize;
        let dt_eff = t_end / steps as f64;
        let mut state = ThermalState {
            theta: mode.clone(),
            theta_t: Field::zeros(grid),
            t: 0.0,
        };
        for _ in 0..steps {
            state = heat_step(&state, &medium, &zero, &zero, dt_eff)?;
        }
        let expected = modal_oracle_heat(kappa, &medium, 1.0, t_end);
        let exact = mode.scaled(expected);
        let err = state.theta.sub(&exact)?.norm(NormKind::L2) / exact.norm(NormKind::L2);
        errors.push((dt_eff, err));
    }
    let temporal_order = order_from_dt_errors(&errors);
    let finest_error = errors.last().map(|&(_, e)| e).unwrap_or(f64::NAN);
    Ok(ModalCheck {
        errors,
        temporal_order,
        finest_error,
    })
}

/// Evolve the lowest damped-wave mode with constant alpha = 1, r = c2 and
/// compare against the characteristic-root oracle at t_end.
pub fn wave_modal_check(
    grid: Grid,
    c2: f64,
    b: f64,
    t_end: f64,
    dts: &[f64],
) -> Result<ModalCheck> {
    use crate::linear::{initial_ptt, pressure_step, AcousticState, FrozenCoefficients};
    let mode = Field::sine_mode(grid, [1, 1]);
    let kappa = grid.stencil_eigenvalue([1, 1]);
    let coeffs = FrozenCoefficients::new(
        Field::constant(grid, 1.0),
        Field::constant(grid, c2),
        Field::zeros(grid),
    )?;
    let mut errors = Vec::new();
    for &dt in dts {
        let steps = (t_end / dt).round().max(1.0) as usize;
        let dt_eff = t_end / steps as f64;
        let mut state = AcousticState {
            p: mode.clone(),
            pt: Field::zeros(grid),
            ptt: initial_ptt(&mode, &Field::zeros(grid), &coeffs, b)?,
            t: 0.0,
        };
        for _ in 0..steps {
            state = pressure_step(&state, &coeffs, b, dt_eff)?;
        }
        let (amp, _) = modal_oracle_damped_wave(kappa, c2, b, 1.0, 0.0, t_end);
        let exact = mode.scaled(amp);
        let denom = exact.norm(NormKind::L2).max(mode.norm(NormKind::L2) * 1e-6);
        let err = state.p.sub(&exact)?.norm(NormKind::L2) / denom;
        errors.push((dt_eff, err));
    }
    let temporal_order = order_from_dt_errors(&errors);
    let finest_error = errors.last().map(|&(_, e)| e).unwrap_or(f64::NAN);
    Ok(ModalCheck {
        errors,
        temporal_order,
        finest_error,
    })
}

/// Deterministic smooth pseudo-random field bounded by ~|amplitude|:
/// a random combination of the first few sine modes.
pub fn random_bounded_field(grid: Grid, amplitude: f64, seed: u64) -> Field {
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(0x2545f4914f6cdd1d);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state as f64 / u64::MAX as f64) * 2.0 - 1.0
    };
    let mut out = Field::zeros(grid);
    for m in 1..=4usize {
        let coeff = amplitude * next() / m as f64;
        let modes = [m, (m % 2) + 1];
        out.axpy(coeff, &Field::sine_mode(grid, modes)).expect("same grid");
    }
    out
}

/// Max sampled Lipschitz ratio of the absorption map over `trials` random
/// bounded history pairs on the given grid.
pub fn lipschitz_ratio_study(
    model: &crate::absorption::AbsorptionModel,
    grid: Grid,
    trials: usize,
    samples_per_history: usize,
    seed: u64,
) -> Result<f64> {
    use crate::absorption::{lipschitz_probe, PtHistory};
    let mut max_ratio: f64 = 0.0;
    for trial in 0..trials {
        let mk_history = |which: u64| -> Result<PtHistory> {
            let samples = (0..samples_per_history)
                .map(|i| {
                    let t = i as f64 * 0.1;
                    let f = random_bounded_field(
                        grid,
                        1.0,
                        seed ^ (trial as u64 * 1000 + which * 100 + i as u64 + 1),
                    );
                    (t, f)
                })
                .collect();
            PtHistory::from_samples(samples)
        };
        let u = mk_history(1)?;
        let v = mk_history(2)?;
        let probe = lipschitz_probe(model, &u, &v)?;
        max_ratio = max_ratio.max(probe.ratio);
    }
    Ok(max_ratio)
}

#[derive(Clone, Debug)]
pub struct DependenceProbe {
    /// (delta, difference norm, ratio = norm / delta) per perturbation.
    pub entries: Vec<(f64, f64, f64)>,
}

/// Perturb p0 by delta times the lowest sine mode, run base and perturbed
/// simulations, and record the sup-in-time combined difference norms.
pub fn continuous_dependence_probe(cfg: &SimConfig, deltas: &[f64]) -> Result<DependenceProbe> {
    let base_out = run_simulation(cfg);
    if let Some(e) = base_out.error {
        return Err(e);
    }
    let mut entries = Vec::new();
    for &delta in deltas {
        let mut perturbed = cfg.clone();
        perturbed
            .initial
            .p0
            .push(crate::coupled::InitialProfile::Sine {
                amplitude: delta,
                modes: [1, 1],
            });
        let out = run_simulation(&perturbed);
        if let Some(e) = out.error {
            return Err(e);
        }
        let norm = trajectory_difference_norm(&base_out.snapshots, &out.snapshots)?;
        let ratio = if delta == 0.0 { 0.0 } else { norm / delta };
        entries.push((delta, norm, ratio));
    }
    Ok(DependenceProbe { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::test_medium;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn oracle_initial_conditions() {
        // the overdamped branch loses a couple of digits to cancellation
        // in the partial-fraction coefficients, hence 1e-12
        for (b, kappa) in [(0.0, 9.5), (0.5, 9.5), (10.0, 9.5)] {
            let (p, pt) = modal_oracle_damped_wave(kappa, 2.0, b, 1.3, -0.4, 0.0);
            assert!(rel_err(p, 1.3) < 1e-12, "b={b}");
            assert!(rel_err(pt, -0.4) < 1e-12, "b={b}");
        }
        let medium = test_medium();
        assert_eq!(modal_oracle_heat(3.0, &medium, 2.5, 0.0), 2.5);
        assert_eq!(modal_oracle_heat(3.0, &medium, 0.0, 1.0), 0.0);
    }

    #[test]
    fn undamped_oracle_is_cosine() {
        let kappa = 4.0;
        let c2 = 2.25;
        let t = 0.37;
        let (p, _) = modal_oracle_damped_wave(kappa, c2, 0.0, 1.0, 0.0, t);
        let expected = ((c2 * kappa).sqrt() * t).cos();
        assert!(rel_err(p, expected) < 1e-14);
    }

    #[test]
    fn overdamped_branch_monotone_decay() {
        let kappa = 100.0;
        let c2 = 1.0;
        let b = 1.0; // b^2 kappa = 100 > 4 c2 = 4
        assert!(b * b * kappa > 4.0 * c2);
        let mut prev = 1.0;
        for i in 1..50 {
            let t = i as f64 * 0.05;
            let (p, _) = modal_oracle_damped_wave(kappa, c2, b, 1.0, 0.0, t);
            assert!(p < prev && p > 0.0, "t={t}: {p} vs {prev}");
            prev = p;
        }
    }

    #[test]
    fn heat_oracle_pure_diffusion_rate() {
        let medium = MediumParams {
            perfusion: 0.0,
            rho_a: 2.0,
            cap_a: 3.0,
            kappa_a: 0.5,
            ..test_medium()
        };
        let kappa = 7.0;
        let t = 1.3;
        let got = modal_oracle_heat(kappa, &medium, 1.0, t);
        let expected = (-0.5 * 7.0 * t / 6.0_f64).exp();
        assert!(rel_err(got, expected) < 1e-14);
    }

    #[test]
    fn oracles_match_independent_rk4_integration() {
        // independent route: RK4 with tiny steps on the modal ODEs
        let kappa = 9.87;
        let c2 = 2.25;
        let t_end = 1.0;
        for &b in &[0.02, 0.4, 2.0] {
            let steps = 50_000usize;
            let dt = t_end / steps as f64;
            let mut y = [1.0f64, -0.3f64];
            let f = |y: [f64; 2]| [y[1], -b * kappa * y[1] - c2 * kappa * y[0]];
            for _ in 0..steps {
                let k1 = f(y);
                let k2 = f([y[0] + 0.5 * dt * k1[0], y[1] + 0.5 * dt * k1[1]]);
                let k3 = f([y[0] + 0.5 * dt * k2[0], y[1] + 0.5 * dt * k2[1]]);
                let k4 = f([y[0] + dt * k3[0], y[1] + dt * k3[1]]);
                y[0] += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
                y[1] += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
            }
            let (p, pt) = modal_oracle_damped_wave(kappa, c2, b, 1.0, -0.3, t_end);
            assert!(rel_err(p, y[0]) < 1e-12, "b={b}: {p} vs {}", y[0]);
            assert!(rel_err(pt, y[1]) < 1e-11, "b={b}: {pt} vs {}", y[1]);
        }

        // heat: a'' absent, single exponential
        let medium = test_medium();
        let steps = 50_000usize;
        let dt = t_end / steps as f64;
        let rate = (medium.kappa_a * kappa + medium.rho_b * medium.cap_b * medium.perfusion)
            / (medium.rho_a * medium.cap_a);
        let mut a = 1.0f64;
        for _ in 0..steps {
            let k1 = -rate * a;
            let k2 = -rate * (a + 0.5 * dt * k1);
            let k3 = -rate * (a + 0.5 * dt * k2);
            let k4 = -rate * (a + dt * k3);
            a += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!(rel_err(modal_oracle_heat(kappa, &medium, 1.0, t_end), a) < 1e-12);
    }

    #[test]
    fn temporal_study_on_linear_wave_mms_gives_order_two() {
        // beta = 0 linear damped-wave manufactured solution; dt refined at
        // fixed n = 255, where the spatial defect is far below the
        // temporal error of the coarsest dt
        let mut cfg = crate::coupled::tests::basic_config(255, 0.0);
        cfg.t_end = 1.3e-4;
        let q0 = crate::material::q_of_theta(&cfg.law, 0.0);
        let kappa = (std::f64::consts::PI / cfg.grid.extent(0)).powi(2);
        let natural = (q0 * kappa).sqrt();
        cfg.forcing = crate::coupled::Forcing::Manufactured(crate::mms::ManufacturedSolution {
            p_amp: 1e5,
            p_modes: [1, 1],
            p_freq: 0.7 * natural,
            theta_amp: 2.0,
            theta_modes: [2, 1],
            theta_freq: 0.5 * natural,
        });
        let dt0 = 7.9e-6;
        let levels = [(255, dt0), (255, dt0 / 2.0), (255, dt0 / 4.0)];
        let study = convergence_study(&cfg, &levels, StudyAxis::Temporal, 3).unwrap();
        assert!(
            (study.order - 2.0).abs() <= 0.1,
            "temporal order {} (errors {:?})",
            study.order,
            study.levels
        );
    }

    #[test]
    fn fit_order_recovers_slope_two() {
        let base = Grid::new_1d(1.0, 15).unwrap();
        let levels: Vec<LevelResult> = [15usize, 31, 63]
            .iter()
            .map(|&n| {
                let h = 1.0 / (n as f64 + 1.0);
                LevelResult {
                    n,
                    dt: 1e-3,
                    error_p: 3.0 * h * h,
                    error_theta: 0.0,
                }
            })
            .collect();
        let order = fit_order(&levels, StudyAxis::Spatial, base, false);
        assert!((order - 2.0).abs() < 1e-12);
    }
}
