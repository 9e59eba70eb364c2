//! The coupled nonlinear solver: per-time-step fixed-point (Picard)
//! iteration over the frozen-coefficient linear sub-solves.
//!
//! Each step freezes the iterate (p*, Theta*) at the new time level,
//! builds alpha = 1 - 2 k(Theta*) p*, r = q(Theta*) and the source
//! f1 = 2 k(Theta*) (p*_t)^2, advances the wave and heat sub-problems,
//! and repeats until the relative change of (p, Theta) drops below the
//! tolerance. The non-degeneracy value min(1 - 2 k(Theta) p) is guarded
//! against a configurable floor at every iterate, and the iteration is
//! warm-started from the previous level's converged state. Inner Krylov
//! solves always start from the previous level's data, so a fixed
//! point is detected bitwise when the map is constant in the iterate.

use crate::absorption::{absorbed_energy_with_trial, AbsorptionModel, PtHistory};
use crate::energy::{f_static_part, heat_energy, lambda_f, CoeffSnapshot, EnergyReport};
use crate::error::{Result, SimError};
use crate::grid::{Field, Grid, NormKind};
use crate::linear::{
    heat_step, initial_ptt, pressure_step, AcousticState, FrozenCoefficients, ThermalState,
};
use crate::material::{k_of_theta, q_of_theta, MediumParams, SoundSpeedLaw};
use crate::mms::ManufacturedSolution;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardSettings {
    /// Relative residual tolerance on the iterate change.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardSettings {
    fn default() -> Self {
        PicardSettings {
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AbsorptionSettings {
    pub model: AbsorptionModel,
    /// Keep every k-th p_t snapshot in the averaging history.
    pub decimation: usize,
    /// Ring-buffer capacity for stored snapshots.
    pub capacity: usize,
}

/// Initial-data building blocks; contributions are summed.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialProfile {
    Zero,
    Sine {
        amplitude: f64,
        modes: [usize; 2],
    },
    Gaussian {
        amplitude: f64,
        center: [f64; 2],
        width: f64,
    },
}

impl InitialProfile {
    pub fn eval(&self, grid: Grid, x: [f64; 2]) -> f64 {
        match *self {
            InitialProfile::Zero => 0.0,
            InitialProfile::Sine { amplitude, modes } => {
                use std::f64::consts::PI;
                let mut v = amplitude * (modes[0] as f64 * PI * x[0] / grid.extent(0)).sin();
                if grid.dims() == 2 {
                    v *= (modes[1] as f64 * PI * x[1] / grid.extent(1)).sin();
                }
                v
            }
            InitialProfile::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let mut r2 = (x[0] - center[0]) * (x[0] - center[0]);
                if grid.dims() == 2 {
                    r2 += (x[1] - center[1]) * (x[1] - center[1]);
                }
                amplitude * (-r2 / (width * width)).exp()
            }
        }
    }
}

/// A traveling Gaussian pulse: contributes `A exp(-((x-c)/w)^2)` to p0 and
/// the matching `-dir c_a d/dx0 p0` to p1, so it initially propagates along
/// axis 0 in the chosen direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSpec {
    pub amplitude: f64,
    pub center: [f64; 2],
    pub width: f64,
    /// +1 -> toward increasing x0, -1 -> decreasing.
    pub direction: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct InitialData {
    pub p0: Vec<InitialProfile>,
    pub p1: Vec<InitialProfile>,
    pub pulses: Vec<PulseSpec>,
    pub theta0: Vec<InitialProfile>,
}

impl InitialData {
    fn sum_profiles(grid: Grid, profiles: &[InitialProfile]) -> Field {
        Field::from_fn(grid, |x| profiles.iter().map(|p| p.eval(grid, x)).sum())
    }

    pub fn build(&self, grid: Grid, c_a: f64) -> (Field, Field, Field) {
        let mut p0 = Self::sum_profiles(grid, &self.p0);
        let mut p1 = Self::sum_profiles(grid, &self.p1);
        for pulse in &self.pulses {
            let shape = Field::from_fn(grid, |x| {
                let d = x[0] - pulse.center[0];
                pulse.amplitude * (-d * d / (pulse.width * pulse.width)).exp()
            });
            let dshape = Field::from_fn(grid, |x| {
                let d = x[0] - pulse.center[0];
                pulse.amplitude
                    * (-d * d / (pulse.width * pulse.width)).exp()
                    * (-2.0 * d / (pulse.width * pulse.width))
            });
            p0.axpy(1.0, &shape).expect("same grid");
            p1.axpy(-pulse.direction * c_a, &dshape).expect("same grid");
        }
        let theta0 = Self::sum_profiles(grid, &self.theta0);
        (p0, p1, theta0)
    }
}

/// External forcing hooks; the true nonlinear problem runs with `None`,
/// the verification harness injects manufactured sources.
#[derive(Clone, Debug, PartialEq)]
pub enum Forcing {
    None,
    Manufactured(ManufacturedSolution),
}

/// Validated runtime configuration of one simulation.
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub grid: Grid,
    pub medium: MediumParams,
    pub law: SoundSpeedLaw,
    pub absorption: AbsorptionSettings,
    pub dt: f64,
    pub t_end: f64,
    pub picard: PicardSettings,
    /// Minimum allowed value of 1 - 2 k(Theta) p.
    pub degeneracy_floor: f64,
    pub initial: InitialData,
    /// Emit snapshots and energy reports every k-th step.
    pub output_every: usize,
    /// Warn when gamma_observed exceeds this fraction of 1/(2 k1).
    pub gamma_cap_fraction: f64,
    /// Pass/fail cap for the fitted Gronwall constant.
    pub gronwall_cap: f64,
    /// Freeze q and k at the ambient temperature (removes the thermal
    /// feedback on the acoustics; the reference run for lensing).
    pub frozen_temperature: bool,
    pub forcing: Forcing,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.medium.validate()?;
        if !(self.dt > 0.0) {
            return Err(SimError::invalid("time.dt", "must be > 0"));
        }
        if !(self.t_end >= self.dt) {
            return Err(SimError::invalid("time.t_end", "must allow at least one step"));
        }
        if !(self.picard.tol > 0.0) {
            return Err(SimError::invalid("picard.tol", "must be > 0"));
        }
        if self.picard.max_iter < 1 {
            return Err(SimError::invalid("picard.max_iter", "must be >= 1"));
        }
        if !(self.degeneracy_floor > 0.0 && self.degeneracy_floor < 1.0) {
            return Err(SimError::invalid(
                "diagnostics.degeneracy_floor",
                "must lie strictly between 0 and 1",
            ));
        }
        if self.output_every == 0 {
            return Err(SimError::invalid("output.every", "must be >= 1"));
        }
        if self.absorption.decimation == 0 {
            return Err(SimError::invalid("absorption.decimation", "must be >= 1"));
        }
        if let Forcing::Manufactured(_) = self.forcing {
            if !matches!(
                self.absorption.model.variant,
                crate::absorption::AbsorptionVariant::Instantaneous
            ) {
                return Err(SimError::invalid(
                    "forcing",
                    "manufactured solutions require the instantaneous absorption model",
                ));
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

/// Full solver state between steps.
#[derive(Clone, Debug)]
pub struct CoupledState {
    pub acoustic: AcousticState,
    pub thermal: ThermalState,
    pub history: PtHistory,
    /// Cached completed average for the windowed/full absorption variants.
    frozen_q: Option<Field>,
    pub diagnostics: RunningDiagnostics,
}

#[derive(Clone, Debug, Default)]
pub struct RunningDiagnostics {
    /// Running minimum of 1 - 2 k(Theta) p over the whole run.
    pub min_alpha: f64,
    /// Nodes-times-evaluations where the q-floor clamped the law.
    pub clamp_events: u64,
    /// Picard iteration count per completed step.
    pub picard_iterations: Vec<usize>,
    /// Residual sequence of every completed step.
    pub residual_sequences: Vec<Vec<f64>>,
}

/// Per-step outcome of the fixed-point iteration.
#[derive(Clone, Debug)]
pub struct StepInfo {
    pub iterations: usize,
    pub residual: f64,
    pub residuals: Vec<f64>,
}

/// Pointwise minimum of the non-degeneracy value 1 - 2 k(Theta) p and the
/// node where it is attained.
pub fn check_nondegeneracy(
    p: &Field,
    theta: &Field,
    medium: &MediumParams,
    law: &SoundSpeedLaw,
) -> Result<(f64, Vec<usize>)> {
    if p.grid() != theta.grid() {
        return Err(SimError::ShapeMismatch("p and theta grids differ".into()));
    }
    let mut min_v = f64::INFINITY;
    let mut min_i = 0;
    for (i, (&pv, &tv)) in p.values().iter().zip(theta.values()).enumerate() {
        let v = 1.0 - 2.0 * k_of_theta(medium, law, tv) * pv;
        if v < min_v {
            min_v = v;
            min_i = i;
        }
    }
    Ok((min_v, p.grid().unflatten(min_i)))
}

/// Frozen coefficient fields evaluated from an iterate, plus the number of
/// q-floor clamps that occurred.
fn coefficient_fields(
    cfg: &SimConfig,
    p: &Field,
    pt: &Field,
    theta: &Field,
    f1_ext: Option<&Field>,
) -> Result<(FrozenCoefficients, u64, f64, Vec<usize>)> {
    let grid = cfg.grid;
    let n = grid.len();
    let mut alpha = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut f1 = vec![0.0; n];
    let mut clamps = 0u64;
    let mut min_alpha = f64::INFINITY;
    let mut min_idx = 0;
    for i in 0..n {
        let theta_i = if cfg.frozen_temperature {
            cfg.medium.theta_a
        } else {
            theta.values()[i]
        };
        if cfg.law.clamps_at(theta_i) {
            clamps += 1;
        }
        let q = q_of_theta(&cfg.law, theta_i);
        let k = k_of_theta(&cfg.medium, &cfg.law, theta_i);
        let a = 1.0 - 2.0 * k * p.values()[i];
        if a < min_alpha {
            min_alpha = a;
            min_idx = i;
        }
        alpha[i] = a;
        r[i] = q;
        let pt_i = pt.values()[i];
        f1[i] = 2.0 * k * pt_i * pt_i;
    }
    if let Some(ext) = f1_ext {
        for (v, &e) in f1.iter_mut().zip(ext.values()) {
            *v += e;
        }
    }
    let location = grid.unflatten(min_idx);
    if min_alpha < cfg.degeneracy_floor {
        return Err(SimError::Degeneracy {
            min_value: min_alpha,
            location,
            floor: cfg.degeneracy_floor,
        });
    }
    let coeffs = FrozenCoefficients::new(
        Field::from_values(grid, alpha)?,
        Field::from_values(grid, r)?,
        Field::from_values(grid, f1)?,
    )?;
    Ok((coeffs, clamps, min_alpha, location))
}

fn forcing_fields(cfg: &SimConfig, t_new: f64, dt: f64) -> (Option<Field>, Field) {
    match &cfg.forcing {
        Forcing::None => (None, Field::zeros(cfg.grid)),
        Forcing::Manufactured(ms) => {
            let f1 = ms.f1_field(cfg.grid, &cfg.medium, &cfg.law, t_new);
            // heat source sampled at the step midpoint
            let f2 = ms.f2_field(
                cfg.grid,
                &cfg.medium,
                &cfg.absorption.model,
                t_new - 0.5 * dt,
            );
            (Some(f1), f2)
        }
    }
}

/// Relative change with an absolute fallback when the denominator vanishes.
fn relative_change(new: &Field, old: &Field) -> Result<f64> {
    let delta = new.sub(old)?.norm(NormKind::L2);
    let denom = new.norm(NormKind::L2);
    if denom <= 1e-14 {
        Ok(delta)
    } else {
        Ok(delta / denom)
    }
}

/// Build the initial coupled state, enforcing the degeneracy floor on the
/// initial data before any time advance.
pub fn build_initial_state(cfg: &SimConfig) -> Result<CoupledState> {
    cfg.validate()?;
    let (p0, p1, theta0) = match &cfg.forcing {
        Forcing::Manufactured(ms) => (
            ms.p_field(cfg.grid, 0.0),
            ms.p_t_field(cfg.grid, 0.0),
            ms.theta_field(cfg.grid, 0.0),
        ),
        Forcing::None => cfg.initial.build(cfg.grid, cfg.medium.c_a),
    };

    let (f1_ext, _) = forcing_fields(cfg, 0.0, cfg.dt);
    let (coeffs, clamps, min_alpha, _) =
        coefficient_fields(cfg, &p0, &p1, &theta0, f1_ext.as_ref())?;
    let ptt0 = initial_ptt(&p0, &p1, &coeffs, cfg.medium.b)?;

    let mut history = PtHistory::new(cfg.absorption.decimation, cfg.absorption.capacity);
    history.push(0.0, p1.clone())?;

    Ok(CoupledState {
        acoustic: AcousticState {
            p: p0,
            pt: p1,
            ptt: ptt0,
            t: 0.0,
        },
        thermal: ThermalState {
            theta: theta0,
            theta_t: Field::zeros(cfg.grid),
            t: 0.0,
        },
        history,
        frozen_q: None,
        diagnostics: RunningDiagnostics {
            min_alpha,
            clamp_events: clamps,
            ..Default::default()
        },
    })
}

/// Absorbed-energy field for a trial p_t at the new level, honoring the
/// frozen cache once the averaging range has completed.
fn q_field_for_trial(
    cfg: &SimConfig,
    state: &CoupledState,
    t_new: f64,
    pt_trial: &Field,
) -> Result<Field> {
    if let Some(frozen) = &state.frozen_q {
        return Ok(frozen.clone());
    }
    absorbed_energy_with_trial(
        &cfg.absorption.model,
        &state.history,
        Some((t_new, pt_trial)),
    )
}

/// Advance one time step by Picard iteration. Returns the converged state
/// and the iteration record.
pub fn picard_step(state: &CoupledState, cfg: &SimConfig) -> Result<(CoupledState, StepInfo)> {
    let dt = cfg.dt;
    let t_new = state.acoustic.t + dt;
    let (f1_ext, f2) = forcing_fields(cfg, t_new, dt);

    // warm start: previous level's converged state
    let mut p_star = state.acoustic.p.clone();
    let mut pt_star = state.acoustic.pt.clone();
    let mut theta_star = state.thermal.theta.clone();

    let mut residuals = Vec::new();
    let mut acoustic_new = state.acoustic.clone();
    let mut thermal_new = state.thermal.clone();
    let mut clamp_total = 0u64;
    let mut min_alpha_step = f64::INFINITY;
    let mut converged = false;

    for _iter in 0..cfg.picard.max_iter {
        let (coeffs, clamps, min_alpha, _) =
            coefficient_fields(cfg, &p_star, &pt_star, &theta_star, f1_ext.as_ref())?;
        clamp_total += clamps;
        min_alpha_step = min_alpha_step.min(min_alpha);

        acoustic_new = pressure_step(&state.acoustic, &coeffs, cfg.medium.b, dt)?;
        let q = q_field_for_trial(cfg, state, t_new, &acoustic_new.pt)?;
        thermal_new = heat_step(&state.thermal, &cfg.medium, &q, &f2, dt)?;

        let res_p = relative_change(&acoustic_new.p, &p_star)?;
        let res_theta = relative_change(&thermal_new.theta, &theta_star)?;
        let residual = res_p.max(res_theta);
        residuals.push(residual);

        p_star = acoustic_new.p.clone();
        pt_star = acoustic_new.pt.clone();
        theta_star = thermal_new.theta.clone();

        if residual < cfg.picard.tol {
            converged = true;
            break;
        }
    }

    let residual = *residuals.last().unwrap_or(&f64::INFINITY);
    if !converged {
        return Err(SimError::NonConvergence {
            iterations: cfg.picard.max_iter,
            residual,
        });
    }

    // converged-state degeneracy bookkeeping
    let (min_alpha_final, location) = check_nondegeneracy(
        &acoustic_new.p,
        &thermal_new.theta,
        &cfg.medium,
        &cfg.law,
    )?;
    let effective_min = if cfg.frozen_temperature {
        min_alpha_step
    } else {
        min_alpha_step.min(min_alpha_final)
    };
    if min_alpha_final < cfg.degeneracy_floor && !cfg.frozen_temperature {
        return Err(SimError::Degeneracy {
            min_value: min_alpha_final,
            location,
            floor: cfg.degeneracy_floor,
        });
    }

    let mut next = CoupledState {
        acoustic: acoustic_new,
        thermal: thermal_new,
        history: state.history.clone(),
        frozen_q: state.frozen_q.clone(),
        diagnostics: state.diagnostics.clone(),
    };
    next.history.push(t_new, next.acoustic.pt.clone())?;
    if next.frozen_q.is_none() {
        if let Some(t_complete) = cfg.absorption.model.completion_time() {
            if t_new >= t_complete {
                next.frozen_q = Some(crate::absorption::absorbed_energy(
                    &cfg.absorption.model,
                    &next.history,
                )?);
            }
        }
    }
    next.diagnostics.min_alpha = next.diagnostics.min_alpha.min(effective_min);
    next.diagnostics.clamp_events += clamp_total;
    let iterations = residuals.len();
    next.diagnostics.picard_iterations.push(iterations);
    next.diagnostics.residual_sequences.push(residuals.clone());

    Ok((
        next,
        StepInfo {
            iterations,
            residual,
            residuals,
        },
    ))
}

/// One recorded output snapshot.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub p: Field,
    pub pt: Field,
    pub ptt: Field,
    pub theta: Field,
    pub theta_t: Field,
}

/// Ball-style diagnostics over a trajectory: the observed sup-norm of the
/// pressure, discrete surrogates of the solution-space norms, and the
/// margin of the smallness condition gamma * 2 k1 < 1.
#[derive(Clone, Copy, Debug)]
pub struct BallDiagnostics {
    pub gamma_observed: f64,
    pub r1_style_norm: f64,
    pub r2_style_norm: f64,
    /// 1 - gamma_observed * 2 k1; positive inside the admissible ball.
    pub margin: f64,
}

pub fn ball_diagnostics(trajectory: &[Snapshot], medium: &MediumParams) -> BallDiagnostics {
    let mut gamma: f64 = 0.0;
    let mut p_h3: f64 = 0.0;
    let mut pt_h2: f64 = 0.0;
    let mut ptt_l2: f64 = 0.0;
    let mut th_h2: f64 = 0.0;
    let mut th_t_l2: f64 = 0.0;
    for snap in trajectory {
        gamma = gamma.max(snap.p.max_abs());
        p_h3 = p_h3.max(snap.p.norm(NormKind::H3ViaGradLap));
        pt_h2 = pt_h2.max(snap.pt.norm(NormKind::H2ViaLap));
        ptt_l2 = ptt_l2.max(snap.ptt.norm(NormKind::L2));
        th_h2 = th_h2.max(snap.theta.norm(NormKind::H2ViaLap));
        th_t_l2 = th_t_l2.max(snap.theta_t.norm(NormKind::L2));
    }
    BallDiagnostics {
        gamma_observed: gamma,
        r1_style_norm: p_h3 + pt_h2 + ptt_l2,
        r2_style_norm: th_h2 + th_t_l2,
        margin: 1.0 - gamma * 2.0 * medium.k1(),
    }
}

/// Final run summary.
#[derive(Clone, Debug)]
pub struct FinalDiagnostics {
    pub min_alpha: f64,
    pub clamp_events: u64,
    pub picard_iterations: Vec<usize>,
    pub residual_sequences: Vec<Vec<f64>>,
    pub ball: BallDiagnostics,
    pub steps_completed: usize,
}

/// Everything a run produces. `error` is populated when the run aborted;
/// the trajectory then holds the part completed before the failure.
#[derive(Debug)]
pub struct RunOutcome {
    pub snapshots: Vec<Snapshot>,
    pub reports: Vec<EnergyReport>,
    pub diagnostics: FinalDiagnostics,
    pub error: Option<SimError>,
}

impl RunOutcome {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

fn snapshot_of(state: &CoupledState) -> Snapshot {
    Snapshot {
        t: state.acoustic.t,
        p: state.acoustic.p.clone(),
        pt: state.acoustic.pt.clone(),
        ptt: state.acoustic.ptt.clone(),
        theta: state.thermal.theta.clone(),
        theta_t: state.thermal.theta_t.clone(),
    }
}

fn report_of(
    cfg: &SimConfig,
    state: &CoupledState,
    prev_coeffs: Option<&CoeffSnapshot>,
) -> Result<(EnergyReport, CoeffSnapshot)> {
    let t = state.acoustic.t;
    let (f1_ext, _) = forcing_fields(cfg, t, cfg.dt);
    let (coeffs, _, min_alpha, _) = coefficient_fields(
        cfg,
        &state.acoustic.p,
        &state.acoustic.pt,
        &state.thermal.theta,
        f1_ext.as_ref(),
    )?;
    let (e0, e1, e2, d_p) =
        crate::energy::acoustic_energies(&state.acoustic, &coeffs, cfg.medium.b)?;
    let (e_theta, d_theta) = heat_energy(&state.thermal);
    let snap = CoeffSnapshot {
        t,
        alpha: coeffs.alpha.clone(),
        r: coeffs.r.clone(),
        f1: coeffs.f1.clone(),
    };
    let (lambda, f_term) = match prev_coeffs {
        Some(prev) => lambda_f(prev, &snap)?,
        // no previous level yet: spatial parts only
        None => (
            crate::energy::lambda_static_part(&snap.alpha, &snap.r),
            f_static_part(&snap.f1),
        ),
    };
    Ok((
        EnergyReport {
            t,
            e0,
            e1,
            e2,
            d_p,
            e_theta,
            d_theta,
            lambda,
            f_term,
            min_alpha,
        },
        snap,
    ))
}

/// Time loop from 0 to t_end with output at the configured cadence. On a
/// solver error the partial trajectory is returned together with the error.
pub fn run_simulation(cfg: &SimConfig) -> RunOutcome {
    let empty_diag = |steps: usize| FinalDiagnostics {
        min_alpha: f64::INFINITY,
        clamp_events: 0,
        picard_iterations: Vec::new(),
        residual_sequences: Vec::new(),
        ball: BallDiagnostics {
            gamma_observed: 0.0,
            r1_style_norm: 0.0,
            r2_style_norm: 0.0,
            margin: 1.0,
        },
        steps_completed: steps,
    };

    let mut state = match build_initial_state(cfg) {
        Ok(s) => s,
        Err(e) => {
            return RunOutcome {
                snapshots: Vec::new(),
                reports: Vec::new(),
                diagnostics: empty_diag(0),
                error: Some(e),
            }
        }
    };

    let mut snapshots = Vec::new();
    let mut reports = Vec::new();
    let mut prev_coeffs: Option<CoeffSnapshot> = None;
    let mut error = None;

    let record =
        |state: &CoupledState,
         snapshots: &mut Vec<Snapshot>,
         reports: &mut Vec<EnergyReport>,
         prev_coeffs: &mut Option<CoeffSnapshot>|
         -> Result<()> {
            snapshots.push(snapshot_of(state));
            let (report, snap) = report_of(cfg, state, prev_coeffs.as_ref())?;
            reports.push(report);
            *prev_coeffs = Some(snap);
            Ok(())
        };

    if let Err(e) = record(&state, &mut snapshots, &mut reports, &mut prev_coeffs) {
        return RunOutcome {
            snapshots,
            reports,
            diagnostics: empty_diag(0),
            error: Some(e),
        };
    }

    let n_steps = cfg.n_steps();
    let mut completed = 0;
    for step in 1..=n_steps {
        match picard_step(&state, cfg) {
            Ok((next, _info)) => {
                state = next;
                completed = step;
                if step % cfg.output_every == 0 || step == n_steps {
                    if let Err(e) = record(&state, &mut snapshots, &mut reports, &mut prev_coeffs)
                    {
                        error = Some(e);
                        break;
                    }
                }
            }
            Err(e) => {
                error = Some(e);
                break;
            }
        }
    }

    let ball = ball_diagnostics(&snapshots, &cfg.medium);
    let diagnostics = FinalDiagnostics {
        min_alpha: state.diagnostics.min_alpha,
        clamp_events: state.diagnostics.clamp_events,
        picard_iterations: state.diagnostics.picard_iterations.clone(),
        residual_sequences: state.diagnostics.residual_sequences.clone(),
        ball,
        steps_completed: completed,
    };
    RunOutcome {
        snapshots,
        reports,
        diagnostics,
        error,
    }
}
