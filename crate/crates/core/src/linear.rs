//! One-step implicit solvers for the two frozen-coefficient linear
//! sub-problems: the strongly damped wave equation
//! `alpha p_tt - r lap p - b lap p_t = f1` advanced by average-acceleration
//! Newmark (gamma = 1/2, beta = 1/4), and the Pennes heat equation advanced
//! by Crank-Nicolson.
//!
//! The Newmark operator `alpha I - s(x) lap`, with `s = beta dt^2 r + gamma
//! dt b > 0`, is self-adjoint and positive definite in the inner product
//! weighted by `1/s`, for arbitrary positive variable `alpha` and `r`. The
//! inner conjugate-gradient solve therefore runs with that weighted inner
//! product and converges without assumptions beyond positivity. Relative
//! residual tolerance is 1e-10, capped at 10 n iterations.

use crate::error::{Result, SimError};
use crate::grid::Field;
use crate::material::MediumParams;

pub const CG_TOL: f64 = 1e-10;

/// Frozen variable coefficients of the linearized pressure equation,
/// with observed pointwise bounds.
#[derive(Clone, Debug)]
pub struct FrozenCoefficients {
    pub alpha: Field,
    pub r: Field,
    pub f1: Field,
    pub alpha_bounds: (f64, f64),
    pub r_bounds: (f64, f64),
}

impl FrozenCoefficients {
    /// Validates the non-degeneracy bounds: min alpha and min r must be
    /// strictly positive.
    pub fn new(alpha: Field, r: Field, f1: Field) -> Result<Self> {
        if alpha.grid() != r.grid() || alpha.grid() != f1.grid() {
            return Err(SimError::ShapeMismatch(
                "coefficient fields live on different grids".into(),
            ));
        }
        let a_min = alpha.min_value();
        let a_max = alpha.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let r_min = r.min_value();
        let r_max = r.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(a_min > 0.0) {
            let loc = alpha
                .values()
                .iter()
                .position(|&v| v == a_min)
                .unwrap_or(0);
            return Err(SimError::Degeneracy {
                min_value: a_min,
                location: alpha.grid().unflatten(loc),
                floor: 0.0,
            });
        }
        if !(r_min > 0.0) {
            return Err(SimError::invalid("r", "wave-speed coefficient must stay > 0"));
        }
        Ok(FrozenCoefficients {
            alpha,
            r,
            f1,
            alpha_bounds: (a_min, a_max),
            r_bounds: (r_min, r_max),
        })
    }
}

/// Wave unknowns (p, p_t, p_tt) at one time level.
#[derive(Clone, Debug)]
pub struct AcousticState {
    pub p: Field,
    pub pt: Field,
    pub ptt: Field,
    pub t: f64,
}

impl AcousticState {
    pub fn zeros(grid: crate::grid::Grid) -> Self {
        AcousticState {
            p: Field::zeros(grid),
            pt: Field::zeros(grid),
            ptt: Field::zeros(grid),
            t: 0.0,
        }
    }
}

/// Temperature unknowns (Theta, Theta_t) at one time level.
#[derive(Clone, Debug)]
pub struct ThermalState {
    pub theta: Field,
    pub theta_t: Field,
    pub t: f64,
}

impl ThermalState {
    pub fn zeros(grid: crate::grid::Grid) -> Self {
        ThermalState {
            theta: Field::zeros(grid),
            theta_t: Field::zeros(grid),
            t: 0.0,
        }
    }
}

/// Consistent initial acceleration from the PDE at t = 0:
/// `p_tt(0) = alpha(0)^{-1} (r(0) lap p0 + b lap p1 + f1(0))`.
pub fn initial_ptt(p0: &Field, p1: &Field, coeffs: &FrozenCoefficients, b: f64) -> Result<Field> {
    let lap_p0 = p0.laplacian();
    let lap_p1 = p1.laplacian();
    let mut out = coeffs.f1.clone();
    out.axpy(b, &lap_p1)?;
    let r_lap = coeffs.r.zip_with(&lap_p0, |r, l| r * l)?;
    out.axpy(1.0, &r_lap)?;
    out.zip_with(&coeffs.alpha, |num, a| num / a)
}

/// Conjugate gradients with a diagonal-weighted inner product
/// `<u, v>_w = sum u v w`. The Newmark operator is self-adjoint positive
/// definite in this product for `w = 1/s`.
fn cg_weighted(
    apply: impl Fn(&[f64], &mut [f64]),
    rhs: &[f64],
    x0: &[f64],
    weight: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = rhs.len();
    let dot = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(weight)
            .map(|((&x, &y), &w)| x * y * w)
            .sum()
    };
    let rhs_norm = dot(rhs, rhs).sqrt();
    if rhs_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }

    let mut x = x0.to_vec();
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut res: Vec<f64> = rhs.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
    let mut rr = dot(&res, &res);
    if rr.sqrt() <= tol * rhs_norm {
        return Ok(x);
    }
    let mut p = res.clone();
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(SimError::LinearSolve {
                iterations: max_iter,
                residual: rr.sqrt() / rhs_norm,
            });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            res[i] -= alpha * ap[i];
        }
        let rr_new = dot(&res, &res);
        if rr_new.sqrt() <= tol * rhs_norm {
            return Ok(x);
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = res[i] + beta * p[i];
        }
    }
    Err(SimError::LinearSolve {
        iterations: max_iter,
        residual: rr.sqrt() / rhs_norm,
    })
}

/// One average-acceleration Newmark step of
/// `alpha p_tt - r lap p - b lap p_t = f1` with coefficients frozen over
/// the step. Solves for the new acceleration, then updates p and p_t
/// consistently; p_tt is carried explicitly.
pub fn pressure_step(
    state: &AcousticState,
    coeffs: &FrozenCoefficients,
    b: f64,
    dt: f64,
) -> Result<AcousticState> {
    if !(dt > 0.0) {
        return Err(SimError::invalid("dt", "must be > 0"));
    }
    const BETA: f64 = 0.25;
    const GAMMA: f64 = 0.5;
    let grid = state.p.grid();
    let n = grid.len();

    // predictors
    let mut p_pred = state.p.clone();
    p_pred.axpy(dt, &state.pt)?;
    p_pred.axpy(dt * dt * (1.0 - 2.0 * BETA) / 2.0, &state.ptt)?;
    let mut pt_pred = state.pt.clone();
    pt_pred.axpy(dt * (1.0 - GAMMA), &state.ptt)?;

    // rhs = f1 + r lap p_pred + b lap pt_pred
    let mut rhs = coeffs.f1.clone();
    let r_lap_pred = coeffs.r.zip_with(&p_pred.laplacian(), |r, l| r * l)?;
    rhs.axpy(1.0, &r_lap_pred)?;
    rhs.axpy(b, &pt_pred.laplacian())?;

    // operator (alpha I - s lap) with s = beta dt^2 r + gamma dt b
    let s: Vec<f64> = coeffs
        .r
        .values()
        .iter()
        .map(|&r| BETA * dt * dt * r + GAMMA * dt * b)
        .collect();
    let weight: Vec<f64> = s.iter().map(|&v| 1.0 / v).collect();
    let alpha_vals = coeffs.alpha.values().to_vec();
    let apply = |x: &[f64], out: &mut [f64]| {
        let xf = Field::from_values(grid, x.to_vec()).expect("shape");
        let lap = xf.laplacian();
        for i in 0..n {
            out[i] = alpha_vals[i] * x[i] - s[i] * lap.values()[i];
        }
    };

    let a_new = cg_weighted(
        apply,
        rhs.values(),
        state.ptt.values(),
        &weight,
        CG_TOL,
        10 * n,
    )?;
    let a_new = Field::from_values(grid, a_new)?;

    let mut p_new = p_pred;
    p_new.axpy(BETA * dt * dt, &a_new)?;
    let mut pt_new = pt_pred;
    pt_new.axpy(GAMMA * dt, &a_new)?;

    Ok(AcousticState {
        p: p_new,
        pt: pt_new,
        ptt: a_new,
        t: state.t + dt,
    })
}

/// One Crank-Nicolson step of the Pennes equation
/// `rho_a C_a Theta_t - kappa_a lap Theta + rho_b C_b W (Theta - Theta_a) = Q + f2`,
/// with the source Q + f2 held constant over the step. Theta_t is
/// recomputed from the PDE residual at the new level.
pub fn heat_step(
    state: &ThermalState,
    medium: &MediumParams,
    q_source: &Field,
    f2: &Field,
    dt: f64,
) -> Result<ThermalState> {
    if !(dt > 0.0) {
        return Err(SimError::invalid("dt", "must be > 0"));
    }
    let grid = state.theta.grid();
    let n = grid.len();
    let rc = medium.rho_a * medium.cap_a;
    let perf = medium.rho_b * medium.cap_b * medium.perfusion;

    // (rc/dt + perf/2) Theta+ - (kappa/2) lap Theta+
    //   = (rc/dt - perf/2) Theta + (kappa/2) lap Theta + perf Theta_a + Q + f2
    let mut rhs = state.theta.scaled(rc / dt - 0.5 * perf);
    rhs.axpy(0.5 * medium.kappa_a, &state.theta.laplacian())?;
    rhs.axpy(1.0, q_source)?;
    rhs.axpy(1.0, f2)?;
    for v in rhs.values_mut() {
        *v += perf * medium.theta_a;
    }

    let diag = rc / dt + 0.5 * perf;
    let kappa_half = 0.5 * medium.kappa_a;
    let weight = vec![1.0; n];
    let apply = |x: &[f64], out: &mut [f64]| {
        let xf = Field::from_values(grid, x.to_vec()).expect("shape");
        let lap = xf.laplacian();
        for i in 0..n {
            out[i] = diag * x[i] - kappa_half * lap.values()[i];
        }
    };

    let theta_new = cg_weighted(
        apply,
        rhs.values(),
        state.theta.values(),
        &weight,
        CG_TOL,
        10 * n,
    )?;
    let theta_new = Field::from_values(grid, theta_new)?;

    // Theta_t from the PDE at the new level
    let mut rate = theta_new.laplacian().scaled(medium.kappa_a);
    rate.axpy(-perf, &theta_new)?;
    for v in rate.values_mut() {
        *v += perf * medium.theta_a;
    }
    rate.axpy(1.0, q_source)?;
    rate.axpy(1.0, f2)?;
    let theta_t = rate.scaled(1.0 / rc);

    Ok(ThermalState {
        theta: theta_new,
        theta_t,
        t: state.t + dt,
    })
}
