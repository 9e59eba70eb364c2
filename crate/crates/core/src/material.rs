//! Temperature-dependent and constant material coefficients of the coupled
//! acoustic-thermal model, plus a sampled check of the structural
//! assumptions placed on them.
//!
//! Temperatures are in degrees Celsius throughout; the shipped water
//! sound-speed polynomial is fitted in Celsius and no Kelvin conversion
//! happens anywhere.

use crate::error::{Result, SimError};

/// Constant medium parameters of the coupled model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MediumParams {
    /// Mass density (kg/m^3).
    pub rho: f64,
    /// Acoustic nonlinearity coefficient (dimensionless).
    pub beta_acou: f64,
    /// Sound diffusivity (m^2/s), the strong-damping coefficient.
    pub b: f64,
    /// Ambient (tissue) density (kg/m^3).
    pub rho_a: f64,
    /// Ambient heat capacity (J/(kg K)).
    pub cap_a: f64,
    /// Ambient thermal conductivity (W/(m K)).
    pub kappa_a: f64,
    /// Blood density (kg/m^3).
    pub rho_b: f64,
    /// Blood heat capacity (J/(kg K)).
    pub cap_b: f64,
    /// Volumetric perfusion rate (1/s).
    pub perfusion: f64,
    /// Ambient temperature (deg C).
    pub theta_a: f64,
    /// Ambient sound speed (m/s).
    pub c_a: f64,
    /// Angular excitation frequency (rad/s).
    pub omega: f64,
    /// Positive lower bound enforced on q = c^2 (m^2/s^2).
    pub q0: f64,
    /// Growth exponent for q-derivative envelopes (dimensionless, >= 0).
    pub gamma1: f64,
    /// Growth exponent for k-derivative envelopes (dimensionless, >= 0).
    pub gamma2: f64,
}

impl MediumParams {
    /// Validate positivity constraints; `perfusion`, `theta_a`, `gamma1`,
    /// `gamma2` may be zero, everything else must be strictly positive.
    pub fn validate(&self) -> Result<()> {
        let strictly_positive = [
            ("medium.rho", self.rho),
            ("medium.b", self.b),
            ("medium.rho_a", self.rho_a),
            ("medium.cap_a", self.cap_a),
            ("medium.kappa_a", self.kappa_a),
            ("medium.rho_b", self.rho_b),
            ("medium.cap_b", self.cap_b),
            ("medium.c_a", self.c_a),
            ("medium.omega", self.omega),
            ("medium.q0", self.q0),
        ];
        for (name, v) in strictly_positive {
            if !(v > 0.0) {
                return Err(SimError::invalid(name, "must be > 0"));
            }
        }
        if !(self.beta_acou >= 0.0) {
            return Err(SimError::invalid("medium.beta_acou", "must be >= 0"));
        }
        let nonnegative = [
            ("medium.perfusion", self.perfusion),
            ("medium.theta_a", self.theta_a),
            ("medium.gamma1", self.gamma1),
            ("medium.gamma2", self.gamma2),
        ];
        for (name, v) in nonnegative {
            if !(v >= 0.0) {
                return Err(SimError::invalid(name, "must be >= 0"));
            }
        }
        Ok(())
    }

    /// Uniform bound k1 >= |k(theta)|, realized exactly through the q-floor:
    /// k1 = beta_acou / (rho * q0).
    pub fn k1(&self) -> f64 {
        self.beta_acou / (self.rho * self.q0)
    }
}

/// Polynomial sound-speed law c(theta) with an enforced lower bound on
/// q = c^2. Range excursions are clamped, never errors.
#[derive(Clone, Debug, PartialEq)]
pub struct SoundSpeedLaw {
    /// Polynomial coefficients c0..cn, lowest degree first (m/s per C^n).
    pub coefficients: Vec<f64>,
    /// Enforced lower bound for c^2 (m^2/s^2).
    pub floor_q0: f64,
}

impl SoundSpeedLaw {
    pub fn new(coefficients: Vec<f64>, floor_q0: f64) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(SimError::invalid(
                "sound_speed.coefficients",
                "need at least one polynomial coefficient",
            ));
        }
        if !(floor_q0 > 0.0) {
            return Err(SimError::invalid("sound_speed.floor_q0", "must be > 0"));
        }
        Ok(SoundSpeedLaw {
            coefficients,
            floor_q0,
        })
    }

    /// Degree-0 law c == c0.
    pub fn constant(c0: f64, floor_q0: f64) -> Result<Self> {
        SoundSpeedLaw::new(vec![c0], floor_q0)
    }

    /// Quintic fit for the speed of sound in water (m/s, theta in deg C).
    pub fn water(floor_q0: f64) -> Result<Self> {
        SoundSpeedLaw::new(
            vec![
                1402.39,
                5.0371,
                -5.8085e-2,
                3.3420e-4,
                -1.4780e-6,
                3.1464e-9,
            ],
            floor_q0,
        )
    }

    /// Horner evaluation of the raw polynomial, no clamping.
    pub fn raw_speed(&self, theta: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coefficients.iter().rev() {
            acc = acc * theta + c;
        }
        acc
    }

    /// Raw c(theta)^2 before the floor is applied.
    pub fn raw_q(&self, theta: f64) -> f64 {
        let c = self.raw_speed(theta);
        c * c
    }

    /// True when the floor is active at this temperature.
    pub fn clamps_at(&self, theta: f64) -> bool {
        self.raw_q(theta) < self.floor_q0
    }
}

/// Sound speed after flooring, always >= sqrt(floor_q0).
pub fn sound_speed(law: &SoundSpeedLaw, theta: f64) -> f64 {
    q_of_theta(law, theta).sqrt()
}

/// q(theta) = c(theta)^2 clamped from below at floor_q0.
pub fn q_of_theta(law: &SoundSpeedLaw, theta: f64) -> f64 {
    law.raw_q(theta).max(law.floor_q0)
}

/// Right-hand-side coefficient k(theta) = beta_acou / (rho q(theta)).
/// Bounded by beta_acou / (rho q0) thanks to the floor.
pub fn k_of_theta(medium: &MediumParams, law: &SoundSpeedLaw, theta: f64) -> f64 {
    medium.beta_acou / (medium.rho * q_of_theta(law, theta))
}

/// Sound diffusivity from the absorption coefficient under harmonic
/// excitation: b = alpha_abs * c_a^3 / omega^2.
pub fn sound_diffusivity(alpha_abs: f64, c_a: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(SimError::invalid("medium.omega", "must be > 0"));
    }
    if !(c_a > 0.0) {
        return Err(SimError::invalid("medium.c_a", "must be > 0"));
    }
    if !(alpha_abs >= 0.0) {
        return Err(SimError::invalid("medium.alpha_abs", "must be >= 0"));
    }
    Ok(alpha_abs * c_a.powi(3) / (omega * omega))
}

/// Sampled report on the structural assumptions: the q-floor, and
/// growth envelopes for the first two derivatives of q and k.
#[derive(Clone, Debug)]
pub struct AssumptionsReport {
    pub theta_range: (f64, f64),
    pub samples: usize,
    /// Minimum of the raw polynomial q over the sample set.
    pub min_q_raw: f64,
    /// Minimum after clamping (>= q0 by construction).
    pub min_q_clamped: f64,
    /// Number of sample points where the floor was active.
    pub clamp_count: usize,
    /// Fitted constants C such that |q'| <= C (1+|t|^(g1+1)), |q''| <= C (1+|t|^g1),
    /// |k'| <= C (1+|t|^(g2+1)), |k''| <= C (1+|t|^g2) over the samples.
    pub fitted_c_q_prime: f64,
    pub fitted_c_q_second: f64,
    pub fitted_c_k_prime: f64,
    pub fitted_c_k_second: f64,
    /// Human-readable violation notes; empty when the assumptions hold.
    pub violations: Vec<String>,
}

/// Finite-difference step used for the derivative envelopes.
const FD_STEP: f64 = 1e-4;

/// Sample q and k over `theta_range` and report floor violations of the
/// raw law together with fitted growth constants. Violations are report
/// entries, never errors.
pub fn validate_assumptions(
    medium: &MediumParams,
    law: &SoundSpeedLaw,
    theta_range: (f64, f64),
    samples: usize,
) -> Result<AssumptionsReport> {
    if !(theta_range.1 > theta_range.0) {
        return Err(SimError::invalid("theta_range", "must be a nonempty interval"));
    }
    if samples < 2 {
        return Err(SimError::invalid("samples", "need at least 2 sample points"));
    }

    let mut min_q_raw = f64::INFINITY;
    let mut min_q_clamped = f64::INFINITY;
    let mut clamp_count = 0;
    let mut c_qp: f64 = 0.0;
    let mut c_qpp: f64 = 0.0;
    let mut c_kp: f64 = 0.0;
    let mut c_kpp: f64 = 0.0;

    let q = |t: f64| q_of_theta(law, t);
    let k = |t: f64| k_of_theta(medium, law, t);
    let span = theta_range.1 - theta_range.0;
    for i in 0..samples {
        let t = theta_range.0 + span * i as f64 / (samples - 1) as f64;
        let q_raw = law.raw_q(t);
        min_q_raw = min_q_raw.min(q_raw);
        min_q_clamped = min_q_clamped.min(q(t));
        if law.clamps_at(t) {
            clamp_count += 1;
        }
        let qp = (q(t + FD_STEP) - q(t - FD_STEP)) / (2.0 * FD_STEP);
        let qpp = (q(t + FD_STEP) - 2.0 * q(t) + q(t - FD_STEP)) / (FD_STEP * FD_STEP);
        let kp = (k(t + FD_STEP) - k(t - FD_STEP)) / (2.0 * FD_STEP);
        let kpp = (k(t + FD_STEP) - 2.0 * k(t) + k(t - FD_STEP)) / (FD_STEP * FD_STEP);
        let abs_t = t.abs();
        c_qp = c_qp.max(qp.abs() / (1.0 + abs_t.powf(medium.gamma1 + 1.0)));
        c_qpp = c_qpp.max(qpp.abs() / (1.0 + abs_t.powf(medium.gamma1)));
        c_kp = c_kp.max(kp.abs() / (1.0 + abs_t.powf(medium.gamma2 + 1.0)));
        c_kpp = c_kpp.max(kpp.abs() / (1.0 + abs_t.powf(medium.gamma2)));
    }

    let mut violations = Vec::new();
    if min_q_raw < medium.q0 {
        violations.push(format!(
            "raw q dips to {min_q_raw:.6e} below q0 = {:.6e}; clamp active at {clamp_count} of {samples} samples",
            medium.q0
        ));
    }
    if law.floor_q0 != medium.q0 {
        violations.push(format!(
            "law floor {:.6e} differs from medium q0 {:.6e}",
            law.floor_q0, medium.q0
        ));
    }

    Ok(AssumptionsReport {
        theta_range,
        samples,
        min_q_raw,
        min_q_clamped,
        clamp_count,
        fitted_c_q_prime: c_qp,
        fitted_c_q_second: c_qpp,
        fitted_c_k_prime: c_kp,
        fitted_c_k_second: c_kpp,
        violations,
    })
}

#[cfg(test)]
pub(crate) fn test_medium() -> MediumParams {
    MediumParams {
        rho: 1000.0,
        beta_acou: 5.0,
        b: 4.0e-4,
        rho_a: 1000.0,
        cap_a: 4180.0,
        kappa_a: 0.6,
        rho_b: 1060.0,
        cap_b: 3600.0,
        perfusion: 0.005,
        theta_a: 37.0,
        c_a: 1500.0,
        omega: 2.0 * std::f64::consts::PI * 1.0e6,
        q0: 1.9e6,
        gamma1: 1.0,
        gamma2: 1.0,
    }
}
