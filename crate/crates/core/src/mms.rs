//! Manufactured solutions: Dirichlet sine modes times smooth time
//! envelopes, with forcing terms derived analytically so the chosen
//! closed form solves the coupled system exactly.
//!
//! All spatial derivatives in the forcing use the continuum Laplacian of
//! the sine modes (not the stencil), so measured errors isolate solver
//! discretization error. Sine modes also make `p` and `lap p` vanish on
//! the boundary, which the higher-order trace conditions require.

use crate::absorption::AbsorptionModel;
use crate::grid::{Field, Grid};
use crate::material::{k_of_theta, q_of_theta, MediumParams, SoundSpeedLaw};

/// Product-of-sines space factor times a cosine time envelope, for the
/// pressure and the temperature separately.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedSolution {
    pub p_amp: f64,
    pub p_modes: [usize; 2],
    /// Temporal angular frequency of the pressure envelope (rad/s).
    pub p_freq: f64,
    pub theta_amp: f64,
    pub theta_modes: [usize; 2],
    pub theta_freq: f64,
}

impl ManufacturedSolution {
    fn space_factor(grid: Grid, modes: [usize; 2], x: [f64; 2]) -> f64 {
        use std::f64::consts::PI;
        let mut v = (modes[0] as f64 * PI * x[0] / grid.extent(0)).sin();
        if grid.dims() == 2 {
            v *= (modes[1] as f64 * PI * x[1] / grid.extent(1)).sin();
        }
        v
    }

    /// Continuum Dirichlet eigenvalue of the mode: sum of (m pi / L)^2.
    fn continuum_eigenvalue(grid: Grid, modes: [usize; 2]) -> f64 {
        use std::f64::consts::PI;
        let mut kappa = 0.0;
        for axis in 0..grid.dims() {
            let k = modes[axis] as f64 * PI / grid.extent(axis);
            kappa += k * k;
        }
        kappa
    }

    pub fn p_exact(&self, grid: Grid, x: [f64; 2], t: f64) -> f64 {
        self.p_amp * Self::space_factor(grid, self.p_modes, x) * (self.p_freq * t).cos()
    }

    pub fn p_t_exact(&self, grid: Grid, x: [f64; 2], t: f64) -> f64 {
        -self.p_amp
            * self.p_freq
            * Self::space_factor(grid, self.p_modes, x)
            * (self.p_freq * t).sin()
    }

    pub fn p_tt_exact(&self, grid: Grid, x: [f64; 2], t: f64) -> f64 {
        -self.p_freq * self.p_freq * self.p_exact(grid, x, t)
    }

    pub fn lap_p_exact(&self, grid: Grid, x: [f64; 2], t: f64) -> f64 {
        -Self::continuum_eigenvalue(grid, self.p_modes) * self.p_exact(grid, x, t)
    }

    pub fn lap_p_t_exact(&self, grid: Grid, x: [f64; 2], t: f64) -> f64 {
        -Self::continuum_eigenvalue(grid, self.p_modes) * self.p_t_exact(grid, x, t)
    }

    pub fn theta_exact(&self, grid: Grid, x: [f64; 2], t: f64) -> f64 {
        self.theta_amp
            * Self::space_factor(grid, self.theta_modes, x)
            * (self.theta_freq * t).cos()
    }

    pub fn theta_t_exact(&self, grid: Grid, x: [f64; 2], t: f64) -> f64 {
        -self.theta_amp
            * self.theta_freq
            * Self::space_factor(grid, self.theta_modes, x)
            * (self.theta_freq * t).sin()
    }

    pub fn lap_theta_exact(&self, grid: Grid, x: [f64; 2], t: f64) -> f64 {
        -Self::continuum_eigenvalue(grid, self.theta_modes) * self.theta_exact(grid, x, t)
    }

    /// Pressure forcing so that (p_exact, theta_exact) solves the coupled
    /// system: f1 = alpha p_tt - q(Theta) lap p - b lap p_t - 2 k(Theta) p_t^2
    /// with alpha = 1 - 2 k(Theta) p.
    pub fn f1_at(
        &self,
        grid: Grid,
        medium: &MediumParams,
        law: &SoundSpeedLaw,
        x: [f64; 2],
        t: f64,
    ) -> f64 {
        let theta = self.theta_exact(grid, x, t);
        let p = self.p_exact(grid, x, t);
        let pt = self.p_t_exact(grid, x, t);
        let k = k_of_theta(medium, law, theta);
        let q = q_of_theta(law, theta);
        let alpha = 1.0 - 2.0 * k * p;
        alpha * self.p_tt_exact(grid, x, t)
            - q * self.lap_p_exact(grid, x, t)
            - medium.b * self.lap_p_t_exact(grid, x, t)
            - 2.0 * k * pt * pt
    }

    /// Heat forcing, with the instantaneous absorption model:
    /// f2 = rho_a C_a Theta_t - kappa_a lap Theta
    ///      plus rho_b C_b W (Theta - Theta_a) minus Q(p_t).
    pub fn f2_at(
        &self,
        grid: Grid,
        medium: &MediumParams,
        absorption: &AbsorptionModel,
        x: [f64; 2],
        t: f64,
    ) -> f64 {
        let theta = self.theta_exact(grid, x, t);
        let pt = self.p_t_exact(grid, x, t);
        medium.rho_a * medium.cap_a * self.theta_t_exact(grid, x, t)
            - medium.kappa_a * self.lap_theta_exact(grid, x, t)
            + medium.rho_b * medium.cap_b * medium.perfusion * (theta - medium.theta_a)
            - absorption.scale * pt * pt
    }

    pub fn f1_field(
        &self,
        grid: Grid,
        medium: &MediumParams,
        law: &SoundSpeedLaw,
        t: f64,
    ) -> Field {
        Field::from_fn(grid, |x| self.f1_at(grid, medium, law, x, t))
    }

    pub fn f2_field(
        &self,
        grid: Grid,
        medium: &MediumParams,
        absorption: &AbsorptionModel,
        t: f64,
    ) -> Field {
        Field::from_fn(grid, |x| self.f2_at(grid, medium, absorption, x, t))
    }

    pub fn p_field(&self, grid: Grid, t: f64) -> Field {
        Field::from_fn(grid, |x| self.p_exact(grid, x, t))
    }

    pub fn p_t_field(&self, grid: Grid, t: f64) -> Field {
        Field::from_fn(grid, |x| self.p_t_exact(grid, x, t))
    }

    pub fn theta_field(&self, grid: Grid, t: f64) -> Field {
        Field::from_fn(grid, |x| self.theta_exact(grid, x, t))
    }
}
