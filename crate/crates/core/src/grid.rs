//! Uniform rectangular grid with homogeneous Dirichlet boundary and the
//! discrete operators and norms every energy functional is built from.
//!
//! Fields store interior node values only, row-major; boundary values are
//! implicitly zero. The seminorm `H1Semi` is evaluated from the staggered
//! (face) forward-difference gradient that is the summation-by-parts
//! companion of the Laplacian stencil, so the discrete Green identity
//! `<lap u, u> = -|u|_{H1}^2` holds to rounding. The nodal gradient used
//! for coefficient fields makes no assumption about boundary values and
//! switches to one-sided differences at boundary-adjacent nodes.

use crate::error::{Result, SimError};

/// Uniform rectangular grid over an interval (d=1) or rectangle (d=2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dims: usize,
    extents: [f64; 2],
    n: [usize; 2],
    h: [f64; 2],
}

impl Grid {
    pub fn new_1d(extent: f64, n: usize) -> Result<Self> {
        if !(extent > 0.0) {
            return Err(SimError::invalid("grid.extents", "extent must be > 0"));
        }
        if n < 3 {
            return Err(SimError::invalid("grid.n", "need at least 3 interior nodes per axis"));
        }
        Ok(Grid {
            dims: 1,
            extents: [extent, 0.0],
            n: [n, 1],
            h: [extent / (n as f64 + 1.0), 1.0],
        })
    }

    pub fn new_2d(extents: [f64; 2], n: [usize; 2]) -> Result<Self> {
        if !(extents[0] > 0.0 && extents[1] > 0.0) {
            return Err(SimError::invalid("grid.extents", "extents must be > 0"));
        }
        if n[0] < 3 || n[1] < 3 {
            return Err(SimError::invalid("grid.n", "need at least 3 interior nodes per axis"));
        }
        Ok(Grid {
            dims: 2,
            extents,
            n,
            h: [
                extents[0] / (n[0] as f64 + 1.0),
                extents[1] / (n[1] as f64 + 1.0),
            ],
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.extents[axis]
    }

    /// Interior node count along `axis`.
    pub fn n(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.h[axis]
    }

    /// Total number of interior nodes.
    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature cell volume (h in 1D, hx*hy in 2D).
    pub fn cell_volume(&self) -> f64 {
        if self.dims == 1 {
            self.h[0]
        } else {
            self.h[0] * self.h[1]
        }
    }

    /// Coordinate of interior node `idx` along `axis` (boundary sits at 0 and extent).
    pub fn coord(&self, axis: usize, idx: usize) -> f64 {
        (idx as f64 + 1.0) * self.h[axis]
    }

    /// Flattened index -> per-axis indices.
    pub fn unflatten(&self, idx: usize) -> Vec<usize> {
        if self.dims == 1 {
            vec![idx]
        } else {
            vec![idx / self.n[1], idx % self.n[1]]
        }
    }

    /// Smallest eigenvalue-exact stencil eigenvalue for mode numbers `modes`
    /// (Dirichlet sine modes): sum over axes of (2/h^2)(1 - cos(k pi h / L)).
    pub fn stencil_eigenvalue(&self, modes: [usize; 2]) -> f64 {
        let mut kappa = 0.0;
        for axis in 0..self.dims {
            let h = self.h[axis];
            let arg = modes[axis] as f64 * std::f64::consts::PI * h / self.extents[axis];
            kappa += 2.0 / (h * h) * (1.0 - arg.cos());
        }
        kappa
    }
}

/// Scalar samples at the interior nodes of a grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

/// Norm kinds used by the energy functionals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L2,
    Linf,
    L3,
    L4,
    H1Semi,
    H2ViaLap,
    H3ViaGradLap,
}

impl std::str::FromStr for NormKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(NormKind::L2),
            "linf" => Ok(NormKind::Linf),
            "l3" => Ok(NormKind::L3),
            "l4" => Ok(NormKind::L4),
            "h1semi" => Ok(NormKind::H1Semi),
            "h2vialap" => Ok(NormKind::H2ViaLap),
            "h3viagradlap" => Ok(NormKind::H3ViaGradLap),
            other => Err(SimError::invalid("norm", format!("unknown norm kind `{other}`"))),
        }
    }
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Field {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SimError::ShapeMismatch(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values })
    }

    /// Sample a function of the node coordinates; in 1D `x[1]` is 0.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        if grid.dims() == 1 {
            for i in 0..grid.n(0) {
                values.push(f([grid.coord(0, i), 0.0]));
            }
        } else {
            for i in 0..grid.n(0) {
                let x = grid.coord(0, i);
                for j in 0..grid.n(1) {
                    values.push(f([x, grid.coord(1, j)]));
                }
            }
        }
        Field { grid, values }
    }

    /// Dirichlet sine mode, amplitude 1.
    pub fn sine_mode(grid: Grid, modes: [usize; 2]) -> Self {
        use std::f64::consts::PI;
        Field::from_fn(grid, |x| {
            let mut v = (modes[0] as f64 * PI * x[0] / grid.extent(0)).sin();
            if grid.dims() == 2 {
                v *= (modes[1] as f64 * PI * x[1] / grid.extent(1)).sin();
            }
            v
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(SimError::ShapeMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    /// self += c * other, in place.
    pub fn axpy(&mut self, c: f64, other: &Field) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m: f64, &v| m.max(v.abs()))
    }

    /// Index of the entry with largest absolute value (first on ties).
    pub fn argmax_abs(&self) -> usize {
        let mut best = 0;
        let mut best_val = -1.0;
        for (i, &v) in self.values.iter().enumerate() {
            if v.abs() > best_val {
                best_val = v.abs();
                best = i;
            }
        }
        best
    }

    /// Centered 2nd-order Laplacian stencil with zero ghost values
    /// (homogeneous Dirichlet).
    pub fn laplacian(&self) -> Field {
        let g = self.grid;
        let mut out = vec![0.0; self.values.len()];
        let (n0, n1) = (g.n(0), g.n(1));
        let inv_h0 = 1.0 / (g.spacing(0) * g.spacing(0));
        if g.dims() == 1 {
            for i in 0..n0 {
                let left = if i > 0 { self.values[i - 1] } else { 0.0 };
                let right = if i + 1 < n0 { self.values[i + 1] } else { 0.0 };
                out[i] = (left - 2.0 * self.values[i] + right) * inv_h0;
            }
        } else {
            let inv_h1 = 1.0 / (g.spacing(1) * g.spacing(1));
            for i in 0..n0 {
                for j in 0..n1 {
                    let idx = i * n1 + j;
                    let c = self.values[idx];
                    let xm = if i > 0 { self.values[idx - n1] } else { 0.0 };
                    let xp = if i + 1 < n0 { self.values[idx + n1] } else { 0.0 };
                    let ym = if j > 0 { self.values[idx - 1] } else { 0.0 };
                    let yp = if j + 1 < n1 { self.values[idx + 1] } else { 0.0 };
                    out[idx] = (xm - 2.0 * c + xp) * inv_h0 + (ym - 2.0 * c + yp) * inv_h1;
                }
            }
        }
        Field {
            grid: g,
            values: out,
        }
    }

    /// Discrete L2 inner product (rectangle rule).
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        let vol = self.grid.cell_volume();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum::<f64>()
            * vol)
    }

    /// Squared H1 seminorm from the staggered forward-difference gradient,
    /// including the boundary faces (ghost value 0). Matches the Laplacian
    /// stencil: sum-by-parts gives `<lap u, u> = -grad_sq(u)` exactly.
    fn grad_sq_faces(&self) -> f64 {
        self.weighted_grad_sq_faces(None)
    }

    /// Same face sum with an optional nodal weight averaged onto faces;
    /// weight at a boundary face is the adjacent interior node's weight.
    fn weighted_grad_sq_faces(&self, weight: Option<&Field>) -> f64 {
        let g = self.grid;
        let (n0, n1) = (g.n(0), g.n(1));
        let vol = g.cell_volume();
        let mut total = 0.0;
        let w_at = |idx: usize| weight.map_or(1.0, |w| w.values[idx]);
        // axis 0 faces
        {
            let inv_h = 1.0 / g.spacing(0);
            for j in 0..n1 {
                for face in 0..=n0 {
                    let lo = if face > 0 { self.values[(face - 1) * n1 + j] } else { 0.0 };
                    let hi = if face < n0 { self.values[face * n1 + j] } else { 0.0 };
                    let d = (hi - lo) * inv_h;
                    let w = if face == 0 {
                        w_at(j)
                    } else if face == n0 {
                        w_at((n0 - 1) * n1 + j)
                    } else {
                        0.5 * (w_at((face - 1) * n1 + j) + w_at(face * n1 + j))
                    };
                    total += w * d * d;
                }
            }
        }
        if g.dims() == 2 {
            let inv_h = 1.0 / g.spacing(1);
            for i in 0..n0 {
                for face in 0..=n1 {
                    let lo = if face > 0 { self.values[i * n1 + face - 1] } else { 0.0 };
                    let hi = if face < n1 { self.values[i * n1 + face] } else { 0.0 };
                    let d = (hi - lo) * inv_h;
                    let w = if face == 0 {
                        w_at(i * n1)
                    } else if face == n1 {
                        w_at(i * n1 + n1 - 1)
                    } else {
                        0.5 * (w_at(i * n1 + face - 1) + w_at(i * n1 + face))
                    };
                    total += w * d * d;
                }
            }
        }
        total * vol
    }

    /// Squared weighted gradient norm `sum_axes |sqrt(w) grad_axis f|^2`
    /// with nodal weight `w >= 0`.
    pub fn weighted_grad_sq(&self, weight: &Field) -> Result<f64> {
        self.check_same_grid(weight)?;
        if weight.min_value() < 0.0 {
            return Err(SimError::invalid("weight", "energy weights must be nonnegative"));
        }
        Ok(self.weighted_grad_sq_faces(Some(weight)))
    }

    /// Nodal gradient component along `axis`: centered differences in the
    /// interior, one-sided at boundary-adjacent nodes. Makes no assumption
    /// about boundary values, so it is valid for coefficient fields that do
    /// not vanish on the boundary.
    pub fn gradient_nodal(&self, axis: usize) -> Field {
        let g = self.grid;
        let (n0, n1) = (g.n(0), g.n(1));
        let mut out = vec![0.0; self.values.len()];
        let h = g.spacing(axis);
        let (na, stride) = if axis == 0 { (n0, n1) } else { (n1, 1) };
        let lines = if axis == 0 { n1 } else { n0 };
        for line in 0..lines {
            let base = if axis == 0 { line } else { line * n1 };
            let at = |k: usize| self.values[base + k * stride];
            for k in 0..na {
                let d = if k == 0 {
                    (at(1) - at(0)) / h
                } else if k == na - 1 {
                    (at(na - 1) - at(na - 2)) / h
                } else {
                    (at(k + 1) - at(k - 1)) / (2.0 * h)
                };
                out[base + k * stride] = d;
            }
        }
        Field {
            grid: g,
            values: out,
        }
    }

    /// Pointwise Euclidean magnitude of the nodal gradient.
    pub fn gradient_magnitude(&self) -> Field {
        let gx = self.gradient_nodal(0);
        if self.grid.dims() == 1 {
            return gx.map(f64::abs);
        }
        let gy = self.gradient_nodal(1);
        gx.zip_with(&gy, |a, b| (a * a + b * b).sqrt()).expect("same grid")
    }

    fn lp_norm(&self, p: f64) -> f64 {
        let vol = self.grid.cell_volume();
        let sum: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (sum * vol).powf(1.0 / p)
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        match kind {
            NormKind::L2 => {
                let vol = self.grid.cell_volume();
                (self.values.iter().map(|v| v * v).sum::<f64>() * vol).sqrt()
            }
            NormKind::Linf => self.max_abs(),
            NormKind::L3 => self.lp_norm(3.0),
            NormKind::L4 => self.lp_norm(4.0),
            NormKind::H1Semi => self.grad_sq_faces().sqrt(),
            NormKind::H2ViaLap => self.laplacian().norm(NormKind::L2),
            NormKind::H3ViaGradLap => self.laplacian().grad_sq_faces().sqrt(),
        }
    }

    /// sqrt of the quadrature of `w * f^2`; `w` must be nonnegative.
    pub fn weighted_l2(&self, weight: &Field) -> Result<f64> {
        self.check_same_grid(weight)?;
        if weight.min_value() < 0.0 {
            return Err(SimError::invalid("weight", "energy weights must be nonnegative"));
        }
        let vol = self.grid.cell_volume();
        let sum: f64 = self
            .values
            .iter()
            .zip(&weight.values)
            .map(|(&f, &w)| w * f * f)
            .sum();
        Ok((sum * vol).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    /// Deterministic pseudo-random field for property-style checks.
    fn noise_field(grid: Grid, seed: u64) -> Field {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state as f64 / u64::MAX as f64) * 2.0 - 1.0
        };
        let values = (0..grid.len()).map(|_| next()).collect();
        Field::from_values(grid, values).unwrap()
    }

    #[test]
    fn grid_spacing_and_volume() {
        let g = Grid::new_1d(1.0, 9).unwrap();
        assert_eq!(g.spacing(0), 0.1);
        assert_eq!(g.cell_volume(), 0.1);
        let g2 = Grid::new_2d([1.0, 2.0], [9, 19]).unwrap();
        assert!((g2.spacing(1) - 0.1).abs() < 1e-15);
        assert!(Grid::new_1d(1.0, 2).is_err());
    }

    #[test]
    fn laplacian_of_zero_is_zero() {
        let g = Grid::new_1d(1.0, 15).unwrap();
        let f = Field::zeros(g);
        assert_eq!(f.laplacian().max_abs(), 0.0);
    }

    #[test]
    fn laplacian_sine_mode_is_exact_stencil_eigenfield_1d() {
        let g = Grid::new_1d(1.0, 63).unwrap();
        let f = Field::sine_mode(g, [1, 0]);
        let lap = f.laplacian();
        let kappa = g.stencil_eigenvalue([1, 0]);
        // eigenfield to machine precision
        for (l, v) in lap.values().iter().zip(f.values()) {
            assert!((l + kappa * v).abs() < 1e-10 * kappa);
        }
        // and the discrete eigenvalue approximates (pi/L)^2 to O(h^2):
        // the defect is (pi h)^2/12 = 2.0e-4 at n = 63
        assert!(rel_err(kappa, PI * PI) < 2.5e-4);
    }

    #[test]
    fn laplacian_tensor_sine_mode_2d() {
        let g = Grid::new_2d([1.0, 1.5], [17, 13]).unwrap();
        let f = Field::sine_mode(g, [2, 3]);
        let lap = f.laplacian();
        let kappa = g.stencil_eigenvalue([2, 3]);
        for (l, v) in lap.values().iter().zip(f.values()) {
            assert!((l + kappa * v).abs() < 1e-9 * kappa);
        }
    }

    #[test]
    fn laplacian_symmetric_negative_definite() {
        let g = Grid::new_2d([1.0, 1.0], [12, 9]).unwrap();
        let u = noise_field(g, 7);
        let v = noise_field(g, 21);
        let lu_v = u.laplacian().inner(&v).unwrap();
        let u_lv = v.laplacian().inner(&u).unwrap();
        assert!(rel_err(lu_v, u_lv) < 1e-12);
        let lu_u = u.laplacian().inner(&u).unwrap();
        assert!(lu_u < 0.0);
    }

    #[test]
    fn green_identity_exact() {
        for seed in 0..5u64 {
            let g = Grid::new_1d(2.0, 31).unwrap();
            let u = noise_field(g, seed);
            let lhs = u.laplacian().inner(&u).unwrap();
            let h1 = u.norm(NormKind::H1Semi);
            assert!(rel_err(-lhs, h1 * h1) < 1e-12, "seed {seed}");
        }
        let g = Grid::new_2d([1.0, 0.7], [11, 14]).unwrap();
        let u = noise_field(g, 99);
        let lhs = u.laplacian().inner(&u).unwrap();
        let h1 = u.norm(NormKind::H1Semi);
        assert!(rel_err(-lhs, h1 * h1) < 1e-12);
    }

    #[test]
    fn norms_zero_field() {
        let g = Grid::new_1d(1.0, 15).unwrap();
        let f = Field::zeros(g);
        for kind in [
            NormKind::L2,
            NormKind::Linf,
            NormKind::L3,
            NormKind::L4,
            NormKind::H1Semi,
            NormKind::H2ViaLap,
            NormKind::H3ViaGradLap,
        ] {
            assert_eq!(f.norm(kind), 0.0);
        }
    }

    #[test]
    fn l2_of_constant_near_one() {
        // rectangle rule over interior nodes: n/(n+1) of the volume
        let g = Grid::new_1d(1.0, 255).unwrap();
        let f = Field::constant(g, 1.0);
        let expected = (255.0 / 256.0_f64).sqrt();
        assert!(rel_err(f.norm(NormKind::L2), expected) < 1e-14);
        assert!((f.norm(NormKind::L2) - 1.0).abs() < 3e-3);
    }

    #[test]
    fn h1_semi_of_sine_matches_analytic() {
        // |sin(pi x)|_{H1}^2 = pi^2/2 on [0,1]
        let g = Grid::new_1d(1.0, 255).unwrap();
        let f = Field::sine_mode(g, [1, 0]);
        let expected = PI / (2.0f64).sqrt();
        assert!(rel_err(f.norm(NormKind::H1Semi), expected) < 1e-4);
    }

    #[test]
    fn norms_scale_exactly_by_powers_of_two() {
        let g = Grid::new_2d([1.0, 1.0], [9, 9]).unwrap();
        let f = noise_field(g, 3);
        let f2 = f.scaled(2.0);
        for kind in [
            NormKind::L2,
            NormKind::Linf,
            NormKind::L3,
            NormKind::L4,
            NormKind::H1Semi,
            NormKind::H2ViaLap,
            NormKind::H3ViaGradLap,
        ] {
            let a = f.norm(kind);
            let b = f2.norm(kind);
            assert!(rel_err(b, 2.0 * a) < 1e-13, "{kind:?}: {b} vs {}", 2.0 * a);
        }
    }

    #[test]
    fn weighted_l2_basics() {
        let g = Grid::new_1d(1.0, 127).unwrap();
        let f = Field::constant(g, 1.0);
        let w1 = Field::constant(g, 1.0);
        assert!(rel_err(f.weighted_l2(&w1).unwrap(), f.norm(NormKind::L2)) < 1e-15);
        let w4 = Field::constant(g, 4.0);
        // quadrature of 4 over ~unit volume -> ~2
        assert!((f.weighted_l2(&w4).unwrap() - 2.0).abs() < 1e-2);
        let zero = Field::zeros(g);
        assert_eq!(zero.weighted_l2(&w4).unwrap(), 0.0);
        let wneg = Field::constant(g, -1.0);
        assert!(f.weighted_l2(&wneg).is_err());
    }

    #[test]
    fn nodal_gradient_linear_ramp() {
        // f = 2x has exact gradient everywhere, including the one-sided ends
        let g = Grid::new_1d(1.0, 31).unwrap();
        let f = Field::from_fn(g, |x| 2.0 * x[0]);
        let grad = f.gradient_nodal(0);
        for &v in grad.values() {
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_kind_from_str() {
        assert_eq!("l2".parse::<NormKind>().unwrap(), NormKind::L2);
        assert!("bogus".parse::<NormKind>().is_err());
    }
}
