//! Absorbed-acoustic-energy models Q(p_t) feeding the bioheat equation,
//! and a sampled probe of their Lipschitz structure.
//!
//! Three variants: the instantaneous model `Q = scale * p_t^2`, a window
//! average over a fixed interval `[t_start, t_start + window]`, and an
//! average over the whole horizon `[0, T]`. The averaged variants are
//! time-independent once their interval has elapsed; the simulation
//! caches the completed field so post-horizon evaluations are bitwise
//! identical (their time derivative is identically zero). While the
//! interval is still being filled, averages run over the available
//! prefix instead of erroring.

use std::collections::VecDeque;

use crate::error::{Result, SimError};
use crate::grid::Field;
use crate::material::MediumParams;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AbsorptionVariant {
    /// Q(t) = scale * p_t(t)^2.
    Instantaneous,
    /// Trapezoidal mean of scale * p_t^2 over [t_start, t_start + window].
    WindowedAverage { t_start: f64, window: f64 },
    /// Trapezoidal mean of scale * p_t^2 over [0, horizon].
    FullAverage { horizon: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbsorptionModel {
    pub variant: AbsorptionVariant,
    /// 2 b / (rho_a c_a^4), precomputed.
    pub scale: f64,
}

impl AbsorptionModel {
    pub fn new(variant: AbsorptionVariant, medium: &MediumParams) -> Result<Self> {
        let scale = 2.0 * medium.b / (medium.rho_a * medium.c_a.powi(4));
        AbsorptionModel::with_scale(variant, scale)
    }

    pub fn with_scale(variant: AbsorptionVariant, scale: f64) -> Result<Self> {
        if !(scale >= 0.0) {
            return Err(SimError::invalid("absorption.scale", "must be >= 0"));
        }
        match variant {
            AbsorptionVariant::WindowedAverage { window, t_start } => {
                if !(window > 0.0) {
                    return Err(SimError::invalid("absorption.window", "must be > 0"));
                }
                if !(t_start >= 0.0) {
                    return Err(SimError::invalid("absorption.t_start", "must be >= 0"));
                }
            }
            AbsorptionVariant::FullAverage { horizon } => {
                if !(horizon > 0.0) {
                    return Err(SimError::invalid("absorption.horizon", "must be > 0"));
                }
            }
            AbsorptionVariant::Instantaneous => {}
        }
        Ok(AbsorptionModel { variant, scale })
    }

    /// End of the averaging interval, if the variant has one.
    pub fn completion_time(&self) -> Option<f64> {
        match self.variant {
            AbsorptionVariant::Instantaneous => None,
            AbsorptionVariant::WindowedAverage { t_start, window } => Some(t_start + window),
            AbsorptionVariant::FullAverage { horizon } => Some(horizon),
        }
    }
}

/// Time-ordered buffer of (t, p_t) snapshots, decimated to bound memory.
#[derive(Clone, Debug)]
pub struct PtHistory {
    samples: VecDeque<(f64, Field)>,
    decimation: usize,
    capacity: usize,
    push_count: usize,
}

impl PtHistory {
    pub fn new(decimation: usize, capacity: usize) -> Self {
        PtHistory {
            samples: VecDeque::new(),
            decimation: decimation.max(1),
            capacity: capacity.max(2),
        push_count: 0,
        }
    }

    /// Build directly from explicit samples (used by probes and tests).
    pub fn from_samples(samples: Vec<(f64, Field)>) -> Result<Self> {
        let mut h = PtHistory::new(1, samples.len().max(2));
        for (t, f) in samples {
            h.push(t, f)?;
        }
        Ok(h)
    }

    /// Append a snapshot, honoring decimation; times must strictly increase.
    pub fn push(&mut self, t: f64, pt: Field) -> Result<()> {
        if let Some(&(last_t, _)) = self.samples.back() {
            if t <= last_t {
                return Err(SimError::invalid(
                    "pt_history",
                    format!("times must strictly increase ({t} after {last_t})"),
                ));
            }
        }
        let keep = self.push_count % self.decimation == 0;
        self.push_count += 1;
        if !keep {
            return Ok(());
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back((t, pt));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, &Field)> {
        self.samples.iter().map(|(t, f)| (*t, f))
    }

    pub fn latest(&self) -> Option<(f64, &Field)> {
        self.samples.back().map(|(t, f)| (*t, f))
    }
}

/// Evaluate Q over a history, optionally with one trial sample appended
/// (the trial is how a Picard iterate sees its own tentative p_t).
pub fn absorbed_energy_with_trial(
    model: &AbsorptionModel,
    history: &PtHistory,
    trial: Option<(f64, &Field)>,
) -> Result<Field> {
    let mut samples: Vec<(f64, &Field)> = history.samples().collect();
    if let Some((t, f)) = trial {
        if let Some(&(last, _)) = samples.last() {
            if t <= last {
                return Err(SimError::invalid("pt_history", "trial time must follow history"));
            }
        }
        samples.push((t, f));
    }
    q_from_samples(model, &samples)
}

/// Q from a complete history (latest time is "now").
pub fn absorbed_energy(model: &AbsorptionModel, history: &PtHistory) -> Result<Field> {
    absorbed_energy_with_trial(model, history, None)
}

fn q_from_samples(model: &AbsorptionModel, samples: &[(f64, &Field)]) -> Result<Field> {
    let (now, latest) = *samples
        .last()
        .ok_or_else(|| SimError::invalid("pt_history", "history must be nonempty"))?;
    for pair in samples.windows(2) {
        if pair[1].0 <= pair[0].0 {
            return Err(SimError::invalid("pt_history", "times must strictly increase"));
        }
    }
    match model.variant {
        AbsorptionVariant::Instantaneous => Ok(latest.map(|v| model.scale * v * v)),
        AbsorptionVariant::WindowedAverage { t_start, window } => {
            averaged_q(model, samples, t_start, (t_start + window).min(now))
        }
        AbsorptionVariant::FullAverage { horizon } => {
            averaged_q(model, samples, 0.0, horizon.min(now))
        }
    }
}

/// Trapezoidal mean of scale * p_t^2 over the samples inside [lo, hi].
/// When fewer than two samples fall in the range, falls back to the
/// point value at the nearest available sample (warm-up truncation).
fn averaged_q(
    model: &AbsorptionModel,
    samples: &[(f64, &Field)],
    lo: f64,
    hi: f64,
) -> Result<Field> {
    let grid = samples[0].1.grid();
    let eps = 1e-12 * hi.abs().max(lo.abs()).max(1e-30);
    let in_range: Vec<&(f64, &Field)> = samples
        .iter()
        .filter(|(t, _)| *t >= lo - eps && *t <= hi + eps)
        .collect();
    match in_range.len() {
        0 => {
            // before the window opens: no insonation average yet
            Ok(Field::zeros(grid))
        }
        1 => Ok(in_range[0].1.map(|v| model.scale * v * v)),
        _ => {
            let span = in_range.last().unwrap().0 - in_range[0].0;
            let mut acc = Field::zeros(grid);
            for pair in in_range.windows(2) {
                let (t0, f0) = (pair[0].0, pair[0].1);
                let (t1, f1) = (pair[1].0, pair[1].1);
                let w = 0.5 * (t1 - t0);
                for ((a, &x), &y) in acc
                    .values_mut()
                    .iter_mut()
                    .zip(f0.values())
                    .zip(f1.values())
                {
                    *a += w * (x * x + y * y);
                }
            }
            Ok(acc.map(|v| model.scale * v / span))
        }
    }
}

/// Q evaluated at every sample time of the history, by prefix.
pub fn absorbed_energy_series(model: &AbsorptionModel, history: &PtHistory) -> Result<Vec<Field>> {
    let samples: Vec<(f64, &Field)> = history.samples().collect();
    if samples.is_empty() {
        return Err(SimError::invalid("pt_history", "history must be nonempty"));
    }
    (1..=samples.len())
        .map(|k| q_from_samples(model, &samples[..k]))
        .collect()
}

/// Time derivative of the instantaneous Q: 2 scale p_t p_tt. Completed
/// averages have identically zero time derivative and are reported as such
/// by the caller.
pub fn dt_q_instantaneous(model: &AbsorptionModel, pt: &Field, ptt: &Field) -> Result<Field> {
    pt.zip_with(ptt, |a, b| 2.0 * model.scale * a * b)
}

/// Outcome of the sampled Lipschitz probe for Assumption-style bounds:
/// `lhs <= C * rhs_factor` with `ratio` the empirical constant.
#[derive(Clone, Copy, Debug)]
pub struct LipschitzProbe {
    /// L2-in-time of || Q(u) - Q(v) ||_{L2}.
    pub lhs: f64,
    /// (||u||_{LinfLinf} + ||v||_{LinfLinf}) * ||u - v||_{L2L2}.
    pub rhs_factor: f64,
    /// lhs / rhs_factor, with 0/0 -> 0.
    pub ratio: f64,
}

/// Sample the Lipschitz quotient of Q over two histories on matching
/// grids and time samples.
pub fn lipschitz_probe(
    model: &AbsorptionModel,
    u_history: &PtHistory,
    v_history: &PtHistory,
) -> Result<LipschitzProbe> {
    let u: Vec<(f64, &Field)> = u_history.samples().collect();
    let v: Vec<(f64, &Field)> = v_history.samples().collect();
    if u.len() != v.len() {
        return Err(SimError::ShapeMismatch("history lengths differ".into()));
    }
    if u.is_empty() {
        return Err(SimError::invalid("pt_history", "history must be nonempty"));
    }
    for (a, b) in u.iter().zip(&v) {
        if a.0 != b.0 {
            return Err(SimError::ShapeMismatch("history time samples differ".into()));
        }
        if a.1.grid() != b.1.grid() {
            return Err(SimError::ShapeMismatch("histories live on different grids".into()));
        }
    }

    let qu = absorbed_energy_series(model, u_history)?;
    let qv = absorbed_energy_series(model, v_history)?;

    // L2-in-time by the trapezoidal rule over the shared sample times
    let l2_in_time = |series: &dyn Fn(usize) -> f64| -> f64 {
        if u.len() == 1 {
            return series(0).abs();
        }
        let mut acc = 0.0;
        for i in 0..u.len() - 1 {
            let dt = u[i + 1].0 - u[i].0;
            let a = series(i);
            let b = series(i + 1);
            acc += 0.5 * dt * (a * a + b * b);
        }
        acc.sqrt()
    };

    let dq_l2: Vec<f64> = qu
        .iter()
        .zip(&qv)
        .map(|(a, b)| a.sub(b).map(|d| d.norm(crate::grid::NormKind::L2)))
        .collect::<Result<_>>()?;
    let lhs = l2_in_time(&|i| dq_l2[i]);

    let sup_u = u.iter().fold(0.0f64, |m, (_, f)| m.max(f.max_abs()));
    let sup_v = v.iter().fold(0.0f64, |m, (_, f)| m.max(f.max_abs()));
    let diff_l2: Vec<f64> = u
        .iter()
        .zip(&v)
        .map(|(a, b)| a.1.sub(b.1).map(|d| d.norm(crate::grid::NormKind::L2)))
        .collect::<Result<_>>()?;
    let rhs_factor = (sup_u + sup_v) * l2_in_time(&|i| diff_l2[i]);

    let ratio = if lhs == 0.0 && rhs_factor == 0.0 {
        0.0
    } else {
        lhs / rhs_factor
    };
    Ok(LipschitzProbe {
        lhs,
        rhs_factor,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, NormKind};
    use crate::material::test_medium;

    fn grid() -> Grid {
        Grid::new_1d(1.0, 15).unwrap()
    }

    fn model(variant: AbsorptionVariant) -> AbsorptionModel {
        AbsorptionModel::new(variant, &test_medium()).unwrap()
    }

    fn history_of_constant(v: f64, times: &[f64]) -> PtHistory {
        let samples = times
            .iter()
            .map(|&t| (t, Field::constant(grid(), v)))
            .collect();
        PtHistory::from_samples(samples).unwrap()
    }

    #[test]
    fn q_of_zero_is_zero_for_all_variants() {
        for variant in [
            AbsorptionVariant::Instantaneous,
            AbsorptionVariant::WindowedAverage {
                t_start: 0.0,
                window: 1.0,
            },
            AbsorptionVariant::FullAverage { horizon: 1.0 },
        ] {
            let m = model(variant);
            let h = history_of_constant(0.0, &[0.0, 0.5, 1.0]);
            let q = absorbed_energy(&m, &h).unwrap();
            assert_eq!(q.max_abs(), 0.0, "{variant:?}");
        }
    }

    #[test]
    fn instantaneous_constant_field() {
        let m = model(AbsorptionVariant::Instantaneous);
        let h = history_of_constant(3.0, &[0.0, 1.0]);
        let q = absorbed_energy(&m, &h).unwrap();
        for &v in q.values() {
            assert!((v - m.scale * 9.0).abs() < 1e-18);
        }
    }

    #[test]
    fn full_average_of_time_constant_equals_instantaneous() {
        let inst = model(AbsorptionVariant::Instantaneous);
        let full = model(AbsorptionVariant::FullAverage { horizon: 2.0 });
        let h = history_of_constant(2.5, &[0.0, 0.5, 1.0, 1.5, 2.0]);
        let qi = absorbed_energy(&inst, &h).unwrap();
        let qf = absorbed_energy(&full, &h).unwrap();
        let diff = qi.sub(&qf).unwrap().max_abs();
        assert!(diff < 1e-18 * inst.scale.max(1.0));
    }

    #[test]
    fn averages_are_nonnegative() {
        let m = model(AbsorptionVariant::FullAverage { horizon: 1.0 });
        let g = grid();
        let samples = (0..6)
            .map(|i| {
                let t = i as f64 * 0.2;
                (t, Field::from_fn(g, |x| (x[0] * 9.0 + t).sin()))
            })
            .collect();
        let h = PtHistory::from_samples(samples).unwrap();
        let q = absorbed_energy(&m, &h).unwrap();
        assert!(q.min_value() >= 0.0);
    }

    #[test]
    fn windowed_average_truncates_during_warmup() {
        let m = model(AbsorptionVariant::WindowedAverage {
            t_start: 1.0,
            window: 1.0,
        });
        // still before the window opens: zero field
        let h_early = history_of_constant(2.0, &[0.0, 0.5]);
        let q = absorbed_energy(&m, &h_early).unwrap();
        assert_eq!(q.max_abs(), 0.0);
        // window partially covered: average over available in-range samples
        let h_mid = history_of_constant(2.0, &[0.0, 1.0, 1.5]);
        let q = absorbed_energy(&m, &h_mid).unwrap();
        for &v in q.values() {
            assert!((v - m.scale * 4.0).abs() < 1e-18);
        }
    }

    #[test]
    fn windowed_average_ignores_samples_outside_window() {
        let m = model(AbsorptionVariant::WindowedAverage {
            t_start: 0.0,
            window: 1.0,
        });
        let g = grid();
        // p_t = 1 inside the window, huge afterwards; Q must only see the window
        let samples = vec![
            (0.0, Field::constant(g, 1.0)),
            (0.5, Field::constant(g, 1.0)),
            (1.0, Field::constant(g, 1.0)),
            (2.0, Field::constant(g, 100.0)),
        ];
        let h = PtHistory::from_samples(samples).unwrap();
        let q = absorbed_energy(&m, &h).unwrap();
        for &v in q.values() {
            assert!((v - m.scale).abs() < 1e-18);
        }
    }

    #[test]
    fn history_rejects_nonmonotone_times_and_empty() {
        let g = grid();
        let mut h = PtHistory::new(1, 8);
        h.push(0.0, Field::zeros(g)).unwrap();
        assert!(h.push(0.0, Field::zeros(g)).is_err());
        let m = model(AbsorptionVariant::Instantaneous);
        let empty = PtHistory::new(1, 8);
        assert!(absorbed_energy(&m, &empty).is_err());
    }

    #[test]
    fn decimation_keeps_every_kth_sample() {
        let g = grid();
        let mut h = PtHistory::new(3, 100);
        for i in 0..10 {
            h.push(i as f64, Field::zeros(g)).unwrap();
        }
        let times: Vec<f64> = h.samples().map(|(t, _)| t).collect();
        assert_eq!(times, vec![0.0, 3.0, 6.0, 9.0]);
    }

    #[test]
    fn lipschitz_probe_zero_for_equal_histories() {
        let m = model(AbsorptionVariant::Instantaneous);
        let h = history_of_constant(1.5, &[0.0, 0.5, 1.0]);
        let probe = lipschitz_probe(&m, &h, &h).unwrap();
        assert_eq!(probe.lhs, 0.0);
        assert_eq!(probe.ratio, 0.0);
    }

    #[test]
    fn lipschitz_probe_v_zero_matches_q_norm_bound() {
        // with v = 0 the probe reduces to ||Q(u)|| <= C ||u||_inf ||u||_2
        let m = model(AbsorptionVariant::Instantaneous);
        let g = grid();
        let times = [0.0, 0.25, 0.5, 0.75, 1.0];
        let u_samples: Vec<(f64, Field)> = times
            .iter()
            .map(|&t| (t, Field::from_fn(g, |x| (3.0 * x[0] + t).cos())))
            .collect();
        let u = PtHistory::from_samples(u_samples).unwrap();
        let v = history_of_constant(0.0, &times);
        let probe = lipschitz_probe(&m, &u, &v).unwrap();
        // lhs equals the L2(L2) size of Q(u) itself
        let qu = absorbed_energy_series(&m, &u).unwrap();
        assert!(probe.lhs > 0.0);
        assert!(probe.ratio.is_finite());
        assert!(qu.iter().all(|f| f.min_value() >= 0.0));
        // the instantaneous model is exactly |u+v|-Lipschitz pointwise, so
        // the normalized ratio stays of order scale
        assert!(probe.ratio <= m.scale * 1.5);
    }

    #[test]
    fn dt_q_formula() {
        let m = model(AbsorptionVariant::Instantaneous);
        let g = grid();
        let pt = Field::constant(g, 2.0);
        let ptt = Field::constant(g, 3.0);
        let dq = dt_q_instantaneous(&m, &pt, &ptt).unwrap();
        for &v in dq.values() {
            assert!((v - 2.0 * m.scale * 6.0).abs() < 1e-18);
        }
    }

    #[test]
    fn mismatched_probe_shapes_error() {
        let m = model(AbsorptionVariant::Instantaneous);
        let h1 = history_of_constant(1.0, &[0.0, 1.0]);
        let g2 = Grid::new_1d(1.0, 7).unwrap();
        let h2 = PtHistory::from_samples(vec![
            (0.0, Field::zeros(g2)),
            (1.0, Field::zeros(g2)),
        ])
        .unwrap();
        assert!(lipschitz_probe(&m, &h1, &h2).is_err());
    }

    #[test]
    fn series_prefix_evaluation_nonneg_and_sized() {
        let m = model(AbsorptionVariant::FullAverage { horizon: 1.0 });
        let h = history_of_constant(1.0, &[0.0, 0.4, 0.8, 1.2]);
        let series = absorbed_energy_series(&m, &h).unwrap();
        assert_eq!(series.len(), 4);
        for q in &series {
            assert!(q.min_value() >= 0.0);
            assert!(q.norm(NormKind::L2).is_finite());
        }
    }
}
