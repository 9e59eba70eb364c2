//! Config ingestion: a sectioned key-value text format (TOML syntax) with
//! strict unknown-key rejection, documented defaults, and a canonical
//! renderer whose output round-trips through the parser.

use serde::{Deserialize, Serialize};

use crate::absorption::{AbsorptionModel, AbsorptionVariant};
use crate::coupled::{
    AbsorptionSettings, Forcing, InitialData, InitialProfile, PicardSettings, PulseSpec, SimConfig,
};
use crate::error::{Result, SimError};
use crate::grid::Grid;
use crate::material::{sound_diffusivity, MediumParams, SoundSpeedLaw};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub grid: GridDoc,
    pub medium: MediumDoc,
    #[serde(default)]
    pub sound_speed: SoundSpeedDoc,
    #[serde(default)]
    pub absorption: AbsorptionDoc,
    pub time: TimeDoc,
    #[serde(default)]
    pub picard: PicardDoc,
    #[serde(default)]
    pub initial: InitialDoc,
    #[serde(default)]
    pub output: OutputDoc,
    #[serde(default)]
    pub diagnostics: DiagnosticsDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub dims: usize,
    /// Physical lengths per axis (m).
    pub extents: Vec<f64>,
    /// Interior node counts per axis.
    pub n: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumDoc {
    pub rho: f64,
    pub beta_acou: f64,
    /// Sound diffusivity (m^2/s); provide either `b` or `alpha_abs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Absorption coefficient (Np/m); converted via b = alpha c_a^3 / omega^2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_abs: Option<f64>,
    pub rho_a: f64,
    pub cap_a: f64,
    pub kappa_a: f64,
    pub rho_b: f64,
    pub cap_b: f64,
    #[serde(default)]
    pub perfusion: f64,
    #[serde(default)]
    pub theta_a: f64,
    pub c_a: f64,
    pub omega: f64,
    pub q0: f64,
    #[serde(default)]
    pub gamma1: f64,
    #[serde(default)]
    pub gamma2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SoundSpeedDoc {
    /// Built-in preset name; currently "water".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Explicit polynomial coefficients c0..cn (m/s per C^n).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorptionDoc {
    /// "instantaneous" | "windowed" | "full"
    #[serde(default = "default_variant")]
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    #[serde(default = "default_capacity")]
    pub capacity: usize,
}

fn default_variant() -> String {
    "instantaneous".to_string()
}

fn default_decimation() -> usize {
    1
}

fn default_capacity() -> usize {
    4000
}

impl Default for AbsorptionDoc {
    fn default() -> Self {
        AbsorptionDoc {
            variant: default_variant(),
            t_start: None,
            window: None,
            horizon: None,
            decimation: default_decimation(),
            capacity: default_capacity(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeDoc {
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardDoc {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    50
}

impl Default for PicardDoc {
    fn default() -> Self {
        PicardDoc {
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileDoc {
    Zero,
    Sine {
        amplitude: f64,
        modes: Vec<usize>,
    },
    Gaussian {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseDoc {
    pub amplitude: f64,
    pub center: Vec<f64>,
    pub width: f64,
    /// +1 or -1, initial propagation direction along axis 0.
    pub direction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialDoc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p0: Vec<ProfileDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p1: Vec<ProfileDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pulse: Vec<PulseDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub theta0: Vec<ProfileDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDoc {
    /// Emit snapshots and energy reports every k-th step.
    #[serde(default = "default_every")]
    pub every: usize,
    #[serde(default = "default_prefix")]
    pub prefix: String,
    #[serde(default = "default_true")]
    pub series: bool,
    #[serde(default = "default_true")]
    pub snapshots: bool,
}

fn default_every() -> usize {
    1
}

fn default_prefix() -> String {
    "run".to_string()
}

fn default_true() -> bool {
    true
}

impl Default for OutputDoc {
    fn default() -> Self {
        OutputDoc {
            every: default_every(),
            prefix: default_prefix(),
            series: true,
            snapshots: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsDoc {
    #[serde(default = "default_floor")]
    pub degeneracy_floor: f64,
    #[serde(default = "default_gamma_cap")]
    pub gamma_cap_fraction: f64,
    #[serde(default = "default_gronwall_cap")]
    pub gronwall_cap: f64,
    /// Freeze q and k at the ambient temperature (reference run for the
    /// lensing comparison).
    #[serde(default)]
    pub frozen_temperature: bool,
}

fn default_floor() -> f64 {
    0.1
}

fn default_gamma_cap() -> f64 {
    1.0
}

fn default_gronwall_cap() -> f64 {
    1e9
}

impl Default for DiagnosticsDoc {
    fn default() -> Self {
        DiagnosticsDoc {
            degeneracy_floor: default_floor(),
            gamma_cap_fraction: default_gamma_cap(),
            gronwall_cap: default_gronwall_cap(),
            frozen_temperature: false,
        }
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

/// Parse config text into the raw document, reporting the line of the
/// first syntax or unknown-key error.
pub fn parse_document(text: &str) -> Result<ConfigDocument> {
    toml::from_str::<ConfigDocument>(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| line_of_offset(text, s.start))
            .unwrap_or(0);
        SimError::ConfigParse {
            line,
            message: e.message().to_string(),
        }
    })
}

/// Canonical rendering; `parse_document(render_document(doc)) == doc`.
pub fn render_document(doc: &ConfigDocument) -> String {
    toml::to_string_pretty(doc).expect("config documents always serialize")
}

fn padded2<T: Copy + Default>(v: &[T]) -> [T; 2] {
    let mut out = [T::default(); 2];
    for (o, &x) in out.iter_mut().zip(v) {
        *o = x;
    }
    out
}

fn profile_from_doc(doc: &ProfileDoc, dims: usize, key: &str) -> Result<InitialProfile> {
    Ok(match doc {
        ProfileDoc::Zero => InitialProfile::Zero,
        ProfileDoc::Sine { amplitude, modes } => {
            if modes.len() != dims {
                return Err(SimError::invalid(key, "modes must list one entry per axis"));
            }
            if modes.iter().any(|&m| m == 0) {
                return Err(SimError::invalid(key, "mode numbers must be >= 1"));
            }
            let mut m = padded2(modes);
            if dims == 1 {
                m[1] = 1;
            }
            InitialProfile::Sine {
                amplitude: *amplitude,
                modes: m,
            }
        }
        ProfileDoc::Gaussian {
            amplitude,
            center,
            width,
        } => {
            if center.len() != dims {
                return Err(SimError::invalid(key, "center must list one entry per axis"));
            }
            if !(*width > 0.0) {
                return Err(SimError::invalid(key, "width must be > 0"));
            }
            InitialProfile::Gaussian {
                amplitude: *amplitude,
                center: padded2(center),
                width: *width,
            }
        }
    })
}

/// Validate the document and build the runtime configuration.
pub fn to_sim_config(doc: &ConfigDocument) -> Result<SimConfig> {
    // grid
    if doc.grid.dims != 1 && doc.grid.dims != 2 {
        return Err(SimError::invalid("grid.dims", "must be 1 or 2"));
    }
    if doc.grid.extents.len() != doc.grid.dims || doc.grid.n.len() != doc.grid.dims {
        return Err(SimError::invalid(
            "grid",
            "extents and n must list one entry per axis",
        ));
    }
    let grid = if doc.grid.dims == 1 {
        Grid::new_1d(doc.grid.extents[0], doc.grid.n[0])?
    } else {
        Grid::new_2d(
            padded2(&doc.grid.extents),
            padded2(&doc.grid.n),
        )?
    };

    // medium, with b either direct or from the absorption coefficient
    let m = &doc.medium;
    let b = match (m.b, m.alpha_abs) {
        (Some(b), None) => b,
        (None, Some(alpha)) => sound_diffusivity(alpha, m.c_a, m.omega)?,
        (Some(_), Some(_)) => {
            return Err(SimError::invalid(
                "medium.b",
                "give either b or alpha_abs, not both",
            ))
        }
        (None, None) => {
            return Err(SimError::invalid(
                "medium.b",
                "either b or alpha_abs is required",
            ))
        }
    };
    let medium = MediumParams {
        rho: m.rho,
        beta_acou: m.beta_acou,
        b,
        rho_a: m.rho_a,
        cap_a: m.cap_a,
        kappa_a: m.kappa_a,
        rho_b: m.rho_b,
        cap_b: m.cap_b,
        perfusion: m.perfusion,
        theta_a: m.theta_a,
        c_a: m.c_a,
        omega: m.omega,
        q0: m.q0,
        gamma1: m.gamma1,
        gamma2: m.gamma2,
    };
    medium.validate()?;

    // sound-speed law; the q-floor is the medium's q0
    let law = match (&doc.sound_speed.preset, &doc.sound_speed.coefficients) {
        (Some(name), None) => match name.as_str() {
            "water" => SoundSpeedLaw::water(medium.q0)?,
            other => {
                return Err(SimError::invalid(
                    "sound_speed.preset",
                    format!("unknown preset `{other}` (available: water)"),
                ))
            }
        },
        (None, Some(coeffs)) => SoundSpeedLaw::new(coeffs.clone(), medium.q0)?,
        (Some(_), Some(_)) => {
            return Err(SimError::invalid(
                "sound_speed",
                "give either preset or coefficients, not both",
            ))
        }
        // default: constant law at the ambient sound speed
        (None, None) => SoundSpeedLaw::constant(medium.c_a, medium.q0)?,
    };

    // absorption
    let a = &doc.absorption;
    let variant = match a.variant.as_str() {
        "instantaneous" => AbsorptionVariant::Instantaneous,
        "windowed" => AbsorptionVariant::WindowedAverage {
            t_start: a
                .t_start
                .ok_or_else(|| SimError::invalid("absorption.t_start", "required for windowed"))?,
            window: a
                .window
                .ok_or_else(|| SimError::invalid("absorption.window", "required for windowed"))?,
        },
        "full" => AbsorptionVariant::FullAverage {
            horizon: a
                .horizon
                .ok_or_else(|| SimError::invalid("absorption.horizon", "required for full"))?,
        },
        other => {
            return Err(SimError::invalid(
                "absorption.variant",
                format!("unknown variant `{other}` (instantaneous | windowed | full)"),
            ))
        }
    };
    let model = AbsorptionModel::new(variant, &medium)?;
    if a.decimation == 0 {
        return Err(SimError::invalid("absorption.decimation", "must be >= 1"));
    }

    // time
    if !(doc.time.dt > 0.0) {
        return Err(SimError::invalid("time.dt", "must be > 0"));
    }
    if !(doc.time.t_end >= doc.time.dt) {
        return Err(SimError::invalid("time.t_end", "must allow at least one step"));
    }
    // the averaging span must fit into the decimated ring buffer
    if let Some(t_complete) = model.completion_time() {
        let span = t_complete.min(doc.time.t_end);
        let needed = (span / (doc.time.dt * a.decimation as f64)).ceil() as usize + 2;
        if needed > a.capacity {
            return Err(SimError::invalid(
                "absorption.capacity",
                format!(
                    "averaging span needs {needed} stored snapshots but capacity is {}; raise capacity or decimation",
                    a.capacity
                ),
            ));
        }
    }

    // initial data
    let dims = doc.grid.dims;
    let mut initial = InitialData::default();
    for p in &doc.initial.p0 {
        initial.p0.push(profile_from_doc(p, dims, "initial.p0")?);
    }
    for p in &doc.initial.p1 {
        initial.p1.push(profile_from_doc(p, dims, "initial.p1")?);
    }
    for p in &doc.initial.theta0 {
        initial
            .theta0
            .push(profile_from_doc(p, dims, "initial.theta0")?);
    }
    for p in &doc.initial.pulse {
        if p.center.len() != dims {
            return Err(SimError::invalid(
                "initial.pulse",
                "center must list one entry per axis",
            ));
        }
        if !(p.width > 0.0) {
            return Err(SimError::invalid("initial.pulse", "width must be > 0"));
        }
        if p.direction != 1.0 && p.direction != -1.0 {
            return Err(SimError::invalid("initial.pulse", "direction must be 1 or -1"));
        }
        initial.pulses.push(PulseSpec {
            amplitude: p.amplitude,
            center: padded2(&p.center),
            width: p.width,
            direction: p.direction,
        });
    }

    let cfg = SimConfig {
        grid,
        medium,
        law,
        absorption: AbsorptionSettings {
            model,
            decimation: a.decimation,
            capacity: a.capacity,
        },
        dt: doc.time.dt,
        t_end: doc.time.t_end,
        picard: PicardSettings {
            tol: doc.picard.tol,
            max_iter: doc.picard.max_iter,
        },
        degeneracy_floor: doc.diagnostics.degeneracy_floor,
        initial,
        output_every: doc.output.every,
        gamma_cap_fraction: doc.diagnostics.gamma_cap_fraction,
        gronwall_cap: doc.diagnostics.gronwall_cap,
        frozen_temperature: doc.diagnostics.frozen_temperature,
        forcing: Forcing::None,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Parse and validate in one go.
pub fn parse_config(text: &str) -> Result<(SimConfig, ConfigDocument)> {
    let doc = parse_document(text)?;
    let cfg = to_sim_config(&doc)?;
    Ok((cfg, doc))
}
