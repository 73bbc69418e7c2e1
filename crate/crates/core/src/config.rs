//! Run configuration: a TOML document with `grid`, `coefficients`, `noise`,
//! `time`, `initial`, `output` and `experiment` tables. Every key is optional;
//! missing keys take the defaults below.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::coefficients::{ChiPreset, CoefficientSet, KPreset, PhiPreset};
use crate::error::{Error, Result};
use crate::field::{BcMode, Grid};
use crate::initial::{default_initial, InitialParams, InitialPreset};
use crate::noise::{NoiseModel, NoiseParams};
use crate::stepper::{State, StepperConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub bc_mode: String,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            nx: 64,
            ny: 64,
            lx: 1.0,
            ly: 1.0,
            bc_mode: "torus".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientsSection {
    pub delta: f64,
    pub mu: f64,
    pub nu: f64,
    pub chi: String,
    pub k: String,
    pub c_max: f64,
    pub phi: String,
    pub phi_amplitude: f64,
}

impl Default for CoefficientsSection {
    fn default() -> Self {
        CoefficientsSection {
            delta: 1.0,
            mu: 1.0,
            nu: 1.0,
            chi: "one".into(),
            k: "linear".into(),
            c_max: 1.0,
            phi: "zero".into(),
            phi_amplitude: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub m: usize,
    pub p: f64,
    pub q0: f64,
    pub a_scale: f64,
    pub b_scale: f64,
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let d = NoiseParams::default();
        NoiseSection {
            m: d.m,
            p: d.p,
            q0: d.q0,
            a_scale: d.a_scale,
            b_scale: d.b_scale,
            seed: d.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub cfl_safety: f64,
    pub clip_negative_n: bool,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            dt: 1e-3,
            horizon: 1.0,
            cfl_safety: 0.8,
            clip_negative_n: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub preset: String,
    pub seed: u64,
    pub amplitude: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        let d = InitialParams::default();
        InitialSection {
            preset: d.preset.as_str().into(),
            seed: d.seed,
            amplitude: d.amplitude,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub sample_stride: usize,
    /// Write a snapshot every this many samples; 0 keeps only the final state.
    pub snapshot_stride: usize,
    pub strict_invariants: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            sample_stride: 10,
            snapshot_stride: 0,
            strict_invariants: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub master_seed: u64,
    pub members: usize,
    pub m_list: Vec<usize>,
    pub delta0: f64,
    pub dt_list: Vec<f64>,
    pub reference_dt: f64,
    pub paths: usize,
    /// Velocity weight `K` of the entropy functional; 0 calibrates it from the base run.
    pub k: f64,
    pub c: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            master_seed: 0,
            members: 8,
            m_list: vec![4, 8, 16, 32],
            delta0: 1e-8,
            dt_list: vec![4e-3, 2e-3, 1e-3, 5e-4],
            reference_dt: 1.25e-4,
            paths: 4,
            k: 0.0,
            c: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSection,
    pub coefficients: CoefficientsSection,
    /// Absent on the Neumann square means deterministic velocity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    pub time: TimeSection,
    pub initial: InitialSection,
    pub output: OutputSection,
    pub experiment: ExperimentSection,
}

/// Everything a run needs, built from a [`RunConfig`].
#[derive(Clone, Debug)]
pub struct Resolved {
    pub grid: Grid,
    pub stepper: StepperConfig,
    pub initial: State,
    pub initial_params: InitialParams,
}

/// `(section, key) -> line numbers` of every assignment, 1-based.
fn key_lines(text: &str) -> HashMap<(String, String), Vec<usize>> {
    let mut out: HashMap<(String, String), Vec<usize>> = HashMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
        } else if let Some((key, _)) = line.split_once('=') {
            out.entry((section.clone(), key.trim().to_string())).or_default().push(i + 1);
        }
    }
    out
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Field path `section.key` of the assignment on `line`, if any.
fn field_at_line(text: &str, line: usize) -> Option<String> {
    key_lines(text)
        .into_iter()
        .find(|(_, lines)| lines.contains(&line))
        .map(|((s, k), _)| if s.is_empty() { k } else { format!("{s}.{k}") })
}

fn bad_choice(field: &str, value: &str, choices: &str) -> Error {
    Error::config(field, format!("unknown value `{value}`, expected one of {choices}"))
}

impl RunConfig {
    /// Parses and validates; errors name the field and line.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut dups: Vec<_> = key_lines(text).into_iter().filter(|(_, l)| l.len() > 1).collect();
        dups.sort_by_key(|(_, l)| l[1]);
        if let Some(((s, k), lines)) = dups.first() {
            return Err(Error::config(
                format!("{s}.{k}"),
                format!("duplicate key on lines {} and {}", lines[0], lines[1]),
            ));
        }
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            let field = line
                .and_then(|l| field_at_line(text, l))
                .unwrap_or_else(|| "config".to_string());
            let msg = e.message().trim().to_string();
            match line {
                Some(l) => Error::config(field, format!("line {l}: {msg}")),
                None => Error::config(field, msg),
            }
        })?;
        cfg.resolve().map_err(|e| match e {
            Error::Config { field, message } => {
                let (section, key) = field.split_once('.').unwrap_or(("", field.as_str()));
                match key_lines(text).get(&(section.to_string(), key.to_string())) {
                    Some(lines) => Error::config(field.clone(), format!("line {}: {message}", lines[0])),
                    None => Error::Config { field, message },
                }
            }
            other => other,
        })?;
        Ok(cfg)
    }

    /// Canonical TOML with every key spelled out.
    pub fn to_canonical(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    /// Replaces every seed (noise, initial data, experiment master) by `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        match self.noise.as_mut() {
            Some(n) => n.seed = seed,
            None if self.grid.bc_mode == "torus" => {
                self.noise = Some(NoiseSection {
                    seed,
                    ..Default::default()
                })
            }
            None => {}
        }
        self.initial.seed = seed;
        self.experiment.master_seed = seed;
        self
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        let mode = BcMode::parse(&g.bc_mode).ok_or_else(|| bad_choice("grid.bc_mode", &g.bc_mode, "torus, square_neumann"))?;
        Grid::new(g.nx, g.ny, g.lx, g.ly, mode)
    }

    pub fn coefficients(&self, grid: Grid) -> Result<CoefficientSet> {
        let c = &self.coefficients;
        let chi = ChiPreset::parse(&c.chi).ok_or_else(|| bad_choice("coefficients.chi", &c.chi, "one"))?;
        let k = KPreset::parse(&c.k).ok_or_else(|| bad_choice("coefficients.k", &c.k, "linear, saturating"))?;
        let phi = PhiPreset::parse(&c.phi).ok_or_else(|| bad_choice("coefficients.phi", &c.phi, "zero, cosine"))?;
        if !c.phi_amplitude.is_finite() {
            return Err(Error::config("coefficients.phi_amplitude", "must be finite"));
        }
        CoefficientSet::from_presets(c.delta, c.mu, c.nu, chi, k, phi.field(grid, c.phi_amplitude), c.c_max)
    }

    pub fn noise_model(&self, grid: Grid) -> Result<NoiseModel> {
        match &self.noise {
            None if grid.bc_mode == BcMode::SquareNeumann => Ok(NoiseModel::silent(&grid)),
            None => NoiseModel::from_params(&grid, &NoiseParams::default()),
            Some(n) => NoiseModel::from_params(
                &grid,
                &NoiseParams {
                    m: n.m,
                    p: n.p,
                    q0: n.q0,
                    a_scale: n.a_scale,
                    b_scale: n.b_scale,
                    seed: n.seed,
                },
            ),
        }
    }

    pub fn initial_params(&self) -> Result<InitialParams> {
        let i = &self.initial;
        let preset = InitialPreset::parse(&i.preset)
            .ok_or_else(|| bad_choice("initial.preset", &i.preset, "uniform_plus_bump, random_smooth, benchmark"))?;
        Ok(InitialParams {
            preset,
            seed: i.seed,
            amplitude: i.amplitude,
        })
    }

    /// Builds and validates the grid, stepper configuration and initial state.
    pub fn resolve(&self) -> Result<Resolved> {
        let grid = self.grid()?;
        let coeffs = self.coefficients(grid)?;
        let noise = self.noise_model(grid)?;
        let t = &self.time;
        let mut stepper = StepperConfig {
            cfl_safety: t.cfl_safety,
            clip_negative_n: t.clip_negative_n,
            sample_stride: self.output.sample_stride,
            strict: self.output.strict_invariants,
            ..StepperConfig::deterministic(1.0, 1.0, coeffs)?
        };
        stepper.dt = t.dt;
        stepper.horizon = t.horizon;
        stepper.noise = noise;
        stepper.validate()?;
        let e = &self.experiment;
        if e.members < 2 {
            return Err(Error::config("experiment.members", "must be at least 2"));
        }
        if !(e.delta0 >= 0.0 && e.delta0.is_finite()) {
            return Err(Error::config("experiment.delta0", "must be nonnegative"));
        }
        if e.dt_list.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::config("experiment.dt_list", "steps must be positive"));
        }
        if !(e.reference_dt > 0.0) {
            return Err(Error::config("experiment.reference_dt", "must be positive"));
        }
        if !(e.k >= 0.0 && e.c >= 0.0) {
            return Err(Error::config("experiment.k", "k and c must be nonnegative"));
        }
        if self.output.dir.is_empty() {
            return Err(Error::config("output.dir", "must not be empty"));
        }
        let initial_params = self.initial_params()?;
        let initial = default_initial(grid, &initial_params, stepper.coefficients.c_max)?;
        Ok(Resolved {
            grid,
            stepper,
            initial,
            initial_params,
        })
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    RunConfig::parse(text)
}
