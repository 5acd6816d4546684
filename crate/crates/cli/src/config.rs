//! Run configuration: TOML text whose keys are dotted sections
//! (`model.name`, `domain.a`, `sim.dt0`, ...), either written flat or under
//! `[section]` headers.

use std::path::{Path, PathBuf};

use clmlab_core::dynamics::{Integrator, SimConfig, State};
use clmlab_core::geometry::{EllipseDomain, PeriodicBox};
use clmlab_core::models::{ModelSpec, ModelVariant, Space};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, CliResult};
use crate::snapshot::SnapshotFile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for randomized masks and suites.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSection>,
    pub domain: DomainSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub steady: SteadySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Model1,
    Model1Prime,
    System32,
    ZeroOrder3d,
    Perturbed,
    Clm1d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: ModelName,
    /// Perturbed model only.
    #[serde(default)]
    pub convection: bool,
    /// Perturbed model only.
    #[serde(default)]
    pub diffusion: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Rectangle,
    Ellipse,
    Torus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: DomainKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Torus dimension; inferred from the model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Torus side length, `2 pi` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    #[default]
    Constant,
    Modes,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeShape {
    /// `cos(k . x)` on the torus.
    Cos,
    /// `sin(k . x)` on the torus.
    Sin,
    /// `sin(k1 x1) sin(k2 x2)` on the rectangle.
    Sine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub shape: ModeShape,
    pub k: Vec<i64>,
    pub amp: f64,
    #[serde(default)]
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub kind: InitialKind,
    /// The constant, or the offset added to the modes.
    #[serde(default)]
    pub value: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modes: Vec<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { kind: InitialKind::Constant, value: 0.0, modes: Vec::new(), path: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorName {
    Rk4,
    Ifrk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt0: f64,
    pub t_end: f64,
    pub integrator: IntegratorName,
    pub blowup_threshold: f64,
    pub min_dt: f64,
    pub output_every: usize,
    pub dealias: bool,
    /// Relative growth allowed per step; 0 disables the limit.
    pub growth_cfl: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            dt0: d.dt0,
            t_end: d.t_end,
            integrator: IntegratorName::Rk4,
            blowup_threshold: d.blowup_threshold,
            min_dt: d.min_dt,
            output_every: d.output_every,
            dealias: d.dealias,
            growth_cfl: d.growth_cfl.unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    Empty,
    LeftHalf,
    Random,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadySection {
    pub alpha: f64,
    pub mask: MaskKind,
    /// Probability of a node joining a random mask.
    pub mask_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<PathBuf>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SteadySection {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            mask: MaskKind::Empty,
            mask_fraction: 0.3,
            mask_path: None,
            tol: clmlab_core::steady::DEFAULT_TOL,
            max_iter: clmlab_core::steady::DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Run directory; relative paths are taken from the output root.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Skip snapshot files when true.
    pub no_snapshots: bool,
}

/// A parsed configuration together with the file it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub path: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_table(parse_table(&text, path)?, path)
    }

    /// Deserializes an already parsed table, e.g. after overrides.
    pub fn from_table(table: toml::Table, path: &Path) -> CliResult<Self> {
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config { path: path.to_path_buf(), message: e.to_string() })?;
        Ok(Self { config, path: path.to_path_buf() })
    }

    /// Resolves a path named in the config relative to the config file.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }

    fn invalid(&self, message: impl Into<String>) -> CliError {
        CliError::Config { path: self.path.clone(), message: message.into() }
    }

    pub fn model(&self) -> CliResult<&ModelSection> {
        self.config.model.as_ref().ok_or_else(|| self.invalid("missing key model.name"))
    }

    fn variant(&self) -> CliResult<ModelVariant> {
        let m = self.model()?;
        if (m.convection || m.diffusion) && m.name != ModelName::Perturbed {
            return Err(self.invalid("model.convection and model.diffusion apply to the perturbed model only"));
        }
        Ok(match m.name {
            ModelName::Model1 => ModelVariant::Model1,
            ModelName::Model1Prime => ModelVariant::Model1Prime,
            ModelName::System32 => ModelVariant::System32,
            ModelName::ZeroOrder3d => ModelVariant::ZeroOrder3D,
            ModelName::Perturbed => ModelVariant::perturbed(m.convection, m.diffusion),
            ModelName::Clm1d => ModelVariant::Clm1D,
        })
    }

    pub fn space(&self) -> CliResult<Space> {
        let d = &self.config.domain;
        match d.kind {
            DomainKind::Rectangle => Ok(Space::rectangle(d.n)?),
            DomainKind::Ellipse => {
                let (Some(a), Some(c)) = (d.a, d.c) else {
                    return Err(self.invalid("an ellipse needs domain.a and domain.c"));
                };
                Ok(Space::ellipse(EllipseDomain::new(a, d.b.unwrap_or(0.0), c)?, d.n)?)
            }
            DomainKind::Torus => {
                let dim = match (d.dim, &self.config.model) {
                    (Some(dim), _) => dim,
                    (None, Some(m)) => match m.name {
                        ModelName::ZeroOrder3d => 3,
                        ModelName::Clm1d => 1,
                        _ => 2,
                    },
                    (None, None) => 2,
                };
                let length = d.length.unwrap_or(2.0 * std::f64::consts::PI);
                Ok(Space::torus(PeriodicBox::with_length(dim, d.n, length)?))
            }
        }
    }

    pub fn model_spec(&self) -> CliResult<ModelSpec> {
        Ok(ModelSpec::new(self.variant()?, self.space()?)?.with_dealias(self.config.sim.dealias))
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.config.sim;
        SimConfig {
            dt0: s.dt0,
            t_end: s.t_end,
            integrator: match s.integrator {
                IntegratorName::Rk4 => Integrator::Rk4,
                IntegratorName::Ifrk4 => Integrator::IfRk4,
            },
            blowup_threshold: s.blowup_threshold,
            min_dt: s.min_dt,
            output_every: s.output_every,
            dealias: s.dealias,
            growth_cfl: (s.growth_cfl > 0.0).then_some(s.growth_cfl),
        }
    }

    /// Initial data for `model`.
    pub fn initial_state(&self, model: &ModelSpec) -> CliResult<State> {
        let init = &self.config.initial;
        let space = &model.space;
        let comps = model.components();
        match init.kind {
            InitialKind::Constant => Ok(vec![vec![init.value; space.len()]; comps]),
            InitialKind::Modes => {
                let mut state = vec![vec![init.value; space.len()]; comps];
                for m in &init.modes {
                    if m.component >= comps {
                        return Err(self.invalid(format!(
                            "mode component {} out of range for a {comps}-component model",
                            m.component
                        )));
                    }
                    let values = self.mode_values(space, m)?;
                    state[m.component].iter_mut().zip(values).for_each(|(s, v)| *s += v);
                }
                Ok(state)
            }
            InitialKind::File => {
                let Some(p) = &init.path else {
                    return Err(self.invalid("initial.kind = \"file\" needs initial.path"));
                };
                let path = self.resolve(p);
                let snap = SnapshotFile::load(&path)?;
                snap.to_state(space, comps, &path)
            }
        }
    }

    fn mode_values(&self, space: &Space, m: &Mode) -> CliResult<Vec<f64>> {
        let k: Vec<f64> = m.k.iter().map(|v| *v as f64).collect();
        match (m.shape, space) {
            (ModeShape::Cos | ModeShape::Sin, Space::Torus(_)) => {
                if k.len() != space.dim() {
                    return Err(self.invalid(format!("mode k needs {} entries, got {}", space.dim(), k.len())));
                }
                let cos = m.shape == ModeShape::Cos;
                Ok(space.sample(|x| {
                    let phase: f64 = k.iter().zip(x).map(|(ki, xi)| ki * xi).sum();
                    m.amp * if cos { phase.cos() } else { phase.sin() }
                }))
            }
            (ModeShape::Sine, Space::Rectangle(_)) => {
                if k.len() != 2 || k.iter().any(|v| *v < 1.0) {
                    return Err(self.invalid("sine modes need two positive wavenumbers"));
                }
                Ok(space.sample(|x| m.amp * (k[0] * x[0]).sin() * (k[1] * x[1]).sin()))
            }
            (shape, _) => Err(self
                .invalid(format!("mode shape {shape:?} is not available on a {:?} domain", self.config.domain.kind))),
        }
    }

    /// The configuration with every default filled in, as TOML.
    pub fn resolved_text(&self) -> String {
        toml::to_string(&self.config).unwrap_or_else(|e| format!("# could not serialize config: {e}\n"))
    }
}

pub fn parse_table(text: &str, path: &Path) -> CliResult<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| CliError::Config { path: path.to_path_buf(), message: e.to_string() })
}

/// Sets a dotted key in a parsed table. The value is read as a TOML value
/// and falls back to a bare string.
pub fn set_dotted(table: &mut toml::Table, key: &str, raw: &str) -> CliResult<()> {
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Other(format!("invalid key '{key}'")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(CliError::Other(format!("key '{key}': '{part}' is not a section"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
