//! The `simulate`, `steady` and `sweep` subcommands and their run directories.

use std::path::{Path, PathBuf};

use clmlab_core::dynamics::{run_simulation, BlowupReport};
use clmlab_core::spectral::SineTransform;
use clmlab_core::steady::{l_multiplier, solve_restricted, Certificate, RestrictedProblem, VanishingSet};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{parse_table, set_dotted, DomainKind, LoadedConfig, MaskKind, ModelName};
use crate::error::{io_err, CliError, CliResult};
use crate::snapshot::{DomainTag, Payload, SnapshotFile};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "CLMLAB_OUTPUT_ROOT";

/// How a run ended. Errors are reported separately through `CliError`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    BlowUp,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Completed => 0,
            Outcome::BlowUp => 2,
        }
    }
}

/// Explicit root, else `$CLMLAB_OUTPUT_ROOT`, else the working directory.
pub fn output_root(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// `output.dir` taken from `root` when relative; `runs/<config stem>` by default.
pub fn run_dir(cfg: &LoadedConfig, root: &Path) -> PathBuf {
    match &cfg.config.output.dir {
        Some(d) if d.is_absolute() => d.clone(),
        Some(d) => root.join(d),
        None => {
            let stem = cfg.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
            root.join("runs").join(stem)
        }
    }
}

/// Loads a config and applies `key=value` overrides.
pub fn load_config(path: &Path, overrides: &[(String, String)]) -> CliResult<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut table = parse_table(&text, path)?;
    for (k, v) in overrides {
        set_dotted(&mut table, k, v)?;
    }
    LoadedConfig::from_table(table, path)
}

fn prepare_dir(dir: &Path, cfg: &LoadedConfig) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let echo = dir.join("config.toml");
    std::fs::write(&echo, cfg.resolved_text()).map_err(io_err(&echo))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub model: ModelName,
    pub domain: DomainKind,
    pub outcome: Outcome,
    pub steps: usize,
    pub final_t: f64,
    pub blowup: BlowupReport,
}

#[derive(Debug, Clone)]
pub struct SimulateSummary {
    pub dir: PathBuf,
    pub report: RunReport,
}

/// Runs a simulation and writes `config.toml`, `timeseries.csv`,
/// `report.json` and `snapshots/step_NNNNNN.clm2` into the run directory.
pub fn simulate(cfg: &LoadedConfig, root: &Path) -> CliResult<SimulateSummary> {
    let model = cfg.model_spec()?;
    let w0 = cfg.initial_state(&model)?;
    let sim = cfg.sim_config();
    sim.validate()?;
    let dir = run_dir(cfg, root);
    prepare_dir(&dir, cfg)?;

    let out = run_simulation(&model, w0, &sim)?;

    let csv_path = dir.join("timeseries.csv");
    let mut w =
        csv::Writer::from_path(&csv_path).map_err(|e| CliError::Other(format!("{}: {e}", csv_path.display())))?;
    for s in out.series.samples() {
        w.serialize(s).map_err(|e| CliError::Other(format!("{}: {e}", csv_path.display())))?;
    }
    w.flush().map_err(io_err(&csv_path))?;

    if !cfg.config.output.no_snapshots {
        let snap_dir = dir.join("snapshots");
        std::fs::create_dir_all(&snap_dir).map_err(io_err(&snap_dir))?;
        for s in &out.snapshots {
            SnapshotFile::from_state(&model.space, &s.state)
                .save(&snap_dir.join(format!("step_{:06}.clm2", s.step)))?;
        }
    }

    let outcome = if out.report.detected { Outcome::BlowUp } else { Outcome::Completed };
    let report = RunReport {
        model: cfg.model()?.name,
        domain: cfg.config.domain.kind,
        outcome,
        steps: out.steps,
        final_t: out.final_t,
        blowup: out.report,
    };
    write_json(&dir.join("report.json"), &report)?;
    Ok(SimulateSummary { dir, report })
}

pub fn cmd_simulate(path: &Path, overrides: &[(String, String)], root: &Path) -> CliResult<Outcome> {
    let cfg = load_config(path, overrides)?;
    let s = simulate(&cfg, root)?;
    let r = &s.report;
    println!("run directory: {}", s.dir.display());
    println!("steps {}, final t {:.6}", r.steps, r.final_t);
    match r.outcome {
        Outcome::BlowUp => println!(
            "blow-up detected: T_hat {:.6}, exponent {:.4}, fit residual {:.2e}",
            r.blowup.t_hat, r.blowup.exponent_hat, r.blowup.fit_residual
        ),
        Outcome::Completed => println!("completed: {}", r.blowup.diagnostics),
    }
    Ok(r.outcome)
}

/// Comparison against a closed-form steady solution.
#[derive(Debug, Clone, Serialize)]
pub struct OracleCheck {
    /// `indicator` (alpha = 1) or `diagonal` (empty mask).
    pub kind: &'static str,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyReport {
    pub mask: MaskKind,
    #[serde(flatten)]
    pub certificate: Certificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleCheck>,
}

#[derive(Debug, Clone)]
pub struct SteadySummary {
    pub dir: PathBuf,
    pub report: SteadyReport,
}

fn vanishing_set(cfg: &LoadedConfig, n: usize) -> CliResult<VanishingSet> {
    let s = &cfg.config.steady;
    let invalid = |message: String| CliError::Config { path: cfg.path.clone(), message };
    match s.mask {
        MaskKind::Empty => Ok(VanishingSet::empty(n)),
        MaskKind::LeftHalf => Ok(VanishingSet::left_half(n)),
        MaskKind::Random => {
            if !(0.0..1.0).contains(&s.mask_fraction) {
                return Err(invalid(format!("steady.mask_fraction must lie in [0, 1), got {}", s.mask_fraction)));
            }
            Ok(VanishingSet::random(n, s.mask_fraction, cfg.config.seed)?)
        }
        MaskKind::File => {
            let Some(p) = &s.mask_path else {
                return Err(invalid("steady.mask = \"file\" needs steady.mask_path".into()));
            };
            let path = cfg.resolve(p);
            let snap = SnapshotFile::load(&path)?;
            let bad = |message: String| CliError::Snapshot { path: path.clone(), message };
            if snap.dim != 2 || snap.n as usize != n || snap.domain != DomainTag::Rectangle {
                return Err(bad(format!("mask must be a {n} x {n} rectangle grid")));
            }
            let Payload::Mask(m) = snap.payload else {
                return Err(bad("expected a mask, found field values".into()));
            };
            Ok(VanishingSet::new(n, m.iter().map(|b| *b != 0).collect())?)
        }
    }
}

fn oracle(alpha: f64, e: &VanishingSet, values: &[f64]) -> CliResult<Option<OracleCheck>> {
    let err = |exact: &[f64]| values.iter().zip(exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if alpha == 1.0 {
        let exact: Vec<f64> = e.mask().iter().map(|m| if *m { 0.0 } else { 1.0 }).collect();
        return Ok(Some(OracleCheck { kind: "indicator", max_abs_error: err(&exact) }));
    }
    if e.count() == 0 {
        let st = SineTransform::new(e.n())?;
        let one = st.analyze(&vec![1.0; e.n() * e.n()])?;
        let exact = st.synthesize(&one.scaled(|k1, k2| 1.0 / l_multiplier(alpha, k1, k2)))?;
        return Ok(Some(OracleCheck { kind: "diagonal", max_abs_error: err(&exact) }));
    }
    Ok(None)
}

/// Solves the restricted steady problem and writes `config.toml`,
/// `solution.clm2`, `mask.clm2` and `certificate.json`. A solve that stops at
/// the iteration cap still writes its outputs and is then reported as an error.
pub fn steady(cfg: &LoadedConfig, root: &Path) -> CliResult<SteadySummary> {
    let d = &cfg.config.domain;
    if d.kind != DomainKind::Rectangle {
        return Err(CliError::Config {
            path: cfg.path.clone(),
            message: format!("the steady problem is posed on the rectangle, not {:?}", d.kind),
        });
    }
    let s = &cfg.config.steady;
    let e = vanishing_set(cfg, d.n)?;
    let problem = RestrictedProblem { alpha: s.alpha, vanishing: e.clone(), tol: s.tol, max_iter: s.max_iter };
    let sol = solve_restricted(&problem)?;
    let space = cfg.space()?;

    let dir = run_dir(cfg, root);
    prepare_dir(&dir, cfg)?;
    SnapshotFile::from_state(&space, std::slice::from_ref(&sol.values)).save(&dir.join("solution.clm2"))?;
    SnapshotFile::mask(&space, e.mask()).save(&dir.join("mask.clm2"))?;
    let report = SteadyReport { mask: s.mask, oracle: oracle(s.alpha, &e, &sol.values)?, certificate: sol.certificate };
    write_json(&dir.join("certificate.json"), &report)?;

    let c = &report.certificate;
    if !c.converged {
        return Err(CliError::Other(format!(
            "steady solve did not converge: residual {:.3e} (target {:.1e}) after {} iterations; certificate in {}",
            c.off_residual,
            s.tol,
            c.iterations,
            dir.display()
        )));
    }
    Ok(SteadySummary { dir, report })
}

pub fn cmd_steady(path: &Path, overrides: &[(String, String)], root: &Path) -> CliResult<()> {
    let cfg = load_config(path, overrides)?;
    let s = steady(&cfg, root)?;
    let c = &s.report.certificate;
    println!("run directory: {}", s.dir.display());
    println!(
        "alpha {}, n {}, |E| = {} nodes: off-E residual {:.3e} after {} CG iterations, max |w| on E {:.1e}",
        c.alpha, c.n, c.vanishing_nodes, c.off_residual, c.iterations, c.on_max_abs
    );
    if let Some(o) = &s.report.oracle {
        println!("{} oracle: max error {:.3e}", o.kind, o.max_abs_error);
    }
    Ok(())
}

/// Result of one member of a sweep.
#[derive(Debug)]
pub struct SweepRun {
    pub value: String,
    pub dir: PathBuf,
    pub result: CliResult<RunReport>,
}

impl SweepRun {
    pub fn exit_code(&self) -> u8 {
        match &self.result {
            Ok(r) => r.outcome.exit_code(),
            Err(_) => 1,
        }
    }
}

fn dir_name(key: &str, value: &str) -> String {
    format!("{key}={value}")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-=".contains(c) { c } else { '_' })
        .collect()
}

/// Runs one simulation per value of `key`, in parallel. Each run writes into
/// `<run dir>/<key>=<value>/`; the summary `sweep.csv` goes in the run dir.
pub fn sweep(path: &Path, key: &str, values: &[String], root: &Path) -> CliResult<Vec<SweepRun>> {
    if values.is_empty() {
        return Err(CliError::Other("sweep needs at least one value".into()));
    }
    let base = load_config(path, &[])?;
    let base_dir = run_dir(&base, root);
    let runs: Vec<SweepRun> = values
        .par_iter()
        .map(|value| {
            let dir = base_dir.join(dir_name(key, value));
            let result = (|| {
                let overrides = [
                    (key.to_string(), value.clone()),
                    ("output.dir".to_string(), format!("{:?}", dir.to_string_lossy())),
                ];
                let cfg = load_config(path, &overrides)?;
                Ok(simulate(&cfg, root)?.report)
            })();
            SweepRun { value: value.clone(), dir, result }
        })
        .collect();

    let summary = base_dir.join("sweep.csv");
    std::fs::create_dir_all(&base_dir).map_err(io_err(&base_dir))?;
    let mut w = csv::Writer::from_path(&summary).map_err(|e| CliError::Other(format!("{}: {e}", summary.display())))?;
    let csv_err = |e: csv::Error| CliError::Other(format!("{}: {e}", summary.display()));
    w.write_record([key, "exit_code", "final_t", "t_hat", "exponent_hat", "error"]).map_err(csv_err)?;
    for r in &runs {
        let (final_t, t_hat, p, err) = match &r.result {
            Ok(rep) => (
                rep.final_t.to_string(),
                rep.blowup.t_hat.to_string(),
                rep.blowup.exponent_hat.to_string(),
                String::new(),
            ),
            Err(e) => (String::new(), String::new(), String::new(), e.to_string().replace('\n', " ")),
        };
        w.write_record([r.value.as_str(), &r.exit_code().to_string(), &final_t, &t_hat, &p, &err]).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&summary))?;
    Ok(runs)
}

/// 1 if any run failed, else 2 if any blew up, else 0.
pub fn sweep_exit_code(runs: &[SweepRun]) -> u8 {
    let codes: Vec<u8> = runs.iter().map(SweepRun::exit_code).collect();
    if codes.contains(&1) {
        1
    } else if codes.contains(&2) {
        2
    } else {
        0
    }
}

pub fn cmd_sweep(path: &Path, key: &str, values: &[String], root: &Path) -> CliResult<u8> {
    let runs = sweep(path, key, values, root)?;
    println!("{:<16} {:>4}  {:>10}  {:>10}  detail", key, "exit", "final t", "T_hat");
    for r in &runs {
        match &r.result {
            Ok(rep) => println!(
                "{:<16} {:>4}  {:>10.6}  {:>10.6}  {}",
                r.value,
                r.exit_code(),
                rep.final_t,
                rep.blowup.t_hat,
                r.dir.display()
            ),
            Err(e) => {
                println!("{:<16} {:>4}  {:>10}  {:>10}  {}", r.value, 1, "-", "-", e.to_string().replace('\n', " "))
            }
        }
    }
    Ok(sweep_exit_code(&runs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_dir_rules() {
        let p = Path::new("/cfg/disk.toml");
        let table = parse_table("domain.kind = \"torus\"\ndomain.n = 8\n", p).unwrap();
        let mut cfg = LoadedConfig::from_table(table, p).unwrap();
        assert_eq!(run_dir(&cfg, Path::new("/out")), PathBuf::from("/out/runs/disk"));
        cfg.config.output.dir = Some("a/b".into());
        assert_eq!(run_dir(&cfg, Path::new("/out")), PathBuf::from("/out/a/b"));
        cfg.config.output.dir = Some("/abs".into());
        assert_eq!(run_dir(&cfg, Path::new("/out")), PathBuf::from("/abs"));
        assert_eq!(output_root(Some(Path::new("/x"))), PathBuf::from("/x"));
    }

    #[test]
    fn sweep_directory_names_are_path_safe() {
        assert_eq!(dir_name("sim.dt0", "0.01"), "sim.dt0=0.01");
        assert_eq!(dir_name("model.name", "\"a/b\""), "model.name=_a_b_");
    }

    #[test]
    fn exit_code_priority() {
        let run = |code: u8| SweepRun {
            value: String::new(),
            dir: PathBuf::new(),
            result: match code {
                1 => Err(CliError::Other("x".into())),
                c => Ok(RunReport {
                    model: ModelName::Model1,
                    domain: DomainKind::Torus,
                    outcome: if c == 2 { Outcome::BlowUp } else { Outcome::Completed },
                    steps: 0,
                    final_t: 0.0,
                    blowup: clmlab_core::dynamics::fit_blowup(&Default::default()),
                }),
            },
        };
        assert_eq!(sweep_exit_code(&[run(0), run(0)]), 0);
        assert_eq!(sweep_exit_code(&[run(0), run(2)]), 2);
        assert_eq!(sweep_exit_code(&[run(2), run(1), run(0)]), 1);
    }
}
