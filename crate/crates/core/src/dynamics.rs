//! Time integration, blow-up detection and singular-time fitting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ModelSpec, Space};
use crate::spectral::FourierField;

/// Grid values per component.
pub type State = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Classical explicit fourth-order Runge-Kutta.
    Rk4,
    /// Integrating-factor RK4: the Laplacian is propagated exactly by
    /// `exp(-|k|^2 dt)` on the torus.
    IfRk4,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Largest step.
    pub dt0: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    /// Sup-norm at which blow-up is declared.
    pub blowup_threshold: f64,
    /// Halving stops below this step.
    pub min_dt: f64,
    /// Snapshot cadence in accepted steps; 0 keeps only the first and last.
    pub output_every: usize,
    pub dealias: bool,
    /// When set, steps are also limited to `growth_cfl / (|rhs|_inf / |w|_inf)`,
    /// which keeps the relative change per step bounded as the solution grows.
    pub growth_cfl: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt0: 1e-2,
            t_end: 1.0,
            integrator: Integrator::Rk4,
            blowup_threshold: 1e6,
            min_dt: 1e-12,
            output_every: 10,
            dealias: true,
            growth_cfl: Some(0.02),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.dt0 > 0.0 && self.dt0.is_finite()) {
            return bad(format!("dt0 must be positive, got {}", self.dt0));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.blowup_threshold > 1.0) {
            return bad(format!("blow-up threshold must exceed 1, got {}", self.blowup_threshold));
        }
        if !(self.min_dt > 0.0) {
            return bad(format!("min_dt must be positive, got {}", self.min_dt));
        }
        if let Some(c) = self.growth_cfl {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("growth_cfl must be positive, got {c}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub sup_norm: f64,
    pub l2_norm: f64,
    pub mean: f64,
}

/// Norm history with strictly increasing times.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    samples: Vec<Sample>,
}

impl TimeSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, s: Sample) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(s.t > last.t) {
                return Err(Error::InvalidParameter(format!("time series must increase: {} after {}", s.t, last.t)));
            }
        }
        self.samples.push(s);
        Ok(())
    }

    /// Builds a series from `(t, sup_norm)` pairs.
    pub fn from_sup_norms(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut ts = Self::new();
        for (t, s) in points {
            ts.push(Sample { t, sup_norm: s, l2_norm: f64::NAN, mean: f64::NAN })?;
        }
        Ok(ts)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    /// Blow-up observed and the singular-time fit succeeded.
    pub detected: bool,
    pub threshold_reached: bool,
    pub t_hat: f64,
    /// `p` in `|w|_inf ~ C / (T - t)^p`.
    pub exponent_hat: f64,
    /// RMS relative misfit of the power law over the fitting window.
    pub fit_residual: f64,
    pub last_t: f64,
    pub window_samples: usize,
    pub diagnostics: String,
}

impl BlowupReport {
    fn not_detected(last_t: f64, diagnostics: impl Into<String>) -> Self {
        Self {
            detected: false,
            threshold_reached: false,
            t_hat: f64::NAN,
            exponent_hat: f64::NAN,
            fit_residual: f64::NAN,
            last_t,
            window_samples: 0,
            diagnostics: diagnostics.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub state: State,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub series: TimeSeries,
    pub snapshots: Vec<Snapshot>,
    pub report: BlowupReport,
    pub steps: usize,
    pub final_t: f64,
    pub final_state: State,
}

pub fn sup_norm(state: &[Vec<f64>]) -> f64 {
    state.iter().flatten().fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

fn is_finite(state: &[Vec<f64>]) -> bool {
    state.iter().flatten().all(|v| v.is_finite())
}

fn sample(space: &Space, t: f64, state: &[Vec<f64>]) -> Sample {
    let count = state.iter().map(Vec::len).sum::<usize>().max(1) as f64;
    let sum_sq: f64 = state.iter().flatten().map(|v| v * v).sum();
    let sum: f64 = state.iter().flatten().sum();
    Sample { t, sup_norm: sup_norm(state), l2_norm: (sum_sq * space.cell_volume()).sqrt(), mean: sum / count }
}

/// `a + s b`, componentwise.
fn axpy(a: &[Vec<f64>], s: f64, b: &[Vec<f64>]) -> State {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(xi, yi)| xi + s * yi).collect()).collect()
}

fn rk4(model: &ModelSpec, u: &[Vec<f64>], dt: f64) -> Result<State> {
    let k1 = model.rhs(u)?;
    let k2 = model.rhs(&axpy(u, 0.5 * dt, &k1))?;
    let k3 = model.rhs(&axpy(u, 0.5 * dt, &k2))?;
    let k4 = model.rhs(&axpy(u, dt, &k3))?;
    Ok(u.iter()
        .enumerate()
        .map(|(c, uc)| {
            uc.iter()
                .enumerate()
                .map(|(p, v)| v + dt / 6.0 * (k1[c][p] + 2.0 * k2[c][p] + 2.0 * k3[c][p] + k4[c][p]))
                .collect()
        })
        .collect())
}

fn if_rk4(model: &ModelSpec, u: &[Vec<f64>], dt: f64) -> Result<State> {
    let Space::Torus(tf) = &model.space else {
        return Err(Error::Unsupported("integrating-factor RK4 needs a periodic box".into()));
    };
    let diffusive = model.is_diffusive();
    let factor = |f: &FourierField, tau: f64| -> FourierField {
        if diffusive {
            f.map(|k, _| num_complex::Complex64::new((-(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) * tau).exp(), 0.0))
        } else {
            f.clone()
        }
    };
    let fwd = |s: &[Vec<f64>]| -> Result<Vec<FourierField>> { s.iter().map(|c| tf.forward(c)).collect() };
    let inv = |s: &[FourierField]| -> Result<State> { s.iter().map(|c| tf.inverse(c)).collect() };
    let n = |s: &[FourierField]| -> Result<Vec<FourierField>> { fwd(&model.nonlinear_rhs(&inv(s)?)?) };

    let u_hat = fwd(u)?;
    let e_half: Vec<FourierField> = u_hat.iter().map(|f| factor(f, 0.5 * dt)).collect();
    let e_full: Vec<FourierField> = u_hat.iter().map(|f| factor(f, dt)).collect();

    let k1 = n(&u_hat)?;
    let a: Vec<FourierField> =
        u_hat.iter().zip(&k1).map(|(f, k)| factor(&f.add(&k.scale(0.5 * dt)), 0.5 * dt)).collect();
    let k2 = n(&a)?;
    let b: Vec<FourierField> = e_half.iter().zip(&k2).map(|(e, k)| e.add(&k.scale(0.5 * dt))).collect();
    let k3 = n(&b)?;
    let c: Vec<FourierField> = e_full.iter().zip(&k3).map(|(e, k)| e.add(&factor(k, 0.5 * dt).scale(dt))).collect();
    let k4 = n(&c)?;
    let next: Vec<FourierField> = (0..u_hat.len())
        .map(|i| {
            let mid = factor(&k2[i].add(&k3[i]), 0.5 * dt).scale(2.0);
            let incr = factor(&k1[i], dt).add(&mid).add(&k4[i]).scale(dt / 6.0);
            e_full[i].add(&incr)
        })
        .collect();
    inv(&next)
}

/// One step of the chosen integrator. Non-finite results are reported as
/// [`Error::NonFinite`] so the caller can shrink the step.
pub fn step(model: &ModelSpec, integrator: Integrator, state: &[Vec<f64>], dt: f64) -> Result<State> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {dt}")));
    }
    if !is_finite(state) {
        return Err(Error::NonFinite("step input"));
    }
    let next = match integrator {
        Integrator::Rk4 => rk4(model, state, dt)?,
        Integrator::IfRk4 => if_rk4(model, state, dt)?,
    };
    if !is_finite(&next) {
        return Err(Error::NonFinite("step result"));
    }
    Ok(next)
}

/// Integrates until `t_end`, the blow-up threshold, or step underflow.
pub fn run_simulation(model: &ModelSpec, w0: State, cfg: &SimConfig) -> Result<SimulationOutput> {
    cfg.validate()?;
    if w0.len() != model.components() || w0.iter().any(|c| c.len() != model.space.len()) {
        return Err(Error::InvalidParameter(format!(
            "initial data needs {} component(s) of length {}",
            model.components(),
            model.space.len()
        )));
    }
    if !is_finite(&w0) {
        return Err(Error::NonFinite("initial data"));
    }
    if cfg.integrator == Integrator::IfRk4 && !matches!(model.space, Space::Torus(_)) {
        return Err(Error::Unsupported("integrating-factor RK4 needs a periodic box".into()));
    }
    let model = model.clone().with_dealias(cfg.dealias);

    let mut t = 0.0;
    let mut state = w0;
    let mut steps = 0usize;
    let mut series = TimeSeries::new();
    series.push(sample(&model.space, t, &state))?;
    let mut snapshots = vec![Snapshot { step: 0, t, state: state.clone() }];
    let mut threshold_reached = false;
    let mut underflow = false;

    'outer: loop {
        let sup = sup_norm(&state);
        if sup >= cfg.blowup_threshold {
            threshold_reached = true;
            break;
        }
        let remaining = cfg.t_end - t;
        if remaining <= 1e-14 * cfg.t_end {
            break;
        }
        let mut dt = cfg.dt0.min(remaining);
        if let Some(cfl) = cfg.growth_cfl {
            if sup > 0.0 {
                let rate = sup_norm(&model.rhs(&state)?) / sup;
                if rate > 0.0 {
                    dt = dt.min(cfl / rate);
                }
            }
        }
        let next = loop {
            match step(&model, cfg.integrator, &state, dt) {
                Ok(next) => break next,
                Err(Error::NonFinite(_)) => {
                    dt *= 0.5;
                    if dt < cfg.min_dt {
                        underflow = true;
                        break 'outer;
                    }
                }
                Err(e) => return Err(e),
            }
        };
        if dt < cfg.min_dt {
            underflow = true;
            break;
        }
        // Land exactly on t_end when the step was clipped to it.
        t = if dt == remaining { cfg.t_end } else { t + dt };
        state = next;
        steps += 1;
        series.push(sample(&model.space, t, &state))?;
        if cfg.output_every > 0 && steps.is_multiple_of(cfg.output_every) {
            snapshots.push(Snapshot { step: steps, t, state: state.clone() });
        }
    }
    if snapshots.last().map(|s| s.step) != Some(steps) {
        snapshots.push(Snapshot { step: steps, t, state: state.clone() });
    }

    let growing = {
        let s = series.samples();
        s.len() >= 2 && s[s.len() - 1].sup_norm > s[s.len() - 2].sup_norm
    };
    let report = if threshold_reached || (underflow && growing) {
        let mut r = fit_blowup(&series);
        r.threshold_reached = threshold_reached;
        if underflow {
            r.diagnostics = format!("step underflow below {:e}; {}", cfg.min_dt, r.diagnostics);
        }
        r
    } else {
        let why = if underflow { "step underflow without growth" } else { "reached t_end" };
        BlowupReport::not_detected(t, why)
    };
    Ok(SimulationOutput { series, snapshots, report, steps, final_t: t, final_state: state })
}

/// Least-squares line `y = intercept + slope x`, with `1 - R^2`.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let misfit = if syy > 0.0 { ss_res / syy } else { 0.0 };
    (intercept, slope, misfit)
}

/// Fits `|w|_inf ~ C / (T - t)^p` over the last decade of growth.
///
/// For each trial `p` the transformed norm `|w|^{-1/p}` is regressed linearly
/// on `t` (for `p = 1` this is the reciprocal-linear fit); the `p` with the
/// best linear fit fixes `T`. The exponent is then re-estimated from a
/// log-log fit against `T - t`.
pub fn fit_blowup(series: &TimeSeries) -> BlowupReport {
    let s: Vec<Sample> =
        series.samples().iter().copied().filter(|s| s.sup_norm.is_finite() && s.sup_norm > 0.0).collect();
    let last_t = series.samples().last().map_or(0.0, |s| s.t);
    if s.len() < 2 {
        return BlowupReport::not_detected(last_t, "fewer than two usable samples");
    }
    let first = s[0].sup_norm;
    let peak = s[s.len() - 1].sup_norm;
    // A relative slack keeps exactly one decade of growth from failing on rounding.
    let decade = 10.0 * (1.0 - 1e-9);
    if peak < decade * first {
        return BlowupReport::not_detected(
            last_t,
            format!("insufficient growth: final sup-norm {peak:.3e} below 10x initial {first:.3e}"),
        );
    }
    let start = s.iter().rposition(|x| x.sup_norm * 10.0 * (1.0 + 1e-9) < peak).map_or(0, |i| i + 1);
    let window = &s[start..];
    if window.len() < 10 {
        return BlowupReport::not_detected(
            last_t,
            format!("only {} samples in the last decade of growth (need 10)", window.len()),
        );
    }
    let t: Vec<f64> = window.iter().map(|x| x.t).collect();
    let sup: Vec<f64> = window.iter().map(|x| x.sup_norm).collect();
    let misfit = |log_p: f64| -> f64 {
        let p = log_p.exp();
        let y: Vec<f64> = sup.iter().map(|v| v.powf(-1.0 / p)).collect();
        let (_, slope, m) = line_fit(&t, &y);
        if slope < 0.0 {
            m
        } else {
            f64::INFINITY
        }
    };

    // Coarse scan over p in [0.1, 10], then golden-section refinement.
    let (lo, hi, count) = (0.1_f64.ln(), 10.0_f64.ln(), 200);
    let grid: Vec<f64> = (0..=count).map(|i| lo + (hi - lo) * i as f64 / count as f64).collect();
    let best = (0..grid.len()).min_by(|&a, &b| misfit(grid[a]).total_cmp(&misfit(grid[b]))).unwrap_or(0);
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(count)]);
    let g = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (misfit(c), misfit(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = misfit(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = misfit(d);
        }
    }
    let p = (0.5 * (a + b)).exp();
    let y: Vec<f64> = sup.iter().map(|v| v.powf(-1.0 / p)).collect();
    let (intercept, slope, _) = line_fit(&t, &y);
    let t_hat = -intercept / slope;
    if !(slope < 0.0) || !t_hat.is_finite() || t_hat <= last_t {
        return BlowupReport::not_detected(
            last_t,
            format!("fitted singular time {t_hat:.6} does not lie ahead of the data"),
        );
    }
    let lx: Vec<f64> = t.iter().map(|ti| (t_hat - ti).ln()).collect();
    let ly: Vec<f64> = sup.iter().map(|v| v.ln()).collect();
    let (log_c, neg_p, _) = line_fit(&lx, &ly);
    let exponent = -neg_p;
    let resid =
        (t.iter().zip(&sup).map(|(ti, v)| (log_c.exp() * (t_hat - ti).powf(-exponent) / v - 1.0).powi(2)).sum::<f64>()
            / t.len() as f64)
            .sqrt();
    BlowupReport {
        detected: true,
        threshold_reached: false,
        t_hat,
        exponent_hat: exponent,
        fit_residual: resid,
        last_t,
        window_samples: window.len(),
        diagnostics: format!("power-law fit over {} samples, transform exponent {p:.6}", window.len()),
    }
}
