//! Steady solutions of `(Z_11 + alpha Z_22) w . w = w` on `(0, pi)^2`.
//!
//! Given a vanishing set `E`, the solution is `w = 0` on `E` and
//! `L_alpha w = 1` off `E`, with `L_alpha = Z_11 + alpha Z_22`. The restricted
//! operator `P L_alpha P` (P: zero-extension from the complement of `E`) is
//! symmetric and coercive with constant `min(1, alpha)`, so it is inverted by
//! conjugate gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::geometry::RectangleDomain;
use crate::spectral::{SineField, SineTransform};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Node mask on the `n x n` rectangle grid; `true` marks nodes of `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct VanishingSet {
    n: usize,
    mask: Vec<bool>,
}

impl VanishingSet {
    pub fn new(n: usize, mask: Vec<bool>) -> Result<Self> {
        check_len(n * n, mask.len())?;
        if mask.iter().all(|m| *m) {
            return Err(Error::InvalidParameter("vanishing set covers the whole grid".into()));
        }
        Ok(Self { n, mask })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, mask: vec![false; n * n] }
    }

    /// Nodes with `x1 < pi / 2`.
    pub fn left_half(n: usize) -> Self {
        let x = RectangleDomain::nodes(n);
        let mask = (0..n * n).map(|idx| x[idx / n] < std::f64::consts::FRAC_PI_2).collect();
        Self { n, mask }
    }

    /// Each node joins `E` independently with probability `fraction`.
    pub fn random(n: usize, fraction: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = (0..n * n).map(|_| rng.gen::<f64>() < fraction).collect();
        Self::new(n, mask)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

#[derive(Debug, Clone)]
pub struct RestrictedProblem {
    pub alpha: f64,
    pub vanishing: VanishingSet,
    pub tol: f64,
    pub max_iter: usize,
}

impl RestrictedProblem {
    pub fn new(alpha: f64, vanishing: VanishingSet) -> Self {
        Self { alpha, vanishing, tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Multiplier of `L_alpha` on sine mode `k`.
#[inline]
pub fn l_multiplier(alpha: f64, k1: f64, k2: f64) -> f64 {
    (k1 * k1 + alpha * k2 * k2) / (k1 * k1 + k2 * k2)
}

/// `L_alpha = Z_11 + alpha Z_22` on the sine basis.
pub fn apply_l(alpha: f64, w: &SineField) -> Result<SineField> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    Ok(w.scaled(|k1, k2| l_multiplier(alpha, k1, k2)))
}

/// Residual report of a restricted solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub alpha: f64,
    pub n: usize,
    pub vanishing_nodes: usize,
    /// Discrete L2 norm of `L_alpha w - 1` off `E`, recomputed from the final iterate.
    pub off_residual: f64,
    /// Largest `|w|` on `E` (zero by construction).
    pub on_max_abs: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Recursive residual after each CG iteration.
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SteadySolution {
    /// Grid values, `n x n`.
    pub values: Vec<f64>,
    pub certificate: Certificate,
}

/// Applies `L_alpha` to grid values.
pub fn apply_l_grid(st: &SineTransform, alpha: f64, values: &[f64]) -> Result<Vec<f64>> {
    st.synthesize(&apply_l(alpha, &st.analyze(values)?)?)
}

/// Solves the restricted problem by CG on the complement of `E`. Hitting the
/// iteration cap is not an error: the best iterate is returned with
/// `converged = false` and its residual.
pub fn solve_restricted(p: &RestrictedProblem) -> Result<SteadySolution> {
    p.validate()?;
    let n = p.vanishing.n;
    let st = SineTransform::new(n)?;
    let free: Vec<usize> = (0..n * n).filter(|&i| !p.vanishing.mask[i]).collect();
    let weight = RectangleDomain::spacing(n).powi(2);
    let l2 = |v: &[f64]| (weight * v.iter().map(|x| x * x).sum::<f64>()).sqrt();

    let mut full = vec![0.0; n * n];
    let mut apply = |x: &[f64]| -> Result<Vec<f64>> {
        full.iter_mut().for_each(|v| *v = 0.0);
        for (&i, &xi) in free.iter().zip(x) {
            full[i] = xi;
        }
        let y = apply_l_grid(&st, p.alpha, &full)?;
        Ok(free.iter().map(|&i| y[i]).collect())
    };

    let b = vec![1.0; free.len()];
    let mut x = vec![0.0; free.len()];
    let mut r = b.clone();
    let mut d = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let mut history = Vec::new();
    let target = 0.1 * p.tol;
    let mut iterations = 0;
    while iterations < p.max_iter && l2(&r) > target {
        let ad = apply(&d)?;
        let dad: f64 = d.iter().zip(&ad).map(|(a, b)| a * b).sum();
        if !(dad > 0.0) {
            break;
        }
        let step = rr / dad;
        for k in 0..x.len() {
            x[k] += step * d[k];
            r[k] -= step * ad[k];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..d.len() {
            d[k] = r[k] + beta * d[k];
        }
        iterations += 1;
        history.push(l2(&r));
    }

    let mut values = vec![0.0; n * n];
    for (&i, &xi) in free.iter().zip(&x) {
        values[i] = xi;
    }
    let lw = apply_l_grid(&st, p.alpha, &values)?;
    let off: Vec<f64> = free.iter().map(|&i| lw[i] - 1.0).collect();
    let off_residual = l2(&off);
    let on_max_abs = (0..n * n).filter(|&i| p.vanishing.mask[i]).fold(0.0_f64, |m, i| m.max(values[i].abs()));
    Ok(SteadySolution {
        values,
        certificate: Certificate {
            alpha: p.alpha,
            n,
            vanishing_nodes: p.vanishing.count(),
            off_residual,
            on_max_abs,
            iterations,
            converged: off_residual <= p.tol,
            residual_history: history,
        },
    })
}

/// Random sine field on `n x n` modes. Half of the draws fill the whole
/// spectrum, the rest a random rectangular band, so that extreme multiplier
/// values are probed as well.
pub fn random_sine_field(rng: &mut impl Rng, n: usize) -> SineField {
    let mut f = SineField::zeros(n);
    let (k1_range, k2_range) = if rng.gen_bool(0.5) {
        ((1, n), (1, n))
    } else {
        let a1 = rng.gen_range(1..=n);
        let a2 = rng.gen_range(1..=n);
        ((a1, rng.gen_range(a1..=n)), (a2, rng.gen_range(a2..=n)))
    };
    for k1 in k1_range.0..=k1_range.1 {
        for k2 in k2_range.0..=k2_range.1 {
            f.set(k1, k2, rng.gen_range(-1.0..1.0));
        }
    }
    f
}

/// Smallest Rayleigh quotient `<L_alpha w, w> / |w|^2` over random trial
/// fields with `n x n` modes.
pub fn coercivity_check(alpha: f64, trials: usize, n: usize, seed: u64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_q = f64::INFINITY;
    for _ in 0..trials {
        let w = random_sine_field(&mut rng, n);
        let lw = apply_l(alpha, &w)?;
        let q = lw.inner(&w) / w.inner(&w);
        if q.is_finite() {
            min_q = min_q.min(q);
        }
    }
    Ok(min_q)
}
