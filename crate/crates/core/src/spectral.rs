//! Sine and Fourier transforms, the `Z_ij = d_i d_j Laplacian^{-1}` operators
//! as exact multipliers on those bases, the periodic Hilbert transform and
//! dealiased products.
//!
//! Conventions:
//! * Sine fields live on `(0, pi)^2` and are sampled at the interior nodes
//!   `x = j pi / (n + 1)`, `j = 1..=n`. A field is `sum lambda_k sin(k1 x1) sin(k2 x2)`.
//! * Fourier coefficients are normalized so that `u(x) = sum_k u_k e^{i k.x}`
//!   (forward transform divided by the point count). Grid data are row-major
//!   with the last axis fastest.
//! * On the torus `Z_ij` annihilates the zero mode (mean gauge). Odd
//!   multipliers (first derivatives, mixed `Z_ij`, Hilbert) vanish on
//!   Nyquist modes so that real fields stay real.
//! * Hilbert transform: multiplier `-i sgn(k)`, so `H(cos) = sin` and
//!   `H(sin) = -cos`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::geometry::PeriodicBox;

/// Pair `(i, j)` selecting `Z_ij`, with 1-based axis indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ZIndex {
    i: u8,
    j: u8,
}

impl ZIndex {
    pub const Z11: ZIndex = ZIndex { i: 1, j: 1 };
    pub const Z12: ZIndex = ZIndex { i: 1, j: 2 };
    pub const Z21: ZIndex = ZIndex { i: 2, j: 1 };
    pub const Z22: ZIndex = ZIndex { i: 2, j: 2 };

    pub fn new(i: usize, j: usize) -> Result<Self> {
        if !(1..=3).contains(&i) || !(1..=3).contains(&j) {
            return Err(Error::InvalidParameter(format!("Z index ({i}, {j}) out of range")));
        }
        Ok(Self { i: i as u8, j: j as u8 })
    }

    pub fn i(self) -> usize {
        self.i as usize
    }

    pub fn j(self) -> usize {
        self.j as usize
    }

    /// Zero-based axes.
    pub fn axes(self) -> (usize, usize) {
        (self.i as usize - 1, self.j as usize - 1)
    }

    pub fn is_diagonal(self) -> bool {
        self.i == self.j
    }

    pub fn transposed(self) -> Self {
        Self { i: self.j, j: self.i }
    }

    pub fn check_dim(self, dim: usize) -> Result<()> {
        if self.i() > dim || self.j() > dim {
            return Err(Error::InvalidParameter(format!("{self} needs dimension >= {}", self.i().max(self.j()))));
        }
        Ok(())
    }
}

impl fmt::Display for ZIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z{}{}", self.i, self.j)
    }
}

// ---------------------------------------------------------------------------
// Sine basis on the rectangle
// ---------------------------------------------------------------------------

/// Coefficients `lambda_k`, `k in 1..=n` per axis, stored at `(k1 - 1) * n + (k2 - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SineField {
    pub n: usize,
    pub coeffs: Vec<f64>,
}

impl SineField {
    pub fn zeros(n: usize) -> Self {
        Self { n, coeffs: vec![0.0; n * n] }
    }

    #[inline]
    pub fn get(&self, k1: usize, k2: usize) -> f64 {
        self.coeffs[(k1 - 1) * self.n + (k2 - 1)]
    }

    #[inline]
    pub fn set(&mut self, k1: usize, k2: usize, v: f64) {
        self.coeffs[(k1 - 1) * self.n + (k2 - 1)] = v;
    }

    /// Multiplies every coefficient by `m(k1, k2)`.
    pub fn scaled(&self, m: impl Fn(f64, f64) -> f64) -> SineField {
        let n = self.n;
        let coeffs =
            self.coeffs.iter().enumerate().map(|(idx, &c)| c * m((idx / n + 1) as f64, (idx % n + 1) as f64)).collect();
        SineField { n, coeffs }
    }

    /// `int_{(0,pi)^2} f g dx` via Parseval.
    pub fn inner(&self, other: &SineField) -> f64 {
        let s: f64 = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum();
        s * std::f64::consts::PI.powi(2) / 4.0
    }

    /// Zeroes modes above the two-thirds cutoff `k > 2n/3`.
    pub fn truncate_two_thirds(&mut self) {
        let n = self.n;
        let keep = |k: usize| 3 * k <= 2 * n;
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            if !keep(idx / n + 1) || !keep(idx % n + 1) {
                *c = 0.0;
            }
        }
    }
}

/// DST-I based transforms on the `n x n` interior grid of `(0, pi)^2`.
#[derive(Clone)]
pub struct SineTransform {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SineTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SineTransform").field("n", &self.n).finish()
    }
}

#[derive(Clone, Copy)]
enum Parity {
    Odd,
    Even,
}

impl SineTransform {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("sine grid needs n >= 2, got {n}")));
        }
        let fft = FftPlanner::new().plan_fft_forward(2 * (n + 1));
        Ok(Self { n, fft })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Samples `f(x1, x2)` on the interior grid.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let x = crate::geometry::RectangleDomain::nodes(self.n);
        let mut out = Vec::with_capacity(self.len());
        for &x1 in &x {
            for &x2 in &x {
                out.push(f(x1, x2));
            }
        }
        out
    }

    /// Unnormalized trigonometric sums along one line:
    /// odd: `out_j = sum_k v_k sin(pi j k / (n+1))`,
    /// even: `out_j = sum_k v_k cos(pi j k / (n+1))`, with `j, k = 1..=n`.
    fn line(&self, v: &mut [f64], parity: Parity, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        let n = self.n;
        let m = 2 * (n + 1);
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (j, &x) in v.iter().enumerate() {
            buf[j + 1] = Complex64::new(x, 0.0);
            buf[m - j - 1] = Complex64::new(
                match parity {
                    Parity::Odd => -x,
                    Parity::Even => x,
                },
                0.0,
            );
        }
        self.fft.process_with_scratch(buf, scratch);
        for (j, out) in v.iter_mut().enumerate() {
            *out = match parity {
                Parity::Odd => -0.5 * buf[j + 1].im,
                Parity::Even => 0.5 * buf[j + 1].re,
            };
        }
    }

    fn separable(&self, data: &mut [f64], p1: Parity, p2: Parity) {
        let n = self.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * (n + 1)];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for row in data.chunks_exact_mut(n) {
            self.line(row, p2, &mut buf, &mut scratch);
        }
        let mut col = vec![0.0; n];
        for i2 in 0..n {
            for i1 in 0..n {
                col[i1] = data[i1 * n + i2];
            }
            self.line(&mut col, p1, &mut buf, &mut scratch);
            for i1 in 0..n {
                data[i1 * n + i2] = col[i1];
            }
        }
    }

    /// Grid values to sine coefficients.
    pub fn analyze(&self, values: &[f64]) -> Result<SineField> {
        check_len(self.len(), values.len())?;
        let mut coeffs = values.to_vec();
        self.separable(&mut coeffs, Parity::Odd, Parity::Odd);
        let s = (2.0 / (self.n as f64 + 1.0)).powi(2);
        coeffs.iter_mut().for_each(|c| *c *= s);
        Ok(SineField { n: self.n, coeffs })
    }

    /// Sine coefficients to grid values.
    pub fn synthesize(&self, field: &SineField) -> Result<Vec<f64>> {
        check_len(self.n, field.n)?;
        let mut v = field.coeffs.clone();
        self.separable(&mut v, Parity::Odd, Parity::Odd);
        Ok(v)
    }

    /// Evaluates `sum c_k cos(k1 x1) cos(k2 x2)` (`k` from 1) on the grid.
    pub fn synthesize_cosine(&self, field: &SineField) -> Result<Vec<f64>> {
        check_len(self.n, field.n)?;
        let mut v = field.coeffs.clone();
        self.separable(&mut v, Parity::Even, Parity::Even);
        Ok(v)
    }

    /// Dirichlet `Z_12 w = d_12 Laplacian^{-1} w` evaluated on the grid. The
    /// mixed derivative maps sines to cosines, so the result is returned in
    /// grid space.
    pub fn dirichlet_z12_grid(&self, w: &SineField) -> Result<Vec<f64>> {
        // Laplacian^{-1}: -lambda/|k|^2; d_12 turns sin sin into k1 k2 cos cos.
        let c = w.scaled(|k1, k2| -k1 * k2 / (k1 * k1 + k2 * k2));
        self.synthesize_cosine(&c)
    }

    /// Grid product with both inputs truncated to two thirds of the sine
    /// spectrum. The product of two sine series leaves the sine basis, so it
    /// is returned in grid space without output truncation.
    pub fn dealiased_product(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let f = self.truncated(f)?;
        let g = self.truncated(g)?;
        Ok(f.iter().zip(&g).map(|(a, b)| a * b).collect())
    }

    fn truncated(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut s = self.analyze(v)?;
        s.truncate_two_thirds();
        self.synthesize(&s)
    }
}

/// Multiplier of `Z_ii` on sine mode `(k1, k2)`.
#[inline]
pub fn sine_z_multiplier(axis: usize, k1: f64, k2: f64) -> f64 {
    let k = if axis == 0 { k1 } else { k2 };
    k * k / (k1 * k1 + k2 * k2)
}

/// `Z_ii` on the sine basis: coefficient-wise `k_i^2 / |k|^2`. Only the
/// diagonal operators preserve the basis.
pub fn apply_z_sine(z: ZIndex, w: &SineField) -> Result<SineField> {
    if !z.is_diagonal() || z.i() > 2 {
        return Err(Error::UnsupportedBasis(z.to_string()));
    }
    let axis = z.i() - 1;
    Ok(w.scaled(|k1, k2| sine_z_multiplier(axis, k1, k2)))
}

// ---------------------------------------------------------------------------
// Fourier basis on the torus
// ---------------------------------------------------------------------------

/// Complex Fourier coefficients of a real field on a periodic box.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    pub bx: PeriodicBox,
    pub coeffs: Vec<Complex64>,
}

impl FourierField {
    /// Signed mode number of index `m` (`n/2` maps to `-n/2`).
    #[inline]
    pub fn signed(n: usize, m: usize) -> isize {
        if m < n / 2 {
            m as isize
        } else {
            m as isize - n as isize
        }
    }

    /// Signed mode numbers of a flat coefficient index.
    #[inline]
    pub fn modes(&self, idx: usize) -> [isize; 3] {
        let n = self.bx.n;
        let mut out = [0; 3];
        let mut rem = idx;
        for axis in (0..self.bx.dim).rev() {
            out[axis] = Self::signed(n, rem % n);
            rem /= n;
        }
        out
    }

    /// Wavevector of a flat coefficient index, plus whether any component
    /// sits on the Nyquist frequency.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> ([f64; 3], [bool; 3]) {
        let m = self.modes(idx);
        let n = self.bx.n as isize;
        let mut k = [0.0; 3];
        let mut nyq = [false; 3];
        for axis in 0..self.bx.dim {
            k[axis] = 2.0 * std::f64::consts::PI / self.bx.lengths[axis] * m[axis] as f64;
            nyq[axis] = m[axis] == -n / 2;
        }
        (k, nyq)
    }

    /// Applies a Fourier multiplier `m(k, nyquist_flags)`.
    pub fn map(&self, m: impl Fn([f64; 3], [bool; 3]) -> Complex64) -> FourierField {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| {
                let (k, nyq) = self.wavevector(idx);
                c * m(k, nyq)
            })
            .collect();
        FourierField { bx: self.bx, coeffs }
    }

    /// Mean value (zero mode).
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// `int u v dx` over the box via Parseval.
    pub fn inner(&self, other: &FourierField) -> f64 {
        let s: f64 = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a * b.conj()).re).sum();
        s * self.bx.volume()
    }

    /// Root-mean-square of the represented field.
    pub fn rms(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Zeroes every mode with `3 |m| >= n` on some axis.
    pub fn truncate_two_thirds(&mut self) {
        let n = self.bx.n as isize;
        for idx in 0..self.coeffs.len() {
            let m = self.modes(idx);
            if m[..self.bx.dim].iter().any(|&mi| 3 * mi.abs() >= n) {
                self.coeffs[idx] = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// `d/dx_axis`.
    pub fn derivative(&self, axis: usize) -> FourierField {
        self.map(|k, nyq| if nyq[axis] { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, k[axis]) })
    }

    pub fn laplacian(&self) -> FourierField {
        self.map(|k, _| Complex64::new(-(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]), 0.0))
    }

    /// `Laplacian^{-1}` with the zero mode sent to zero.
    pub fn inverse_laplacian(&self) -> FourierField {
        self.map(|k, _| {
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(-1.0 / k2, 0.0)
            }
        })
    }

    pub fn add(&self, other: &FourierField) -> FourierField {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        FourierField { bx: self.bx, coeffs }
    }

    pub fn sub(&self, other: &FourierField) -> FourierField {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        FourierField { bx: self.bx, coeffs }
    }

    pub fn scale(&self, s: f64) -> FourierField {
        FourierField { bx: self.bx, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }
}

/// Multiplier of `Z_ij` at wavevector `k` on the torus.
#[inline]
pub fn periodic_z_multiplier(z: ZIndex, k: [f64; 3], nyq: [bool; 3]) -> f64 {
    let (i, j) = z.axes();
    let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
    if k2 == 0.0 || (i != j && (nyq[i] || nyq[j])) {
        0.0
    } else {
        k[i] * k[j] / k2
    }
}

/// `Z_ij` on the torus: `u_k -> (k_i k_j / |k|^2) u_k`, zero mode to zero.
pub fn apply_z_periodic(z: ZIndex, w: &FourierField) -> Result<FourierField> {
    z.check_dim(w.bx.dim)?;
    Ok(w.map(|k, nyq| Complex64::new(periodic_z_multiplier(z, k, nyq), 0.0)))
}

/// Hilbert transform on the 1D torus, multiplier `-i sgn(k)`.
pub fn hilbert_1d(theta: &FourierField) -> Result<FourierField> {
    if theta.bx.dim != 1 {
        return Err(Error::Unsupported(format!("Hilbert transform needs a 1D field, got dimension {}", theta.bx.dim)));
    }
    Ok(theta.map(
        |k, nyq| {
            if nyq[0] || k[0] == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -k[0].signum())
            }
        },
    ))
}

/// Multi-dimensional complex FFT on a periodic box.
#[derive(Clone)]
pub struct FourierTransform {
    bx: PeriodicBox,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FourierTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierTransform").field("bx", &self.bx).finish()
    }
}

impl FourierTransform {
    pub fn new(bx: PeriodicBox) -> Self {
        let mut planner = FftPlanner::new();
        Self { bx, forward: planner.plan_fft_forward(bx.n), inverse: planner.plan_fft_inverse(bx.n) }
    }

    pub fn periodic_box(&self) -> &PeriodicBox {
        &self.bx
    }

    fn transform(&self, data: &mut [Complex64], fft: &dyn Fft<f64>) {
        let n = self.bx.n;
        let dim = self.bx.dim;
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        // Last axis is contiguous: one batched call.
        fft.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..dim.saturating_sub(1) {
            let stride = n.pow((dim - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (m, c) in line.iter_mut().enumerate() {
                        *c = data[start + m * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (m, c) in line.iter().enumerate() {
                        data[start + m * stride] = *c;
                    }
                }
            }
        }
    }

    pub fn forward(&self, values: &[f64]) -> Result<FourierField> {
        check_len(self.bx.len(), values.len())?;
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, self.forward.as_ref());
        let s = 1.0 / values.len() as f64;
        data.iter_mut().for_each(|c| *c *= s);
        Ok(FourierField { bx: self.bx, coeffs: data })
    }

    /// Real part of the synthesized field.
    pub fn inverse(&self, field: &FourierField) -> Result<Vec<f64>> {
        check_len(self.bx.len(), field.coeffs.len())?;
        let mut data = field.coeffs.clone();
        self.transform(&mut data, self.inverse.as_ref());
        Ok(data.into_iter().map(|c| c.re).collect())
    }

    /// Product of two spectral fields with two-thirds truncation on both
    /// inputs and on the result.
    pub fn dealiased_product_spectral(&self, f: &FourierField, g: &FourierField) -> Result<FourierField> {
        check_len(self.bx.len(), f.coeffs.len())?;
        check_len(self.bx.len(), g.coeffs.len())?;
        let mut f = f.clone();
        let mut g = g.clone();
        f.truncate_two_thirds();
        g.truncate_two_thirds();
        let fv = self.inverse(&f)?;
        let gv = self.inverse(&g)?;
        let prod: Vec<f64> = fv.iter().zip(&gv).map(|(a, b)| a * b).collect();
        let mut p = self.forward(&prod)?;
        p.truncate_two_thirds();
        Ok(p)
    }

    /// Grid-space version of [`Self::dealiased_product_spectral`].
    pub fn dealiased_product(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let p = self.dealiased_product_spectral(&self.forward(f)?, &self.forward(g)?)?;
        self.inverse(&p)
    }
}
