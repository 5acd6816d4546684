//! Right-hand sides of the model equations, Biot-Savart reconstruction and
//! the algebraic skew-symmetry residual.
//!
//! Velocity convention: `u = -curl Laplacian^{-1} w`, i.e. `u = curl (-Laplacian)^{-1} w`,
//! so that `curl u = w` for divergence-free `w`. In two dimensions this is
//! `u = (-d_2 Laplacian^{-1} w, d_1 Laplacian^{-1} w)`. The velocity gradient is
//! stored as `(grad u)_{mi} = d_m u_i = -eps_{ijl} Z_{jm} w_l` and the
//! stretching term is `((grad u) w)_m = sum_i (grad u)_{mi} w_i`.
//!
//! On the torus the zero mode is a gauge: `Z_ij`, `H` and `Laplacian^{-1}`
//! annihilate it, while the evolving field keeps its mean.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elliptic::EllipticSolver;
use crate::error::{check_len, Error, Result};
use crate::geometry::{build_masked_grid, EllipseDomain, EllipsoidForm, PeriodicBox};
use crate::spectral::{apply_z_periodic, hilbert_1d, FourierField, FourierTransform, SineTransform, ZIndex};

/// Relative tolerance on the mean of a field handed to Biot-Savart.
pub const GAUGE_TOL: f64 = 1e-10;

/// A discretized domain together with its transform or solver.
#[derive(Debug, Clone)]
pub enum Space {
    /// `(0, pi)^2`, sine basis on the interior grid.
    Rectangle(Arc<SineTransform>),
    /// Ellipse, Shortley-Weller grid.
    Ellipse(Arc<EllipticSolver>),
    /// Periodic box in one to three dimensions.
    Torus(Arc<FourierTransform>),
}

impl Space {
    pub fn rectangle(n: usize) -> Result<Self> {
        Ok(Space::Rectangle(Arc::new(SineTransform::new(n)?)))
    }

    pub fn ellipse(domain: EllipseDomain, n: usize) -> Result<Self> {
        let grid = Arc::new(build_masked_grid(domain, n)?);
        Ok(Space::Ellipse(Arc::new(EllipticSolver::new(grid))))
    }

    pub fn torus(bx: PeriodicBox) -> Self {
        Space::Torus(Arc::new(FourierTransform::new(bx)))
    }

    /// Number of stored values per component.
    pub fn len(&self) -> usize {
        match self {
            Space::Rectangle(st) => st.len(),
            Space::Ellipse(s) => s.grid().interior_count(),
            Space::Torus(tf) => tf.periodic_box().len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spatial dimension.
    pub fn dim(&self) -> usize {
        match self {
            Space::Rectangle(_) | Space::Ellipse(_) => 2,
            Space::Torus(tf) => tf.periodic_box().dim,
        }
    }

    /// Quadrature weight of each stored value (uniform on every route).
    pub fn cell_volume(&self) -> f64 {
        match self {
            Space::Rectangle(st) => crate::geometry::RectangleDomain::spacing(st.n()).powi(2),
            Space::Ellipse(s) => s.grid().spacing.powi(2),
            Space::Torus(tf) => {
                let bx = tf.periodic_box();
                bx.volume() / bx.len() as f64
            }
        }
    }

    /// Samples `f` at the stored points; unused coordinates are zero.
    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        match self {
            Space::Rectangle(st) => st.sample(|x1, x2| f([x1, x2, 0.0])),
            Space::Ellipse(s) => s.grid().sample(|x1, x2| f([x1, x2, 0.0])),
            Space::Torus(tf) => tf.periodic_box().sample(f),
        }
    }

    pub fn route(&self) -> Route {
        match self {
            Space::Rectangle(_) => Route::Sine,
            Space::Ellipse(_) => Route::Bounded,
            Space::Torus(_) => Route::Periodic,
        }
    }

    fn torus_transform(&self, what: &str) -> Result<&FourierTransform> {
        match self {
            Space::Torus(tf) => Ok(tf),
            _ => Err(Error::Unsupported(format!("{what} needs a periodic box"))),
        }
    }

    /// `Z_ij` applied to grid values along this space's route.
    pub fn apply_z(&self, z: ZIndex, values: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), values.len())?;
        match self {
            Space::Rectangle(st) => {
                z.check_dim(2)?;
                let s = st.analyze(values)?;
                if z.is_diagonal() {
                    st.synthesize(&crate::spectral::apply_z_sine(z, &s)?)
                } else {
                    st.dirichlet_z12_grid(&s)
                }
            }
            Space::Ellipse(solver) => solver.apply_z_near_floor(z, values),
            Space::Torus(tf) => tf.inverse(&apply_z_periodic(z, &tf.forward(values)?)?),
        }
    }

    /// Pointwise product, dealiased on spectral routes when requested.
    pub fn product(&self, f: &[f64], g: &[f64], dealias: bool) -> Result<Vec<f64>> {
        check_len(self.len(), f.len())?;
        check_len(self.len(), g.len())?;
        match self {
            Space::Rectangle(st) if dealias => st.dealiased_product(f, g),
            Space::Torus(tf) if dealias => tf.dealiased_product(f, g),
            _ => Ok(f.iter().zip(g).map(|(a, b)| a * b).collect()),
        }
    }
}

/// Which discretization route an operator took.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Sine,
    Periodic,
    Bounded,
}

/// A scalar field sampled on a [`Space`].
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub space: Space,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(space: Space, values: Vec<f64>) -> Result<Self> {
        check_len(space.len(), values.len())?;
        Ok(Self { space, values })
    }

    pub fn from_fn(space: Space, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = space.sample(f);
        Self { space, values }
    }

    pub fn constant(space: Space, c: f64) -> Self {
        let values = vec![c; space.len()];
        Self { space, values }
    }
}

/// Two or three components on a shared [`Space`].
#[derive(Debug, Clone)]
pub struct VectorField {
    pub space: Space,
    pub components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(space: Space, components: Vec<Vec<f64>>) -> Result<Self> {
        if !(2..=3).contains(&components.len()) {
            return Err(Error::InvalidParameter(format!(
                "vector field needs 2 or 3 components, got {}",
                components.len()
            )));
        }
        for c in &components {
            check_len(space.len(), c.len())?;
        }
        Ok(Self { space, components })
    }

    pub fn component(&self, i: usize) -> ScalarField {
        ScalarField { space: self.space.clone(), values: self.components[i].clone() }
    }
}

/// Which equation to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    /// `w_t = (Z_11 w) w` in 2D.
    Model1,
    /// `w_t = (Z_12 w) w` in 2D.
    Model1Prime,
    /// The symmetric 2x2 system built from `w_1` and `Z_11 w_1`.
    System32,
    /// `w_t = (grad u) w` on the 3D torus.
    ZeroOrder3D,
    /// `w_t = [nu] Laplacian w - [c] u.grad w + [s] (Z_11 w) w` on the 2D torus.
    Perturbed { convection: bool, diffusion: bool, zero_order: bool },
    /// `theta_t = H(theta) theta` on the 1D torus.
    Clm1D,
}

impl ModelVariant {
    pub fn perturbed(convection: bool, diffusion: bool) -> Self {
        ModelVariant::Perturbed { convection, diffusion, zero_order: true }
    }

    pub fn components(&self) -> usize {
        match self {
            ModelVariant::System32 => 2,
            ModelVariant::ZeroOrder3D => 3,
            _ => 1,
        }
    }
}

/// A model variant bound to a compatible space.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub variant: ModelVariant,
    pub space: Space,
    pub dealias: bool,
}

impl ModelSpec {
    pub fn new(variant: ModelVariant, space: Space) -> Result<Self> {
        let ok = match (&variant, &space) {
            (ModelVariant::Model1 | ModelVariant::Model1Prime, Space::Torus(tf)) => tf.periodic_box().dim == 2,
            (ModelVariant::Model1 | ModelVariant::Model1Prime, _) => true,
            (ModelVariant::System32, Space::Rectangle(_) | Space::Ellipse(_)) => true,
            (ModelVariant::ZeroOrder3D, Space::Torus(tf)) => tf.periodic_box().dim == 3,
            (ModelVariant::Perturbed { .. }, Space::Torus(tf)) => tf.periodic_box().dim == 2,
            (ModelVariant::Clm1D, Space::Torus(tf)) => tf.periodic_box().dim == 1,
            _ => false,
        };
        if !ok {
            return Err(Error::Unsupported(format!(
                "model {variant:?} is not defined on a {:?} space of dimension {}",
                space.route(),
                space.dim()
            )));
        }
        Ok(Self { variant, space, dealias: true })
    }

    pub fn with_dealias(mut self, dealias: bool) -> Self {
        self.dealias = dealias;
        self
    }

    pub fn components(&self) -> usize {
        self.variant.components()
    }

    /// Whether the model carries the `Laplacian w` term.
    pub fn is_diffusive(&self) -> bool {
        matches!(self.variant, ModelVariant::Perturbed { diffusion: true, .. })
    }

    fn check_state(&self, state: &[Vec<f64>]) -> Result<()> {
        check_len(self.components(), state.len())?;
        for c in state {
            check_len(self.space.len(), c.len())?;
        }
        Ok(())
    }

    /// Full right-hand side.
    pub fn rhs(&self, state: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.evaluate(state, true)
    }

    /// Right-hand side without the diffusion term (the part an
    /// integrating-factor scheme treats explicitly).
    pub fn nonlinear_rhs(&self, state: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.evaluate(state, false)
    }

    fn evaluate(&self, state: &[Vec<f64>], with_diffusion: bool) -> Result<Vec<Vec<f64>>> {
        self.check_state(state)?;
        let sp = &self.space;
        match self.variant {
            ModelVariant::Model1 => Ok(vec![zero_order_2d(sp, ZIndex::Z11, &state[0], self.dealias)?]),
            ModelVariant::Model1Prime => Ok(vec![zero_order_2d(sp, ZIndex::Z12, &state[0], self.dealias)?]),
            ModelVariant::System32 => system32(sp, &state[0], &state[1], self.dealias),
            ModelVariant::ZeroOrder3D => {
                let tf = sp.torus_transform("zero-order 3D model")?;
                zero_order_3d(tf, state, self.dealias)
            }
            ModelVariant::Perturbed { convection, diffusion, zero_order } => {
                let tf = sp.torus_transform("perturbed model")?;
                let flags = PerturbationFlags { convection, diffusion: diffusion && with_diffusion, zero_order };
                Ok(vec![perturbed(tf, flags, &state[0], self.dealias)?])
            }
            ModelVariant::Clm1D => {
                let tf = sp.torus_transform("CLM model")?;
                Ok(vec![clm(tf, &state[0], self.dealias)?])
            }
        }
    }
}

fn zero_order_2d(space: &Space, z: ZIndex, w: &[f64], dealias: bool) -> Result<Vec<f64>> {
    let zw = space.apply_z(z, w)?;
    space.product(&zw, w, dealias)
}

/// `(Z_z w) w` on the field's space: dealiased on spectral routes, pointwise
/// on the ellipse.
pub fn rhs_zero_order_2d(z: ZIndex, w: &ScalarField) -> Result<ScalarField> {
    if w.space.dim() != 2 {
        return Err(Error::Unsupported("two-dimensional zero-order model needs a 2D space".into()));
    }
    let values = zero_order_2d(&w.space, z, &w.values, true)?;
    ScalarField::new(w.space.clone(), values)
}

fn system32(space: &Space, w1: &[f64], w2: &[f64], dealias: bool) -> Result<Vec<Vec<f64>>> {
    let z = space.apply_z(ZIndex::Z11, w1)?;
    let diag: Vec<f64> = w1.iter().zip(&z).map(|(a, b)| a + b).collect();
    let half: Vec<f64> = w1.iter().map(|a| 0.5 * a).collect();
    let d1 = space.product(&diag, w1, dealias)?;
    let o1 = space.product(&half, w2, dealias)?;
    let o2 = space.product(&half, w1, dealias)?;
    let d2 = space.product(&diag, w2, dealias)?;
    Ok(vec![d1.iter().zip(&o1).map(|(a, b)| a + b).collect(), o2.iter().zip(&d2).map(|(a, b)| a + b).collect()])
}

/// `M(w_1) w` with the symmetric matrix `[[w_1 + Z_11 w_1, w_1/2], [w_1/2, w_1 + Z_11 w_1]]`.
pub fn rhs_system32(w: &VectorField) -> Result<VectorField> {
    check_len(2, w.components.len())?;
    let out = system32(&w.space, &w.components[0], &w.components[1], true)?;
    VectorField::new(w.space.clone(), out)
}

fn check_gauge(field: &FourierField) -> Result<()> {
    let mean = field.mean();
    let tol = GAUGE_TOL * field.rms().max(1.0);
    if mean.abs() > tol {
        return Err(Error::Gauge { mean, tol });
    }
    Ok(())
}

/// 2D velocity `(-d_2 psi, d_1 psi)`, `psi = Laplacian^{-1} w`, spectrally.
fn velocity_2d_spectral(w_hat: &FourierField) -> [FourierField; 2] {
    let psi = w_hat.inverse_laplacian();
    [psi.derivative(1).scale(-1.0), psi.derivative(0)]
}

/// Biot-Savart velocity on the 2D torus. Rejects fields whose mean exceeds
/// the gauge tolerance.
pub fn biot_savart_2d(w: &ScalarField) -> Result<VectorField> {
    let tf = w.space.torus_transform("Biot-Savart")?;
    if tf.periodic_box().dim != 2 {
        return Err(Error::Unsupported("2D Biot-Savart needs a 2D box".into()));
    }
    let w_hat = tf.forward(&w.values)?;
    check_gauge(&w_hat)?;
    let [u1, u2] = velocity_2d_spectral(&w_hat);
    VectorField::new(w.space.clone(), vec![tf.inverse(&u1)?, tf.inverse(&u2)?])
}

/// Toggles for the perturbed scalar models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationFlags {
    pub convection: bool,
    pub diffusion: bool,
    /// The `(Z_11 w) w` term; always on in the model equations.
    pub zero_order: bool,
}

fn perturbed(tf: &FourierTransform, flags: PerturbationFlags, w: &[f64], dealias: bool) -> Result<Vec<f64>> {
    let w_hat = tf.forward(w)?;
    let bx = *tf.periodic_box();
    let mut acc = FourierField { bx, coeffs: vec![Complex64::new(0.0, 0.0); bx.len()] };
    let product = |f: &FourierField, g: &FourierField| -> Result<FourierField> {
        if dealias {
            tf.dealiased_product_spectral(f, g)
        } else {
            let fv = tf.inverse(f)?;
            let gv = tf.inverse(g)?;
            tf.forward(&fv.iter().zip(&gv).map(|(a, b)| a * b).collect::<Vec<_>>())
        }
    };
    if flags.diffusion {
        acc = acc.add(&w_hat.laplacian());
    }
    if flags.convection {
        let [u1, u2] = velocity_2d_spectral(&w_hat);
        let adv = product(&u1, &w_hat.derivative(0))?.add(&product(&u2, &w_hat.derivative(1))?);
        acc = acc.sub(&adv);
    }
    if flags.zero_order {
        acc = acc.add(&product(&apply_z_periodic(ZIndex::Z11, &w_hat)?, &w_hat)?);
    }
    tf.inverse(&acc)
}

/// `[diffusion] Laplacian w - [convection] u.grad w + (Z_11 w) w` on the 2D
/// torus, with `u` from [`biot_savart_2d`] applied to the zero-mean part.
/// With neither linear term enabled this is [`rhs_zero_order_2d`].
pub fn rhs_perturbed(flags: PerturbationFlags, w: &ScalarField) -> Result<ScalarField> {
    let tf = w.space.torus_transform("perturbed model")?;
    if tf.periodic_box().dim != 2 {
        return Err(Error::Unsupported("perturbed models need a 2D box".into()));
    }
    if !flags.convection && !flags.diffusion && flags.zero_order {
        return rhs_zero_order_2d(ZIndex::Z11, w);
    }
    let values = perturbed(tf, flags, &w.values, true)?;
    ScalarField::new(w.space.clone(), values)
}

/// `(grad u)_{mi} = d_m u_i` on the 3D torus; `entries[m][i]`.
#[derive(Debug, Clone)]
pub struct VelocityGradient {
    pub entries: [[Vec<f64>; 3]; 3],
}

impl VelocityGradient {
    pub fn trace(&self) -> Vec<f64> {
        (0..self.entries[0][0].len())
            .map(|p| self.entries[0][0][p] + self.entries[1][1][p] + self.entries[2][2][p])
            .collect()
    }
}

fn zw(tf_hat: &[FourierField; 3], j: usize, m: usize, l: usize) -> Result<FourierField> {
    apply_z_periodic(ZIndex::new(j, m)?, &tf_hat[l - 1])
}

/// Spectral entries of `grad u`, assembled row by row from `Z_jm w_l`:
/// column 1 is `Z_3m w_2 - Z_2m w_3`, column 2 `Z_1m w_3 - Z_3m w_1`,
/// column 3 `Z_2m w_1 - Z_1m w_2`.
fn grad_u_spectral(w_hat: &[FourierField; 3]) -> Result<[[FourierField; 3]; 3]> {
    let row = |m: usize| -> Result<[FourierField; 3]> {
        Ok([
            zw(w_hat, 3, m, 2)?.sub(&zw(w_hat, 2, m, 3)?),
            zw(w_hat, 1, m, 3)?.sub(&zw(w_hat, 3, m, 1)?),
            zw(w_hat, 2, m, 1)?.sub(&zw(w_hat, 1, m, 2)?),
        ])
    };
    Ok([row(1)?, row(2)?, row(3)?])
}

fn forward3(tf: &FourierTransform, w: &[Vec<f64>]) -> Result<[FourierField; 3]> {
    check_len(3, w.len())?;
    Ok([tf.forward(&w[0])?, tf.forward(&w[1])?, tf.forward(&w[2])?])
}

fn torus3(space: &Space) -> Result<&FourierTransform> {
    let tf = space.torus_transform("3D velocity reconstruction")?;
    if tf.periodic_box().dim != 3 {
        return Err(Error::Unsupported("3D velocity reconstruction needs a 3D box".into()));
    }
    Ok(tf)
}

/// Velocity gradient of `u = -curl Laplacian^{-1} w` from the `Z_jm` operators.
pub fn grad_u_3d(w: &VectorField) -> Result<VelocityGradient> {
    let tf = torus3(&w.space)?;
    let g = grad_u_spectral(&forward3(tf, &w.components)?)?;
    let inv = |f: &FourierField| tf.inverse(f);
    Ok(VelocityGradient {
        entries: [
            [inv(&g[0][0])?, inv(&g[0][1])?, inv(&g[0][2])?],
            [inv(&g[1][0])?, inv(&g[1][1])?, inv(&g[1][2])?],
            [inv(&g[2][0])?, inv(&g[2][1])?, inv(&g[2][2])?],
        ],
    })
}

fn zero_order_3d(tf: &FourierTransform, w: &[Vec<f64>], dealias: bool) -> Result<Vec<Vec<f64>>> {
    let w_hat = forward3(tf, w)?;
    let g = grad_u_spectral(&w_hat)?;
    let mut out = Vec::with_capacity(3);
    for row in &g {
        if dealias {
            let mut acc = tf.dealiased_product_spectral(&row[0], &w_hat[0])?;
            for i in 1..3 {
                acc = acc.add(&tf.dealiased_product_spectral(&row[i], &w_hat[i])?);
            }
            out.push(tf.inverse(&acc)?);
        } else {
            let mut acc = vec![0.0; w[0].len()];
            for i in 0..3 {
                let gi = tf.inverse(&row[i])?;
                acc.iter_mut().zip(gi.iter().zip(&w[i])).for_each(|(a, (g, wi))| *a += g * wi);
            }
            out.push(acc);
        }
    }
    Ok(out)
}

/// Stretching term `(grad u) w` on the 3D torus, dealiased.
pub fn rhs_zero_order_3d(w: &VectorField) -> Result<VectorField> {
    let tf = torus3(&w.space)?;
    let out = zero_order_3d(tf, &w.components, true)?;
    VectorField::new(w.space.clone(), out)
}

/// Velocity and consistency residuals from a 3D vorticity.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub u: VectorField,
    /// RMS of `div u`.
    pub div_norm: f64,
    /// RMS of `curl u - w`; zero exactly when `w` is divergence-free and zero-mean.
    pub curl_mismatch: f64,
}

/// `u = -curl Laplacian^{-1} w` on the 3D torus, with its divergence and the
/// curl mismatch measured spectrally. A mismatch is reported, never an error.
pub fn velocity_from_vorticity_3d(w: &VectorField) -> Result<Reconstruction> {
    let tf = torus3(&w.space)?;
    let w_hat = forward3(tf, &w.components)?;
    let psi: Vec<FourierField> = w_hat.iter().map(|f| f.inverse_laplacian().scale(-1.0)).collect();
    // u = curl psi with psi = -Laplacian^{-1} w.
    let curl = |v: &[FourierField]| -> [FourierField; 3] {
        [
            v[2].derivative(1).sub(&v[1].derivative(2)),
            v[0].derivative(2).sub(&v[2].derivative(0)),
            v[1].derivative(0).sub(&v[0].derivative(1)),
        ]
    };
    let u_hat = curl(&psi);
    let div = u_hat[0].derivative(0).add(&u_hat[1].derivative(1)).add(&u_hat[2].derivative(2));
    let cu = curl(&u_hat);
    let mismatch: f64 = (0..3).map(|i| cu[i].sub(&w_hat[i]).rms().powi(2)).sum::<f64>().sqrt();
    let u = VectorField::new(
        w.space.clone(),
        vec![tf.inverse(&u_hat[0])?, tf.inverse(&u_hat[1])?, tf.inverse(&u_hat[2])?],
    )?;
    Ok(Reconstruction { u, div_norm: div.rms(), curl_mismatch: mismatch })
}

/// Levi-Civita symbol on zero-based indices.
#[inline]
pub fn levi_civita(i: usize, j: usize, l: usize) -> f64 {
    match (i, j, l) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// `eps_{ijl} a_{jm} c_l c_i` for `m = 1, 2, 3`: the stretching term at a
/// constant vorticity `c` on the ellipsoid `{x^T A x < 1}`, where
/// `Z_jm c = a_jm c`. Antisymmetry in `(i, l)` makes it vanish.
pub fn skew_symmetry_residual(form: &EllipsoidForm, c: [f64; 3]) -> [f64; 3] {
    let a = form.matrix();
    let mut out = [0.0; 3];
    for (m, slot) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    s += levi_civita(i, j, l) * a[j][m] * c[l] * c[i];
                }
            }
        }
        *slot = s;
    }
    out
}

fn clm(tf: &FourierTransform, theta: &[f64], dealias: bool) -> Result<Vec<f64>> {
    let t_hat = tf.forward(theta)?;
    let h = hilbert_1d(&t_hat)?;
    if dealias {
        tf.inverse(&tf.dealiased_product_spectral(&h, &t_hat)?)
    } else {
        let hv = tf.inverse(&h)?;
        Ok(hv.iter().zip(theta).map(|(a, b)| a * b).collect())
    }
}

/// `H(theta) theta` on the 1D torus.
pub fn rhs_clm(theta: &ScalarField) -> Result<ScalarField> {
    let tf = theta.space.torus_transform("CLM model")?;
    let values = clm(tf, &theta.values, true)?;
    ScalarField::new(theta.space.clone(), values)
}
