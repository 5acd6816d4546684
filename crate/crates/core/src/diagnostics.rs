//! Quadratic forms, norms, divergence residuals and convergence orders.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Route, ScalarField, Space, VectorField};
use crate::spectral::{apply_z_periodic, apply_z_sine, ZIndex};

/// `<Z w, w>` together with the route it was computed on and `|w|_{L2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormReport {
    pub value: f64,
    pub basis: Route,
    pub norm: f64,
}

impl FormReport {
    /// `value / norm^2`, zero for the zero field.
    pub fn rayleigh(&self) -> f64 {
        if self.norm == 0.0 {
            0.0
        } else {
            self.value / (self.norm * self.norm)
        }
    }
}

/// Discrete L2 norm with the space's quadrature weight.
pub fn l2_norm(space: &Space, values: &[f64]) -> f64 {
    (space.cell_volume() * values.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// `<Z_z w, w>`: Parseval on the sine and periodic routes, grid quadrature on
/// the bounded route and for the off-diagonal rectangle operator, whose image
/// leaves the sine basis.
pub fn quadratic_form(z: ZIndex, w: &ScalarField) -> Result<FormReport> {
    z.check_dim(w.space.dim())?;
    let basis = w.space.route();
    let (value, norm_sq) = match &w.space {
        Space::Rectangle(st) if z.is_diagonal() => {
            let s = st.analyze(&w.values)?;
            (apply_z_sine(z, &s)?.inner(&s), s.inner(&s))
        }
        Space::Torus(tf) => {
            let f = tf.forward(&w.values)?;
            (apply_z_periodic(z, &f)?.inner(&f), f.inner(&f))
        }
        space => {
            let zw = space.apply_z(z, &w.values)?;
            let dot: f64 = zw.iter().zip(&w.values).map(|(a, b)| a * b).sum();
            let norm = l2_norm(space, &w.values);
            (dot * space.cell_volume(), norm * norm)
        }
    };
    if !value.is_finite() {
        return Err(Error::NonFinite("quadratic form"));
    }
    Ok(FormReport { value, basis, norm: norm_sq.sqrt() })
}

/// Spectral RMS of `div u` on the torus.
pub fn divergence_rms(u: &VectorField) -> Result<f64> {
    let Space::Torus(tf) = &u.space else {
        return Err(Error::Unsupported("divergence residual needs a periodic box".into()));
    };
    let mut div: Option<crate::spectral::FourierField> = None;
    for (axis, c) in u.components.iter().enumerate() {
        let d = tf.forward(c)?.derivative(axis);
        div = Some(match div {
            Some(acc) => acc.add(&d),
            None => d,
        });
    }
    Ok(div.map(|d| d.rms()).unwrap_or(0.0))
}

/// Least-squares slope of `log e` against `log h`.
pub fn convergence_order(errors: &[(f64, f64)]) -> Result<f64> {
    if errors.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "convergence order needs at least 3 points, got {}",
            errors.len()
        )));
    }
    if errors.windows(2).any(|p| !(p[1].0 < p[0].0)) {
        return Err(Error::InvalidParameter("grid spacings must strictly decrease".into()));
    }
    if let Some(&(h, e)) = errors.iter().find(|(h, e)| !(*h > 0.0 && *e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter(format!("non-positive sample (h = {h}, e = {e})")));
    }
    let pts: Vec<(f64, f64)> = errors.iter().map(|(h, e)| (h.ln(), e.ln())).collect();
    Ok(least_squares_slope(&pts))
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
