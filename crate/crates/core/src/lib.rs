//! Numerical laboratory for nonlocal vorticity model equations: the
//! `Z_ij = d_i d_j Laplacian^{-1}` operators on rectangles, ellipses and
//! periodic boxes, the scalar and vector models built from them, time
//! integration with blow-up detection, and the restricted steady-state solver.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod geometry;
pub mod models;
pub mod spectral;
pub mod steady;

pub use diagnostics::{convergence_order, quadratic_form, FormReport};
pub use dynamics::{BlowupReport, Integrator, SimConfig, SimulationOutput, TimeSeries};
pub use error::{Error, Result};
pub use geometry::{EllipseDomain, EllipsoidForm, MaskedGrid, PeriodicBox, RectangleDomain};
pub use models::{ModelSpec, ModelVariant, Route, ScalarField, Space, VectorField};
pub use spectral::{FourierField, FourierTransform, SineField, SineTransform, ZIndex};
pub use steady::{Certificate, RestrictedProblem, VanishingSet};
