//! Shared fixtures for the criterion benchmarks.

use clmlab_core::geometry::{EllipseDomain, PeriodicBox};
use clmlab_core::models::Space;

/// A smooth, non-symmetric test field on any space.
pub fn smooth_field(space: &Space) -> Vec<f64> {
    space.sample(|x| 1.0 + 0.5 * (x[0] + 2.0 * x[1]).sin() + 0.25 * (3.0 * x[0]).cos() * x[1].cos() + 0.1 * x[2].sin())
}

pub fn torus2(n: usize) -> Space {
    Space::torus(PeriodicBox::new(2, n).expect("periodic box"))
}

pub fn disk(n: usize) -> Space {
    Space::ellipse(EllipseDomain::unit_disk(), n).expect("disk grid")
}

pub fn rectangle(n: usize) -> Space {
    Space::rectangle(n).expect("sine grid")
}
