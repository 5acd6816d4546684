//! Domains and grids: the normalized rectangle, quadratic-form ellipses and
//! ellipsoids, periodic boxes, and the masked node grid used by the
//! embedded-boundary Poisson solver.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes closer to the curved boundary than this fraction of a grid step are
/// treated as boundary nodes.
pub const BOUNDARY_CUTOFF: f64 = 1e-6;

/// Relative margin by which the ellipse discriminant must be negative.
/// `b^2 - 4ac` has to stay below `-DEGENERACY_TOL * 4ac`.
pub const DEGENERACY_TOL: f64 = 1e-6;

/// Smallest grid accepted by [`build_masked_grid`].
pub const MIN_MASKED_N: usize = 16;

/// The square `(0, pi) x (0, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RectangleDomain;

impl RectangleDomain {
    pub const SIDE: f64 = PI;

    /// Spacing of the interior collocation grid with `n` points per axis.
    pub fn spacing(n: usize) -> f64 {
        PI / (n as f64 + 1.0)
    }

    /// Interior collocation nodes `j * pi / (n + 1)`, `j = 1..=n`.
    pub fn nodes(n: usize) -> Vec<f64> {
        let h = Self::spacing(n);
        (1..=n).map(|j| j as f64 * h).collect()
    }
}

/// The ellipse `{ a x1^2 + b x1 x2 + c x2^2 < 1 }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseDomain {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl EllipseDomain {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::InvalidDomain("non-finite ellipse coefficient".into()));
        }
        if a <= 0.0 || c <= 0.0 {
            return Err(Error::InvalidDomain(format!("ellipse needs a > 0 and c > 0 (a = {a}, c = {c})")));
        }
        let disc = b * b - 4.0 * a * c;
        if disc >= -DEGENERACY_TOL * 4.0 * a * c {
            return Err(Error::InvalidDomain(format!(
                "ellipse discriminant b^2 - 4ac = {disc:.3e} is not safely negative"
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn unit_disk() -> Self {
        Self { a: 1.0, b: 0.0, c: 1.0 }
    }

    /// Quadratic form `a x1^2 + b x1 x2 + c x2^2`.
    #[inline]
    pub fn form(&self, x1: f64, x2: f64) -> f64 {
        self.a * x1 * x1 + self.b * x1 * x2 + self.c * x2 * x2
    }

    #[inline]
    pub fn contains(&self, x1: f64, x2: f64) -> bool {
        self.form(x1, x2) < 1.0
    }

    /// Determinant of the symmetric matrix `[[a, b/2], [b/2, c]]`.
    pub fn det(&self) -> f64 {
        self.a * self.c - 0.25 * self.b * self.b
    }

    /// Half-widths of the tight axis-aligned bounding box, from the diagonal
    /// of the inverse form matrix.
    pub fn half_extents(&self) -> [f64; 2] {
        let det = self.det();
        [(self.c / det).sqrt(), (self.a / det).sqrt()]
    }

    pub fn area(&self) -> f64 {
        PI / self.det().sqrt()
    }

    /// The Dirichlet potential of the constant 1:
    /// `(a x1^2 + b x1 x2 + c x2^2 - 1) / (2 (a + c))`.
    pub fn unit_potential(&self, x1: f64, x2: f64) -> f64 {
        (self.form(x1, x2) - 1.0) / (2.0 * (self.a + self.c))
    }

    /// Smallest `s > 0` with `form(p + s d) = 1`, for `p` strictly inside.
    pub fn ray_exit(&self, p: [f64; 2], d: [f64; 2]) -> f64 {
        let qd = self.form(d[0], d[1]);
        let bpd = self.a * p[0] * d[0] + 0.5 * self.b * (p[0] * d[1] + p[1] * d[0]) + self.c * p[1] * d[1];
        let gap = 1.0 - self.form(p[0], p[1]);
        let root = (bpd * bpd + qd * gap).max(0.0).sqrt();
        // Two algebraically equal forms; pick the one without cancellation.
        if bpd >= 0.0 {
            gap / (bpd + root)
        } else {
            (root - bpd) / qd
        }
    }
}

/// Ellipsoid `{ x^T A x < 1 }` in three dimensions, normalized to `trace A = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidForm {
    a: [[f64; 3]; 3],
}

impl EllipsoidForm {
    pub const TRACE_TOL: f64 = 1e-12;

    pub fn new(a: [[f64; 3]; 3]) -> Result<Self> {
        let scale = a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..3 {
            for j in 0..3 {
                if !a[i][j].is_finite() {
                    return Err(Error::InvalidDomain("non-finite ellipsoid coefficient".into()));
                }
                if (a[i][j] - a[j][i]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidDomain(format!("ellipsoid form is not symmetric at ({i}, {j})")));
                }
            }
        }
        let trace = a[0][0] + a[1][1] + a[2][2];
        if (trace - 1.0).abs() > Self::TRACE_TOL {
            return Err(Error::InvalidDomain(format!("ellipsoid form must have unit trace, got {trace}")));
        }
        // Sylvester's criterion.
        let m1 = a[0][0];
        let m2 = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let m3 = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        if m1 <= 0.0 || m2 <= 0.0 || m3 <= 0.0 {
            return Err(Error::InvalidDomain("ellipsoid form is not positive definite".into()));
        }
        Ok(Self { a })
    }

    /// The ball of radius `sqrt(3)`, i.e. `A = I / 3`.
    pub fn ball() -> Self {
        let t = 1.0 / 3.0;
        Self { a: [[t, 0.0, 0.0], [0.0, t, 0.0], [0.0, 0.0, t]] }
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.a
    }
}

/// Periodic box of `dim` axes with `n` points each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicBox {
    pub dim: usize,
    pub lengths: [f64; 3],
    pub n: usize,
}

impl PeriodicBox {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        Self::with_length(dim, n, 2.0 * PI)
    }

    pub fn with_length(dim: usize, n: usize, length: f64) -> Result<Self> {
        Self::with_lengths(dim, n, [length; 3])
    }

    pub fn with_lengths(dim: usize, n: usize, lengths: [f64; 3]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidDomain(format!("periodic box dimension {dim} not in 1..=3")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidDomain(format!("periodic box needs an even n >= 8, got {n}")));
        }
        if lengths[..dim].iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidDomain("periodic box length must be positive".into()));
        }
        Ok(Self { dim, lengths, n })
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.n as f64
    }

    pub fn volume(&self) -> f64 {
        self.lengths[..self.dim].iter().product()
    }

    /// Physical coordinates of a flat (row-major, last axis fastest) index.
    pub fn coords(&self, index: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        let mut rem = index;
        for axis in (0..self.dim).rev() {
            let i = rem % self.n;
            rem /= self.n;
            out[axis] = i as f64 * self.spacing(axis);
        }
        out
    }

    /// Samples `f` at every grid point.
    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|idx| f(self.coords(idx))).collect()
    }
}

/// Arm directions, as integer node offsets, in the order stored by
/// [`MaskedGrid::arms`].
pub const ARM_OFFSETS: [[isize; 2]; 8] = [[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [-1, -1], [1, -1], [-1, 1]];

/// Uniform cell-centred grid over the bounding square of an ellipse, with interior
/// mask and Shortley-Weller arm fractions.
#[derive(Debug, Clone)]
pub struct MaskedGrid {
    pub domain: EllipseDomain,
    /// Nodes per axis.
    pub n: usize,
    pub spacing: f64,
    /// Coordinates of node `(0, 0)`.
    pub origin: [f64; 2],
    /// One flag per node, row-major with the `x2` index fastest.
    pub interior_mask: Vec<bool>,
    interior: Vec<usize>,
    slot: Vec<u32>,
    arms: Vec<[f64; 8]>,
}

const NO_SLOT: u32 = u32::MAX;

impl MaskedGrid {
    #[inline]
    pub fn node_index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.n + i2
    }

    #[inline]
    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        let (i1, i2) = (node / self.n, node % self.n);
        [self.origin[0] + i1 as f64 * self.spacing, self.origin[1] + i2 as f64 * self.spacing]
    }

    /// Node indices of the interior nodes, in increasing order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    /// Position of `node` in the interior ordering.
    #[inline]
    pub fn slot(&self, node: usize) -> Option<usize> {
        match self.slot[node] {
            NO_SLOT => None,
            s => Some(s as usize),
        }
    }

    /// Interior index of the neighbour of interior node `k` along `offset`.
    pub fn neighbour(&self, k: usize, offset: [isize; 2]) -> Option<usize> {
        let node = self.interior[k];
        let i1 = (node / self.n) as isize + offset[0];
        let i2 = (node % self.n) as isize + offset[1];
        if i1 < 0 || i2 < 0 || i1 >= self.n as isize || i2 >= self.n as isize {
            return None;
        }
        self.slot(self.node_index(i1 as usize, i2 as usize))
    }

    /// Fractional arm lengths of interior node `k` along [`ARM_OFFSETS`]; 1
    /// whenever the neighbour is itself interior.
    #[inline]
    pub fn arms(&self, k: usize) -> &[f64; 8] {
        &self.arms[k]
    }

    /// Axis arm fractions `[+x1, -x1, +x2, -x2]` for every interior node that
    /// touches the boundary along an axis.
    pub fn boundary_fractions(&self) -> impl Iterator<Item = (usize, [f64; 4])> + '_ {
        self.arms.iter().enumerate().filter_map(|(k, a)| {
            let axis = [a[0], a[1], a[2], a[3]];
            axis.iter().any(|&t| t < 1.0).then_some((k, axis))
        })
    }

    pub fn interior_coords(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.interior.iter().map(|&node| self.node_coords(node))
    }

    /// Samples `f` on every interior node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.interior_coords().map(|[x1, x2]| f(x1, x2)).collect()
    }

    /// Interior nodes whose `(2 layers + 1)^2` index neighbourhood is fully
    /// interior. By convexity these lie at least `layers * h` from the boundary.
    pub fn bulk_mask(&self, layers: usize) -> Vec<bool> {
        let l = layers as isize;
        self.interior
            .iter()
            .map(|&node| {
                let i1 = (node / self.n) as isize;
                let i2 = (node % self.n) as isize;
                [(-l, -l), (-l, l), (l, -l), (l, l)].iter().all(|&(d1, d2)| {
                    let (j1, j2) = (i1 + d1, i2 + d2);
                    j1 >= 0
                        && j2 >= 0
                        && j1 < self.n as isize
                        && j2 < self.n as isize
                        && self.interior_mask[self.node_index(j1 as usize, j2 as usize)]
                })
            })
            .collect()
    }
}

/// Discretizes an ellipse on an `n x n` cell-centred grid over the square
/// that tightly bounds its larger half-extent, so the interior fraction
/// tends to the area ratio without an `O(1/n)` edge bias.
pub fn build_masked_grid(domain: EllipseDomain, n: usize) -> Result<MaskedGrid> {
    if n < MIN_MASKED_N {
        return Err(Error::InvalidParameter(format!("masked grid needs n >= {MIN_MASKED_N}, got {n}")));
    }
    let domain = EllipseDomain::new(domain.a, domain.b, domain.c)?;
    let [r1, r2] = domain.half_extents();
    let half = r1.max(r2);
    let h = 2.0 * half / n as f64;
    let origin = [-half + 0.5 * h, -half + 0.5 * h];
    let coord = |i: usize| origin[0] + i as f64 * h;

    let total = n * n;
    let inside: Vec<bool> = (0..total).map(|node| domain.contains(coord(node / n), coord(node % n))).collect();

    let arm_fraction = |node: usize, off: [isize; 2], mask: &[bool]| -> f64 {
        let (i1, i2) = ((node / n) as isize, (node % n) as isize);
        let (j1, j2) = (i1 + off[0], i2 + off[1]);
        let in_grid = j1 >= 0 && j2 >= 0 && j1 < n as isize && j2 < n as isize;
        if in_grid && mask[j1 as usize * n + j2 as usize] {
            return 1.0;
        }
        let p = [coord(i1 as usize), coord(i2 as usize)];
        let d = [off[0] as f64 * h, off[1] as f64 * h];
        domain.ray_exit(p, d).min(1.0)
    };

    // Nodes hugging the curve become boundary nodes. Arms of their neighbours
    // then run past them and clamp to 1, so one pass suffices.
    let mask: Vec<bool> = (0..total)
        .map(|node| inside[node] && ARM_OFFSETS.iter().all(|&off| arm_fraction(node, off, &inside) >= BOUNDARY_CUTOFF))
        .collect();

    let mut interior = Vec::new();
    let mut slot = vec![NO_SLOT; total];
    for (node, &m) in mask.iter().enumerate() {
        if m {
            slot[node] = interior.len() as u32;
            interior.push(node);
        }
    }
    let arms = interior
        .iter()
        .map(|&node| {
            let mut a = [1.0; 8];
            for (slot, off) in a.iter_mut().zip(ARM_OFFSETS) {
                *slot = arm_fraction(node, off, &mask).max(BOUNDARY_CUTOFF);
            }
            a
        })
        .collect();

    Ok(MaskedGrid { domain, n, spacing: h, origin, interior_mask: mask, interior, slot, arms })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interior_fraction(g: &MaskedGrid) -> f64 {
        g.interior_count() as f64 / (g.n * g.n) as f64
    }

    #[test]
    fn disk_interior_fraction() {
        let g = build_masked_grid(EllipseDomain::unit_disk(), 64).unwrap();
        let f = interior_fraction(&g);
        assert!((f / (PI / 4.0) - 1.0).abs() < 0.02, "fraction {f}");
    }

    #[test]
    fn half_height_ellipse_fraction() {
        let g = build_masked_grid(EllipseDomain::new(1.0, 0.0, 4.0).unwrap(), 64).unwrap();
        let f = interior_fraction(&g);
        assert!((f / (PI / 8.0) - 1.0).abs() < 0.03, "fraction {f}");
    }

    #[test]
    fn near_degenerate_ellipse_rejected() {
        assert!(EllipseDomain::new(1.0, 1.9999999, 1.0).is_err());
        assert!(EllipseDomain::new(1.0, 2.0, 1.0).is_err());
        assert!(EllipseDomain::new(-1.0, 0.0, 1.0).is_err());
        assert!(EllipseDomain::new(1.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn small_grid_rejected() {
        assert!(build_masked_grid(EllipseDomain::unit_disk(), 15).is_err());
        let bad = EllipseDomain { a: 1.0, b: 3.0, c: 1.0 };
        assert!(build_masked_grid(bad, 32).is_err());
    }

    #[test]
    fn interior_fraction_converges() {
        let d = EllipseDomain::new(2.0, 0.7, 1.0).unwrap();
        let [r1, r2] = d.half_extents();
        let side = 2.0 * r1.max(r2);
        let exact = d.area() / (side * side);
        let err: Vec<f64> = [32, 64, 128, 256]
            .iter()
            .map(|&n| {
                let g = build_masked_grid(d, n).unwrap();
                (interior_fraction(&g) - exact).abs()
            })
            .collect();
        assert!(err[3] < err[0]);
        assert!(err[3] < 4.0 / 256.0);
    }

    #[test]
    fn mask_and_arms_consistent_with_form() {
        let d = EllipseDomain::new(1.0, 1.0, 1.0).unwrap();
        let g = build_masked_grid(d, 48).unwrap();
        let h = g.spacing;
        for (k, [x1, x2]) in g.interior_coords().enumerate() {
            assert!(d.form(x1, x2) < 1.0);
            for (j, &off) in ARM_OFFSETS.iter().enumerate() {
                let t = g.arms(k)[j];
                assert!(t > 0.0 && t <= 1.0);
                if t < 1.0 {
                    let y1 = x1 + t * off[0] as f64 * h;
                    let y2 = x2 + t * off[1] as f64 * h;
                    assert!((d.form(y1, y2) - 1.0).abs() < 1e-10);
                    assert!(g.neighbour(k, off).is_none());
                }
            }
        }
        assert!(g.boundary_fractions().count() > 0);
    }

    #[test]
    fn bulk_nodes_are_far_from_boundary() {
        let d = EllipseDomain::new(2.0, 0.0, 1.0).unwrap();
        let g = build_masked_grid(d, 64).unwrap();
        let bulk = g.bulk_mask(3);
        let h = g.spacing;
        for (k, [x1, x2]) in g.interior_coords().enumerate() {
            if bulk[k] {
                // A circle of radius 3h around the node stays inside.
                for s in 0..16 {
                    let th = s as f64 * PI / 8.0;
                    assert!(d.contains(x1 + 3.0 * h * th.cos(), x2 + 3.0 * h * th.sin()));
                }
            }
        }
        assert!(bulk.iter().filter(|b| **b).count() > g.interior_count() / 2);
    }

    #[test]
    fn ellipsoid_validation() {
        assert!(EllipsoidForm::new(*EllipsoidForm::ball().matrix()).is_ok());
        let not_sym = [[0.5, 0.1, 0.0], [0.0, 0.25, 0.0], [0.0, 0.0, 0.25]];
        assert!(EllipsoidForm::new(not_sym).is_err());
        let bad_trace = [[0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.5]];
        assert!(EllipsoidForm::new(bad_trace).is_err());
        let indefinite = [[0.5, 0.6, 0.0], [0.6, 0.25, 0.0], [0.0, 0.0, 0.25]];
        assert!(EllipsoidForm::new(indefinite).is_err());
    }

    #[test]
    fn periodic_box_validation_and_coords() {
        assert!(PeriodicBox::new(2, 6).is_err());
        assert!(PeriodicBox::new(2, 9).is_err());
        assert!(PeriodicBox::new(4, 8).is_err());
        assert!(PeriodicBox::with_length(1, 8, 0.0).is_err());
        let b = PeriodicBox::new(3, 8).unwrap();
        assert_eq!(b.len(), 512);
        let c = b.coords(64 + 2 * 8 + 3);
        let h = 2.0 * PI / 8.0;
        assert!((c[0] - h).abs() < 1e-15 && (c[1] - 2.0 * h).abs() < 1e-15);
        assert!((c[2] - 3.0 * h).abs() < 1e-15);
    }
}
