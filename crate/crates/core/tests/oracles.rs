//! Operators checked against independently computed references: naive
//! transforms, direct convolution sums and closed-form solutions.

use std::f64::consts::PI;

use clmlab_core::dynamics::{fit_blowup, run_simulation, SimConfig};
use clmlab_core::geometry::{EllipseDomain, PeriodicBox, RectangleDomain};
use clmlab_core::models::{
    grad_u_3d, rhs_clm, rhs_zero_order_3d, velocity_from_vorticity_3d, ModelSpec, ModelVariant, ScalarField, Space,
    VectorField,
};
use clmlab_core::spectral::{FourierTransform, SineTransform, ZIndex};
use clmlab_core::steady::{l_multiplier, solve_restricted, RestrictedProblem, VanishingSet};
use num_complex::Complex64;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn sine_analysis_matches_naive_sum() {
    let n = 11;
    let st = SineTransform::new(n).unwrap();
    let x = RectangleDomain::nodes(n);
    let values: Vec<f64> = (0..n * n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
    let field = st.analyze(&values).unwrap();
    let scale = (2.0 / (n + 1) as f64).powi(2);
    for k1 in 1..=n {
        for k2 in 1..=n {
            let naive: f64 = (0..n * n)
                .map(|i| values[i] * (k1 as f64 * x[i / n]).sin() * (k2 as f64 * x[i % n]).sin())
                .sum::<f64>()
                * scale;
            assert!((field.get(k1, k2) - naive).abs() < 1e-12, "mode ({k1},{k2})");
        }
    }
    assert!(max_abs_diff(&st.synthesize(&field).unwrap(), &values) < 1e-12);
}

#[test]
fn rectangle_z12_matches_closed_form() {
    // w = sum_k c_k sin(k1 x1) sin(k2 x2), so Z12 w = -sum_k c_k k1 k2 / |k|^2 cos(k1 x1) cos(k2 x2).
    let modes = [(1.0, 1.0, 1.0), (2.0, 3.0, -0.5), (4.0, 1.0, 0.25)];
    let space = Space::rectangle(24).unwrap();
    let w = space.sample(|x| modes.iter().map(|(a, b, c)| c * (a * x[0]).sin() * (b * x[1]).sin()).sum());
    let exact = space.sample(|x| {
        modes.iter().map(|(a, b, c)| -c * a * b / (a * a + b * b) * (a * x[0]).cos() * (b * x[1]).cos()).sum()
    });
    let z12 = space.apply_z(ZIndex::Z12, &w).unwrap();
    assert!(max_abs_diff(&z12, &exact) < 1e-12);
    assert!(max_abs_diff(&space.apply_z(ZIndex::Z21, &w).unwrap(), &z12) < 1e-15);
}

/// Naive DFT coefficients, normalized by 1/N, indexed by signed modes.
fn naive_dft_2d(values: &[f64], n: usize) -> impl Fn(isize, isize) -> Complex64 + '_ {
    move |m1, m2| {
        let mut acc = Complex64::new(0.0, 0.0);
        for i1 in 0..n {
            for i2 in 0..n {
                let phase = -2.0 * PI * (m1 as f64 * i1 as f64 + m2 as f64 * i2 as f64) / n as f64;
                acc += values[i1 * n + i2] * Complex64::from_polar(1.0, phase);
            }
        }
        acc / (n * n) as f64
    }
}

#[test]
fn dealiased_product_matches_truncated_convolution() {
    let n = 12;
    let bx = PeriodicBox::new(2, n).unwrap();
    let tf = FourierTransform::new(bx);
    let f = bx.sample(|x| (x[0] + 2.0 * x[1]).sin() + 0.7 * (3.0 * x[0]).cos() + 0.2 * (5.0 * x[1]).sin());
    let g = bx.sample(|x| (2.0 * x[0] - x[1]).cos() + 0.4 * (4.0 * x[0] + x[1]).sin());
    let keep = |m: isize| 3 * m.unsigned_abs() < n;
    let (fh, gh) = (naive_dft_2d(&f, n), naive_dft_2d(&g, n));
    let range: Vec<isize> = (-(n as isize) / 2..n as isize / 2).filter(|m| keep(*m)).collect();
    let fc: Vec<(isize, isize, Complex64)> =
        range.iter().flat_map(|&a| range.iter().map(move |&b| (a, b))).map(|(a, b)| (a, b, fh(a, b))).collect();
    let gc: Vec<(isize, isize, Complex64)> =
        range.iter().flat_map(|&a| range.iter().map(move |&b| (a, b))).map(|(a, b)| (a, b, gh(a, b))).collect();
    let mut product = vec![0.0; n * n];
    for &(p1, p2, fv) in &fc {
        for &(q1, q2, gv) in &gc {
            let (m1, m2) = (p1 + q1, p2 + q2);
            if !(keep(m1) && keep(m2)) {
                continue;
            }
            let c = fv * gv;
            for i1 in 0..n {
                for i2 in 0..n {
                    let phase = 2.0 * PI * (m1 as f64 * i1 as f64 + m2 as f64 * i2 as f64) / n as f64;
                    product[i1 * n + i2] += (c * Complex64::from_polar(1.0, phase)).re;
                }
            }
        }
    }
    let fast = tf.dealiased_product(&f, &g).unwrap();
    assert!(max_abs_diff(&fast, &product) < 1e-12);
}

fn abc_field(space: &Space, (a, b, c): (f64, f64, f64)) -> VectorField {
    VectorField::new(
        space.clone(),
        vec![
            space.sample(|x| a * x[2].sin() + c * x[1].cos()),
            space.sample(|x| b * x[0].sin() + a * x[2].cos()),
            space.sample(|x| c * x[1].sin() + b * x[0].cos()),
        ],
    )
    .unwrap()
}

#[test]
fn abc_flow_velocity_gradient_and_stretching() {
    // The ABC field satisfies curl w = w and -Laplacian w = w, so u = w,
    // (grad u)_{mi} = d_m w_i and (grad u) w = grad |w|^2 / 2.
    let (a, b, c) = (1.0, 0.7, 0.4);
    let space = Space::torus(PeriodicBox::new(3, 16).unwrap());
    let w = abc_field(&space, (a, b, c));
    let rec = velocity_from_vorticity_3d(&w).unwrap();
    for i in 0..3 {
        assert!(max_abs_diff(&rec.u.components[i], &w.components[i]) < 1e-13);
    }
    let grad = grad_u_3d(&w).unwrap();
    let d = |m: usize, i: usize, x: [f64; 3]| -> f64 {
        match (m, i) {
            (2, 0) => a * x[2].cos(),
            (1, 0) => -c * x[1].sin(),
            (0, 1) => b * x[0].cos(),
            (2, 1) => -a * x[2].sin(),
            (1, 2) => c * x[1].cos(),
            (0, 2) => -b * x[0].sin(),
            _ => 0.0,
        }
    };
    for m in 0..3 {
        for i in 0..3 {
            let exact = space.sample(|x| d(m, i, x));
            assert!(max_abs_diff(&grad.entries[m][i], &exact) < 1e-13, "entry ({m},{i})");
        }
    }
    assert!(grad.trace().iter().all(|v| v.abs() < 1e-13));

    let stretch = rhs_zero_order_3d(&w).unwrap();
    for m in 0..3 {
        let exact = space.sample(|x| {
            let wv =
                [a * x[2].sin() + c * x[1].cos(), b * x[0].sin() + a * x[2].cos(), c * x[1].sin() + b * x[0].cos()];
            (0..3).map(|i| d(m, i, x) * wv[i]).sum()
        });
        assert!(max_abs_diff(&stretch.components[m], &exact) < 1e-12, "component {m}");
    }
}

#[test]
fn clm_rhs_on_a_single_mode() {
    // H cos(k x) = sin(k x), so H(theta) theta = sin(2 k x) / 2.
    let space = Space::torus(PeriodicBox::new(1, 64).unwrap());
    let theta = ScalarField::from_fn(space.clone(), |x| (3.0 * x[0]).cos());
    let r = rhs_clm(&theta).unwrap();
    assert!(max_abs_diff(&r.values, &space.sample(|x| 0.5 * (6.0 * x[0]).sin())) < 1e-13);
}

#[test]
fn steady_solution_without_vanishing_set_is_the_diagonal_solve() {
    let n = 20;
    for alpha in [0.3, 2.5] {
        let sol = solve_restricted(&RestrictedProblem::new(alpha, VanishingSet::empty(n))).unwrap();
        let st = SineTransform::new(n).unwrap();
        let one = st.analyze(&vec![1.0; n * n]).unwrap();
        let exact = st.synthesize(&one.scaled(|k1, k2| 1.0 / l_multiplier(alpha, k1, k2))).unwrap();
        assert!(sol.certificate.converged);
        assert!(max_abs_diff(&sol.values, &exact) < 1e-7, "alpha {alpha}");
    }
}

#[test]
fn model1_on_ellipse_follows_closed_form() {
    // w = ((a + c) / a) / (T - t) with T = (a + c) / (a w0).
    let d = EllipseDomain::new(2.0, 0.5, 1.0).unwrap();
    let space = Space::ellipse(d, 24).unwrap();
    let model = ModelSpec::new(ModelVariant::Model1, space.clone()).unwrap();
    let w0 = 1.5;
    let t_blow = (d.a + d.c) / (d.a * w0);
    let cfg = SimConfig { dt0: 1e-3, t_end: 0.8, growth_cfl: None, output_every: 0, ..SimConfig::default() };
    let out = run_simulation(&model, vec![vec![w0; space.len()]], &cfg).unwrap();
    let exact = (d.a + d.c) / d.a / (t_blow - out.final_t);
    assert!(out.final_state[0].iter().all(|v| (v / exact - 1.0).abs() < 1e-8));
    assert!(!out.report.detected);

    let cfg = SimConfig { t_end: 2.0, ..SimConfig::default() };
    let out = run_simulation(&model, vec![vec![w0; space.len()]], &cfg).unwrap();
    assert!(out.report.detected && out.report.threshold_reached);
    assert!((out.report.t_hat - t_blow).abs() < 1e-6 * t_blow, "{:?}", out.report);
    assert_eq!(fit_blowup(&out.series).t_hat, out.report.t_hat);
}
