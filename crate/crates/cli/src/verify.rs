//! Built-in verification suites, each a list of checks with explicit bounds.

use clmlab_core::diagnostics::quadratic_form;
use clmlab_core::dynamics::{run_simulation, SimConfig};
use clmlab_core::elliptic::DEFAULT_TOL;
use clmlab_core::geometry::{EllipseDomain, EllipsoidForm, PeriodicBox};
use clmlab_core::models::{
    biot_savart_2d, skew_symmetry_residual, velocity_from_vorticity_3d, ModelSpec, ModelVariant, ScalarField, Space,
    VectorField,
};
use clmlab_core::spectral::{apply_z_sine, SineField, SineTransform, ZIndex};
use clmlab_core::steady::{
    coercivity_check, l_multiplier, random_sine_field, solve_restricted, RestrictedProblem, VanishingSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};

pub const SUITES: [&str; 7] = ["multipliers", "ellipse", "blowup", "steady", "forms", "reconstruction", "skew"];

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub observed: String,
    pub bound: String,
    pub pass: bool,
}

fn at_most(name: &str, value: f64, bound: f64) -> Check {
    Check {
        name: name.into(),
        observed: format!("{value:.3e}"),
        bound: format!("<= {bound:.0e}"),
        pass: value <= bound,
    }
}

fn at_least(name: &str, value: f64, bound: f64, label: &str) -> Check {
    Check { name: name.into(), observed: format!("{value:.6}"), bound: format!(">= {label}"), pass: value >= bound }
}

fn within(name: &str, value: f64, (lo, hi): (f64, f64)) -> Check {
    Check {
        name: name.into(),
        observed: format!("{value:.6}"),
        bound: format!("in [{lo}, {hi}]"),
        pass: value >= lo && value <= hi,
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(stream))
}

fn multipliers(seed: u64) -> CliResult<Vec<Check>> {
    let n = 16;
    let mut checks = Vec::new();
    for (z, k, factor, name) in [
        (ZIndex::Z11, (1, 1), 0.5, "Z11 on sine mode (1,1) = 1/2"),
        (ZIndex::Z11, (3, 4), 9.0 / 25.0, "Z11 on sine mode (3,4) = 9/25"),
        (ZIndex::Z22, (3, 4), 16.0 / 25.0, "Z22 on sine mode (3,4) = 16/25"),
    ] {
        let mut w = SineField::zeros(n);
        w.set(k.0, k.1, 1.0);
        let got = apply_z_sine(z, &w)?.get(k.0, k.1);
        checks.push(at_most(name, (got - factor).abs(), 4.0 * f64::EPSILON));
    }
    let mut r = rng(seed, 1);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let w = random_sine_field(&mut r, n);
        let s11 = apply_z_sine(ZIndex::Z11, &w)?;
        let s22 = apply_z_sine(ZIndex::Z22, &w)?;
        let sum: Vec<f64> = s11.coeffs.iter().zip(&s22.coeffs).map(|(a, b)| a + b).collect();
        worst = worst.max(max_abs_diff(&sum, &w.coeffs));
    }
    checks.push(at_most("(Z11 + Z22) w = w, 20 random fields", worst, 1e-12));

    let rect = Space::rectangle(24)?;
    let w = rect.sample(|x| (3.0 * x[0]).sin() * (4.0 * x[1]).sin());
    let got = rect.apply_z(ZIndex::Z11, &w)?;
    let want: Vec<f64> = w.iter().map(|v| 9.0 / 25.0 * v).collect();
    checks.push(at_most("grid Z11 on sin 3x1 sin 4x2", max_abs_diff(&got, &want), 1e-13));

    let torus = Space::torus(PeriodicBox::new(2, 16)?);
    let w = torus.sample(|x| (x[0] + x[1]).cos());
    let got = torus.apply_z(ZIndex::Z12, &w)?;
    let want: Vec<f64> = w.iter().map(|v| 0.5 * v).collect();
    checks.push(at_most("periodic Z12 on cos(x1 + x2) = 1/2", max_abs_diff(&got, &want), 1e-13));
    Ok(checks)
}

fn ellipse(_seed: u64) -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    let d = EllipseDomain::new(2.0, 0.0, 1.0)?;
    let space = Space::ellipse(d, 128)?;
    let Space::Ellipse(solver) = &space else { unreachable!() };
    let grid = solver.grid();
    let one = vec![1.0; grid.interior_count()];
    let z = solver.apply_z(ZIndex::Z11, &one, DEFAULT_TOL)?;
    let bulk: Vec<f64> =
        grid.interior_coords().zip(&z).filter(|(x, _)| d.form(x[0], x[1]) <= 0.5).map(|(_, v)| *v).collect();
    let mean = bulk.iter().sum::<f64>() / bulk.len() as f64;
    let expect = d.a / (d.a + d.c);
    checks.push(at_most(
        "Z11 1 = a/(a+c) on ellipse (2,0,1), bulk mean rel. error",
        (mean - expect).abs() / expect,
        2e-3,
    ));

    // On quadratic forms the second differences are exact: Z12 1 = b / (2 (a + c)).
    let d = EllipseDomain::new(1.0, 1.0, 1.0)?;
    let space = Space::ellipse(d, 64)?;
    let Space::Ellipse(solver) = &space else { unreachable!() };
    let z = solver.apply_z(ZIndex::Z12, &vec![1.0; solver.grid().interior_count()], DEFAULT_TOL)?;
    let err = z.iter().map(|v| (v - 0.25).abs()).fold(0.0, f64::max);
    checks.push(at_most("Z12 1 = b/(2(a+c)) on ellipse (1,1,1)", err, 1e-8));

    let d = EllipseDomain::new(2.0, 0.5, 1.0)?;
    let space = Space::ellipse(d, 24)?;
    let model = ModelSpec::new(ModelVariant::Model1, space.clone())?;
    let w0 = 1.5;
    let t_blow = (d.a + d.c) / (d.a * w0);
    let cfg = SimConfig { dt0: 1e-3, t_end: 0.5, growth_cfl: None, output_every: 0, ..SimConfig::default() };
    let out = run_simulation(&model, vec![vec![w0; space.len()]], &cfg)?;
    let exact = (d.a + d.c) / d.a / (t_blow - out.final_t);
    let err = out.final_state[0].iter().map(|v| (v / exact - 1.0).abs()).fold(0.0, f64::max);
    checks.push(at_most("Model 1 constant solution on ellipse (2,0.5,1), rel. error at t=0.5", err, 1e-8));
    Ok(checks)
}

fn blowup(_seed: u64) -> CliResult<Vec<Check>> {
    let cfg = SimConfig { dt0: 1e-2, t_end: 2.0, output_every: 1, growth_cfl: Some(0.02), ..SimConfig::default() };
    let mut checks = Vec::new();

    let d = EllipseDomain::unit_disk();
    let space = Space::ellipse(d, 32)?;
    let model = ModelSpec::new(ModelVariant::Model1, space.clone())?;
    let out = run_simulation(&model, vec![vec![2.0; space.len()]], &cfg)?;
    let r = &out.report;
    checks.push(Check {
        name: "disk Model 1, w0 = 2: blow-up detected".into(),
        observed: r.detected.to_string(),
        bound: "true".into(),
        pass: r.detected,
    });
    checks.push(within("disk Model 1 T_hat", r.t_hat, (0.99, 1.01)));
    checks.push(within("disk Model 1 exponent", r.exponent_hat, (0.95, 1.05)));
    let q = (d.a + d.c) / d.a;
    let peak = out.series.samples().last().map(|s| s.sup_norm).unwrap_or(0.0);
    let mut worst = 0.0_f64;
    for snap in out.snapshots.iter().filter(|s| s.state[0].iter().cloned().fold(0.0, f64::max) >= peak / 10.0) {
        for v in &snap.state[0] {
            worst = worst.max(((r.t_hat - snap.t) * v / q - 1.0).abs());
        }
    }
    checks.push(at_most("(T_hat - t) w / Q - 1 over the final decade", worst, 1e-2));

    let d = EllipseDomain::new(1.0, 1.0, 1.0)?;
    let space = Space::ellipse(d, 32)?;
    let model = ModelSpec::new(ModelVariant::Model1Prime, space.clone())?;
    let out = run_simulation(&model, vec![vec![4.0; space.len()]], &cfg)?;
    checks.push(within("ellipse (1,1,1) Model 1', w0 = 4: T_hat", out.report.t_hat, (0.99, 1.01)));
    Ok(checks)
}

fn steady(seed: u64) -> CliResult<Vec<Check>> {
    let n = 24;
    let mut checks = Vec::new();
    let mut worst = 0.0_f64;
    for i in 0..20 {
        let e = VanishingSet::random(n, 0.3, seed.wrapping_add(i))?;
        let sol = solve_restricted(&RestrictedProblem::new(1.0, e.clone()))?;
        for (v, m) in sol.values.iter().zip(e.mask()) {
            worst = worst.max((v - if *m { 0.0 } else { 1.0 }).abs());
        }
    }
    checks.push(at_most("alpha = 1: indicator oracle, 20 random masks", worst, 1e-6));

    let sol = solve_restricted(&RestrictedProblem::new(0.5, VanishingSet::empty(n)))?;
    let st = SineTransform::new(n)?;
    let one = st.analyze(&vec![1.0; n * n])?;
    let exact = st.synthesize(&one.scaled(|k1, k2| 1.0 / l_multiplier(0.5, k1, k2)))?;
    checks.push(at_most("alpha = 0.5, empty mask: diagonal-solve oracle", max_abs_diff(&sol.values, &exact), 1e-8));

    let sol = solve_restricted(&RestrictedProblem::new(0.5, VanishingSet::left_half(n)))?;
    let c = &sol.certificate;
    checks.push(at_most("alpha = 0.5, half-domain mask: max |w| on E", c.on_max_abs, 0.0));
    checks.push(at_most("alpha = 0.5, half-domain mask: off-E residual", c.off_residual, 1e-8));

    for (i, alpha) in [0.25, 0.5, 2.0].into_iter().enumerate() {
        let q = coercivity_check(alpha, 1000, 32, seed.wrapping_add(100 + i as u64))?;
        checks.push(at_least(
            &format!("alpha = {alpha}: min Rayleigh quotient of L_alpha, 1000 trials"),
            q,
            alpha.min(1.0) - 1e-10,
            &format!("{} - 1e-10", alpha.min(1.0)),
        ));
    }
    Ok(checks)
}

fn forms(seed: u64) -> CliResult<Vec<Check>> {
    let n = 32;
    let space = Space::rectangle(n)?;
    let Space::Rectangle(st) = &space else { unreachable!() };
    let mut r = rng(seed, 5);
    let (mut q11, mut q22) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..1000 {
        let w = ScalarField::new(space.clone(), st.synthesize(&random_sine_field(&mut r, n))?)?;
        q11 = q11.min(quadratic_form(ZIndex::Z11, &w)?.rayleigh());
        q22 = q22.min(quadratic_form(ZIndex::Z22, &w)?.rayleigh());
    }
    let torus = Space::torus(PeriodicBox::new(2, 32)?);
    let plus = quadratic_form(ZIndex::Z12, &ScalarField::from_fn(torus.clone(), |x| (x[0] + x[1]).cos()))?.value;
    let minus = quadratic_form(ZIndex::Z12, &ScalarField::from_fn(torus, |x| (x[0] - x[1]).cos()))?.value;
    Ok(vec![
        at_least("min <Z11 w, w> / |w|^2, 1000 rectangle fields", q11, -1e-10, "-1e-10"),
        at_least("min <Z22 w, w> / |w|^2, 1000 rectangle fields", q22, -1e-10, "-1e-10"),
        Check {
            name: "<Z12 w, w> changes sign on cos(x1 + x2), cos(x1 - x2)".into(),
            observed: format!("{plus:.4}, {minus:.4}"),
            bound: "> 0, < 0".into(),
            pass: plus > 0.0 && minus < 0.0,
        },
    ])
}

fn reconstruction(_seed: u64) -> CliResult<Vec<Check>> {
    let space = Space::torus(PeriodicBox::new(3, 16)?);
    let w = VectorField::new(
        space.clone(),
        vec![
            space.sample(|x| x[2].sin() + 0.5 * x[1].cos() + 0.3 * (2.0 * x[1] + x[2]).sin()),
            space.sample(|x| 0.8 * x[0].sin() + x[2].cos()),
            space.sample(|x| 0.5 * x[1].sin() + 0.8 * x[0].cos()),
        ],
    )?;
    let rec = velocity_from_vorticity_3d(&w)?;
    let grad = VectorField::new(
        space.clone(),
        vec![space.sample(|x| x[0].cos()), space.sample(|x| -(2.0 * x[1]).sin()), space.sample(|_| 0.0)],
    )?;
    let bad = velocity_from_vorticity_3d(&grad)?;

    let plane = Space::torus(PeriodicBox::new(2, 16)?);
    let u = biot_savart_2d(&ScalarField::from_fn(plane.clone(), |x| x[0].cos() + x[1].cos()))?;
    let err = max_abs_diff(&u.components[0], &plane.sample(|x| -x[1].sin()))
        .max(max_abs_diff(&u.components[1], &plane.sample(|x| x[0].sin())));
    Ok(vec![
        at_most("3D: RMS of div u", rec.div_norm, 1e-12),
        at_most("3D: RMS of curl u - w", rec.curl_mismatch, 1e-10),
        at_least("3D gradient vorticity: curl mismatch reported", bad.curl_mismatch, 0.1, "0.1"),
        at_most("2D: w = cos x1 + cos x2 gives u = (-sin x2, sin x1)", err, 1e-13),
    ])
}

fn random_trace_one_spd(r: &mut impl Rng) -> EllipsoidForm {
    loop {
        let b: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| r.gen_range(-1.0..1.0)));
        let mut a = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = (0..3).map(|k| b[i][k] * b[j][k]).sum::<f64>() + if i == j { 0.05 } else { 0.0 };
            }
        }
        let tr = a[0][0] + a[1][1] + a[2][2];
        a.iter_mut().flatten().for_each(|v| *v /= tr);
        if let Ok(f) = EllipsoidForm::new(a) {
            return f;
        }
    }
}

fn skew(seed: u64) -> CliResult<Vec<Check>> {
    let mut r = rng(seed, 7);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let form = random_trace_one_spd(&mut r);
        let c: [f64; 3] = std::array::from_fn(|_| r.gen_range(-1.0..1.0));
        worst = worst.max(skew_symmetry_residual(&form, c).iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    Ok(vec![at_most("max residual, 1000 random (A, c)", worst, 1e-14)])
}

pub fn run_suite(name: &str, seed: u64) -> CliResult<Vec<Check>> {
    match name {
        "multipliers" => multipliers(seed),
        "ellipse" => ellipse(seed),
        "blowup" => blowup(seed),
        "steady" => steady(seed),
        "forms" => forms(seed),
        "reconstruction" => reconstruction(seed),
        "skew" => skew(seed),
        _ => Err(CliError::UnknownSuite { name: name.into(), valid: SUITES.join(", ") }),
    }
}

pub fn format_table(suite: &str, checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut out = format!("suite {suite}\n");
    for c in checks {
        out += &format!(
            "  [{}] {:<width$}  {:>12}  {}\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.observed,
            c.bound
        );
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    out += &format!("{passed} of {} checks passed\n", checks.len());
    out
}

/// Runs a suite and prints its table; true when every check passes.
pub fn cmd_verify(name: &str, seed: u64) -> CliResult<bool> {
    let checks = run_suite(name, seed)?;
    print!("{}", format_table(name, &checks));
    Ok(checks.iter().all(|c| c.pass))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_suites_pass() {
        for s in ["multipliers", "reconstruction", "skew"] {
            let checks = run_suite(s, 3).unwrap();
            assert!(checks.iter().all(|c| c.pass), "{}", format_table(s, &checks));
        }
    }

    #[test]
    fn unknown_suite_lists_valid_names() {
        let e = run_suite("bogus", 0).unwrap_err().to_string();
        for s in SUITES {
            assert!(e.contains(s), "{e}");
        }
    }
}
