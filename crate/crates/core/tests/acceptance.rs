//! End-to-end acceptance checks. Every oracle here is computed on the test
//! side from closed forms; library diagnostics are only cross-checked.
//!
//! Run with `cargo test -p singplap-core --test acceptance`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use singplap_core::analysis::{run_comparison_test, thresholds, u0_integrability_check};
use singplap_core::mesh::{build_interval_mesh, build_rectangle_mesh, Field, Mesh};
use singplap_core::nonlinearity::{make_power_problem, ProblemSpec, TruncationLevel};
use singplap_core::plap::{convexity_gap, plap_solve_fixed_rhs, poincare_constant, PlapOptions};
use singplap_core::solver::{inner_solve, outer_solve, outer_solve_scaled, Outcome, SolverConfig};

type Check = Result<String, String>;

fn interval(n: usize) -> Arc<Mesh> {
    Arc::new(build_interval_mesh(0.0, 1.0, n).expect("mesh"))
}

fn ok_if(cond: bool, detail: String) -> Check {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn e<T: std::fmt::Display>(err: T) -> String {
    format!("error: {err}")
}

/// Least-squares slope of `ys` against `xs`.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Sup error of the piecewise-linear interpolant at nodes and cell midpoints.
fn linf_error_1d(u: &Field, exact: impl Fn(f64) -> f64) -> f64 {
    let x: Vec<f64> = u.mesh().coords().iter().map(|c| c[0]).collect();
    let v = u.values();
    let mut err = 0.0f64;
    for i in 0..x.len() {
        err = err.max((v[i] - exact(x[i])).abs());
        if i + 1 < x.len() {
            let xm = 0.5 * (x[i] + x[i + 1]);
            err = err.max((0.5 * (v[i] + v[i + 1]) - exact(xm)).abs());
        }
    }
    err
}

/// `int |u'|^2` of a piecewise-linear function on a uniform interval mesh.
fn dirichlet_energy_1d(u: &Field) -> f64 {
    let x: Vec<f64> = u.mesh().coords().iter().map(|c| c[0]).collect();
    let v = u.values();
    (0..x.len() - 1)
        .map(|i| (v[i + 1] - v[i]).powi(2) / (x[i + 1] - x[i]))
        .sum()
}

fn unit_problem(m: &Arc<Mesh>, gamma: f64) -> ProblemSpec {
    make_power_problem(2.0, gamma, 0.0, Field::constant(m, 1.0), Field::zeros(m)).expect("spec")
}

fn wide() -> SolverConfig {
    SolverConfig {
        n_max: 1 << 22,
        ..SolverConfig::default()
    }
}

fn manufactured() -> Check {
    // u = x(1-x): -u'' = 2 = f/u with f = 2x(1-x); -(|u'|u')' = 4|1-2x|.
    let exact = |x: f64| x * (1.0 - x);
    let sizes = [16usize, 32, 64, 128, 256];
    let (mut e2, mut e3) = (Vec::new(), Vec::new());
    for &n in &sizes {
        let m = interval(n);
        let f = Field::from_fn(&m, |x| 2.0 * x[0] * (1.0 - x[0]));
        let spec = make_power_problem(2.0, 1.0, 0.0, f, Field::zeros(&m)).map_err(e)?;
        let (u, rep) = outer_solve(&spec, &SolverConfig::default()).map_err(e)?;
        if rep.outcome != Outcome::Converged {
            return Err(format!("p=2 solve on {n} cells: {:?}", rep.outcome));
        }
        e2.push(linf_error_1d(&u, exact));
        let r = Field::from_fn(&m, |x| 4.0 * (1.0 - 2.0 * x[0]).abs());
        let u3 = plap_solve_fixed_rhs(&m, &r, 3.0, &PlapOptions::default()).map_err(e)?;
        e3.push(linf_error_1d(&u3, exact));
    }
    let lh: Vec<f64> = sizes.iter().map(|&n| (1.0 / n as f64).ln()).collect();
    let s2 = slope(&lh, &e2.iter().map(|v| v.ln()).collect::<Vec<_>>());
    let s3 = slope(&lh, &e3.iter().map(|v| v.ln()).collect::<Vec<_>>());
    ok_if(
        s2 >= 1.8 && s3 >= 0.9,
        format!("p=2 slope {s2:.3} (>= 1.8), p=3 slope {s3:.3} (>= 0.9)"),
    )
}

fn criterion_two_problem() -> ProblemSpec {
    let m = interval(256);
    make_power_problem(2.0, 1.0, 0.5, Field::constant(&m, 1.0), Field::constant(&m, 1.0))
        .expect("spec")
}

fn uniqueness() -> Check {
    let spec = criterion_two_problem();
    let cfg = SolverConfig::default();
    let mut sols = Vec::new();
    for scale in [0.01, 0.3, 1.0, 5.0, 50.0] {
        let (u, rep) = outer_solve_scaled(&spec, &cfg, scale).map_err(e)?;
        if rep.outcome != Outcome::Converged {
            return Err(format!("start scale {scale}: {:?}", rep.outcome));
        }
        sols.push(u.into_values());
    }
    let mut worst = 0.0f64;
    for i in 0..sols.len() {
        for j in i + 1..sols.len() {
            worst = worst.max(sup_diff(&sols[i], &sols[j]));
        }
    }
    ok_if(
        worst <= 1e-7,
        format!("5 starts, max pairwise distance {worst:.2e} (<= 1e-7)"),
    )
}

fn comparison() -> Check {
    let m = interval(256);
    let s1 = unit_problem(&m, 1.0);
    let s2 = make_power_problem(2.0, 1.0, 0.0, Field::constant(&m, 2.0), Field::zeros(&m))
        .map_err(e)?;
    let rep = run_comparison_test(&s1, &s2, &SolverConfig::default()).map_err(e)?;
    let (v1, v2) = (rep.v1.values(), rep.v2.values());
    let excess = v1.iter().zip(v2).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    // -v'' = c/v scales as v = sqrt(c) w, so v2 = sqrt(2) v1.
    let scaled: Vec<f64> = v1.iter().map(|v| v * 2f64.sqrt()).collect();
    let scaling = sup_diff(&scaled, v2);
    let s = rep.certificate.final_sign_quantity;
    ok_if(
        excess <= 1e-8 && s <= 1e-10 && scaling <= 1e-6,
        format!("max(v1 - v2) = {excess:.2e}, S = {s:.2e}, |v2 - sqrt(2) v1| = {scaling:.2e}"),
    )
}

fn monotonicity() -> Check {
    let spec = criterion_two_problem();
    let cfg = SolverConfig::default();
    let mut prev = Field::zeros(spec.mesh());
    let mut audit = 0.0f64;
    let mut levels = 0;
    for n in cfg.schedule() {
        let level = TruncationLevel::new(n).map_err(e)?;
        let u = inner_solve(&spec, level, &prev, &cfg).map_err(e)?;
        let defect = prev
            .values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| (a - b).max(0.0))
            .fold(0.0, f64::max);
        audit = audit.max(defect);
        let change = sup_diff(prev.values(), u.values());
        prev = u;
        levels += 1;
        if change < cfg.outer_tol {
            break;
        }
    }
    let (_, rep) = outer_solve(&spec, &cfg).map_err(e)?;
    ok_if(
        audit <= 1e-7 && rep.monotonicity_audit <= 1e-7,
        format!(
            "{levels} levels, max (u_n - u_n+1)_+ = {audit:.2e}, solver audit {:.2e} (<= 1e-7)",
            rep.monotonicity_audit
        ),
    )
}

fn energy_thresholds() -> Check {
    // u ~ d^b with b = 2/(gamma+1): int_h |u'|^2 ~ h^(2b-1), so log E grows
    // against log(1/h) with slope max(0, 1-2b).
    let predicted = |gamma: f64| (1.0 - 4.0 / (gamma + 1.0)).max(0.0);
    let sizes = [256usize, 512, 1024, 2048, 4096];
    let cfg = wide();
    let mut out = Vec::new();
    for gamma in [2.0, 5.0] {
        let mut ln_e = Vec::new();
        for &n in &sizes {
            let m = interval(n);
            let (u, rep) = outer_solve(&unit_problem(&m, gamma), &cfg).map_err(e)?;
            if rep.outcome != Outcome::Converged {
                return Err(format!("gamma={gamma} on {n} cells: {:?}", rep.outcome));
            }
            ln_e.push(dirichlet_energy_1d(&u).ln());
        }
        let ln_n: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
        out.push((gamma, slope(&ln_n, &ln_e), predicted(gamma)));
    }
    let (s2, s5) = (out[0].1, out[1].1);
    ok_if(
        s2.abs() < 0.05 && (s5 - out[1].2).abs() <= 0.1,
        format!(
            "gamma=2 slope {s2:.4} (|s| < 0.05), gamma=5 slope {s5:.4} ({:.4} +- 0.1)",
            out[1].2
        ),
    )
}

fn boundary_exponent() -> Check {
    // -u'' = u^-3 on (0,1) is solved by u = sqrt(2x(1-x)).
    let exact = |x: f64| (2.0 * x * (1.0 - x)).sqrt();
    let n = 1000;
    let m = interval(n);
    let (u, rep) = outer_solve(&unit_problem(&m, 3.0), &wide()).map_err(e)?;
    if rep.outcome != Outcome::Converged {
        return Err(format!("solve: {:?}", rep.outcome));
    }
    let h = 1.0 / n as f64;
    let (mut ld, mut lu) = (Vec::new(), Vec::new());
    let mut rel = 0.0f64;
    for (c, &v) in m.coords().iter().zip(u.values()) {
        let d = c[0].min(1.0 - c[0]);
        if d >= 3.0 * h - 1e-12 && d <= 30.0 * h + 1e-12 {
            ld.push(d.ln());
            lu.push(v.ln());
        }
        if d >= 3.0 * h - 1e-12 {
            rel = rel.max((v - exact(c[0])).abs() / exact(c[0]));
        }
    }
    let beta = slope(&ld, &lu);
    ok_if(
        (beta - 0.5).abs() <= 0.05,
        format!("beta = {beta:.4} (0.5 +- 0.05), rel. deviation from sqrt(2x(1-x)) beyond 3h {rel:.2e}"),
    )
}

fn linear_threshold() -> Check {
    // Testing -u'' = 1/u + g u against sin(pi x) gives
    // (pi^2 - g) int u sin = int sin / u > 0, so solutions need g < pi^2.
    let lambda1 = PI * PI;
    let m = interval(256);
    let cfg = SolverConfig::default();
    let run = |g: f64| {
        let spec = make_power_problem(2.0, 1.0, 1.0, Field::constant(&m, 1.0), Field::constant(&m, g))
            .map_err(e)?;
        outer_solve(&spec, &cfg).map_err(e)
    };
    let g = 0.5 * lambda1;
    let (u_small, small) = run(g)?;
    let (_, large) = run(1.5 * lambda1)?;
    let h = 1.0 / 256.0;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for (c, &v) in m.coords().iter().zip(u_small.values()) {
        if v > 0.0 {
            let phi = (PI * c[0]).sin();
            lhs += (lambda1 - g) * v * phi * h;
            rhs += phi / v * h;
        }
    }
    let identity = (lhs - rhs).abs() / rhs;
    let ok = small.outcome == Outcome::Converged
        && u_small.sup_norm() < 10.0
        && identity <= 1e-2
        && large.outcome == Outcome::Diverged;
    ok_if(
        ok,
        format!(
            "g = pi^2/2: {:?}, max u {:.5}, test-function identity off by {identity:.1e}; g = 3pi^2/2: {:?}",
            small.outcome,
            u_small.sup_norm(),
            large.outcome
        ),
    )
}

fn reference_gap(xi: &[f64], eta: &[f64], p: f64) -> f64 {
    let nx = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ne = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dot: f64 = eta.iter().zip(xi).map(|(a, b)| a * (b - a)).sum();
    let w = if ne > 0.0 { ne.powf(p - 2.0) } else { 0.0 };
    nx.powf(p) - ne.powf(p) - p * w * dot
}

fn convexity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20261016);
    let mut worst = f64::INFINITY;
    let mut mismatch = 0.0f64;
    for p in [1.5, 2.0, 3.0, 4.0] {
        for _ in 0..10_000 {
            let dim = rng.random_range(1..=3);
            let xi: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
            let eta: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
            let gap = convexity_gap(&xi, &eta, p);
            let reference = reference_gap(&xi, &eta, p);
            worst = worst.min(gap);
            mismatch = mismatch.max((gap - reference).abs() / (1.0 + reference.abs()));
        }
    }
    ok_if(
        worst >= -1e-12 && mismatch <= 1e-10,
        format!("min gap {worst:.3e} over 4 x 10^4 pairs, max deviation from reference {mismatch:.1e}"),
    )
}

fn poincare() -> Check {
    let c1 = poincare_constant(&interval(256), 2.0).map_err(e)?.value;
    let sq = Arc::new(build_rectangle_mesh([0.0, 0.0], [1.0, 1.0], 64, 64).map_err(e)?);
    let c2 = poincare_constant(&sq, 2.0).map_err(e)?.value;
    // First Dirichlet eigenvalues: pi^2 on (0,1), 2 pi^2 on the unit square.
    let (e1, e2) = (1.0 / PI, 1.0 / (PI * 2f64.sqrt()));
    let (r1, r2) = ((c1 - e1).abs() / e1, (c2 - e2).abs() / e2);
    ok_if(
        r1 < 0.01 && r2 < 0.01,
        format!("interval {c1:.5} (rel {r1:.1e}), square {c2:.5} (rel {r2:.1e})"),
    )
}

fn threshold_table() -> Check {
    // (gamma, m, p, ex, cin, plap) with bounds 2 - 1/m, 3 - 2/m and
    // 1 + p(m-1)/((p-1)m); m = inf gives 2, 3 and 1 + p/(p-1).
    let inf = f64::INFINITY;
    let table = [
        (1.2, 2.0, 2.0, true, true, true),
        (1.8, 2.0, 2.0, false, true, true),
        (2.5, 2.0, 2.0, false, false, false),
        (1.5, 2.0, 2.0, false, true, true),
        (1.76, 2.0, 3.0, false, true, false),
        (1.74, 2.0, 3.0, false, true, true),
        (1.99, inf, 2.0, true, true, true),
        (2.0, inf, 2.0, false, true, true),
        (2.9, inf, 2.0, false, true, true),
        (3.0, inf, 2.0, false, false, false),
        (2.4, inf, 4.0, false, true, false),
        (1.1, 1.0, 2.0, false, false, false),
    ];
    let bad: Vec<usize> = table
        .iter()
        .enumerate()
        .filter(|(_, &(g, m, p, ex, cin, plap))| {
            let v = thresholds(g, m, p);
            (v.ex_gamma, v.cin_gamma, v.plap_gamma) != (ex, cin, plap)
        })
        .map(|(i, _)| i)
        .collect();
    ok_if(
        bad.is_empty(),
        format!("{} of {} cases match, mismatches {bad:?}", table.len() - bad.len(), table.len()),
    )
}

fn integrability() -> Check {
    let m = interval(32);
    let check = |gamma: f64, t: f64| u0_integrability_check(&unit_problem(&m, gamma), t, &m).map_err(e);
    let (a, va) = check(2.0, 0.9)?;
    let (b, _) = check(3.0, 0.9)?;
    let (c, _) = check(1.0001, 0.75)?;
    // int_0^1 dist^-0.9 = 2 int_0^(1/2) x^-0.9 = 2 (1/2)^0.1 / 0.1.
    let closed = 2.0 * 0.5f64.powf(0.1) / 0.1;
    ok_if(
        a && !b && c && (va - closed).abs() <= 1e-10 * closed,
        format!("verdicts ({a}, {b}, {c}) expected (true, false, true), integral {va:.10} vs {closed:.10}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("manufactured convergence", manufactured),
        ("uniqueness", uniqueness),
        ("comparison", comparison),
        ("scheme monotonicity", monotonicity),
        ("energy thresholds", energy_thresholds),
        ("boundary exponent", boundary_exponent),
        ("linear-case threshold", linear_threshold),
        ("convexity inequality", convexity),
        ("poincare constant", poincare),
        ("threshold predicates", threshold_table),
        ("integrability criterion", integrability),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "[{tag}] {:>2} {name:<26} {detail} ({:.1}s)",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
