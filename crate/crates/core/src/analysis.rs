//! Numerical certificates built on the solver: comparison and uniqueness
//! runs, energy-threshold probes, boundary exponents, the distance-weighted
//! integrability test and the linear-case smallness condition.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{boundary_distance, Domain, Field, Mesh};
use crate::nonlinearity::{
    check_ordered_data, check_slope_monotonicity, default_sample_grid, truncate_scalar,
    ProblemSpec,
};
use crate::plap::poincare_constant;
use crate::solver::{outer_solve, outer_solve_scaled, Outcome, SolveReport, SolverConfig};

pub const DEFAULT_FLOOR: f64 = 1e-14;
/// Energy slopes below this count as refinement-stable (finite energy).
pub const FINITE_ENERGY_SLOPE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCertificate {
    pub k_cap: f64,
    pub epsilon: f64,
    /// `int G_1(x, v_1) psi_1`.
    pub psi1_pairing: f64,
    /// `int G_1(x, v_2) psi_2`.
    pub psi2_pairing: f64,
    /// `int (G_1(x,v_1) v_1^(1-p) - G_1(x,v_2) v_2^(1-p)) (v_1^p - v_2^p)_+`.
    pub final_sign_quantity: f64,
    /// Measure of `{v_1 > v_2 + tol}` relative to `|Omega|`.
    pub violation_measure: f64,
    pub tol: f64,
}

/// [`comparison_certificate_with`] using floor `1e-14` and tolerance `1e-8`.
pub fn comparison_certificate(
    v1: &Field,
    v2: &Field,
    spec_g1: &ProblemSpec,
    p: f64,
    k_cap: Option<f64>,
    epsilon: f64,
) -> Result<ComparisonCertificate> {
    comparison_certificate_with(v1, v2, spec_g1, p, k_cap, epsilon, DEFAULT_FLOOR, 1e-8)
}

/// Evaluates the comparison certificate by lumped nodal quadrature.
///
/// `G_1` and the power denominators see `max(v, floor)`. `k_cap` defaults to
/// `sup |v_1^p - v_2^p| + 1`, which leaves `T_k` inactive.
#[allow(clippy::too_many_arguments)]
pub fn comparison_certificate_with(
    v1: &Field,
    v2: &Field,
    spec_g1: &ProblemSpec,
    p: f64,
    k_cap: Option<f64>,
    epsilon: f64,
    floor: f64,
    tol: f64,
) -> Result<ComparisonCertificate> {
    v1.same_mesh(v2)?;
    v1.same_mesh(spec_g1.f())?;
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("p must be > 1, got {p}")));
    }
    let mesh = v1.mesh();
    let w = mesh.lumped_weights();
    let (a, b) = (v1.values(), v2.values());
    let k = match k_cap {
        Some(k) if k > 0.0 => k,
        Some(k) => return Err(Error::InvalidArgument(format!("k_cap must be > 0, got {k}"))),
        None => {
            a.iter()
                .zip(b)
                .fold(0.0f64, |m, (x, y)| m.max((x.powf(p) - y.powf(p)).abs()))
                + 1.0
        }
    };
    let (mut s, mut psi1, mut psi2, mut bad) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..mesh.node_count() {
        let (x, y) = (a[i].max(floor), b[i].max(floor));
        let (g1, g2) = (spec_g1.rhs_at(i, x), spec_g1.rhs_at(i, y));
        let gap = (x.powf(p) - y.powf(p)).max(0.0);
        if gap > 0.0 {
            s += w[i] * (g1 / x.powf(p - 1.0) - g2 / y.powf(p - 1.0)) * gap;
        }
        let (xe, ye) = (x + epsilon, y + epsilon);
        let tk = truncate_scalar((xe.powf(p) - ye.powf(p)).max(0.0), k);
        if tk > 0.0 {
            psi1 += w[i] * g1 * tk / xe.powf(p - 1.0);
            psi2 += w[i] * g2 * tk / ye.powf(p - 1.0);
        }
        if a[i] > b[i] + tol {
            bad += w[i];
        }
    }
    Ok(ComparisonCertificate {
        k_cap: k,
        epsilon,
        psi1_pairing: psi1,
        psi2_pairing: psi2,
        final_sign_quantity: s,
        violation_measure: (bad / mesh.domain().measure()).clamp(0.0, 1.0),
        tol,
    })
}

fn require_converged(report: &SolveReport, u: &Field) -> Result<()> {
    match report.outcome {
        Outcome::Converged => Ok(()),
        Outcome::Diverged => Err(Error::Diverged {
            norm: u.sup_norm(),
            cap: f64::NAN,
        }),
        Outcome::MaxLevel => Err(Error::NotConverged {
            what: "outer level loop",
            iterations: report.levels.len(),
            residual: report.levels.last().map_or(f64::NAN, |l| l.level_change),
        }),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    /// `v_1 <= v_2 + tol_cmp` at every node.
    pub holds: bool,
    pub tol_cmp: f64,
    /// `max_i (v_1 - v_2)`.
    pub max_excess: f64,
    pub certificate: ComparisonCertificate,
    pub report1: SolveReport,
    pub report2: SolveReport,
    #[serde(skip)]
    pub v1: Field,
    #[serde(skip)]
    pub v2: Field,
}

/// Solves both problems and checks `v_1 <= v_2`.
///
/// Refuses to run unless `G_1 <= G_2` on the sample grid and at least one
/// spec passes the slope-monotonicity check.
pub fn run_comparison_test(
    spec1: &ProblemSpec,
    spec2: &ProblemSpec,
    cfg: &SolverConfig,
) -> Result<ComparisonReport> {
    let grid = default_sample_grid();
    if !check_ordered_data(spec1, spec2, &grid)? {
        return Err(Error::HypothesisNotSatisfied(
            "G_1(x, s) <= G_2(x, s) fails on the sample grid".into(),
        ));
    }
    if !check_slope_monotonicity(spec1, &grid)? && !check_slope_monotonicity(spec2, &grid)? {
        return Err(Error::HypothesisNotSatisfied(
            "neither problem has a strictly decreasing F(x, s) s^(1-p)".into(),
        ));
    }
    if spec1.p() != spec2.p() {
        return Err(Error::InvalidProblem("both problems must share p".into()));
    }
    let (r1, r2) = rayon::join(|| outer_solve(spec1, cfg), || outer_solve(spec2, cfg));
    let ((v1, report1), (v2, report2)) = (r1?, r2?);
    require_converged(&report1, &v1)?;
    require_converged(&report2, &v2)?;
    let tol_cmp = cfg.tol_cmp();
    let max_excess = v1
        .values()
        .iter()
        .zip(v2.values())
        .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b));
    let certificate =
        comparison_certificate_with(&v1, &v2, spec1, spec1.p(), None, 0.0, DEFAULT_FLOOR, tol_cmp)?;
    Ok(ComparisonReport {
        holds: max_excess <= tol_cmp,
        tol_cmp,
        max_excess,
        certificate,
        report1,
        report2,
        v1,
        v2,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    pub scales: Vec<f64>,
    /// Largest sup-norm distance between any two solutions.
    pub max_pairwise: f64,
    pub tolerance: f64,
    pub agree: bool,
    #[serde(skip)]
    pub solutions: Vec<Field>,
}

/// Warm-start multipliers `10^t` for `t` evenly spaced in `[-1, 1]`.
pub fn start_scales(n_starts: usize) -> Vec<f64> {
    match n_starts {
        0 => Vec::new(),
        1 => vec![1.0],
        n => (0..n)
            .map(|i| 10f64.powf(-1.0 + 2.0 * i as f64 / (n - 1) as f64))
            .collect(),
    }
}

/// Runs [`outer_solve_scaled`] from `n_starts` scaled warm starts and
/// compares the results pairwise.
pub fn uniqueness_probe(
    spec: &ProblemSpec,
    cfg: &SolverConfig,
    n_starts: usize,
) -> Result<UniquenessReport> {
    if n_starts == 0 {
        return Err(Error::InvalidArgument("n_starts must be >= 1".into()));
    }
    let scales = start_scales(n_starts);
    let tolerance = 10.0 * cfg.outer_tol;
    let mesh = spec.mesh();
    if spec.has_zero_data() {
        return Ok(UniquenessReport {
            scales,
            max_pairwise: 0.0,
            tolerance,
            agree: true,
            solutions: vec![Field::zeros(mesh); n_starts],
        });
    }
    if !check_slope_monotonicity(spec, &default_sample_grid())? {
        return Err(Error::HypothesisNotSatisfied(
            "F(x, s) s^(1-p) is not strictly decreasing on the sample grid".into(),
        ));
    }
    let (f, g) = (spec.f().values(), spec.g().values());
    if mesh.interior_nodes().any(|i| !(f[i] + g[i] > 0.0)) {
        return Err(Error::HypothesisNotSatisfied(
            "f + g must be positive at every interior node".into(),
        ));
    }
    let runs: Vec<Result<(Field, SolveReport)>> = scales
        .par_iter()
        .map(|&s| outer_solve_scaled(spec, cfg, s))
        .collect();
    let mut solutions = Vec::with_capacity(n_starts);
    for run in runs {
        let (u, rep) = run?;
        require_converged(&rep, &u)?;
        solutions.push(u);
    }
    let mut max_pairwise: f64 = 0.0;
    for i in 0..solutions.len() {
        for j in i + 1..solutions.len() {
            let d = solutions[i]
                .values()
                .iter()
                .zip(solutions[j].values())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            max_pairwise = max_pairwise.max(d);
        }
    }
    Ok(UniquenessReport {
        scales,
        max_pairwise,
        tolerance,
        agree: max_pairwise <= tolerance,
        solutions,
    })
}

/// Upper bounds on `gamma` of the three threshold predicates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdBounds {
    pub ex: f64,
    pub cin: f64,
    pub plap: f64,
}

/// `2 - 1/m`, `3 - 2/m`, `1 + p(m-1)/((p-1)m)`; `m = inf` gives `2, 3,
/// 1 + p/(p-1)`.
pub fn threshold_bounds(m: f64, p: f64) -> ThresholdBounds {
    if m.is_infinite() {
        ThresholdBounds {
            ex: 2.0,
            cin: 3.0,
            plap: 1.0 + p / (p - 1.0),
        }
    } else {
        ThresholdBounds {
            ex: 2.0 - 1.0 / m,
            cin: 3.0 - 2.0 / m,
            plap: 1.0 + p * (m - 1.0) / ((p - 1.0) * m),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVerdict {
    pub gamma: f64,
    /// `None` stands for `m = inf`.
    pub m: Option<f64>,
    pub p: f64,
    pub ex_gamma: bool,
    pub cin_gamma: bool,
    pub plap_gamma: bool,
    /// Slope of `log energy` against `log(1/h)`.
    pub observed_slope: Option<f64>,
    /// `observed_slope < 0.05`.
    pub finite_energy: Option<bool>,
    pub mesh_sizes: Vec<f64>,
    pub energies: Vec<f64>,
}

/// The three predicates for `(gamma, m, p)` with no refinement data.
pub fn thresholds(gamma: f64, m: f64, p: f64) -> ThresholdVerdict {
    let b = threshold_bounds(m, p);
    ThresholdVerdict {
        gamma,
        m: m.is_finite().then_some(m),
        p,
        ex_gamma: gamma < b.ex,
        cin_gamma: gamma < b.cin,
        plap_gamma: gamma < b.plap,
        observed_slope: None,
        finite_energy: None,
        mesh_sizes: Vec::new(),
        energies: Vec::new(),
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Solves on the spec's mesh and `n_refinements` uniform refinements of it
/// and fits the growth rate of the energy.
pub fn energy_refinement_probe(
    spec: &ProblemSpec,
    cfg: &SolverConfig,
    n_refinements: usize,
) -> Result<ThresholdVerdict> {
    if n_refinements < 3 {
        return Err(Error::InvalidArgument(format!(
            "energy_refinement_probe needs >= 3 refinements, got {n_refinements}"
        )));
    }
    let mut meshes = vec![Arc::clone(spec.mesh())];
    for _ in 0..n_refinements {
        let next = meshes.last().unwrap().refine()?;
        meshes.push(Arc::new(next));
    }
    let energies: Vec<Result<f64>> = meshes
        .par_iter()
        .map(|m| {
            let s = spec.on_mesh(m)?;
            let (u, rep) = outer_solve(&s, cfg)?;
            require_converged(&rep, &u)?;
            Ok(rep.energy)
        })
        .collect();
    let energies = energies.into_iter().collect::<Result<Vec<f64>>>()?;
    let mesh_sizes: Vec<f64> = meshes.iter().map(|m| m.mesh_size()).collect();
    let mut verdict = thresholds(spec.gamma(), spec.m(), spec.p());
    let slope = if energies.iter().all(|&e| e > 0.0) {
        let xs: Vec<f64> = mesh_sizes.iter().map(|h| -h.ln()).collect();
        let ys: Vec<f64> = energies.iter().map(|e| e.ln()).collect();
        ls_slope(&xs, &ys)
    } else {
        0.0
    };
    verdict.observed_slope = Some(slope);
    verdict.finite_energy = Some(slope < FINITE_ENERGY_SLOPE);
    verdict.mesh_sizes = mesh_sizes;
    verdict.energies = energies;
    Ok(verdict)
}

/// Default fit band `[3h, 30h]`.
pub fn default_fit_band(mesh: &Mesh) -> (f64, f64) {
    let h = mesh.mesh_size();
    (3.0 * h, 30.0 * h)
}

/// Least-squares exponent `beta` of `u ~ c delta^beta` over interior nodes
/// with `d_lo <= delta <= d_hi`.
pub fn boundary_exponent_fit(u: &Field, delta: &Field, band: (f64, f64)) -> Result<f64> {
    u.same_mesh(delta)?;
    let (lo, hi) = band;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in u.mesh().interior_nodes() {
        let d = delta.values()[i];
        if d >= lo && d <= hi {
            let v = u.values()[i];
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "u must be positive on the fit band, found {v} at node {i}"
                )));
            }
            xs.push(d.ln());
            ys.push(v.ln());
        }
    }
    let distinct = {
        let mut d = xs.clone();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d.len()
    };
    if xs.len() < 4 || distinct < 2 {
        return Err(Error::InvalidArgument(format!(
            "fit band [{lo:e}, {hi:e}] holds {} nodes, need >= 4",
            xs.len()
        )));
    }
    Ok(ls_slope(&xs, &ys))
}

/// `int_s0^s1 s^k ds` for `0 <= s0 < s1`; infinite when `s0 = 0` and
/// `k <= -1`.
fn power_moment(k: f64, s0: f64, s1: f64) -> f64 {
    if s0 == 0.0 && k <= -1.0 {
        return f64::INFINITY;
    }
    if k == -1.0 {
        (s1 / s0).ln()
    } else {
        (s1.powf(k + 1.0) - s0.powf(k + 1.0)) / (k + 1.0)
    }
}

/// `int_Omega F delta^a` from the level-set profile `G(s) = int_{delta = s} F`
/// on the grid `s_j`, linear between grid points, with exact power moments.
fn level_set_integral(s: &[f64], profile: &[f64], a: f64) -> f64 {
    let mut total = 0.0;
    for j in 0..s.len() - 1 {
        let (s0, s1) = (s[j], s[j + 1]);
        let (g0, g1) = (profile[j], profile[j + 1]);
        let beta = (g1 - g0) / (s1 - s0);
        let alpha = g0 - beta * s0;
        if alpha != 0.0 {
            total += alpha * power_moment(a, s0, s1);
        }
        if beta != 0.0 {
            total += beta * power_moment(a + 1.0, s0, s1);
        }
    }
    total
}

/// `int_Omega field * delta^a`, exact for P1 data on intervals.
pub fn distance_weighted_integral(field: &Field, a: f64) -> Result<f64> {
    let mesh = field.mesh();
    match *mesh.domain() {
        Domain::Interval { a: lo, b: hi } => {
            let n = mesh.cells()[0];
            let half = (hi - lo) / 2.0;
            let steps = n.div_ceil(2).max(1);
            let (mut s, mut prof) = (Vec::new(), Vec::new());
            for j in 0..=steps {
                let sj = if j == steps {
                    half
                } else {
                    (hi - lo) * j as f64 / n as f64
                };
                s.push(sj);
                prof.push(field.evaluate([lo + sj, 0.0]) + field.evaluate([hi - sj, 0.0]));
            }
            Ok(level_set_integral(&s, &prof, a))
        }
        Domain::Rectangle { low, high } => {
            let (n1, n2) = (mesh.cells()[0], mesh.cells()[1]);
            let (w, h) = (high[0] - low[0], high[1] - low[1]);
            let inr = w.min(h) / 2.0;
            let hs = (w / n1 as f64).min(h / n2 as f64);
            let steps = ((inr / hs).ceil() as usize).max(1);
            let per_side = 2 * n1.max(n2);
            let (mut s, mut prof) = (Vec::new(), Vec::new());
            for j in 0..=steps {
                let sj = inr * j as f64 / steps as f64;
                let (x0, x1, y0, y1) = (low[0] + sj, high[0] - sj, low[1] + sj, high[1] - sj);
                let sides = [
                    ([x0, y0], [x1, y0]),
                    ([x1, y0], [x1, y1]),
                    ([x1, y1], [x0, y1]),
                    ([x0, y1], [x0, y0]),
                ];
                let mut g = 0.0;
                for (pa, pb) in sides {
                    let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
                    if len == 0.0 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for k in 0..=per_side {
                        let t = k as f64 / per_side as f64;
                        let pt = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                        let wk = if k == 0 || k == per_side { 0.5 } else { 1.0 };
                        acc += wk * field.evaluate(pt);
                    }
                    g += acc * len / per_side as f64;
                }
                s.push(sj);
                prof.push(g);
            }
            Ok(level_set_integral(&s, &prof, a))
        }
    }
}

/// Tests `int f delta^(t(1-gamma)) < inf` on `mesh` and two refinements.
///
/// The verdict is true when every value is finite and the growth slope of
/// the values against `1/h` stays below `0.05`. Returns the verdict and the
/// value on the finest mesh.
pub fn u0_integrability_check(spec: &ProblemSpec, t: f64, mesh: &Arc<Mesh>) -> Result<(bool, f64)> {
    if !(t > 0.5) {
        return Err(Error::InvalidArgument(format!("t must be > 1/2, got {t}")));
    }
    if !(spec.gamma() > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "integrability check needs gamma > 1, got {}",
            spec.gamma()
        )));
    }
    let a = t * (1.0 - spec.gamma());
    let mut meshes = vec![Arc::clone(mesh)];
    for _ in 0..2 {
        let next = Arc::new(meshes.last().unwrap().refine()?);
        meshes.push(next);
    }
    let mut values = Vec::new();
    for m in &meshes {
        let f = spec.on_mesh(m)?.f().clone();
        values.push(distance_weighted_integral(&f, a)?);
    }
    let last = *values.last().unwrap();
    if !values.iter().all(|v| v.is_finite()) {
        return Ok((false, last));
    }
    if values.iter().all(|&v| v > 0.0) {
        let xs: Vec<f64> = meshes.iter().map(|m| -m.mesh_size().ln()).collect();
        let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        return Ok((ls_slope(&xs, &ys) < FINITE_ENERGY_SLOPE, last));
    }
    Ok((true, last))
}

/// Linear case `q = p - 1`: checks `|g|_inf < 1 / (C_over C_p^p)` with `C_p`
/// from [`poincare_constant`]. Returns the verdict, `|g|_inf` and the
/// threshold.
pub fn smallness_threshold_check(spec: &ProblemSpec, mesh: &Arc<Mesh>) -> Result<(bool, f64, f64)> {
    let p = spec.p();
    if (spec.q() - (p - 1.0)).abs() > 1e-12 {
        return Err(Error::InvalidProblem(format!(
            "smallness check needs q = p - 1, got q = {} with p = {p}",
            spec.q()
        )));
    }
    let local = spec.on_mesh(mesh)?;
    let cp = poincare_constant(mesh, p)?;
    let threshold = 1.0 / (spec.c_over() * cp.value.powf(p));
    let g_inf = local.g().sup_norm();
    Ok((g_inf < threshold, g_inf, threshold))
}

/// Boundary distance of the spec's mesh, re-exported for probes.
pub fn delta_of(spec: &ProblemSpec) -> Field {
    boundary_distance(spec.mesh())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_interval_mesh, build_rectangle_mesh};
    use crate::nonlinearity::{make_power_problem, Coefficient, ProblemDocument};

    fn interval(n: usize) -> Arc<Mesh> {
        Arc::new(build_interval_mesh(0.0, 1.0, n).unwrap())
    }

    fn model(m: &Arc<Mesh>, gamma: f64, q: f64, f: f64, g: f64) -> ProblemSpec {
        make_power_problem(2.0, gamma, q, Field::constant(m, f), Field::constant(m, g)).unwrap()
    }

    #[test]
    fn certificate_examples() {
        let m = interval(10);
        let spec = model(&m, 1.0, 0.0, 1.0, 0.0);
        let v1 = Field::constant(&m, 2.0);
        let v2 = Field::constant(&m, 1.0);
        let c = comparison_certificate(&v1, &v2, &spec, 2.0, None, 0.0).unwrap();
        assert!((c.final_sign_quantity + 2.25).abs() < 1e-12);
        assert_eq!(c.violation_measure, 1.0);
        assert_eq!(c.k_cap, 4.0);
        // without T_k the pairings split S
        assert!((c.psi1_pairing - c.psi2_pairing - c.final_sign_quantity).abs() < 1e-12);

        let same = comparison_certificate(&v1, &v1, &spec, 2.0, None, 0.0).unwrap();
        assert_eq!(same.final_sign_quantity, 0.0);
        assert_eq!(same.violation_measure, 0.0);
        let below = comparison_certificate(&v2, &v1, &spec, 2.0, None, 0.0).unwrap();
        assert_eq!(below.final_sign_quantity, 0.0);
        assert!(comparison_certificate(&v1, &v2, &spec, 2.0, None, -1.0).is_err());
        let other = Field::zeros(&interval(5));
        assert!(comparison_certificate(&v1, &other, &spec, 2.0, None, 0.0).is_err());
    }

    #[test]
    fn truncated_certificate_caps_pairings() {
        let m = interval(10);
        let spec = model(&m, 1.0, 0.0, 1.0, 0.0);
        let v1 = Field::constant(&m, 2.0);
        let v2 = Field::constant(&m, 1.0);
        let c = comparison_certificate(&v1, &v2, &spec, 2.0, Some(1.0), 0.5).unwrap();
        // T_1((2.5^2 - 1.5^2)_+) = 1
        assert!((c.psi1_pairing - 1.0 / 2.0 / 2.5).abs() < 1e-12);
        assert!((c.psi2_pairing - 1.0 / 1.0 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn threshold_table() {
        let v = thresholds(1.5, f64::INFINITY, 2.0);
        assert!(v.ex_gamma && v.cin_gamma && v.plap_gamma);
        assert_eq!(threshold_bounds(2.0, 3.0).plap, 1.75);
        assert_eq!(threshold_bounds(2.0, 2.0).ex, 1.5);
        assert_eq!(threshold_bounds(2.0, 2.0).cin, 2.0);
        let b = threshold_bounds(f64::INFINITY, 4.0);
        assert_eq!((b.ex, b.cin), (2.0, 3.0));
        assert!((b.plap - 7.0 / 3.0).abs() < 1e-15);
        assert!(!thresholds(2.0, f64::INFINITY, 2.0).ex_gamma);
    }

    #[test]
    fn exponent_fit_on_pure_powers() {
        let m = interval(200);
        let d = boundary_distance(&m);
        let band = default_fit_band(&m);
        assert!((boundary_exponent_fit(&d, &d, band).unwrap() - 1.0).abs() < 1e-12);
        let r = d.map(|v| v.sqrt());
        assert!((boundary_exponent_fit(&r, &d, band).unwrap() - 0.5).abs() < 1e-12);
        assert!(boundary_exponent_fit(&d, &d, (0.5, 0.5)).is_err());
        assert!(boundary_exponent_fit(&Field::zeros(&m), &d, band).is_err());
    }

    #[test]
    fn weighted_integral_closed_forms() {
        let m = interval(16);
        let one = Field::constant(&m, 1.0);
        let exact = 2.0 * 0.5f64.powf(0.1) / 0.1;
        assert!((distance_weighted_integral(&one, -0.9).unwrap() - exact).abs() < 1e-12);
        assert!(distance_weighted_integral(&one, -1.8).unwrap().is_infinite());
        let x = Field::from_fn(&m, |p| p[0]);
        // int_0^1 x min(x, 1-x) dx = 1/8
        assert!((distance_weighted_integral(&x, 1.0).unwrap() - 0.125).abs() < 1e-12);

        let sq = Arc::new(build_rectangle_mesh([0.0, 0.0], [1.0, 1.0], 8, 8).unwrap());
        let one = Field::constant(&sq, 1.0);
        assert!((distance_weighted_integral(&one, 0.0).unwrap() - 1.0).abs() < 1e-12);
        // int_square delta = int_0^1/2 s 4(1-2s) ds = 1/6
        assert!((distance_weighted_integral(&one, 1.0).unwrap() - 1.0 / 6.0).abs() < 1e-3);
    }

    #[test]
    fn integrability_verdicts() {
        let m = interval(32);
        let spec2 = model(&m, 2.0, 0.0, 1.0, 0.0);
        let (ok, v) = u0_integrability_check(&spec2, 0.9, &m).unwrap();
        assert!(ok);
        assert!((v - 2.0 * 0.5f64.powf(0.1) / 0.1).abs() < 1e-10);
        let spec3 = model(&m, 3.0, 0.0, 1.0, 0.0);
        assert_eq!(u0_integrability_check(&spec3, 0.9, &m).unwrap().0, false);
        let spec_mild = model(&m, 1.0001, 0.0, 1.0, 0.0);
        assert!(u0_integrability_check(&spec_mild, 0.7, &m).unwrap().0);
        assert!(u0_integrability_check(&spec2, 0.5, &m).is_err());
        let spec1 = model(&m, 1.0, 0.0, 1.0, 0.0);
        assert!(u0_integrability_check(&spec1, 0.9, &m).is_err());
    }

    #[test]
    fn smallness_examples() {
        let m = interval(200);
        for (g, expect) in [(5.0, true), (15.0, false), (0.0, true)] {
            let spec = model(&m, 1.0, 1.0, 1.0, g);
            let (ok, gi, thr) = smallness_threshold_check(&spec, &m).unwrap();
            assert_eq!(ok, expect);
            assert_eq!(gi, g);
            assert!((thr - std::f64::consts::PI.powi(2)).abs() < 1e-3);
        }
        let spec = model(&m, 1.0, 0.5, 1.0, 1.0);
        assert!(smallness_threshold_check(&spec, &m).is_err());
    }

    #[test]
    fn start_scales_span_two_decades() {
        assert_eq!(start_scales(1), vec![1.0]);
        let s = start_scales(3);
        assert!((s[0] - 0.1).abs() < 1e-15 && (s[1] - 1.0).abs() < 1e-15 && (s[2] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn uniqueness_preconditions() {
        let m = interval(32);
        let cfg = SolverConfig::default();
        let doc = ProblemDocument::power(2.0, 1.0, 1.0, Coefficient::constant(0.0), Coefficient::constant(1.0));
        let linear = ProblemSpec::new(doc, &m).unwrap();
        assert!(matches!(
            uniqueness_probe(&linear, &cfg, 3),
            Err(Error::HypothesisNotSatisfied(_))
        ));
        let zero = model(&m, 1.0, 0.5, 0.0, 0.0);
        let rep = uniqueness_probe(&zero, &cfg, 3).unwrap();
        assert!(rep.agree && rep.solutions.iter().all(|u| u.is_identically_zero()));
    }

    #[test]
    fn comparison_refuses_crossing_data() {
        let m = interval(16);
        let a = model(&m, 1.0, 0.0, 2.0, 0.0);
        let b = model(&m, 1.0, 0.0, 1.0, 0.0);
        assert!(matches!(
            run_comparison_test(&a, &b, &SolverConfig::default()),
            Err(Error::HypothesisNotSatisfied(_))
        ));
    }
}
