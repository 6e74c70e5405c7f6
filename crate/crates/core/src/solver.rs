//! Truncation-approximation scheme: a damped Picard solve of each truncated
//! level problem, an outer loop over increasing truncation levels, and the
//! per-level audits reported in [`SolveReport`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Field;
use crate::nonlinearity::{truncate_scalar, ProblemSpec, TruncationLevel};
use crate::plap::{PLaplacian, PlapOptions};

/// Oscillating fixed-point changes that shrink by less than this factor
/// halve the relaxation parameter.
const OSCILLATION_RATIO: f64 = 0.9;
/// Number of trailing level transitions inspected by the growth guard.
const GROWTH_WINDOW: usize = 4;
const GROWTH_FRACTION: f64 = 0.75;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Explicit strictly increasing level list; overrides `n0`/`n_max`.
    pub n_schedule: Option<Vec<u64>>,
    pub n0: u64,
    /// Last level of the doubling schedule `n0, 2 n0, ...`.
    pub n_max: u64,
    /// Initial relaxation `omega` of the Picard step.
    pub omega: f64,
    /// Halve `omega` when the iteration oscillates without contracting.
    pub adaptive_omega: bool,
    pub min_omega: f64,
    /// Stop when the undamped fixed-point change `|T(w) - w|_inf` is below this.
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub outer_tol: f64,
    /// Shields the evaluation of `h` at zero; never written into iterates.
    pub u_floor: f64,
    /// Divergence cap is `norm_cap_factor * (1 + |f|_inf + |g|_inf)`.
    pub norm_cap_factor: f64,
    /// Flag divergence when the level norms grow like `n` while the `k`
    /// truncation is active.
    pub growth_guard: bool,
    pub plap: PlapOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_schedule: None,
            n0: 1,
            n_max: 1 << 14,
            omega: 0.5,
            adaptive_omega: true,
            min_omega: 1.0 / 64.0,
            inner_tol: 1e-11,
            inner_max_iter: 5000,
            outer_tol: 1e-8,
            u_floor: 1e-14,
            norm_cap_factor: 1e6,
            growth_guard: true,
            plap: PlapOptions::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return bad("solver.omega must lie in (0, 1]");
        }
        if !(self.min_omega > 0.0 && self.min_omega <= self.omega) {
            return bad("solver.min_omega must lie in (0, omega]");
        }
        if !(self.inner_tol > 0.0) || !(self.outer_tol > 0.0) {
            return bad("solver tolerances must be > 0");
        }
        if !(self.u_floor > 0.0) {
            return bad("solver.u_floor must be > 0");
        }
        if !(self.norm_cap_factor > 0.0) {
            return bad("solver.norm_cap_factor must be > 0");
        }
        if self.inner_max_iter == 0 {
            return bad("solver.inner_max_iter must be >= 1");
        }
        let s = self.schedule();
        if s.is_empty() || s[0] == 0 {
            return bad("solver.n_schedule must be nonempty with levels >= 1");
        }
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return bad("solver.n_schedule must be strictly increasing");
        }
        if self.n_schedule.is_none() && self.n_max < self.n0 {
            return bad("solver.n_max must be >= n0");
        }
        self.plap.validate()
    }

    pub fn schedule(&self) -> Vec<u64> {
        if let Some(s) = &self.n_schedule {
            return s.clone();
        }
        let mut out = Vec::new();
        let mut n = self.n0.max(1);
        while n <= self.n_max {
            out.push(n);
            match n.checked_mul(2) {
                Some(m) => n = m,
                None => break,
            }
        }
        out
    }

    /// Comparison tolerance `max(1e-8, 10 outer_tol)`.
    pub fn tol_cmp(&self) -> f64 {
        (10.0 * self.outer_tol).max(1e-8)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Converged,
    Diverged,
    MaxLevel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub n: u64,
    pub inner_iterations: usize,
    /// Last undamped fixed-point change `|T(w) - w|_inf`.
    pub inner_change: f64,
    pub omega: f64,
    pub energy: f64,
    pub lpstar_norm: f64,
    pub sup_norm: f64,
    pub min_interior: f64,
    /// `|u_n - u_prev|_inf` against the previous level (or the warm start).
    pub level_change: f64,
    /// `max_i (u_prev - u_n)_+` against the previous level.
    pub monotonicity_defect: f64,
    /// `C_under int f_n u^(1-gamma) + C_over int g_n u^(1+q)`.
    pub energy_bound: f64,
    /// Largest nodal value of the truncated load.
    pub max_load: f64,
    pub clamped_weights: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub p: f64,
    pub gamma: f64,
    pub q: f64,
    pub cells: Vec<usize>,
    pub outcome: Outcome,
    /// Why the run was flagged as diverged.
    pub divergence: Option<String>,
    pub levels: Vec<LevelRecord>,
    /// `max_n max_i (u_n - u_(n+1))_+` over consecutive levels.
    pub monotonicity_audit: f64,
    /// Largest `energy - energy_bound` over levels; `<= 0` when the
    /// discrete energy inequality holds.
    pub energy_audit_excess: f64,
    pub energy_audit_ok: bool,
    /// Weak residual of the final field against the untruncated load.
    pub fixed_point_residual: f64,
    pub energy: f64,
    /// Sobolev exponent used for `lpstar_norm`; `None` stands for infinity.
    pub p_star: Option<f64>,
    pub total_inner_iterations: usize,
    pub clamped_weights: usize,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.outcome == Outcome::Converged
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `Np/(N-p)` for `p < N`, otherwise `None` (the sup norm is used).
pub fn sobolev_exponent(dimension: usize, p: f64) -> Option<f64> {
    let n = dimension as f64;
    (p < n).then(|| n * p / (n - p))
}

struct InnerOutcome {
    u: Vec<f64>,
    iterations: usize,
    change: f64,
    clamped: usize,
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm_cap(spec: &ProblemSpec, cfg: &SolverConfig) -> f64 {
    cfg.norm_cap_factor * (1.0 + spec.f().sup_norm() + spec.g().sup_norm())
}

fn picard(
    op: &PLaplacian,
    spec: &ProblemSpec,
    level: TruncationLevel,
    init: &[f64],
    cfg: &SolverConfig,
    omega: &mut f64,
) -> Result<InnerOutcome> {
    let cap = norm_cap(spec, cfg);
    let mut w = init.to_vec();
    let mut prev_d: Option<Vec<f64>> = None;
    let mut prev_norm = f64::INFINITY;
    let mut clamped = 0;
    let mut change = f64::INFINITY;
    // for p = 2, |T(a) - T(b)|_inf <= max(torsion) |R(a) - R(b)|_inf
    let torsion = if op.p() == 2.0 {
        let ones = vec![1.0; w.len()];
        Some(sup(&op.solve(&ones, None)?.u))
    } else {
        None
    };
    for it in 1..=cfg.inner_max_iter {
        let rhs = level.rhs(spec, &w, cfg.u_floor);
        let sol = op.solve(&rhs, Some(&w))?;
        clamped += sol.clamped_weights;
        if let Some(tau) = torsion {
            let next = level.rhs(spec, &sol.u, cfg.u_floor);
            let bound = tau * sup_diff(&next, &rhs);
            if bound < cfg.inner_tol {
                let u = sol.u.into_iter().map(|v| v.max(0.0)).collect();
                return Ok(InnerOutcome {
                    u,
                    iterations: it,
                    change: bound,
                    clamped,
                });
            }
        }
        let d: Vec<f64> = sol.u.iter().zip(&w).map(|(a, b)| a - b).collect();
        let dn = sup(&d);
        change = dn;
        if dn < cfg.inner_tol {
            let u = sol.u.into_iter().map(|v| v.max(0.0)).collect();
            return Ok(InnerOutcome {
                u,
                iterations: it,
                change,
                clamped,
            });
        }
        if cfg.adaptive_omega {
            if let Some(pd) = &prev_d {
                let dot: f64 = pd.iter().zip(&d).map(|(a, b)| a * b).sum();
                if dot < 0.0 && dn >= OSCILLATION_RATIO * prev_norm {
                    *omega = (*omega * 0.5).max(cfg.min_omega);
                }
            }
        }
        for (wi, di) in w.iter_mut().zip(&d) {
            *wi = (*wi + *omega * di).max(0.0);
        }
        let norm = sup(&w);
        if !(norm <= cap) {
            return Err(Error::Diverged { norm, cap });
        }
        prev_norm = dn;
        prev_d = Some(d);
    }
    Err(Error::NotConverged {
        what: "Picard iteration",
        iterations: cfg.inner_max_iter,
        residual: change,
    })
}

/// Operator options with the Newton tolerance capped at `outer_tol`, so the
/// final fixed-point residual is bounded in absolute terms.
fn plap_options(cfg: &SolverConfig) -> PlapOptions {
    let mut opts = cfg.plap.clone();
    opts.abs_tol.get_or_insert(cfg.outer_tol);
    opts
}

/// Solves the level-`n` truncated problem by damped Picard iteration from
/// `u_init`.
pub fn inner_solve(
    spec: &ProblemSpec,
    level: TruncationLevel,
    u_init: &Field,
    cfg: &SolverConfig,
) -> Result<Field> {
    cfg.validate()?;
    u_init.on_mesh(spec.mesh())?;
    if !u_init.is_dirichlet_zero() || u_init.min() < 0.0 {
        return Err(Error::InvalidArgument(
            "initial guess must be nonnegative and vanish on the boundary".into(),
        ));
    }
    let mesh = spec.mesh();
    if spec.has_zero_data() {
        return Ok(Field::zeros(mesh));
    }
    let op = PLaplacian::new(mesh, spec.p(), plap_options(cfg))?;
    let mut omega = cfg.omega;
    let out = picard(&op, spec, level, u_init.values(), cfg, &mut omega)?;
    Field::new(Arc::clone(mesh), out.u)
}

pub fn outer_solve(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<(Field, SolveReport)> {
    outer_solve_scaled(spec, cfg, 1.0)
}

/// [`outer_solve`] with the initial warm start multiplied by `warm_scale`.
pub fn outer_solve_scaled(
    spec: &ProblemSpec,
    cfg: &SolverConfig,
    warm_scale: f64,
) -> Result<(Field, SolveReport)> {
    cfg.validate()?;
    if !(warm_scale >= 0.0 && warm_scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "warm_scale must be finite and >= 0, got {warm_scale}"
        )));
    }
    let mesh = Arc::clone(spec.mesh());
    let schedule = cfg.schedule();
    let p_star = sobolev_exponent(mesh.dimension(), spec.p());
    let mut report = SolveReport {
        p: spec.p(),
        gamma: spec.gamma(),
        q: spec.q(),
        cells: mesh.cells().to_vec(),
        outcome: Outcome::MaxLevel,
        divergence: None,
        levels: Vec::new(),
        monotonicity_audit: 0.0,
        energy_audit_excess: f64::NEG_INFINITY,
        energy_audit_ok: true,
        fixed_point_residual: 0.0,
        energy: 0.0,
        p_star,
        total_inner_iterations: 0,
        clamped_weights: 0,
    };

    if spec.has_zero_data() {
        let u = Field::zeros(&mesh);
        report.levels.push(LevelRecord {
            n: schedule[0],
            inner_iterations: 0,
            inner_change: 0.0,
            omega: cfg.omega,
            energy: 0.0,
            lpstar_norm: 0.0,
            sup_norm: 0.0,
            min_interior: 0.0,
            level_change: 0.0,
            monotonicity_defect: 0.0,
            energy_bound: 0.0,
            max_load: 0.0,
            clamped_weights: 0,
        });
        report.outcome = Outcome::Converged;
        report.energy_audit_excess = 0.0;
        return Ok((u, report));
    }

    let op = PLaplacian::new(&mesh, spec.p(), plap_options(cfg))?;
    let weights = mesh.lumped_weights();
    let (f, g) = (spec.f().values(), spec.g().values());
    let warm_rhs: Vec<f64> = f
        .iter()
        .zip(g)
        .map(|(a, b)| warm_scale * (truncate_scalar(*a, 1.0) + truncate_scalar(*b, 1.0)))
        .collect();
    let mut prev = op.solve(&warm_rhs, None)?.u;
    for v in prev.iter_mut() {
        *v = v.max(0.0);
    }

    let cap = norm_cap(spec, cfg);
    let mut omega = cfg.omega;
    let mut k_active_history = Vec::new();
    let (c_under, c_over) = (spec.c_under(), spec.c_over());
    let (gamma, q) = (spec.gamma(), spec.q());

    for (idx, &n) in schedule.iter().enumerate() {
        let level = TruncationLevel::new(n)?;
        let inner = match picard(&op, spec, level, &prev, cfg, &mut omega) {
            Ok(r) => r,
            Err(Error::Diverged { norm, cap }) => {
                report.outcome = Outcome::Diverged;
                report.divergence = Some(format!(
                    "level {n}: iterate norm {norm:e} exceeded cap {cap:e}"
                ));
                break;
            }
            Err(e) => return Err(e),
        };
        let u = inner.u;
        let u_field = Field::new(Arc::clone(&mesh), u.clone())?;
        let energy = op.energy(&u);
        let load = level.rhs(spec, &u, cfg.u_floor);
        let cap_n = n as f64;
        let mut bound = 0.0;
        let mut k_active = false;
        for i in mesh.interior_nodes() {
            if f[i] != 0.0 {
                bound += weights[i]
                    * c_under
                    * truncate_scalar(f[i], cap_n)
                    * u[i].max(cfg.u_floor).powf(1.0 - gamma);
            }
            if g[i] != 0.0 {
                bound += weights[i] * c_over * truncate_scalar(g[i], cap_n) * u[i].powf(1.0 + q);
                if truncate_scalar(g[i], cap_n) * level.k_n(spec.k(), u[i]) >= cap_n {
                    k_active = true;
                }
            }
        }
        let defect = if idx == 0 {
            0.0
        } else {
            prev.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max(a - b))
        };
        let level_change = sup_diff(&u, &prev);
        let excess = energy - bound;
        let tol = cfg.plap.tol_for(spec.p()).max(cfg.inner_tol);
        report.energy_audit_excess = report.energy_audit_excess.max(excess);
        if excess > tol * (1.0 + bound) {
            report.energy_audit_ok = false;
        }
        report.monotonicity_audit = report.monotonicity_audit.max(defect);
        report.total_inner_iterations += inner.iterations;
        report.clamped_weights += inner.clamped;
        report.levels.push(LevelRecord {
            n,
            inner_iterations: inner.iterations,
            inner_change: inner.change,
            omega,
            energy,
            lpstar_norm: match p_star {
                Some(r) => u_field.lp_norm(r),
                None => u_field.sup_norm(),
            },
            sup_norm: u_field.sup_norm(),
            min_interior: u_field.interior_min(),
            level_change,
            monotonicity_defect: defect,
            energy_bound: bound,
            max_load: load.iter().fold(0.0, |m: f64, v| m.max(*v)),
            clamped_weights: inner.clamped,
        });
        k_active_history.push(k_active);
        prev = u;

        if idx > 0 && level_change < cfg.outer_tol {
            report.outcome = Outcome::Converged;
            break;
        }
        if u_field.sup_norm() > cap {
            report.outcome = Outcome::Diverged;
            report.divergence = Some(format!(
                "level {n}: norm {:e} exceeded cap {cap:e}",
                u_field.sup_norm()
            ));
            break;
        }
        if cfg.growth_guard {
            if let Some(msg) = growth_detected(&report.levels, &k_active_history) {
                report.outcome = Outcome::Diverged;
                report.divergence = Some(msg);
                break;
            }
        }
    }

    let u = Field::new(Arc::clone(&mesh), prev)?;
    let untruncated = spec.rhs(&u, cfg.u_floor)?;
    report.fixed_point_residual = op.residual(u.values(), untruncated.values()).norm();
    report.energy = op.energy(u.values());
    Ok((u, report))
}

/// Level norms tracking the truncation level itself, with the `k`
/// truncation binding, mean the truncated problems have no bounded limit.
fn growth_detected(levels: &[LevelRecord], k_active: &[bool]) -> Option<String> {
    if levels.len() < GROWTH_WINDOW + 1 {
        return None;
    }
    let tail = &levels[levels.len() - GROWTH_WINDOW - 1..];
    if !k_active[k_active.len() - GROWTH_WINDOW..].iter().all(|&a| a) {
        return None;
    }
    let grows = tail.windows(2).all(|w| {
        let n_ratio = w[1].n as f64 / w[0].n as f64;
        w[0].sup_norm > 0.0 && w[1].sup_norm / w[0].sup_norm >= GROWTH_FRACTION * n_ratio
    });
    grows.then(|| {
        let last = &tail[GROWTH_WINDOW];
        format!(
            "norm grows with the truncation level while k is truncated (n = {}, |u|_inf = {:e})",
            last.n, last.sup_norm
        )
    })
}

/// Empirical Hopf constant `min_i u_i / delta_i` over interior nodes.
pub fn hopf_floor(u: &Field, delta: &Field) -> Result<f64> {
    u.same_mesh(delta)?;
    let mesh = u.mesh();
    let mut best = f64::INFINITY;
    for i in mesh.interior_nodes() {
        let d = delta.values()[i];
        if d > 0.0 {
            best = best.min(u.values()[i] / d);
        }
    }
    Ok(if best.is_finite() { best } else { 0.0 })
}
