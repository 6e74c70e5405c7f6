//! Discrete p-Laplacian on P1 elements: weak residual, energy, bounded-data
//! solves and the Poincaré constant.
//!
//! Gradient terms are integrated exactly (gradients are elementwise
//! constant); right-hand sides use the lumped vertex rule, which keeps the
//! `p = 2` system an M-matrix problem and hence positivity preserving.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{BandMatrix, Cholesky};
use crate::mesh::{Field, Mesh};

pub const DEFAULT_TOL_LINEAR: f64 = 1e-10;
pub const DEFAULT_TOL_NONLINEAR: f64 = 1e-8;

/// Below this relative size (of the largest gradient) the Newton weight
/// of a `p > 2` solve is clamped.
const RELATIVE_GRADIENT_FLOOR: f64 = 1e-3;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 80;
const LINE_MIN_STEPS: usize = 40;
const ROUNDOFF_TOL: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlapOptions {
    /// Residual tolerance; `None` picks 1e-10 for `p = 2` and 1e-8 otherwise.
    pub tol: Option<f64>,
    /// Absolute cap on the scaled Newton tolerance, never below roundoff.
    pub abs_tol: Option<f64>,
    pub max_iter: usize,
    /// Backtracking factor of the energy line search.
    pub damping: f64,
    /// Lower clamp on `|grad u|` inside the weight `|grad u|^(p-2)`.
    pub weight_clamp: f64,
}

impl Default for PlapOptions {
    fn default() -> Self {
        PlapOptions {
            tol: None,
            abs_tol: None,
            max_iter: 200,
            damping: 0.7,
            weight_clamp: 1e-12,
        }
    }
}

impl PlapOptions {
    pub fn tol_for(&self, p: f64) -> f64 {
        self.tol.unwrap_or(if p == 2.0 {
            DEFAULT_TOL_LINEAR
        } else {
            DEFAULT_TOL_NONLINEAR
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(Error::Config("plap tol must be > 0".into()));
            }
        }
        if let Some(t) = self.abs_tol {
            if !(t > 0.0) {
                return Err(Error::Config("plap abs_tol must be > 0".into()));
            }
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::Config("plap damping must lie in (0, 1)".into()));
        }
        if !(self.weight_clamp > 0.0) {
            return Err(Error::Config("plap weight_clamp must be > 0".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("plap max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// `|xi|^p - |eta|^p - p |eta|^(p-2) eta . (xi - eta)`, which is `>= 0`
/// by convexity of `|.|^p`.
pub fn convexity_gap(xi: &[f64], eta: &[f64], p: f64) -> f64 {
    assert_eq!(xi.len(), eta.len(), "vectors must have equal length");
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let (nx, ne) = (norm(xi), norm(eta));
    let dot: f64 = eta.iter().zip(xi).map(|(e, x)| e * (x - e)).sum();
    let middle = if ne == 0.0 {
        0.0
    } else {
        p * ne.powf(p - 2.0) * dot
    };
    nx.powf(p) - ne.powf(p) - middle
}

/// `r_i = int |grad u|^(p-2) grad u . grad phi_i - int R phi_i` over
/// interior hat functions.
#[derive(Clone, Debug)]
pub struct WeakResidual {
    nodes: Vec<usize>,
    values: Vec<f64>,
}

impl WeakResidual {
    /// Interior node index of each entry.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Max-norm of the entries.
    pub fn norm(&self) -> f64 {
        max_abs(&self.values)
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Result of a bounded-data solve.
#[derive(Clone, Debug)]
pub struct FixedRhsSolve {
    /// Nodal solution, zero on the boundary.
    pub u: Vec<f64>,
    pub iterations: usize,
    /// Max-norm of the final weak residual.
    pub residual: f64,
    /// Element visits where the gradient weight was clamped.
    pub clamped_weights: usize,
}

/// The discrete operator `-div(|grad u|^(p-2) grad u)` on one mesh, with the
/// Laplacian factor cached.
#[derive(Clone, Debug)]
pub struct PLaplacian {
    mesh: Arc<Mesh>,
    p: f64,
    opts: PlapOptions,
    dof_of: Vec<Option<usize>>,
    dofs: Vec<usize>,
    bandwidth: usize,
    weights: Vec<f64>,
    laplace: Cholesky,
}

impl PLaplacian {
    pub fn new(mesh: &Arc<Mesh>, p: f64, opts: PlapOptions) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!("p must lie in (1, inf), got {p}")));
        }
        opts.validate()?;
        let mut dof_of = vec![None; mesh.node_count()];
        let mut dofs = Vec::new();
        for i in mesh.interior_nodes() {
            dof_of[i] = Some(dofs.len());
            dofs.push(i);
        }
        if dofs.is_empty() {
            return Err(Error::InvalidMesh("mesh has no interior nodes".into()));
        }
        let mut bandwidth = 0;
        for e in mesh.elements() {
            let ds: Vec<usize> = e.nodes().iter().filter_map(|&n| dof_of[n]).collect();
            for &a in &ds {
                for &b in &ds {
                    bandwidth = bandwidth.max(a.abs_diff(b));
                }
            }
        }
        let identity = vec![[[1.0, 0.0], [0.0, 1.0]]; mesh.elements().len()];
        let laplace = assemble(mesh, &dof_of, dofs.len(), bandwidth, &identity).cholesky()?;
        Ok(PLaplacian {
            mesh: Arc::clone(mesh),
            p,
            opts,
            dof_of,
            dofs,
            bandwidth,
            weights: mesh.lumped_weights(),
            laplace,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn options(&self) -> &PlapOptions {
        &self.opts
    }

    /// Lumped quadrature weights of the mesh nodes.
    pub fn lumped_weights(&self) -> &[f64] {
        &self.weights
    }

    fn assemble(&self, tensors: &[[[f64; 2]; 2]]) -> BandMatrix {
        assemble(&self.mesh, &self.dof_of, self.dofs.len(), self.bandwidth, tensors)
    }

    /// Lumped load `int R phi_i` on interior dofs.
    fn load(&self, rhs: &[f64]) -> Vec<f64> {
        self.dofs.iter().map(|&n| self.weights[n] * rhs[n]).collect()
    }

    fn scatter(&self, x: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.mesh.node_count()];
        for (&n, &v) in self.dofs.iter().zip(x) {
            u[n] = v;
        }
        u
    }

    /// `int |grad u|^p`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        self.mesh
            .elements()
            .iter()
            .map(|e| {
                let g = e.gradient(u);
                e.measure() * (g[0] * g[0] + g[1] * g[1]).sqrt().powf(self.p)
            })
            .sum()
    }

    /// `J(u) = (1/p) int |grad u|^p - int R u` (lumped pairing, interior).
    pub fn functional(&self, u: &[f64], rhs: &[f64]) -> f64 {
        self.energy(u) / self.p - self.pairing(u, rhs)
    }

    /// Lumped `int R u` over interior nodes.
    pub fn pairing(&self, u: &[f64], rhs: &[f64]) -> f64 {
        self.dofs
            .iter()
            .map(|&n| self.weights[n] * rhs[n] * u[n])
            .sum()
    }

    /// Operator part `int |grad u|^(p-2) grad u . grad phi_i` on dofs.
    fn operator(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dofs.len()];
        for e in self.mesh.elements() {
            let g = e.gradient(u);
            let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
            if norm == 0.0 {
                continue;
            }
            let flux = norm.powf(self.p - 2.0);
            for (&n, dphi) in e.nodes().iter().zip(e.basis_gradients()) {
                if let Some(d) = self.dof_of[n] {
                    out[d] += e.measure() * flux * (g[0] * dphi[0] + g[1] * dphi[1]);
                }
            }
        }
        out
    }

    /// Weak residual on dofs.
    fn residual_dofs(&self, u: &[f64], load: &[f64]) -> Vec<f64> {
        let mut r = self.operator(u);
        for (ri, li) in r.iter_mut().zip(load) {
            *ri -= li;
        }
        r
    }

    pub fn residual(&self, u: &[f64], rhs: &[f64]) -> WeakResidual {
        WeakResidual {
            nodes: self.dofs.clone(),
            values: self.residual_dofs(u, &self.load(rhs)),
        }
    }

    fn tolerance(&self, load: &[f64]) -> f64 {
        self.opts.tol_for(self.p) * (1.0 + max_abs(load))
    }

    fn newton_tolerance(&self, load: &[f64]) -> f64 {
        let scaled = self.tolerance(load);
        match self.opts.abs_tol {
            Some(a) => scaled.min(a.max(ROUNDOFF_TOL * (1.0 + max_abs(load)))),
            None => scaled,
        }
    }

    /// Minimizes `J` over Dirichlet-zero fields for the nodal load `rhs`.
    ///
    /// `init` is an optional nodal starting guess for `p != 2`. The stopping
    /// test is `max_i |r_i| <= tol * (1 + max_i |int R phi_i|)`.
    pub fn solve(&self, rhs: &[f64], init: Option<&[f64]>) -> Result<FixedRhsSolve> {
        assert_eq!(rhs.len(), self.mesh.node_count());
        let load = self.load(rhs);
        if load.iter().all(|&v| v == 0.0) {
            return Ok(FixedRhsSolve {
                u: vec![0.0; self.mesh.node_count()],
                iterations: 0,
                residual: 0.0,
                clamped_weights: 0,
            });
        }
        if self.p == 2.0 {
            self.solve_linear(&load)
        } else {
            self.solve_newton(&load, init)
        }
    }

    fn solve_linear(&self, load: &[f64]) -> Result<FixedRhsSolve> {
        let tol = self.tolerance(load);
        let mut x = self.laplace.solve(load);
        let mut u = self.scatter(&x);
        let mut r = self.residual_dofs(&u, load);
        let mut iterations = 1;
        // iterative refinement for badly scaled loads
        while max_abs(&r) > tol && iterations < 4 {
            let dx = self.laplace.solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi -= di;
            }
            u = self.scatter(&x);
            r = self.residual_dofs(&u, load);
            iterations += 1;
        }
        let residual = max_abs(&r);
        if !(residual <= tol) {
            return Err(Error::NotConverged {
                what: "linear p-Laplacian solve",
                iterations,
                residual,
            });
        }
        Ok(FixedRhsSolve {
            u,
            iterations,
            residual,
            clamped_weights: 0,
        })
    }

    /// Scaled Laplace solution: the best multiple of it for `J`.
    fn initial_guess(&self, load: &[f64]) -> Vec<f64> {
        let u0 = self.scatter(&self.laplace.solve(load));
        let e = self.energy(&u0);
        let b: f64 = self.dofs.iter().zip(load).map(|(&n, l)| l * u0[n]).sum();
        if e > 0.0 && b > 0.0 {
            let c = (b / e).powf(1.0 / (self.p - 1.0));
            u0.into_iter().map(|v| c * v).collect()
        } else {
            u0
        }
    }

    fn functional_dofs(&self, u: &[f64], load: &[f64]) -> f64 {
        let pairing: f64 = self.dofs.iter().zip(load).map(|(&n, l)| l * u[n]).sum();
        self.energy(u) / self.p - pairing
    }

    /// Newton tensors `|g|^(p-2) (I + (p-2) g g^T / |g|^2)` with clamped `|g|`.
    fn newton_tensors(&self, u: &[f64]) -> (Vec<[[f64; 2]; 2]>, usize) {
        let grads: Vec<[f64; 2]> = self.mesh.elements().iter().map(|e| e.gradient(u)).collect();
        let gmax = grads
            .iter()
            .map(|g| (g[0] * g[0] + g[1] * g[1]).sqrt())
            .fold(0.0, f64::max);
        let floor = if self.p > 2.0 {
            self.opts.weight_clamp.max(RELATIVE_GRADIENT_FLOOR * gmax)
        } else {
            self.opts.weight_clamp
        };
        let mut clamped = 0;
        let tensors = grads
            .iter()
            .map(|g| {
                let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
                if norm < floor {
                    clamped += 1;
                }
                let w = norm.max(floor).powf(self.p - 2.0);
                if norm == 0.0 {
                    return [[w, 0.0], [0.0, w]];
                }
                let (a, b) = (g[0] / norm, g[1] / norm);
                let c = self.p - 2.0;
                [
                    [w * (1.0 + c * a * a), w * c * a * b],
                    [w * c * a * b, w * (1.0 + c * b * b)],
                ]
            })
            .collect();
        (tensors, clamped)
    }

    fn step(&self, u: &[f64], d: &[f64], theta: f64) -> Vec<f64> {
        let mut trial = u.to_vec();
        for (&n, di) in self.dofs.iter().zip(d) {
            trial[n] += theta * di;
        }
        trial
    }

    /// Minimizer of the convex `theta -> J(u + theta d)` on `(0, 1]`, found
    /// as the root of its derivative by the Illinois method.
    ///
    /// Full Newton steps for `p < 2` can flip the sign of a small element
    /// gradient back and forth, where the weight is far stiffer than the
    /// model predicts.
    fn line_minimum(&self, u: &[f64], d: &[f64], load: &[f64], slope: f64) -> f64 {
        let dphi = |theta: f64| -> f64 {
            let r = self.residual_dofs(&self.step(u, d, theta), load);
            r.iter().zip(d).map(|(a, b)| a * b).sum()
        };
        let (mut a, mut fa) = (0.0, slope);
        let (mut b, mut fb) = (1.0, dphi(1.0));
        if !(fb > 0.0) || !(fa < 0.0) {
            return 1.0;
        }
        let mut side = 0;
        for _ in 0..LINE_MIN_STEPS {
            let c = (a * fb - b * fa) / (fb - fa);
            let fc = dphi(c);
            if fc.abs() <= 1e-3 * slope.abs() {
                return c;
            }
            if fc < 0.0 {
                a = c;
                fa = fc;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = c;
                fb = fc;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
        }
        0.5 * (a + b)
    }

    fn solve_newton(&self, load: &[f64], init: Option<&[f64]>) -> Result<FixedRhsSolve> {
        let tol = self.newton_tolerance(load);
        let mut u: Vec<f64> = match init {
            Some(u0) if u0.iter().any(|&v| v != 0.0) => {
                let mut u = u0.to_vec();
                for (i, v) in u.iter_mut().enumerate() {
                    if self.dof_of[i].is_none() {
                        *v = 0.0;
                    }
                }
                u
            }
            _ => self.initial_guess(load),
        };
        let mut clamped_total = 0;
        let mut r = self.residual_dofs(&u, load);
        let mut rn = max_abs(&r);
        for it in 0..self.opts.max_iter {
            if rn <= tol {
                return Ok(FixedRhsSolve {
                    u,
                    iterations: it,
                    residual: rn,
                    clamped_weights: clamped_total,
                });
            }
            let (tensors, clamped) = self.newton_tensors(&u);
            clamped_total += clamped;
            let chol = self.assemble(&tensors).cholesky()?;
            let d: Vec<f64> = chol.solve(&r).into_iter().map(|v| -v).collect();
            let slope: f64 = r.iter().zip(&d).map(|(a, b)| a * b).sum();
            let j0 = self.functional_dofs(&u, load);
            let mut theta = self.line_minimum(&u, &d, load, slope);
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                let trial = self.step(&u, &d, theta);
                let jt = self.functional_dofs(&trial, load);
                if jt <= j0 + ARMIJO * theta * slope {
                    accepted = Some(trial);
                    break;
                }
                // below roundoff in J, fall back on residual decrease
                if (jt - j0).abs() <= 1e-12 * (j0.abs() + self.energy(&u) / self.p) {
                    let rt = self.residual_dofs(&trial, load);
                    if max_abs(&rt) < rn {
                        accepted = Some(trial);
                        break;
                    }
                }
                theta *= self.opts.damping;
            }
            let Some(next) = accepted else {
                return Err(Error::NotConverged {
                    what: "p-Laplacian line search",
                    iterations: it + 1,
                    residual: rn,
                });
            };
            u = next;
            r = self.residual_dofs(&u, load);
            rn = max_abs(&r);
        }
        if rn <= tol {
            return Ok(FixedRhsSolve {
                u,
                iterations: self.opts.max_iter,
                residual: rn,
                clamped_weights: clamped_total,
            });
        }
        Err(Error::NotConverged {
            what: "p-Laplacian Newton iteration",
            iterations: self.opts.max_iter,
            residual: rn,
        })
    }
}

/// Stiffness matrix on interior dofs for elementwise 2x2 coefficient tensors.
fn assemble(
    mesh: &Mesh,
    dof_of: &[Option<usize>],
    n: usize,
    bandwidth: usize,
    tensors: &[[[f64; 2]; 2]],
) -> BandMatrix {
    let mut a = BandMatrix::zeros(n, bandwidth);
    for (e, w) in mesh.elements().iter().zip(tensors) {
        let grads = e.basis_gradients();
        for (ia, &na) in e.nodes().iter().enumerate() {
            let Some(da) = dof_of[na] else { continue };
            let ga = grads[ia];
            let wga = [
                w[0][0] * ga[0] + w[0][1] * ga[1],
                w[1][0] * ga[0] + w[1][1] * ga[1],
            ];
            for (ib, &nb) in e.nodes().iter().enumerate() {
                let Some(db) = dof_of[nb] else { continue };
                if db > da {
                    continue;
                }
                let gb = grads[ib];
                a.add_lower(da, db, e.measure() * (wga[0] * gb[0] + wga[1] * gb[1]));
            }
        }
    }
    a
}

pub fn weak_residual(u: &Field, rhs: &Field, p: f64) -> Result<WeakResidual> {
    u.same_mesh(rhs)?;
    if !u.is_dirichlet_zero() {
        return Err(Error::InvalidArgument(
            "weak residual needs a Dirichlet-zero field".into(),
        ));
    }
    let op = PLaplacian::new(u.mesh(), p, PlapOptions::default())?;
    Ok(op.residual(u.values(), rhs.values()))
}

/// `int |grad u|^p`, exact for P1 fields.
pub fn energy(u: &Field, p: f64) -> f64 {
    u.mesh()
        .elements()
        .iter()
        .map(|e| {
            let g = e.gradient(u.values());
            e.measure() * (g[0] * g[0] + g[1] * g[1]).sqrt().powf(p)
        })
        .sum()
}

pub fn plap_solve_fixed_rhs(
    mesh: &Arc<Mesh>,
    rhs: &Field,
    p: f64,
    opts: &PlapOptions,
) -> Result<Field> {
    Ok(plap_solve_fixed_rhs_detailed(mesh, rhs, p, opts)?.0)
}

/// Like [`plap_solve_fixed_rhs`], also returning iteration statistics.
pub fn plap_solve_fixed_rhs_detailed(
    mesh: &Arc<Mesh>,
    rhs: &Field,
    p: f64,
    opts: &PlapOptions,
) -> Result<(Field, FixedRhsSolve)> {
    rhs.on_mesh(mesh)?;
    if let Some(v) = rhs.values().iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "right-hand side must be nonnegative, found {v}"
        )));
    }
    let op = PLaplacian::new(mesh, p, opts.clone())?;
    let sol = op.solve(rhs.values(), None)?;
    let u = Field::new(Arc::clone(mesh), sol.u.clone())?;
    Ok((u, sol))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoincareKind {
    /// Smallest eigenvalue of the discrete Dirichlet Laplacian.
    Exact,
    /// Discrete Rayleigh-quotient minimum for `p != 2`.
    Estimate,
}

/// Constant `C_p` of `||u||_p <= C_p ||grad u||_p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareConstant {
    pub value: f64,
    /// `lambda_1 = C_p^-p`.
    pub lambda1: f64,
    pub kind: PoincareKind,
    pub iterations: usize,
}

const EIGEN_TOL: f64 = 1e-12;
const EIGEN_MAX_ITER: usize = 2000;

/// For `p = 2`, inverse power iteration on `K x = lambda M x`; otherwise the
/// nonlinear inverse iteration `-Delta_p w = |u|^(p-2) u`, which decreases
/// the Rayleigh quotient `int |grad u|^p / int |u|^p` to its discrete
/// minimum.
pub fn poincare_constant(mesh: &Arc<Mesh>, p: f64) -> Result<PoincareConstant> {
    let op = PLaplacian::new(mesh, 2.0, PlapOptions::default())?;
    let w = op.lumped_weights().to_vec();
    let dofs = op.dofs.clone();
    let mut x = vec![0.0; mesh.node_count()];
    for &n in &dofs {
        x[n] = 1.0;
    }
    let mut lambda = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=EIGEN_MAX_ITER {
        let load: Vec<f64> = dofs.iter().map(|&n| w[n] * x[n]).collect();
        let y = op.scatter(&op.laplace.solve(&load));
        let mass: f64 = dofs.iter().map(|&n| w[n] * y[n] * y[n]).sum();
        let scale = mass.sqrt();
        x = y.iter().map(|v| v / scale).collect();
        let next = op.energy(&x);
        iterations = it;
        if (next - lambda).abs() <= EIGEN_TOL * next {
            lambda = next;
            converged = true;
            break;
        }
        lambda = next;
    }
    if !converged {
        return Err(Error::NotConverged {
            what: "inverse power iteration",
            iterations,
            residual: lambda,
        });
    }
    if p == 2.0 {
        return Ok(PoincareConstant {
            value: 1.0 / lambda.sqrt(),
            lambda1: lambda,
            kind: PoincareKind::Exact,
            iterations,
        });
    }

    let opl = PLaplacian::new(mesh, p, PlapOptions::default())?;
    let lp_norm = |v: &[f64]| -> f64 {
        dofs.iter()
            .map(|&n| w[n] * v[n].abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    };
    let norm = lp_norm(&x);
    let mut u: Vec<f64> = x.iter().map(|v| v.abs() / norm).collect();
    let mut lambda = opl.energy(&u);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=EIGEN_MAX_ITER {
        let rhs: Vec<f64> = u.iter().map(|v| v.abs().powf(p - 1.0)).collect();
        let guess: Vec<f64> = u.iter().map(|v| v * lambda.powf(-1.0 / (p - 1.0))).collect();
        let sol = opl.solve(&rhs, Some(&guess))?;
        let norm = lp_norm(&sol.u);
        u = sol.u.iter().map(|v| v.abs() / norm).collect();
        let next = opl.energy(&u);
        iterations = it;
        if (next - lambda).abs() <= 1e-10 * next {
            lambda = next;
            converged = true;
            break;
        }
        lambda = next;
    }
    if !converged {
        return Err(Error::NotConverged {
            what: "nonlinear inverse iteration",
            iterations,
            residual: lambda,
        });
    }
    Ok(PoincareConstant {
        value: lambda.powf(-1.0 / p),
        lambda1: lambda,
        kind: PoincareKind::Estimate,
        iterations,
    })
}
