//! Right-hand side structure `F(x, s) = f(x) h(s) + g(x) k(s)`: scalar
//! nonlinearities, coefficient fields, growth envelopes and the level-n
//! truncations of the approximation scheme.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::mesh::{Field, Mesh};

/// Lower end of the default envelope sample grid.
pub const SAMPLE_LO: f64 = 1e-6;
/// Upper end of the default envelope sample grid.
pub const SAMPLE_HI: f64 = 1e6;
pub const SAMPLE_COUNT: usize = 64;
/// Where `h(0+)` is evaluated when no closed form is available.
pub const ZERO_PROBE: f64 = 1e-30;

const ENVELOPE_RTOL: f64 = 1e-12;

/// `max(-k, min(s, k))`.
pub fn truncate_scalar(s: f64, k_level: f64) -> f64 {
    debug_assert!(k_level > 0.0);
    s.min(k_level).max(-k_level)
}

/// Piecewise-linear cutoff: 1 below `delta`, 0 above `2 delta`.
pub fn cutoff_v(s: f64, delta: f64) -> f64 {
    debug_assert!(delta > 0.0);
    if s <= delta {
        1.0
    } else if s < 2.0 * delta {
        (2.0 * delta - s) / delta
    } else {
        0.0
    }
}

/// `count` log-spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

pub fn default_sample_grid() -> Vec<f64> {
    log_grid(SAMPLE_LO, SAMPLE_HI, SAMPLE_COUNT)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty sample grid".into()));
    }
    if grid.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidArgument(
            "sample grid must be positive and finite".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "sample grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// An expression in the variable `s`, serialized as its source text.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarExpr(Expr);

impl ScalarExpr {
    pub fn parse(src: &str) -> Result<Self> {
        Expr::parse(src, &["s"]).map(ScalarExpr)
    }
}

impl Serialize for ScalarExpr {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(self.0.source())
    }
}

impl<'de> Deserialize<'de> for ScalarExpr {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        ScalarExpr::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// An expression in the coordinates `x`, `y`, serialized as its source text.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialExpr(Expr);

impl SpatialExpr {
    pub fn parse(src: &str) -> Result<Self> {
        Expr::parse(src, &["x", "y"]).map(SpatialExpr)
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.0.eval(&x)
    }
}

impl Serialize for SpatialExpr {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(self.0.source())
    }
}

impl<'de> Deserialize<'de> for SpatialExpr {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        SpatialExpr::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Scalar nonlinearity `h` or `k`. Every evaluation goes through
/// [`ScalarFn::eval`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFn {
    /// `coef * s^exponent`
    Power { coef: f64, exponent: f64 },
    /// `num / (shift + s^exponent)`, bounded by `num / shift` at the origin.
    BoundedRational { num: f64, shift: f64, exponent: f64 },
    Expr { expr: ScalarExpr },
    /// Linear interpolation of tabulated values, constant outside the table.
    Table { s: Vec<f64>, values: Vec<f64> },
}

impl ScalarFn {
    pub fn power(coef: f64, exponent: f64) -> Self {
        ScalarFn::Power { coef, exponent }
    }

    pub fn expr(src: &str) -> Result<Self> {
        Ok(ScalarFn::Expr {
            expr: ScalarExpr::parse(src)?,
        })
    }

    /// Value at `s > 0`.
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            ScalarFn::Power { coef, exponent } => {
                if *exponent == 0.0 {
                    *coef
                } else {
                    coef * s.powf(*exponent)
                }
            }
            ScalarFn::BoundedRational {
                num,
                shift,
                exponent,
            } => num / (shift + s.powf(*exponent)),
            ScalarFn::Expr { expr } => expr.0.eval(&[s]),
            ScalarFn::Table { s: knots, values } => {
                let i = knots.partition_point(|&t| t <= s);
                if i == 0 {
                    values[0]
                } else if i == knots.len() {
                    values[values.len() - 1]
                } else {
                    let (s0, s1) = (knots[i - 1], knots[i]);
                    let t = (s - s0) / (s1 - s0);
                    values[i - 1] + t * (values[i] - values[i - 1])
                }
            }
        }
    }

    /// `lim_{s -> 0+}` of the function (possibly `+inf`).
    pub fn at_zero(&self) -> f64 {
        match self {
            ScalarFn::Power { coef, exponent } => {
                if *exponent < 0.0 {
                    if *coef == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else if *exponent == 0.0 {
                    *coef
                } else {
                    0.0
                }
            }
            ScalarFn::BoundedRational { num, shift, .. } => {
                if *shift == 0.0 {
                    f64::INFINITY
                } else {
                    num / shift
                }
            }
            ScalarFn::Expr { expr } => expr.0.eval(&[ZERO_PROBE]),
            ScalarFn::Table { values, .. } => values[0],
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidProblem(format!("{name}: {msg}")));
        match self {
            ScalarFn::Power { coef, exponent } => {
                if !(coef.is_finite() && *coef >= 0.0 && exponent.is_finite()) {
                    return bad("power needs finite coef >= 0 and finite exponent");
                }
            }
            ScalarFn::BoundedRational {
                num,
                shift,
                exponent,
            } => {
                if !(*num >= 0.0 && *shift >= 0.0 && *exponent > 0.0)
                    || !(num.is_finite() && shift.is_finite() && exponent.is_finite())
                {
                    return bad("bounded_rational needs num >= 0, shift >= 0, exponent > 0");
                }
            }
            ScalarFn::Expr { .. } => {}
            ScalarFn::Table { s, values } => {
                if s.is_empty() || s.len() != values.len() {
                    return bad("table needs matching, non-empty knots and values");
                }
                if s.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("table knots must be strictly increasing");
                }
            }
        }
        Ok(())
    }
}

/// Where a coefficient field comes from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    Constant {
        value: f64,
    },
    /// Expression in `x` (and `y` in 2D), evaluated at the nodes.
    Expr {
        expr: SpatialExpr,
    },
    /// Nodal values from a CSV file written for the same mesh.
    Csv {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        column: Option<String>,
    },
    /// Nodal data already in memory; P1-interpolated onto other meshes.
    #[serde(skip)]
    Nodal(Field),
}

impl PartialEq for Coefficient {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Coefficient::Constant { value: a }, Coefficient::Constant { value: b }) => a == b,
            (Coefficient::Expr { expr: a }, Coefficient::Expr { expr: b }) => a == b,
            (
                Coefficient::Csv { path: a, column: ca },
                Coefficient::Csv { path: b, column: cb },
            ) => a == b && ca == cb,
            (Coefficient::Nodal(a), Coefficient::Nodal(b)) => {
                a.same_mesh(b).is_ok() && a.values() == b.values()
            }
            _ => false,
        }
    }
}

impl Coefficient {
    pub fn constant(value: f64) -> Self {
        Coefficient::Constant { value }
    }

    pub fn expr(src: &str) -> Result<Self> {
        Ok(Coefficient::Expr {
            expr: SpatialExpr::parse(src)?,
        })
    }

    pub fn evaluate(&self, mesh: &Arc<Mesh>) -> Result<Field> {
        match self {
            Coefficient::Constant { value } => Ok(Field::constant(mesh, *value)),
            Coefficient::Expr { expr } => Ok(Field::from_fn(mesh, |x| expr.eval(x))),
            Coefficient::Csv { path, column } => {
                Field::read_csv_file(mesh, path, column.as_deref())
            }
            Coefficient::Nodal(field) => {
                if field.on_mesh(mesh).is_ok() {
                    Ok(field.clone())
                } else {
                    field.interpolate_to(mesh)
                }
            }
        }
    }
}

fn default_one() -> f64 {
    1.0
}

fn zero_coefficient() -> Coefficient {
    Coefficient::constant(0.0)
}

/// Serializable description of a problem, independent of any mesh.
///
/// `h` and `k` default to the model powers `s^-gamma` and `s^q`; `m = None`
/// stands for `m = inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub p: f64,
    pub gamma: f64,
    #[serde(default)]
    pub q: f64,
    #[serde(rename = "C_under", default = "default_one")]
    pub c_under: f64,
    #[serde(rename = "C_over", default = "default_one")]
    pub c_over: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<ScalarFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<ScalarFn>,
    pub f: Coefficient,
    #[serde(default = "zero_coefficient")]
    pub g: Coefficient,
    #[serde(default)]
    pub m: Option<f64>,
}

impl ProblemDocument {
    /// Model powers `h = s^-gamma`, `k = s^q`, unit envelope constants.
    pub fn power(p: f64, gamma: f64, q: f64, f: Coefficient, g: Coefficient) -> Self {
        ProblemDocument {
            p,
            gamma,
            q,
            c_under: 1.0,
            c_over: 1.0,
            h: Some(ScalarFn::power(1.0, -gamma)),
            k: Some(ScalarFn::power(1.0, q)),
            f,
            g,
            m: None,
        }
    }
}

/// A problem bound to a mesh: exponents, envelopes, nonlinearities and the
/// coefficient fields evaluated at the nodes.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    doc: ProblemDocument,
    h: ScalarFn,
    k: ScalarFn,
    f: Field,
    g: Field,
}

impl ProblemSpec {
    pub fn new(doc: ProblemDocument, mesh: &Arc<Mesh>) -> Result<ProblemSpec> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        let ProblemDocument {
            p,
            gamma,
            q,
            c_under,
            c_over,
            m,
            ..
        } = doc;
        if !(p > 1.0 && p.is_finite()) {
            return bad(format!("p must lie in (1, inf), got {p}"));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return bad(format!("gamma must be >= 0, got {gamma}"));
        }
        if !(q >= 0.0 && q.is_finite()) {
            return bad(format!("q must be >= 0, got {q}"));
        }
        if q > p - 1.0 + 1e-12 {
            return bad(format!("q = {q} exceeds p - 1 = {}", p - 1.0));
        }
        if !(c_under > 0.0 && c_under.is_finite() && c_over > 0.0 && c_over.is_finite()) {
            return bad("envelope constants must be positive and finite".into());
        }
        if let Some(m) = m {
            if !(m > 1.0) {
                return bad(format!("m must lie in (1, inf], got {m}"));
            }
        }
        let h = doc.h.clone().unwrap_or(ScalarFn::power(1.0, -gamma));
        let k = doc.k.clone().unwrap_or(ScalarFn::power(1.0, q));
        h.validate("h")?;
        k.validate("k")?;
        let f = doc.f.evaluate(mesh)?;
        let g = doc.g.evaluate(mesh)?;
        for (name, field) in [("f", &f), ("g", &g)] {
            if let Some(v) = field.values().iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return bad(format!("{name} must be finite and nonnegative, found {v}"));
            }
        }
        let spec = ProblemSpec {
            doc: ProblemDocument {
                h: Some(h.clone()),
                k: Some(k.clone()),
                ..doc
            },
            h,
            k,
            f,
            g,
        };
        spec.check_envelopes(&default_sample_grid())?;
        Ok(spec)
    }

    /// Same problem with coefficients re-evaluated on another mesh.
    pub fn on_mesh(&self, mesh: &Arc<Mesh>) -> Result<ProblemSpec> {
        ProblemSpec::new(self.doc.clone(), mesh)
    }

    /// Same problem with a different singular exponent; a model-power `h`
    /// follows the new exponent.
    pub fn with_gamma(&self, gamma: f64) -> Result<ProblemSpec> {
        let mut doc = self.doc.clone();
        if matches!(doc.h, Some(ScalarFn::Power { exponent, .. }) if exponent == -self.gamma()) {
            doc.h = Some(ScalarFn::power(1.0, -gamma));
        }
        doc.gamma = gamma;
        ProblemSpec::new(doc, self.mesh())
    }

    fn check_envelopes(&self, grid: &[f64]) -> Result<()> {
        for &s in grid {
            let hv = self.h.eval(s);
            let bound = self.c_under() * s.powf(-self.gamma());
            if !(hv >= 0.0 && hv.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "h({s:e}) = {hv} is not finite and nonnegative"
                )));
            }
            if hv > bound * (1.0 + ENVELOPE_RTOL) {
                return Err(Error::EnvelopeViolation {
                    what: "h(s) <= C_under s^-gamma",
                    s,
                    value: hv,
                    bound,
                });
            }
            let kv = self.k.eval(s);
            let bound = self.c_over() * s.powf(self.q());
            if !(kv >= 0.0 && kv.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "k({s:e}) = {kv} is not finite and nonnegative"
                )));
            }
            if kv > bound * (1.0 + ENVELOPE_RTOL) {
                return Err(Error::EnvelopeViolation {
                    what: "k(s) <= C_over s^q",
                    s,
                    value: kv,
                    bound,
                });
            }
        }
        Ok(())
    }

    pub fn document(&self) -> &ProblemDocument {
        &self.doc
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.f.mesh()
    }

    pub fn p(&self) -> f64 {
        self.doc.p
    }

    pub fn gamma(&self) -> f64 {
        self.doc.gamma
    }

    pub fn q(&self) -> f64 {
        self.doc.q
    }

    pub fn c_under(&self) -> f64 {
        self.doc.c_under
    }

    pub fn c_over(&self) -> f64 {
        self.doc.c_over
    }

    /// Lebesgue exponent of `f`; `inf` when unspecified.
    pub fn m(&self) -> f64 {
        self.doc.m.unwrap_or(f64::INFINITY)
    }

    pub fn h(&self) -> &ScalarFn {
        &self.h
    }

    pub fn k(&self) -> &ScalarFn {
        &self.k
    }

    pub fn f(&self) -> &Field {
        &self.f
    }

    pub fn g(&self) -> &Field {
        &self.g
    }

    pub fn has_zero_data(&self) -> bool {
        self.f.is_identically_zero() && self.g.is_identically_zero()
    }

    /// `F(x_i, s) = f(x_i) h(s) + g(x_i) k(s)` at node `i`, `s > 0`.
    pub fn rhs_at(&self, node: usize, s: f64) -> f64 {
        let (f, g) = (self.f.values()[node], self.g.values()[node]);
        let mut v = 0.0;
        if f != 0.0 {
            v += f * self.h.eval(s);
        }
        if g != 0.0 {
            v += g * self.k.eval(s);
        }
        v
    }

    /// Untruncated right-hand side `f h(max(u, floor)) + g k(u)` at every node.
    pub fn rhs(&self, u: &Field, floor: f64) -> Result<Field> {
        u.on_mesh(self.mesh())?;
        let values = u
            .values()
            .iter()
            .enumerate()
            .map(|(i, &ui)| {
                let (f, g) = (self.f.values()[i], self.g.values()[i]);
                let mut v = 0.0;
                if f != 0.0 {
                    v += f * self.h.eval(ui.max(floor));
                }
                if g != 0.0 && ui > 0.0 {
                    v += g * self.k.eval(ui);
                }
                v
            })
            .collect();
        Field::new(Arc::clone(self.mesh()), values)
    }
}

/// `h = s^-gamma`, `k = s^q`, `C_under = C_over = 1`, with nodal `f` and `g`.
pub fn make_power_problem(p: f64, gamma: f64, q: f64, f: Field, g: Field) -> Result<ProblemSpec> {
    f.same_mesh(&g)?;
    let mesh = Arc::clone(f.mesh());
    let doc = ProblemDocument::power(p, gamma, q, Coefficient::Nodal(f), Coefficient::Nodal(g));
    ProblemSpec::new(doc, &mesh)
}

/// Level `n` of the approximation scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationLevel {
    n: u64,
}

impl TruncationLevel {
    pub fn new(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("truncation level must be >= 1".into()));
        }
        Ok(TruncationLevel { n })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    fn cap(&self) -> f64 {
        self.n as f64
    }

    /// `T_n(h(s))` for `s > 0`, `min(n, h(0+))` otherwise.
    pub fn h_n(&self, h: &ScalarFn, s: f64) -> f64 {
        if s > 0.0 {
            truncate_scalar(h.eval(s), self.cap())
        } else {
            self.cap().min(h.at_zero())
        }
    }

    /// `T_n(k(s))` for `s > 0`, zero otherwise.
    pub fn k_n(&self, k: &ScalarFn, s: f64) -> f64 {
        if s > 0.0 {
            truncate_scalar(k.eval(s), self.cap())
        } else {
            0.0
        }
    }

    pub fn truncate_field(&self, field: &Field) -> Field {
        let cap = self.cap();
        field.map(|v| truncate_scalar(v, cap))
    }

    /// Nodal load `f_n h_n(max(u, floor)) + g_n k_n(u)`.
    pub fn rhs(&self, spec: &ProblemSpec, u: &[f64], floor: f64) -> Vec<f64> {
        let cap = self.cap();
        let (f, g) = (spec.f.values(), spec.g.values());
        u.iter()
            .enumerate()
            .map(|(i, &ui)| {
                let mut v = 0.0;
                if f[i] != 0.0 {
                    v += truncate_scalar(f[i], cap) * self.h_n(&spec.h, ui.max(floor));
                }
                if g[i] != 0.0 {
                    v += truncate_scalar(g[i], cap) * self.k_n(&spec.k, ui);
                }
                v
            })
            .collect()
    }
}

/// Sampled test that `F(x, s) s^(1-p)` is strictly decreasing in `s`.
///
/// Only the terms whose coefficient is not identically zero take part. Each
/// active term must be nonincreasing on the grid (so any nonnegative mix of
/// `f(x)` and `g(x)` is), and their sum strictly decreasing. This is a
/// check on `grid` only, not a proof for all `s`.
pub fn check_slope_monotonicity(spec: &ProblemSpec, s_grid: &[f64]) -> Result<bool> {
    check_grid(s_grid)?;
    let use_h = !spec.f.is_identically_zero();
    let use_k = !spec.g.is_identically_zero();
    if !use_h && !use_k {
        return Ok(false);
    }
    let p = spec.p();
    let term = |fun: &ScalarFn, s: f64| fun.eval(s) * s.powf(1.0 - p);
    let hs: Vec<f64> = s_grid.iter().map(|&s| if use_h { term(&spec.h, s) } else { 0.0 }).collect();
    let ks: Vec<f64> = s_grid.iter().map(|&s| if use_k { term(&spec.k, s) } else { 0.0 }).collect();
    let nonincreasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    if !nonincreasing(&hs) || !nonincreasing(&ks) {
        return Ok(false);
    }
    Ok(hs
        .iter()
        .zip(&ks)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1].0 + w[1].1 < w[0].0 + w[0].1))
}

/// Sampled test of `G_1(x, s) <= G_2(x, s)` at every node and grid point.
pub fn check_ordered_data(spec1: &ProblemSpec, spec2: &ProblemSpec, s_grid: &[f64]) -> Result<bool> {
    check_grid(s_grid)?;
    spec1.f.same_mesh(&spec2.f)?;
    for node in 0..spec1.mesh().node_count() {
        for &s in s_grid {
            let (a, b) = (spec1.rhs_at(node, s), spec2.rhs_at(node, s));
            if a > b + ENVELOPE_RTOL * (1.0 + b.abs()) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Nonincreasing minorant of every `h_n`: the running infimum of
/// `h_1 = T_1(h)` over the grid, linearly interpolated.
pub fn lower_envelope(spec: &ProblemSpec, s_grid: &[f64]) -> Result<ScalarFn> {
    if !(spec.gamma() > 0.0) {
        return Err(Error::InvalidArgument(
            "lower envelope needs a singular problem (gamma > 0)".into(),
        ));
    }
    check_grid(s_grid)?;
    let level = TruncationLevel::new(1)?;
    let mut running = f64::INFINITY;
    let mut values = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let v = level.h_n(&spec.h, s);
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "h is not evaluable at s = {s:e}"
            )));
        }
        running = running.min(v);
        values.push(running);
    }
    Ok(ScalarFn::Table {
        s: s_grid.to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_interval_mesh;

    fn mesh() -> Arc<Mesh> {
        Arc::new(build_interval_mesh(0.0, 1.0, 8).unwrap())
    }

    fn power(p: f64, gamma: f64, q: f64, f: f64, g: f64) -> Result<ProblemSpec> {
        let m = mesh();
        make_power_problem(p, gamma, q, Field::constant(&m, f), Field::constant(&m, g))
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncate_scalar(7.0, 5.0), 5.0);
        assert_eq!(truncate_scalar(-7.0, 5.0), -5.0);
        assert_eq!(truncate_scalar(3.0, 5.0), 3.0);
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(cutoff_v(0.5, 1.0), 1.0);
        assert_eq!(cutoff_v(1.5, 1.0), 0.5);
        assert_eq!(cutoff_v(3.0, 1.0), 0.0);
        assert_eq!(cutoff_v(1.0, 1.0), 1.0);
        assert_eq!(cutoff_v(2.0, 1.0), 0.0);
    }

    #[test]
    fn power_problem_construction() {
        let spec = power(2.0, 1.0, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(spec.h().eval(4.0), 0.25);
        assert_eq!(spec.k().eval(4.0), 2.0);
        assert!(power(2.0, 0.0, 1.0, 1.0, 1.0).is_ok());
        assert!(matches!(
            power(2.0, 1.0, 1.5, 1.0, 1.0),
            Err(Error::InvalidProblem(_))
        ));
        assert!(power(2.0, 1.0, 0.5, -1.0, 1.0).is_err());
        assert!(power(1.0, 1.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn envelope_violation_is_rejected() {
        let m = mesh();
        let mut doc = ProblemDocument::power(
            2.0,
            1.0,
            0.5,
            Coefficient::constant(1.0),
            Coefficient::constant(1.0),
        );
        doc.h = Some(ScalarFn::power(2.0, -1.0));
        assert!(matches!(
            ProblemSpec::new(doc.clone(), &m),
            Err(Error::EnvelopeViolation { .. })
        ));
        doc.c_under = 2.0;
        assert!(ProblemSpec::new(doc, &m).is_ok());
    }

    #[test]
    fn truncated_nonlinearities() {
        let spec = power(2.0, 1.0, 0.5, 1.0, 1.0).unwrap();
        let l = TruncationLevel::new(4).unwrap();
        assert_eq!(l.h_n(spec.h(), 0.1), 4.0);
        assert_eq!(l.h_n(spec.h(), 0.5), 2.0);
        assert_eq!(l.h_n(spec.h(), 0.0), 4.0);
        assert_eq!(l.h_n(spec.h(), -1.0), 4.0);
        assert_eq!(l.k_n(spec.k(), 0.0), 0.0);
        assert_eq!(l.k_n(spec.k(), 100.0), 4.0);
        assert_eq!(l.k_n(spec.k(), 4.0), 2.0);
        assert!(TruncationLevel::new(0).is_err());
    }

    #[test]
    fn truncated_bounds_and_monotone_in_level() {
        let spec = power(3.0, 1.7, 1.2, 1.0, 1.0).unwrap();
        for &s in &default_sample_grid() {
            for n in [1, 2, 7, 64, 1000] {
                let a = TruncationLevel::new(n).unwrap();
                let b = TruncationLevel::new(n + 1).unwrap();
                let (h, k) = (a.h_n(spec.h(), s), a.k_n(spec.k(), s));
                assert!((0.0..=n as f64).contains(&h));
                assert!((0.0..=n as f64).contains(&k));
                assert!(h <= s.powf(-1.7) * (1.0 + 1e-15));
                assert!(k <= s.powf(1.2) * (1.0 + 1e-15));
                assert!(h <= b.h_n(spec.h(), s));
                assert!(k <= b.k_n(spec.k(), s));
            }
        }
    }

    #[test]
    fn slope_monotonicity_examples() {
        let grid = [0.1, 1.0, 10.0];
        let spec = power(2.0, 1.0, 0.5, 1.0, 1.0).unwrap();
        assert!(check_slope_monotonicity(&spec, &grid).unwrap());

        let g_only = power(2.0, 1.0, 1.0, 0.0, 1.0).unwrap();
        assert!(!check_slope_monotonicity(&g_only, &grid).unwrap());

        let m = mesh();
        let mut doc = ProblemDocument::power(
            3.0,
            0.0,
            0.0,
            Coefficient::constant(1.0),
            Coefficient::constant(0.0),
        );
        doc.h = Some(ScalarFn::power(1.0, 0.0));
        let spec = ProblemSpec::new(doc, &m).unwrap();
        assert!(check_slope_monotonicity(&spec, &grid).unwrap());

        assert!(check_slope_monotonicity(&spec, &[]).is_err());
        assert!(check_slope_monotonicity(&spec, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn lower_envelope_of_monotone_h_is_t1() {
        let spec = power(2.0, 1.0, 0.5, 1.0, 1.0).unwrap();
        let grid = default_sample_grid();
        let env = lower_envelope(&spec, &grid).unwrap();
        for &s in &grid {
            assert_eq!(env.eval(s), (1.0 / s).min(1.0));
        }
        let flat = power(2.0, 0.0, 0.5, 1.0, 1.0).unwrap();
        assert!(lower_envelope(&flat, &grid).is_err());
    }

    #[test]
    fn lower_envelope_of_bounded_h() {
        let m = mesh();
        let mut doc = ProblemDocument::power(
            2.0,
            0.5,
            0.0,
            Coefficient::constant(1.0),
            Coefficient::constant(0.0),
        );
        // h(0+) = 3, h(s) <= 3 s^-1/2 on the grid
        doc.h = Some(ScalarFn::BoundedRational {
            num: 3.0,
            shift: 1.0,
            exponent: 1.0,
        });
        doc.c_under = 3.0;
        let spec = ProblemSpec::new(doc, &m).unwrap();
        let grid = default_sample_grid();
        let env = lower_envelope(&spec, &grid).unwrap();
        for &s in &grid {
            assert!(env.eval(s) <= 1.0f64.min(3.0));
        }
    }

    #[test]
    fn document_json_round_trip() {
        let doc = ProblemDocument {
            h: Some(ScalarFn::expr("1/s + sin(1/s)^2").unwrap()),
            m: Some(2.0),
            ..ProblemDocument::power(
                2.0,
                1.0,
                0.5,
                Coefficient::expr("2*x*(1-x)").unwrap(),
                Coefficient::constant(1.0),
            )
        };
        let json = serde_json::to_string(&doc).unwrap();
        let back: ProblemDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back, doc);
    }
}
