//! Structured P1 meshes on intervals and rectangles, nodal fields, lumped
//! quadrature and the exact boundary-distance function.
//!
//! Rectangles are split into two triangles per cell along the fixed
//! diagonal from the lower-left to the upper-right corner, so that every
//! build of the same mesh is bit-identical.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Refinement refuses to produce meshes with more nodes than this.
pub const DEFAULT_NODE_BUDGET: usize = 4_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { low: [f64; 2], high: [f64; 2] },
}

impl Domain {
    pub fn dimension(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    /// Lebesgue measure of the domain.
    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Rectangle { low, high } => (high[0] - low[0]) * (high[1] - low[1]),
        }
    }

    /// Distance from `x` to the boundary of the domain, for points inside it.
    pub fn distance_to_boundary(&self, x: [f64; 2]) -> f64 {
        match *self {
            Domain::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Domain::Rectangle { low, high } => (x[0] - low[0])
                .min(high[0] - x[0])
                .min(x[1] - low[1])
                .min(high[1] - x[1]),
        }
    }

    /// Largest value of the boundary distance over the domain.
    pub fn inradius(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => 0.5 * (b - a),
            Domain::Rectangle { low, high } => 0.5 * (high[0] - low[0]).min(high[1] - low[1]),
        }
    }
}

/// A simplex of the mesh: a segment in 1D, a triangle in 2D.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    nodes: [usize; 3],
    vertex_count: usize,
    measure: f64,
    grads: [[f64; 2]; 3],
}

impl Element {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes[..self.vertex_count]
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// Constant gradients of the local hat functions, in node order.
    pub fn basis_gradients(&self) -> &[[f64; 2]] {
        &self.grads[..self.vertex_count]
    }

    /// Gradient of the P1 interpolant of `values` on this element.
    pub fn gradient(&self, values: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (&n, dphi) in self.nodes().iter().zip(self.basis_gradients()) {
            g[0] += values[n] * dphi[0];
            g[1] += values[n] * dphi[1];
        }
        g
    }

    pub fn centroid(&self, mesh: &Mesh) -> [f64; 2] {
        let k = self.vertex_count as f64;
        let mut c = [0.0; 2];
        for &n in self.nodes() {
            let x = mesh.coords[n];
            c[0] += x[0] / k;
            c[1] += x[1] / k;
        }
        c
    }
}

/// JSON descriptor of a structured mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshDescriptor {
    pub dimension: usize,
    /// `[low, high]` per axis.
    pub extents: Vec<[f64; 2]>,
    /// Cell counts per axis.
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    domain: Domain,
    cells: Vec<usize>,
    coords: Vec<[f64; 2]>,
    boundary: Vec<bool>,
    elements: Vec<Element>,
}

fn check_extent(lo: f64, hi: f64, what: &str) -> Result<()> {
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidMesh(format!("{what}: non-finite extent")));
    }
    if lo >= hi {
        return Err(Error::InvalidMesh(format!(
            "{what}: need low < high, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

fn check_cells(n: usize, what: &str) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidMesh(format!(
            "{what}: need at least 2 cells, got {n}"
        )));
    }
    Ok(())
}

#[inline]
fn uniform(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if i == n {
        hi
    } else {
        lo + (hi - lo) * (i as f64) / (n as f64)
    }
}

pub fn build_interval_mesh(a: f64, b: f64, n_cells: usize) -> Result<Mesh> {
    check_extent(a, b, "interval")?;
    check_cells(n_cells, "interval")?;
    let coords: Vec<[f64; 2]> = (0..=n_cells)
        .map(|i| [uniform(a, b, i, n_cells), 0.0])
        .collect();
    let mut boundary = vec![false; n_cells + 1];
    boundary[0] = true;
    boundary[n_cells] = true;
    let elements = (0..n_cells)
        .map(|i| {
            let h = coords[i + 1][0] - coords[i][0];
            Element {
                nodes: [i, i + 1, 0],
                vertex_count: 2,
                measure: h,
                grads: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0; 2]],
            }
        })
        .collect();
    Ok(Mesh {
        domain: Domain::Interval { a, b },
        cells: vec![n_cells],
        coords,
        boundary,
        elements,
    })
}

fn triangle(coords: &[[f64; 2]], nodes: [usize; 3]) -> Element {
    let [p0, p1, p2] = nodes.map(|n| coords[n]);
    let area2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let grads = [
        [(p1[1] - p2[1]) / area2, (p2[0] - p1[0]) / area2],
        [(p2[1] - p0[1]) / area2, (p0[0] - p2[0]) / area2],
        [(p0[1] - p1[1]) / area2, (p1[0] - p0[0]) / area2],
    ];
    Element {
        nodes,
        vertex_count: 3,
        measure: 0.5 * area2,
        grads,
    }
}

pub fn build_rectangle_mesh(
    corner_low: [f64; 2],
    corner_high: [f64; 2],
    n1: usize,
    n2: usize,
) -> Result<Mesh> {
    check_extent(corner_low[0], corner_high[0], "rectangle x-axis")?;
    check_extent(corner_low[1], corner_high[1], "rectangle y-axis")?;
    check_cells(n1, "rectangle x-axis")?;
    check_cells(n2, "rectangle y-axis")?;
    let row = n1 + 1;
    let mut coords = Vec::with_capacity(row * (n2 + 1));
    let mut boundary = Vec::with_capacity(row * (n2 + 1));
    for j in 0..=n2 {
        let y = uniform(corner_low[1], corner_high[1], j, n2);
        for i in 0..=n1 {
            coords.push([uniform(corner_low[0], corner_high[0], i, n1), y]);
            boundary.push(i == 0 || i == n1 || j == 0 || j == n2);
        }
    }
    let mut elements = Vec::with_capacity(2 * n1 * n2);
    for j in 0..n2 {
        for i in 0..n1 {
            let v00 = j * row + i;
            let v10 = v00 + 1;
            let v01 = v00 + row;
            let v11 = v01 + 1;
            elements.push(triangle(&coords, [v00, v10, v11]));
            elements.push(triangle(&coords, [v00, v11, v01]));
        }
    }
    Ok(Mesh {
        domain: Domain::Rectangle {
            low: corner_low,
            high: corner_high,
        },
        cells: vec![n1, n2],
        coords,
        boundary,
        elements,
    })
}

impl Mesh {
    pub fn from_descriptor(desc: &MeshDescriptor) -> Result<Mesh> {
        if desc.extents.len() != desc.dimension || desc.counts.len() != desc.dimension {
            return Err(Error::InvalidMesh(
                "descriptor extents/counts do not match its dimension".into(),
            ));
        }
        match desc.dimension {
            1 => build_interval_mesh(desc.extents[0][0], desc.extents[0][1], desc.counts[0]),
            2 => build_rectangle_mesh(
                [desc.extents[0][0], desc.extents[1][0]],
                [desc.extents[0][1], desc.extents[1][1]],
                desc.counts[0],
                desc.counts[1],
            ),
            d => Err(Error::InvalidMesh(format!("unsupported dimension {d}"))),
        }
    }

    pub fn descriptor(&self) -> MeshDescriptor {
        let extents = match self.domain {
            Domain::Interval { a, b } => vec![[a, b]],
            Domain::Rectangle { low, high } => vec![[low[0], high[0]], [low[1], high[1]]],
        };
        MeshDescriptor {
            dimension: self.dimension(),
            extents,
            counts: self.cells.clone(),
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    /// Cell counts per axis.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(move |&i| !self.boundary[i])
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Largest cell width over all axes.
    pub fn mesh_size(&self) -> f64 {
        match self.domain {
            Domain::Interval { a, b } => (b - a) / self.cells[0] as f64,
            Domain::Rectangle { low, high } => ((high[0] - low[0]) / self.cells[0] as f64)
                .max((high[1] - low[1]) / self.cells[1] as f64),
        }
    }

    /// Nodal weights of the lumped (vertex) quadrature rule.
    pub fn lumped_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.node_count()];
        for e in &self.elements {
            let share = e.measure / e.vertex_count as f64;
            for &n in e.nodes() {
                w[n] += share;
            }
        }
        w
    }

    /// Uniform refinement: every 1D cell is halved, every 2D cell split into four.
    pub fn refine(&self) -> Result<Mesh> {
        self.refine_with_budget(DEFAULT_NODE_BUDGET)
    }

    pub fn refine_with_budget(&self, budget: usize) -> Result<Mesh> {
        let required: usize = self.cells.iter().map(|&n| 2 * n + 1).product();
        if required > budget {
            return Err(Error::NodeBudgetExceeded { required, budget });
        }
        match self.domain {
            Domain::Interval { a, b } => build_interval_mesh(a, b, 2 * self.cells[0]),
            Domain::Rectangle { low, high } => {
                build_rectangle_mesh(low, high, 2 * self.cells[0], 2 * self.cells[1])
            }
        }
    }

    /// Locate `x` and return the P1 interpolation weights `(node, weight)`.
    fn interpolation_stencil(&self, x: [f64; 2]) -> Vec<(usize, f64)> {
        let locate = |lo: f64, hi: f64, n: usize, t: f64| -> (usize, f64) {
            let s = ((t - lo) / (hi - lo) * n as f64).clamp(0.0, n as f64);
            let i = (s.floor() as usize).min(n - 1);
            (i, (s - i as f64).clamp(0.0, 1.0))
        };
        match self.domain {
            Domain::Interval { a, b } => {
                let (i, xi) = locate(a, b, self.cells[0], x[0]);
                vec![(i, 1.0 - xi), (i + 1, xi)]
            }
            Domain::Rectangle { low, high } => {
                let (i, xi) = locate(low[0], high[0], self.cells[0], x[0]);
                let (j, eta) = locate(low[1], high[1], self.cells[1], x[1]);
                let row = self.cells[0] + 1;
                let v00 = j * row + i;
                let (v10, v01, v11) = (v00 + 1, v00 + row, v00 + row + 1);
                if xi >= eta {
                    vec![(v00, 1.0 - xi), (v10, xi - eta), (v11, eta)]
                } else {
                    vec![(v00, 1.0 - eta), (v11, xi), (v01, eta - xi)]
                }
            }
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.dimension() == 1 {
            w.write_record(["x", "boundary"])?;
        } else {
            w.write_record(["x", "y", "boundary"])?;
        }
        for (x, &b) in self.coords.iter().zip(&self.boundary) {
            let flag = if b { "1" } else { "0" };
            if self.dimension() == 1 {
                w.write_record([fmt_f64(x[0]), flag.to_string()])?;
            } else {
                w.write_record([fmt_f64(x[0]), fmt_f64(x[1]), flag.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Shortest round-trip representation, so CSV artifacts are bit-stable.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Nodal scalar function on a mesh.
#[derive(Clone, Debug)]
pub struct Field {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Field> {
        if values.len() != mesh.node_count() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, mesh has {} nodes",
                values.len(),
                mesh.node_count()
            )));
        }
        Ok(Field { mesh, values })
    }

    pub fn zeros(mesh: &Arc<Mesh>) -> Field {
        Field::constant(mesh, 0.0)
    }

    pub fn constant(mesh: &Arc<Mesh>, value: f64) -> Field {
        Field {
            values: vec![value; mesh.node_count()],
            mesh: Arc::clone(mesh),
        }
    }

    pub fn from_fn(mesh: &Arc<Mesh>, f: impl Fn([f64; 2]) -> f64) -> Field {
        Field {
            values: mesh.coords.iter().map(|&x| f(x)).collect(),
            mesh: Arc::clone(mesh),
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// New field on the same mesh with `f` applied nodewise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copy with every boundary value set to zero.
    pub fn with_dirichlet_zero(&self) -> Field {
        let mut values = self.values.clone();
        for (v, &b) in values.iter_mut().zip(&self.mesh.boundary) {
            if b {
                *v = 0.0;
            }
        }
        Field {
            mesh: Arc::clone(&self.mesh),
            values,
        }
    }

    pub fn is_dirichlet_zero(&self) -> bool {
        self.values
            .iter()
            .zip(&self.mesh.boundary)
            .all(|(&v, &b)| !b || v == 0.0)
    }

    pub fn same_mesh(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    pub fn on_mesh(&self, mesh: &Arc<Mesh>) -> Result<()> {
        if Arc::ptr_eq(&self.mesh, mesh) || *self.mesh == **mesh {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Minimum over interior nodes (`+inf` if there are none).
    pub fn interior_min(&self) -> f64 {
        self.mesh
            .interior_nodes()
            .map(|i| self.values[i])
            .fold(f64::INFINITY, f64::min)
    }

    /// Lumped-quadrature integral over the domain.
    pub fn integrate(&self) -> f64 {
        self.mesh
            .lumped_weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Discrete `L^r` norm with lumped quadrature; `r = inf` gives the sup norm.
    pub fn lp_norm(&self, r: f64) -> f64 {
        if r.is_infinite() {
            return self.sup_norm();
        }
        let s: f64 = self
            .mesh
            .lumped_weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.abs().powf(r))
            .sum();
        s.powf(1.0 / r)
    }

    /// Elementwise-constant gradients of the P1 interpolant.
    pub fn element_gradients(&self) -> Vec<[f64; 2]> {
        self.mesh
            .elements
            .iter()
            .map(|e| e.gradient(&self.values))
            .collect()
    }

    /// Value of the P1 interpolant at a point of the domain.
    pub fn evaluate(&self, x: [f64; 2]) -> f64 {
        self.mesh
            .interpolation_stencil(x)
            .into_iter()
            .map(|(n, w)| w * self.values[n])
            .sum()
    }

    /// P1 interpolation onto another mesh of the same domain.
    pub fn interpolate_to(&self, mesh: &Arc<Mesh>) -> Result<Field> {
        if mesh.domain != self.mesh.domain {
            return Err(Error::MeshMismatch);
        }
        Ok(Field {
            values: mesh.coords.iter().map(|&x| self.evaluate(x)).collect(),
            mesh: Arc::clone(mesh),
        })
    }

    /// Sup of `|self - exact|` sampled at nodes and at element midpoints
    /// (edge midpoints and centroids in 2D).
    pub fn linf_error(&self, exact: impl Fn([f64; 2]) -> f64) -> f64 {
        let mut err: f64 = 0.0;
        for (x, v) in self.mesh.coords.iter().zip(&self.values) {
            err = err.max((v - exact(*x)).abs());
        }
        for e in &self.mesh.elements {
            let nodes = e.nodes();
            let mut samples = vec![e.centroid(&self.mesh)];
            if nodes.len() == 3 {
                for k in 0..3 {
                    let (a, b) = (nodes[k], nodes[(k + 1) % 3]);
                    let (xa, xb) = (self.mesh.coords[a], self.mesh.coords[b]);
                    samples.push([0.5 * (xa[0] + xb[0]), 0.5 * (xa[1] + xb[1])]);
                }
            }
            for x in samples {
                err = err.max((self.evaluate(x) - exact(x)).abs());
            }
        }
        err
    }

    /// Writes `x[,y],value` rows.
    pub fn write_csv<W: Write>(&self, out: W, column: &str) -> Result<()> {
        write_nodal_csv(out, &self.mesh, &[(column, &self.values)])
    }

    /// Reads nodal values from a CSV with a header. The value column is the
    /// one named `column`, or the last column when `column` is `None`.
    /// Coordinates, when present, must match the mesh nodes.
    pub fn read_csv<R: Read>(mesh: &Arc<Mesh>, input: R, column: Option<&str>) -> Result<Field> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        let col = match column {
            Some(name) => headers.iter().position(|h| h.trim() == name).ok_or_else(|| {
                Error::InvalidArgument(format!("CSV has no column named `{name}`"))
            })?,
            None => headers
                .len()
                .checked_sub(1)
                .ok_or_else(|| Error::InvalidArgument("CSV has no columns".into()))?,
        };
        let x_col = headers.iter().position(|h| h.trim() == "x");
        let y_col = headers.iter().position(|h| h.trim() == "y");
        let mut values = Vec::with_capacity(mesh.node_count());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("bad number in CSV row {row}")))
            };
            if row < mesh.node_count() {
                let node = mesh.coords[row];
                let tol = 1e-9 * (1.0 + node[0].abs() + node[1].abs());
                if let Some(i) = x_col {
                    if (parse(i)? - node[0]).abs() > tol {
                        return Err(Error::InvalidArgument(format!(
                            "CSV row {row}: x does not match mesh node"
                        )));
                    }
                }
                if let Some(i) = y_col {
                    if (parse(i)? - node[1]).abs() > tol {
                        return Err(Error::InvalidArgument(format!(
                            "CSV row {row}: y does not match mesh node"
                        )));
                    }
                }
            }
            values.push(parse(col)?);
        }
        Field::new(Arc::clone(mesh), values)
    }

    pub fn read_csv_file(mesh: &Arc<Mesh>, path: &Path, column: Option<&str>) -> Result<Field> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Field::read_csv(mesh, file, column)
    }
}

/// Writes node coordinates followed by the given named columns.
pub fn write_nodal_csv<W: Write>(out: W, mesh: &Mesh, columns: &[(&str, &[f64])]) -> Result<()> {
    for (name, col) in columns {
        if col.len() != mesh.node_count() {
            return Err(Error::InvalidArgument(format!(
                "column `{name}` has {} values for {} nodes",
                col.len(),
                mesh.node_count()
            )));
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["x"];
    if mesh.dimension() == 2 {
        header.push("y");
    }
    header.extend(columns.iter().map(|(n, _)| *n));
    w.write_record(&header)?;
    for (i, x) in mesh.coords.iter().enumerate() {
        let mut rec = vec![fmt_f64(x[0])];
        if mesh.dimension() == 2 {
            rec.push(fmt_f64(x[1]));
        }
        rec.extend(columns.iter().map(|(_, col)| fmt_f64(col[i])));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Closed-form distance to the boundary at every node; exactly zero on
/// boundary nodes.
pub fn boundary_distance(mesh: &Arc<Mesh>) -> Field {
    let values = mesh
        .coords
        .iter()
        .zip(&mesh.boundary)
        .map(|(&x, &b)| {
            if b {
                0.0
            } else {
                mesh.domain.distance_to_boundary(x).max(0.0)
            }
        })
        .collect();
    Field {
        mesh: Arc::clone(mesh),
        values,
    }
}
