//! 2D polytopal meshes of the unit square with derived edge topology.
//!
//! Cells are stored as counter-clockwise vertex loops; edges are derived, not
//! stored, and carry a single unit normal shared by both adjacent cells. The
//! normal convention: on interior edges it is the outward normal of the
//! lower-indexed adjacent cell; on boundary edges it points out of the
//! domain. Boundary edges are tagged Gamma1 (accessible: Cauchy data given)
//! or Gamma2 (inaccessible).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, WgError};
use crate::quadrature::polygon_signed_area;
use crate::{Point, Vec2};

/// Boundary-edge classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeTag {
    Interior,
    Gamma1,
    Gamma2,
}

/// Mesh edge. `vertices` is ordered lo < hi by vertex index; the edge-local
/// arclength parameter runs from `vertices.0` to `vertices.1`.
#[derive(Debug, Clone)]
pub struct Edge {
    pub vertices: (usize, usize),
    /// Adjacent cells; for interior edges `cells.0 < cells.1.unwrap()`.
    pub cells: (usize, Option<usize>),
    /// Unit normal in the convention described in the module docs.
    pub normal: Vec2,
    pub tag: EdgeTag,
    pub length: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.cells.1.is_none()
    }
}

/// Per-cell edge reference: global edge id plus the sign relating the cell's
/// outward normal to the stored edge normal (`+1` if they coincide).
#[derive(Debug, Clone, Copy)]
pub struct CellEdge {
    pub edge: usize,
    pub sigma: f64,
}

/// Selects which boundary edges carry Cauchy data, by a predicate on the
/// edge midpoint. The default tags the left and bottom sides of the unit
/// square as Gamma1.
#[derive(Clone, Copy)]
pub struct BoundarySpec {
    pub gamma1: fn(f64, f64) -> bool,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec {
            gamma1: |x, y| x.abs() <= 1e-12 || y.abs() <= 1e-12,
        }
    }
}

impl std::fmt::Debug for BoundarySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("BoundarySpec")
    }
}

/// Polygonal mesh with derived topology.
#[derive(Debug, Clone)]
pub struct PolytopalMesh {
    pub vertices: Vec<Point>,
    /// CCW vertex loops.
    pub cells: Vec<Vec<usize>>,
    pub edges: Vec<Edge>,
    /// Per cell, aligned with the vertex loop: entry `i` is the edge from
    /// `cells[c][i]` to `cells[c][(i+1) % m]`.
    pub cell_edges: Vec<Vec<CellEdge>>,
    pub cell_area: Vec<f64>,
    pub cell_centroid: Vec<Point>,
    /// Cell diameters (max vertex distance).
    pub cell_h: Vec<f64>,
    /// Mesh size `h = max h_T`.
    pub h: f64,
}

enum TagSource<'a> {
    Predicate(&'a BoundarySpec),
    Explicit(&'a BTreeMap<(usize, usize), EdgeTag>),
}

impl PolytopalMesh {
    /// Builds a mesh from vertices and CCW cell loops, deriving edges,
    /// normals and boundary tags from the given spec.
    pub fn from_cells(
        vertices: Vec<Point>,
        cells: Vec<Vec<usize>>,
        spec: &BoundarySpec,
    ) -> Result<Self> {
        Self::build(vertices, cells, TagSource::Predicate(spec))
    }

    fn build(vertices: Vec<Point>, cells: Vec<Vec<usize>>, tags: TagSource) -> Result<Self> {
        let nv = vertices.len();
        if cells.is_empty() {
            return Err(WgError::InvalidArgument("mesh has no cells".into()));
        }
        let mut cell_area = Vec::with_capacity(cells.len());
        let mut cell_centroid = Vec::with_capacity(cells.len());
        let mut cell_h = Vec::with_capacity(cells.len());
        for (c, loop_) in cells.iter().enumerate() {
            if loop_.len() < 3 {
                return Err(WgError::Geometry(format!(
                    "cell {c} has fewer than 3 vertices"
                )));
            }
            for &v in loop_ {
                if v >= nv {
                    return Err(WgError::Geometry(format!(
                        "cell {c} references vertex {v} >= {nv}"
                    )));
                }
            }
            let pts: Vec<Point> = loop_.iter().map(|&v| vertices[v]).collect();
            let area = polygon_signed_area(&pts);
            if area <= 0.0 {
                return Err(WgError::Geometry(format!(
                    "cell {c} is not counter-clockwise (signed area {area:.3e})"
                )));
            }
            // shoelace centroid
            let mut cx = 0.0;
            let mut cy = 0.0;
            let m = pts.len();
            for i in 0..m {
                let p = &pts[i];
                let q = &pts[(i + 1) % m];
                let w = p.x * q.y - q.x * p.y;
                cx += (p.x + q.x) * w;
                cy += (p.y + q.y) * w;
            }
            cell_centroid.push(Point::new(cx / (6.0 * area), cy / (6.0 * area)));
            cell_area.push(area);
            let mut diam: f64 = 0.0;
            for i in 0..m {
                for j in (i + 1)..m {
                    diam = diam.max((pts[i] - pts[j]).norm());
                }
            }
            cell_h.push(diam);
        }

        // Derive edges. BTreeMap keyed by the (lo, hi) vertex pair keeps the
        // edge enumeration independent of cell order.
        struct Adj {
            cell: usize,
            forward: bool, // cell traverses lo -> hi
        }
        let mut emap: BTreeMap<(usize, usize), Vec<Adj>> = BTreeMap::new();
        for (c, loop_) in cells.iter().enumerate() {
            let m = loop_.len();
            for i in 0..m {
                let a = loop_[i];
                let b = loop_[(i + 1) % m];
                if a == b {
                    return Err(WgError::Geometry(format!(
                        "cell {c} repeats vertex {a} consecutively"
                    )));
                }
                let key = (a.min(b), a.max(b));
                emap.entry(key).or_default().push(Adj {
                    cell: c,
                    forward: a < b,
                });
            }
        }

        let mut edges = Vec::with_capacity(emap.len());
        let mut edge_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (&(lo, hi), adj) in &emap {
            if adj.len() > 2 {
                return Err(WgError::Geometry(format!(
                    "edge ({lo},{hi}) is shared by more than two cells"
                )));
            }
            let d = vertices[hi] - vertices[lo];
            let length = d.norm();
            if length == 0.0 {
                return Err(WgError::Geometry(format!(
                    "edge ({lo},{hi}) has zero length"
                )));
            }
            // Pick the adjacency of the lower-indexed cell; its outward
            // normal defines the stored normal.
            let (first, second) = if adj.len() == 2 {
                if adj[0].cell <= adj[1].cell {
                    (&adj[0], Some(&adj[1]))
                } else {
                    (&adj[1], Some(&adj[0]))
                }
            } else {
                (&adj[0], None)
            };
            if let Some(s) = second {
                if s.cell == first.cell {
                    return Err(WgError::Geometry(format!(
                        "edge ({lo},{hi}) appears twice in cell {}",
                        first.cell
                    )));
                }
                if s.forward == first.forward {
                    return Err(WgError::Geometry(format!(
                        "edge ({lo},{hi}) has inconsistent orientation between cells"
                    )));
                }
            }
            // Outward normal of a CCW loop is the traversal direction
            // rotated by -90 degrees.
            let dir = if first.forward { d } else { -d };
            let normal = Vec2::new(dir.y, -dir.x) / length;
            let tag = if second.is_some() {
                EdgeTag::Interior
            } else {
                EdgeTag::Gamma2 // placeholder; assigned below
            };
            edge_index.insert((lo, hi), edges.len());
            edges.push(Edge {
                vertices: (lo, hi),
                cells: (first.cell, second.map(|s| s.cell)),
                normal,
                tag,
                length,
            });
        }

        // Boundary tags.
        match tags {
            TagSource::Predicate(spec) => {
                for e in edges.iter_mut() {
                    if e.is_boundary() {
                        let mid = Point::from(
                            (vertices[e.vertices.0].coords + vertices[e.vertices.1].coords) * 0.5,
                        );
                        e.tag = if (spec.gamma1)(mid.x, mid.y) {
                            EdgeTag::Gamma1
                        } else {
                            EdgeTag::Gamma2
                        };
                    }
                }
            }
            TagSource::Explicit(map) => {
                let mut seen = vec![false; edges.len()];
                for (&key, &tag) in map {
                    let Some(&ei) = edge_index.get(&key) else {
                        return Err(WgError::Geometry(format!(
                            "boundary tag names edge ({},{}) which does not exist",
                            key.0, key.1
                        )));
                    };
                    if !edges[ei].is_boundary() {
                        return Err(WgError::Geometry(format!(
                            "boundary tag names interior edge ({},{})",
                            key.0, key.1
                        )));
                    }
                    edges[ei].tag = tag;
                    seen[ei] = true;
                }
                for (ei, e) in edges.iter().enumerate() {
                    if e.is_boundary() && !seen[ei] {
                        return Err(WgError::Geometry(format!(
                            "boundary edge ({},{}) is untagged",
                            e.vertices.0, e.vertices.1
                        )));
                    }
                }
            }
        }

        // Per-cell edge lists with normal signs.
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, loop_) in cells.iter().enumerate() {
            let m = loop_.len();
            let mut list = Vec::with_capacity(m);
            for i in 0..m {
                let a = loop_[i];
                let b = loop_[(i + 1) % m];
                let key = (a.min(b), a.max(b));
                let ei = edge_index[&key];
                let sigma = if edges[ei].cells.0 == c { 1.0 } else { -1.0 };
                list.push(CellEdge { edge: ei, sigma });
            }
            cell_edges.push(list);
        }

        let h = cell_h.iter().cloned().fold(0.0, f64::max);
        Ok(PolytopalMesh {
            vertices,
            cells,
            edges,
            cell_edges,
            cell_area,
            cell_centroid,
            cell_h,
            h,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Vertex coordinates of cell `c`, in loop order.
    pub fn cell_points(&self, c: usize) -> Vec<Point> {
        self.cells[c].iter().map(|&v| self.vertices[v]).collect()
    }

    /// Endpoints of edge `e` in (lo, hi) order.
    pub fn edge_points(&self, e: usize) -> (Point, Point) {
        let (a, b) = self.edges[e].vertices;
        (self.vertices[a], self.vertices[b])
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let (a, b) = self.edge_points(e);
        Point::from((a.coords + b.coords) * 0.5)
    }

    /// Outward normal of cell `c` on its `i`-th edge.
    pub fn outward_normal(&self, c: usize, i: usize) -> Vec2 {
        let ce = self.cell_edges[c][i];
        self.edges[ce.edge].normal * ce.sigma
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| self.edges[e].is_boundary())
    }

    pub fn gamma1_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| self.edges[e].tag == EdgeTag::Gamma1)
    }
}

// ---------------------------------------------------------------------------
// Built-in families on the unit square
// ---------------------------------------------------------------------------

/// Mesh family identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Triangular,
    Pentagon,
}

impl std::str::FromStr for Family {
    type Err = WgError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangular" => Ok(Family::Triangular),
            "pentagon" => Ok(Family::Pentagon),
            other => Err(WgError::InvalidArgument(format!(
                "unknown mesh family '{other}' (expected 'triangular' or 'pentagon')"
            ))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Triangular => f.write_str("triangular"),
            Family::Pentagon => f.write_str("pentagon"),
        }
    }
}

/// Uniform triangulation of the unit square: n x n squares, each split by
/// the diagonal from its lower-left to its upper-right corner.
pub fn build_triangular(n: usize) -> Result<PolytopalMesh> {
    build_triangular_with(n, &BoundarySpec::default())
}

pub fn build_triangular_with(n: usize, spec: &BoundarySpec) -> Result<PolytopalMesh> {
    if n == 0 {
        return Err(WgError::InvalidArgument(
            "cells-per-side must be at least 1".into(),
        ));
    }
    let nf = n as f64;
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point::new(i as f64 / nf, j as f64 / nf));
        }
    }
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            // diagonal (i,j) -> (i+1,j+1)
            cells.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
            cells.push(vec![vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
        }
    }
    PolytopalMesh::from_cells(vertices, cells, spec)
}

/// Non-convex pentagon mesh: each of the n x n squares is split by the
/// zigzag polyline through local coordinates (0,0) -> (1/4,3/4) ->
/// (3/4,1/4) -> (1,1) into two pentagons, each with one reflex corner.
pub fn build_nonconvex_pentagon(n: usize) -> Result<PolytopalMesh> {
    build_nonconvex_pentagon_with(n, &BoundarySpec::default())
}

pub fn build_nonconvex_pentagon_with(n: usize, spec: &BoundarySpec) -> Result<PolytopalMesh> {
    if n == 0 {
        return Err(WgError::InvalidArgument(
            "cells-per-side must be at least 1".into(),
        ));
    }
    let nf = n as f64;
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let grid_count = (n + 1) * (n + 1);
    let mut vertices = Vec::with_capacity(grid_count + 2 * n * n);
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Point::new(i as f64 / nf, j as f64 / nf));
        }
    }
    // Two zigzag vertices per square, appended square by square.
    let zid = |i: usize, j: usize| grid_count + 2 * (j * n + i);
    for j in 0..n {
        for i in 0..n {
            vertices.push(Point::new((i as f64 + 0.25) / nf, (j as f64 + 0.75) / nf));
            vertices.push(Point::new((i as f64 + 0.75) / nf, (j as f64 + 0.25) / nf));
        }
    }
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let p1 = zid(i, j); // (1/4, 3/4) corner
            let p2 = p1 + 1; // (3/4, 1/4) corner
            cells.push(vec![vid(i, j), p1, p2, vid(i + 1, j + 1), vid(i, j + 1)]);
            cells.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), p2, p1]);
        }
    }
    PolytopalMesh::from_cells(vertices, cells, spec)
}

/// The `level`-th member of a refinement family: `n = 2^(level-1)` cells per
/// side, so the mesh size halves from one level to the next.
pub fn grid_family(family: Family, level: usize) -> Result<PolytopalMesh> {
    grid_family_with(family, level, &BoundarySpec::default())
}

pub fn grid_family_with(
    family: Family,
    level: usize,
    spec: &BoundarySpec,
) -> Result<PolytopalMesh> {
    if level == 0 {
        return Err(WgError::InvalidArgument(
            "grid level must be at least 1".into(),
        ));
    }
    let n = 1usize << (level - 1);
    match family {
        Family::Triangular => build_triangular_with(n, spec),
        Family::Pentagon => build_nonconvex_pentagon_with(n, spec),
    }
}

// ---------------------------------------------------------------------------
// POLYMESH text format
// ---------------------------------------------------------------------------

/// Serializes the mesh in the POLYMESH text format: vertices with 17
/// significant digits, CCW cell loops, and explicit boundary-edge tags.
/// Interior edges are derived on load, never stored.
pub fn save_mesh(mesh: &PolytopalMesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("POLYMESH 1\n");
    let _ = writeln!(out, "{}", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{:.16e} {:.16e}", v.x, v.y);
    }
    let _ = writeln!(out, "{}", mesh.cells.len());
    for cell in &mesh.cells {
        let _ = write!(out, "{}", cell.len());
        for &v in cell {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    let nb = mesh.edges.iter().filter(|e| e.is_boundary()).count();
    let _ = writeln!(out, "{nb}");
    for e in &mesh.edges {
        if e.is_boundary() {
            let tag = match e.tag {
                EdgeTag::Gamma1 => 1,
                EdgeTag::Gamma2 => 2,
                EdgeTag::Interior => unreachable!(),
            };
            let _ = writeln!(out, "{} {} {}", e.vertices.0, e.vertices.1, tag);
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_mesh(path: &Path) -> Result<PolytopalMesh> {
    let text = std::fs::read_to_string(path)?;
    parse_polymesh(&text)
}

fn parse_err(line: usize, msg: impl Into<String>) -> WgError {
    WgError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parses the POLYMESH text format. Errors carry 1-based line numbers.
pub fn parse_polymesh(text: &str) -> Result<PolytopalMesh> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next_line = |what: &str| -> Result<(usize, &str)> {
        lines
            .next()
            .ok_or_else(|| parse_err(0, format!("unexpected end of file, expected {what}")))
    };

    let (ln, header) = next_line("header")?;
    if header.trim() != "POLYMESH 1" {
        return Err(parse_err(ln, format!("bad header '{header}'")));
    }
    let (ln, nv_str) = next_line("vertex count")?;
    let nv: usize = nv_str
        .trim()
        .parse()
        .map_err(|_| parse_err(ln, "bad vertex count"))?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next_line("vertex line")?;
        let mut it = l.split_whitespace();
        let x: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(ln, "bad vertex x coordinate"))?;
        let y: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(ln, "bad vertex y coordinate"))?;
        if it.next().is_some() {
            return Err(parse_err(ln, "trailing tokens on vertex line"));
        }
        vertices.push(Point::new(x, y));
    }
    let (ln, nc_str) = next_line("cell count")?;
    let nc: usize = nc_str
        .trim()
        .parse()
        .map_err(|_| parse_err(ln, "bad cell count"))?;
    let mut cells = Vec::with_capacity(nc);
    let mut cell_lines = Vec::with_capacity(nc);
    for c in 0..nc {
        let (ln, l) = next_line("cell line")?;
        let mut it = l.split_whitespace();
        let m: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(ln, "bad cell vertex count"))?;
        if m < 3 {
            return Err(parse_err(ln, format!("cell {c} has fewer than 3 vertices")));
        }
        let mut loop_ = Vec::with_capacity(m);
        for _ in 0..m {
            let v: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err(ln, format!("cell {c}: missing or bad vertex index")))?;
            if v >= nv {
                return Err(parse_err(
                    ln,
                    format!("cell {c} references vertex {v} >= {nv}"),
                ));
            }
            loop_.push(v);
        }
        if it.next().is_some() {
            return Err(parse_err(ln, format!("cell {c}: trailing tokens")));
        }
        let pts: Vec<Point> = loop_.iter().map(|&v| vertices[v]).collect();
        if polygon_signed_area(&pts) <= 0.0 {
            return Err(parse_err(
                ln,
                format!("cell {c} is not counter-clockwise"),
            ));
        }
        cells.push(loop_);
        cell_lines.push(ln);
    }
    let (ln, nb_str) = next_line("boundary tag count")?;
    let nb: usize = nb_str
        .trim()
        .parse()
        .map_err(|_| parse_err(ln, "bad boundary tag count"))?;
    let mut tags: BTreeMap<(usize, usize), EdgeTag> = BTreeMap::new();
    for _ in 0..nb {
        let (ln, l) = next_line("boundary tag line")?;
        let mut it = l.split_whitespace();
        let a: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(ln, "bad boundary edge vertex"))?;
        let b: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(ln, "bad boundary edge vertex"))?;
        let t: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(ln, "bad boundary tag"))?;
        let tag = match t {
            1 => EdgeTag::Gamma1,
            2 => EdgeTag::Gamma2,
            other => return Err(parse_err(ln, format!("boundary tag must be 1 or 2, got {other}"))),
        };
        if a >= nv || b >= nv {
            return Err(parse_err(ln, "boundary edge vertex out of range"));
        }
        let key = (a.min(b), a.max(b));
        if tags.insert(key, tag).is_some() {
            return Err(parse_err(ln, format!("duplicate tag for edge ({a},{b})")));
        }
    }
    PolytopalMesh::build(vertices, cells, TagSource::Explicit(&tags)).map_err(|e| match e {
        WgError::Geometry(msg) => parse_err(0, msg),
        other => other,
    })
}
