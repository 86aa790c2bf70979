//! Triangulated 2D geometries.
//!
//! A [`Mesh`] is immutable once constructed: counter-clockwise triangles,
//! finite coordinates and named node sets ("tags") for boundary regions.
//! Generators cover structured rectangles and the plate-with-hole domain;
//! [`load_mesh`] / [`save_mesh`] implement the plain-text exchange format:
//!
//! ```text
//! # comment
//! nodes N triangles M
//! x y            (N lines)
//! i j k          (M lines, 0-based)
//! tag <name> n i1 ... in
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{invalid, Error, Result};

/// A point in the plane, meters.
pub type Point = [f64; 2];

/// Smallest admissible signed triangle area, m².
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Twice the signed area of the triangle (a, b, c); positive when counter-clockwise.
#[inline]
pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    tags: BTreeMap<String, Vec<usize>>,
}

impl Mesh {
    /// Validates and builds a mesh. Clockwise triangles are reoriented with a
    /// logged warning; degenerate triangles and bad indices are rejected.
    pub fn new(
        nodes: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        tags: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self> {
        if let Some(i) = nodes.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::Mesh(format!("node {i} has non-finite coordinates")));
        }
        for (e, tri) in triangles.iter_mut().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= nodes.len()) {
                return Err(Error::Mesh(format!(
                    "triangle {e} references node {bad} but only {} nodes exist",
                    nodes.len()
                )));
            }
            if let Err(msg) = orient_triangle(&nodes, tri) {
                return Err(Error::Mesh(format!("triangle {e}: {msg}")));
            }
        }
        for (name, ids) in &tags {
            if let Some(&bad) = ids.iter().find(|&&i| i >= nodes.len()) {
                return Err(Error::Mesh(format!("tag `{name}` references node {bad}")));
            }
        }
        Ok(Self {
            nodes,
            triangles,
            tags,
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn tags(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.tags
    }

    pub fn tag(&self, name: &str) -> Option<&[usize]> {
        self.tags.get(name).map(Vec::as_slice)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_coords(&self, e: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[e];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn area(&self, e: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(e);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.element_count()).map(|e| self.area(e)).sum()
    }

    pub fn centroid(&self, e: usize) -> Point {
        let [a, b, c] = self.triangle_coords(e);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn centroids(&self) -> Vec<Point> {
        (0..self.element_count()).map(|e| self.centroid(e)).collect()
    }

    /// Edges that belong to exactly one triangle, oriented as in that triangle.
    pub fn boundary_edges(&self) -> Vec<[usize; 2]> {
        let mut count: BTreeMap<(usize, usize), (usize, [usize; 2])> = BTreeMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                count.entry(key).or_insert((0, [a, b])).0 += 1;
            }
        }
        count
            .into_values()
            .filter(|(n, _)| *n == 1)
            .map(|(_, edge)| edge)
            .collect()
    }

    /// Boundary edges whose both endpoints carry the given tag.
    pub fn tag_edges(&self, name: &str) -> Result<Vec<[usize; 2]>> {
        let ids: BTreeSet<usize> = self
            .tag(name)
            .ok_or_else(|| invalid(format!("unknown boundary tag `{name}`")))?
            .iter()
            .copied()
            .collect();
        Ok(self
            .boundary_edges()
            .into_iter()
            .filter(|[a, b]| ids.contains(a) && ids.contains(b))
            .collect())
    }
}

fn orient_triangle(nodes: &[Point], tri: &mut [usize; 3]) -> std::result::Result<(), String> {
    let area = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
    if area.abs() <= MIN_TRIANGLE_AREA {
        return Err(format!("degenerate triangle (signed area {area:e})"));
    }
    if area < 0.0 {
        log::warn!("reorienting clockwise triangle {tri:?}");
        tri.swap(1, 2);
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

struct Grid {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
}

/// Structured grid with alternating cell diagonals. Node `(i, j)` sits at
/// index `i * (ny + 1) + j`.
fn structured(nx: usize, ny: usize, lx: f64, ly: f64) -> Grid {
    let id = |i: usize, j: usize| i * (ny + 1) + j;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for i in 0..=nx {
        for j in 0..=ny {
            nodes.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let (n00, n10, n11, n01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([n00, n10, n11]);
                triangles.push([n00, n11, n01]);
            } else {
                triangles.push([n00, n10, n01]);
                triangles.push([n10, n11, n01]);
            }
        }
    }
    Grid { nodes, triangles }
}

fn rectangle_tags(nodes: &[Point], lx: f64, ly: f64) -> BTreeMap<String, Vec<usize>> {
    let tol = 1e-9 * lx.max(ly);
    let select = |pred: &dyn Fn(&Point) -> bool| -> Vec<usize> {
        nodes
            .iter()
            .enumerate()
            .filter(|(_, p)| pred(p))
            .map(|(i, _)| i)
            .collect()
    };
    let mut tags = BTreeMap::new();
    tags.insert("left".to_string(), select(&|p| p[0].abs() <= tol));
    tags.insert("right".to_string(), select(&|p| (p[0] - lx).abs() <= tol));
    tags.insert("bottom".to_string(), select(&|p| p[1].abs() <= tol));
    tags.insert("top".to_string(), select(&|p| (p[1] - ly).abs() <= tol));
    tags
}

/// Structured triangulation of `[0, lx] x [0, ly]` with `nx * ny` cells,
/// two triangles per cell, and `left`/`right`/`top`/`bottom` node tags.
pub fn generate_rect_grid(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(invalid(format!("grid needs nx, ny >= 1, got {nx} x {ny}")));
    }
    check_positive("lx", lx)?;
    check_positive("ly", ly)?;
    let grid = structured(nx, ny, lx, ly);
    let tags = rectangle_tags(&grid.nodes, lx, ly);
    Mesh::new(grid.nodes, grid.triangles, tags)
}

/// Rectangular plate with a circular hole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateWithHole {
    pub lx: f64,
    pub ly: f64,
    pub hole_center: Point,
    pub hole_diameter: f64,
    pub target_elems: usize,
}

impl Default for PlateWithHole {
    fn default() -> Self {
        Self {
            lx: 60.0,
            ly: 30.0,
            hole_center: [30.0, 15.0],
            hole_diameter: 10.0,
            target_elems: 646,
        }
    }
}

/// Meshes the plate minus the hole disk.
///
/// A structured grid sized for `target_elems` is built first; triangles
/// whose centroid falls in the disk are removed and the nodes exposed on
/// the hole boundary are projected radially onto the circle. The removal
/// and projection repeat until no triangle is inverted, a sliver, or
/// centred in the disk. Exposed nodes are tagged `hole`.
pub fn generate_plate_with_hole(spec: &PlateWithHole) -> Result<Mesh> {
    let PlateWithHole {
        lx,
        ly,
        hole_center: [cx, cy],
        hole_diameter,
        target_elems,
    } = *spec;
    check_positive("lx", lx)?;
    check_positive("ly", ly)?;
    if target_elems == 0 {
        return Err(invalid("target_elems must be at least 1"));
    }
    if !(hole_diameter.is_finite() && hole_diameter >= 0.0) {
        return Err(invalid(format!("hole diameter must be >= 0, got {hole_diameter}")));
    }
    let r = 0.5 * hole_diameter;
    if r > 0.0 && !(cx - r > 0.0 && cx + r < lx && cy - r > 0.0 && cy + r < ly) {
        return Err(invalid(format!(
            "hole of diameter {hole_diameter} at ({cx}, {cy}) touches the plate boundary"
        )));
    }

    let solid_fraction = 1.0 - std::f64::consts::PI * r * r / (lx * ly);
    let cells = (target_elems as f64 / (2.0 * solid_fraction)).max(1.0);
    let ny = ((cells * ly / lx).sqrt().round() as usize).max(1);
    let nx = ((cells / ny as f64).round() as usize).max(1);
    let Grid {
        mut nodes,
        triangles,
    } = structured(nx, ny, lx, ly);

    if r == 0.0 {
        let tags = rectangle_tags(&nodes, lx, ly);
        return Mesh::new(nodes, triangles, tags);
    }

    let h = (lx / nx as f64).min(ly / ny as f64);
    let min_area = 0.05 * 0.5 * h * h;
    let dist = |p: &Point| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt();
    let mut alive = vec![true; triangles.len()];
    let mut snapped = vec![false; nodes.len()];
    loop {
        let mut changed = false;
        for (e, tri) in triangles.iter().enumerate() {
            if !alive[e] {
                continue;
            }
            let [a, b, c] = tri.map(|i| nodes[i]);
            let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
            if dist(&centroid) < r || signed_area(a, b, c) < min_area {
                alive[e] = false;
                changed = true;
            }
        }
        // exposed: nodes shared by a surviving and a removed triangle, or
        // surviving nodes that lie inside the disk
        let mut used_alive = vec![false; nodes.len()];
        let mut used_dead = vec![false; nodes.len()];
        for (e, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if alive[e] {
                    used_alive[i] = true;
                } else {
                    used_dead[i] = true;
                }
            }
        }
        for i in 0..nodes.len() {
            let exposed = used_alive[i] && (used_dead[i] || dist(&nodes[i]) < r);
            if exposed && !snapped[i] {
                let d = dist(&nodes[i]);
                if d > 0.0 {
                    let s = r / d;
                    nodes[i] = [cx + (nodes[i][0] - cx) * s, cy + (nodes[i][1] - cy) * s];
                }
                snapped[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // compact: drop removed triangles and orphan nodes
    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut kept_nodes = Vec::new();
    let mut kept_snapped = Vec::new();
    let mut kept_tris = Vec::new();
    for (e, tri) in triangles.iter().enumerate() {
        if alive[e] {
            kept_tris.push(tri.map(|i| {
                *remap.entry(i).or_insert_with(|| {
                    kept_nodes.push(nodes[i]);
                    kept_snapped.push(snapped[i]);
                    kept_nodes.len() - 1
                })
            }));
        }
    }
    // renumber in original order to keep bandwidth small
    let mut order: Vec<(usize, usize)> = remap.iter().map(|(&old, &new)| (old, new)).collect();
    order.sort_unstable();
    let mut new_of_compact = vec![0; kept_nodes.len()];
    let mut final_nodes = Vec::with_capacity(kept_nodes.len());
    let mut hole = Vec::new();
    for (rank, &(_, compact)) in order.iter().enumerate() {
        new_of_compact[compact] = rank;
        final_nodes.push(kept_nodes[compact]);
        if kept_snapped[compact] {
            hole.push(rank);
        }
    }
    let final_tris: Vec<[usize; 3]> = kept_tris
        .iter()
        .map(|t| t.map(|c| new_of_compact[c]))
        .collect();
    let mut tags = rectangle_tags(&final_nodes, lx, ly);
    tags.insert("hole".to_string(), hole);
    Mesh::new(final_nodes, final_tris, tags)
}

/// Serializes a mesh in the plain-text format. Coordinates use the shortest
/// representation that round-trips exactly.
pub fn save_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "nodes {} triangles {}",
        mesh.node_count(),
        mesh.element_count()
    );
    for p in &mesh.nodes {
        let _ = writeln!(out, "{:?} {:?}", p[0], p[1]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    for (name, ids) in &mesh.tags {
        let _ = write!(out, "tag {} {}", name, ids.len());
        for i in ids {
            let _ = write!(out, " {i}");
        }
        out.push('\n');
    }
    out
}

/// Parses the plain-text mesh format. Errors carry the 1-based line number.
pub fn load_mesh(text: &str) -> Result<Mesh> {
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing `nodes N triangles M` header".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let (n, m) = match h.as_slice() {
        ["nodes", n, "triangles", m] => (
            n.parse::<usize>()
                .map_err(|e| parse_err(hline, format!("bad node count: {e}")))?,
            m.parse::<usize>()
                .map_err(|e| parse_err(hline, format!("bad triangle count: {e}")))?,
        ),
        _ => {
            return Err(parse_err(
                hline,
                format!("expected `nodes N triangles M`, found `{header}`"),
            ))
        }
    };

    let mut nodes = Vec::with_capacity(n);
    for k in 0..n {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(hline, format!("expected {n} node lines, found {k}")))?;
        let v: Vec<f64> = l
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(ln, format!("bad coordinate: {e}")))?;
        match v.as_slice() {
            [x, y] if x.is_finite() && y.is_finite() => nodes.push([*x, *y]),
            [_, _] => return Err(parse_err(ln, "non-finite coordinate".into())),
            _ => return Err(parse_err(ln, format!("expected `x y`, found `{l}`"))),
        }
    }

    let mut triangles = Vec::with_capacity(m);
    for k in 0..m {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(hline, format!("expected {m} triangle lines, found {k}")))?;
        let v: Vec<usize> = l
            .split_whitespace()
            .map(str::parse::<usize>)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(ln, format!("bad node index: {e}")))?;
        let mut tri = match v.as_slice() {
            [i, j, k] => [*i, *j, *k],
            _ => return Err(parse_err(ln, format!("expected `i j k`, found `{l}`"))),
        };
        if let Some(&bad) = tri.iter().find(|&&i| i >= n) {
            return Err(parse_err(ln, format!("node index {bad} out of range (mesh has {n} nodes)")));
        }
        orient_triangle(&nodes, &mut tri).map_err(|msg| parse_err(ln, msg))?;
        triangles.push(tri);
    }

    let mut tags = BTreeMap::new();
    for (ln, l) in lines {
        let mut it = l.split_whitespace();
        if it.next() != Some("tag") {
            return Err(parse_err(ln, format!("expected `tag <name> n ...`, found `{l}`")));
        }
        let name = it
            .next()
            .ok_or_else(|| parse_err(ln, "tag without a name".into()))?;
        let count: usize = it
            .next()
            .ok_or_else(|| parse_err(ln, "tag without a count".into()))?
            .parse()
            .map_err(|e| parse_err(ln, format!("bad tag count: {e}")))?;
        let ids: Vec<usize> = it
            .map(str::parse::<usize>)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(ln, format!("bad node index: {e}")))?;
        if ids.len() != count {
            return Err(parse_err(ln, format!("tag declares {count} nodes, lists {}", ids.len())));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
            return Err(parse_err(ln, format!("node index {bad} out of range (mesh has {n} nodes)")));
        }
        tags.insert(name.to_string(), ids);
    }

    Mesh::new(nodes, triangles, tags)
}
