//! Triangulations of the square, L-shaped and curved L-shaped domains.
//!
//! Every mesh is built through [`Mesh::from_parts`], which orients triangles
//! counter-clockwise, computes element diameters and extracts the tagged
//! boundary edges with outward normals. Meshes are immutable afterwards.

use std::collections::HashMap;
use std::f64::consts::SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    /// (-1, 1)^2
    #[serde(rename = "square")]
    Square,
    /// [-1, 1]^2 minus [0, 1] x [-1, 0], re-entrant corner at the origin.
    #[serde(rename = "lshape")]
    LShape,
    /// The L-domain with its outer corner replaced by the arc of radius 2
    /// centred at (1, -1).
    #[serde(rename = "curved-l")]
    CurvedL,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Square => "square",
            Domain::LShape => "lshape",
            Domain::CurvedL => "curved-l",
        }
    }

    /// Exact area; the curved domain is measured with its true arc.
    pub fn area(self) -> f64 {
        match self {
            Domain::Square => 4.0,
            Domain::LShape => 3.0,
            Domain::CurvedL => std::f64::consts::PI - 1.0,
        }
    }

    /// Straight boundary pieces in counter-clockwise order, as (start, end).
    pub fn segments(self) -> &'static [(Point, Point)] {
        match self {
            Domain::Square => &[
                ([-1.0, -1.0], [1.0, -1.0]),
                ([1.0, -1.0], [1.0, 1.0]),
                ([1.0, 1.0], [-1.0, 1.0]),
                ([-1.0, 1.0], [-1.0, -1.0]),
            ],
            Domain::LShape => &[
                ([-1.0, -1.0], [0.0, -1.0]),
                ([0.0, -1.0], [0.0, 0.0]),
                ([0.0, 0.0], [1.0, 0.0]),
                ([1.0, 0.0], [1.0, 1.0]),
                ([1.0, 1.0], [-1.0, 1.0]),
                ([-1.0, 1.0], [-1.0, -1.0]),
            ],
            Domain::CurvedL => &[
                ([-1.0, -1.0], [0.0, -1.0]),
                ([0.0, -1.0], [0.0, 0.0]),
                ([0.0, 0.0], [1.0, 0.0]),
                ([1.0, 0.0], [1.0, 1.0]),
            ],
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Domain::Square, Domain::LShape, Domain::CurvedL]
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown domain '{s}'")))
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which piece of the boundary an edge lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// Index into [`Domain::segments`].
    Segment(u8),
    /// Polygonal approximation of the circular arc of the curved L-domain.
    Arc,
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryTag::Segment(k) => write!(f, "{k}"),
            BoundaryTag::Arc => f.write_str("arc"),
        }
    }
}

impl std::str::FromStr for BoundaryTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "arc" {
            return Ok(BoundaryTag::Arc);
        }
        s.parse::<u8>()
            .map(BoundaryTag::Segment)
            .map_err(|_| Error::InvalidMesh(format!("bad boundary tag {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
    pub on_boundary: bool,
}

impl Vertex {
    pub fn point(&self) -> Point {
        [self.x, self.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    /// Vertex ids, counter-clockwise.
    pub v: [usize; 3],
    pub area: f64,
    /// Diameter, i.e. the longest edge.
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    /// Vertex ids in the counter-clockwise order of the adjacent triangle.
    pub v: [usize; 2],
    pub triangle: usize,
    pub normal: [f64; 2],
    pub length: f64,
    /// Length scale of the boundary penalty: diameter of the adjacent triangle.
    pub local_h: f64,
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    domain: Domain,
    vertices: Vec<Vertex>,
    triangles: Vec<Triangle>,
    boundary_edges: Vec<BoundaryEdge>,
    h: f64,
}

/// Summary of a mesh as reported alongside error tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    pub h: f64,
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub n_boundary_edges: usize,
    pub min_area: f64,
    /// Smallest interior angle, in degrees.
    pub min_angle: f64,
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Triangle adjacency of every edge, in first-seen order.
struct EdgeTable {
    keys: Vec<(usize, usize)>,
    adjacent: Vec<[Option<usize>; 2]>,
    index: HashMap<(usize, usize), usize>,
}

impl EdgeTable {
    fn build(triangles: &[[usize; 3]]) -> Result<Self> {
        let mut table = EdgeTable {
            keys: Vec::with_capacity(triangles.len() * 3 / 2 + 8),
            adjacent: Vec::with_capacity(triangles.len() * 3 / 2 + 8),
            index: HashMap::with_capacity(triangles.len() * 3 / 2 + 8),
        };
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let key = edge_key(tri[k], tri[(k + 1) % 3]);
                match table.index.get(&key) {
                    Some(&e) => {
                        if table.adjacent[e][1].is_some() {
                            return Err(Error::InvalidMesh(format!(
                                "edge {key:?} shared by more than two triangles"
                            )));
                        }
                        table.adjacent[e][1] = Some(t);
                    }
                    None => {
                        table.index.insert(key, table.keys.len());
                        table.keys.push(key);
                        table.adjacent.push([Some(t), None]);
                    }
                }
            }
        }
        Ok(table)
    }
}

impl Mesh {
    /// Builds a mesh from raw connectivity. Triangles are reoriented to be
    /// counter-clockwise; `tag` labels each boundary edge given its vertex ids.
    pub fn from_parts(
        domain: Domain,
        points: Vec<Point>,
        mut connectivity: Vec<[usize; 3]>,
        mut tag: impl FnMut(usize, usize, &[Point]) -> Result<BoundaryTag>,
    ) -> Result<Mesh> {
        if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        let mut triangles = Vec::with_capacity(connectivity.len());
        for (index, tri) in connectivity.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= points.len()) {
                return Err(Error::InvalidMesh(format!("triangle {index} has an out-of-range vertex")));
            }
            let [a, b, c] = tri.map(|v| points[v]);
            let mut area = signed_area(a, b, c);
            if area < 0.0 {
                tri.swap(1, 2);
                area = -area;
            }
            let h = dist(a, b).max(dist(b, c)).max(dist(c, a));
            if !(area > 1e-14 * h * h) {
                return Err(Error::DegenerateTriangle { index, area });
            }
            triangles.push(Triangle { v: *tri, area, h });
        }

        let edges = EdgeTable::build(&connectivity)?;
        let mut on_boundary = vec![false; points.len()];
        let mut boundary_edges = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri.v[k], tri.v[(k + 1) % 3]);
                let e = edges.index[&edge_key(a, b)];
                if edges.adjacent[e][1].is_some() {
                    continue;
                }
                let (pa, pb) = (points[a], points[b]);
                let length = dist(pa, pb);
                let normal = [(pb[1] - pa[1]) / length, -(pb[0] - pa[0]) / length];
                on_boundary[a] = true;
                on_boundary[b] = true;
                boundary_edges.push(BoundaryEdge {
                    v: [a, b],
                    triangle: t,
                    normal,
                    length,
                    local_h: tri.h,
                    tag: tag(a, b, &points)?,
                });
            }
        }

        let vertices = points
            .iter()
            .zip(&on_boundary)
            .map(|(p, &b)| Vertex {
                x: p[0],
                y: p[1],
                on_boundary: b,
            })
            .collect();
        let h = triangles.iter().map(|t| t.h).fold(0.0, f64::max);
        Ok(Mesh {
            domain,
            vertices,
            triangles,
            boundary_edges,
            h,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    /// Global mesh size, max over elements of the diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn point(&self, v: usize) -> Point {
        self.vertices[v].point()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].v.map(|v| self.point(v))
    }

    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(|t| t.area).sum()
    }

    pub fn stats(&self) -> MeshStats {
        mesh_stats(self)
    }

    /// Checks orientation, conformity and boundary-normal invariants.
    pub fn validate(&self) -> Result<()> {
        let conn: Vec<[usize; 3]> = self.triangles.iter().map(|t| t.v).collect();
        let edges = EdgeTable::build(&conn)?;
        for (i, t) in self.triangles.iter().enumerate() {
            let [a, b, c] = self.triangle_points(i);
            if signed_area(a, b, c) <= 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {i} is not counter-clockwise")));
            }
            let h = dist(a, b).max(dist(b, c)).max(dist(c, a));
            if (h - t.h).abs() > 1e-14 * h {
                return Err(Error::InvalidMesh(format!("triangle {i} has a stale diameter")));
            }
        }
        let n_boundary = edges.adjacent.iter().filter(|adj| adj[1].is_none()).count();
        if n_boundary != self.boundary_edges.len() {
            return Err(Error::InvalidMesh(format!(
                "{} single-sided edges but {} boundary edges",
                n_boundary,
                self.boundary_edges.len()
            )));
        }
        for (i, e) in self.boundary_edges.iter().enumerate() {
            let key = edge_key(e.v[0], e.v[1]);
            let Some(&idx) = edges.index.get(&key) else {
                return Err(Error::InvalidMesh(format!("boundary edge {i} is not a mesh edge")));
            };
            if edges.adjacent[idx] != [Some(e.triangle), None] {
                return Err(Error::InvalidMesh(format!("boundary edge {i} is interior")));
            }
            let norm = e.normal[0].hypot(e.normal[1]);
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidMesh(format!("boundary edge {i} normal not unit")));
            }
            let [a, b, c] = self.triangle_points(e.triangle);
            let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
            let (p, q) = (self.point(e.v[0]), self.point(e.v[1]));
            let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            let outward = e.normal[0] * (mid[0] - centroid[0]) + e.normal[1] * (mid[1] - centroid[1]);
            if outward <= 0.0 {
                return Err(Error::InvalidMesh(format!("boundary edge {i} normal points inward")));
            }
        }
        Ok(())
    }

    /// Tag lookup for a boundary edge, keyed by unordered vertex pair.
    fn boundary_tag_map(&self) -> HashMap<(usize, usize), BoundaryTag> {
        self.boundary_edges
            .iter()
            .map(|e| (edge_key(e.v[0], e.v[1]), e.tag))
            .collect()
    }
}

/// Tags an edge by the straight domain segment that contains it.
fn segment_tagger(domain: Domain) -> impl FnMut(usize, usize, &[Point]) -> Result<BoundaryTag> {
    move |a, b, points| {
        let (pa, pb) = (points[a], points[b]);
        for (k, &(s, e)) in domain.segments().iter().enumerate() {
            if on_segment(pa, s, e) && on_segment(pb, s, e) {
                return Ok(BoundaryTag::Segment(k as u8));
            }
        }
        Err(Error::InvalidMesh(format!(
            "boundary edge {pa:?}-{pb:?} lies on no {domain} segment"
        )))
    }
}

fn on_segment(p: Point, s: Point, e: Point) -> bool {
    let len = dist(s, e);
    let cross = (e[0] - s[0]) * (p[1] - s[1]) - (e[1] - s[1]) * (p[0] - s[0]);
    if cross.abs() > 1e-12 * len {
        return false;
    }
    let t = ((p[0] - s[0]) * (e[0] - s[0]) + (p[1] - s[1]) * (e[1] - s[1])) / (len * len);
    (-1e-12..=1.0 + 1e-12).contains(&t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GridPattern {
    /// Two right-angled triangles per cell, diagonal bottom-left to top-right.
    Uniform,
    /// Four triangles per cell meeting at the cell centre.
    CrissCross,
}

fn grid_mesh(domain: Domain, n: usize, pattern: GridPattern) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("n_cells must be at least 1".into()));
    }
    let active = |i: usize, j: usize| match domain {
        Domain::Square => true,
        // drop the quadrant [0, 1] x [-1, 0]
        _ => !(2 * i >= n && 2 * j < n),
    };
    let coord = |i: usize| 2.0 * i as f64 / n as f64 - 1.0;

    let mut grid_id = vec![usize::MAX; (n + 1) * (n + 1)];
    let mut points = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if !active(i, j) {
                continue;
            }
            for (di, dj) in [(0, 0), (1, 0), (1, 1), (0, 1)] {
                let g = (j + dj) * (n + 1) + i + di;
                if grid_id[g] == usize::MAX {
                    grid_id[g] = usize::MAX - 1;
                }
            }
        }
    }
    for j in 0..=n {
        for i in 0..=n {
            let g = j * (n + 1) + i;
            if grid_id[g] != usize::MAX {
                grid_id[g] = points.len();
                points.push([coord(i), coord(j)]);
            }
        }
    }

    let mut connectivity = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if !active(i, j) {
                continue;
            }
            let p00 = grid_id[j * (n + 1) + i];
            let p10 = grid_id[j * (n + 1) + i + 1];
            let p11 = grid_id[(j + 1) * (n + 1) + i + 1];
            let p01 = grid_id[(j + 1) * (n + 1) + i];
            match pattern {
                GridPattern::Uniform => {
                    connectivity.push([p00, p10, p11]);
                    connectivity.push([p00, p11, p01]);
                }
                GridPattern::CrissCross => {
                    let c = points.len();
                    let s = 2.0 / n as f64;
                    points.push([coord(i) + 0.5 * s, coord(j) + 0.5 * s]);
                    connectivity.push([p00, p10, c]);
                    connectivity.push([p10, p11, c]);
                    connectivity.push([p11, p01, c]);
                    connectivity.push([p01, p00, c]);
                }
            }
        }
    }
    Mesh::from_parts(domain, points, connectivity, segment_tagger(domain))
}

/// `n x n` cells on (-1, 1)^2, each cut by the same diagonal.
pub fn gen_square_uniform(n_cells: usize) -> Result<Mesh> {
    grid_mesh(Domain::Square, n_cells, GridPattern::Uniform)
}

/// `n x n` cells on (-1, 1)^2, each cut by both diagonals.
pub fn gen_square_crisscross(n_cells: usize) -> Result<Mesh> {
    grid_mesh(Domain::Square, n_cells, GridPattern::CrissCross)
}

fn check_even(n_cells: usize) -> Result<()> {
    if n_cells == 0 || n_cells % 2 == 1 {
        return Err(Error::InvalidArgument(format!(
            "L-shape meshes need an even positive cell count, got {n_cells}"
        )));
    }
    Ok(())
}

/// Criss-cross mesh of the L-domain on the `n x n` background grid.
pub fn gen_lshape(n_cells: usize) -> Result<Mesh> {
    check_even(n_cells)?;
    grid_mesh(Domain::LShape, n_cells, GridPattern::CrissCross)
}

/// Right-angled mesh of the L-domain; used as the Powell-Sabin base.
pub fn gen_lshape_uniform(n_cells: usize) -> Result<Mesh> {
    check_even(n_cells)?;
    grid_mesh(Domain::LShape, n_cells, GridPattern::Uniform)
}

fn incenter(p: [Point; 3]) -> Point {
    let a = dist(p[1], p[2]);
    let b = dist(p[2], p[0]);
    let c = dist(p[0], p[1]);
    let s = a + b + c;
    [
        (a * p[0][0] + b * p[1][0] + c * p[2][0]) / s,
        (a * p[0][1] + b * p[1][1] + c * p[2][1]) / s,
    ]
}

/// Parameter t of the intersection of line p + t (q - p) with line r + s (w - r).
fn line_intersection(p: Point, q: Point, r: Point, w: Point) -> Option<f64> {
    let d1 = [q[0] - p[0], q[1] - p[1]];
    let d2 = [w[0] - r[0], w[1] - r[1]];
    let den = d1[0] * d2[1] - d1[1] * d2[0];
    if den.abs() < 1e-300 {
        return None;
    }
    Some(((r[0] - p[0]) * d2[1] - (r[1] - p[1]) * d2[0]) / den)
}

/// Powell-Sabin 6-split: each triangle is divided around its incenter; an
/// interior edge is cut where the segment joining the two neighbouring
/// incenters crosses it, a boundary edge at its midpoint.
pub fn powell_sabin_refine(m: &Mesh) -> Result<Mesh> {
    let conn: Vec<[usize; 3]> = m.triangles.iter().map(|t| t.v).collect();
    let edges = EdgeTable::build(&conn)?;
    let centers: Vec<Point> = (0..m.triangles.len()).map(|t| incenter(m.triangle_points(t))).collect();
    let boundary_tags = m.boundary_tag_map();

    let mut points: Vec<Point> = m.vertices.iter().map(|v| v.point()).collect();
    let n_old = points.len();
    let mut split_tag: HashMap<usize, BoundaryTag> = HashMap::new();
    for (e, &(a, b)) in edges.keys.iter().enumerate() {
        let (pa, pb) = (m.point(a), m.point(b));
        let split = match edges.adjacent[e] {
            [Some(t0), Some(t1)] => {
                let t = line_intersection(pa, pb, centers[t0], centers[t1]).ok_or_else(|| {
                    Error::InvalidMesh(format!("incenter line parallel to edge {a}-{b}"))
                })?;
                if !(t > 1e-10 && t < 1.0 - 1e-10) {
                    return Err(Error::InvalidMesh(format!(
                        "Powell-Sabin split of edge {a}-{b} falls outside the edge (t = {t})"
                    )));
                }
                [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
            }
            _ => {
                split_tag.insert(n_old + e, boundary_tags[&(a, b)]);
                [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
            }
        };
        points.push(split);
    }
    let n_with_edges = points.len();
    points.extend_from_slice(&centers);

    let mut connectivity = Vec::with_capacity(6 * conn.len());
    for (t, tri) in conn.iter().enumerate() {
        let c = n_with_edges + t;
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let s = n_old + edges.index[&edge_key(a, b)];
            connectivity.push([a, s, c]);
            connectivity.push([s, b, c]);
        }
    }
    Mesh::from_parts(m.domain, points, connectivity, |a, b, _| {
        split_tag
            .get(&a)
            .or_else(|| split_tag.get(&b))
            .copied()
            .ok_or_else(|| Error::InvalidMesh(format!("refined boundary edge {a}-{b} has no parent")))
    })
}

const ARC_CENTER: Point = [1.0, -1.0];
const ARC_RADIUS: f64 = 2.0;
const SMOOTHING_SWEEPS: usize = 500;

/// Maps an L-shape mesh onto the curved L-domain.
///
/// Points are moved along rays from the arc centre (1, -1). On each ray the
/// segment between the re-entrant legs (distance d0 from the centre) and the
/// outer square boundary (distance 2 d0) is stretched linearly onto
/// [d0, 2], so outer boundary vertices land on the arc by radial projection
/// and the legs stay fixed. If any triangle still folds, interior vertices
/// are relaxed by Laplacian smoothing.
pub fn map_to_curved_l(m: &Mesh) -> Result<Mesh> {
    if m.domain != Domain::LShape {
        return Err(Error::InvalidArgument(format!(
            "curved mapping needs an L-shape mesh, got {}",
            m.domain
        )));
    }
    let mut points: Vec<Point> = m.vertices.iter().map(|v| curved_map(v.point())).collect();

    let conn: Vec<[usize; 3]> = m.triangles.iter().map(|t| t.v).collect();
    let all_positive =
        |pts: &[Point]| conn.iter().all(|t| signed_area(pts[t[0]], pts[t[1]], pts[t[2]]) > 0.0);
    if !all_positive(&points) {
        let mut neighbours = vec![Vec::new(); points.len()];
        for t in &conn {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if !neighbours[a].contains(&b) {
                    neighbours[a].push(b);
                    neighbours[b].push(a);
                }
            }
        }
        let mut ok = false;
        for _ in 0..SMOOTHING_SWEEPS {
            for v in 0..points.len() {
                if m.vertices[v].on_boundary || neighbours[v].is_empty() {
                    continue;
                }
                let k = neighbours[v].len() as f64;
                let sx: f64 = neighbours[v].iter().map(|&w| points[w][0]).sum();
                let sy: f64 = neighbours[v].iter().map(|&w| points[w][1]).sum();
                points[v] = [sx / k, sy / k];
            }
            if all_positive(&points) {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::InvalidMesh(
                "smoothing could not untangle the curved mesh".into(),
            ));
        }
    }

    let old_tags = m.boundary_tag_map();
    Mesh::from_parts(Domain::CurvedL, points, conn.clone(), |a, b, _| {
        match old_tags.get(&edge_key(a, b)) {
            Some(BoundaryTag::Segment(4 | 5)) => Ok(BoundaryTag::Arc),
            Some(&tag) => Ok(tag),
            None => Err(Error::InvalidMesh(format!("edge {a}-{b} was not on the boundary"))),
        }
    })
}

/// Ray-wise map from the L-domain onto the curved L-domain.
pub fn curved_map(p: Point) -> Point {
    let dx = p[0] - ARC_CENTER[0];
    let dy = p[1] - ARC_CENTER[1];
    let d = dx.hypot(dy);
    if d == 0.0 {
        return p;
    }
    let (ux, uy) = (dx / d, dy / d);
    // distance from the centre to the legs x = 0 / y = 0 along this ray
    let d0 = 1.0 / uy.max(-ux);
    if d <= d0 {
        return p;
    }
    let mapped = d0 + (d - d0) * (ARC_RADIUS - d0) / d0;
    [ARC_CENTER[0] + mapped * ux, ARC_CENTER[1] + mapped * uy]
}

pub fn mesh_stats(m: &Mesh) -> MeshStats {
    let mut min_area = f64::INFINITY;
    let mut min_angle = f64::INFINITY;
    for (i, t) in m.triangles.iter().enumerate() {
        min_area = min_area.min(t.area);
        let p = m.triangle_points(i);
        for k in 0..3 {
            let a = p[k];
            let b = p[(k + 1) % 3];
            let c = p[(k + 2) % 3];
            let u = [b[0] - a[0], b[1] - a[1]];
            let w = [c[0] - a[0], c[1] - a[1]];
            let cos = (u[0] * w[0] + u[1] * w[1]) / (dist(a, b) * dist(a, c));
            min_angle = min_angle.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
        }
    }
    MeshStats {
        h: m.h,
        n_vertices: m.vertices.len(),
        n_triangles: m.triangles.len(),
        n_boundary_edges: m.boundary_edges.len(),
        min_area,
        min_angle,
    }
}

/// h of the uniform mesh with `n` cells per side.
pub fn uniform_h(n_cells: usize) -> f64 {
    SQRT_2 * 2.0 / n_cells as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_triangle() -> Mesh {
        Mesh::from_parts(
            Domain::Square,
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            |_, _, _| Ok(BoundaryTag::Segment(0)),
        )
        .unwrap()
    }

    #[test]
    fn uniform_counts_and_h() {
        let m = gen_square_uniform(1).unwrap();
        assert_eq!((m.n_vertices(), m.triangles().len(), m.boundary_edges().len()), (4, 2, 4));
        assert!((m.h() - 2.0 * SQRT_2).abs() < 1e-15);
        let m8 = gen_square_uniform(8).unwrap();
        assert!((m8.h() - 0.3536).abs() < 5e-5);
        assert!((gen_square_uniform(2).unwrap().total_area() - 4.0).abs() < 1e-14);
        for k in [1, 2, 4, 8, 16] {
            let hk = gen_square_uniform(k).unwrap().h();
            let h2k = gen_square_uniform(2 * k).unwrap().h();
            assert_eq!(h2k, hk / 2.0);
        }
    }

    #[test]
    fn crisscross_counts_and_h() {
        let m1 = gen_square_crisscross(1).unwrap();
        assert_eq!((m1.n_vertices(), m1.triangles().len()), (5, 4));
        assert_eq!(gen_square_crisscross(4).unwrap().n_vertices(), 41);
        assert!((gen_square_crisscross(8).unwrap().h() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn lshape_geometry() {
        assert!(gen_lshape(3).is_err());
        assert!(gen_lshape(0).is_err());
        let m = gen_lshape(16).unwrap();
        assert!((m.h() - 0.125).abs() < 1e-15);
        m.validate().unwrap();
        for n in [2, 4, 6, 10] {
            assert!((gen_lshape(n).unwrap().total_area() - 3.0).abs() < 1e-13);
        }
        let m2 = gen_lshape(2).unwrap();
        let origin = m2
            .vertices()
            .iter()
            .position(|v| v.x == 0.0 && v.y == 0.0)
            .expect("origin is a vertex");
        let at_origin: Vec<_> = m2
            .boundary_edges()
            .iter()
            .filter(|e| e.v.contains(&origin))
            .collect();
        assert_eq!(at_origin.len(), 2);
        let dot = at_origin[0].normal[0] * at_origin[1].normal[0]
            + at_origin[0].normal[1] * at_origin[1].normal[1];
        assert!(dot.abs() < 1e-15);
        let tags: Vec<_> = m2.boundary_edges().iter().map(|e| e.tag).collect();
        for k in 0..6u8 {
            assert!(tags.contains(&BoundaryTag::Segment(k)));
        }
    }

    #[test]
    fn powell_sabin_counts_and_area() {
        let base = gen_square_uniform(1).unwrap();
        let ps = powell_sabin_refine(&base).unwrap();
        assert_eq!(ps.triangles().len(), 12);
        ps.validate().unwrap();
        assert!((ps.total_area() - 4.0).abs() < 1e-13);
    }

    #[test]
    fn powell_sabin_of_equilateral_triangle() {
        let s3 = 3.0_f64.sqrt();
        let m = Mesh::from_parts(
            Domain::Square,
            vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.5 * s3]],
            vec![[0, 1, 2]],
            |_, _, _| Ok(BoundaryTag::Segment(0)),
        )
        .unwrap();
        let ps = powell_sabin_refine(&m).unwrap();
        let centre = ps.point(ps.n_vertices() - 1);
        assert!((centre[0] - 0.5).abs() < 1e-15);
        assert!((centre[1] - s3 / 6.0).abs() < 1e-15);
        let a0 = ps.triangles()[0].area;
        for t in ps.triangles() {
            assert!((t.area - a0).abs() < 1e-15);
        }
    }

    #[test]
    fn powell_sabin_h_on_square() {
        // right isosceles legs s: longest child edge is |B - I| = s * sqrt(0.5 + (1 - 1/sqrt2)^2)
        let ps = powell_sabin_refine(&gen_square_uniform(8).unwrap()).unwrap();
        assert!((ps.h() - 0.1913).abs() < 5e-5, "h = {}", ps.h());
    }

    #[test]
    fn curved_map_fixed_points() {
        let p = curved_map([-1.0, 1.0]);
        assert!((p[0] - (1.0 - SQRT_2)).abs() < 1e-15);
        assert!((p[1] - (SQRT_2 - 1.0)).abs() < 1e-15);
        for q in [[-1.0, -1.0], [1.0, 1.0], [0.0, 0.0], [0.5, 0.0], [0.0, -0.5]] {
            let r = curved_map(q);
            assert!((r[0] - q[0]).abs() < 1e-15 && (r[1] - q[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn curved_mesh_is_valid() {
        for n in [2, 4, 8] {
            let m = map_to_curved_l(&gen_lshape(n).unwrap()).unwrap();
            m.validate().unwrap();
            assert!(m.triangles().iter().all(|t| t.area > 0.0));
            for e in m.boundary_edges() {
                if e.tag == BoundaryTag::Arc {
                    for v in e.v {
                        let r = dist(m.point(v), ARC_CENTER);
                        assert!((r - ARC_RADIUS).abs() < 1e-14);
                    }
                }
            }
        }
        assert!(map_to_curved_l(&gen_square_uniform(2).unwrap()).is_err());
    }

    #[test]
    fn stats_of_reference_triangle() {
        let s = reference_triangle().stats();
        assert_eq!(s.min_area, 0.5);
        assert!((s.h - SQRT_2).abs() < 1e-15);
        assert!((s.min_angle - 45.0).abs() < 1e-12);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let m = Mesh::from_parts(
            Domain::Square,
            vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]],
            vec![[0, 1, 2]],
            |_, _, _| Ok(BoundaryTag::Segment(0)),
        )
        .unwrap();
        m.validate().unwrap();
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let err = Mesh::from_parts(
            Domain::Square,
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            vec![[0, 1, 2]],
            |_, _, _| Ok(BoundaryTag::Segment(0)),
        );
        assert!(matches!(err, Err(Error::DegenerateTriangle { .. })));
    }
}
