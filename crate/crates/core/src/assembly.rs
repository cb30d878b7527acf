//! Element and boundary-edge matrices and global assembly.
//!
//! Conventions (2D): scalar curl c(v) = ∂₁v₂ − ∂₂v₁, tangential trace
//! t(v) = n₁v₂ − n₂v₁, vector curl of a scalar w is (∂₂w, −∂₁w).
//!
//! Unknowns are nodal P1 values interleaved per vertex as (u_x, u_y, p).
//! Local 9×9 matrices use the same layout over the three vertices of a
//! triangle: index `3 i + f` for local vertex i and field f.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryEdge, Mesh, Point};
use crate::problems::ProblemCase;
use crate::quadrature::{edge_rule, triangle_rule};
use crate::sparse::{CsrMatrix, Triplet};

/// Which bilinear form is assembled and how Dirichlet data enter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    /// Curl-curl + mixed terms with symmetric Nitsche boundary terms.
    GalerkinNitsche,
    /// Adds div-div and pressure-Laplacian stabilisation and the p-flux terms.
    StabilisedNitsche,
    /// Stabilised form with boundary conditions imposed on the nodal values.
    StabilisedStrong,
}

impl Formulation {
    pub fn is_strong(self) -> bool {
        self == Formulation::StabilisedStrong
    }

    pub fn is_stabilised(self) -> bool {
        self != Formulation::GalerkinNitsche
    }
}

/// Treatment of re-entrant boundary corners under strong imposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CornerStrategy {
    /// Both components fixed to ū (zero at the singular corner).
    BothZero,
    /// Both components left unconstrained.
    Free,
    /// Tangential component w.r.t. the averaged (bisector) normal fixed.
    BisectorNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub nu: f64,
    /// Characteristic length L0.
    pub l0: f64,
    /// Divergence stabilisation constant.
    pub c_u: f64,
    /// Nitsche penalty on the tangential trace.
    pub n_u: f64,
    /// Nitsche penalty on the pseudo-pressure.
    pub n_p: f64,
    pub formulation: Formulation,
    #[serde(default = "default_corner_strategy")]
    pub corner_strategy: CornerStrategy,
    /// Keep the boundary terms from integrating the pressure Laplacian by parts.
    #[serde(default = "default_true")]
    pub p_flux_terms: bool,
}

fn default_corner_strategy() -> CornerStrategy {
    CornerStrategy::BothZero
}

fn default_true() -> bool {
    true
}

impl Default for Params {
    fn default() -> Self {
        Params {
            nu: 1.0,
            l0: 1.0,
            c_u: 1.0,
            n_u: 100.0,
            n_p: 100.0,
            formulation: Formulation::StabilisedNitsche,
            corner_strategy: CornerStrategy::BothZero,
            p_flux_terms: true,
        }
    }
}

impl Params {
    /// Stabilised Nitsche parameters with ν = 1 and penalties 100.
    pub fn stabilised(l0: f64, c_u: f64) -> Params {
        Params {
            l0,
            c_u,
            ..Params::default()
        }
    }

    pub fn with_formulation(mut self, formulation: Formulation) -> Params {
        self.formulation = formulation;
        self
    }

    pub fn with_corner_strategy(mut self, strategy: CornerStrategy) -> Params {
        self.corner_strategy = strategy;
        self
    }

    pub fn with_penalties(mut self, n_u: f64, n_p: f64) -> Params {
        self.n_u = n_u;
        self.n_p = n_p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("nu", self.nu),
            ("l0", self.l0),
            ("c_u", self.c_u),
            ("n_u", self.n_u),
            ("n_p", self.n_p),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Warnings when a penalty is below 4 C², C the discrete trace constant
    /// estimated from the boundary elements of `mesh`.
    pub fn penalty_warnings(&self, mesh: &Mesh) -> Vec<String> {
        if self.formulation.is_strong() {
            return Vec::new();
        }
        let threshold = 4.0 * trace_constant_sq(mesh);
        let mut out = Vec::new();
        for (name, v) in [("n_u", self.n_u), ("n_p", self.n_p)] {
            if v < threshold {
                out.push(format!(
                    "{name} = {v} is below the stability estimate {threshold:.3}"
                ));
            }
        }
        out
    }
}

/// max over boundary edges of local_h · ℓ / |K|, the constant in
/// h ‖w‖²_e ≤ C² ‖w‖²_K for elementwise constant w.
pub fn trace_constant_sq(mesh: &Mesh) -> f64 {
    mesh.boundary_edges()
        .iter()
        .map(|e| e.local_h * e.length / mesh.triangles()[e.triangle].area)
        .fold(0.0, f64::max)
}

/// Interleaved (u_x, u_y, p) numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    n_vertices: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Ux,
    Uy,
    P,
}

impl DofMap {
    pub const PER_VERTEX: usize = 3;

    pub fn new(n_vertices: usize) -> Self {
        DofMap { n_vertices }
    }

    pub fn len(&self) -> usize {
        Self::PER_VERTEX * self.n_vertices
    }

    pub fn is_empty(&self) -> bool {
        self.n_vertices == 0
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn dof(&self, vertex: usize, field: Field) -> usize {
        Self::PER_VERTEX * vertex
            + match field {
                Field::Ux => 0,
                Field::Uy => 1,
                Field::P => 2,
            }
    }

    pub fn field_of(&self, dof: usize) -> (usize, Field) {
        let field = match dof % Self::PER_VERTEX {
            0 => Field::Ux,
            1 => Field::Uy,
            _ => Field::P,
        };
        (dof / Self::PER_VERTEX, field)
    }
}

/// Area, diameter and barycentric gradients of a P1 triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub area: f64,
    pub h: f64,
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(p: [Point; 3]) -> Result<Self> {
        let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let h = crate::mesh::dist(p[0], p[1])
            .max(crate::mesh::dist(p[1], p[2]))
            .max(crate::mesh::dist(p[2], p[0]));
        let area = 0.5 * two_a;
        if !(area > 1e-14 * h * h) {
            return Err(Error::DegenerateTriangle { index: usize::MAX, area });
        }
        let grads = [
            [(p[1][1] - p[2][1]) / two_a, (p[2][0] - p[1][0]) / two_a],
            [(p[2][1] - p[0][1]) / two_a, (p[0][0] - p[2][0]) / two_a],
            [(p[0][1] - p[1][1]) / two_a, (p[1][0] - p[0][0]) / two_a],
        ];
        Ok(ElementGeometry { area, h, grads })
    }

    /// c(φ_k) for the vector basis φ_{2i} = (λ_i, 0), φ_{2i+1} = (0, λ_i).
    pub fn curls(&self) -> [f64; 6] {
        let g = &self.grads;
        [-g[0][1], g[0][0], -g[1][1], g[1][0], -g[2][1], g[2][0]]
    }

    /// ∇·φ_k for the vector basis.
    pub fn divs(&self) -> [f64; 6] {
        let g = &self.grads;
        [g[0][0], g[0][1], g[1][0], g[1][1], g[2][0], g[2][1]]
    }
}

pub type Block6 = [[f64; 6]; 6];
pub type Block63 = [[f64; 3]; 6];
pub type Block3 = [[f64; 3]; 3];
pub type Local9 = [[f64; 9]; 9];

/// Position of vector basis k in the 9×9 layout.
fn vec_slot(k: usize) -> usize {
    3 * (k / 2) + k % 2
}

fn p_slot(i: usize) -> usize {
    3 * i + 2
}

fn symmetrize(m: &mut Local9) {
    for a in 0..9 {
        for b in a + 1..9 {
            let s = 0.5 * (m[a][b] + m[b][a]);
            m[a][b] = s;
            m[b][a] = s;
        }
    }
}

/// ν (∇×u, ∇×v)_K.
pub fn local_curl_curl(tri: [Point; 3], nu: f64) -> Result<Block6> {
    let g = ElementGeometry::new(tri)?;
    Ok(curl_curl_block(&g, nu))
}

fn curl_curl_block(g: &ElementGeometry, nu: f64) -> Block6 {
    let c = g.curls();
    let mut m = [[0.0; 6]; 6];
    for a in 0..6 {
        for b in 0..6 {
            m[a][b] = nu * g.area * c[a] * c[b];
        }
    }
    m
}

/// Entries ∫_K φ_k · ∇λ_j (rows: vector basis, columns: pressure basis).
pub fn local_mixed_grad(tri: [Point; 3]) -> Result<Block63> {
    let g = ElementGeometry::new(tri)?;
    Ok(mixed_grad_block(&g))
}

fn mixed_grad_block(g: &ElementGeometry) -> Block63 {
    let mut m = [[0.0; 3]; 6];
    for k in 0..6 {
        for j in 0..3 {
            m[k][j] = g.area / 3.0 * g.grads[j][k % 2];
        }
    }
    m
}

/// c_u ν h_K² / L0² (∇·u, ∇·v)_K.
pub fn local_div_div(tri: [Point; 3], params: &Params) -> Result<Block6> {
    let g = ElementGeometry::new(tri)?;
    Ok(div_div_block(&g, params))
}

fn div_div_block(g: &ElementGeometry, params: &Params) -> Block6 {
    let d = g.divs();
    let scale = params.c_u * params.nu * g.h * g.h / (params.l0 * params.l0) * g.area;
    let mut m = [[0.0; 6]; 6];
    for a in 0..6 {
        for b in 0..6 {
            m[a][b] = scale * d[a] * d[b];
        }
    }
    m
}

/// −(L0²/ν) (∇p, ∇q)_K.
pub fn local_pressure_laplacian(tri: [Point; 3], params: &Params) -> Result<Block3> {
    let g = ElementGeometry::new(tri)?;
    Ok(pressure_laplacian_block(&g, params))
}

fn pressure_laplacian_block(g: &ElementGeometry, params: &Params) -> Block3 {
    let scale = -params.l0 * params.l0 / params.nu * g.area;
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = scale * (g.grads[i][0] * g.grads[j][0] + g.grads[i][1] * g.grads[j][1]);
        }
    }
    m
}

/// Which pieces of the bilinear form to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Terms {
    pub curl_curl: bool,
    pub mixed: bool,
    pub div_div: bool,
    pub pressure_laplacian: bool,
    /// Consistency, symmetrisation and penalty boundary terms.
    pub nitsche: bool,
    /// (L0²/ν)⟨n·∇p, q⟩_Γ and its symmetric counterpart.
    pub p_flux: bool,
}

impl Terms {
    pub fn for_params(params: &Params) -> Terms {
        let f = params.formulation;
        Terms {
            curl_curl: true,
            mixed: true,
            div_div: f.is_stabilised(),
            pressure_laplacian: f.is_stabilised(),
            nitsche: !f.is_strong(),
            p_flux: f == Formulation::StabilisedNitsche && params.p_flux_terms,
        }
    }

    /// Only the stabilisation terms (s_u, s_p and the p-flux boundary pair).
    pub fn stabilisation_only() -> Terms {
        Terms {
            curl_curl: false,
            mixed: false,
            div_div: true,
            pressure_laplacian: true,
            nitsche: false,
            p_flux: true,
        }
    }

    fn has_volume(&self) -> bool {
        self.curl_curl || self.mixed || self.div_div || self.pressure_laplacian
    }

    fn has_edge(&self) -> bool {
        self.nitsche || self.p_flux
    }
}

/// Element matrix in the 9×9 layout for the selected volume terms.
pub fn local_element_matrix(tri: [Point; 3], params: &Params, terms: &Terms) -> Result<Local9> {
    let g = ElementGeometry::new(tri)?;
    Ok(element_matrix(&g, params, terms))
}

fn element_matrix(g: &ElementGeometry, params: &Params, terms: &Terms) -> Local9 {
    let mut m = [[0.0; 9]; 9];
    if terms.curl_curl {
        let b = curl_curl_block(g, params.nu);
        for a in 0..6 {
            for c in 0..6 {
                m[vec_slot(a)][vec_slot(c)] += b[a][c];
            }
        }
    }
    if terms.div_div {
        let b = div_div_block(g, params);
        for a in 0..6 {
            for c in 0..6 {
                m[vec_slot(a)][vec_slot(c)] += b[a][c];
            }
        }
    }
    if terms.mixed {
        let b = mixed_grad_block(g);
        for k in 0..6 {
            for j in 0..3 {
                m[vec_slot(k)][p_slot(j)] += b[k][j];
                m[p_slot(j)][vec_slot(k)] += b[k][j];
            }
        }
    }
    if terms.pressure_laplacian {
        let b = pressure_laplacian_block(g, params);
        for i in 0..3 {
            for j in 0..3 {
                m[p_slot(i)][p_slot(j)] += b[i][j];
            }
        }
    }
    symmetrize(&mut m);
    m
}

/// A boundary edge seen from its adjacent triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGeometry {
    pub tri: [Point; 3],
    /// Local indices (into `tri`) of the edge endpoints.
    pub edge: [usize; 2],
    pub normal: [f64; 2],
    pub length: f64,
    pub local_h: f64,
}

impl EdgeGeometry {
    pub fn from_mesh(mesh: &Mesh, e: &BoundaryEdge) -> Result<EdgeGeometry> {
        let tri = mesh.triangles()[e.triangle];
        let local = |v: usize| {
            tri.v.iter().position(|&w| w == v).ok_or_else(|| {
                Error::InvalidMesh(format!("boundary edge vertex {v} not in triangle {}", e.triangle))
            })
        };
        Ok(EdgeGeometry {
            tri: mesh.triangle_points(e.triangle),
            edge: [local(e.v[0])?, local(e.v[1])?],
            normal: e.normal,
            length: e.length,
            local_h: e.local_h,
        })
    }

    fn on_edge(&self, i: usize) -> bool {
        self.edge.contains(&i)
    }

    /// ∫_e λ_i.
    fn lambda_integral(&self, i: usize) -> f64 {
        if self.on_edge(i) {
            0.5 * self.length
        } else {
            0.0
        }
    }

    /// ∫_e λ_i λ_j.
    fn mass(&self, i: usize, j: usize) -> f64 {
        if !(self.on_edge(i) && self.on_edge(j)) {
            0.0
        } else if i == j {
            self.length / 3.0
        } else {
            self.length / 6.0
        }
    }

    /// Coefficient of λ_i in t(φ_k).
    fn tangential(&self, k: usize) -> f64 {
        if k % 2 == 0 {
            -self.normal[1]
        } else {
            self.normal[0]
        }
    }
}

/// Boundary-edge contributions in the 9×9 layout of the adjacent triangle.
///
/// Nitsche terms: −ν⟨t(v), c(u)⟩ − ν⟨t(u), c(v)⟩ − ⟨n·u, q⟩ − ⟨n·v, p⟩ plus
/// N_u ν/h ⟨t(v), t(u)⟩ − N_p L0²/(ν h) ⟨p, q⟩; p-flux terms:
/// (L0²/ν)(⟨n·∇p, q⟩ + ⟨p, n·∇q⟩). h is the diameter of the adjacent element.
pub fn edge_nitsche_blocks(edge: &EdgeGeometry, params: &Params, terms: &Terms) -> Result<Local9> {
    let g = ElementGeometry::new(edge.tri)?;
    Ok(edge_matrix(edge, &g, params, terms))
}

fn edge_matrix(edge: &EdgeGeometry, g: &ElementGeometry, params: &Params, terms: &Terms) -> Local9 {
    let mut m = [[0.0; 9]; 9];
    let nu = params.nu;
    let h = edge.local_h;
    let l0sq = params.l0 * params.l0;
    let n = edge.normal;
    if terms.nitsche {
        let curls = g.curls();
        let penalty_u = params.n_u * nu / h;
        let penalty_p = params.n_p * l0sq / (nu * h);
        for a in 0..6 {
            let ta = edge.tangential(a) * edge.lambda_integral(a / 2);
            for b in 0..6 {
                let tb = edge.tangential(b) * edge.lambda_integral(b / 2);
                let consistency = -nu * (ta * curls[b] + curls[a] * tb);
                let penalty = penalty_u * edge.tangential(a) * edge.tangential(b) * edge.mass(a / 2, b / 2);
                m[vec_slot(a)][vec_slot(b)] += consistency + penalty;
            }
            for j in 0..3 {
                let v = -n[a % 2] * edge.mass(a / 2, j);
                m[vec_slot(a)][p_slot(j)] += v;
                m[p_slot(j)][vec_slot(a)] += v;
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                m[p_slot(i)][p_slot(j)] -= penalty_p * edge.mass(i, j);
            }
        }
    }
    if terms.p_flux {
        let scale = l0sq / nu;
        let dn: [f64; 3] = std::array::from_fn(|j| n[0] * g.grads[j][0] + n[1] * g.grads[j][1]);
        for i in 0..3 {
            for j in 0..3 {
                m[p_slot(i)][p_slot(j)] +=
                    scale * (edge.lambda_integral(i) * dn[j] + dn[i] * edge.lambda_integral(j));
            }
        }
    }
    symmetrize(&mut m);
    m
}

/// Vertex adjacency (sorted, including the vertex itself).
fn vertex_adjacency(mesh: &Mesh) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = (0..mesh.n_vertices()).map(|v| vec![v]).collect();
    for t in mesh.triangles() {
        for &a in &t.v {
            for &b in &t.v {
                adj[a].push(b);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

const CHUNK: usize = 4096;

/// Global matrix for the selected terms. Local matrices are computed in
/// parallel and scattered in element order, so the result is deterministic
/// and exactly symmetric.
pub fn assemble_matrix(mesh: &Mesh, params: &Params, terms: &Terms) -> Result<CsrMatrix> {
    params.validate()?;
    let mut a = CsrMatrix::block_pattern(&vertex_adjacency(mesh), DofMap::PER_VERTEX);
    let scatter = |a: &mut CsrMatrix, verts: [usize; 3], local: &Local9| {
        for (i, &vi) in verts.iter().enumerate() {
            for fi in 0..3 {
                let row = 3 * vi + fi;
                for (j, &vj) in verts.iter().enumerate() {
                    for fj in 0..3 {
                        let v = local[3 * i + fi][3 * j + fj];
                        if v != 0.0 {
                            a.add(row, 3 * vj + fj, v);
                        }
                    }
                }
            }
        }
    };

    if terms.has_volume() {
        let tris = mesh.triangles();
        for start in (0..tris.len()).step_by(CHUNK) {
            let end = (start + CHUNK).min(tris.len());
            let locals: Vec<Local9> = (start..end)
                .into_par_iter()
                .map(|t| {
                    let g = ElementGeometry::new(mesh.triangle_points(t))
                        .map_err(|_| Error::DegenerateTriangle { index: t, area: tris[t].area })?;
                    Ok(element_matrix(&g, params, terms))
                })
                .collect::<Result<_>>()?;
            for (t, local) in (start..end).zip(&locals) {
                scatter(&mut a, tris[t].v, local);
            }
        }
    }
    if terms.has_edge() {
        for e in mesh.boundary_edges() {
            let geo = EdgeGeometry::from_mesh(mesh, e)?;
            let g = ElementGeometry::new(geo.tri)?;
            let local = edge_matrix(&geo, &g, params, terms);
            scatter(&mut a, mesh.triangles()[e.triangle].v, &local);
        }
    }
    Ok(a)
}

/// Degree of the triangle rule used for the source term.
pub const SOURCE_QUAD_DEGREE: usize = 6;
/// Degree of the edge rule used for the boundary data terms.
pub const EDGE_QUAD_DEGREE: usize = 3;

/// Right-hand side ⟨v, f⟩ − ν⟨t(ū), c(v)⟩_Γ + N_u ν/h ⟨t(v), t(ū)⟩_Γ; the
/// boundary terms are dropped under strong imposition.
pub fn assemble_rhs(mesh: &Mesh, case: &ProblemCase, params: &Params) -> Result<Vec<f64>> {
    check_domain(mesh, case)?;
    let dofs = DofMap::new(mesh.n_vertices());
    let mut b = vec![0.0; dofs.len()];

    let rule = triangle_rule(SOURCE_QUAD_DEGREE)?;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(t);
        for (lam, w) in rule.iter() {
            let x = [
                lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
                lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
            ];
            let f = case.source_f(x);
            if f == [0.0, 0.0] {
                continue;
            }
            let jw = 2.0 * tri.area * w;
            for i in 0..3 {
                b[3 * tri.v[i]] += jw * lam[i] * f[0];
                b[3 * tri.v[i] + 1] += jw * lam[i] * f[1];
            }
        }
    }

    if !params.formulation.is_strong() {
        let erule = edge_rule(EDGE_QUAD_DEGREE)?;
        for e in mesh.boundary_edges() {
            let geo = EdgeGeometry::from_mesh(mesh, e)?;
            let g = ElementGeometry::new(geo.tri)?;
            let curls = g.curls();
            let verts = mesh.triangles()[e.triangle].v;
            let (pa, pb) = (mesh.point(e.v[0]), mesh.point(e.v[1]));
            let penalty = params.n_u * params.nu / e.local_h;
            for (&s, w) in erule.iter() {
                let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                let ub = case.dirichlet_u(x)?;
                let tu = e.normal[0] * ub[1] - e.normal[1] * ub[0];
                let jw = e.length * w;
                for k in 0..6 {
                    b[3 * verts[k / 2] + k % 2] -= params.nu * jw * tu * curls[k];
                }
                for (lam, local) in [(1.0 - s, geo.edge[0]), (s, geo.edge[1])] {
                    for comp in 0..2 {
                        let k = 2 * local + comp;
                        b[3 * verts[local] + comp] += penalty * jw * tu * geo.tangential(k) * lam;
                    }
                }
            }
        }
    }
    Ok(b)
}

fn check_domain(mesh: &Mesh, case: &ProblemCase) -> Result<()> {
    match case.domain {
        Some(d) if d != mesh.domain() => Err(Error::DomainMismatch {
            case: d,
            mesh: mesh.domain(),
        }),
        _ => Ok(()),
    }
}

/// A nodal unknown fixed to a value by strong imposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraint {
    pub dof: usize,
    pub value: f64,
}

/// Boundary vertex whose (u_x, u_y) pair is replaced by (normal, tangential)
/// components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexFrame {
    pub vertex: usize,
    pub normal: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
    pub formulation: Formulation,
    /// Strongly imposed values, in the rotated frame where one applies.
    pub constraints: Vec<Constraint>,
    pub frames: Vec<VertexFrame>,
    strong_applied: bool,
}

impl LinearSystem {
    /// Whether the system still needs [`apply_strong_bc`] before solving.
    pub fn awaiting_constraints(&self) -> bool {
        self.formulation.is_strong() && !self.strong_applied
    }

    /// Maps a solution of this system back to nodal (u_x, u_y, p) values.
    pub fn to_nodal(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        for f in &self.frames {
            let (i, j) = (3 * f.vertex, 3 * f.vertex + 1);
            let (un, ut) = (x[i], x[j]);
            let [n1, n2] = f.normal;
            out[i] = n1 * un - n2 * ut;
            out[j] = n2 * un + n1 * ut;
        }
        out
    }

    /// B([u, p], [u, −p]) for nodal coefficients x.
    pub fn stability_form(&self, x: &[f64]) -> f64 {
        stability_form(&self.matrix, x)
    }
}

/// xᵀ A y with y = x except for negated pressure entries.
pub fn stability_form(matrix: &CsrMatrix, x: &[f64]) -> f64 {
    let flipped: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| if i % 3 == 2 { -v } else { v })
        .collect();
    matrix.bilinear(&flipped, x)
}

/// Assembles matrix and right-hand side for `params.formulation`. Strong
/// systems still carry their boundary rows; see [`apply_strong_bc`].
pub fn assemble_global(mesh: &Mesh, params: &Params, case: &ProblemCase) -> Result<LinearSystem> {
    check_domain(mesh, case)?;
    let matrix = assemble_matrix(mesh, params, &Terms::for_params(params))?;
    let rhs = assemble_rhs(mesh, case, params)?;
    Ok(LinearSystem {
        matrix,
        rhs,
        dofs: DofMap::new(mesh.n_vertices()),
        formulation: params.formulation,
        constraints: Vec::new(),
        frames: Vec::new(),
        strong_applied: false,
    })
}

/// Assembly followed by strong constraints when the formulation asks for them.
pub fn build_system(mesh: &Mesh, params: &Params, case: &ProblemCase) -> Result<LinearSystem> {
    let system = assemble_global(mesh, params, case)?;
    if params.formulation.is_strong() {
        apply_strong_bc(system, mesh, case, params.corner_strategy)
    } else {
        Ok(system)
    }
}

/// How a boundary vertex is constrained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryVertexKind {
    /// Interior of a boundary piece; normal averaged over the two edges.
    Smooth { normal: [f64; 2] },
    /// Corner with interior angle below π.
    Convex,
    /// Corner with interior angle above π, with the bisector normal.
    Reentrant { bisector: [f64; 2] },
}

/// Classifies every boundary vertex from its two incident boundary edges.
pub fn classify_boundary_vertices(mesh: &Mesh) -> Result<Vec<(usize, BoundaryVertexKind)>> {
    let n = mesh.n_vertices();
    let mut incoming = vec![None; n];
    let mut outgoing = vec![None; n];
    let mut count = vec![0u8; n];
    for (k, e) in mesh.boundary_edges().iter().enumerate() {
        outgoing[e.v[0]] = Some(k);
        incoming[e.v[1]] = Some(k);
        count[e.v[0]] += 1;
        count[e.v[1]] += 1;
    }
    let edges = mesh.boundary_edges();
    let mut out = Vec::new();
    for v in 0..n {
        if count[v] == 0 {
            continue;
        }
        let (Some(ei), Some(eo), 2) = (incoming[v], outgoing[v], count[v]) else {
            return Err(Error::InvalidMesh(format!(
                "boundary vertex {v} has {} incident boundary edges",
                count[v]
            )));
        };
        let (a, b) = (&edges[ei], &edges[eo]);
        let sum = [a.normal[0] + b.normal[0], a.normal[1] + b.normal[1]];
        let len = sum[0].hypot(sum[1]);
        let avg = [sum[0] / len, sum[1] / len];
        let kind = if a.tag == b.tag {
            BoundaryVertexKind::Smooth { normal: avg }
        } else {
            let din = [mesh.point(a.v[1])[0] - mesh.point(a.v[0])[0], mesh.point(a.v[1])[1] - mesh.point(a.v[0])[1]];
            let dout = [mesh.point(b.v[1])[0] - mesh.point(b.v[0])[0], mesh.point(b.v[1])[1] - mesh.point(b.v[0])[1]];
            let turn = din[0] * dout[1] - din[1] * dout[0];
            if turn > 0.0 {
                BoundaryVertexKind::Convex
            } else {
                BoundaryVertexKind::Reentrant { bisector: avg }
            }
        };
        out.push((v, kind));
    }
    Ok(out)
}

/// Strong imposition: p = 0 and t(u) = t(ū) at boundary vertices.
///
/// Smooth boundary vertices are rotated to (normal, tangential) components and
/// the tangential one is fixed. Convex corners fix both components to ū. The
/// corner strategy decides re-entrant corners. Constraints are eliminated
/// symmetrically (rows and columns) with the right-hand side updated.
pub fn apply_strong_bc(
    system: LinearSystem,
    mesh: &Mesh,
    case: &ProblemCase,
    strategy: CornerStrategy,
) -> Result<LinearSystem> {
    if !system.formulation.is_strong() {
        return Err(Error::InvalidArgument(
            "strong boundary conditions need the stabilised-strong formulation".into(),
        ));
    }
    if system.strong_applied {
        return Err(Error::InvalidArgument("strong boundary conditions already applied".into()));
    }
    let dofs = system.dofs;
    // ū at corners; the singular corner gets zero
    let corner_value = |v: usize| -> Result<[f64; 2]> {
        match case.dirichlet_u(mesh.point(v)) {
            Ok(u) => Ok(u),
            Err(Error::SingularPoint { .. }) => Ok([0.0, 0.0]),
            Err(e) => Err(e),
        }
    };

    let mut frames = Vec::new();
    let mut constraints = Vec::new();
    for (v, kind) in classify_boundary_vertices(mesh)? {
        constraints.push(Constraint {
            dof: dofs.dof(v, Field::P),
            value: 0.0,
        });
        let rotated = |normal: [f64; 2], frames: &mut Vec<VertexFrame>, cons: &mut Vec<Constraint>| -> Result<()> {
            let ub = corner_value(v)?;
            let tangential = normal[0] * ub[1] - normal[1] * ub[0];
            frames.push(VertexFrame { vertex: v, normal });
            cons.push(Constraint {
                dof: dofs.dof(v, Field::Uy),
                value: tangential,
            });
            Ok(())
        };
        match kind {
            BoundaryVertexKind::Smooth { normal } => rotated(normal, &mut frames, &mut constraints)?,
            BoundaryVertexKind::Convex => {
                let ub = corner_value(v)?;
                constraints.push(Constraint { dof: dofs.dof(v, Field::Ux), value: ub[0] });
                constraints.push(Constraint { dof: dofs.dof(v, Field::Uy), value: ub[1] });
            }
            BoundaryVertexKind::Reentrant { bisector } => match strategy {
                CornerStrategy::BothZero => {
                    let ub = corner_value(v)?;
                    constraints.push(Constraint { dof: dofs.dof(v, Field::Ux), value: ub[0] });
                    constraints.push(Constraint { dof: dofs.dof(v, Field::Uy), value: ub[1] });
                }
                CornerStrategy::Free => {}
                CornerStrategy::BisectorNormal => rotated(bisector, &mut frames, &mut constraints)?,
            },
        }
    }

    // rotate: A' = Tᵀ A T, b' = Tᵀ b with u_old = T u_new
    let mut frame_of = vec![None; dofs.n_vertices()];
    for f in &frames {
        frame_of[f.vertex] = Some(f.normal);
    }
    let t_row = |i: usize| -> [(usize, f64); 2] {
        let (v, field) = dofs.field_of(i);
        match (frame_of[v], field) {
            (Some([n1, n2]), Field::Ux) => [(3 * v, n1), (3 * v + 1, -n2)],
            (Some([n1, n2]), Field::Uy) => [(3 * v, n2), (3 * v + 1, n1)],
            _ => [(i, 1.0), (i, 0.0)],
        }
    };
    let mut trips: Vec<Triplet> = Vec::with_capacity(system.matrix.nnz() + 8 * frames.len());
    for (i, j, v) in system.matrix.triplets() {
        for (a, ta) in t_row(i) {
            if ta == 0.0 {
                continue;
            }
            for (b, tb) in t_row(j) {
                if tb != 0.0 {
                    trips.push((a, b, ta * v * tb));
                }
            }
        }
    }
    let rotated = CsrMatrix::from_triplets(dofs.len(), &trips).symmetrized();
    let mut rhs = vec![0.0; dofs.len()];
    for (i, &bi) in system.rhs.iter().enumerate() {
        for (a, ta) in t_row(i) {
            rhs[a] += ta * bi;
        }
    }

    // symmetric elimination
    let mut fixed = vec![None; dofs.len()];
    for c in &constraints {
        fixed[c.dof] = Some(c.value);
    }
    let mut kept: Vec<Triplet> = Vec::with_capacity(rotated.nnz());
    for (i, j, v) in rotated.triplets() {
        match (fixed[i], fixed[j]) {
            (None, None) => kept.push((i, j, v)),
            (None, Some(g)) => rhs[i] -= v * g,
            _ => {}
        }
    }
    for c in &constraints {
        kept.push((c.dof, c.dof, 1.0));
        rhs[c.dof] = c.value;
    }
    Ok(LinearSystem {
        matrix: CsrMatrix::from_triplets(dofs.len(), &kept),
        rhs,
        dofs,
        formulation: system.formulation,
        constraints,
        frames,
        strong_applied: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{gen_lshape, gen_square_uniform};
    use crate::problems::{lshape_case, rotation_case, square_case};

    const REF: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    #[test]
    fn curl_curl_reference_entries() {
        let b = local_curl_curl(REF, 1.0).unwrap();
        // φ_0 = (λ₀, 0), φ_1 = (0, λ₀): c = −∂₂λ₀ = 1 and ∂₁λ₀ = −1
        assert!((b[0][0] - 0.5).abs() < 1e-15);
        assert!((b[0][1] + 0.5).abs() < 1e-15);
        // constant field (1, 0) = Σ (λ_i, 0)
        let ones_x = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        for row in &b {
            let s: f64 = row.iter().zip(&ones_x).map(|(a, c)| a * c).sum();
            assert!(s.abs() < 1e-15);
        }
        // gradient of λ₂ = y is (0, 1), also constant; ∇(x y) is linear: (y, x)
        let grad_xy = [0.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        let e: f64 = (0..6)
            .map(|a| (0..6).map(|c| grad_xy[a] * b[a][c] * grad_xy[c]).sum::<f64>())
            .sum();
        assert!(e.abs() < 1e-15);
    }

    #[test]
    fn mixed_grad_reference_entries() {
        let b = local_mixed_grad(REF).unwrap();
        // ∫ λ₀ ∂₁λ₁ = (1/2)(1/3)(1)
        assert!((b[0][1] - 1.0 / 6.0).abs() < 1e-15);
        for row in &b {
            assert!(row.iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn div_div_reference_entries() {
        let p = Params::stabilised(1.0, 1.0);
        let b = local_div_div(REF, &p).unwrap();
        // (λ₁, 0): ∂₁λ₁ = 1, h² = 2, area 1/2
        assert!((b[2][2] - 1.0).abs() < 1e-14);
        let rotation = [0.0, 0.0, 0.0, 1.0, -1.0, 0.0];
        let e: f64 = (0..6)
            .map(|a| (0..6).map(|c| rotation[a] * b[a][c] * rotation[c]).sum::<f64>())
            .sum();
        assert!(e.abs() < 1e-15);
        let b2 = local_div_div(REF, &Params::stabilised(2.0, 1.0)).unwrap();
        assert!((b2[2][2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn pressure_laplacian_reference_entries() {
        let b = local_pressure_laplacian(REF, &Params::stabilised(1.0, 1.0)).unwrap();
        assert!((b[1][1] + 0.5).abs() < 1e-15);
        for row in &b {
            assert!(row.iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_element_rejected() {
        let flat = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(local_curl_curl(flat, 1.0).is_err());
        assert!(local_mixed_grad(flat).is_err());
    }

    #[test]
    fn bottom_edge_penalty_block() {
        // unit-square cell, bottom edge with outward normal (0, −1): t(v) = v₁
        let tri = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]];
        let edge = EdgeGeometry {
            tri,
            edge: [0, 1],
            normal: [0.0, -1.0],
            length: 1.0,
            local_h: 2f64.sqrt(),
        };
        let params = Params::stabilised(1.0, 1.0);
        let terms = Terms {
            curl_curl: false,
            mixed: false,
            div_div: false,
            pressure_laplacian: false,
            nitsche: true,
            p_flux: false,
        };
        let full = edge_nitsche_blocks(&edge, &params, &terms).unwrap();
        let no_penalty = edge_nitsche_blocks(&edge, &params.with_penalties(0.0, 0.0), &terms).unwrap();
        let scale = 100.0 / 2f64.sqrt() / 6.0;
        let expect = [[2.0, 1.0], [1.0, 2.0]];
        for i in 0..2 {
            for j in 0..2 {
                let got = full[3 * i][3 * j] - no_penalty[3 * i][3 * j];
                assert!((got - scale * expect[i][j]).abs() < 1e-12);
            }
        }
        // pressure penalty makes the boundary p-p diagonal negative
        assert!(full[2][2] < 0.0 && full[5][5] < 0.0);
    }

    #[test]
    fn dof_count_and_symmetry() {
        let mesh = gen_square_uniform(2).unwrap();
        let case = square_case(1.0).unwrap();
        let sys = assemble_global(&mesh, &Params::stabilised(2.0, 1.0), &case).unwrap();
        assert_eq!(sys.matrix.dim(), 27);
        assert_eq!(sys.matrix.max_asymmetry(), 0.0);
    }

    #[test]
    fn zero_data_gives_zero_rhs() {
        // rotation case scaled to zero is not available; use f = 0 and the
        // L-shape data restricted to the volume term under strong imposition
        let mesh = gen_lshape(4).unwrap();
        let case = lshape_case(2, 1.0).unwrap();
        let strong = Params::stabilised(0.5, 1.0).with_formulation(Formulation::StabilisedStrong);
        let b = assemble_rhs(&mesh, &case, &strong).unwrap();
        assert!(b.iter().all(|&v| v == 0.0));
        let weak = assemble_rhs(&mesh, &case, &Params::stabilised(0.5, 1.0)).unwrap();
        assert!(weak.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn domain_mismatch_is_reported() {
        let mesh = gen_square_uniform(2).unwrap();
        let case = lshape_case(1, 1.0).unwrap();
        assert!(matches!(
            assemble_global(&mesh, &Params::default(), &case),
            Err(Error::DomainMismatch { .. })
        ));
    }

    #[test]
    fn nitsche_residual_vanishes_for_tangent_constant() {
        // u = (1, 0), ū = u: on an isolated boundary edge the consistency and
        // penalty residuals equal the data terms
        let mesh = gen_square_uniform(2).unwrap();
        let case = rotation_case(1.0).unwrap();
        let params = Params::stabilised(1.0, 1.0);
        let sys = assemble_global(&mesh, &params, &case).unwrap();
        let x: Vec<f64> = (0..sys.dofs.len())
            .map(|d| {
                let (v, f) = sys.dofs.field_of(d);
                let p = mesh.point(v);
                match f {
                    Field::Ux => -p[1],
                    Field::Uy => p[0],
                    Field::P => 0.0,
                }
            })
            .collect();
        let ax = sys.matrix.matvec(&x);
        let res = ax.iter().zip(&sys.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(res < 1e-12, "residual {res}");
    }

    #[test]
    fn strong_constraints_square_corners() {
        let mesh = gen_square_uniform(4).unwrap();
        let case = square_case(1.0).unwrap();
        let params = Params::stabilised(2.0, 1.0).with_formulation(Formulation::StabilisedStrong);
        let sys = build_system(&mesh, &params, &case).unwrap();
        assert!(!sys.awaiting_constraints());
        let kinds = classify_boundary_vertices(&mesh).unwrap();
        let convex = kinds.iter().filter(|(_, k)| *k == BoundaryVertexKind::Convex).count();
        assert_eq!(convex, 4);
        // p at 16 boundary vertices, 2 at each corner, 1 at the other 12
        assert_eq!(sys.constraints.len(), 16 + 8 + 12);
        assert_eq!(sys.matrix.max_asymmetry(), 0.0);
        assert!(apply_strong_bc(sys, &mesh, &case, CornerStrategy::Free).is_err());
    }

    #[test]
    fn reentrant_corner_strategies() {
        let mesh = gen_lshape(4).unwrap();
        let kinds = classify_boundary_vertices(&mesh).unwrap();
        let reentrant: Vec<_> = kinds
            .iter()
            .filter(|(_, k)| matches!(k, BoundaryVertexKind::Reentrant { .. }))
            .collect();
        assert_eq!(reentrant.len(), 1);
        assert_eq!(mesh.point(reentrant[0].0), [0.0, 0.0]);
        let BoundaryVertexKind::Reentrant { bisector } = reentrant[0].1 else { unreachable!() };
        let s = 0.5f64.sqrt();
        assert!((bisector[0] - s).abs() < 1e-15 && (bisector[1] + s).abs() < 1e-15);

        let case = lshape_case(1, 1.0).unwrap();
        let base = Params::stabilised(0.5, 1.0).with_formulation(Formulation::StabilisedStrong);
        let counts: Vec<usize> = [CornerStrategy::BothZero, CornerStrategy::Free, CornerStrategy::BisectorNormal]
            .iter()
            .map(|&s| build_system(&mesh, &base.with_corner_strategy(s), &case).unwrap().constraints.len())
            .collect();
        assert_eq!(counts[0], counts[1] + 2);
        assert_eq!(counts[2], counts[1] + 1);
    }
}
