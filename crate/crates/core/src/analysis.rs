//! Error norms, stability norms and convergence rates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{ElementGeometry, Params};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::problems::ProblemCase;
use crate::quadrature::{edge_rule, triangle_rule, TriangleRule};

/// Degree of the triangle rule used for error norms.
pub const ERROR_QUAD_DEGREE: usize = 6;
/// Extra halvings of the sub-triangles touching a singular point.
const GRADING_DEPTH: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub h: f64,
    /// ‖u − u_h‖ in L².
    pub err_u: f64,
    /// ‖Π₀∇×u − ∇×u_h‖ in L², Π₀ the elementwise mean. This is the curl
    /// error shown in the tables; it superconverges on criss-cross and
    /// Powell-Sabin meshes.
    pub err_curl: f64,
    /// ‖∇×(u − u_h)‖ in L², which is at best O(h) for P1 fields.
    #[serde(default)]
    pub err_curl_l2: f64,
    /// ‖p_h‖ in L² (the exact pseudo-pressure is zero).
    pub err_p: f64,
    pub dofs: usize,
    #[serde(default)]
    pub triple: Option<f64>,
}

/// P1 field values at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeValue {
    pub u: [f64; 2],
    pub p: f64,
    /// Element-constant scalar curl.
    pub curl: f64,
}

fn check_len(mesh: &Mesh, values: &[f64]) -> Result<()> {
    if values.len() != 3 * mesh.n_vertices() {
        return Err(Error::InvalidArgument(format!(
            "expected {} nodal values, got {}",
            3 * mesh.n_vertices(),
            values.len()
        )));
    }
    Ok(())
}

fn barycentric(g: &ElementGeometry, tri: &[Point; 3], x: Point) -> [f64; 3] {
    let c = [
        (tri[0][0] + tri[1][0] + tri[2][0]) / 3.0,
        (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0,
    ];
    let d = [x[0] - c[0], x[1] - c[1]];
    std::array::from_fn(|i| 1.0 / 3.0 + g.grads[i][0] * d[0] + g.grads[i][1] * d[1])
}

fn element_value(mesh: &Mesh, values: &[f64], t: usize, g: &ElementGeometry, lam: [f64; 3]) -> FeValue {
    let v = mesh.triangles()[t].v;
    let mut out = FeValue {
        u: [0.0; 2],
        p: 0.0,
        curl: 0.0,
    };
    let curls = g.curls();
    for i in 0..3 {
        let (ux, uy, p) = (values[3 * v[i]], values[3 * v[i] + 1], values[3 * v[i] + 2]);
        out.u[0] += lam[i] * ux;
        out.u[1] += lam[i] * uy;
        out.p += lam[i] * p;
        out.curl += curls[2 * i] * ux + curls[2 * i + 1] * uy;
    }
    out
}

/// Evaluates nodal P1 fields at `x` by scanning the triangles.
pub fn evaluate_fe(mesh: &Mesh, values: &[f64], x: Point) -> Result<FeValue> {
    check_len(mesh, values)?;
    const TOL: f64 = 1e-12;
    for t in 0..mesh.triangles().len() {
        let tri = mesh.triangle_points(t);
        let g = ElementGeometry::new(tri)?;
        let lam = barycentric(&g, &tri, x);
        if lam.iter().all(|&l| l >= -TOL) {
            return Ok(element_value(mesh, values, t, &g, lam));
        }
    }
    Err(Error::PointOutsideMesh { x: x[0], y: x[1] })
}

/// Nodal interpolant of the exact fields; a singular vertex gets zero.
pub fn nodal_interpolant(mesh: &Mesh, case: &ProblemCase) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(3 * mesh.n_vertices());
    for v in 0..mesh.n_vertices() {
        let x = mesh.point(v);
        let u = match case.exact_u(x) {
            Ok(u) => u,
            Err(Error::SingularPoint { .. }) => [0.0, 0.0],
            Err(e) => return Err(e),
        };
        out.extend([u[0], u[1], case.exact_p(x)]);
    }
    Ok(out)
}

fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

fn split4(p: [Point; 3]) -> [[Point; 3]; 4] {
    let m01 = midpoint(p[0], p[1]);
    let m12 = midpoint(p[1], p[2]);
    let m20 = midpoint(p[2], p[0]);
    [
        [p[0], m01, m20],
        [m01, p[1], m12],
        [m20, m12, p[2]],
        [m01, m12, m20],
    ]
}

fn signed_area(p: &[Point; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

/// Squared error contributions (u, curl, p) over one element, plus ∫ ∇×u.
struct ElementIntegrator<'a> {
    mesh: &'a Mesh,
    values: &'a [f64],
    case: &'a ProblemCase,
    rule: &'a TriangleRule,
    singular: Option<Point>,
}

impl ElementIntegrator<'_> {
    /// Returns ‖u − u_h‖², ‖c − c_h‖², ‖p − p_h‖², ‖Π₀c − c_h‖² on element t.
    fn element(&self, t: usize) -> Result<[f64; 4]> {
        let tri = self.mesh.triangle_points(t);
        let g = ElementGeometry::new(tri)?;
        let mut acc = [0.0; 4];
        match self.singular {
            Some(s) => {
                for sub in split4(tri) {
                    self.graded(t, &g, &tri, sub, s, GRADING_DEPTH, &mut acc)?;
                }
            }
            None => self.sub(t, &g, &tri, tri, &mut acc)?,
        }
        let c_h = element_value(self.mesh, self.values, t, &g, [1.0 / 3.0; 3]).curl;
        let mean = acc[3] / g.area;
        acc[3] = g.area * (mean - c_h).powi(2);
        Ok(acc)
    }

    #[allow(clippy::too_many_arguments)]
    fn graded(
        &self,
        t: usize,
        g: &ElementGeometry,
        parent: &[Point; 3],
        sub: [Point; 3],
        s: Point,
        depth: usize,
        acc: &mut [f64; 4],
    ) -> Result<()> {
        if depth > 0 && sub.contains(&s) {
            for child in split4(sub) {
                self.graded(t, g, parent, child, s, depth - 1, acc)?;
            }
            Ok(())
        } else {
            self.sub(t, g, parent, sub, acc)
        }
    }

    fn sub(&self, t: usize, g: &ElementGeometry, parent: &[Point; 3], sub: [Point; 3], acc: &mut [f64; 4]) -> Result<()> {
        let jac = 2.0 * signed_area(&sub).abs();
        for (lam, w) in self.rule.iter() {
            let x = [
                lam[0] * sub[0][0] + lam[1] * sub[1][0] + lam[2] * sub[2][0],
                lam[0] * sub[0][1] + lam[1] * sub[1][1] + lam[2] * sub[2][1],
            ];
            let fe = element_value(self.mesh, self.values, t, g, barycentric(g, parent, x));
            let u = self.case.exact_u(x)?;
            let c = self.case.exact_curl_u(x)?;
            let p = self.case.exact_p(x);
            let jw = jac * w;
            acc[0] += jw * ((u[0] - fe.u[0]).powi(2) + (u[1] - fe.u[1]).powi(2));
            acc[1] += jw * (c - fe.curl).powi(2);
            acc[2] += jw * (p - fe.p).powi(2);
            acc[3] += jw * c;
        }
        Ok(())
    }
}

/// Pairwise summation; fixed order regardless of thread count.
fn pairwise_sum(v: &[[f64; 4]]) -> [f64; 4] {
    match v.len() {
        0 => [0.0; 4],
        1 => v[0],
        n => {
            let (a, b) = v.split_at(n / 2);
            let (a, b) = (pairwise_sum(a), pairwise_sum(b));
            std::array::from_fn(|i| a[i] + b[i])
        }
    }
}

/// L² errors of nodal fields against the exact solution of `case`.
pub fn l2_errors(mesh: &Mesh, values: &[f64], case: &ProblemCase) -> Result<ErrorReport> {
    check_len(mesh, values)?;
    if let Some(d) = case.domain {
        if d != mesh.domain() {
            return Err(Error::DomainMismatch { case: d, mesh: mesh.domain() });
        }
    }
    let rule = triangle_rule(ERROR_QUAD_DEGREE)?;
    let integrator = ElementIntegrator {
        mesh,
        values,
        case,
        rule: &rule,
        singular: case.singular_point(),
    };
    let parts: Vec<[f64; 4]> = (0..mesh.triangles().len())
        .into_par_iter()
        .map(|t| integrator.element(t))
        .collect::<Result<_>>()?;
    let total = pairwise_sum(&parts);
    Ok(ErrorReport {
        h: mesh.h(),
        err_u: total[0].sqrt(),
        err_curl: total[3].sqrt(),
        err_curl_l2: total[1].sqrt(),
        err_p: total[2].sqrt(),
        dofs: values.len(),
        triple: None,
    })
}

/// Mesh-dependent stability norm of nodal fields (v, q):
/// ν‖∇×v‖² + ν/L0² ‖v‖² + L0²/ν ‖∇q‖² + ν h_K²/L0² ‖∇·v‖²
/// + Σ_e ν/h ‖t(v)‖²_e + L0²/(ν h) ‖q‖²_e, returned as a square root.
pub fn triple_norm(mesh: &Mesh, values: &[f64], params: &Params) -> Result<f64> {
    check_len(mesh, values)?;
    let nu = params.nu;
    let l0sq = params.l0 * params.l0;
    let mut sum = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = ElementGeometry::new(mesh.triangle_points(t))?;
        let (curls, divs) = (g.curls(), g.divs());
        let (mut curl, mut div, mut gq) = (0.0, 0.0, [0.0; 2]);
        let mut mass = 0.0;
        for i in 0..3 {
            let vi = tri.v[i];
            let (ux, uy, q) = (values[3 * vi], values[3 * vi + 1], values[3 * vi + 2]);
            curl += curls[2 * i] * ux + curls[2 * i + 1] * uy;
            div += divs[2 * i] * ux + divs[2 * i + 1] * uy;
            gq[0] += g.grads[i][0] * q;
            gq[1] += g.grads[i][1] * q;
            for j in 0..3 {
                let vj = tri.v[j];
                let m = if i == j { g.area / 6.0 } else { g.area / 12.0 };
                mass += m * (ux * values[3 * vj] + uy * values[3 * vj + 1]);
            }
        }
        sum += nu * g.area * curl * curl
            + nu / l0sq * mass
            + l0sq / nu * g.area * (gq[0] * gq[0] + gq[1] * gq[1])
            + nu * g.h * g.h / l0sq * g.area * div * div;
    }
    for e in mesh.boundary_edges() {
        let [a, b] = e.v;
        let t = |v: usize| e.normal[0] * values[3 * v + 1] - e.normal[1] * values[3 * v];
        let (ta, tb) = (t(a), t(b));
        let (qa, qb) = (values[3 * a + 2], values[3 * b + 2]);
        let edge_mass = |x: f64, y: f64| e.length / 3.0 * (x * x + x * y + y * y);
        sum += nu / e.local_h * edge_mass(ta, tb) + l0sq / (nu * e.local_h) * edge_mass(qa, qb);
    }
    Ok(sum.sqrt())
}

/// ‖f‖_{L²} + (Σ_e ν/h ‖t(ū)‖²_e)^{1/2}, the data size bounding the
/// discrete solution in the stability norm.
pub fn data_norm(mesh: &Mesh, case: &ProblemCase, params: &Params) -> Result<f64> {
    let rule = triangle_rule(ERROR_QUAD_DEGREE)?;
    let mut f2 = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(t);
        for (lam, w) in rule.iter() {
            let x = [
                lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
                lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
            ];
            let f = case.source_f(x);
            f2 += 2.0 * tri.area * w * (f[0] * f[0] + f[1] * f[1]);
        }
    }
    let erule = edge_rule(ERROR_QUAD_DEGREE)?;
    let mut g2 = 0.0;
    for e in mesh.boundary_edges() {
        let (a, b) = (mesh.point(e.v[0]), mesh.point(e.v[1]));
        for (&s, w) in erule.iter() {
            let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let u = case.dirichlet_u(x)?;
            let tu = e.normal[0] * u[1] - e.normal[1] * u[0];
            g2 += params.nu / e.local_h * e.length * w * tu * tu;
        }
    }
    Ok(f2.sqrt() + g2.sqrt())
}

/// log(e_c / e_f) / log(h_c / h_f).
pub fn convergence_rate(coarse: &ErrorReport, fine: &ErrorReport) -> Result<f64> {
    rate(coarse.err_u, fine.err_u, coarse.h, fine.h)
}

/// Rate between two (error, h) pairs.
pub fn rate(err_coarse: f64, err_fine: f64, h_coarse: f64, h_fine: f64) -> Result<f64> {
    if !(err_coarse > 0.0 && err_fine > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rates need positive errors, got {err_coarse} and {err_fine}"
        )));
    }
    if !(h_fine < h_coarse && h_fine > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rates need 0 < h_fine < h_coarse, got {h_fine} and {h_coarse}"
        )));
    }
    Ok((err_coarse / err_fine).ln() / (h_coarse / h_fine).ln())
}
