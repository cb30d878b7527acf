//! Independent reference computations shared by the integration tests.
//!
//! The oracle never touches the crate's geometry or quadrature code: basis
//! functions come from inverting the 3x3 Vandermonde matrix with nalgebra and
//! integrals use a 4x4 collapsed Gauss rule (exact to degree 7 on triangles).
#![allow(dead_code)]

use maxnit_core::assembly::{Local9, Params};
use maxnit_core::mesh::Point;
use nalgebra::{Matrix3, Vector3};
use rand::Rng;

const GL4_X: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
const GL4_W: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];

/// P1 basis on a triangle: λ_i(x, y) = c[i].0 + c[i].1 (x - o_x) + c[i].2 (y - o_y)
/// with o the first vertex (keeps the Vandermonde matrix well conditioned).
pub struct P1 {
    coef: [Vector3<f64>; 3],
    origin: Point,
    pub tri: [Point; 3],
}

impl P1 {
    pub fn new(tri: [Point; 3]) -> P1 {
        let o = tri[0];
        let v = Matrix3::from_fn(|r, c| match c {
            0 => 1.0,
            1 => tri[r][0] - o[0],
            _ => tri[r][1] - o[1],
        });
        let inv = v.try_inverse().expect("non-degenerate triangle");
        P1 {
            coef: std::array::from_fn(|i| inv.column(i).into_owned()),
            origin: o,
            tri,
        }
    }

    pub fn value(&self, i: usize, p: Point) -> f64 {
        let c = &self.coef[i];
        c[0] + c[1] * (p[0] - self.origin[0]) + c[2] * (p[1] - self.origin[1])
    }

    pub fn grad(&self, i: usize) -> [f64; 2] {
        [self.coef[i][1], self.coef[i][2]]
    }

    pub fn diameter(&self) -> f64 {
        let d = |a: Point, b: Point| (a[0] - b[0]).hypot(a[1] - b[1]);
        d(self.tri[0], self.tri[1]).max(d(self.tri[1], self.tri[2])).max(d(self.tri[2], self.tri[0]))
    }

    /// ∫_K g by the collapsed Gauss rule.
    pub fn integrate(&self, g: impl Fn(Point) -> f64) -> f64 {
        let [a, b, c] = self.tri;
        let jac = ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
        let mut s = 0.0;
        for (xu, wu) in GL4_X.iter().zip(GL4_W) {
            let u = 0.5 * (xu + 1.0);
            for (xv, wv) in GL4_X.iter().zip(GL4_W) {
                let v = 0.5 * (xv + 1.0) * (1.0 - u);
                let p = [a[0] + u * (b[0] - a[0]) + v * (c[0] - a[0]), a[1] + u * (b[1] - a[1]) + v * (c[1] - a[1])];
                s += 0.25 * wu * wv * (1.0 - u) * jac * g(p);
            }
        }
        s
    }

    /// ∫ over the segment [p, q] by 4-point Gauss.
    pub fn integrate_segment(p: Point, q: Point, g: impl Fn(Point) -> f64) -> f64 {
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        GL4_X
            .iter()
            .zip(GL4_W)
            .map(|(x, w)| {
                let t = 0.5 * (x + 1.0);
                0.5 * w * len * g([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])])
            })
            .sum()
    }
}

/// Slot of (vertex, field) in the 9x9 layout; field 0, 1 = u_x, u_y, 2 = p.
fn slot(vertex: usize, field: usize) -> usize {
    3 * vertex + field
}

/// Vector basis k = (vertex k/2, component k%2): value, curl, div.
fn vec_basis(b: &P1, k: usize, p: Point) -> [f64; 2] {
    let l = b.value(k / 2, p);
    if k % 2 == 0 {
        [l, 0.0]
    } else {
        [0.0, l]
    }
}

fn vec_curl(b: &P1, k: usize) -> f64 {
    let g = b.grad(k / 2);
    if k % 2 == 0 {
        -g[1]
    } else {
        g[0]
    }
}

fn vec_div(b: &P1, k: usize) -> f64 {
    b.grad(k / 2)[k % 2]
}

/// Stabilised element matrix: curl-curl, mixed, div-div and pressure Laplacian.
pub fn element_oracle(tri: [Point; 3], params: &Params) -> Local9 {
    let b = P1::new(tri);
    let h = b.diameter();
    let (nu, l0sq) = (params.nu, params.l0 * params.l0);
    let mut m = [[0.0; 9]; 9];
    for ka in 0..6 {
        let ra = slot(ka / 2, ka % 2);
        for kb in 0..6 {
            let rb = slot(kb / 2, kb % 2);
            m[ra][rb] = b.integrate(|_| {
                nu * vec_curl(&b, ka) * vec_curl(&b, kb)
                    + params.c_u * nu * h * h / l0sq * vec_div(&b, ka) * vec_div(&b, kb)
            });
        }
        for j in 0..3 {
            let gj = b.grad(j);
            let v = b.integrate(|p| {
                let phi = vec_basis(&b, ka, p);
                phi[0] * gj[0] + phi[1] * gj[1]
            });
            m[ra][slot(j, 2)] = v;
            m[slot(j, 2)][ra] = v;
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            let (gi, gj) = (b.grad(i), b.grad(j));
            m[slot(i, 2)][slot(j, 2)] = b.integrate(|_| -l0sq / nu * (gi[0] * gj[0] + gi[1] * gj[1]));
        }
    }
    m
}

/// Nitsche plus p-flux terms on the edge between local vertices `edge`.
pub fn edge_oracle(tri: [Point; 3], edge: [usize; 2], normal: [f64; 2], local_h: f64, params: &Params) -> Local9 {
    let b = P1::new(tri);
    let (nu, l0sq, h) = (params.nu, params.l0 * params.l0, local_h);
    let (p0, p1) = (tri[edge[0]], tri[edge[1]]);
    let on = |g: &dyn Fn(Point) -> f64| P1::integrate_segment(p0, p1, g);
    let t = |v: [f64; 2]| normal[0] * v[1] - normal[1] * v[0];
    let nd = |v: [f64; 2]| normal[0] * v[0] + normal[1] * v[1];
    let mut m = [[0.0; 9]; 9];
    for ka in 0..6 {
        let ra = slot(ka / 2, ka % 2);
        for kb in 0..6 {
            let rb = slot(kb / 2, kb % 2);
            m[ra][rb] = on(&|p| {
                let (va, vb) = (vec_basis(&b, ka, p), vec_basis(&b, kb, p));
                -nu * t(va) * vec_curl(&b, kb) - nu * t(vb) * vec_curl(&b, ka) + params.n_u * nu / h * t(va) * t(vb)
            });
        }
        for j in 0..3 {
            let v = on(&|p| -nd(vec_basis(&b, ka, p)) * b.value(j, p));
            m[ra][slot(j, 2)] = v;
            m[slot(j, 2)][ra] = v;
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            let (gi, gj) = (nd(b.grad(i)), nd(b.grad(j)));
            m[slot(i, 2)][slot(j, 2)] = on(&|p| {
                let (li, lj) = (b.value(i, p), b.value(j, p));
                -params.n_p * l0sq / (nu * h) * li * lj + l0sq / nu * (gj * li + gi * lj)
            });
        }
    }
    m
}

/// Counter-clockwise triangle with minimum angle above ~10 degrees.
pub fn random_triangle(rng: &mut impl Rng) -> [Point; 3] {
    loop {
        let scale = 10f64.powf(rng.gen_range(-2.0..0.5));
        let c = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let mut t: [Point; 3] =
            std::array::from_fn(|_| [c[0] + scale * rng.gen_range(-1.0..1.0), c[1] + scale * rng.gen_range(-1.0..1.0)]);
        let cross = (t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]);
        if cross < 0.0 {
            t.swap(1, 2);
        }
        if min_angle(&t) > 10f64.to_radians() {
            return t;
        }
    }
}

fn min_angle(t: &[Point; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let (a, b, c) = (t[k], t[(k + 1) % 3], t[(k + 2) % 3]);
            let (u, v) = ([b[0] - a[0], b[1] - a[1]], [c[0] - a[0], c[1] - a[1]]);
            (u[0] * v[1] - u[1] * v[0]).abs().atan2(u[0] * v[0] + u[1] * v[1])
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn random_params(rng: &mut impl Rng) -> Params {
    let mut p = Params::stabilised(10f64.powf(rng.gen_range(-1.0..0.5)), 10f64.powf(rng.gen_range(-1.0..1.0)));
    p.nu = 10f64.powf(rng.gen_range(-1.0..1.0));
    p.n_u = 10f64.powf(rng.gen_range(0.0..3.0));
    p.n_p = 10f64.powf(rng.gen_range(0.0..3.0));
    p
}

/// max |a - b| / max(1, max |b|).
pub fn rel_diff(a: &Local9, b: &Local9) -> f64 {
    let scale = b.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}
