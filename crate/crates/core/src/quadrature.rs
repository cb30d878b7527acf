//! Quadrature on the reference triangle and the reference edge.
//!
//! Triangle rules are stored in barycentric form and weighted against the
//! reference triangle (0,0), (1,0), (0,1), so weights sum to 1/2. Edge rules
//! live on [0, 1] with weights summing to 1.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A quadrature rule with its guaranteed polynomial exactness.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule<P> {
    pub points: Vec<P>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

/// Triangle rule, points in barycentric coordinates (l0, l1, l2).
pub type TriangleRule = QuadRule<[f64; 3]>;

/// Edge rule, points as the parameter t in [0, 1].
pub type EdgeRule = QuadRule<f64>;

pub const MAX_TRIANGLE_DEGREE: usize = 10;
pub const MAX_EDGE_DEGREE: usize = 19;

impl<P> QuadRule<P> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&P, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

impl TriangleRule {
    /// Cartesian coordinates of the points on the reference triangle.
    pub fn reference_points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.points.iter().map(|l| [l[1], l[2]])
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Gauss–Legendre rule on [0, 1] with exactness `2 n - 1 >= degree`.
pub fn edge_rule(degree: usize) -> Result<EdgeRule> {
    if degree == 0 || degree > MAX_EDGE_DEGREE {
        return Err(Error::UnsupportedDegree(degree));
    }
    let n = degree.div_ceil(2).max(1);
    let (x, w) = gauss_legendre(n);
    Ok(QuadRule {
        points: x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
        exact_degree: 2 * n - 1,
    })
}

/// Smallest tabulated rule with exactness at least `degree`.
///
/// Degrees 1, 2, 4, 5 and 6 are fully symmetric rules with positive weights;
/// degree 3 is served by the degree-4 rule. Degrees 7 to 10 use a collapsed
/// (Duffy) tensor product of Gauss–Legendre rules.
pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    match degree {
        1 => Ok(centroid_rule()),
        2 => Ok(strang_fix_3()),
        3 | 4 => Ok(dunavant_6()),
        5 => Ok(radon_7()),
        6 => Ok(dunavant_12()),
        7..=MAX_TRIANGLE_DEGREE => Ok(collapsed_rule(degree)),
        _ => Err(Error::UnsupportedDegree(degree)),
    }
}

fn centroid_rule() -> TriangleRule {
    QuadRule {
        points: vec![[1.0 / 3.0; 3]],
        weights: vec![0.5],
        exact_degree: 1,
    }
}

fn strang_fix_3() -> TriangleRule {
    let a = 1.0 / 6.0;
    let b = 2.0 / 3.0;
    QuadRule {
        points: vec![[b, a, a], [a, b, a], [a, a, b]],
        weights: vec![1.0 / 6.0; 3],
        exact_degree: 2,
    }
}

/// Orbit of a barycentric point (a, a, 1-2a).
fn orbit3(a: f64) -> [[f64; 3]; 3] {
    let b = 1.0 - 2.0 * a;
    [[b, a, a], [a, b, a], [a, a, b]]
}

/// Orbit of a barycentric point (a, b, 1-a-b) with all entries distinct.
fn orbit6(a: f64, b: f64) -> [[f64; 3]; 6] {
    let c = 1.0 - a - b;
    [
        [a, b, c],
        [b, c, a],
        [c, a, b],
        [b, a, c],
        [a, c, b],
        [c, b, a],
    ]
}

fn from_orbits(orbits: &[(Vec<[f64; 3]>, f64)], exact_degree: usize) -> TriangleRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (pts, w) in orbits {
        for p in pts {
            points.push(*p);
            // tabulated weights are relative to unit area
            weights.push(0.5 * w);
        }
    }
    QuadRule {
        points,
        weights,
        exact_degree,
    }
}

fn dunavant_6() -> TriangleRule {
    from_orbits(
        &[
            (orbit3(0.445_948_490_915_965).to_vec(), 0.223_381_589_678_011),
            (orbit3(0.091_576_213_509_771).to_vec(), 0.109_951_743_655_322),
        ],
        4,
    )
}

fn radon_7() -> TriangleRule {
    let s15 = 15.0_f64.sqrt();
    from_orbits(
        &[
            (vec![[1.0 / 3.0; 3]], 9.0 / 40.0),
            (orbit3((6.0 - s15) / 21.0).to_vec(), (155.0 - s15) / 1200.0),
            (orbit3((6.0 + s15) / 21.0).to_vec(), (155.0 + s15) / 1200.0),
        ],
        5,
    )
}

fn dunavant_12() -> TriangleRule {
    from_orbits(
        &[
            (orbit3(0.249_286_745_170_910).to_vec(), 0.116_786_275_726_379),
            (orbit3(0.063_089_014_491_502).to_vec(), 0.050_844_906_370_207),
            (
                orbit6(0.053_145_049_844_817, 0.310_352_451_033_784).to_vec(),
                0.082_851_075_618_374,
            ),
        ],
        6,
    )
}

/// Duffy-collapsed product rule: x = s, y = (1 - s) t with Jacobian (1 - s).
fn collapsed_rule(degree: usize) -> TriangleRule {
    let ns = (degree + 2).div_ceil(2);
    let nt = (degree + 1).div_ceil(2);
    let (xs, ws) = gauss_legendre(ns);
    let (xt, wt) = gauss_legendre(nt);
    let mut points = Vec::with_capacity(ns * nt);
    let mut weights = Vec::with_capacity(ns * nt);
    for (si, wsi) in xs.iter().zip(&ws) {
        let s = 0.5 * (si + 1.0);
        for (ti, wti) in xt.iter().zip(&wt) {
            let t = 0.5 * (ti + 1.0);
            let x = s;
            let y = (1.0 - s) * t;
            points.push([1.0 - x - y, x, y]);
            weights.push(0.25 * wsi * wti * (1.0 - s));
        }
    }
    QuadRule {
        points,
        weights,
        exact_degree: degree,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// ∫_T x^a y^b over the reference triangle.
    fn monomial_integral(a: usize, b: usize) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn all_triangle_rules_are_exact_to_their_degree() {
        for degree in 1..=MAX_TRIANGLE_DEGREE {
            let rule = triangle_rule(degree).unwrap();
            assert!(rule.exact_degree >= degree);
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 0.5).abs() < 1e-14, "degree {degree}: weights sum {wsum}");
            for a in 0..=rule.exact_degree {
                for b in 0..=(rule.exact_degree - a) {
                    let q: f64 = rule
                        .reference_points()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = monomial_integral(a, b);
                    assert!(
                        ((q - exact) / exact).abs() < 1e-13,
                        "degree {degree}: x^{a} y^{b}: {q} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn small_rules() {
        let r1 = triangle_rule(1).unwrap();
        assert_eq!(r1.len(), 1);
        assert_eq!(r1.weights[0], 0.5);
        let r2 = triangle_rule(2).unwrap();
        assert_eq!(r2.len(), 3);
        let x2: f64 = r2.reference_points().zip(&r2.weights).map(|(p, w)| w * p[0] * p[0]).sum();
        assert!((x2 - 1.0 / 12.0).abs() < 1e-15);
        let r6 = triangle_rule(6).unwrap();
        let x3y3: f64 = r6
            .reference_points()
            .zip(&r6.weights)
            .map(|(p, w)| w * (p[0] * p[1]).powi(3))
            .sum();
        // 3! 3! / 8!
        assert!((x3y3 - 36.0 / 40320.0).abs() < 1e-16);
    }

    #[test]
    fn edge_rules() {
        let r1 = edge_rule(1).unwrap();
        assert_eq!(r1.points, vec![0.5]);
        assert_eq!(r1.weights, vec![1.0]);
        let r3 = edge_rule(3).unwrap();
        assert_eq!(r3.len(), 2);
        let t3: f64 = r3.iter().map(|(t, w)| w * t.powi(3)).sum();
        assert!((t3 - 0.25).abs() < 1e-15);
        let r9 = edge_rule(9).unwrap();
        assert_eq!(r9.len(), 5);
        let t9: f64 = r9.iter().map(|(t, w)| w * t.powi(9)).sum();
        assert!((t9 - 0.1).abs() < 1e-15);
        for degree in 1..=MAX_EDGE_DEGREE {
            let r = edge_rule(degree).unwrap();
            for k in 0..=r.exact_degree {
                let q: f64 = r.iter().map(|(t, w)| w * t.powi(k as i32)).sum();
                let exact = 1.0 / (k as f64 + 1.0);
                assert!(((q - exact) / exact).abs() < 1e-13, "degree {degree}, t^{k}");
            }
        }
    }

    #[test]
    fn unsupported_degrees() {
        assert!(matches!(triangle_rule(0), Err(Error::UnsupportedDegree(0))));
        assert!(matches!(triangle_rule(11), Err(Error::UnsupportedDegree(11))));
        assert!(edge_rule(0).is_err());
        assert!(edge_rule(40).is_err());
    }
}
