//! Manufactured solutions: exact fields, sources and Dirichlet data.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Domain, Point};

/// Which closed-form solution a case uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Solution {
    /// u = (φ(x)φ'(y), -φ'(x)φ(y)) with φ(t) = t² sin(πt/2).
    Square,
    /// u = ∇ψ, ψ = r^{2n/3} sin(2nθ/3), θ ∈ [0, 3π/2].
    CornerSingular { n: u32 },
    /// Rigid rotation u = (-y, x), p = 0; lies in the discrete space.
    Rotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemCase {
    /// Domain the case is meant for; `None` when valid on every domain.
    pub domain: Option<Domain>,
    pub solution: Solution,
    pub nu: f64,
}

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidArgument(format!("nu must be positive, got {nu}")));
    }
    Ok(())
}

fn check_n(n: u32) -> Result<()> {
    if !matches!(n, 1 | 2 | 4) {
        return Err(Error::InvalidArgument(format!("singularity exponent n must be 1, 2 or 4, got {n}")));
    }
    Ok(())
}

pub fn square_case(nu: f64) -> Result<ProblemCase> {
    check_nu(nu)?;
    Ok(ProblemCase {
        domain: Some(Domain::Square),
        solution: Solution::Square,
        nu,
    })
}

pub fn lshape_case(n: u32, nu: f64) -> Result<ProblemCase> {
    check_nu(nu)?;
    check_n(n)?;
    Ok(ProblemCase {
        domain: Some(Domain::LShape),
        solution: Solution::CornerSingular { n },
        nu,
    })
}

pub fn curved_l_case(n: u32, nu: f64) -> Result<ProblemCase> {
    check_nu(nu)?;
    check_n(n)?;
    Ok(ProblemCase {
        domain: Some(Domain::CurvedL),
        solution: Solution::CornerSingular { n },
        nu,
    })
}

/// Patch-test solution, usable on any domain.
pub fn rotation_case(nu: f64) -> Result<ProblemCase> {
    check_nu(nu)?;
    Ok(ProblemCase {
        domain: None,
        solution: Solution::Rotation,
        nu,
    })
}

/// φ and its first three derivatives at t.
fn phi(t: f64) -> [f64; 4] {
    let (s, c) = (FRAC_PI_2 * t).sin_cos();
    let t2 = t * t;
    [
        t2 * s,
        2.0 * t * s + FRAC_PI_2 * t2 * c,
        2.0 * s + 2.0 * PI * t * c - 0.25 * PI * PI * t2 * s,
        3.0 * PI * c - 1.5 * PI * PI * t * s - 0.125 * PI * PI * PI * t2 * c,
    ]
}

/// Polar angle in [0, 2π); on the L-domain this is [0, 3π/2].
pub fn corner_angle(p: Point) -> f64 {
    let theta = p[1].atan2(p[0]);
    if theta < 0.0 {
        theta + 2.0 * PI
    } else {
        theta
    }
}

impl ProblemCase {
    /// Exponent n of the corner singularity, if any.
    pub fn singularity_exponent(&self) -> Option<u32> {
        match self.solution {
            Solution::CornerSingular { n } => Some(n),
            _ => None,
        }
    }

    /// Point where the exact field is unbounded (the re-entrant corner for n = 1).
    pub fn singular_point(&self) -> Option<Point> {
        match self.solution {
            Solution::CornerSingular { n: 1 } => Some([0.0, 0.0]),
            _ => None,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular_point().is_some()
    }

    /// ψ for the corner cases.
    pub fn potential(&self, p: Point) -> Option<f64> {
        let Solution::CornerSingular { n } = self.solution else {
            return None;
        };
        let alpha = 2.0 * n as f64 / 3.0;
        let r = p[0].hypot(p[1]);
        Some(r.powf(alpha) * (alpha * corner_angle(p)).sin())
    }

    pub fn exact_u(&self, p: Point) -> Result<[f64; 2]> {
        match self.solution {
            Solution::Square => {
                let fx = phi(p[0]);
                let fy = phi(p[1]);
                Ok([fx[0] * fy[1], -fx[1] * fy[0]])
            }
            Solution::CornerSingular { n } => {
                let r = p[0].hypot(p[1]);
                if r == 0.0 {
                    return if n == 1 {
                        Err(Error::SingularPoint { x: p[0], y: p[1] })
                    } else {
                        Ok([0.0, 0.0])
                    };
                }
                let alpha = 2.0 * n as f64 / 3.0;
                let theta = corner_angle(p);
                let (st, ct) = theta.sin_cos();
                let (sa, ca) = (alpha * theta).sin_cos();
                let scale = alpha * r.powf(alpha - 1.0);
                let dr = scale * sa;
                let dtheta = scale * ca;
                Ok([dr * ct - dtheta * st, dr * st + dtheta * ct])
            }
            Solution::Rotation => Ok([-p[1], p[0]]),
        }
    }

    /// Scalar curl ∂₁u₂ − ∂₂u₁.
    pub fn exact_curl_u(&self, p: Point) -> Result<f64> {
        match self.solution {
            Solution::Square => {
                let fx = phi(p[0]);
                let fy = phi(p[1]);
                Ok(-(fx[2] * fy[0] + fx[0] * fy[2]))
            }
            Solution::CornerSingular { .. } => Ok(0.0),
            Solution::Rotation => Ok(2.0),
        }
    }

    /// The pseudo-pressure vanishes identically for every case.
    pub fn exact_p(&self, _p: Point) -> f64 {
        0.0
    }

    /// f = ν ∇×∇×u + ∇p, with the vector curl of a scalar c being (∂₂c, −∂₁c).
    pub fn source_f(&self, p: Point) -> [f64; 2] {
        match self.solution {
            Solution::Square => {
                let fx = phi(p[0]);
                let fy = phi(p[1]);
                let dc_dy = -(fx[2] * fy[1] + fx[0] * fy[3]);
                let dc_dx = -(fx[3] * fy[0] + fx[1] * fy[2]);
                [self.nu * dc_dy, -self.nu * dc_dx]
            }
            Solution::CornerSingular { .. } | Solution::Rotation => [0.0, 0.0],
        }
    }

    /// Dirichlet data ū, the exact field evaluated on the (discrete) boundary.
    pub fn dirichlet_u(&self, p: Point) -> Result<[f64; 2]> {
        self.exact_u(p)
    }

    pub fn label(&self) -> String {
        let domain = self.domain.map(Domain::name).unwrap_or("any");
        match self.solution {
            Solution::Square => domain.to_string(),
            Solution::CornerSingular { n } => format!("{domain}:{n}"),
            Solution::Rotation => format!("rotation@{domain}"),
        }
    }
}
