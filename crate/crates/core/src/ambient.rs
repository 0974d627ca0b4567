//! Closed-form ambient flow fields with exact derivatives.
//!
//! Every family is tangential on the whole box boundary, so `U·n = 0` holds
//! on the rigid walls and on the plate face.

use std::f64::consts::PI;

use serde::Serialize;

use crate::grid::{BoxDomain, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VerticalProfile {
    Uniform,
    /// `cos(pi x3 / (2 lz))`: one at the plate, zero at the bottom.
    Cosine,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum FlowFamily {
    Zero,
    /// `U = (a sin(pi x1/lx), 0, 0)`.
    Channel {
        amplitude: f64,
    },
    /// `U = (d2 psi, -d1 psi, 0) phi(x3)` with `psi = s sin^2(pi x1/lx) sin^2(pi x2/ly)`.
    Swirl {
        amplitude: f64,
        profile: VerticalProfile,
    },
}

/// Value, gradient and Hessian of the in-plane trace `(U1, U2)` at `x3 = 0`.
/// `grad[i][j] = d_j U_i`, `hess[i][j][k] = d_j d_k U_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SurfaceJet {
    pub value: [f64; 2],
    pub grad: [[f64; 2]; 2],
    pub hess: [[[f64; 2]; 2]; 2],
}

impl SurfaceJet {
    pub fn divergence(&self) -> f64 {
        self.grad[0][0] + self.grad[1][1]
    }

    pub fn laplacian(&self) -> [f64; 2] {
        [
            self.hess[0][0][0] + self.hess[0][1][1],
            self.hess[1][0][0] + self.hess[1][1][1],
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AmbientFlow {
    pub family: FlowFamily,
    pub domain: BoxDomain,
}

/// `sin^2(pi s / L)` and its first three derivatives.
fn sin2_jet(s: f64, l: f64) -> [f64; 4] {
    let k = PI / l;
    let (a, b) = ((k * s).sin(), (2.0 * k * s).sin());
    let c = (2.0 * k * s).cos();
    [a * a, k * b, 2.0 * k * k * c, -4.0 * k * k * k * b]
}

impl AmbientFlow {
    pub fn zero(domain: BoxDomain) -> Self {
        Self {
            family: FlowFamily::Zero,
            domain,
        }
    }

    pub fn channel(domain: BoxDomain, amplitude: f64) -> Self {
        Self {
            family: FlowFamily::Channel { amplitude },
            domain,
        }
    }

    pub fn swirl(domain: BoxDomain, amplitude: f64, profile: VerticalProfile) -> Self {
        Self {
            family: FlowFamily::Swirl { amplitude, profile },
            domain,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self.family {
            FlowFamily::Zero => true,
            FlowFamily::Channel { amplitude } | FlowFamily::Swirl { amplitude, .. } => {
                amplitude == 0.0
            }
        }
    }

    fn profile(&self, z: f64) -> (f64, f64) {
        match self.family {
            FlowFamily::Swirl {
                profile: VerticalProfile::Cosine,
                ..
            } => {
                let k = PI / (2.0 * self.domain.lz);
                ((k * z).cos(), -k * (k * z).sin())
            }
            _ => (1.0, 0.0),
        }
    }

    pub fn velocity(&self, x: [f64; 3]) -> [f64; 3] {
        match self.family {
            FlowFamily::Zero => [0.0; 3],
            FlowFamily::Channel { amplitude } => {
                [amplitude * (PI * x[0] / self.domain.lx).sin(), 0.0, 0.0]
            }
            FlowFamily::Swirl { amplitude, .. } => {
                let fx = sin2_jet(x[0], self.domain.lx);
                let fy = sin2_jet(x[1], self.domain.ly);
                let (phi, _) = self.profile(x[2]);
                [
                    amplitude * fx[0] * fy[1] * phi,
                    -amplitude * fx[1] * fy[0] * phi,
                    0.0,
                ]
            }
        }
    }

    /// `g[i][j] = d_j U_i`.
    pub fn gradient(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        match self.family {
            FlowFamily::Zero => {}
            FlowFamily::Channel { amplitude } => {
                let k = PI / self.domain.lx;
                g[0][0] = amplitude * k * (k * x[0]).cos();
            }
            FlowFamily::Swirl { amplitude: s, .. } => {
                let fx = sin2_jet(x[0], self.domain.lx);
                let fy = sin2_jet(x[1], self.domain.ly);
                let (phi, dphi) = self.profile(x[2]);
                g[0] = [
                    s * fx[1] * fy[1] * phi,
                    s * fx[0] * fy[2] * phi,
                    s * fx[0] * fy[1] * dphi,
                ];
                g[1] = [
                    -s * fx[2] * fy[0] * phi,
                    -s * fx[1] * fy[1] * phi,
                    -s * fx[1] * fy[0] * dphi,
                ];
            }
        }
        g
    }

    pub fn divergence(&self, x: [f64; 3]) -> f64 {
        let g = self.gradient(x);
        g[0][0] + g[1][1] + g[2][2]
    }

    /// `(U·∇)U`.
    pub fn self_advection(&self, x: [f64; 3]) -> [f64; 3] {
        let u = self.velocity(x);
        let g = self.gradient(x);
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = (0..3).map(|j| u[j] * g[i][j]).sum();
        }
        out
    }

    /// In-plane trace on the plate face with two derivatives.
    pub fn surface_jet(&self, x: [f64; 2]) -> SurfaceJet {
        let mut jet = SurfaceJet::default();
        match self.family {
            FlowFamily::Zero => {}
            FlowFamily::Channel { amplitude: a } => {
                let k = PI / self.domain.lx;
                let (s, c) = (k * x[0]).sin_cos();
                jet.value[0] = a * s;
                jet.grad[0][0] = a * k * c;
                jet.hess[0][0][0] = -a * k * k * s;
            }
            FlowFamily::Swirl { amplitude: s, .. } => {
                let fx = sin2_jet(x[0], self.domain.lx);
                let fy = sin2_jet(x[1], self.domain.ly);
                jet.value = [s * fx[0] * fy[1], -s * fx[1] * fy[0]];
                jet.grad[0] = [s * fx[1] * fy[1], s * fx[0] * fy[2]];
                jet.grad[1] = [-s * fx[2] * fy[0], -s * fx[1] * fy[1]];
                let h0 = [
                    [s * fx[2] * fy[1], s * fx[1] * fy[2]],
                    [s * fx[1] * fy[2], s * fx[0] * fy[3]],
                ];
                let h1 = [
                    [-s * fx[3] * fy[0], -s * fx[2] * fy[1]],
                    [-s * fx[2] * fy[1], -s * fx[1] * fy[2]],
                ];
                jet.hess = [h0, h1];
            }
        }
        jet
    }

    /// Maximum of `|div U|` over the grid nodes.
    pub fn div_sup(&self, grid: &Grid) -> f64 {
        (0..grid.num_nodes())
            .map(|n| self.divergence(grid.position(n)).abs())
            .fold(0.0, f64::max)
    }

    /// Exact supremum of `|div U|` over the closed box.
    pub fn analytic_div_sup(&self) -> f64 {
        match self.family {
            FlowFamily::Channel { amplitude } => amplitude.abs() * PI / self.domain.lx,
            _ => 0.0,
        }
    }

    /// Largest `|U·n|` over all boundary nodes with a unique normal, plus the
    /// face-wise normal components on edges and corners.
    pub fn max_normal_trace(&self, grid: &Grid) -> f64 {
        let mut m = 0.0f64;
        for n in grid.boundary_nodes() {
            let u = self.velocity(grid.position(n));
            for f in grid.faces_of(n) {
                let nv = f.outward_normal();
                m = m.max((u[0] * nv[0] + u[1] * nv[1] + u[2] * nv[2]).abs());
            }
        }
        m
    }
}
