//! Box fluid domain with an elastic top face, node numbering, boundary tags
//! and trapezoidal quadrature.
//!
//! The box is `[0,lx] x [0,ly] x [-lz,0]`. The plate occupies the open top
//! face `x3 = 0`; every other boundary point is rigid wall. Nodes are ordered
//! lexicographically with `x` fastest, then `y`, then `z` (bottom to top).

use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest node count per axis; the plate stencils reach two nodes inward.
pub const MIN_NODES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoxDomain {
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
}

impl BoxDomain {
    pub fn new(lx: f64, ly: f64, lz: f64) -> Result<Self> {
        for (name, v) in [("lx", lx), ("ly", ly), ("lz", lz)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "domain length {name} must be positive, got {v}"
                )));
            }
        }
        Ok(Self { lx, ly, lz })
    }

    pub fn unit() -> Self {
        Self {
            lx: 1.0,
            ly: 1.0,
            lz: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Face {
    XMin,
    XMax,
    YMin,
    YMax,
    Bottom,
    Top,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::XMin,
        Face::XMax,
        Face::YMin,
        Face::YMax,
        Face::Bottom,
        Face::Top,
    ];

    pub fn outward_normal(self) -> [f64; 3] {
        match self {
            Face::XMin => [-1.0, 0.0, 0.0],
            Face::XMax => [1.0, 0.0, 0.0],
            Face::YMin => [0.0, -1.0, 0.0],
            Face::YMax => [0.0, 1.0, 0.0],
            Face::Bottom => [0.0, 0.0, -1.0],
            Face::Top => [0.0, 0.0, 1.0],
        }
    }

    /// Coordinate axis the face is normal to.
    pub fn axis(self) -> usize {
        match self {
            Face::XMin | Face::XMax => 0,
            Face::YMin | Face::YMax => 1,
            Face::Bottom | Face::Top => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BoundaryTag {
    Interior,
    /// Interior point of the elastic top face.
    OmegaFace,
    /// Interior point of a rigid face.
    SFace(Face),
    /// Node shared by exactly two faces. `plate_normal` is the in-plane
    /// outward normal when the edge is part of the plate rim.
    Edge {
        faces: [Face; 2],
        plate_normal: Option<[f64; 2]>,
    },
    Corner,
}

impl BoundaryTag {
    pub fn is_boundary(&self) -> bool {
        !matches!(self, BoundaryTag::Interior)
    }

    /// Unique outward normal, when there is one.
    pub fn outward_normal(&self) -> Option<[f64; 3]> {
        match self {
            BoundaryTag::OmegaFace => Some([0.0, 0.0, 1.0]),
            BoundaryTag::SFace(f) => Some(f.outward_normal()),
            _ => None,
        }
    }
}

/// One quadrature point on the plate rim.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RimPoint {
    /// Index on the full top face (`i + nx*j`).
    pub top: usize,
    pub weight: f64,
    pub normal: [f64; 2],
}

#[derive(Clone, Debug)]
pub struct Grid {
    pub domain: BoxDomain,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub hx: f64,
    pub hy: f64,
    pub hz: f64,
    tags: Vec<BoundaryTag>,
    volume_weights: Vec<f64>,
}

fn trapezoid_1d(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|i| if i == 0 || i + 1 == n { 0.5 * h } else { h })
        .collect()
}

impl Grid {
    pub fn new(domain: BoxDomain, counts: [usize; 3]) -> Result<Self> {
        for (axis, &n) in ["x", "y", "z"].iter().zip(&counts) {
            if n < MIN_NODES {
                return Err(Error::Config(format!(
                    "grid.n{axis} = {n} is below the stencil width {MIN_NODES}"
                )));
            }
        }
        let [nx, ny, nz] = counts;
        let hx = domain.lx / (nx - 1) as f64;
        let hy = domain.ly / (ny - 1) as f64;
        let hz = domain.lz / (nz - 1) as f64;
        let mut grid = Grid {
            domain,
            nx,
            ny,
            nz,
            hx,
            hy,
            hz,
            tags: Vec::new(),
            volume_weights: Vec::new(),
        };
        let (wx, wy, wz) = (
            trapezoid_1d(nx, hx),
            trapezoid_1d(ny, hy),
            trapezoid_1d(nz, hz),
        );
        let n = grid.num_nodes();
        grid.volume_weights = (0..n)
            .map(|idx| {
                let (i, j, k) = grid.ijk(idx);
                wx[i] * wy[j] * wz[k]
            })
            .collect();
        grid.tags = (0..n).map(|idx| grid.classify(idx)).collect();
        Ok(grid)
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(BoxDomain::unit(), [n, n, n])
    }

    pub fn num_nodes(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    pub fn ijk(&self, idx: usize) -> (usize, usize, usize) {
        (
            idx % self.nx,
            (idx / self.nx) % self.ny,
            idx / (self.nx * self.ny),
        )
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.ijk(idx);
        [
            i as f64 * self.hx,
            j as f64 * self.hy,
            -self.domain.lz + k as f64 * self.hz,
        ]
    }

    pub fn spacing(&self) -> [f64; 3] {
        [self.hx, self.hy, self.hz]
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    /// Faces a node lies on.
    pub fn faces_of(&self, idx: usize) -> Vec<Face> {
        let (i, j, k) = self.ijk(idx);
        let mut faces = Vec::with_capacity(3);
        if i == 0 {
            faces.push(Face::XMin);
        }
        if i + 1 == self.nx {
            faces.push(Face::XMax);
        }
        if j == 0 {
            faces.push(Face::YMin);
        }
        if j + 1 == self.ny {
            faces.push(Face::YMax);
        }
        if k == 0 {
            faces.push(Face::Bottom);
        }
        if k + 1 == self.nz {
            faces.push(Face::Top);
        }
        faces
    }

    fn classify(&self, idx: usize) -> BoundaryTag {
        let faces = self.faces_of(idx);
        match faces.len() {
            0 => BoundaryTag::Interior,
            1 if faces[0] == Face::Top => BoundaryTag::OmegaFace,
            1 => BoundaryTag::SFace(faces[0]),
            2 => {
                let plate_normal = if faces[1] == Face::Top {
                    let n = faces[0].outward_normal();
                    Some([n[0], n[1]])
                } else {
                    None
                };
                BoundaryTag::Edge {
                    faces: [faces[0], faces[1]],
                    plate_normal,
                }
            }
            _ => BoundaryTag::Corner,
        }
    }

    pub fn tag(&self, idx: usize) -> BoundaryTag {
        self.tags[idx]
    }

    pub fn tags(&self) -> &[BoundaryTag] {
        &self.tags
    }

    /// Trapezoidal volume weights, one per node.
    pub fn volume_weights(&self) -> &[f64] {
        &self.volume_weights
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.num_nodes());
        values
            .iter()
            .zip(&self.volume_weights)
            .map(|(v, w)| v * w)
            .sum()
    }

    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .zip(&self.volume_weights)
            .map(|(v, w)| v * v * w)
            .sum::<f64>()
            .sqrt()
    }

    /// Node indices on the boundary of the box.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes())
            .filter(|&n| self.tags[n].is_boundary())
            .collect()
    }

    /// Nodes strictly inside the box.
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes())
            .filter(|&n| !self.tags[n].is_boundary())
            .collect()
    }

    // ---- top face (plate) indexing ----

    pub fn top_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Index on the full top face of lattice point `(i, j)`.
    pub fn top_index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    pub fn top_ij(&self, t: usize) -> (usize, usize) {
        (t % self.nx, t / self.nx)
    }

    pub fn top_position(&self, t: usize) -> [f64; 2] {
        let (i, j) = self.top_ij(t);
        [i as f64 * self.hx, j as f64 * self.hy]
    }

    /// Fluid node sitting at top-face point `t`.
    pub fn top_to_node(&self, t: usize) -> usize {
        let (i, j) = self.top_ij(t);
        self.index(i, j, self.nz - 1)
    }

    pub fn is_rim(&self, t: usize) -> bool {
        let (i, j) = self.top_ij(t);
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// 2-D trapezoidal weights on the full top face.
    pub fn top_weights(&self) -> Vec<f64> {
        let (wx, wy) = (
            trapezoid_1d(self.nx, self.hx),
            trapezoid_1d(self.ny, self.hy),
        );
        (0..self.top_count())
            .map(|t| {
                let (i, j) = self.top_ij(t);
                wx[i] * wy[j]
            })
            .collect()
    }

    /// Number of plate degrees of freedom (interior top-face points).
    pub fn omega_count(&self) -> usize {
        (self.nx - 2) * (self.ny - 2)
    }

    pub fn omega_dims(&self) -> (usize, usize) {
        (self.nx - 2, self.ny - 2)
    }

    pub fn omega_to_top(&self, m: usize) -> usize {
        let mx = self.nx - 2;
        self.top_index(m % mx + 1, m / mx + 1)
    }

    pub fn top_to_omega(&self, t: usize) -> Option<usize> {
        if self.is_rim(t) {
            None
        } else {
            let (i, j) = self.top_ij(t);
            Some((i - 1) + (self.nx - 2) * (j - 1))
        }
    }

    pub fn omega_position(&self, m: usize) -> [f64; 2] {
        self.top_position(self.omega_to_top(m))
    }

    /// Fluid node carrying plate degree of freedom `m`.
    pub fn omega_to_node(&self, m: usize) -> usize {
        self.top_to_node(self.omega_to_top(m))
    }

    /// Quadrature weight of each plate degree of freedom.
    pub fn omega_weight(&self) -> f64 {
        self.hx * self.hy
    }

    /// Trapezoidal quadrature on the plate rim with corners excluded.
    pub fn rim_quadrature(&self) -> Vec<RimPoint> {
        let mut pts = Vec::new();
        for i in 1..self.nx - 1 {
            pts.push(RimPoint {
                top: self.top_index(i, 0),
                weight: self.hx,
                normal: [0.0, -1.0],
            });
            pts.push(RimPoint {
                top: self.top_index(i, self.ny - 1),
                weight: self.hx,
                normal: [0.0, 1.0],
            });
        }
        for j in 1..self.ny - 1 {
            pts.push(RimPoint {
                top: self.top_index(0, j),
                weight: self.hy,
                normal: [-1.0, 0.0],
            });
            pts.push(RimPoint {
                top: self.top_index(self.nx - 1, j),
                weight: self.hy,
                normal: [1.0, 0.0],
            });
        }
        pts
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.counts() == other.counts() && self.domain == other.domain
    }
}
