//! Cube-face geometry: plane coordinates, direction vectors, dominant-axis
//! face lookup and the adjacency the rest of the module derives from it.
//!
//! Every face is a pinhole plane at distance 1 from the cube center
//! subtending 90 degrees; plane coordinates (u, v) run over [-1, 1] across
//! the face core. Pixel centers map as `u = 2 (x + 0.5) / S - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaceId {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

pub const ALL_FACES: [FaceId; 6] = [
    FaceId::PosX,
    FaceId::NegX,
    FaceId::PosY,
    FaceId::NegY,
    FaceId::PosZ,
    FaceId::NegZ,
];

impl FaceId {
    pub fn index(self) -> usize {
        match self {
            FaceId::PosX => 0,
            FaceId::NegX => 1,
            FaceId::PosY => 2,
            FaceId::NegY => 3,
            FaceId::PosZ => 4,
            FaceId::NegZ => 5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FaceId::PosX => "+X",
            FaceId::NegX => "-X",
            FaceId::PosY => "+Y",
            FaceId::NegY => "-Y",
            FaceId::PosZ => "+Z",
            FaceId::NegZ => "-Z",
        }
    }

    /// File-name-safe label used for cube directories.
    pub fn file_stem(self) -> &'static str {
        match self {
            FaceId::PosX => "posx",
            FaceId::NegX => "negx",
            FaceId::PosY => "posy",
            FaceId::NegY => "negy",
            FaceId::PosZ => "posz",
            FaceId::NegZ => "negz",
        }
    }

    pub fn parse(s: &str) -> Result<FaceId> {
        match s {
            "+X" | "posx" | "px" => Ok(FaceId::PosX),
            "-X" | "negx" | "nx" => Ok(FaceId::NegX),
            "+Y" | "posy" | "py" => Ok(FaceId::PosY),
            "-Y" | "negy" | "ny" => Ok(FaceId::NegY),
            "+Z" | "posz" | "pz" => Ok(FaceId::PosZ),
            "-Z" | "negz" | "nz" => Ok(FaceId::NegZ),
            other => Err(Error::Config(format!("unknown face label {other:?}"))),
        }
    }

    /// Face basis: outward normal and the in-plane axes scaled for u, v.
    pub fn basis(self) -> (Vec3, Vec3, Vec3) {
        match self {
            FaceId::PosX => ([1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, -1.0, 0.0]),
            FaceId::NegX => ([-1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]),
            FaceId::PosY => ([0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
            FaceId::NegY => ([0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]),
            FaceId::PosZ => ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, -1.0, 0.0]),
            FaceId::NegZ => ([0.0, 0.0, -1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    Left,
    Right,
    Top,
    Bottom,
}

pub const ALL_EDGES: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Top, Edge::Bottom];

impl Edge {
    pub fn index(self) -> usize {
        match self {
            Edge::Left => 0,
            Edge::Right => 1,
            Edge::Top => 2,
            Edge::Bottom => 3,
        }
    }

    /// A plane point just outside this edge: `t` parameterizes the position
    /// along the edge, `eps` the overshoot beyond the core.
    pub fn probe(self, t: f64, eps: f64) -> (f64, f64) {
        match self {
            Edge::Left => (-1.0 - eps, t),
            Edge::Right => (1.0 + eps, t),
            Edge::Top => (t, -1.0 - eps),
            Edge::Bottom => (t, 1.0 + eps),
        }
    }
}

#[inline]
fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Direction through plane point (u, v) of `face`; u, v may exceed the core.
pub fn direction(face: FaceId, u: f64, v: f64) -> Vec3 {
    let (n, au, av) = face.basis();
    [
        n[0] + u * au[0] + v * av[0],
        n[1] + u * au[1] + v * av[1],
        n[2] + u * au[2] + v * av[2],
    ]
}

/// Plane coordinates of a direction on the given face, `None` when the
/// direction points away from the face's half-space.
pub fn plane_coords(face: FaceId, dir: Vec3) -> Option<(f64, f64)> {
    let (n, au, av) = face.basis();
    let depth = dot(dir, n);
    if depth <= 1e-12 {
        return None;
    }
    Some((dot(dir, au) / depth, dot(dir, av) / depth))
}

/// The face whose core contains this direction (dominant axis), with its
/// plane coordinates. Ties break deterministically toward x, then y.
pub fn face_for_direction(dir: Vec3) -> (FaceId, f64, f64) {
    let ax = dir[0].abs();
    let ay = dir[1].abs();
    let az = dir[2].abs();
    let face = if ax >= ay && ax >= az {
        if dir[0] >= 0.0 { FaceId::PosX } else { FaceId::NegX }
    } else if ay >= az {
        if dir[1] >= 0.0 { FaceId::PosY } else { FaceId::NegY }
    } else if dir[2] >= 0.0 {
        FaceId::PosZ
    } else {
        FaceId::NegZ
    };
    let (u, v) = plane_coords(face, dir).expect("dominant face has positive depth");
    (face, u, v)
}

/// Pixel-space position of plane coordinate `u` on a face of `size` pixels.
#[inline]
pub fn plane_to_pixel(u: f64, size: usize) -> f64 {
    (u + 1.0) * size as f64 / 2.0 - 0.5
}

/// Plane coordinate of pixel index `x` (center) on a face of `size` pixels.
#[inline]
pub fn pixel_to_plane(x: f64, size: usize) -> f64 {
    2.0 * (x + 0.5) / size as f64 - 1.0
}

/// Bilinear sample of a face image at plane coordinates, clamped at the
/// face border (standard seamless-unaware cubemap sampling).
pub fn sample_face(img: &RasterImage, u: f64, v: f64, c: usize) -> f64 {
    let x = plane_to_pixel(u, img.width);
    let y = plane_to_pixel(v, img.height);
    img.sample_bilinear_clamped(x, y, c)
}

/// One directed cube edge: which neighbor lies across it and which of the
/// neighbor's edges is shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeLink {
    pub neighbor: FaceId,
    pub neighbor_edge: Edge,
}

/// Neighbor across `edge` of `face`, derived from the geometry.
pub fn edge_link(face: FaceId, edge: Edge) -> EdgeLink {
    let (u, v) = edge.probe(0.0, 1e-6);
    let dir = direction(face, u, v);
    let (neighbor, nu, nv) = face_for_direction(dir);
    debug_assert_ne!(neighbor, face);
    // The probe lands just inside the neighbor core next to the shared edge.
    let neighbor_edge = if nu.abs() >= nv.abs() {
        if nu > 0.0 { Edge::Right } else { Edge::Left }
    } else if nv > 0.0 {
        Edge::Bottom
    } else {
        Edge::Top
    };
    EdgeLink {
        neighbor,
        neighbor_edge,
    }
}

/// The full 6x4 adjacency table.
pub fn adjacency() -> Vec<((FaceId, Edge), EdgeLink)> {
    let mut out = Vec::with_capacity(24);
    for face in ALL_FACES {
        for edge in ALL_EDGES {
            out.push(((face, edge), edge_link(face, edge)));
        }
    }
    out
}
