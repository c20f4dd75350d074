//! Cubemap machinery for spherical images and videos: face topology,
//! overlap extension, border reprojection, prior construction and the
//! sequential sphere stylizers.

pub mod equirect;
pub mod faces;
pub mod geometry;
pub mod prior;
pub mod sphere;

pub use equirect::{cube_to_equirect, equirect_to_cube, sample_equirect, synthetic_panorama};
pub use faces::{extend_face, project_border, CubeFaceSet};
pub use geometry::{adjacency, edge_link, Edge, EdgeLink, FaceId, ALL_EDGES, ALL_FACES};
pub use prior::{build_face_prior, FacePrior, FillPolicy};
pub use sphere::{SphereConfig, SphereResult, SphereStylizer};
