//! Backward-facing-step and rectangle triangulations, the two-subdomain split
//! and Taylor–Hood degree-of-freedom maps.

mod dofmap;
mod geometry;
mod triangulation;

pub use dofmap::{DofMap, LOCAL_EDGES};
pub use geometry::{BoundaryTag, Geometry};
pub use triangulation::{decompose, generate_bfs_mesh, generate_rect_mesh, InterfaceMesh, Mesh};

/// Builds the Taylor–Hood DoF map of a mesh.
pub fn build_dofmap(mesh: &Mesh) -> DofMap {
    DofMap::new(mesh)
}
