//! Reduced-order model: snapshots, POD, supremizers, lifting and the
//! Galerkin-projected subdomain solvers.

mod basis;
mod lifting;
mod pod;
mod projection;
mod reduced;
mod snapshots;
mod supremizer;

pub use basis::{load_basis, manifest_path, save_basis, BasisSizes, ReducedBasis, SubdomainBasis};
pub use lifting::unit_lifting;
pub use pod::{cgs2, orthonormality_error, pod_basis, projection_error, Euclidean, Gram, PodBasis};
pub use projection::{ControlProjection, VelocityProjection};
pub use reduced::{ReducedAdjoint, ReducedSolver, ReducedState, ReducedSubdomain};
pub use snapshots::{collect_parameter, collect_snapshots, SnapshotSet, SnapshotSettings};
pub use supremizer::{reduced_inf_sup, supremizer_enrich};
