//! Taylor–Hood assembly of the mass, viscous, divergence and convection forms,
//! the interface trace operators and Dirichlet handling.

mod assembly;
mod convection;
mod dirichlet;
mod interface;
mod reference;
mod system;

pub use assembly::{
    assemble_constant_ops, assemble_load, element_geometry, element_velocity_dofs, interpolate_pressure,
    interpolate_velocity, AssembledOperators,
};
pub use convection::ConvectionAssembler;
pub use dirichlet::{apply_dirichlet, channel_inlet, step_inlet, DirichletData};
pub use interface::{assemble_interface_ops, InterfaceSpace, TraceMap};
pub use reference::{gauss3_unit, p2_1d, triangle_rule_deg4, triangle_rule_deg5, ElementGeometry, QuadPoint};
pub use system::SaddlePattern;
