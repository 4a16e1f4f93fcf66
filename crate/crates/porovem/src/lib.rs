//! Lowest-order virtual element solver for the three-field formulation of
//! time-dependent linear poroelasticity on general polygonal meshes.
//!
//! The three unknowns are the skeleton displacement, the pore fluid pressure,
//! and the total pressure (the volumetric stress combination `αp − λ div u`),
//! which makes the discretization robust for nearly incompressible solids.
//! Displacements use a Bernardi-Raugel-type virtual space (vertex values plus
//! edge-normal bubbles), fluid pressure an enhanced linear virtual space, and
//! total pressure piecewise constants. Time is discretized with backward
//! Euler.
//!
//! See the book under `book/` for a guided tour; the `porovem` CLI drives
//! mesh generation, the convergence studies, and transient runs.

pub mod assembly;
mod book;
pub mod dofs;
pub mod error;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod projectors;
pub mod quadrature;
pub mod stepper;
pub mod verify;
pub mod testing;

pub use assembly::{assemble_loads, assemble_system, BlockSystem, Kappa, PhysicalParams};
pub use dofs::{build_dofmap, BcSpec, DofMap};
pub use error::{Error, Result};
pub use mesh::{BoundaryTag, ElementGeometry, MeshRegularityReport, PolyMesh};
pub use projectors::{ProjectorPack, StabKind};
pub use stepper::{
    solve_steady, FieldState, InitialData, ProblemData, SolverKind, TimeGrid, TransientSolver,
};

use rayon::prelude::*;

/// Build the projector packs of every cell (parallel, deterministic).
pub fn build_packs(mesh: &PolyMesh) -> Result<Vec<ProjectorPack>> {
    (0..mesh.cell_count())
        .into_par_iter()
        .map(|c| ProjectorPack::build(mesh, c))
        .collect()
}
