//! Parallel global conformal parameterization of simply-connected
//! triangle meshes.
//!
//! The mesh is cut into disk-type submeshes, each is flattened
//! independently, the flattenings are glued back together by conformal
//! welding, and every submesh is finally re-embedded harmonically inside
//! its welded boundary.

pub mod assemble;
pub mod dncp;
pub mod extended;
pub mod fixtures;
pub mod mesh;
pub mod metrics;
pub mod partition;
pub mod pipeline;
pub mod sparse;
pub mod welding;

pub use extended::{ExtendedComplex, Mobius};
pub use mesh::{TriMesh, Vec3};
pub use num_complex::Complex64;
pub use assemble::GlobalParam;
pub use mesh::ParamCoords;
pub use metrics::DistortionReport;
pub use partition::{CutEdgeSet, Mode, Partition};
pub use pipeline::{run_on_mesh, run_pipeline, ErrorKind, Options, PipelineError, RunConfig, RunOutput};
