//! Minimal dense reverse-mode differentiation engine, parameter storage,
//! first-order optimizers and a finite-difference checker.

mod checkpoint;
mod gradcheck;
mod graph;
mod optim;
mod params;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_HEADER};
pub use gradcheck::{finite_diff_check, CoordCheck, GradCheckConfig, GradCheckReport};
pub use graph::{Gradients, Graph, Primitive, Var};
pub use optim::{OptimizerState, UpdateRule};
pub use params::{Param, ParamId, ParamStore};
