//! Parameters, state indexing, generator blocks and the truncated generator.

mod blocks;
mod events;
mod generator;
mod params;
mod state;

pub use blocks::{build_block, BlockRole, LevelBlock};
pub use events::{transitions, Mark, Transition};
pub use generator::{build_truncated_generator, Closure, TruncatedGenerator, Window};
pub use params::ModelParams;
pub use state::{coords_to_levelphase, levelphase_to_coords, LevelPhase, StateCoords};
