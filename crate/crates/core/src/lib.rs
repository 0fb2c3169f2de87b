//! Desk-scale inverse-graphics workbench.
//!
//! Scenes are written as `add(...)` programs ([`dsl`]), generated under
//! controlled train/test distributions ([`datagen`]), tokenized with either
//! digit tokens or a `[NUM]` placeholder backed by a regression head
//! ([`numstream`], [`toynet`]) and scored with matching-based metrics
//! ([`eval`]).

pub mod datagen;
pub mod dsl;
pub mod eval;
pub mod exec;
pub mod numstream;
pub mod rotation;
pub mod scene;
pub mod toynet;

pub use dsl::{emit_program, format_number, parse_program, EmitOptions, ProgramText};
pub use rotation::{geodesic_deg, Rotation, RotationRepr};
pub use scene::{AttributeCatalog, ObjectRecord, SceneProgram};
