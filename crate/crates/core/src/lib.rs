pub mod acceptance;
pub mod affine;
pub mod amalgam;
pub mod curves;
pub mod dynamics;
pub mod error;
pub mod flat_surface;
pub mod obstruction;
pub mod real;
pub mod traintrack;
