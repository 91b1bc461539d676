//! Robotic gamma-probe scanning: procedural surgical surfaces, raster-scan
//! demonstration generation, and behavior cloning of a pose-action policy.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! 1. [`scene`] builds a heightfield surface with analytic normals.
//! 2. [`planner`] samples a target region, plans a boustrophedon raster,
//!    projects it onto the surface and turns it into a smooth, 3 cm-offset,
//!    surface-perpendicular pose trajectory.
//! 3. [`simulator`] places a virtual RGBD camera and records observation
//!    frames and camera-frame poses along the trajectory.
//! 4. [`dataset`] persists demonstrations, computes N-step action targets,
//!    splits and summarizes the corpus.
//! 5. [`policy`] is the encoder-decoder network with its own reverse-mode
//!    gradient engine, and [`training`] fits and evaluates it.

pub mod dataset;
pub mod geometry;
pub mod planner;
pub mod policy;
pub mod rng;
pub mod scene;
pub mod simulator;
pub mod training;
