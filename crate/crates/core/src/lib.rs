//! Cage-based deformation with anisotropic Green coordinates.

// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cage;
pub mod containment;
pub mod coords;
pub mod diff;
pub mod error;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod quadrature;
pub mod scene;
pub mod shapes;
pub mod solver;
pub mod spd;

pub use nalgebra;

pub use cage::{face_scale_factor, transform_cage, validate_cage, Cage, CagePair, Point};
pub use containment::{check_interior, is_interior, winding_number, DEFAULT_INTERIOR_EPS};
pub use coords::{
    apply_coefficients, compute_coords, compute_coords_with, deform, deformation_coefficients, similarity_deform,
    similarity_reference_deform, CoordOptions, CoordinateTable,
};
pub use diff::{compute_differentials, DifferentialTable};
pub use error::{Error, Result};
pub use kernels::{aniso_phi, aniso_psi, iso_phi, iso_psi, KernelContext};
pub use metrics::{measure, sweep, DistortionReport};
pub use quadrature::{quadrature_face, quadrature_integral, IntegralKind};
pub use scene::{parse_scene, parse_scene_str, Scene, SceneFile};
pub use solver::{evaluate_map, sample_hessian_points, solve, VariationalProblem, VariationalState, Weights};
pub use spd::{build_2d, build_3d, validate_spd, AnisoParams2D, AnisoParams3D, SpdMatrix};
