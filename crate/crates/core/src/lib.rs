//! Numerical laboratory for steady two-dimensional ideal-fluid flows on
//! polar grids (annulus or disk).
//!
//! Convention: the vorticity is `omega = laplacian(u)` and the velocity is
//! `v = (-u_y, u_x)`, i.e. `v_r = -r^-1 d_theta u`, `v_theta = d_r u`.

pub mod fields;
pub mod elliptic;
pub mod rearrange;
pub mod steady;
pub mod evolve;
pub mod stability;
pub mod streamlines;
pub mod cli;
