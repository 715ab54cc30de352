//! Numerical toolkit for Orlicz-type cochain norms on finite metric measure
//! spaces: Young functions and their conjugates, Luxemburg norms, truncated
//! Cayley balls, Alexander-Spanier cochains, transfer operators along
//! quasi-isometries, degree-one cohomology tests and a discrete nonlinear
//! Dirichlet problem.

pub mod cochain;
pub mod degree_one;
pub mod descent;
pub mod exec;
pub mod harmonic;
pub mod orlicz;
pub mod spaces;
pub mod transfer;
pub mod young;
