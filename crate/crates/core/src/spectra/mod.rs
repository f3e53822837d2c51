//! Eigenvalue counting, tridiagonal eigensolvers, regular-bond statistics,
//! integrated density of states estimation and site classification.

mod bonds;
mod count;
mod eigen;
mod ids;
mod sites;

pub use bonds::{regular_bond_count, regular_bond_count_c, regular_bond_frequency, RegularBondFrequency};
pub use count::{count_above, count_below, phase_count};
pub use eigen::{bisect_eigenvalues, eigensolve, eigensolve_projected, ProjectedSpectrum, SpectralDecomposition};
pub use ids::{ids_estimate, log_lambda_grid, IdsCurve};
pub use sites::{b0_bound, b0_submatrix_top, classify_sites, gamma_of_lambda, SiteClassification};
