//! Dense linear algebra, seeded randomness and spectral-radius machinery.

mod mat;
mod rng;
mod solve;
mod spectral;

pub use mat::{axpy, dot, gemm, norm2, Mat, MatRef};
pub use rng::{mix_seed, Rng};
pub use solve::Cholesky;
pub use spectral::{rescale_to_radius, spectral_radius, DEFAULT_MAX_ITER, DEFAULT_TOL};
