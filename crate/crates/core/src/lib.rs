//! Randomized Gaussian RBF networks for second-order elliptic problems with
//! multiscale coefficients, solved by domain decomposition and a single
//! minimal-norm least-squares solve.

// Links the system OpenBLAS, which also provides LAPACK.
extern crate openblas_src;

pub mod assembly;
pub mod basis;
pub mod cli;
pub mod error;
pub mod fdm;
pub mod lstsq;
pub mod partition;
pub mod problems;
pub mod rbfnet;

pub use assembly::{BlockSystem, BlockWeights, ContinuityMode};
pub use cli::{metrics, run, run_full, RunConfig, SolveReport};
pub use error::{Result, RrnnError};
pub use fdm::FdmSolution;
pub use partition::{decompose, Domain, Partition};
pub use problems::ProblemSpec;
pub use rbfnet::{LocalRbfNet, RbfConfig, RrnnSolution};
