//! Exact proximal map of the weighted mean absolute error
//! `f(y) = sum_i w_i |y - d_i|`, evaluated in batches, and two solvers built
//! on it: checkerboard total-variation denoising with steepest-descent
//! restarts, and an ADMM minimizer for a membrane energy with threshold
//! forces on P1 finite elements.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch_csv;
pub mod box_qp;
pub mod cg;
pub mod error;
pub mod imaging;
pub mod membrane;
pub mod prox;
pub mod rof;
pub mod sparse;

pub use box_qp::{solve_box_lsq, solve_box_lsq_with, BoxLsq, BoxLsqOptions, BoxLsqSolution};
pub use error::{Error, Result};
pub use membrane::{FemMatrices, MembraneConfig, TriMesh};
pub use prox::{oracle_prox, prox_batch, CumulativeWeights, ProxBatch, ProxInstance, SubgradientInterval};
pub use rof::{denoise, DenoiseReport, GrayImage, RofParams};
pub use sparse::CsrMatrix;
