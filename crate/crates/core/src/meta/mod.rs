//! Metaheuristic search shared across the crate: a Firefly Algorithm over
//! box-constrained real vectors, NSGA-II over discrete bid encodings, and
//! TOPSIS ranking.

pub mod firefly;
pub mod nsga2;
pub mod topsis;

pub use firefly::{firefly_optimize, FaParams};
pub use nsga2::{fast_nondominated_sort, nsga2, Nsga2Params};
pub use topsis::{topsis, TopsisRanking};
