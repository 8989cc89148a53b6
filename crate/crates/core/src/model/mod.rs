//! Extremely randomized forests, impurity importance and grid search.

mod forest;
mod search;

pub use forest::{train_erf, CandidateCount, ErfParams, Forest, ImportanceTable, Prediction, Tree, FOREST_FORMAT_VERSION};
pub use search::{
    default_grid, grid_search, grid_search_with, prepare_training, stratified_group_folds, CvOptions, CvRow, FoldPrep,
    GridResult, SmotePrep,
};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for the task at `path` under `master`. Every stochastic step
/// of the pipeline draws its seed from here, keyed by its position in the
/// work tree rather than by execution order.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |s, &p| splitmix64(s ^ splitmix64(p)))
}
