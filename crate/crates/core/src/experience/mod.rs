//! Positive-only experience store with surprisal-guided retrieval.

mod buffer;
pub mod kernel;
pub mod persist;
pub mod selection;
pub mod surprise;

pub use buffer::{Experience, ExperienceBuffer, Selection};
pub use kernel::{median_pairwise_distance, similarity, squared_distance, RunningStats};
pub use selection::{greedy_select, objective, SelectionConfig};
pub use surprise::{gaussian_kl, information_gain, local_loo_mean, loo_means, posterior, surprisal, GaussianPrior};
