//! Joint posterior of the thinned LGCP, mode finding, Laplace
//! approximation, hyperparameter profiling and posterior sampling.

pub mod data;
pub mod gradcheck;
pub mod joint;
pub mod laplace;
pub mod model;
pub mod optimize;
pub mod posterior;
pub mod profile;

pub use data::{CampaignData, FitData};
pub use gradcheck::{gradcheck_model, GradcheckReport};
pub use joint::ThinnedLgcp;
pub use laplace::{laplace_cov, laplace_log_marginal};
pub use model::{HyperPoint, ModelSpec, ParamLayout, ParamVector, PriorSpec};
pub use optimize::{fit_map, MapFit, Tolerances};
pub use posterior::{fit_posterior, sample_posterior, summarize, NormalMixture, ParamSummary, PosteriorFit};
pub use profile::{profile_hyperparams, HyperGrid, HyperProfile, ProfilePoint};
