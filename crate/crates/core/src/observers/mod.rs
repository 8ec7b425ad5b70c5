//! Numerical observers: Hotelling, regularized Hotelling, Gabor-channelized
//! Hotelling and learned CNN observers.

mod channels;
mod learned;
mod linear;
mod stats;
mod template_io;

pub use channels::{
    channelize, channelize_vector, cho_template, gabor_channels, gabor_width, GaborChannelSet, GaborParams,
    GABOR_FREQUENCIES, GABOR_ORIENTATIONS, GABOR_PHASES,
};
pub use learned::{
    build_learned_observer, flip_variant, score_learned, score_learned_logit, set_input_normalization,
    template_image, LabeledImages, LearnedObserverSpec, ObserverInit, ALLOWED_BLOCKS,
};
pub use linear::{
    default_lambda_grid, hotelling_template, lambda_grid, rho_rank, rho_template, score_linear, select_rho_lambda,
    LambdaScore, LambdaSelection, LinearTemplate, TemplateKind, MAX_CONDITION,
};
pub use stats::{estimate_image_stats, estimate_stats, image_vector, CovarianceEstimate, StatsAccumulator};
pub use template_io::{load_template, read_template, save_template, write_template};
