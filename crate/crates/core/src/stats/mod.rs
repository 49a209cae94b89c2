//! Curve fitting, rank statistics and threshold estimates.

pub mod logistic;
pub mod per_item;
pub mod spearman;
pub mod threshold;
pub mod tradeoff;

pub use logistic::{adjusted_r2, classify_fit, fit_logistic, logistic, majority_class, FitBounds, FitClass, LogisticFit};
pub use per_item::{item_imum, item_series, step_crossing, ItemImum};
pub use spearman::{spearman, SpearmanResult};
pub use threshold::{crossing, imum, mum, Aggregation, Crossing, ImumEstimate, MumEstimate};
pub use tradeoff::{tradeoff, Curve, Tradeoff};
