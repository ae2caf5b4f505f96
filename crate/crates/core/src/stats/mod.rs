//! Fold planning, ROC/AUC, thresholding and one-way ANOVA.

mod anova;
mod fdist;
mod folds;
mod roc;

pub use anova::{one_way_anova, AnovaResult};
pub use fdist::{f_cdf, f_sf, ln_gamma, regularized_beta};
pub use folds::{make_folds, Fold, FoldPlan};
pub use roc::{
    confusion_at_threshold, roc_auc, select_threshold, subject_aggregate, Confusion, PositiveRule, Roc,
    RocPoint, SampleScore, SubjectScore, ThresholdChoice, ThresholdCriterion,
};
