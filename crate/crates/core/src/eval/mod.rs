//! Best-image selection, baseline scorers and verification metrics.

mod report;
mod roc;
mod scorers;
mod select;
mod verify;

pub use report::{evaluate_selections, template_features, EvaluationReport};
pub use roc::{kfold_accuracy, roc, KFoldReport, RocPoint, VerificationReport, FPR_TARGETS};
pub use scorers::{score_blur, score_combination, score_jpeg, score_jpeg_bytes, score_records, Scorer, ScorerKind, BLUR_C, JPEG_REF_BPP};
pub use select::{select_all, select_best, Selection};
pub use verify::{cosine, make_pairs, templates_from_manifest, verify_pairs, PairLabel, TemplateGroup};
