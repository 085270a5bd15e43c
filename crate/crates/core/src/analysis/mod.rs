//! Feature discriminability, novel-to-base confusion and plot data.

mod angular;
mod confusion;
mod export;
mod proposition;
mod stats;
mod variance;

pub use angular::{angle_bin, angular_histogram, AngularHistogram, HISTOGRAM_CSV_HEADER};
pub use confusion::{confusion_from_scores, confusion_profile, ConfusionProfile, CONFUSION_CSV_HEADER};
pub use export::{embeddings_csv, export_embeddings, read_embeddings};
pub use proposition::{check_proposition, random_admissible_instance, PropositionInstance, PropositionVerdict};
pub use stats::{average_ranks, spearman};
pub use variance::{class_centers, variance_report, AnalysisReport, Discriminability, VARIANCE_CSV_HEADER};
