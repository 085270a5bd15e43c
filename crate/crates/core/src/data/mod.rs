//! Datasets, class splits and episode sampling.

mod csv;
mod dataset;
mod episode;
mod idx;
mod manifest;
mod split;
mod synthetic;

pub use csv::{load_csv_dataset, parse_csv_dataset, to_csv_string, write_csv_dataset};
pub use dataset::{LabeledDataset, SplitTag};
pub use episode::{sample_episode, Episode};
pub use idx::{load_idx, read_idx_images, read_idx_labels, write_idx, IdxImages, IMAGES_MAGIC, LABELS_MAGIC};
pub use manifest::{DataManifest, DataSource, LoadedData};
pub use split::{ensure_class_disjoint, SplitSpec, Splits};
pub use synthetic::{gen_synthetic, SyntheticConfig};
