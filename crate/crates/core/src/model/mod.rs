//! Dense feature extractor, similarity heads and checkpoints.

mod checkpoint;
mod head;
mod network;

pub use checkpoint::{from_checkpoint_str, load_checkpoint, save_checkpoint, to_checkpoint_string};
pub use head::{head_backward, head_forward, HeadCache, SimilarityKind};
pub use network::{
    glorot_limit, he_limit, Activation, BackboneConfig, Dense, ForwardOutput, Network,
};
pub(crate) use network::uniform_fill;
