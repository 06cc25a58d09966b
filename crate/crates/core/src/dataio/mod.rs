//! Sequence ingestion, pre-processing, synthetic data and descriptor files.

mod bytes;
mod descfile;
mod format;
mod preprocess;
mod sequence;
mod synth;

pub(crate) use bytes::ByteReader;
pub use descfile::{load_descriptors, read_descriptors, save_descriptors, write_descriptors, DESCRIPTOR_FORMAT_VERSION};
pub use format::{
    load_sequences, parse_sequence, read_sequences, save_sequences, sequence_to_line, write_sequences,
    SEQUENCE_FORMAT_VERSION,
};
pub use preprocess::{
    alternate_subjects, bone_lengths, cross_subject_split, hip_center, limb_normalize, median_bone_lengths, Topology,
};
pub use sequence::{Channel, SkeletonSequence};
pub use synth::{synth_dataset, SynthConfig};
