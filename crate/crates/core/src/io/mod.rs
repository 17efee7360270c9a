//! File formats: corpora, Pharaoh alignments, embedding records, weight
//! sidecars, and the synthetic corpus generator.

pub mod corpus;
pub mod embeddings;
pub mod pharaoh;
pub mod synth;
pub mod weights;

pub use corpus::{read_parallel_corpus, write_parallel_corpus, CorpusHandle, SubwordMode};
pub use embeddings::{read_embeddings, write_embeddings, EmbeddingRecord, EmbeddingRecordFile};
pub use pharaoh::{
    parse_alignment_line, parse_pharaoh_line, read_alignment_file, read_gold_file, serialize_alignment,
    serialize_pharaoh, write_alignment_file, write_gold_file, IndexBase,
};
pub use synth::{simulate_aligner, synthesize_corpus, AlignerProfile, SyntheticCorpus, SyntheticSpec};
pub use weights::{read_weights_file, write_weights_file};
