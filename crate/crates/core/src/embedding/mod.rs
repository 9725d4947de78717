//! Shared-vocabulary bilingual sentence encoder.

mod cipher;
mod encoder;
pub(crate) mod tokenize;
mod train;
mod vocab;

pub use cipher::CipherLexicon;
pub use encoder::{encode_sentence, EncodeTrace, EncoderDims, EncoderParams, SentenceVector, SENTENCE_DIM};
pub use tokenize::{tokenize, PAD, UNK, URL};
pub use train::{
    eval_pair_retrieval, in_batch_ranking_loss, load_parallel, retrieval_at_1, train_embedding,
    train_embedding_from, train_step, EmbeddingConfig, EmbeddingTrace, Language, ParallelPair,
};
pub use vocab::{build_vocabulary, Vocabulary, PAD_ID, UNK_ID, URL_ID};
