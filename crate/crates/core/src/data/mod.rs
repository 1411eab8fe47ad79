//! Record ingestion, `[0, 1]` encoding, decoding, and train/test splitting.

mod records;
mod schema;

pub use records::{
    decode_records, encode_records, load_csv, postprocess_batch, postprocess_sample, read_table, split,
    write_table, Cell, RecordMatrix, SplitSpec,
};
pub use schema::{Column, ColumnKind, FeatureSchema};
