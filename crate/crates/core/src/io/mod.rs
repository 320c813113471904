//! CSV datasets, model artifacts and row sampling.

mod artifact;
pub(crate) mod csv;
mod sampling;

pub use self::artifact::{load_model, save_model, ModelArtifact, FORMAT_MAJOR, FORMAT_VERSION};
pub use self::csv::{
    load_csv, load_features, load_with_schema, write_dataset_csv, write_rows_csv, write_text_atomic, CsvOptions,
};
pub use self::sampling::{train_test_split, undersample_nonzero, undersample_rows};
