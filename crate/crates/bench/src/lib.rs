//! Fixtures shared by the criterion benches.

use aerial_core::bench::generate_synthetic;
use aerial_core::nn::{default_hidden, train};
use aerial_core::tabular::{dataset_transactions, one_hot_encode};
use aerial_core::{AutoencoderModel, Dataset, OneHotMatrix, OneHotSchema, TrainConfig, TransactionDb};

/// Dense table with three categories per column, 50 rows.
pub fn dense(columns: usize) -> Dataset {
    generate_synthetic(columns, 50, 3, 0.7, 1).expect("valid generator arguments")
}

pub fn transactions(columns: usize) -> TransactionDb {
    dataset_transactions(&dense(columns)).expect("non-empty table")
}

pub fn encoded(columns: usize) -> (OneHotSchema, OneHotMatrix) {
    one_hot_encode(&dense(columns)).expect("non-empty table")
}

/// Autoencoder trained with the default 10 epochs.
pub fn trained(columns: usize) -> (OneHotSchema, AutoencoderModel) {
    let (schema, data) = encoded(columns);
    let initial = AutoencoderModel::for_schema(&schema, &default_hidden(data.width()), 0)
        .expect("schema fits the default layout");
    let model = train(&initial, &data, &TrainConfig::default()).expect("valid config").model;
    (schema, model)
}
