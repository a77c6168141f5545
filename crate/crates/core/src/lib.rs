pub mod bench;
pub mod error;
pub mod extract;
pub mod finetune;
pub mod metrics;
pub mod miners;
pub mod nn;
pub mod rule;
pub mod tabular;
pub mod tidset;

pub use error::{Error, Result};
pub use extract::{extract_rules, ExtractionConfig, Reconstructor};
pub use finetune::{finetune_dl, finetune_wi, EmbeddingMatrix, FinetuneConfig, Strategy};
pub use metrics::{evaluate_rules, RuleMetricsReport};
pub use miners::{Itemset, Miner};
pub use nn::{AutoencoderModel, TrainConfig};
pub use rule::Rule;
pub use tabular::{Dataset, OneHotMatrix, OneHotSchema, TransactionDb};
