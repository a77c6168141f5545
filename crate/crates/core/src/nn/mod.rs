//! Dense networks trained from scratch: the denoising autoencoder, its
//! optimizer, and weight checkpoints.

pub mod adam;
pub mod autoencoder;
pub mod checkpoint;
pub mod linalg;
pub mod train;

pub use adam::Adam;
pub use autoencoder::{
    default_hidden, recon_loss, recon_loss_batch, xavier_bound, AutoencoderModel, Dense,
    Gradients, PROB_FLOOR,
};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use linalg::Matrix;
pub use train::{add_noise, train, TrainConfig, TrainOutcome, TrainReport};
