//! Classical layers, the hybrid autoencoder, reconstruction loss and the
//! optimizer used to train it.

mod adam;
mod autoencoder;
mod dense;

pub use adam::{Adam, AdamConfig};
pub use autoencoder::{
    mse_loss, sample_loss, ForwardCache, HybridAutoencoder, ModelGrads, ModelShape, DEFAULT_HIDDEN, IMAGE_DIM,
    N_TENSORS, TENSOR_NAMES,
};
pub use dense::{Activation, DenseLayer, LayerGrads};
