//! From-scratch fully connected network: dropout, MSLE loss,
//! backpropagation, Adam/SGD, a binary model format, and the training loop.

mod backprop;
mod dropout;
mod io;
mod loss;
mod model;
mod optim;
mod train;

pub use backprop::{batch_gradients, Gradients};
pub use dropout::DropoutMask;
pub use io::{load_model, read_model, save_model, write_model, FORMAT_VERSION, MAGIC};
pub use loss::{msle_grad, msle_loss};
pub use model::{Activation, Layer, MlpModel, Workspace, PAPER_ARCH};
pub use optim::{adam_update, AdamState, OptimizerKind};
pub use train::{fit, frame_pairs, train, FrameSet, TrainConfig, TrainReport};
