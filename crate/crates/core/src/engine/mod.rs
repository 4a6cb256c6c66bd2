//! Network definition, plaintext and encrypted evaluation, and operation
//! accounting.

mod capacity;
mod encrypted;
mod fixtures;
mod hops;
mod network;
mod plan;

pub use encrypted::{
    argmax, decrypt_output, encrypt_input, eval_encrypted, eval_encrypted_with, eval_lanes, infer_local, CipherTensor,
    Inference,
};
pub use hops::{HopCounter, HopTally, LayerHops, CSV_HEADER};
pub use network::{eval_plain, fold_batchnorm, window_out, Layer, NetworkSpec, Shape};
pub use plan::{
    compile, project_hops, project_hops_at, CompiledLayer, CompiledNetwork, LinearOutput, Scaled, SquareTerm, Step,
    MAX_MUL_DEPTH,
};
pub use capacity::{capacity_check, capacity_check_plan, select_lanes, CapacityReport};
pub use fixtures::{
    build_mnist_configs, prune_and_quantize, tiny_network, weight_layers, MNIST_INPUT, MNIST_SPARSITY, SMALL_LANES,
    SQUARE, SWISH_PSTAR,
};
