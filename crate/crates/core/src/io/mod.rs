//! File formats: the text parameter file, the binary network container, and
//! the ciphertext and key files.

mod crypto_files;
mod params_file;
mod weights;

pub use crypto_files::{
    ciphertext_bytes, ciphertext_from_bytes, ciphertext_to_bytes, ciphertext_words, ciphertexts_from_bytes,
    eval_keys_from_bytes, eval_keys_to_bytes, peek_magic, public_key_from_bytes, public_key_to_bytes,
    secret_key_from_bytes, secret_key_to_bytes, write_ciphertext, write_file, CIPHERTEXT_MAGIC, EVAL_KEY_MAGIC,
    HEADER_WORDS, PUBLIC_KEY_MAGIC, SECRET_KEY_MAGIC,
};
pub use params_file::ParamsFile;
pub use weights::{load_network, network_from_bytes, network_to_bytes, save_network, WEIGHTS_MAGIC, WEIGHTS_VERSION};
