use std::path::{Path, PathBuf};
use std::sync::Arc;

use hopnet::fv::{keygen as generate, EncryptionParams, EvalKeys, PublicKey, SecretKey};
use hopnet::io::{
    eval_keys_from_bytes, eval_keys_to_bytes, public_key_from_bytes, public_key_to_bytes, secret_key_from_bytes,
    secret_key_to_bytes, write_file, ParamsFile,
};

use crate::error::CliError;

pub const PARAMS_FILE: &str = "params.txt";
pub const SECRET_FILE: &str = "secret.key";
pub const PUBLIC_FILE: &str = "public.key";
pub const EVAL_FILE: &str = "eval.key";

pub fn keygen(params: Option<&Path>, out: &Path, seed: Option<u64>, force: bool) -> Result<(), CliError> {
    let mut file = match params {
        Some(p) => ParamsFile::load(p)?,
        None => ParamsFile::default(),
    };
    let seed = seed.or(file.seed).unwrap_or_else(rand::random);
    // the seed reproduces the secret key, so it is never written out
    file.seed = None;
    let targets: Vec<PathBuf> = [PARAMS_FILE, SECRET_FILE, PUBLIC_FILE, EVAL_FILE]
        .iter()
        .map(|f| out.join(f))
        .collect();
    if !force {
        if let Some(existing) = targets.iter().find(|p| p.exists()) {
            return Err(CliError::Usage(format!("{} exists; pass --force to overwrite", existing.display())));
        }
    }
    let params = file.build()?;
    let (sk, pk, ek) = generate(&params, seed);
    std::fs::create_dir_all(out).map_err(|e| CliError::file(out, e))?;
    std::fs::write(&targets[0], file.to_string()).map_err(|e| CliError::file(&targets[0], e))?;
    write_file(&targets[1], &secret_key_to_bytes(&sk))?;
    write_file(&targets[2], &public_key_to_bytes(&pk))?;
    write_file(&targets[3], &eval_keys_to_bytes(&ek))?;
    println!(
        "wrote keys for n = {} with {} limbs and {} lanes to {}",
        params.n(),
        params.moduli().len(),
        params.t_lanes().len(),
        out.display()
    );
    Ok(())
}

/// Everything a key directory holds.
pub struct KeyDir {
    pub file: ParamsFile,
    pub params: Arc<EncryptionParams>,
    pub sk: SecretKey,
    pub pk: PublicKey,
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::file(path, e))
}

impl KeyDir {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let file = ParamsFile::load(&dir.join(PARAMS_FILE))?;
        let params = file.build()?;
        let sk = secret_key_from_bytes(&params, &read(&dir.join(SECRET_FILE))?)?;
        let pk = public_key_from_bytes(&params, &read(&dir.join(PUBLIC_FILE))?)?;
        Ok(Self { file, params, sk, pk })
    }

    pub fn eval_keys(&self, dir: &Path) -> Result<EvalKeys, CliError> {
        Ok(eval_keys_from_bytes(&self.params, &read(&dir.join(EVAL_FILE))?)?)
    }
}
