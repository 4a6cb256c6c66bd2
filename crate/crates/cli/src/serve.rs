//! The server command. It loads only public material.

use std::io::Write;
use std::net::TcpListener;
use std::path::Path;

use hopnet::io::{eval_keys_from_bytes, load_network, peek_magic, ParamsFile, EVAL_KEY_MAGIC, SECRET_KEY_MAGIC};
use hopnet::protocol::InferenceService;

use crate::error::CliError;

pub fn serve(
    model: &Path,
    params: &Path,
    eval_keys: &Path,
    listen: &str,
    max_payload: u64,
    once: bool,
) -> Result<(), CliError> {
    match peek_magic(eval_keys).map_err(|e| match e {
        hopnet::Error::Io(io) => CliError::file(eval_keys, io),
        other => other.into(),
    })? {
        EVAL_KEY_MAGIC => {}
        SECRET_KEY_MAGIC => {
            return Err(CliError::Usage(format!(
                "{} holds a secret key; the server only takes evaluation keys",
                eval_keys.display()
            )))
        }
        _ => return Err(CliError::Usage(format!("{} is not an evaluation key file", eval_keys.display()))),
    }
    let file = ParamsFile::load(params)?;
    let p = file.build()?;
    let bytes = std::fs::read(eval_keys).map_err(|e| CliError::file(eval_keys, e))?;
    let ek = eval_keys_from_bytes(&p, &bytes)?;
    let net = load_network(model)?;
    let service = InferenceService::new(ek, &net, file.precision_bits)?.with_payload_cap(max_payload);
    let listener = TcpListener::bind(listen).map_err(|e| CliError::Usage(format!("cannot listen on {listen}: {e}")))?;
    let addr = listener.local_addr().map_err(hopnet::Error::from)?;
    println!("listening on {addr}");
    std::io::stdout().flush().map_err(hopnet::Error::from)?;
    service.serve(&listener, once.then_some(1), &|hops| {
        eprintln!("request: {} HOPs in {:.1} ms", hops.totals().total(), hops.wall_ms());
    })?;
    Ok(())
}
