use std::path::Path;

use hopnet::engine::{capacity_check, compile, infer_local};
use hopnet::io::load_network;
use hopnet::protocol::infer_remote;

use crate::error::CliError;
use crate::input::{print_scores, read_csv, rng};
use crate::keys::KeyDir;

pub fn infer(
    model: &Path,
    keys: &Path,
    input: &Path,
    hops_report: Option<&Path>,
    input_bound: Option<f64>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let net = load_network(model)?;
    let x = read_csv(input)?;
    let dir = KeyDir::load(keys)?;
    let ek = dir.eval_keys(keys)?;
    let cfg = dir.file.fixed_point()?;
    let bound = input_bound.unwrap_or_else(|| x.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
    capacity_check(&net, &cfg, bound, dir.params.n())?;
    let plan = compile(&net, cfg.precision_bits)?;
    let result = infer_local(&plan, &dir.sk, &dir.pk, &ek, &x, &mut rng(seed))?;
    print_scores(&result.scores);
    println!("hops = {}", result.hops.totals().total());
    if let Some(path) = hops_report {
        std::fs::write(path, result.hops.to_string()).map_err(|e| CliError::file(path, e))?;
    }
    Ok(())
}

pub fn client(keys: &Path, input: &Path, connect: &str, seed: Option<u64>) -> Result<(), CliError> {
    let x = read_csv(input)?;
    let dir = KeyDir::load(keys)?;
    let scores = infer_remote(connect, &dir.sk, &dir.pk, &x, dir.file.precision_bits, &mut rng(seed))?;
    print_scores(&scores);
    Ok(())
}
