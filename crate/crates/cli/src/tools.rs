use std::path::Path;

use hopnet::approx::{approximate, Activation};
use hopnet::compress::{
    layer_sparsity, prune_mask, quant_bounds, quantize_to_pow2, SmallestExponentRule, SparsityReport, WeightTensor,
};
use hopnet::engine::{build_mnist_configs, project_hops_at, HopCounter, Layer, NetworkSpec};
use hopnet::io::{load_network, save_network};

use crate::error::CliError;

pub fn approx(function: Activation, degree: usize, interval: f64, grid: usize, window: i32) -> Result<(), CliError> {
    let report = approximate(function, degree, interval, grid, window)?;
    println!("{report}");
    if let Some(terms) = &report.optimal.terms {
        let exps: Vec<String> = terms
            .iter()
            .map(|t| t.map_or("none".to_string(), |t| t.exponent.to_string()))
            .collect();
        println!("optimal exponents {}", exps.join(" "));
    }
    Ok(())
}

fn weights_mut(layer: &mut Layer) -> Option<&mut WeightTensor> {
    match layer {
        Layer::Conv2d { weights, .. } | Layer::Dense { weights, .. } => Some(weights),
        _ => None,
    }
}

fn check_fraction(flag: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(f) if !(f > 0.0 && f <= 1.0) => Err(CliError::Usage(format!("--{flag} must be in (0, 1], got {f}"))),
        _ => Ok(()),
    }
}

pub fn compress(
    model: &Path,
    prune: Option<f64>,
    quantize: Option<f64>,
    k: u32,
    precision: u32,
    out: Option<&Path>,
) -> Result<(), CliError> {
    check_fraction("prune", prune)?;
    check_fraction("quantize", quantize)?;
    let net = load_network(model)?;
    let names = net.layer_names();
    let mut layers = net.layers;
    let mut rows = Vec::new();
    for (name, layer) in names.iter().zip(&mut layers) {
        let Some(w) = weights_mut(layer) else { continue };
        if let Some(target) = prune {
            *w = prune_mask(w, target)?;
        }
        if let Some(fraction) = quantize {
            let spec = quant_bounds(w, k, SmallestExponentRule::Standard)?;
            *w = quantize_to_pow2(w, &spec, fraction)?;
        }
        rows.push(layer_sparsity(name, w, precision));
    }
    print!("{}", SparsityReport(rows));
    if let Some(path) = out {
        save_network(path, &NetworkSpec::new(net.input, layers)?)?;
    }
    Ok(())
}

fn print_hops(counter: &HopCounter) {
    print!("{counter}");
    println!("total HOPs = {}", counter.totals().total());
}

pub fn hops_model(model: &Path, precision: u32) -> Result<(), CliError> {
    print_hops(&project_hops_at(&load_network(model)?, precision)?);
    Ok(())
}

pub fn hops_config(cryptonets: bool, maps: usize, precision: u32, seed: u64) -> Result<(), CliError> {
    if maps == 0 {
        return Err(CliError::Usage("--maps must be positive".into()));
    }
    let (dense, faster) = build_mnist_configs(maps, seed)?;
    let dense_hops = project_hops_at(&dense, precision)?;
    let faster_hops = project_hops_at(&faster, precision)?;
    print_hops(if cryptonets { &dense_hops } else { &faster_hops });
    println!(
        "ratio cryptonets/faster = {:.3}",
        dense_hops.totals().total() as f64 / faster_hops.totals().total() as f64
    );
    Ok(())
}
