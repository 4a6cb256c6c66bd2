use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::CliError;

/// Numbers separated by commas, whitespace or newlines.
pub fn read_csv(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
    parse_csv(&text).map_err(|m| CliError::Usage(format!("{}: {m}", path.display())))
}

pub fn parse_csv(text: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for item in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()) {
            let v: f64 = item
                .parse()
                .map_err(|_| format!("line {}: `{item}` is not a number", i + 1))?;
            if !v.is_finite() {
                return Err(format!("line {}: `{item}` is not finite", i + 1));
            }
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err("no values".into());
    }
    Ok(out)
}

pub fn rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_os_rng(),
    }
}

pub fn print_scores(scores: &[f64]) {
    for (i, s) in scores.iter().enumerate() {
        println!("score[{i}] = {s:.9}");
    }
    if let Some(k) = hopnet::engine::argmax(scores) {
        println!("prediction = {k}");
    }
}
