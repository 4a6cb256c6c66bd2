use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::encode::{FixedPointConfig, DEFAULT_PRECISION_BITS};
use crate::error::{Error, Result};
use crate::fv::{EncryptionParams, DEFAULT_BETA, DEFAULT_LIMBS, DEFAULT_N, DEFAULT_NOISE_STDDEV, DEFAULT_T};

/// `name = value` parameter file. `#` starts a comment; lists are comma
/// separated. `n`, `limbs` and `t_lanes` are required.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamsFile {
    pub n: usize,
    pub limbs: Vec<u64>,
    pub t_lanes: Vec<u64>,
    pub beta: u64,
    pub precision_bits: u32,
    pub noise_stddev: f64,
    pub seed: Option<u64>,
}

impl Default for ParamsFile {
    fn default() -> Self {
        Self {
            n: DEFAULT_N,
            limbs: DEFAULT_LIMBS.to_vec(),
            t_lanes: vec![DEFAULT_T],
            beta: DEFAULT_BETA,
            precision_bits: DEFAULT_PRECISION_BITS,
            noise_stddev: DEFAULT_NOISE_STDDEV,
            seed: None,
        }
    }
}

fn parse_err(line: usize, msg: impl fmt::Display) -> Error {
    Error::Format(format!("line {line}: {msg}"))
}

fn scalar<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| parse_err(line, format!("`{key}` expects a number, got `{v}`")))
}

fn list(line: usize, key: &str, v: &str) -> Result<Vec<u64>> {
    let items: Vec<u64> = v
        .split(',')
        .map(|s| scalar(line, key, s.trim()))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(parse_err(line, format!("`{key}` is empty")));
    }
    Ok(items)
}

impl FromStr for ParamsFile {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut out = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| parse_err(line, format!("expected `name = value`, got `{body}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(parse_err(line, format!("`{key}` given twice")));
            }
            match key {
                "n" => out.n = scalar(line, key, value)?,
                "limbs" => out.limbs = list(line, key, value)?,
                "t_lanes" => out.t_lanes = list(line, key, value)?,
                "beta" => out.beta = scalar(line, key, value)?,
                "precision_bits" => out.precision_bits = scalar(line, key, value)?,
                "noise_stddev" => out.noise_stddev = scalar(line, key, value)?,
                "seed" => out.seed = Some(scalar(line, key, value)?),
                _ => return Err(parse_err(line, format!("unknown key `{key}`"))),
            }
            seen.push(key);
        }
        for required in ["n", "limbs", "t_lanes"] {
            if !seen.contains(&required) {
                return Err(Error::Format(format!("missing required key `{required}`")));
            }
        }
        // surface invariant violations at parse time
        out.build()?;
        FixedPointConfig::new(out.precision_bits, out.t_lanes.clone())?;
        Ok(out)
    }
}

impl fmt::Display for ParamsFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(", ");
        writeln!(f, "n = {}", self.n)?;
        writeln!(f, "limbs = {}", join(&self.limbs))?;
        writeln!(f, "t_lanes = {}", join(&self.t_lanes))?;
        writeln!(f, "beta = {}", self.beta)?;
        writeln!(f, "precision_bits = {}", self.precision_bits)?;
        writeln!(f, "noise_stddev = {}", self.noise_stddev)?;
        if let Some(seed) = self.seed {
            writeln!(f, "seed = {seed}")?;
        }
        Ok(())
    }
}

impl ParamsFile {
    pub fn load(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)?
            .parse()
            .map_err(|e| match e {
                Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
                other => other,
            })
    }

    pub fn build(&self) -> Result<Arc<EncryptionParams>> {
        EncryptionParams::new(self.n, &self.limbs, &self.t_lanes, self.beta, self.noise_stddev)
    }

    pub fn fixed_point(&self) -> Result<FixedPointConfig> {
        FixedPointConfig::new(self.precision_bits, self.t_lanes.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let p = ParamsFile {
            seed: Some(7),
            ..Default::default()
        };
        let text = p.to_string();
        assert_eq!(text.parse::<ParamsFile>().unwrap(), p);
        assert_eq!(p.build().unwrap().n(), 8192);
    }

    #[test]
    fn comments_and_defaults() {
        let p: ParamsFile = "# tiny\nn = 1024 # ring\nlimbs = 30296486258802689, 30296486253035521\nt_lanes = 65537\n"
            .parse()
            .unwrap();
        assert_eq!(p.n, 1024);
        assert_eq!(p.limbs.len(), 2);
        assert_eq!(p.beta, DEFAULT_BETA);
        assert_eq!(p.seed, None);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = |s: &str| s.parse::<ParamsFile>().unwrap_err().to_string();
        assert_eq!(err("n = 1024\ncolour = red\n"), "line 2: unknown key `colour`");
        assert!(err("n = 1024\n\nlimbs = 5, x\n").starts_with("line 3:"));
        assert!(err("n 1024\n").starts_with("line 1:"));
        assert!(err("n = 1024\nn = 2048\n").starts_with("line 2:"));
        assert!(err("n = 1024\n").contains("missing required key `limbs`"));
        // parses but violates the scheme's constraints
        let bad = "n = 1000\nlimbs = 30296486258802689\nt_lanes = 65537\n".parse::<ParamsFile>();
        assert!(matches!(bad, Err(Error::InvalidParams(_))));
    }
}
