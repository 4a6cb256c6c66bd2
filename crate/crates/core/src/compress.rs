//! Magnitude pruning and power-of-two weight quantization.

use std::collections::BTreeMap;
use std::fmt;

use crate::encode::is_monomial_encodable;
use crate::error::{Error, Result};

pub const DEFAULT_K: u32 = 5;

/// A dense weight array with a pruning mask of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl WeightTensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let mask = vec![true; values.len()];
        Self::with_mask(shape, values, mask)
    }

    pub fn with_mask(shape: Vec<usize>, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if values.len() != len || mask.len() != len {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {len} entries, got {} values and {} mask bits",
                values.len(),
                mask.len()
            )));
        }
        Ok(Self { shape, values, mask })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            values: vec![0.0; len],
            mask: vec![true; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The weight actually applied: zero where masked out.
    #[inline]
    pub fn effective(&self, i: usize) -> f64 {
        if self.mask[i] {
            self.values[i]
        } else {
            0.0
        }
    }

    pub fn effective_values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.effective(i)).collect()
    }

    pub fn nonzero(&self) -> usize {
        (0..self.len()).filter(|&i| self.effective(i) != 0.0).count()
    }

    /// Signed exponents of every effective weight when all of them are zero or
    /// a signed power of two; `None` marks zero.
    pub fn pow2_exponents(&self) -> Option<Vec<Option<(bool, i16)>>> {
        (0..self.len())
            .map(|i| {
                let w = self.effective(i);
                if w == 0.0 {
                    return Some(None);
                }
                let e = w.abs().log2().round();
                (w.abs() == 2f64.powi(e as i32) && e.abs() < i16::MAX as f64).then_some(Some((w < 0.0, e as i16)))
            })
            .collect()
    }
}

/// Keeps the `ceil(target * N)` largest-magnitude entries; equal magnitudes
/// keep the lower index.
pub fn prune_mask(w: &WeightTensor, target: f64) -> Result<WeightTensor> {
    if w.is_empty() {
        return Err(Error::Shape("cannot prune an empty tensor".into()));
    }
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::OutOfRange(format!("surviving fraction {target} not in (0, 1]")));
    }
    let keep = keep_count(w.len(), target);
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w.effective(b).abs().total_cmp(&w.effective(a).abs()).then(a.cmp(&b)));
    let mut mask = vec![false; w.len()];
    for &i in &order[..keep] {
        mask[i] = true;
    }
    Ok(WeightTensor {
        shape: w.shape.clone(),
        values: w.values.clone(),
        mask,
    })
}

pub fn keep_count(total: usize, fraction: f64) -> usize {
    // guard against 0.1440 * 1250 landing a hair above an integer
    let exact = fraction * total as f64;
    let rounded = exact.round();
    let k = if (exact - rounded).abs() < 1e-9 { rounded } else { exact.ceil() };
    (k as usize).min(total)
}

/// Which formula sets the smallest codebook exponent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SmallestExponentRule {
    /// `n2 = n1 + 1 - 2^(k-1) / 2`
    #[default]
    Standard,
    /// `n2 = n1 + 1 - 2^((k-1)/2)`, only integral for odd `k`.
    Literal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantSpec {
    pub k: u32,
    pub n1: i32,
    pub n2: i32,
}

impl QuantSpec {
    /// Codebook `{±2^n2, ..., ±2^n1} ∪ {0}` in ascending order.
    pub fn codebook(&self) -> Vec<f64> {
        let mut p: Vec<f64> = (self.n2..=self.n1).flat_map(|e| [2f64.powi(e), -2f64.powi(e)]).collect();
        p.push(0.0);
        p.sort_by(f64::total_cmp);
        p
    }

    /// Nearest codebook element. Between neighbouring powers ties go to the
    /// larger magnitude; anything below `0.75 * 2^n2` becomes zero and
    /// anything above `2^n1` clamps to it.
    pub fn snap(&self, w: f64) -> f64 {
        let m = w.abs();
        let smallest = 2f64.powi(self.n2);
        if m < 0.75 * smallest {
            return 0.0;
        }
        let largest = 2f64.powi(self.n1);
        let snapped = if m >= largest {
            largest
        } else {
            let lo = 2f64.powi((m.log2().floor() as i32).max(self.n2));
            let lo = if lo > m { lo / 2.0 } else { lo };
            let hi = 2.0 * lo;
            if m - lo < hi - m {
                lo.max(smallest)
            } else {
                hi
            }
        };
        snapped.copysign(w)
    }
}

pub fn quant_bounds(w: &WeightTensor, k: u32, rule: SmallestExponentRule) -> Result<QuantSpec> {
    if k < 2 {
        return Err(Error::OutOfRange(format!("bit width {k} below 2")));
    }
    let s = (0..w.len()).map(|i| w.effective(i).abs()).fold(0.0, f64::max);
    if s == 0.0 {
        return Err(Error::Shape("no surviving nonzero weight".into()));
    }
    let n1 = (4.0 * s / 3.0).log2().floor() as i32;
    let span = match rule {
        SmallestExponentRule::Standard => 1i32 << (k - 2),
        SmallestExponentRule::Literal => {
            if !(k - 1).is_multiple_of(2) {
                return Err(Error::OutOfRange(format!(
                    "literal smallest-exponent rule is not integral for k = {k}"
                )));
            }
            1i32 << ((k - 1) / 2)
        }
    };
    Ok(QuantSpec { k, n1, n2: n1 + 1 - span })
}

/// Snaps the `ceil(fraction * surviving)` largest surviving weights to the
/// codebook. Weights that snap to zero are pruned.
pub fn quantize_to_pow2(w: &WeightTensor, spec: &QuantSpec, fraction: f64) -> Result<WeightTensor> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::OutOfRange(format!("quantized fraction {fraction} not in (0, 1]")));
    }
    let mut surviving: Vec<usize> = (0..w.len()).filter(|&i| w.mask[i]).collect();
    surviving.sort_by(|&a, &b| w.values[b].abs().total_cmp(&w.values[a].abs()).then(a.cmp(&b)));
    let count = keep_count(surviving.len(), fraction);
    let mut out = w.clone();
    for &i in &surviving[..count] {
        let q = spec.snap(w.values[i]);
        out.values[i] = q;
        if q == 0.0 {
            out.mask[i] = false;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSparsity {
    pub name: String,
    pub total: usize,
    pub surviving: usize,
    /// Exponent histogram of power-of-two weights.
    pub codebook_usage: BTreeMap<i32, usize>,
    pub monomial_encodable: bool,
}

impl LayerSparsity {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.surviving as f64 / self.total as f64
        }
    }
}

pub fn layer_sparsity(name: &str, w: &WeightTensor, precision_bits: u32) -> LayerSparsity {
    let mut usage = BTreeMap::new();
    let mut monomial = true;
    for i in 0..w.len() {
        let v = w.effective(i);
        if v == 0.0 {
            continue;
        }
        if is_monomial_encodable(v, precision_bits as i64) {
            *usage.entry(v.abs().log2().round() as i32).or_insert(0) += 1;
        } else {
            monomial = false;
        }
    }
    LayerSparsity {
        name: name.to_string(),
        total: w.len(),
        surviving: w.nonzero(),
        codebook_usage: usage,
        monomial_encodable: monomial,
    }
}

/// Per-layer report; rows render as CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsityReport(pub Vec<LayerSparsity>);

impl fmt::Display for SparsityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "layer,total,surviving,fraction,monomial_encodable,codebook")?;
        for l in &self.0 {
            let usage: Vec<String> = l.codebook_usage.iter().map(|(e, c)| format!("2^{e}:{c}")).collect();
            writeln!(
                f,
                "{},{},{},{:.6},{},{}",
                l.name,
                l.total,
                l.surviving,
                l.fraction(),
                l.monomial_encodable,
                usage.join(" ")
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn tensor(values: &[f64]) -> WeightTensor {
        WeightTensor::new(vec![values.len()], values.to_vec()).unwrap()
    }

    #[test]
    fn pruning_examples() {
        let w = tensor(&[3.0, -1.0, 0.5, 2.0]);
        assert_eq!(prune_mask(&w, 1.0).unwrap().mask, vec![true; 4]);
        assert_eq!(prune_mask(&w, 0.5).unwrap().mask, vec![true, false, false, true]);
        assert!(prune_mask(&tensor(&[]), 0.5).is_err());
        assert!(prune_mask(&w, 0.0).is_err());
        // equal magnitudes keep the earlier index
        let tie = tensor(&[1.0, -1.0, 1.0]);
        assert_eq!(prune_mask(&tie, 0.5).unwrap().mask, vec![true, true, false]);
    }

    #[test]
    fn pruning_hits_target_fractions() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for (target, n) in [(0.1440, 500usize), (0.0701, 25_000), (0.0568, 125_000), (0.1480, 1000)] {
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w = prune_mask(&WeightTensor::new(vec![n], values).unwrap(), target).unwrap();
            let kept = w.nonzero() as f64;
            assert!((kept - target * n as f64).abs() <= 1.0, "{target} {kept}");
        }
        assert_eq!(keep_count(1250, 0.1440), 180);
        assert_eq!(keep_count(10, 0.15), 2);
    }

    #[test]
    fn bounds_examples() {
        let one = quant_bounds(&tensor(&[1.0, -0.2]), 5, SmallestExponentRule::Standard).unwrap();
        assert_eq!((one.n1, one.n2), (0, -7));
        assert_eq!(one.codebook().len() as i32, 2 * (one.n1 - one.n2 + 1) + 1);
        assert!(one.codebook().iter().all(|&c| c == 0.0 || c.abs().log2().fract() == 0.0));
        let three_quarters = quant_bounds(&tensor(&[0.75]), 5, SmallestExponentRule::Standard).unwrap();
        assert_eq!(three_quarters.n1, 0);
        let literal = quant_bounds(&tensor(&[1.0]), 5, SmallestExponentRule::Literal).unwrap();
        assert_eq!(literal.n2, -3);
        assert!(quant_bounds(&tensor(&[1.0]), 4, SmallestExponentRule::Literal).is_err());
        assert!(quant_bounds(&tensor(&[0.0]), 5, SmallestExponentRule::Standard).is_err());
    }

    #[test]
    fn snapping() {
        let spec = QuantSpec { k: 5, n1: 0, n2: -7 };
        assert_eq!(spec.snap(0.5), 0.5);
        assert_eq!(spec.snap(0.3), 0.25);
        assert_eq!(spec.snap(-0.3), -0.25);
        assert_eq!(spec.snap(0.375), 0.5);
        assert_eq!(spec.snap(5.0), 1.0);
        assert_eq!(spec.snap(0.75 * 2f64.powi(-7)), 2f64.powi(-7));
        assert_eq!(spec.snap(0.74 * 2f64.powi(-7)), 0.0);
    }

    #[test]
    fn quantize_full_and_partial() {
        let w = tensor(&[0.9, -0.3, 0.05, 0.001, 0.6]);
        let spec = quant_bounds(&w, 5, SmallestExponentRule::Standard).unwrap();
        let q = quantize_to_pow2(&w, &spec, 1.0).unwrap();
        assert_eq!(q.effective_values(), vec![1.0, -0.25, 0.0625, 0.0, 0.5]);
        assert!(q.pow2_exponents().is_some());
        assert_eq!(quantize_to_pow2(&q, &spec, 1.0).unwrap(), q);
        let half = quantize_to_pow2(&w, &spec, 0.4).unwrap();
        assert_eq!(half.values, vec![1.0, -0.3, 0.05, 0.001, 0.5]);
    }

    #[test]
    fn report_flags() {
        let q = tensor(&[0.5, -0.25, 0.0]);
        let r = layer_sparsity("fc", &q, 15);
        assert!(r.monomial_encodable);
        assert_eq!(r.surviving, 2);
        assert_eq!(r.codebook_usage, BTreeMap::from([(-2, 1), (-1, 1)]));
        assert!(!layer_sparsity("fc", &tensor(&[0.3]), 15).monomial_encodable);
        assert!(!layer_sparsity("fc", &tensor(&[2f64.powi(-20)]), 15).monomial_encodable);
        let text = SparsityReport(vec![r]).to_string();
        assert!(text.starts_with("layer,total,surviving"));
    }

    proptest! {
        #[test]
        fn snap_error_within_half_gap(w in -2.0f64..2.0) {
            let spec = QuantSpec { k: 5, n1: 0, n2: -7 };
            let q = spec.snap(w);
            prop_assert!(q == 0.0 || q.signum() == w.signum());
            let m = w.abs();
            if m >= 2f64.powi(-7) && m <= 1.0 {
                let lo = 2f64.powi(m.log2().floor() as i32);
                prop_assert!((q - w).abs() <= lo / 2.0 + 1e-15);
            }
            prop_assert_eq!(spec.snap(q), q);
        }

        #[test]
        fn pruning_is_monotone(seed: u64, a in 0.05f64..1.0, b in 0.05f64..1.0) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w = tensor(&values);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let small = prune_mask(&w, lo).unwrap();
            let big = prune_mask(&w, hi).unwrap();
            prop_assert!(small.mask.iter().zip(&big.mask).all(|(&s, &b)| !s || b));
        }
    }
}
