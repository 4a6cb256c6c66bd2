use std::fmt;
use std::ops::{Add, AddAssign};

/// Tally of the four homomorphic operation classes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct HopTally {
    pub pt_ct_add: u64,
    pub ct_ct_add: u64,
    pub pt_ct_mul: u64,
    pub ct_ct_mul: u64,
    /// Plaintext products that took the monomial path; a subset of `pt_ct_mul`.
    pub fast_path_hits: u64,
}

impl HopTally {
    pub fn total(&self) -> u64 {
        self.pt_ct_add + self.ct_ct_add + self.pt_ct_mul + self.ct_ct_mul
    }

    pub fn scaled(&self, k: u64) -> Self {
        Self {
            pt_ct_add: self.pt_ct_add * k,
            ct_ct_add: self.ct_ct_add * k,
            pt_ct_mul: self.pt_ct_mul * k,
            ct_ct_mul: self.ct_ct_mul * k,
            fast_path_hits: self.fast_path_hits * k,
        }
    }
}

impl AddAssign for HopTally {
    fn add_assign(&mut self, o: Self) {
        self.pt_ct_add += o.pt_ct_add;
        self.ct_ct_add += o.ct_ct_add;
        self.pt_ct_mul += o.pt_ct_mul;
        self.ct_ct_mul += o.ct_ct_mul;
        self.fast_path_hits += o.fast_path_hits;
    }
}

impl Add for HopTally {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

impl std::iter::Sum for HopTally {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerHops {
    pub layer: String,
    pub tally: HopTally,
    pub wall_ms: f64,
}

/// Per-layer operation counts with wall-clock time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HopCounter {
    pub layers: Vec<LayerHops>,
}

pub const CSV_HEADER: &str = "layer,pt_ct_add,ct_ct_add,pt_ct_mul,ct_ct_mul,wall_ms,fast_path_hits";

impl HopCounter {
    pub fn push(&mut self, layer: impl Into<String>, tally: HopTally, wall_ms: f64) {
        self.layers.push(LayerHops {
            layer: layer.into(),
            tally,
            wall_ms,
        });
    }

    pub fn totals(&self) -> HopTally {
        self.layers.iter().map(|l| l.tally).sum()
    }

    pub fn wall_ms(&self) -> f64 {
        self.layers.iter().map(|l| l.wall_ms).sum()
    }

    /// Same layers, counts only; used to compare runs where timing differs.
    pub fn tallies(&self) -> Vec<(&str, HopTally)> {
        self.layers.iter().map(|l| (l.layer.as_str(), l.tally)).collect()
    }

    /// Adds another run over the same layers (for example another lane).
    pub fn merge(&mut self, other: &HopCounter) {
        if self.layers.is_empty() {
            self.layers = other.layers.clone();
            return;
        }
        assert_eq!(self.layers.len(), other.layers.len(), "merging counters of different networks");
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.tally += b.tally;
            a.wall_ms += b.wall_ms;
        }
    }

    pub fn scaled(&self, k: u64) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| LayerHops {
                    layer: l.layer.clone(),
                    tally: l.tally.scaled(k),
                    wall_ms: l.wall_ms * k as f64,
                })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        self.to_string()
    }
}

fn row(f: &mut fmt::Formatter<'_>, name: &str, t: &HopTally, ms: f64) -> fmt::Result {
    writeln!(
        f,
        "{name},{},{},{},{},{ms:.3},{}",
        t.pt_ct_add, t.ct_ct_add, t.pt_ct_mul, t.ct_ct_mul, t.fast_path_hits
    )
}

impl fmt::Display for HopCounter {
    /// CSV with one row per layer and a closing `total` row.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{CSV_HEADER}")?;
        for l in &self.layers {
            row(f, &l.layer, &l.tally, l.wall_ms)?;
        }
        row(f, "total", &self.totals(), self.wall_ms())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_csv() {
        let mut c = HopCounter::default();
        let a = HopTally {
            pt_ct_mul: 8,
            ct_ct_add: 6,
            pt_ct_add: 2,
            fast_path_hits: 8,
            ..Default::default()
        };
        c.push("dense-1", a, 1.5);
        c.push("act-1", HopTally { ct_ct_mul: 2, ..Default::default() }, 0.5);
        assert_eq!(c.totals().total(), 18);
        let csv = c.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "dense-1,2,6,8,0,1.500,8");
        assert_eq!(lines[3], "total,2,6,8,2,2.000,8");
        let mut twice = c.clone();
        twice.merge(&c);
        assert_eq!(twice.totals(), c.totals().scaled(2));
    }
}
