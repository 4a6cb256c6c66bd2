//! Polynomial stand-ins for activation functions.
//!
//! A real minimax fit comes from the Remez exchange; rounding its
//! coefficients to signed powers of two gives a cheap baseline, and an
//! exhaustive scan over nearby exponents finds the best power-of-two
//! polynomial under the same error measure.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_INTERVAL: f64 = 4.0;
pub const DEFAULT_GRID: usize = 10_001;
pub const DEFAULT_WINDOW: i32 = 3;
const REMEZ_GRID: usize = 20_001;
const REMEZ_MAX_ITER: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Swish,
    Softplus,
    Square,
}

impl Activation {
    pub const ALL: [Activation; 4] = [Self::Relu, Self::Swish, Self::Softplus, Self::Square];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Self::Relu => x.max(0.0),
            Self::Swish => x / (1.0 + (-x).exp()),
            // log(1 + e^x) without overflow for large x
            Self::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            Self::Square => x * x,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Self::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Swish => {
                let sig = 1.0 / (1.0 + (-x).exp());
                let f = x * sig;
                f + (1.0 - f) * sig
            }
            Self::Softplus => 1.0 / (1.0 + (-x).exp()),
            Self::Square => 2.0 * x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Relu => "relu",
            Self::Swish => "swish",
            Self::Softplus => "softplus",
            Self::Square => "square",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Approx(format!("unknown activation {s:?}")))
    }
}

/// A signed power of two.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pow2 {
    pub negative: bool,
    pub exponent: i32,
}

impl Pow2 {
    pub fn value(self) -> f64 {
        let m = 2f64.powi(self.exponent);
        if self.negative {
            -m
        } else {
            m
        }
    }

    /// Nearest power of two in log scale; an exact geometric midpoint goes to
    /// the smaller magnitude. Zero has no power-of-two form.
    pub fn round(c: f64) -> Option<Self> {
        if c == 0.0 || !c.is_finite() {
            return None;
        }
        let l = c.abs().log2();
        let mut e = l.floor();
        // compare against the geometric midpoint 2^(e + 1/2) exactly
        let mid = 2f64.powf(e + 0.5);
        if c.abs() > mid {
            e += 1.0;
        }
        Some(Self {
            negative: c < 0.0,
            exponent: e as i32,
        })
    }
}

impl fmt::Display for Pow2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}2^{}", if self.negative { "-" } else { "" }, self.exponent)
    }
}

/// A polynomial approximation with coefficients in ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyApprox {
    pub coeffs: Vec<f64>,
    /// Present for power-of-two polynomials; `None` entries are zero.
    pub terms: Option<Vec<Option<Pow2>>>,
    pub interval: f64,
    pub delta: f64,
    pub grid_points: usize,
}

impl PolyApprox {
    pub fn real(f: Activation, coeffs: Vec<f64>, interval: f64, grid_points: usize) -> Self {
        let delta = max_error(f, &coeffs, interval, grid_points);
        Self {
            coeffs,
            terms: None,
            interval,
            delta,
            grid_points,
        }
    }

    pub fn pow2(f: Activation, terms: Vec<Option<Pow2>>, interval: f64, grid_points: usize) -> Self {
        let coeffs = terms.iter().map(|t| t.map_or(0.0, Pow2::value)).collect();
        let mut p = Self::real(f, coeffs, interval, grid_points);
        p.terms = Some(terms);
        p
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        horner(&self.coeffs, x)
    }

    pub fn is_pow2(&self) -> bool {
        self.terms.is_some()
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn grid(a: f64, points: usize) -> impl Iterator<Item = f64> + Clone {
    let step = 2.0 * a / (points - 1) as f64;
    (0..points).map(move |i| if i == points - 1 { a } else { -a + step * i as f64 })
}

/// Maximum of `|f - p|` over a uniform grid on `[-a, a]` with both endpoints.
pub fn max_error(f: Activation, coeffs: &[f64], a: f64, grid_points: usize) -> f64 {
    grid(a, grid_points.max(2))
        .map(|x| (f.eval(x) - horner(coeffs, x)).abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct RemezResult {
    pub approx: PolyApprox,
    pub iterations: usize,
    pub converged: bool,
    /// Final reference points and the signed error at each.
    pub reference: Vec<(f64, f64)>,
}

/// Minimax polynomial of the given degree on `[-a, a]` by the Remez exchange.
/// A run that hits the iteration limit still returns its last iterate with
/// `converged` unset.
pub fn remez_minimax(f: Activation, degree: usize, a: f64, grid_points: usize) -> Result<RemezResult> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Approx(format!("interval half-width {a} must be positive")));
    }
    let m = degree + 2;
    let mut xs: Vec<f64> = (0..m)
        .map(|i| -a * (std::f64::consts::PI * i as f64 / (m - 1) as f64).cos())
        .collect();
    let mut coeffs = vec![0.0; degree + 1];
    let mut reference = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < REMEZ_MAX_ITER {
        iterations += 1;
        let mat = DMatrix::from_fn(m, m, |i, k| {
            if k <= degree {
                xs[i].powi(k as i32)
            } else if i % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        });
        let rhs = DVector::from_iterator(m, xs.iter().map(|&x| f.eval(x)));
        let sol = mat
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Approx("singular Remez system".into()))?;
        coeffs = sol.iter().take(degree + 1).copied().collect();
        let level = sol[degree + 1].abs();

        let extrema = alternating_extrema(f, &coeffs, a, m);
        let worst = extrema.iter().map(|e| e.1.abs()).fold(0.0, f64::max);
        if worst < 1e-14 || (worst - level) / worst < 1e-12 {
            converged = true;
            reference = extrema;
            break;
        }
        let next: Vec<f64> = if extrema.len() == m {
            extrema.iter().map(|e| e.0).collect()
        } else {
            // too few sign changes to exchange every point: swap in the worst
            // point alone, keeping the reference signs alternating
            let err = |x: f64| f.eval(x) - horner(&coeffs, x);
            let (x_star, e_star) = extrema
                .iter()
                .copied()
                .max_by(|p, q| p.1.abs().total_cmp(&q.1.abs()))
                .expect("grid is non-empty");
            single_exchange(&xs, |x| err(x).signum(), x_star, e_star.signum())
        };
        reference = next.iter().map(|&x| (x, f.eval(x) - horner(&coeffs, x))).collect();
        if next == xs {
            converged = (worst - level) / worst < 1e-8;
            break;
        }
        xs = next;
    }

    // solver noise on terms that vanish by symmetry, e.g. c0 and c1 of x^2
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    for c in &mut coeffs {
        if c.abs() <= 1e-12 * scale {
            *c = 0.0;
        }
    }
    Ok(RemezResult {
        approx: PolyApprox::real(f, coeffs, a, grid_points),
        iterations,
        converged,
        reference,
    })
}

// Local extrema of the error with alternating signs, trimmed to `m` points.
fn alternating_extrema(f: Activation, coeffs: &[f64], a: f64, m: usize) -> Vec<(f64, f64)> {
    let err = |x: f64| f.eval(x) - horner(coeffs, x);
    let xs: Vec<f64> = grid(a, REMEZ_GRID).collect();
    let es: Vec<f64> = xs.iter().map(|&x| err(x)).collect();

    // one extremum per run of constant sign
    let mut picks: Vec<usize> = Vec::new();
    for (i, &e) in es.iter().enumerate() {
        match picks.last() {
            Some(&j) if es[j].signum() == e.signum() || e == 0.0 => {
                if e.abs() > es[j].abs() {
                    *picks.last_mut().expect("non-empty") = i;
                }
            }
            _ => picks.push(i),
        }
    }

    let mut out: Vec<(f64, f64)> = picks
        .into_iter()
        .map(|i| {
            let lo = xs[i.saturating_sub(1)];
            let hi = xs[(i + 1).min(xs.len() - 1)];
            let x = refine(|x| err(x).abs(), lo, hi, xs[i]);
            (x, err(x))
        })
        .collect();

    while out.len() > m {
        if out.len() - m == 1 {
            if out[0].1.abs() < out[out.len() - 1].1.abs() {
                out.remove(0);
            } else {
                out.pop();
            }
            continue;
        }
        let i = (0..out.len())
            .min_by(|&p, &q| out[p].1.abs().total_cmp(&out[q].1.abs()))
            .expect("non-empty");
        out.remove(i);
        if i > 0 && i < out.len() {
            let drop = if out[i - 1].1.abs() < out[i].1.abs() { i - 1 } else { i };
            out.remove(drop);
        }
    }
    out
}

fn single_exchange(xs: &[f64], sign: impl Fn(f64) -> f64, x_star: f64, s_star: f64) -> Vec<f64> {
    let mut out = xs.to_vec();
    let last = out.len() - 1;
    if x_star < out[0] {
        if sign(out[0]) == s_star {
            out[0] = x_star;
        } else {
            out.pop();
            out.insert(0, x_star);
        }
    } else if x_star > out[last] {
        if sign(out[last]) == s_star {
            out[last] = x_star;
        } else {
            out.remove(0);
            out.push(x_star);
        }
    } else {
        let j = out.windows(2).position(|w| w[0] <= x_star && x_star <= w[1]).expect("inside reference");
        if sign(out[j]) == s_star {
            out[j] = x_star;
        } else {
            out[j + 1] = x_star;
        }
    }
    out
}

// Golden-section maximization of a unimodal function on [lo, hi].
fn refine(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, start: f64) -> f64 {
    const R: f64 = 0.618_033_988_749_894_9;
    for _ in 0..60 {
        let x1 = hi - R * (hi - lo);
        let x2 = lo + R * (hi - lo);
        if g(x1) < g(x2) {
            lo = x1;
        } else {
            hi = x2;
        }
    }
    let x = 0.5 * (lo + hi);
    if g(x) >= g(start) {
        x
    } else {
        start
    }
}

/// Rounds every coefficient to the nearest signed power of two.
pub fn round_coeffs_pow2(f: Activation, p: &PolyApprox) -> PolyApprox {
    let terms = p.coeffs.iter().map(|&c| Pow2::round(c)).collect();
    PolyApprox::pow2(f, terms, p.interval, p.grid_points)
}

/// Best power-of-two polynomial within `window` exponent steps (either sign)
/// of each rounded coefficient, subject to `delta <= bound`. The bound
/// defaults to the error of the rounded polynomial, which is always feasible.
/// Ties go to the lexicographically smallest exponent tuple.
pub fn scan_optimal_pow2(f: Activation, rounded: &PolyApprox, window: i32, bound: Option<f64>) -> Result<PolyApprox> {
    let base = rounded
        .terms
        .as_ref()
        .ok_or_else(|| Error::Approx("scan needs power-of-two coefficients".into()))?;
    let bound = bound.unwrap_or(rounded.delta);
    let options: Vec<Vec<Option<Pow2>>> = base
        .iter()
        .map(|t| match t {
            None => vec![None],
            Some(t) => (t.exponent - window..=t.exponent + window)
                .flat_map(|e| {
                    [false, true].map(|negative| Some(Pow2 { negative, exponent: e }))
                })
                .collect(),
        })
        .collect();
    let total: usize = options.iter().map(Vec::len).product();
    let (a, grid_points) = (rounded.interval, rounded.grid_points);
    let samples: Vec<(f64, f64)> = grid(a, grid_points.max(2)).map(|x| (x, f.eval(x))).collect();

    let best = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let terms: Vec<Option<Pow2>> = options
                .iter()
                .map(|opts| {
                    let t = opts[idx % opts.len()];
                    idx /= opts.len();
                    t
                })
                .collect();
            let coeffs: Vec<f64> = terms.iter().map(|t| t.map_or(0.0, Pow2::value)).collect();
            let err = samples
                .iter()
                .map(|&(x, fx)| (fx - horner(&coeffs, x)).abs())
                .fold(0.0, f64::max);
            (err, terms)
        })
        .filter(|(d, _)| *d <= bound)
        .min_by(|x, y| x.0.total_cmp(&y.0).then_with(|| tie_key(&x.1).cmp(&tie_key(&y.1))));

    let (_, terms) = best.ok_or_else(|| Error::Approx(format!("no power-of-two polynomial within error {bound}")))?;
    Ok(PolyApprox::pow2(f, terms, a, grid_points))
}

fn tie_key(terms: &[Option<Pow2>]) -> (Vec<i32>, Vec<bool>) {
    (
        terms.iter().map(|t| t.map_or(i32::MIN, |t| t.exponent)).collect(),
        terms.iter().map(|t| t.is_some_and(|t| t.negative)).collect(),
    )
}

/// Minimax, rounded and optimal power-of-two approximations of one function.
#[derive(Clone, Debug)]
pub struct ApproxReport {
    pub activation: Activation,
    pub minimax: PolyApprox,
    pub remez_converged: bool,
    pub rounded: PolyApprox,
    pub optimal: PolyApprox,
}

pub fn approximate(f: Activation, degree: usize, a: f64, grid_points: usize, window: i32) -> Result<ApproxReport> {
    let remez = remez_minimax(f, degree, a, grid_points)?;
    let rounded = round_coeffs_pow2(f, &remez.approx);
    let optimal = scan_optimal_pow2(f, &rounded, window, None)?;
    Ok(ApproxReport {
        activation: f,
        minimax: remez.approx,
        remez_converged: remez.converged,
        rounded,
        optimal,
    })
}

fn render(p: &PolyApprox) -> String {
    match &p.terms {
        Some(terms) => terms
            .iter()
            .enumerate()
            .map(|(k, t)| format!("c{k}={}", t.map_or("0".to_string(), |t| t.to_string())))
            .collect::<Vec<_>>()
            .join(" "),
        None => p
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| format!("c{k}={c:.9}"))
            .collect::<Vec<_>>()
            .join(" "),
    }
}

impl fmt::Display for ApproxReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "function {} degree {} interval [-{}, {}]", self.activation, self.minimax.degree(), self.minimax.interval, self.minimax.interval)?;
        writeln!(f, "minimax {} delta={:.9}{}", render(&self.minimax), self.minimax.delta, if self.remez_converged { "" } else { " (not converged)" })?;
        writeln!(f, "rounded {} delta={:.9}", render(&self.rounded), self.rounded.delta)?;
        write!(f, "optimal {} delta={:.9}", render(&self.optimal), self.optimal.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn p2(negative: bool, exponent: i32) -> Option<Pow2> {
        Some(Pow2 { negative, exponent })
    }

    #[test]
    fn activations() {
        assert_eq!(Activation::Relu.eval(-1.0), 0.0);
        assert!((Activation::Swish.eval(1.0) - 0.7310585786).abs() < 1e-9);
        assert!((Activation::Softplus.eval(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((Activation::Softplus.eval(800.0) - 800.0).abs() < 1e-12);
        for f in Activation::ALL {
            for x in [-2.5, -0.3, 0.7, 3.1] {
                let h = 1e-6;
                let fd = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
                assert!((fd - f.derivative(x)).abs() < 1e-6, "{f} at {x}");
            }
        }
        assert_eq!("SWISH".parse::<Activation>().unwrap(), Activation::Swish);
        assert!("tanh".parse::<Activation>().is_err());
    }

    #[test]
    fn pow2_rounding_and_ties() {
        assert_eq!(Pow2::round(0.3), p2(false, -2));
        assert_eq!(Pow2::round(-0.75), p2(true, 0));
        assert_eq!(Pow2::round(0.0), None);
        // 2^-0.5 is the geometric midpoint between 2^-1 and 2^0
        assert_eq!(Pow2::round(std::f64::consts::FRAC_1_SQRT_2), p2(false, -1));
        assert_eq!(Pow2::round(0.7072), p2(false, 0));
    }

    #[test]
    fn square_is_exact() {
        let r = remez_minimax(Activation::Square, 2, 4.0, DEFAULT_GRID).unwrap();
        assert!(r.converged);
        assert!(r.approx.delta < 1e-12);
        assert!((r.approx.coeffs[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn max_error_closed_form() {
        // |x| ~ x^2 + 1/8 on [-1, 1] with error 1/8, so relu = (x + |x|) / 2
        // is off by 1/16 from 1/16 + x/2 + x^2/2
        let d = max_error(Activation::Relu, &[0.0625, 0.5, 0.5], 1.0, DEFAULT_GRID);
        assert!((d - 0.0625).abs() < 1e-12);
        assert_eq!(max_error(Activation::Square, &[0.0, 0.0, 1.0], 4.0, DEFAULT_GRID), 0.0);
    }

    #[test]
    fn relu_minimax_is_classical() {
        // the degree-2 minimax of |x| on [-a, a] is x^2/a + a/8, so
        // relu ~ a/16 + x/2 + x^2/(2a) with error a/16
        let a = 4.0;
        let r = remez_minimax(Activation::Relu, 2, a, DEFAULT_GRID).unwrap();
        assert!(r.converged);
        let expect = [a / 16.0, 0.5, 1.0 / (2.0 * a)];
        for (c, e) in r.approx.coeffs.iter().zip(expect) {
            assert!((c - e).abs() < 1e-6, "{:?}", r.approx.coeffs);
        }
        assert!((r.approx.delta - a / 16.0).abs() < 1e-6);
    }

    #[test]
    fn equioscillation() {
        for f in [Activation::Relu, Activation::Swish, Activation::Softplus] {
            let r = remez_minimax(f, 2, 4.0, DEFAULT_GRID).unwrap();
            assert!(r.converged, "{f}");
            assert_eq!(r.reference.len(), 4);
            for w in r.reference.windows(2) {
                assert!(w[0].1.signum() != w[1].1.signum(), "{f} {:?}", r.reference);
            }
            for &(_, e) in &r.reference {
                assert!((e.abs() - r.approx.delta).abs() < 1e-6, "{f} {:?} {}", r.reference, r.approx.delta);
            }
        }
    }

    #[test]
    fn remez_beats_sampled_polynomials() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for f in [Activation::Swish, Activation::Softplus] {
            let best = remez_minimax(f, 2, 4.0, 2001).unwrap().approx;
            // coarse coefficient grid around the optimum
            let mut grid_best = f64::INFINITY;
            for i in -10..=10 {
                for j in -10..=10 {
                    for k in -10..=10 {
                        let c = [
                            best.coeffs[0] + 0.01 * i as f64,
                            best.coeffs[1] + 0.01 * j as f64,
                            best.coeffs[2] + 0.002 * k as f64,
                        ];
                        grid_best = grid_best.min(max_error(f, &c, 4.0, 2001));
                    }
                }
            }
            assert!(best.delta <= grid_best + 1e-9);
            for _ in 0..200 {
                let c: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                assert!(best.delta <= max_error(f, &c, 4.0, 2001));
            }
        }
    }

    #[test]
    fn scan_never_worse_than_rounding() {
        for f in [Activation::Relu, Activation::Swish, Activation::Softplus] {
            let r = approximate(f, 2, 4.0, DEFAULT_GRID, DEFAULT_WINDOW).unwrap();
            // relu minimax coefficients are already powers of two
            assert!(r.minimax.delta <= r.optimal.delta + 1e-12);
            assert!(r.optimal.delta <= r.rounded.delta);
            assert!(r.optimal.is_pow2());
        }
    }

    #[test]
    fn scan_results() {
        // feeding known minimax coefficients through rounding and the scan
        let cases = [
            (Activation::Relu, [0.25, 0.5, 0.125], [p2(false, -2), p2(false, -1), p2(false, -3)], [p2(false, -2), p2(false, -1), p2(false, -3)]),
            (Activation::Softplus, [0.75248, 0.5, 0.082812671], [p2(false, 0), p2(false, -1), p2(false, -4)], [p2(false, 0), p2(false, -1), p2(false, -4)]),
            (Activation::Swish, [0.153613744, 0.5, 0.12050344], [p2(false, -3), p2(false, -1), p2(false, -3)], [p2(false, -3), p2(false, -1), p2(false, -3)]),
        ];
        for (f, minimax, rounded, optimal) in cases {
            let p = PolyApprox::real(f, minimax.to_vec(), 4.0, DEFAULT_GRID);
            let r = round_coeffs_pow2(f, &p);
            assert_eq!(r.terms.as_deref(), Some(&rounded[..]), "{f}");
            let o = scan_optimal_pow2(f, &r, DEFAULT_WINDOW, None).unwrap();
            assert_eq!(o.terms.as_deref(), Some(&optimal[..]), "{f}");
        }
    }

    #[test]
    fn infeasible_bound() {
        let p = PolyApprox::real(Activation::Swish, vec![0.15, 0.5, 0.12], 4.0, 2001);
        let r = round_coeffs_pow2(Activation::Swish, &p);
        assert!(scan_optimal_pow2(Activation::Swish, &r, 3, Some(1e-6)).is_err());
    }

    #[test]
    fn swish_polynomial_minimum() {
        let r = approximate(Activation::Swish, 2, 4.0, DEFAULT_GRID, DEFAULT_WINDOW).unwrap();
        let min = grid(4.0, DEFAULT_GRID).map(|x| r.optimal.eval(x)).fold(f64::INFINITY, f64::min);
        let true_min = grid(4.0, DEFAULT_GRID).map(|x| Activation::Swish.eval(x)).fold(f64::INFINITY, f64::min);
        assert!((true_min + 0.278465).abs() < 1e-5);
        assert!((min - true_min).abs() < 0.1, "{min}");
    }
}
