//! Samplers for secrets, errors and uniform masks.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::ring::{Domain, RingContext, RingPoly};

/// Uniform coefficients in {-1, 0, 1}.
pub fn ternary<R: Rng + ?Sized>(ctx: &Arc<RingContext>, rng: &mut R) -> RingPoly {
    let coeffs: Vec<i64> = (0..ctx.n()).map(|_| rng.random_range(-1i64..=1)).collect();
    RingPoly::from_signed(ctx, &coeffs).expect("length matches ring degree")
}

/// Rounded Gaussian with the given deviation, resampled beyond six deviations.
pub fn gaussian<R: Rng + ?Sized>(ctx: &Arc<RingContext>, stddev: f64, rng: &mut R) -> RingPoly {
    let normal = Normal::new(0.0, stddev).expect("positive deviation");
    let bound = 6.0 * stddev;
    let coeffs: Vec<i64> = (0..ctx.n())
        .map(|_| loop {
            let x: f64 = normal.sample(rng).round();
            if x.abs() <= bound {
                break x as i64;
            }
        })
        .collect();
    RingPoly::from_signed(ctx, &coeffs).expect("length matches ring degree")
}

/// Uniform element of `R_q`, limb by limb. Returned in the NTT domain; the
/// transform is a bijection so the distribution is the same.
pub fn uniform<R: Rng + ?Sized>(ctx: &Arc<RingContext>, rng: &mut R) -> RingPoly {
    let limbs = ctx
        .limbs()
        .iter()
        .map(|l| (0..ctx.n()).map(|_| rng.random_range(0..l.q())).collect())
        .collect();
    RingPoly::from_limbs(ctx, limbs, Domain::Ntt).expect("residues in range")
}
