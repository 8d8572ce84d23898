//! Seeded random smooth fields used for initial guesses, perturbations and
//! property checks. All generators are `ChaCha8Rng` so runs are reproducible
//! from the configured seed.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{ComplexField, Grid, RealField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
struct Bump {
    amplitude: f64,
    center: [f64; 3],
    width: f64,
}

fn bumps<R: Rng>(grid: &Grid, rng: &mut R, count: usize, spread: f64) -> Vec<Bump> {
    let reach = spread * grid.half_extent();
    (0..count)
        .map(|_| {
            let mut center = [0.0; 3];
            for c in center.iter_mut().take(grid.dim()) {
                *c = rng.gen_range(-reach..reach);
            }
            Bump {
                amplitude: rng.gen_range(0.2..1.0),
                center,
                width: rng.gen_range(0.7..1.5),
            }
        })
        .collect()
}

fn eval(bumps: &[Bump], x: &[f64]) -> f64 {
    bumps
        .iter()
        .map(|b| {
            let d2: f64 = x
                .iter()
                .zip(&b.center)
                .map(|(xi, ci)| (xi - ci).powi(2))
                .sum();
            b.amplitude * (-0.5 * d2 / (b.width * b.width)).exp()
        })
        .sum()
}

/// Positive sum of a few Gaussian bumps placed well inside the box.
pub fn random_positive_field<R: Rng>(grid: &Arc<Grid>, rng: &mut R) -> RealField {
    let count = rng.gen_range(1..=4);
    let b = bumps(grid, rng, count, 0.25);
    RealField::from_fn(grid, |x| eval(&b, x))
}

/// Smooth field of either sign.
pub fn random_signed_field<R: Rng>(grid: &Arc<Grid>, rng: &mut R) -> RealField {
    let count = rng.gen_range(2..=4);
    let mut b = bumps(grid, rng, count, 0.25);
    for bump in b.iter_mut() {
        if rng.gen_bool(0.5) {
            bump.amplitude = -bump.amplitude;
        }
    }
    RealField::from_fn(grid, |x| eval(&b, x))
}

/// `u + i v` with independent smooth real and imaginary parts.
pub fn random_complex_field<R: Rng>(grid: &Arc<Grid>, rng: &mut R) -> ComplexField {
    let re = random_signed_field(grid, rng);
    let im = random_signed_field(grid, rng);
    ComplexField::from_raw(
        grid,
        re.values()
            .iter()
            .zip(im.values())
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect(),
    )
}

/// Positive smooth modulus times a smooth phase, so the modulus is smooth.
pub fn random_phased_field<R: Rng>(grid: &Arc<Grid>, rng: &mut R) -> ComplexField {
    let modulus = random_positive_field(grid, rng);
    let mut k = [0.0; 3];
    for ki in k.iter_mut().take(grid.dim()) {
        *ki = rng.gen_range(-1.0..1.0);
    }
    let curvature = rng.gen_range(-0.3..0.3);
    let offset = rng.gen_range(0.0..std::f64::consts::TAU);
    let phase = RealField::from_fn(grid, |x| {
        let lin: f64 = x.iter().zip(&k).map(|(a, b)| a * b).sum();
        let quad: f64 = x.iter().map(|a| a * a).sum();
        offset + lin + curvature * quad
    });
    ComplexField::from_raw(
        grid,
        modulus
            .values()
            .iter()
            .zip(phase.values())
            .map(|(&m, &p)| Complex64::from_polar(m, p))
            .collect(),
    )
}
