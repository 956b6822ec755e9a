#![allow(dead_code)]

use hillnls::field::{Grid, WaveField};
use hillnls::sigma::SigmaModel;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn presets() -> Vec<SigmaModel> {
    vec![
        SigmaModel::Zero,
        SigmaModel::Constant(-1.0),
        SigmaModel::Constant(1.0),
        SigmaModel::inverse_square(0.15).unwrap(),
    ]
}

/// Random combination of Hermite functions of degree ≤ 6 per axis.
pub fn random_field(grid: Grid, seed: u64) -> WaveField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = 7usize.pow(grid.dim() as u32);
    let coeffs: Vec<Complex64> = (0..count)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    WaveField::hermite_combination(grid, 6, &coeffs).unwrap()
}

pub fn rel_l2(a: &WaveField, b: &WaveField) -> f64 {
    a.distance(b).unwrap() / b.l2_norm()
}
