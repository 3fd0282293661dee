#![allow(dead_code)]

use cavity_feedback::fock::{CMatrix, DensityMatrix, Ket};
use num_complex::Complex64 as C64;
use rand::Rng;

/// Random ket with support on levels `0..occupied`, embedded in `dim` levels.
pub fn random_ket<R: Rng>(rng: &mut R, dim: usize, occupied: usize) -> Ket {
    let mut v = vec![C64::new(0.0, 0.0); dim];
    for z in v.iter_mut().take(occupied) {
        *z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    Ket::from_slice(&v).expect("non-zero draw")
}

/// Mixture of `rank` random kets with random weights.
pub fn random_density<R: Rng>(
    rng: &mut R,
    dim: usize,
    occupied: usize,
    rank: usize,
) -> DensityMatrix {
    let kets: Vec<DensityMatrix> = (0..rank)
        .map(|_| random_ket(rng, dim, occupied).projector())
        .collect();
    let raw: Vec<f64> = (0..rank).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let parts: Vec<(f64, &DensityMatrix)> = raw.iter().map(|w| w / total).zip(&kets).collect();
    DensityMatrix::mixture(&parts).unwrap()
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}
