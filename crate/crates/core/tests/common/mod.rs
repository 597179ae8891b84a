#![allow(dead_code)]

use mlrank_geom::segre::{level_of, LinearFunctional};
use mlrank_geom::{DenseTensor, Shape};
use rand::Rng;
use rand_distr::StandardNormal;

/// Row products of the `mode`-th flattening by explicit summation over all
/// remaining indices, without forming the flattening.
pub fn flat_row_gram_loop(t: &DenseTensor, mode: usize) -> Vec<Vec<f64>> {
    let n = t.shape().dims()[mode];
    let mut out = vec![vec![0.0; n]; n];
    for lam in 0..n {
        for lam_p in 0..n {
            let mut acc = 0.0;
            for idx in t.shape().indices() {
                if idx[mode] != lam {
                    continue;
                }
                let mut other = idx.clone();
                other[mode] = lam_p;
                acc += t.get(&idx) * t.get(&other);
            }
            out[lam][lam_p] = acc;
        }
    }
    out
}

pub fn random_shape<R: Rng>(rng: &mut R, order: usize, max_n: usize) -> Shape {
    Shape::new((0..order).map(|_| rng.random_range(2..=max_n)).collect()).unwrap()
}

/// Gaussian functional supported on the given levels at e₁ ⊗ … ⊗ e₁.
pub fn random_level_functional<R: Rng>(rng: &mut R, shape: &Shape, levels: &[usize]) -> LinearFunctional {
    LinearFunctional::new(DenseTensor::from_fn(shape.clone(), |idx| {
        if levels.contains(&level_of(idx)) {
            rng.sample(StandardNormal)
        } else {
            0.0
        }
    }))
}

pub fn random_coefficient<R: Rng>(rng: &mut R) -> f64 {
    let mag = rng.random_range(0.1..=2.0);
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}
