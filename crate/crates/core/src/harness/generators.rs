use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{ExperimentConfig, Generator};
use super::StreamRecord;
use crate::error::{Error, Result};
use crate::kernels::{qr_unchecked, DenseMatrix};

/// Entries i.i.d. uniform on `[0, 1)`.
pub fn gen_uniform_random(d_x: usize, d_y: usize, n: usize, seed: u64) -> Vec<StreamRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (1..=n as u64)
        .map(|t| {
            let x = (0..d_x).map(|_| rng.random::<f64>()).collect();
            let y = (0..d_y).map(|_| rng.random::<f64>()).collect();
            StreamRecord { t, x, y }
        })
        .collect()
}

/// Diagonal signal weights `1 - (i - 1) / m` for `i = 1..=m`.
pub fn signal_weights(m: usize) -> Vec<f64> {
    (0..m).map(|i| 1.0 - i as f64 / m as f64).collect()
}

/// `d x m` matrix with orthonormal columns spanning a random subspace.
pub fn random_rotation(rng: &mut ChaCha8Rng, d: usize, m: usize) -> DenseMatrix {
    let g = DenseMatrix::from_fn(d, m, |_, _| StandardNormal.sample(rng));
    qr_unchecked(&g).0
}

/// Rank-`m` Gaussian signal in a random subspace plus Gaussian noise scaled by `1/zeta`.
pub fn gen_random_noisy(
    d_x: usize,
    d_y: usize,
    n: usize,
    m: usize,
    zeta: f64,
    seed: u64,
) -> Result<Vec<StreamRecord>> {
    if m == 0 || m > d_x.min(d_y) {
        return Err(Error::invalid(format!("signal dimension {m} must lie in [1, min(d_x, d_y)]")));
    }
    if !(zeta.is_finite() && zeta > 0.0) {
        return Err(Error::invalid(format!("zeta must be positive, got {zeta}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ux = random_rotation(&mut rng, d_x, m);
    let uy = random_rotation(&mut rng, d_y, m);
    let weights = signal_weights(m);
    let column = |rng: &mut ChaCha8Rng, u: &DenseMatrix| -> Vec<f64> {
        let s = nalgebra::DVector::from_iterator(
            m,
            weights.iter().map(|w| {
                let g: f64 = StandardNormal.sample(rng);
                w * g
            }),
        );
        let mut v = u * s;
        for e in v.iter_mut() {
            let noise: f64 = StandardNormal.sample(rng);
            *e += noise / zeta;
        }
        v.as_slice().to_vec()
    };
    Ok((1..=n as u64)
        .map(|t| {
            let x = column(&mut rng, &ux);
            let y = column(&mut rng, &uy);
            StreamRecord { t, x, y }
        })
        .collect())
}

/// Stream for a synthetic config; `file` configs must be loaded instead.
pub fn generate(cfg: &ExperimentConfig) -> Result<Vec<StreamRecord>> {
    match cfg.generator {
        Generator::UniformRandom => Ok(gen_uniform_random(cfg.d_x, cfg.d_y, cfg.n, cfg.seed)),
        Generator::RandomNoisy => {
            gen_random_noisy(cfg.d_x, cfg.d_y, cfg.n, cfg.signal_dim, cfg.zeta, cfg.seed)
        }
        Generator::File => Err(Error::Config(
            "generator \"file\" reads its stream from a file".into(),
        )),
    }
}
