//! Reference methods: weighted priority sampling over the window and the
//! exact window product.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::{self, DenseMatrix};

#[derive(Debug)]
struct Pair {
    x: Vec<f64>,
    y: Vec<f64>,
    weight: f64,
}

#[derive(Debug, Clone)]
struct Entry {
    pair: Arc<Pair>,
    /// `ln(u) / w`, a monotone transform of `u^(1/w)`.
    log_priority: f64,
    t: u64,
}

#[derive(Debug, Clone)]
struct Slot {
    rng: ChaCha8Rng,
    chain: VecDeque<Entry>,
}

/// `k` independent max-priority chains over the window, priority
/// `u^(1 / (||x|| ||y||))` for `u` uniform in `(0, 1)`.
#[derive(Debug, Clone)]
pub struct PrioritySampler {
    d_x: usize,
    d_y: usize,
    n_window: u64,
    seed: u64,
    slots: Vec<Slot>,
    weights: VecDeque<f64>,
    weight_sum: f64,
    now: u64,
}

/// Number of samples for error parameter `eps`: `ceil(1 / eps^2)`.
pub fn samples_for(eps: f64) -> usize {
    (1.0 / (eps * eps) - 1e-9).ceil().max(1.0) as usize
}

impl PrioritySampler {
    pub fn new(d_x: usize, d_y: usize, k: usize, n_window: u64, seed: u64) -> Result<Self> {
        if d_x == 0 || d_y == 0 || k == 0 || n_window == 0 {
            return Err(Error::invalid("sampler dimensions, k and window must be positive"));
        }
        let slots = (0..k)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                Slot {
                    rng,
                    chain: VecDeque::new(),
                }
            })
            .collect();
        Ok(Self {
            d_x,
            d_y,
            n_window,
            seed,
            slots,
            weights: VecDeque::new(),
            weight_sum: 0.0,
            now: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.slots.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Stored chain entries over all slots.
    pub fn held_columns(&self) -> usize {
        self.slots.iter().map(|s| s.chain.len()).sum()
    }

    /// Sum of `||x|| ||y||` over the window.
    pub fn window_weight(&self) -> f64 {
        self.weight_sum
    }

    /// Timestamps and log-priorities of one slot's chain, head first.
    pub fn chain(&self, slot: usize) -> Vec<(u64, f64)> {
        self.slots[slot]
            .chain
            .iter()
            .map(|e| (e.t, e.log_priority))
            .collect()
    }

    pub fn update(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        for (v, d) in [(x, self.d_x), (y, self.d_y)] {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
        }
        if !x.iter().chain(y).all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        self.now += 1;
        let t = self.now;
        let weight = kernels::l2(x) * kernels::l2(y);

        self.weights.push_back(weight);
        self.weight_sum += weight;
        if self.weights.len() as u64 > self.n_window {
            let old = self.weights.pop_front().expect("non-empty");
            self.weight_sum -= old;
        }
        if t % self.n_window == 0 {
            // drop accumulated rounding
            self.weight_sum = self.weights.iter().sum();
        }

        let pair = Arc::new(Pair {
            x: x.to_vec(),
            y: y.to_vec(),
            weight,
        });
        let n_window = self.n_window;
        for slot in &mut self.slots {
            let u: f64 = slot.rng.sample(rand::distr::Open01);
            let log_priority = u.ln() / weight;
            while slot.chain.front().is_some_and(|e| e.t + n_window <= t) {
                slot.chain.pop_front();
            }
            while slot
                .chain
                .back()
                .is_some_and(|e| e.log_priority <= log_priority)
            {
                slot.chain.pop_back();
            }
            slot.chain.push_back(Entry {
                pair: Arc::clone(&pair),
                log_priority,
                t,
            });
        }
        Ok(())
    }

    /// `k` column pairs whose product estimates the window product without bias.
    pub fn estimate(&self) -> Result<(DenseMatrix, DenseMatrix)> {
        if self.now == 0 {
            return Err(Error::EmptyWindow);
        }
        let k = self.k();
        let mut a = DenseMatrix::zeros(self.d_x, k);
        let mut b = DenseMatrix::zeros(self.d_y, k);
        for (j, slot) in self.slots.iter().enumerate() {
            let head = &slot.chain.front().expect("newest item is always held").pair;
            if head.weight <= 0.0 {
                continue;
            }
            let scale = (self.weight_sum / (head.weight * k as f64)).sqrt();
            for (dst, src) in a.column_mut(j).iter_mut().zip(&head.x) {
                *dst = src * scale;
            }
            for (dst, src) in b.column_mut(j).iter_mut().zip(&head.y) {
                *dst = src * scale;
            }
        }
        Ok((a, b))
    }
}

/// The last `N` pairs, held verbatim.
#[derive(Debug, Clone)]
pub struct ExactWindowOracle {
    d_x: usize,
    d_y: usize,
    n_window: u64,
    ring: VecDeque<(u64, Vec<f64>, Vec<f64>)>,
    now: u64,
}

impl ExactWindowOracle {
    pub fn new(d_x: usize, d_y: usize, n_window: u64) -> Result<Self> {
        if d_x == 0 || d_y == 0 || n_window == 0 {
            return Err(Error::invalid("oracle dimensions and window must be positive"));
        }
        Ok(Self {
            d_x,
            d_y,
            n_window,
            ring: VecDeque::new(),
            now: 0,
        })
    }

    pub fn update(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        for (v, d) in [(x, self.d_x), (y, self.d_y)] {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
        }
        self.now += 1;
        self.ring.push_back((self.now, x.to_vec(), y.to_vec()));
        if self.ring.len() as u64 > self.n_window {
            self.ring.pop_front();
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = u64> + '_ {
        self.ring.iter().map(|r| r.0)
    }

    /// Window matrices `X_W` and `Y_W`, oldest column first.
    pub fn matrices(&self) -> (DenseMatrix, DenseMatrix) {
        let n = self.ring.len();
        let mut xw = DenseMatrix::zeros(self.d_x, n);
        let mut yw = DenseMatrix::zeros(self.d_y, n);
        for (j, (_, x, y)) in self.ring.iter().enumerate() {
            xw.column_mut(j).copy_from_slice(x);
            yw.column_mut(j).copy_from_slice(y);
        }
        (xw, yw)
    }

    /// `X_W Y_W^T`.
    pub fn product(&self) -> DenseMatrix {
        let (xw, yw) = self.matrices();
        xw * yw.transpose()
    }

    /// `(||X_W||_F, ||Y_W||_F)`.
    pub fn frobenius_norms(&self) -> (f64, f64) {
        let (mut fx, mut fy) = (0.0, 0.0);
        for (_, x, y) in &self.ring {
            fx += x.iter().map(|v| v * v).sum::<f64>();
            fy += y.iter().map(|v| v * v).sum::<f64>();
        }
        (fx.sqrt(), fy.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::spectral_norm;

    fn uniform(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn oracle_window_contents() {
        let n = 6;
        let mut o = ExactWindowOracle::new(2, 2, n).unwrap();
        assert_eq!(o.product(), DenseMatrix::zeros(2, 2));
        for _ in 0..n + 3 {
            o.update(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        }
        assert_eq!(o.timestamps().collect::<Vec<_>>(), (4..=n + 3).collect::<Vec<_>>());
        let mut expected = DenseMatrix::zeros(2, 2);
        expected[(0, 0)] = n as f64;
        assert_eq!(o.product(), expected);
    }

    #[test]
    fn oracle_single_record() {
        let mut o = ExactWindowOracle::new(2, 3, 4).unwrap();
        o.update(&[1.0, 2.0], &[3.0, 4.0, 5.0]).unwrap();
        let expected = DenseMatrix::from_row_slice(2, 3, &[3.0, 4.0, 5.0, 6.0, 8.0, 10.0]);
        assert_eq!(o.product(), expected);
    }

    #[test]
    fn single_slot_unit_window_holds_newest() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = PrioritySampler::new(3, 3, 1, 1, 42).unwrap();
        for t in 1..=20 {
            p.update(&uniform(&mut rng, 3), &uniform(&mut rng, 3)).unwrap();
            let chain = p.chain(0);
            assert_eq!(chain.len(), 1);
            assert_eq!(chain[0].0, t);
        }
    }

    #[test]
    fn identical_columns_are_exact() {
        let mut p = PrioritySampler::new(2, 2, 3, 10, 1).unwrap();
        for _ in 0..25 {
            p.update(&[0.6, 0.8], &[1.0, 0.0]).unwrap();
        }
        let (a, b) = p.estimate().unwrap();
        let exact = DenseMatrix::from_row_slice(2, 2, &[6.0, 0.0, 8.0, 0.0]);
        assert!((a * b.transpose() - exact).norm() <= 1e-9);
    }

    #[test]
    fn chains_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 15u64;
        let k = 4;
        let mut p = PrioritySampler::new(3, 3, k, n, 7).unwrap();
        // replay the per-slot uniforms to recompute priorities independently
        let mut replay: Vec<ChaCha8Rng> = (0..k)
            .map(|i| {
                let mut r = ChaCha8Rng::seed_from_u64(7);
                r.set_stream(i as u64);
                r
            })
            .collect();
        let mut history: Vec<Vec<(u64, f64)>> = vec![Vec::new(); k];
        for t in 1..=120u64 {
            let (x, y) = (uniform(&mut rng, 3), uniform(&mut rng, 3));
            let w = kernels::l2(&x) * kernels::l2(&y);
            p.update(&x, &y).unwrap();
            for (i, r) in replay.iter_mut().enumerate() {
                let u: f64 = r.sample(rand::distr::Open01);
                history[i].push((t, u.ln() / w));
                let live: Vec<(u64, f64)> =
                    history[i].iter().copied().filter(|e| e.0 + n > t).collect();
                // suffix maxima, newest last
                let mut expected = Vec::new();
                for (j, e) in live.iter().enumerate() {
                    if live[j + 1..].iter().all(|f| f.1 < e.1) {
                        expected.push(*e);
                    }
                }
                let chain = p.chain(i);
                assert_eq!(chain, expected);
                assert!(chain.windows(2).all(|c| c[0].1 > c[1].1 && c[0].0 < c[1].0));
            }
        }
    }

    #[test]
    fn estimate_error_shrinks_with_k() {
        let n = 200u64;
        let mut errs = Vec::new();
        for k in [16, 400] {
            let mut total = 0.0;
            for trial in 0..20 {
                let mut rng = ChaCha8Rng::seed_from_u64(100 + trial);
                let mut p = PrioritySampler::new(6, 5, k, n, trial).unwrap();
                let mut o = ExactWindowOracle::new(6, 5, n).unwrap();
                for _ in 0..n + 50 {
                    let (x, y) = (uniform(&mut rng, 6), uniform(&mut rng, 5));
                    p.update(&x, &y).unwrap();
                    o.update(&x, &y).unwrap();
                }
                let (a, b) = p.estimate().unwrap();
                let (fx, fy) = o.frobenius_norms();
                total += spectral_norm(&(o.product() - a * b.transpose())).unwrap() / (fx * fy);
            }
            errs.push(total / 20.0);
        }
        // 1/sqrt(k) scaling: 25x more samples, about 5x less error
        assert!(errs[1] < errs[0] / 2.5, "{errs:?}");
        assert!(errs[1] < 3.0 / 20.0, "{errs:?}");
    }

    #[test]
    fn empty_window_is_an_error() {
        let p = PrioritySampler::new(2, 2, 2, 5, 0).unwrap();
        assert!(matches!(p.estimate(), Err(Error::EmptyWindow)));
        assert_eq!(samples_for(0.1), 100);
        assert_eq!(samples_for(0.5), 4);
    }
}
