//! End-to-end acceptance checks, shared by `swamm verify` and the test suite.
//!
//! Each check runs at a fixed, seeded scale and reports pass/fail with the
//! measured quantities.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::baselines::{ExactWindowOracle, PrioritySampler};
use crate::cod::CodSketch;
use crate::harness::{
    self, drive, emit_results, reference, rescale_to_unit_floor, run_experiment, summarize,
    ExperimentConfig, Generator, Method, RunOptions, Sketcher,
};
use crate::kernels::{self, frobenius_norm, orthogonality_defect, spectral_norm, DenseMatrix};
use crate::lambda::LambdaCounter;
use crate::mlsocod::LayeredSketch;
use crate::socod::{Extraction, SlidingSketch};

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {}: {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "window bit counter"),
    (2, "co-occurring directions error bound"),
    (3, "sliding sketch error bound and snapshot count"),
    (4, "rank-1 removal identity"),
    (5, "fast and simple updates agree"),
    (6, "layered sketch error bound and caps"),
    (7, "space growth versus eps"),
    (8, "error at matched sketch size"),
    (9, "fast update speedup"),
    (10, "deterministic result files"),
];

/// Run the listed criteria (all when `ids` is empty) in order.
pub fn run(ids: &[u8]) -> Vec<CriterionReport> {
    CRITERIA
        .iter()
        .filter(|(id, _)| ids.is_empty() || ids.contains(id))
        .map(|&(id, _)| run_one(id))
        .collect()
}

pub fn run_one(id: u8) -> CriterionReport {
    let name = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map(|c| c.1)
        .unwrap_or("unknown criterion");
    let start = Instant::now();
    let (passed, detail) = match id {
        1 => bit_counter(),
        2 => cod_bound(),
        3 => sliding_bound(),
        4 => removal_identity(),
        5 => fast_simple_agreement(),
        6 => layered_bound(),
        7 => space_growth(),
        8 => matched_size_error(),
        9 => fast_speedup(),
        10 => determinism(),
        _ => (false, format!("no criterion {id}")),
    };
    CriterionReport {
        id,
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = kernels::l2(&v);
    v.iter_mut().for_each(|a| *a /= n);
    v
}

/// Unit columns from uniform `[0, 1)` entries; they share a dominant
/// direction, so snapshots are registered often.
fn unit_uniform(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    unit((0..d).map(|_| rng.random::<f64>()).collect())
}

/// Unit columns in isotropic random directions.
fn unit_gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    unit((0..d).map(|_| StandardNormal.sample(rng)).collect())
}

fn unit_stream(d_x: usize, d_y: usize, n: usize, seed: u64, skewed: bool) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            if skewed {
                (unit_uniform(&mut rng, d_x), unit_uniform(&mut rng, d_y))
            } else {
                (unit_gaussian(&mut rng, d_x), unit_gaussian(&mut rng, d_y))
            }
        })
        .collect()
}

fn outer(x: &[f64], y: &[f64]) -> DenseMatrix {
    DenseMatrix::from_column_slice(x.len(), 1, x) * DenseMatrix::from_row_slice(1, y.len(), y)
}

fn bit_counter() -> (bool, String) {
    let stream = [1u8, 0, 1, 1, 0, 1, 1, 1, 0, 1, 0];
    let mut c = LambdaCounter::new(3, 5).expect("valid counter");
    for &b in &stream {
        c.push_bit(b == 1);
    }
    let truth = stream[stream.len() - 5..].iter().filter(|&&b| b == 1).count() as u64;
    let golden = c.estimate() == 4 && truth == 3;

    let mut violations = 0u64;
    let mut checks = 0u64;
    for (i, &lambda) in [1u64, 3, 7].iter().enumerate() {
        for (j, &window) in [5u64, 50, 500].iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + 10 * i as u64 + j as u64);
            let mut c = LambdaCounter::new(lambda, window).expect("valid counter");
            let mut ring = VecDeque::new();
            let mut count = 0u64;
            for _ in 0..100_000 {
                let bit = rng.random::<bool>();
                c.push_bit(bit);
                ring.push_back(bit);
                count += bit as u64;
                if ring.len() as u64 > window {
                    count -= ring.pop_front().expect("non-empty") as u64;
                }
                let est = c.estimate();
                checks += 1;
                if est < count || est > count + 2 * lambda {
                    violations += 1;
                }
            }
        }
    }
    (
        golden && violations == 0,
        format!(
            "golden estimate {} (true count {truth}); {violations} sandwich violations in {checks} steps",
            c.estimate()
        ),
    )
}

fn cod_bound() -> (bool, String) {
    let (d_x, d_y, n) = (40, 30, 500);
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stream: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
            .map(|_| {
                let x = (0..d_x).map(|_| StandardNormal.sample(&mut rng)).collect();
                let y = (0..d_y).map(|_| StandardNormal.sample(&mut rng)).collect();
                (x, y)
            })
            .collect();
        for l in [4, 8, 16] {
            let mut s = CodSketch::new(d_x, d_y, l).expect("valid width");
            let mut exact = DenseMatrix::zeros(d_x, d_y);
            let (mut fx, mut fy) = (0.0, 0.0);
            for (x, y) in &stream {
                s.insert(x, y).expect("finite input");
                exact.ger(1.0, &nalgebra::DVector::from_column_slice(x), &nalgebra::DVector::from_column_slice(y), 1.0);
                fx += x.iter().map(|v| v * v).sum::<f64>();
                fy += y.iter().map(|v| v * v).sum::<f64>();
                let bound = 2.0 * (fx * fy).sqrt() / l as f64;
                let err = spectral_norm(&(&exact - s.product())).expect("finite");
                worst = worst.max(err / bound);
                if err > bound + 1e-9 {
                    violations += 1;
                }
            }
        }
    }
    (
        violations == 0,
        format!("{violations} violations over 150000 prefixes; worst error/bound {worst:.3}"),
    )
}

fn sliding_bound() -> (bool, String) {
    let (d_x, d_y, n_window, steps) = (32, 24, 400u64, 1600);
    let mut details = Vec::new();
    let mut ok = true;
    for eps in [0.5, 0.25, 0.125] {
        let start = Instant::now();
        let mut worst: f64 = 0.0;
        let mut max_queue = 0;
        let mut violations = 0;
        for (seed, skewed) in [(1, true), (2, true), (3, false), (4, false)] {
            let stream = unit_stream(d_x, d_y, steps, seed, skewed);
            for fast in [false, true] {
                let mut s = SlidingSketch::new(d_x, d_y, eps, n_window).expect("valid params");
                let mut oracle = ExactWindowOracle::new(d_x, d_y, n_window).expect("valid params");
                for (x, y) in &stream {
                    if fast {
                        s.fast_update(x, y).expect("unit input");
                    } else {
                        s.update(x, y).expect("unit input");
                    }
                    oracle.update(x, y).expect("dims match");
                    let held = s.primary_queue().len().max(s.aux_queue().len());
                    max_queue = max_queue.max(held);
                    if held as f64 > 2.0 / eps {
                        violations += 1;
                    }
                    if s.now() >= n_window {
                        let err = spectral_norm(&(oracle.product() - s.query().product())).expect("finite");
                        let bound = 8.0 * eps * n_window as f64;
                        worst = worst.max(err / bound);
                        if err > bound {
                            violations += 1;
                        }
                    }
                }
            }
        }
        let secs = start.elapsed().as_secs_f64();
        ok &= violations == 0 && secs < 60.0;
        details.push(format!(
            "eps {eps}: worst error/bound {worst:.3}, max snapshots {max_queue} (cap {}), {secs:.1} s",
            2.0 / eps
        ));
    }
    (ok, details.join("; "))
}

fn removal_identity() -> (bool, String) {
    let (d_x, d_y) = (32, 24);
    let stream = unit_stream(d_x, d_y, 2000, 11, true);
    let mut s = SlidingSketch::new(d_x, d_y, 0.125, 200).expect("valid params");
    let mut count = 0;
    let mut worst_prod: f64 = 0.0;
    let mut worst_orth: f64 = 0.0;
    let mut check = |e: &Extraction| {
        count += 1;
        let expected = &e.a_before * e.b_before.transpose() - outer(&e.snapshot.u, &e.snapshot.v);
        let got = &e.a_after * e.b_after.transpose();
        worst_prod = worst_prod.max(frobenius_norm(&(got - expected)));
        worst_orth = worst_orth
            .max(orthogonality_defect(&e.q_x))
            .max(orthogonality_defect(&e.q_y));
    };
    for (x, y) in &stream {
        s.fast_update_observed(x, y, &mut check).expect("unit input");
    }
    (
        count > 0 && worst_prod <= 1e-8 && worst_orth <= 1e-9,
        format!("{count} extractions; max product residual {worst_prod:.2e}, max orthogonality defect {worst_orth:.2e}"),
    )
}

fn fast_simple_agreement() -> (bool, String) {
    let (d_x, d_y, n_window) = (32, 24, 400u64);
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    for seed in 0..5u64 {
        let stream = unit_stream(d_x, d_y, 5 * n_window as usize, 100 + seed, seed % 2 == 0);
        for eps in [0.5, 0.25, 0.125] {
            let mut simple = SlidingSketch::new(d_x, d_y, eps, n_window).expect("valid params");
            let mut fast = simple.clone();
            for (x, y) in &stream {
                simple.update(x, y).expect("unit input");
                fast.fast_update(x, y).expect("unit input");
                let diff = simple.query().product() - fast.query().product();
                worst = worst.max(spectral_norm(&diff).expect("finite"));
                steps += 1;
            }
        }
    }
    (
        worst <= 1e-6,
        format!("max spectral gap {worst:.2e} over {steps} lockstep steps"),
    )
}

fn layered_bound() -> (bool, String) {
    let (d_x, d_y, n_window, steps) = (32, 24, 400u64, 1600);
    let mut details = Vec::new();
    let mut ok = true;
    for (r_bound, layers) in [(4.0, 2usize), (64.0, 6)] {
        for eps in [0.25, 0.125] {
            let mut s = LayeredSketch::new(d_x, d_y, eps, n_window, r_bound).expect("valid params");
            let th = s.thresholds();
            let doubling = th.len() == layers && th.windows(2).all(|w| w[1] == 2.0 * w[0]);
            let mut oracle = ExactWindowOracle::new(d_x, d_y, n_window).expect("valid params");
            let mut rng = ChaCha8Rng::seed_from_u64(7 + r_bound as u64);
            let (mut worst, mut cap_violations, mut fallbacks, mut max_queue) = (0.0f64, 0, 0, 0);
            for _ in 0..steps {
                let sx = rng.random_range(1.0..=r_bound).sqrt();
                let sy = rng.random_range(1.0..=r_bound).sqrt();
                let x: Vec<f64> = unit_uniform(&mut rng, d_x).iter().map(|v| v * sx).collect();
                let y: Vec<f64> = unit_uniform(&mut rng, d_y).iter().map(|v| v * sy).collect();
                s.update(&x, &y).expect("norms within range");
                oracle.update(&x, &y).expect("dims match");
                for layer in s.layers() {
                    let len = layer.primary_queue().len().max(layer.aux_queue().len());
                    max_queue = max_queue.max(len);
                    if len as f64 > s.queue_cap() {
                        cap_violations += 1;
                    }
                }
                if s.now() >= n_window {
                    let q = s.query();
                    fallbacks += q.fallback as usize;
                    let (fx, fy) = oracle.frobenius_norms();
                    let err = spectral_norm(&(oracle.product() - q.query.product())).expect("finite");
                    worst = worst.max(err / (4.0 * eps * fx * fy));
                }
            }
            let pass = doubling && cap_violations == 0 && worst <= 1.0;
            ok &= pass;
            details.push(format!(
                "R {r_bound} eps {eps}: {} layers, worst error/bound {worst:.3}, max queue {max_queue} (cap {}), {fallbacks} fallbacks",
                th.len(),
                s.queue_cap()
            ));
        }
    }
    (ok, details.join("; "))
}

/// Peak column count per eps for one method of an experiment.
fn peak_columns(rows: &[harness::MetricRow], method: Method, grid: &[f64]) -> Vec<u64> {
    let summary = summarize(rows);
    grid.iter()
        .map(|&e| {
            summary
                .iter()
                .find(|s| s.method == method.name() && s.eps == e)
                .map_or(0, |s| s.max_sketch_cols)
        })
        .collect()
}

fn space_growth() -> (bool, String) {
    let cfg = ExperimentConfig::desk_uniform();
    let records = harness::generate(&cfg).expect("synthetic config");
    let exp = match run_experiment(&cfg, &records, RunOptions::default()) {
        Ok(e) if e.failures.is_empty() => e,
        Ok(e) => return (false, format!("cell failures: {:?}", e.failures)),
        Err(e) => return (false, e.to_string()),
    };
    let ratios = |cols: &[u64]| -> Vec<f64> {
        cols.windows(2).map(|w| w[1] as f64 / w[0].max(1) as f64).collect()
    };
    let so = peak_columns(&exp.rows, Method::Socod, &cfg.eps_grid);
    let sa = peak_columns(&exp.rows, Method::Sampling, &cfg.eps_grid);
    let (rs, ra) = (ratios(&so), ratios(&sa));
    let ok = rs.iter().all(|r| (1.5..=3.0).contains(r)) && ra.iter().all(|&r| r >= 3.0);
    (
        ok,
        format!("sketch columns {so:?} (ratios {rs:.2?}); sampling columns {sa:?} (ratios {ra:.2?})"),
    )
}

/// Linear interpolation of `ys` against `xs` in log-log space, clamped to the ends.
fn interp_loglog(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let i = xs.windows(2).position(|w| x <= w[1]).expect("bracketed");
    let (x0, x1) = (xs[i].ln(), xs[i + 1].ln());
    let (y0, y1) = (ys[i].max(1e-300).ln(), ys[i + 1].max(1e-300).ln());
    (y0 + (y1 - y0) * (x.ln() - x0) / (x1 - x0)).exp()
}

fn matched_size_error() -> (bool, String) {
    let mut ok = true;
    let mut details = Vec::new();
    for cfg in [ExperimentConfig::desk_uniform(), ExperimentConfig::desk_noisy()] {
        let cfg = ExperimentConfig {
            methods: vec![Method::Socod],
            ..cfg
        };
        let records = harness::generate(&cfg).expect("synthetic config");
        let exp = match run_experiment(&cfg, &records, RunOptions::default()) {
            Ok(e) if e.failures.is_empty() => e,
            Ok(e) => return (false, format!("cell failures: {:?}", e.failures)),
            Err(e) => return (false, e.to_string()),
        };
        let socod = summarize(&exp.rows);
        let largest = socod.iter().map(|s| s.max_sketch_cols).max().unwrap_or(0) as f64;

        // sampling curve over sample counts 1, 2, 4, ... until it outgrows the sketch
        let (scaled, _) = rescale_to_unit_floor(&records);
        let times = harness::query_times(scaled.len(), cfg.n_window, cfg.stride());
        let points = reference(&scaled, cfg.n_window, &times).expect("non-empty stream");
        let mut curve: Vec<(f64, f64, f64)> = Vec::new();
        let mut k = 1;
        loop {
            let sampler = PrioritySampler::new(cfg.d_x, cfg.d_y, k, cfg.n_window, cfg.seed).expect("valid params");
            let mut sk = Sketcher::Sampling(sampler);
            let rows = drive(&mut sk, "sampling", 0.0, &scaled, &points, RunOptions::default()).expect("sampling run");
            let s = &summarize(&rows)[0];
            curve.push((s.max_sketch_cols as f64, s.mean_rel_err, s.max_rel_err));
            if s.max_sketch_cols as f64 >= largest || k >= 1 << 16 {
                break;
            }
            k *= 2;
        }
        let xs: Vec<f64> = curve.iter().map(|c| c.0).collect();
        let means: Vec<f64> = curve.iter().map(|c| c.1).collect();
        let maxes: Vec<f64> = curve.iter().map(|c| c.2).collect();

        let mut wins = 0;
        let mut cells = Vec::new();
        for s in &socod {
            let size = s.max_sketch_cols as f64;
            let (m, x) = (interp_loglog(&xs, &means, size), interp_loglog(&xs, &maxes, size));
            let win = s.mean_rel_err < m && s.max_rel_err < x;
            wins += win as usize;
            cells.push(format!(
                "eps {} cols {}: mean {:.4} vs {:.4}, max {:.4} vs {:.4}",
                s.eps, s.max_sketch_cols, s.mean_rel_err, m, s.max_rel_err, x
            ));
        }
        let pass = wins >= 4;
        ok &= pass;
        let label = match cfg.generator {
            Generator::RandomNoisy => "random noisy",
            _ => "uniform random",
        };
        details.push(format!("{label}: {wins}/{} points better [{}]", socod.len(), cells.join("; ")));
    }
    (ok, details.join(" | "))
}

fn fast_speedup() -> (bool, String) {
    let (d, steps, n_window) = (512, 5000, 1000u64);
    let eps = 1.0 / 64.0;
    let stream = unit_stream(d, d, steps, 42, false);
    let time_path = |fast: bool| -> (f64, usize) {
        let mut s = SlidingSketch::new(d, d, eps, n_window).expect("valid params");
        let start = Instant::now();
        for (x, y) in &stream {
            if fast {
                s.fast_update(x, y).expect("unit input");
            } else {
                s.update(x, y).expect("unit input");
            }
        }
        (start.elapsed().as_nanos() as f64 / steps as f64, s.width())
    };
    let (fast_ns, width) = time_path(true);
    let (simple_ns, _) = time_path(false);
    let ratio = simple_ns / fast_ns;
    (
        ratio >= 1.5,
        format!(
            "width {width}: simple {:.0} us/column, fast {:.0} us/column, ratio {ratio:.2}",
            simple_ns / 1e3,
            fast_ns / 1e3
        ),
    )
}

/// Load, run and write a config the way `swamm run` does.
pub fn run_config_to_file(cfg: &ExperimentConfig, stream: Option<&Path>, out: &Path) -> crate::Result<()> {
    let records = harness::load_stream(cfg, stream)?;
    let exp = run_experiment(cfg, &records, RunOptions::default())?;
    emit_results(&exp.rows, out)?;
    match exp.failures.into_iter().next() {
        Some(f) => Err(f.error),
        None => Ok(()),
    }
}

fn determinism() -> (bool, String) {
    let cfg = ExperimentConfig {
        d_x: 40,
        d_y: 30,
        n: 1200,
        n_window: 300,
        eps_grid: vec![0.5, 0.25, 0.125],
        signal_dim: 10,
        r_bound: 4.0,
        methods: vec![Method::Socod, Method::Mlsocod, Method::Sampling, Method::Oracle],
        ..ExperimentConfig::desk_noisy()
    };
    let dir = std::env::temp_dir().join(format!(
        "swamm-verify-{}-{}",
        std::process::id(),
        Instant::now().elapsed().as_nanos()
    ));
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return (false, format!("{}: {e}", dir.display()));
    }
    let paths = [dir.join("a.csv"), dir.join("b.csv")];
    let result = (|| -> crate::Result<bool> {
        for p in &paths {
            run_config_to_file(&cfg, None, p)?;
        }
        let read = |p: &Path| std::fs::read(p).map_err(|e| crate::Error::io(p, e));
        let same_rows = read(&paths[0])? == read(&paths[1])?;
        let same_summary = read(&harness::summary_path(&paths[0]))? == read(&harness::summary_path(&paths[1]))?;
        Ok(same_rows && same_summary)
    })();
    let _ = std::fs::remove_dir_all(&dir);
    match result {
        Ok(same) => (
            same,
            if same {
                "two runs produced byte-identical row and summary files".into()
            } else {
                "result files differ between runs".into()
            },
        ),
        Err(e) => (false, e.to_string()),
    }
}
