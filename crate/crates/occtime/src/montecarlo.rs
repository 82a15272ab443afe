//! Seeded Euler–Maruyama simulation of the two-valued-drift SDE and the
//! full piecewise-smooth system, with occupation-time accumulation,
//! histogramming, and the distance metrics used to cross-check every
//! analytic density in this crate.
//!
//! Determinism contract: every sample set is a pure function of the
//! configuration. Each path draws from its own counter-based RNG stream
//! keyed by (seed, path index), so results are bit-identical no matter how
//! paths are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::occupation::TwoValuedDriftSpec;
use crate::sliding_long::{FilippovSystem, NoiseSpec};
use crate::sliding_short::DensityGrid;

/// What a simulation run retains per path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordMode {
    /// Final state only.
    FinalState,
    /// Final state plus the accumulated positive occupation time.
    FinalStateAndOccupation,
    /// Final state, occupation time, and the whole discrete trajectory.
    FullPath,
}

impl RecordMode {
    fn keeps_occupation(self) -> bool {
        !matches!(self, RecordMode::FinalState)
    }

    fn keeps_path(self) -> bool {
        matches!(self, RecordMode::FullPath)
    }
}

/// Simulation budget and reproducibility knobs.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    pub record: RecordMode,
}

impl SimConfig {
    pub fn new(n_paths: usize, dt: f64, t_final: f64, seed: u64, record: RecordMode) -> Result<Self> {
        let cfg = Self {
            n_paths,
            dt,
            t_final,
            seed,
            record,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Domain("n_paths must be at least 1".into()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Domain(format!(
                "dt must be positive and finite, got {}",
                self.dt
            )));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::Domain(format!(
                "t_final must be positive and finite, got {}",
                self.t_final
            )));
        }
        if self.dt > self.t_final {
            return Err(Error::Domain(format!(
                "dt = {} exceeds t_final = {}",
                self.dt, self.t_final
            )));
        }
        Ok(())
    }

    /// Step sizes covering the horizon: full steps of dt plus one shorter
    /// closing step when dt does not divide t_final.
    fn n_full_steps(&self) -> (usize, f64) {
        let n = (self.t_final / self.dt).floor() as usize;
        let remainder = self.t_final - n as f64 * self.dt;
        // Guard against a rounding sliver posing as a real step.
        if remainder > 1e-12 * self.dt {
            (n, remainder)
        } else {
            (n, 0.0)
        }
    }
}

/// The per-path generator: one stream per path index so the sample set is
/// independent of scheduling.
fn path_rng(seed: u64, path_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index as u64);
    rng
}

/// Samples from the two-valued-drift SDE at the configured horizon.
#[derive(Debug, Clone)]
pub struct TwoValuedSamples {
    pub t_final: f64,
    /// Final position of each path.
    pub x_final: Vec<f64>,
    /// Positive occupation time of each path; empty when the record mode
    /// is `FinalState`.
    pub occupation: Vec<f64>,
    /// Each path's position after every step (starting state included);
    /// present only under `FullPath`.
    pub paths: Option<Vec<Vec<f64>>>,
}

/// Euler–Maruyama simulation of Brownian motion with two-valued drift:
/// drift a_l below the switching point, -a_r at and above it (the
/// occupation indicator includes 0, so x = 0 takes the right branch).
/// The occupation increment uses the pre-step sign, matching the scheme's
/// left-point drift evaluation. Deterministic for fixed (seed, n_paths,
/// dt) independent of thread count.
pub fn simulate_two_valued(spec: &TwoValuedDriftSpec, cfg: &SimConfig) -> Result<TwoValuedSamples> {
    spec.validate()?;
    cfg.validate()?;
    let (n_steps, closing) = cfg.n_full_steps();
    let run_path = |i: usize| -> (f64, f64, Option<Vec<f64>>) {
        let mut rng = path_rng(cfg.seed, i);
        let mut x = spec.x0;
        let mut tau = 0.0;
        let mut trace = cfg
            .record
            .keeps_path()
            .then(|| Vec::with_capacity(n_steps + 2));
        if let Some(tr) = trace.as_mut() {
            tr.push(x);
        }
        let advance = |x: &mut f64, tau: &mut f64, h: f64, rng: &mut ChaCha8Rng| {
            if *x >= 0.0 {
                *tau += h;
            }
            let drift = if *x < 0.0 { spec.a_l } else { -spec.a_r };
            let z: f64 = rng.sample(StandardNormal);
            *x += drift * h + spec.diffusion_scale * h.sqrt() * z;
        };
        for _ in 0..n_steps {
            advance(&mut x, &mut tau, cfg.dt, &mut rng);
            if let Some(tr) = trace.as_mut() {
                tr.push(x);
            }
        }
        if closing > 0.0 {
            advance(&mut x, &mut tau, closing, &mut rng);
            if let Some(tr) = trace.as_mut() {
                tr.push(x);
            }
        }
        (x, tau.min(cfg.t_final), trace)
    };

    #[cfg(feature = "parallel")]
    let results: Vec<_> = (0..cfg.n_paths).into_par_iter().map(run_path).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = (0..cfg.n_paths).map(run_path).collect();

    let mut samples = TwoValuedSamples {
        t_final: cfg.t_final,
        x_final: Vec::with_capacity(cfg.n_paths),
        occupation: Vec::new(),
        paths: cfg.record.keeps_path().then(Vec::new),
    };
    for (x, tau, trace) in results {
        samples.x_final.push(x);
        if cfg.record.keeps_occupation() {
            samples.occupation.push(tau);
        }
        if let (Some(all), Some(tr)) = (samples.paths.as_mut(), trace) {
            all.push(tr);
        }
    }
    Ok(samples)
}

/// Samples from the full piecewise-smooth SDE at the configured horizon.
#[derive(Debug, Clone)]
pub struct FilippovSamples {
    pub t_final: f64,
    /// Final transverse coordinate of each path.
    pub x_final: Vec<f64>,
    /// Final manifold coordinates of each path.
    pub y_final: Vec<Vec<f64>>,
    /// Positive occupation time of the transverse coordinate; empty when
    /// the record mode is `FinalState`.
    pub occupation: Vec<f64>,
    /// Each path's full state (x, then y) after every step; present only
    /// under `FullPath`.
    pub paths: Option<Vec<Vec<Vec<f64>>>>,
}

/// Euler–Maruyama simulation of the piecewise-smooth system: drift from
/// the left or right field by the pre-step sign of x (x = 0 takes the
/// right field), noise increment sqrt(epsilon dt) D z with a fresh
/// standard normal vector z each step. Paths start on the manifold:
/// x(0) = 0, y(0) = y0.
///
/// A path reaching a non-finite state aborts the run with the path index.
/// The zero-noise limit is not supported here: without noise the scheme
/// chatters across the manifold instead of sliding; use the deterministic
/// sliding solver for that regime.
pub fn simulate_filippov(
    system: &FilippovSystem,
    noise: &NoiseSpec,
    y0: &[f64],
    cfg: &SimConfig,
) -> Result<FilippovSamples> {
    cfg.validate()?;
    let n = system.dimension();
    if noise.dimension() != n {
        return Err(Error::Domain(format!(
            "noise matrix dimension {} does not match the system dimension {n}",
            noise.dimension()
        )));
    }
    if y0.len() != n - 1 {
        return Err(Error::Domain(format!(
            "y0 has {} coordinates, expected {}",
            y0.len(),
            n - 1
        )));
    }
    let (n_steps, closing) = cfg.n_full_steps();
    let d = noise.d();
    let eps = noise.epsilon();

    let run_path = |i: usize| -> Result<(f64, Vec<f64>, f64, Option<Vec<Vec<f64>>>)> {
        let mut rng = path_rng(cfg.seed, i);
        let mut x = 0.0f64;
        let mut y = y0.to_vec();
        let mut tau = 0.0;
        let mut z = vec![0.0f64; n];
        let mut trace = cfg
            .record
            .keeps_path()
            .then(|| Vec::with_capacity(n_steps + 2));
        let snapshot = |x: f64, y: &[f64]| {
            let mut state = Vec::with_capacity(n);
            state.push(x);
            state.extend_from_slice(y);
            state
        };
        if let Some(tr) = trace.as_mut() {
            tr.push(snapshot(x, &y));
        }
        let mut step_index = 0usize;
        let mut advance = |x: &mut f64,
                           y: &mut [f64],
                           tau: &mut f64,
                           h: f64,
                           rng: &mut ChaCha8Rng,
                           z: &mut [f64]|
         -> Result<()> {
            if *x >= 0.0 {
                *tau += h;
            }
            let drift = if *x < 0.0 {
                system.drift_left(*x, y)
            } else {
                system.drift_right(*x, y)
            };
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            let amp = (eps * h).sqrt();
            let mut ok = true;
            for row in 0..n {
                let mut kick = 0.0;
                for (col, zc) in z.iter().enumerate() {
                    kick += d[row][col] * zc;
                }
                let target = if row == 0 { &mut *x } else { &mut y[row - 1] };
                *target += drift[row] * h + amp * kick;
                ok &= target.is_finite();
            }
            step_index += 1;
            if !ok {
                return Err(Error::NonFinite(format!(
                    "path {i} diverged at step {step_index}"
                )));
            }
            Ok(())
        };
        for _ in 0..n_steps {
            advance(&mut x, &mut y, &mut tau, cfg.dt, &mut rng, &mut z)?;
            if let Some(tr) = trace.as_mut() {
                tr.push(snapshot(x, &y));
            }
        }
        if closing > 0.0 {
            advance(&mut x, &mut y, &mut tau, closing, &mut rng, &mut z)?;
            if let Some(tr) = trace.as_mut() {
                tr.push(snapshot(x, &y));
            }
        }
        Ok((x, y, tau.min(cfg.t_final), trace))
    };

    #[cfg(feature = "parallel")]
    let results: Vec<_> = (0..cfg.n_paths)
        .into_par_iter()
        .map(run_path)
        .collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = (0..cfg.n_paths).map(run_path).collect::<Result<_>>()?;

    let mut samples = FilippovSamples {
        t_final: cfg.t_final,
        x_final: Vec::with_capacity(cfg.n_paths),
        y_final: Vec::with_capacity(cfg.n_paths),
        occupation: Vec::new(),
        paths: cfg.record.keeps_path().then(Vec::new),
    };
    for (x, y, tau, trace) in results {
        samples.x_final.push(x);
        samples.y_final.push(y);
        if cfg.record.keeps_occupation() {
            samples.occupation.push(tau);
        }
        if let (Some(all), Some(tr)) = (samples.paths.as_mut(), trace) {
            all.push(tr);
        }
    }
    Ok(samples)
}

/// Uniform-bin histogram with the sample count retained for
/// normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
    total_samples: usize,
}

impl Histogram {
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_samples(&self) -> usize {
        self.total_samples
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.edges[self.edges.len() - 1] - self.edges[0]) / self.counts.len() as f64
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// counts / (total samples * bin width): the rectangle sum over all
    /// bins then equals the in-range fraction exactly, so a histogram
    /// whose range captures every sample has unit area.
    pub fn normalized_density(&self) -> Vec<f64> {
        let scale = 1.0 / (self.total_samples as f64 * self.bin_width());
        self.counts.iter().map(|&c| c as f64 * scale).collect()
    }

    pub fn in_range_fraction(&self) -> f64 {
        let in_range: u64 = self.counts.iter().sum();
        in_range as f64 / self.total_samples as f64
    }

    /// The histogram as a density sampled at bin centers.
    pub fn to_density_grid(&self, axis: impl Into<String>) -> Result<DensityGrid> {
        use std::collections::BTreeMap;
        let mut metadata = BTreeMap::new();
        metadata.insert("source".to_string(), "histogram".to_string());
        metadata.insert("total_samples".to_string(), self.total_samples.to_string());
        metadata.insert("bin_width".to_string(), format!("{:e}", self.bin_width()));
        DensityGrid::new(axis, self.bin_centers(), self.normalized_density(), metadata)
    }
}

/// Bins samples into n_bins uniform bins over the half-open range
/// [lo, hi), except that samples at exactly hi land in the last bin.
/// Samples outside the range are counted only through `total_samples`.
pub fn build_histogram(samples: &[f64], n_bins: usize, range: (f64, f64)) -> Result<Histogram> {
    let (lo, hi) = range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::EmptyRange);
    }
    if n_bins == 0 {
        return Err(Error::Domain("n_bins must be at least 1".into()));
    }
    if samples.is_empty() {
        return Err(Error::Domain("cannot histogram an empty sample set".into()));
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0u64; n_bins];
    for &x in samples {
        if !(x >= lo && x <= hi) {
            continue;
        }
        let mut idx = ((x - lo) / width) as usize;
        if idx >= n_bins {
            idx = n_bins - 1; // x == hi, or rounding at the last edge
        }
        counts[idx] += 1;
    }
    let edges = (0..=n_bins).map(|i| lo + i as f64 * width).collect();
    Ok(Histogram {
        edges,
        counts,
        total_samples: samples.len(),
    })
}

/// Trapezoid integral of |A - B| over the overlap of the two grids. Grids
/// with different abscissae are resampled by linear interpolation onto
/// the union of their abscissae restricted to the overlap. Disjoint
/// supports are an error rather than a vacuous zero.
pub fn l1_distance(grid_a: &DensityGrid, grid_b: &DensityGrid) -> Result<f64> {
    let a = grid_a.abscissae();
    let b = grid_b.abscissae();
    let lo = a[0].max(b[0]);
    let hi = a[a.len() - 1].min(b[b.len() - 1]);
    if !(lo < hi) {
        return Err(Error::MismatchedGrids);
    }
    let mut merged: Vec<f64> = a
        .iter()
        .chain(b.iter())
        .copied()
        .filter(|&x| x >= lo && x <= hi)
        .collect();
    merged.push(lo);
    merged.push(hi);
    merged.sort_by(|p, q| p.partial_cmp(q).unwrap());
    merged.dedup();
    let mut total = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for &x in &merged {
        let diff = (grid_a.value_at(x)? - grid_b.value_at(x)?).abs();
        if let Some((px, pd)) = prev {
            total += 0.5 * (x - px) * (pd + diff);
        }
        prev = Some((x, diff));
    }
    Ok(total)
}

/// Kolmogorov–Smirnov statistic of a sample set against a reference CDF:
/// the largest gap between the empirical CDF and `cdf`, checked on both
/// sides of each jump.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain(
            "KS distance needs at least one sample".into(),
        ));
    }
    let mut sorted = samples.to_vec();
    if sorted.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("KS samples".into()));
    }
    sorted.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let n = sorted.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let below = i as f64 / n;
        let above = (i + 1) as f64 / n;
        sup = sup.max((f - below).abs()).max((f - above).abs());
    }
    Ok(sup)
}
