//! Validation computations shared by the `reproduce` command and the
//! acceptance test suite, so the numbers in the figure summaries and the
//! test gate come from one implementation.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use occtime::montecarlo::{build_histogram, l1_distance};
use occtime::numerics::{integrate, QuadratureSpec, Singularity};
use occtime::occupation::{
    arcsine_pdf, constant_drift_pdf, occupation_pdf_longtime, occupation_pdf_zero,
    TwoValuedDriftSpec,
};
use occtime::sliding_long::LongtimeDensity;
use occtime::sliding_short::{parallel_pdf, FrozenDriftParams};
use occtime::{DensityGrid, Error, Result};

/// One named pass/fail check: `pass` means `value <= threshold`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

pub fn check(name: impl Into<String>, value: f64, threshold: f64) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        value,
        threshold,
        pass: value <= threshold,
    }
}

/// Interior probe fractions 0.05, 0.10, ..., 0.95.
fn probe_fractions() -> impl Iterator<Item = f64> {
    (1..=19).map(|k| k as f64 * 0.05)
}

/// Largest pointwise gap between the exact driftless density at t = 1 and
/// the arc-sine density, over the interior probe grid.
pub fn arcsine_collapse_max_diff() -> Result<f64> {
    let spec = TwoValuedDriftSpec::new(0.0, 0.0, 0.0, 1.0)?;
    let mut max = 0.0f64;
    for tau in probe_fractions() {
        let diff = (occupation_pdf_zero(tau, &spec)? - arcsine_pdf(tau, 1.0)?).abs();
        max = max.max(diff);
    }
    Ok(max)
}

/// Largest pointwise gap between the exact density with equal and opposite
/// rates (-a, a) at t = 1 and the constant-drift closed form.
pub fn constant_drift_max_diff(a: f64) -> Result<f64> {
    let spec = TwoValuedDriftSpec::new(-a, a, 0.0, 1.0)?;
    let mut max = 0.0f64;
    for tau in probe_fractions() {
        let diff = (occupation_pdf_zero(tau, &spec)? - constant_drift_pdf(tau, 1.0, a)?).abs();
        max = max.max(diff);
    }
    Ok(max)
}

/// Shape statistics of the exact occupation density on (0, t) for a start
/// on the switching point, plus its L1 distance to the long-horizon
/// Gaussian approximation.
#[derive(Debug, Clone, Copy)]
pub struct LongtimeMoments {
    pub mass: f64,
    pub mean: f64,
    pub std: f64,
    pub l1_to_gaussian: f64,
}

pub fn longtime_moments(a_l: f64, a_r: f64, t: f64) -> Result<LongtimeMoments> {
    let spec = TwoValuedDriftSpec::new(a_l, a_r, 0.0, t)?;
    let moments_quad = QuadratureSpec {
        abs_tol: 1e-9,
        rel_tol: 1e-7,
        max_subdivisions: 400,
    };
    let density = |tau: f64| occupation_pdf_zero(tau, &spec).unwrap_or(f64::NAN);
    let moment = |power: i32| -> Result<f64> {
        integrate(
            |tau| tau.powi(power) * density(tau),
            0.0,
            t,
            &moments_quad,
            Singularity::InvSqrtBoth,
        )
    };
    let mass = moment(0)?;
    let mean = moment(1)? / mass;
    let second = moment(2)? / mass;
    let std = (second - mean * mean).max(0.0).sqrt();
    // |exact - Gaussian| has kinks at the crossings; a looser budget keeps
    // the adaptive bisection affordable at plotting accuracy.
    let l1_quad = QuadratureSpec {
        abs_tol: 1e-6,
        rel_tol: 1e-5,
        max_subdivisions: 400,
    };
    let l1 = integrate(
        |tau| (density(tau) - occupation_pdf_longtime(tau, t, a_l, a_r).unwrap_or(f64::NAN)).abs(),
        0.0,
        t,
        &l1_quad,
        Singularity::InvSqrtBoth,
    )?;
    Ok(LongtimeMoments {
        mass,
        mean,
        std,
        l1_to_gaussian: l1,
    })
}

/// Piecewise-linear tabulation of the exact occupation distribution
/// function for a start on the switching point: `cells + 1` edges spaced
/// as t sin^2(pi k / (2 cells)), which concentrates resolution at the
/// endpoint square-root divergences, with the cell masses integrated by
/// adaptive quadrature. Returns (edges, cumulative masses).
pub fn occupation_cdf_grid(spec: &TwoValuedDriftSpec, cells: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if spec.x0 != 0.0 {
        return Err(Error::Domain(
            "the tabulated distribution function requires x0 = 0".into(),
        ));
    }
    let t = spec.t;
    let mut edges: Vec<f64> = (0..=cells)
        .map(|k| {
            let u = k as f64 / cells as f64;
            t * (PI / 2.0 * u).sin().powi(2)
        })
        .collect();
    edges[0] = 0.0;
    edges[cells] = t;
    let quad = QuadratureSpec {
        abs_tol: 1e-9,
        rel_tol: 1e-7,
        max_subdivisions: 200,
    };
    let density = |tau: f64| occupation_pdf_zero(tau, spec).unwrap_or(f64::NAN);
    let mut cumulative = vec![0.0; cells + 1];
    for k in 0..cells {
        let singularity = if k == 0 {
            Singularity::InvSqrtLeft
        } else if k == cells - 1 {
            Singularity::InvSqrtRight
        } else {
            Singularity::None
        };
        let mass = integrate(&density, edges[k], edges[k + 1], &quad, singularity)?;
        cumulative[k + 1] = cumulative[k] + mass;
    }
    Ok((edges, cumulative))
}

/// Linear interpolation through a tabulated distribution function.
pub fn interp_cdf<'a>(edges: &'a [f64], cumulative: &'a [f64]) -> impl Fn(f64) -> f64 + 'a {
    move |x: f64| {
        let last = edges.len() - 1;
        if x <= edges[0] {
            return 0.0;
        }
        if x >= edges[last] {
            return cumulative[last];
        }
        let k = match edges.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
            Ok(i) => return cumulative[i],
            Err(i) => i - 1,
        };
        let w = (x - edges[k]) / (edges[k + 1] - edges[k]);
        cumulative[k] + w * (cumulative[k + 1] - cumulative[k])
    }
}

/// Sample range padded by 5% of the span on each side (a fixed ±0.5 for a
/// degenerate one-point sample), used for state histograms.
pub fn padded_range(samples: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &s in samples {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    let span = hi - lo;
    if span > 0.0 {
        (lo - 0.05 * span, hi + 0.05 * span)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn curve_metadata(source: &str) -> BTreeMap<String, String> {
    BTreeMap::from([("source".to_string(), source.to_string())])
}

/// L1 distance between a histogram of manifold samples and the short-time
/// parallel density evaluated at the bin centers.
pub fn short_parallel_l1(
    samples: &[f64],
    t: f64,
    bins: usize,
    params: &FrozenDriftParams,
) -> Result<f64> {
    let hist = build_histogram(samples, bins, padded_range(samples))?;
    let hist_grid = hist.to_density_grid("y")?;
    let centers = hist.bin_centers();
    let values = centers
        .iter()
        .map(|&y| parallel_pdf(&[y], t, params))
        .collect::<Result<Vec<f64>>>()?;
    let curve = DensityGrid::new("y", centers, values, curve_metadata("short-parallel"))?;
    l1_distance(&curve, &hist_grid)
}

/// L1 distance between a histogram of manifold samples and the
/// long-horizon manifold marginal evaluated at the bin centers.
pub fn long_marginal_l1(
    samples: &[f64],
    bins: usize,
    density: &LongtimeDensity,
) -> Result<f64> {
    let hist = build_histogram(samples, bins, padded_range(samples))?;
    let hist_grid = hist.to_density_grid("y")?;
    let centers = hist.bin_centers();
    let values = centers
        .iter()
        .map(|&y| density.marginal_y(&[y]))
        .collect::<Result<Vec<f64>>>()?;
    let curve = DensityGrid::new("y", centers, values, curve_metadata("long-marginal"))?;
    l1_distance(&curve, &hist_grid)
}

fn prefix_mass(grid: &DensityGrid) -> Vec<f64> {
    let xs = grid.abscissae();
    let vs = grid.values();
    let mut prefix = vec![0.0; xs.len()];
    for k in 1..xs.len() {
        prefix[k] = prefix[k - 1] + 0.5 * (vs[k] + vs[k - 1]) * (xs[k] - xs[k - 1]);
    }
    prefix
}

fn mass_at(grid: &DensityGrid, prefix: &[f64], x: f64) -> f64 {
    let xs = grid.abscissae();
    let vs = grid.values();
    let last = xs.len() - 1;
    if x <= xs[0] {
        return 0.0;
    }
    if x >= xs[last] {
        return prefix[last];
    }
    let k = match xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
        Ok(i) => return prefix[i],
        Err(i) => i - 1,
    };
    let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
    let value = vs[k] + w * (vs[k + 1] - vs[k]);
    prefix[k] + 0.5 * (vs[k] + value) * (x - xs[k])
}

/// Kolmogorov–Smirnov distance between two density grids: the largest gap
/// between their trapezoid distribution functions over the overlap of
/// their supports. Disjoint supports are an error.
pub fn grid_ks_distance(grid_a: &DensityGrid, grid_b: &DensityGrid) -> Result<f64> {
    let a = grid_a.abscissae();
    let b = grid_b.abscissae();
    let lo = a[0].max(b[0]);
    let hi = a[a.len() - 1].min(b[b.len() - 1]);
    if !(lo < hi) {
        return Err(Error::MismatchedGrids);
    }
    let prefix_a = prefix_mass(grid_a);
    let prefix_b = prefix_mass(grid_b);
    let mut points: Vec<f64> = a
        .iter()
        .chain(b.iter())
        .copied()
        .filter(|&x| x >= lo && x <= hi)
        .chain([lo, hi])
        .collect();
    points.sort_by(|p, q| p.partial_cmp(q).unwrap());
    points.dedup();
    let mut sup = 0.0f64;
    for &x in &points {
        let gap = (mass_at(grid_a, &prefix_a, x) - mass_at(grid_b, &prefix_b, x)).abs();
        sup = sup.max(gap);
    }
    Ok(sup)
}
