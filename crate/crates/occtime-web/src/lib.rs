//! WebAssembly bindings for the browser demo.
//!
//! Each operation returns one flat `Float64Array` so the JavaScript side
//! needs no serde bridge; the packing of every array is documented on the
//! function. All computations are exact library calls — the demo does not
//! reimplement any numerics. The crate also compiles natively so the
//! bindings can be unit-tested with `cargo test`.

use occtime::montecarlo::{build_histogram, simulate_two_valued, RecordMode, SimConfig};
use occtime::occupation::{OccupationDensity, TwoValuedDriftSpec};
use occtime::sliding_long::{FilippovSystem, LongtimeDensity, NoiseSpec};
use occtime::sliding_short::{frozen_params_from_system, parallel_pdf};

use wasm_bindgen::prelude::wasm_bindgen;

/// Work cap for one interactive simulation: paths times steps. Roughly two
/// seconds of single-threaded wasm; anything larger would freeze the page.
const MAX_SIM_STEPS: f64 = 2e8;

fn err_str(e: occtime::Error) -> String {
    e.to_string()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| lo + step * k as f64).collect()
}

/// Occupation-time law of Brownian motion with two-valued drift.
///
/// Returns `[atom_at_zero, atom_at_t, tau_0, density_0, ..., tau_{n-1},
/// density_{n-1}]` with the `n` abscissae at interior cell centers of
/// (0, t), where the density is integrable but unbounded at the endpoints.
#[wasm_bindgen]
pub fn occupation_curve(
    a_l: f64,
    a_r: f64,
    x0: f64,
    t: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    if points < 2 {
        return Err("points must be at least 2".into());
    }
    let spec = TwoValuedDriftSpec::new(a_l, a_r, x0, t).map_err(err_str)?;
    let law = OccupationDensity::new(spec).map_err(err_str)?;
    let mut packed = Vec::with_capacity(2 + 2 * points);
    packed.push(law.atom_at_zero);
    packed.push(law.atom_at_t);
    for k in 0..points {
        let tau = (k as f64 + 0.5) * t / points as f64;
        packed.push(tau);
        packed.push(law.density(tau).map_err(err_str)?);
    }
    Ok(packed)
}

/// Short-horizon and long-horizon manifold densities of the built-in
/// sliding example (started at y = 2, default noise), on one shared grid.
///
/// Returns `[y_0, short_0, long_0, ..., y_{n-1}, short_{n-1}, long_{n-1}]`.
/// The grid spans the union of both curves' six-sigma supports, so either
/// curve can be plotted alone without clipping.
#[wasm_bindgen]
pub fn sliding_curves(t: f64, points: usize) -> Result<Vec<f64>, String> {
    if points < 2 {
        return Err("points must be at least 2".into());
    }
    let system = FilippovSystem::builtin_example();
    let noise = NoiseSpec::new(0.1, vec![vec![1.0, 0.0], vec![0.0, 0.1]]).map_err(err_str)?;
    let y0 = vec![2.0];

    let params = frozen_params_from_system(&system, &noise, &y0).map_err(err_str)?;
    let mu_l = params.y0[0] + params.b_l[0] * t;
    let mu_r = params.y0[0] + params.b_r[0] * t;
    let sigma_short = (params.epsilon * t * params.gamma[0][0]).max(0.0).sqrt();
    let pad_short = 6.0 * sigma_short + 1e-9 * (1.0 + mu_l.abs().max(mu_r.abs()));

    let density = LongtimeDensity::new(&system, &noise, &y0, t, t / 2000.0).map_err(err_str)?;
    let state = density.state();
    let mu_long = state.y_s[0];
    let sigma_long = (noise.epsilon() * state.theta[0][0]).max(0.0).sqrt();
    let pad_long = 6.0 * sigma_long + 1e-9 * (1.0 + mu_long.abs());

    let lo = (mu_l.min(mu_r) - pad_short).min(mu_long - pad_long);
    let hi = (mu_l.max(mu_r) + pad_short).max(mu_long + pad_long);
    let mut packed = Vec::with_capacity(3 * points);
    for y in linspace(lo, hi, points) {
        packed.push(y);
        packed.push(parallel_pdf(&[y], t, &params).map_err(err_str)?);
        packed.push(density.marginal_y(&[y]).map_err(err_str)?);
    }
    Ok(packed)
}

/// Seeded Monte Carlo histogram of the occupation time, for overlaying on
/// [`occupation_curve`].
///
/// Returns `[center_0, density_0, ..., center_{b-1}, density_{b-1}]` over
/// `bins` equal cells of (0, t), normalized so the bars integrate to the
/// in-range fraction of the sample. The work cap keeps one call to about
/// two seconds of wasm time; lower `paths` or raise `dt` if it is hit.
#[wasm_bindgen]
pub fn occupation_histogram(
    a_l: f64,
    a_r: f64,
    x0: f64,
    t: f64,
    paths: usize,
    dt: f64,
    seed: u32,
    bins: usize,
) -> Result<Vec<f64>, String> {
    let spec = TwoValuedDriftSpec::new(a_l, a_r, x0, t).map_err(err_str)?;
    let cfg = SimConfig::new(
        paths,
        dt,
        t,
        u64::from(seed),
        RecordMode::FinalStateAndOccupation,
    )
    .map_err(err_str)?;
    let steps = (t / dt).ceil() * paths as f64;
    if steps > MAX_SIM_STEPS {
        return Err(format!(
            "simulation budget exceeded: {steps:.2e} Euler-Maruyama steps requested, cap is {MAX_SIM_STEPS:.0e}"
        ));
    }
    let samples = simulate_two_valued(&spec, &cfg).map_err(err_str)?;
    let hist = build_histogram(&samples.occupation, bins, (0.0, t)).map_err(err_str)?;
    let centers = hist.bin_centers();
    let densities = hist.normalized_density();
    let mut packed = Vec::with_capacity(2 * bins);
    for (c, d) in centers.iter().zip(&densities) {
        packed.push(*c);
        packed.push(*d);
    }
    Ok(packed)
}
