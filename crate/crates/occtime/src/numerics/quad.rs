//! Adaptive Gauss-Kronrod quadrature with endpoint-singularity substitutions.
//!
//! The occupation-time density behaves like 1/sqrt(tau) and 1/sqrt(t - tau)
//! at its endpoints, and several of its building blocks have the same
//! behaviour in their own integration variables. Rather than weighted rules,
//! one generic 15-point Kronrod kernel is used and the singular factor is
//! removed beforehand by the substitution u^2 = x - a (and/or u^2 = b - x),
//! which turns x^{-1/2} (smooth) into 2 (smooth).

use crate::error::{Error, Result};

/// Subdivision and tolerance budget for one adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) || self.max_subdivisions < 1 {
            return Err(Error::Domain(
                "quadrature spec requires abs_tol > 0, rel_tol > 0, max_subdivisions >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Endpoint behaviour of the integrand on (a, b).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Singularity {
    None,
    /// Integrand ~ (x - a)^{-1/2} near a.
    InvSqrtLeft,
    /// Integrand ~ (b - x)^{-1/2} near b.
    InvSqrtRight,
    /// Both endpoints.
    InvSqrtBoth,
}

// 15-point Kronrod abscissae/weights and the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Kernel {
    result: f64,
    abserr: f64,
}

/// One 15-point Kronrod panel with the QUADPACK error heuristic.
fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Kernel {
    let centr = 0.5 * (a + b);
    let hlgth = 0.5 * (b - a);
    let dhlgth = hlgth.abs();

    let fc = f(centr);
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0f64; 7];
    let mut fv2 = [0.0f64; 7];

    for j in 0..3 {
        let jtw = 2 * j + 1;
        let absc = hlgth * XGK[jtw];
        let f1 = f(centr - absc);
        let f2 = f(centr + absc);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        let fsum = f1 + f2;
        resg += WG[j] * fsum;
        resk += WGK[jtw] * fsum;
        resabs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..4 {
        let jtwm1 = 2 * j;
        let absc = hlgth * XGK[jtwm1];
        let f1 = f(centr - absc);
        let f2 = f(centr + absc);
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        let fsum = f1 + f2;
        resk += WGK[jtwm1] * fsum;
        resabs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }

    let reskh = resk * 0.5;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }

    let result = resk * hlgth;
    let resabs = resabs * dhlgth;
    let resasc = resasc * dhlgth;
    let mut abserr = ((resk - resg) * hlgth).abs();
    if resasc != 0.0 && abserr != 0.0 {
        abserr = resasc * 1.0f64.min((200.0 * abserr / resasc).powf(1.5));
    }
    let round = 50.0 * f64::EPSILON * resabs;
    if round > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        abserr = abserr.max(round);
    }

    Kernel { result, abserr }
}

/// Adaptive integration of a bounded integrand over [a, b], bisecting the
/// worst panel first until the summed error estimate meets
/// max(abs_tol, rel_tol |result|).
fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    struct Seg {
        a: f64,
        b: f64,
        val: f64,
        err: f64,
    }
    let first = qk15(f, a, b);
    let mut segs = vec![Seg {
        a,
        b,
        val: first.result,
        err: first.abserr,
    }];

    loop {
        let mut total = 0.0;
        let mut err_total = 0.0;
        let mut worst = 0;
        for (i, s) in segs.iter().enumerate() {
            total += s.val;
            err_total += s.err;
            if s.err > segs[worst].err {
                worst = i;
            }
        }
        if !total.is_finite() {
            return Err(Error::NonFinite("integrand produced a non-finite value".into()));
        }
        if err_total <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
            return Ok(total);
        }
        if segs.len() >= spec.max_subdivisions {
            return Err(Error::NonConvergence {
                estimate: total,
                error_bound: err_total,
                context: format!("interval [{a}, {b}]"),
            });
        }
        let Seg { a: wa, b: wb, .. } = segs[worst];
        let mid = 0.5 * (wa + wb);
        if mid <= wa || mid >= wb {
            // Panel narrower than floating resolution; its error estimate
            // will not improve, so report the best available answer.
            return Err(Error::NonConvergence {
                estimate: total,
                error_bound: err_total,
                context: format!("interval [{a}, {b}] (panel at floating resolution)"),
            });
        }
        let lo = qk15(f, wa, mid);
        let hi = qk15(f, mid, wb);
        segs[worst] = Seg {
            a: wa,
            b: mid,
            val: lo.result,
            err: lo.abserr,
        };
        segs.push(Seg {
            a: mid,
            b: wb,
            val: hi.result,
            err: hi.abserr,
        });
    }
}

/// Integrate f over (a, b) after removing declared endpoint singularities.
///
/// The Kronrod nodes are interior, so f is never evaluated at a or b even
/// when no substitution is requested.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
    singularity: Singularity,
) -> Result<f64> {
    spec.validate()?;
    if !(a < b) {
        return Err(Error::Domain(format!("integration bounds require a < b, got [{a}, {b}]")));
    }
    match singularity {
        Singularity::None => adapt(&f, a, b, spec),
        Singularity::InvSqrtLeft => {
            // x = a + u^2, dx = 2u du.
            let w = (b - a).sqrt();
            adapt(&|u: f64| f(a + u * u) * 2.0 * u, 0.0, w, spec)
        }
        Singularity::InvSqrtRight => {
            // x = b - u^2, dx = -2u du (orientation absorbed by swapping bounds).
            let w = (b - a).sqrt();
            adapt(&|u: f64| f(b - u * u) * 2.0 * u, 0.0, w, spec)
        }
        Singularity::InvSqrtBoth => {
            let mid = 0.5 * (a + b);
            let half = QuadratureSpec {
                abs_tol: 0.5 * spec.abs_tol,
                ..*spec
            };
            let left = adapt(&|u: f64| f(a + u * u) * 2.0 * u, 0.0, (mid - a).sqrt(), &half)?;
            let right = adapt(&|u: f64| f(b - u * u) * 2.0 * u, 0.0, (b - mid).sqrt(), &half)?;
            Ok(left + right)
        }
    }
}

/// Integrate f over (a, infinity) for integrands with exponential or
/// Gaussian decay.
///
/// The tail is compressed by x = a + s u/(1-u) with the scale s chosen from a
/// geometric pre-scan of the integrand's decay: probing doubles outward from
/// a and s is set where |f| has fallen to 1e-8 of its running peak. This
/// keeps the transformed integrand well resolved when the mass concentrates
/// near a (scales of order epsilon in the callers).
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    spec.validate()?;
    let mut peak = 0.0f64;
    let mut scale = None;
    let mut offset = 1e-6;
    for _ in 0..=62 {
        let v = f(a + offset).abs();
        if v > peak {
            peak = v;
        } else if peak > 0.0 && v <= 1e-8 * peak {
            scale = Some(offset);
            break;
        }
        offset *= 2.0;
    }
    let s = scale.unwrap_or(1.0);
    adapt(
        &|u: f64| {
            let om = 1.0 - u;
            f(a + s * u / om) * s / (om * om)
        },
        0.0,
        1.0,
        spec,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const TIGHT: QuadratureSpec = QuadratureSpec {
        abs_tol: 1e-12,
        rel_tol: 1e-10,
        max_subdivisions: 200,
    };

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x * x, 0.0, 1.0, &TIGHT, Singularity::None).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn inv_sqrt_left_closed_form() {
        // integral of x^{-1/2} over (0,1) = 2
        let v = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, &TIGHT, Singularity::InvSqrtLeft).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inv_sqrt_right_closed_form() {
        let v = integrate(
            |x| 1.0 / (1.0 - x).sqrt(),
            0.0,
            1.0,
            &TIGHT,
            Singularity::InvSqrtRight,
        )
        .unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn arcsine_total_mass() {
        // integral of 1/(pi sqrt(x(1-x))) over (0,1) = 1
        let v = integrate(
            |x| 1.0 / (core::f64::consts::PI * (x * (1.0 - x)).sqrt()),
            0.0,
            1.0,
            &TIGHT,
            Singularity::InvSqrtBoth,
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn exponential_tail() {
        let v = integrate_semi_infinite(|x| (-x).exp(), 0.0, &TIGHT).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn half_gaussian() {
        let v = integrate_semi_infinite(
            |x| (-x * x / 2.0).exp() / (2.0 * core::f64::consts::PI).sqrt(),
            0.0,
            &TIGHT,
        )
        .unwrap();
        assert!((v - 0.5).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn narrow_gaussian_far_scale() {
        // Mass concentrated at scale 1e-4; the pre-scan must find it.
        let s = 1e-4;
        let v = integrate_semi_infinite(
            |x| (-x * x / (2.0 * s * s)).exp(),
            0.0,
            &TIGHT,
        )
        .unwrap();
        let expect = s * (core::f64::consts::PI / 2.0).sqrt();
        assert!((v - expect).abs() < 1e-10 * 1.0f64.max(expect / s), "got {v}, want {expect}");
    }

    #[test]
    fn nonconvergence_reports_estimate() {
        let spec = QuadratureSpec {
            abs_tol: 1e-16,
            rel_tol: 1e-16,
            max_subdivisions: 4,
        };
        // Oscillatory enough that 4 panels cannot reach 1e-16.
        let res = integrate(|x| (50.0 * x).sin(), 0.0, 3.0, &spec, Singularity::None);
        match res {
            Err(Error::NonConvergence { estimate, error_bound, .. }) => {
                let exact = (1.0 - (150.0f64).cos()) / 50.0;
                assert!((estimate - exact).abs() < 1e-3, "estimate {estimate} vs {exact}");
                assert!(error_bound > 0.0);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn bad_bounds_rejected() {
        assert!(matches!(
            integrate(|x| x, 1.0, 1.0, &TIGHT, Singularity::None),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn linearity_on_random_polynomials() {
        // integrate(2f + 3g) = 2 integrate(f) + 3 integrate(g) within 10x tol.
        let f = |x: f64| 1.0 + 3.0 * x - x * x;
        let g = |x: f64| 0.5 - x + 4.0 * x * x * x;
        let int_f = integrate(f, 0.0, 1.0, &TIGHT, Singularity::None).unwrap();
        let int_g = integrate(g, 0.0, 1.0, &TIGHT, Singularity::None).unwrap();
        let combo =
            integrate(|x| 2.0 * f(x) + 3.0 * g(x), 0.0, 1.0, &TIGHT, Singularity::None).unwrap();
        assert!((combo - (2.0 * int_f + 3.0 * int_g)).abs() < 1e-11);
    }
}
