//! Adaptive Gauss-Kronrod quadrature on finite and semi-infinite intervals.
//!
//! Each panel is evaluated with the 15-point Kronrod rule and the embedded
//! 7-point Gauss rule. The panel with the largest error estimate is bisected
//! until the global estimate meets the tolerance. Panel contributions are
//! summed in interval order so results do not depend on refinement order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Tolerances and the subdivision budget for one integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 200,
        }
    }
}

impl QuadSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Self {
        Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::config("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::config("max_subdivisions must be at least 1"));
        }
        Ok(())
    }
}

/// Value of an integral together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

// Kronrod abscissae; odd indices are shared with the Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
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

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    // max-heap on error; ties broken by position so the order is total
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFinite { at: x })
        }
    };

    let fc = eval(center)?;
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel { a, b, value, error })
}

/// Adaptive integration over consecutive panels `[points[i], points[i+1]]`.
fn adaptive<F: Fn(f64) -> f64>(f: &F, points: &[f64], spec: &QuadSpec) -> Result<Integral> {
    spec.validate()?;
    let mut heap = BinaryHeap::new();
    let mut done = Vec::new();
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(gk15(f, w[0], w[1])?);
        }
    }
    let mut panels = heap.len();
    loop {
        let (value, error) = heap
            .iter()
            .chain(done.iter())
            .fold((0.0, 0.0), |(v, e), p: &Panel| (v + p.value, e + p.error));
        let target = spec.abs_tol.max(spec.rel_tol * value.abs());
        if error <= target || heap.is_empty() {
            return Ok(ordered_sum(heap.into_vec(), done));
        }
        if panels >= spec.max_subdivisions {
            let Integral { value, error } = ordered_sum(heap.into_vec(), done);
            return Err(Error::Convergence {
                value,
                error,
                subdivisions: panels,
            });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel is at floating-point resolution; accept it as is
            done.push(worst);
            continue;
        }
        heap.push(gk15(f, worst.a, mid)?);
        heap.push(gk15(f, mid, worst.b)?);
        panels += 1;
    }
}

fn ordered_sum(mut live: Vec<Panel>, done: Vec<Panel>) -> Integral {
    live.extend(done);
    live.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = live.iter().map(|p| p.value).sum();
    let error = live.iter().map(|p| p.error).sum();
    Integral { value, error }
}

fn check_bounds(a: f64, b: f64) -> Result<()> {
    if a.is_nan() || b.is_nan() || a > b || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain {
            what: "integration bounds",
            value: if a.is_finite() { b } else { a },
        });
    }
    Ok(())
}

/// Integral of `f` over `[a, b]`.
pub fn integrate_finite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadSpec) -> Result<Integral> {
    integrate_with_breaks(f, a, b, &[], spec)
}

/// Integral of `f` over `[a, b]`, with the interval pre-split at every
/// breakpoint that falls strictly inside it.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    spec: &QuadSpec,
) -> Result<Integral> {
    check_bounds(a, b)?;
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
        });
    }
    let points = split_points(a, Some(b), breaks, |x| x);
    adaptive(&f, &points, spec)
}

/// Integral of `f` over `[a, inf)` via `v = a + t/(1-t)`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, a: f64, spec: &QuadSpec) -> Result<Integral> {
    integrate_semi_infinite_scaled(f, a, 1.0, &[], spec)
}

/// Integral of `f` over `[a, inf)` via `v = a + scale * t/(1-t)`.
///
/// `scale` should be of the order of the distance over which `f` varies;
/// breakpoints are carried through the change of variable.
pub fn integrate_semi_infinite_scaled<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    scale: f64,
    breaks: &[f64],
    spec: &QuadSpec,
) -> Result<Integral> {
    if !a.is_finite() {
        return Err(Error::Domain {
            what: "integration bound",
            value: a,
        });
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Domain {
            what: "semi-infinite scale",
            value: scale,
        });
    }
    let to_t = |v: f64| {
        let x = (v - a) / scale;
        x / (1.0 + x)
    };
    let points = split_points(a, None, breaks, to_t);
    let g = |t: f64| {
        let one_minus = 1.0 - t;
        let v = a + scale * t / one_minus;
        if !v.is_finite() {
            // only reachable once panels shrink to rounding width at t = 1
            return 0.0;
        }
        let y = f(v);
        if y == 0.0 {
            0.0
        } else {
            y * scale / (one_minus * one_minus)
        }
    };
    adaptive(&g, &points, spec)
}

fn split_points(a: f64, b: Option<f64>, breaks: &[f64], map: impl Fn(f64) -> f64) -> Vec<f64> {
    let (lo, hi) = match b {
        Some(b) => (a, b),
        None => (0.0, 1.0),
    };
    let mut pts = vec![lo];
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > a && b.is_none_or(|b| x < b))
        .map(map)
        .filter(|&t| t > lo && t < hi)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(hi);
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(r: Integral, exact: f64, tol: f64) {
        assert!(
            (r.value - exact).abs() <= tol * exact.abs().max(1.0),
            "got {} expected {exact}",
            r.value
        );
    }

    #[test]
    fn finite_examples() {
        let s = QuadSpec::default();
        close(integrate_finite(|x| x * x, 0.0, 1.0, &s).unwrap(), 1.0 / 3.0, 1e-14);
        close(
            integrate_finite(|x| (-x * x).exp() * 2.0 * x, 0.0, 3.0, &s).unwrap(),
            1.0 - (-9.0f64).exp(),
            1e-10,
        );
        close(integrate_finite(f64::sin, 0.0, PI, &s).unwrap(), 2.0, 1e-12);
    }

    #[test]
    fn semi_infinite_examples() {
        let s = QuadSpec::default();
        close(integrate_semi_infinite(|x| (-x).exp(), 0.0, &s).unwrap(), 1.0, 1e-9);
        close(integrate_semi_infinite(|x| x * (-x * x).exp(), 0.0, &s).unwrap(), 0.5, 1e-9);
        close(integrate_semi_infinite(|x| 1.0 / (1.0 + x * x), 0.0, &s).unwrap(), PI / 2.0, 1e-9);
    }

    #[test]
    fn breakpoints_handle_kinks() {
        let s = QuadSpec::default();
        let f = |x: f64| (x - 0.3).abs();
        let r = integrate_with_breaks(f, 0.0, 1.0, &[0.3], &s).unwrap();
        close(r, 0.5 * 0.09 + 0.5 * 0.49, 1e-14);
        let g = |x: f64| if x < 2.0 { 1.0 } else { (-(x - 2.0)).exp() };
        let r = integrate_semi_infinite_scaled(g, 0.0, 1.0, &[2.0], &s).unwrap();
        close(r, 3.0, 1e-9);
    }

    #[test]
    fn empty_interval_is_zero() {
        let r = integrate_finite(|x| x, 2.0, 2.0, &QuadSpec::default()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn reversed_interval_rejected() {
        assert!(integrate_finite(|x| x, 1.0, 0.0, &QuadSpec::default()).is_err());
    }

    #[test]
    fn non_convergence_carries_best_estimate() {
        let s = QuadSpec::new(1e-14, 1e-300, 3);
        match integrate_finite(|x: f64| x.sqrt().recip(), 0.0, 1.0, &s) {
            Err(Error::Convergence { value, error, .. }) => {
                assert!(value.is_finite() && value > 0.0);
                assert!(error > 0.0);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_integrand_reported() {
        let r = integrate_finite(|x| if x > 0.5 { f64::NAN } else { 1.0 }, 0.0, 1.0, &QuadSpec::default());
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn invalid_spec_rejected() {
        let s = QuadSpec::new(0.0, 1e-12, 10);
        assert!(integrate_finite(|x| x, 0.0, 1.0, &s).is_err());
        let s = QuadSpec::new(1e-8, 1e-12, 0);
        assert!(integrate_finite(|x| x, 0.0, 1.0, &s).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn linearity(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, k in 0.5f64..4.0) {
                let s = QuadSpec::default();
                let f = move |x: f64| (k * x).sin();
                let g = move |x: f64| (-k * x * x).exp();
                let lhs = integrate_finite(|x| alpha * f(x) + beta * g(x), 0.0, 2.0, &s).unwrap().value;
                let rhs = alpha * integrate_finite(f, 0.0, 2.0, &s).unwrap().value
                    + beta * integrate_finite(g, 0.0, 2.0, &s).unwrap().value;
                prop_assert!((lhs - rhs).abs() <= 10.0 * s.rel_tol * lhs.abs().max(1.0));
            }

            #[test]
            fn additivity(b in 0.1f64..2.9, k in 0.5f64..4.0) {
                let s = QuadSpec::default();
                let f = move |x: f64| (k * x).cos() * (-x).exp();
                let whole = integrate_finite(f, 0.0, 3.0, &s).unwrap().value;
                let parts = integrate_finite(f, 0.0, b, &s).unwrap().value
                    + integrate_finite(f, b, 3.0, &s).unwrap().value;
                prop_assert!((whole - parts).abs() <= 10.0 * s.rel_tol * whole.abs().max(1.0));
            }

            #[test]
            fn deterministic(k in 0.5f64..20.0) {
                let s = QuadSpec::default();
                let f = move |x: f64| (k * x).sin().powi(2) / (1.0 + x);
                let a = integrate_finite(f, 0.0, 5.0, &s);
                let b = integrate_finite(f, 0.0, 5.0, &s);
                prop_assert_eq!(a, b);
            }
        }
    }
}
