//! Path gain, LOS probability and the NLOS to equivalent-LOS distance map.
//!
//! Distances are in km. Attenuation constants are stored as dB loss at
//! 1 km, so the linear gain of a branch is `10^(-k_db/10) * d^(-beta)`.

use std::fmt;

use crate::error::{Error, Result};

/// Attenuation constants and exponents of the two propagation branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossParams {
    /// LOS loss at 1 km, dB.
    pub k_los_db: f64,
    pub beta_los: f64,
    /// NLOS loss at 1 km, dB.
    pub k_nlos_db: f64,
    pub beta_nlos: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self::pico_3gpp()
    }
}

impl PathLossParams {
    /// Outdoor pico-cell model at 2 GHz: 103.8 + 20.9 log10(d) LOS and
    /// 145.4 + 37.5 log10(d) NLOS, d in km.
    pub const fn pico_3gpp() -> Self {
        Self {
            k_los_db: 103.8,
            beta_los: 2.09,
            k_nlos_db: 145.4,
            beta_nlos: 3.75,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.k_los_db, self.beta_los, self.k_nlos_db, self.beta_nlos];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("path-loss parameters must be finite"));
        }
        if self.beta_los <= 0.0 || self.beta_nlos <= 0.0 {
            return Err(Error::config("path-loss exponents must be positive"));
        }
        if self.beta_nlos <= self.beta_los {
            return Err(Error::config(
                "beta_nlos must exceed beta_los (NLOS attenuates faster)",
            ));
        }
        if self.k_nlos_db <= self.k_los_db {
            return Err(Error::config("k_nlos_db must exceed k_los_db"));
        }
        Ok(())
    }

    /// Linear LOS gain at 1 km.
    pub fn k_los(&self) -> f64 {
        10f64.powf(-self.k_los_db / 10.0)
    }

    /// Linear NLOS gain at 1 km.
    pub fn k_nlos(&self) -> f64 {
        10f64.powf(-self.k_nlos_db / 10.0)
    }

    /// Scale of the LOS to NLOS distance map, `(K_NL/K_L)^(1/beta_NL)`.
    pub fn k_eq(&self) -> f64 {
        10f64.powf(-(self.k_nlos_db - self.k_los_db) / (10.0 * self.beta_nlos))
    }

    /// Exponent of the LOS to NLOS distance map, `beta_L / beta_NL`.
    pub fn beta_eq(&self) -> f64 {
        self.beta_los / self.beta_nlos
    }

    /// Linear power gain at distance `d` on the selected branch.
    pub fn path_gain(&self, d: f64, los: bool) -> Result<f64> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Domain {
                what: "path-gain distance",
                value: d,
            });
        }
        Ok(self.gain_unchecked(d, los))
    }

    #[inline]
    pub(crate) fn gain_unchecked(&self, d: f64, los: bool) -> f64 {
        let (k_db, beta) = if los {
            (self.k_los_db, self.beta_los)
        } else {
            (self.k_nlos_db, self.beta_nlos)
        };
        // one powf keeps the dB constant and the distance term in the same exponent
        10f64.powf(-k_db / 10.0 - beta * d.log10())
    }

    /// NLOS distance whose gain matches the LOS gain at `d_los`.
    pub fn inverse_equivalent_distance(&self, d_los: f64) -> Result<f64> {
        check_nonneg("LOS distance", d_los)?;
        Ok(self.inv_eq_unchecked(d_los))
    }

    /// LOS distance whose gain matches the NLOS gain at `d_nlos`.
    pub fn equivalent_distance(&self, d_nlos: f64) -> Result<f64> {
        check_nonneg("NLOS distance", d_nlos)?;
        Ok(self.eq_unchecked(d_nlos))
    }

    #[inline]
    pub(crate) fn inv_eq_unchecked(&self, d_los: f64) -> f64 {
        if d_los == 0.0 {
            return 0.0;
        }
        self.k_eq() * d_los.powf(self.beta_eq())
    }

    #[inline]
    pub(crate) fn eq_unchecked(&self, d_nlos: f64) -> f64 {
        if d_nlos == 0.0 {
            return 0.0;
        }
        let scale = 10f64.powf((self.k_nlos_db - self.k_los_db) / (10.0 * self.beta_los));
        scale * d_nlos.powf(self.beta_nlos / self.beta_los)
    }
}

fn check_nonneg(what: &'static str, d: f64) -> Result<()> {
    if d >= 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what, value: d })
    }
}

/// Probability that a base station at distance `d` is in line of sight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LosModel {
    /// `exp(-(d/L)^2)`.
    QuadExp { l: f64 },
    /// `0.5 - min(0.5, 5 exp(-d0/d)) + min(0.5, 5 exp(-d/d1))`.
    ThreeGpp { d0: f64, d1: f64 },
    /// `exp(-(alpha d - p))` clamped to 1. `alpha` is per km.
    ExpLinear { alpha: f64, p: f64 },
    AlwaysLos,
    NeverLos,
}

impl LosModel {
    /// Quadratic-exponential model with L = 82.5 m.
    pub const fn quad_exp_default() -> Self {
        LosModel::QuadExp { l: 0.0825 }
    }

    /// Pico-cell LOS function with d0 = 156 m and d1 = 30 m.
    pub const fn three_gpp_default() -> Self {
        LosModel::ThreeGpp {
            d0: 0.156,
            d1: 0.030,
        }
    }

    /// Exponential-linear model from a per-meter `alpha`, as usually published.
    pub fn exp_linear_per_meter(alpha_per_m: f64, p: f64) -> Self {
        LosModel::ExpLinear {
            alpha: alpha_per_m * 1e3,
            p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LosModel::QuadExp { l } if !(l > 0.0 && l.is_finite()) => {
                Err(Error::config("L must be positive"))
            }
            LosModel::ThreeGpp { d0, d1 }
                if !(d0 > 0.0 && d1 > 0.0 && d0.is_finite() && d1.is_finite()) =>
            {
                Err(Error::config("d0 and d1 must be positive"))
            }
            LosModel::ExpLinear { alpha, p } if !(alpha > 0.0 && alpha.is_finite() && p.is_finite()) => {
                Err(Error::config("alpha must be positive and p finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn los_probability(&self, d: f64) -> Result<f64> {
        check_nonneg("LOS-probability distance", d)?;
        Ok(self.p_los(d))
    }

    /// `1 - p_L(d)`, computed without cancellation where possible.
    pub fn nlos_probability(&self, d: f64) -> Result<f64> {
        check_nonneg("LOS-probability distance", d)?;
        Ok(self.p_nlos(d))
    }

    #[inline]
    pub(crate) fn p_los(&self, d: f64) -> f64 {
        match *self {
            LosModel::QuadExp { l } => {
                let x = d / l;
                (-x * x).exp()
            }
            LosModel::ThreeGpp { d0, d1 } => {
                if d == 0.0 {
                    return 1.0;
                }
                0.5 - (5.0 * (-d0 / d).exp()).min(0.5) + (5.0 * (-d / d1).exp()).min(0.5)
            }
            LosModel::ExpLinear { alpha, p } => (-(alpha * d - p)).exp().min(1.0),
            LosModel::AlwaysLos => 1.0,
            LosModel::NeverLos => 0.0,
        }
    }

    #[inline]
    pub(crate) fn p_nlos(&self, d: f64) -> f64 {
        match *self {
            LosModel::QuadExp { l } => {
                let x = d / l;
                -(-x * x).exp_m1()
            }
            LosModel::ExpLinear { alpha, p } => {
                let e = alpha * d - p;
                if e <= 0.0 {
                    0.0
                } else {
                    -(-e).exp_m1()
                }
            }
            _ => 1.0 - self.p_los(d),
        }
    }

    /// Distances where the function has a kink. Integrals over `d` split
    /// there.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            LosModel::ThreeGpp { d0, d1 } => {
                let ln10 = std::f64::consts::LN_10;
                let mut b = vec![d0 / ln10, d1 * ln10];
                b.sort_by(f64::total_cmp);
                b.dedup();
                b
            }
            LosModel::ExpLinear { alpha, p } if p > 0.0 => vec![p / alpha],
            _ => Vec::new(),
        }
    }

    /// Distance past which the LOS probability stays below `eps`. `None` for
    /// the constant models.
    pub(crate) fn los_negligible_beyond(&self, eps: f64) -> Option<f64> {
        let t = -eps.ln();
        match *self {
            LosModel::QuadExp { l } => Some(l * t.sqrt()),
            LosModel::ThreeGpp { d0, d1 } => {
                Some((d1 * (5f64.ln() + t)).max(d0 / std::f64::consts::LN_10))
            }
            LosModel::ExpLinear { alpha, p } => Some((p + t) / alpha),
            LosModel::AlwaysLos | LosModel::NeverLos => None,
        }
    }

    /// `Some(p)` when the LOS probability is the constant `p` at every
    /// distance.
    pub fn constant_probability(&self) -> Option<f64> {
        match self {
            LosModel::AlwaysLos => Some(1.0),
            LosModel::NeverLos => Some(0.0),
            _ => None,
        }
    }

    /// Smallest distance at which the LOS probability has dropped to
    /// `target` or below, found by bisection. `None` if it never does.
    pub fn crossing_distance(&self, target: f64) -> Option<f64> {
        self.bisect(|p| p <= target)
    }

    /// Largest distance at which the LOS probability is still `target` or
    /// above. Differs from [`crossing_distance`](Self::crossing_distance)
    /// only where the function is flat at `target`.
    pub fn last_distance_at_or_above(&self, target: f64) -> Option<f64> {
        self.bisect(|p| p < target)
    }

    fn bisect(&self, below: impl Fn(f64) -> bool) -> Option<f64> {
        if self.constant_probability().is_some() {
            return None;
        }
        let mut hi = 1e-3;
        while !below(self.p_los(hi)) {
            hi *= 2.0;
            if hi > 1e6 {
                return None;
            }
        }
        let mut lo = 0.0;
        if below(self.p_los(lo)) {
            return Some(0.0);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if below(self.p_los(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Distance at which the LOS probability falls to `1/e`. Used to size
    /// simulation windows.
    pub fn length_scale(&self) -> Option<f64> {
        match *self {
            LosModel::QuadExp { l } => Some(l),
            LosModel::AlwaysLos | LosModel::NeverLos => None,
            _ => self.crossing_distance((-1.0f64).exp()),
        }
    }
}

impl fmt::Display for LosModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LosModel::QuadExp { l } => write!(f, "quadexp(L={}m)", l * 1e3),
            LosModel::ThreeGpp { d0, d1 } => write!(f, "3gpp(d0={}m,d1={}m)", d0 * 1e3, d1 * 1e3),
            LosModel::ExpLinear { alpha, p } => write!(f, "explinear(alpha={}/m,p={})", alpha / 1e3, p),
            LosModel::AlwaysLos => f.write_str("always"),
            LosModel::NeverLos => f.write_str("never"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn quad_exp_values() {
        let m = LosModel::QuadExp { l: 0.0825 };
        assert_eq!(m.los_probability(0.0).unwrap(), 1.0);
        let half = 0.0825 * std::f64::consts::LN_2.sqrt();
        assert!((m.los_probability(half).unwrap() - 0.5).abs() < 1e-15);
        assert!((half - 0.0687).abs() < 1e-4);
    }

    #[test]
    fn three_gpp_values() {
        let m = LosModel::three_gpp_default();
        let expected = 5.0 * (-5.2f64).exp();
        assert!((m.los_probability(0.156).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.0276).abs() < 1e-4);
        assert_eq!(m.los_probability(0.0).unwrap(), 1.0);
        assert!((m.los_probability(1e-9).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exp_linear_is_clamped() {
        let m = LosModel::exp_linear_per_meter(8.59e-3, 0.101);
        assert_eq!(m.los_probability(0.0).unwrap(), 1.0);
        assert_eq!(m.los_probability(0.005).unwrap(), 1.0);
        let d = 0.1;
        let e = (-(8.59 * d - 0.101f64)).exp();
        assert!((m.los_probability(d).unwrap() - e).abs() < 1e-15);
        assert_eq!(m.breakpoints(), vec![0.101 / 8.59]);
    }

    #[test]
    fn negative_distance_is_domain_error() {
        let m = LosModel::quad_exp_default();
        assert!(matches!(m.los_probability(-1e-3), Err(Error::Domain { .. })));
        assert!(matches!(m.los_probability(f64::NAN), Err(Error::Domain { .. })));
    }

    #[test]
    fn nlos_complement_is_accurate_near_origin() {
        let m = LosModel::QuadExp { l: 0.0825 };
        let d = 1e-6;
        let x = d / 0.0825;
        assert!(rel(m.nlos_probability(d).unwrap(), x * x) < 1e-9);
    }

    #[test]
    fn path_gain_values() {
        let p = PathLossParams::pico_3gpp();
        assert!(rel(p.path_gain(1.0, true).unwrap(), 10f64.powf(-10.38)) < 1e-14);
        assert!(rel(p.path_gain(0.1, true).unwrap(), 10f64.powf(-8.29)) < 1e-13);
        assert!(rel(p.path_gain(1.0, false).unwrap(), 10f64.powf(-14.54)) < 1e-14);
        assert!(p.path_gain(0.0, true).is_err());
        assert!(p.path_gain(-1.0, false).is_err());
    }

    #[test]
    fn equivalent_distance_values() {
        let p = PathLossParams::pico_3gpp();
        // 103.8 + 20.9 log10(0.1) = 145.4 + 37.5 log10(d)
        let by_db = 10f64.powf((103.8 - 20.9 - 145.4) / 37.5);
        let d = p.inverse_equivalent_distance(0.1).unwrap();
        assert!(rel(d, by_db) < 1e-12);
        assert!((d - 0.0215).abs() < 1e-4);
        assert!((p.equivalent_distance(by_db).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(p.inverse_equivalent_distance(0.0).unwrap(), 0.0);
        assert_eq!(p.equivalent_distance(0.0).unwrap(), 0.0);
        assert!((p.k_eq() - 10f64.powf(-4.16 / 3.75)).abs() < 1e-12);
        assert!((p.k_eq() - 0.0777).abs() < 1e-4);
        assert!((p.beta_eq() - 0.5573).abs() < 1e-4);
        for x in [0.01, 0.1, 1.0] {
            let back = p.equivalent_distance(p.inverse_equivalent_distance(x).unwrap()).unwrap();
            assert!(rel(back, x) < 1e-12);
        }
    }

    #[test]
    fn params_validation() {
        assert!(PathLossParams::pico_3gpp().validate().is_ok());
        let mut p = PathLossParams::pico_3gpp();
        p.beta_nlos = 2.0;
        assert!(p.validate().is_err());
        let mut p = PathLossParams::pico_3gpp();
        p.k_nlos_db = 100.0;
        assert!(p.validate().is_err());
        assert!(LosModel::QuadExp { l: 0.0 }.validate().is_err());
        assert!(LosModel::ThreeGpp { d0: 0.1, d1: -1.0 }.validate().is_err());
    }

    #[test]
    fn three_gpp_is_flat_at_one_half_between_its_kinks() {
        let m = LosModel::three_gpp_default();
        let lo = m.crossing_distance(0.5).unwrap();
        let hi = m.last_distance_at_or_above(0.5).unwrap();
        let ln10 = std::f64::consts::LN_10;
        assert!((lo - 0.156 / ln10).abs() < 1e-12);
        assert!((hi - 0.030 * ln10).abs() < 1e-12);
        let mid = 0.5 * (lo + hi);
        assert!((m.p_los(mid) - 0.5).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_model() -> impl Strategy<Value = LosModel> {
            prop_oneof![
                (0.001f64..1.0).prop_map(|l| LosModel::QuadExp { l }),
                (0.01f64..0.5, 0.005f64..0.1).prop_map(|(d0, d1)| LosModel::ThreeGpp { d0, d1 }),
                (0.5f64..50.0, -1.0f64..1.0).prop_map(|(alpha, p)| LosModel::ExpLinear { alpha, p }),
                Just(LosModel::AlwaysLos),
                Just(LosModel::NeverLos),
            ]
        }

        proptest! {
            #[test]
            fn probability_in_unit_interval(m in any_model(), d in 0.0f64..20.0) {
                let p = m.los_probability(d).unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
                let q = m.nlos_probability(d).unwrap();
                prop_assert!((p + q - 1.0).abs() < 1e-12);
            }

            #[test]
            fn quad_exp_strictly_decreasing(l in 0.01f64..0.5, a in 1e-4f64..0.3, gap in 1e-4f64..0.1) {
                let m = LosModel::QuadExp { l };
                prop_assert!(m.p_los(a + gap) < m.p_los(a));
            }

            #[test]
            fn round_trip(r in 1e-4f64..10.0) {
                let p = PathLossParams::pico_3gpp();
                let back = p.equivalent_distance(p.inverse_equivalent_distance(r).unwrap()).unwrap();
                prop_assert!(((back - r) / r).abs() < 1e-12);
            }

            #[test]
            fn gain_matching(r in 1e-4f64..10.0) {
                let p = PathLossParams::pico_3gpp();
                let d_nl = p.inverse_equivalent_distance(r).unwrap();
                let g_nl = p.path_gain(d_nl, false).unwrap();
                let g_l = p.path_gain(r, true).unwrap();
                prop_assert!(((g_nl - g_l) / g_l).abs() < 1e-10);
            }
        }
    }
}
