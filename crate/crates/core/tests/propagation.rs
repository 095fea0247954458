use cellgeom::{LosModel, PathLossParams};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn pico_constants_equivalent_exponent_and_scale() {
    let p = PathLossParams::pico_3gpp();
    assert!(rel(p.beta_eq(), 2.09 / 3.75) < 1e-15);
    // K_eq = (K_NL / K_L)^(1 / beta_NL) with K = 10^(-dB/10)
    let oracle = 10f64.powf(-(145.4 - 103.8) / 10.0 / 3.75);
    assert!(rel(p.k_eq(), oracle) < 1e-12);
}

#[test]
fn hundred_meters_los_matches_about_21_meters_nlos() {
    let p = PathLossParams::pico_3gpp();
    let d = p.inverse_equivalent_distance(0.1).unwrap();
    assert!((d - 0.0215).abs() < 5e-4, "{d}");
    let back = p.equivalent_distance(d).unwrap();
    assert!(rel(back, 0.1) < 1e-12);
    assert_eq!(p.inverse_equivalent_distance(0.0).unwrap(), 0.0);
    assert_eq!(p.equivalent_distance(0.0).unwrap(), 0.0);
    for x in [0.01, 0.1, 1.0] {
        let r = p.equivalent_distance(p.inverse_equivalent_distance(x).unwrap()).unwrap();
        assert!(rel(r, x) < 1e-12);
    }
}

#[test]
fn gain_matches_at_the_equivalent_distance() {
    let p = PathLossParams::pico_3gpp();
    for r in [1e-4, 1e-3, 0.05, 0.5, 10.0] {
        let d = p.inverse_equivalent_distance(r).unwrap();
        let g_los = p.path_gain(r, true).unwrap();
        let g_nlos = p.path_gain(d, false).unwrap();
        assert!(rel(g_nlos, g_los) < 1e-10, "R={r}");
        // independent form of the LOS gain: 103.8 dB + 20.9 dB/decade
        let db = 103.8 + 20.9 * r.log10();
        assert!(rel(g_los, 10f64.powf(-db / 10.0)) < 1e-12);
    }
    assert!(p.path_gain(0.0, true).is_err());
    assert!(p.path_gain(-1.0, false).is_err());
}

#[test]
fn quadexp_half_point_sits_where_3gpp_is_one_half() {
    // 3GPP: 0.5 on the whole segment [d0/ln10, d1 ln10]; the quadratic
    // exponential crosses 0.5 at L sqrt(ln 2)
    let q = LosModel::quad_exp_default();
    let g = LosModel::three_gpp_default();
    let dq = q.crossing_distance(0.5).unwrap();
    assert!(rel(dq, 0.0825 * 2f64.ln().sqrt()) < 1e-9);
    let lo = g.crossing_distance(0.5).unwrap();
    let hi = g.last_distance_at_or_above(0.5).unwrap();
    assert!(rel(lo, 0.156 / std::f64::consts::LN_10) < 1e-9);
    assert!(rel(hi, 0.030 * std::f64::consts::LN_10) < 1e-9);
    assert!(lo <= dq && dq <= hi);
    assert!((g.los_probability(dq).unwrap() - 0.5).abs() < 1e-9);
    assert!((q.los_probability(dq).unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn three_gpp_reference_values() {
    let g = LosModel::three_gpp_default();
    assert_eq!(g.los_probability(0.0).unwrap(), 1.0);
    // near field: 0.5 - 0 + min(5 e^{-d/d1}, 0.5) with e^{-d0/d} negligible
    let d = 0.010;
    let oracle = 0.5 - 5.0 * (-0.156f64 / d).exp() + (5.0 * (-d / 0.030f64).exp()).min(0.5);
    assert!((g.los_probability(d).unwrap() - oracle).abs() < 1e-15);
    // far field: only the second term survives
    let d = 0.3;
    assert!((g.los_probability(d).unwrap() - 5.0 * (-d / 0.030f64).exp()).abs() < 1e-15);
}

#[test]
fn explinear_is_clamped_and_uses_per_meter_alpha() {
    let m = LosModel::exp_linear_per_meter(8.59e-3, 0.101);
    let kink = 0.101 / 8.59;
    for d in [0.0, 0.5 * kink, kink] {
        assert_eq!(m.los_probability(d).unwrap(), 1.0);
    }
    let d = 0.2;
    let oracle = (-(8.59e-3 * 200.0 - 0.101f64)).exp();
    assert!(rel(m.los_probability(d).unwrap(), oracle) < 1e-12);
    assert!(m.los_probability(0.5).unwrap() < m.los_probability(0.2).unwrap());
}

#[test]
fn constant_models() {
    for d in [0.0, 0.01, 1.0, 100.0] {
        assert_eq!(LosModel::AlwaysLos.los_probability(d).unwrap(), 1.0);
        assert_eq!(LosModel::NeverLos.los_probability(d).unwrap(), 0.0);
    }
    assert!(LosModel::AlwaysLos.crossing_distance(0.5).is_none());
}

#[test]
fn invalid_models_rejected() {
    assert!(LosModel::QuadExp { l: 0.0 }.validate().is_err());
    assert!(LosModel::QuadExp { l: f64::NAN }.validate().is_err());
    assert!(LosModel::ThreeGpp { d0: -1.0, d1: 0.03 }.validate().is_err());
    assert!(LosModel::quad_exp_default().los_probability(-1.0).is_err());
}
