//! Semi-analytical engine: serving-distance law, interference Laplace
//! functional, SIR CCDF, outage, mean spectral efficiency and ASE.
//!
//! The serving distance `r` is measured in equivalent-LOS units: an NLOS
//! base station at distance `d` is treated as a LOS one at `d_eq(d)`, and
//! the user attaches to the smallest equivalent distance. The LOS and NLOS
//! base stations are independent inhomogeneous Poisson processes with
//! intensities `lambda * p_L(d)` and `lambda * (1 - p_L(d))`, so
//!
//! ```text
//! P[r > R] = exp(-lambda * int_{B(0,R)} p_L) * exp(-lambda * int_{B(0,R_eq)} p_NL)
//! ```
//!
//! with `R_eq` the NLOS distance of equal gain. Interference is evaluated in
//! original NLOS coordinates: LOS interferers lie beyond `R`, NLOS ones
//! beyond `R_eq`.

use std::cell::RefCell;
use std::f64::consts::PI;

use rayon::prelude::*;

use crate::curve::{db_to_linear, Curve};
use crate::error::{Error, Result};
use crate::propagation::{LosModel, PathLossParams};
use crate::quadrature::{
    integrate_semi_infinite_scaled, integrate_with_breaks, Integral, QuadSpec,
};

/// Deployment and propagation parameters of the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    /// Base-station density, BS/km^2.
    pub lambda: f64,
    /// Rate of the exponential (Rayleigh power) fading.
    pub mu: f64,
    /// Noise power normalized by transmit power; 0 means interference limited.
    pub sigma2: f64,
    pub pathloss: PathLossParams,
    pub los: LosModel,
}

impl NetworkConfig {
    /// Interference-limited network with unit-mean fading and the pico-cell
    /// path-loss constants.
    pub fn new(lambda: f64, los: LosModel) -> Self {
        Self {
            lambda,
            mu: 1.0,
            sigma2: 0.0,
            pathloss: PathLossParams::pico_3gpp(),
            los,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_los(mut self, los: LosModel) -> Self {
        self.los = los;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda must be positive"));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::config("mu must be positive"));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::config("sigma2 must be non-negative"));
        }
        self.pathloss.validate()?;
        self.los.validate()
    }

    /// Stable one-line description, used in provenance records.
    pub fn digest(&self) -> String {
        let p = &self.pathloss;
        format!(
            "lambda={} mu={} sigma2={} k_los_db={} beta_los={} k_nlos_db={} beta_nlos={} los={}",
            self.lambda, self.mu, self.sigma2, p.k_los_db, p.beta_los, p.k_nlos_db, p.beta_nlos, self.los
        )
    }
}

/// Quadrature settings for the analytic engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticOptions {
    /// Interference and void-probability integrals.
    pub inner: QuadSpec,
    /// Integrals over the serving distance.
    pub outer: QuadSpec,
    /// Integral over rate in the spectral-efficiency evaluation.
    pub rate: QuadSpec,
    /// Outer integrals stop where `P[r > R]` falls below this.
    pub tail_cutoff: f64,
}

impl Default for AnalyticOptions {
    fn default() -> Self {
        Self {
            inner: QuadSpec::new(1e-8, 1e-12, 400),
            outer: QuadSpec::new(1e-8, 1e-12, 2000),
            rate: QuadSpec::new(1e-7, 1e-10, 400),
            tail_cutoff: 1e-9,
        }
    }
}

/// `exp(-x)` underflows to zero for `x` above this.
const UNDERFLOW_EXPONENT: f64 = 746.0;
const LOS_NEGLIGIBLE: f64 = 1e-20;

/// Which propagation branch an interference or void integral covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Los,
    Nlos,
}

/// Analytic evaluator bound to one validated configuration.
#[derive(Debug, Clone)]
pub struct Analyzer {
    cfg: NetworkConfig,
    opts: AnalyticOptions,
    r_max: f64,
    outer_breaks: Vec<f64>,
}

impl Analyzer {
    pub fn new(cfg: NetworkConfig) -> Result<Self> {
        Self::with_options(cfg, AnalyticOptions::default())
    }

    pub fn with_options(cfg: NetworkConfig, opts: AnalyticOptions) -> Result<Self> {
        cfg.validate()?;
        opts.inner.validate()?;
        opts.outer.validate()?;
        opts.rate.validate()?;
        if !(opts.tail_cutoff > 0.0 && opts.tail_cutoff < 1.0) {
            return Err(Error::config("tail_cutoff must lie in (0, 1)"));
        }
        let mut a = Self {
            cfg,
            opts,
            r_max: 0.0,
            outer_breaks: Vec::new(),
        };
        a.r_max = a.find_r_max()?;
        a.outer_breaks = a.build_outer_breaks();
        Ok(a)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn options(&self) -> &AnalyticOptions {
        &self.opts
    }

    /// Truncation point of the outer serving-distance integrals.
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    fn find_r_max(&self) -> Result<f64> {
        let mut r = 0.1 / self.cfg.lambda.sqrt();
        for _ in 0..200 {
            if self.serving_distance_tail(r)? < self.opts.tail_cutoff {
                return Ok(r);
            }
            r *= 2.0;
        }
        Err(Error::config("serving-distance tail does not vanish"))
    }

    // Geometric panel edges from r_max down to well below the typical
    // nearest-neighbour distance, plus the images of the LOS-model kinks.
    fn build_outer_breaks(&self) -> Vec<f64> {
        let pl = &self.cfg.pathloss;
        let floor = 1e-3 / self.cfg.lambda.sqrt();
        let mut b = Vec::new();
        let mut r = self.r_max / 2.0;
        while r > floor {
            b.push(r);
            r /= 2.0;
        }
        for k in self.cfg.los.breakpoints() {
            b.push(k);
            b.push(pl.eq_unchecked(k));
        }
        b.retain(|&x| x > 0.0 && x < self.r_max);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    fn check_r(r: f64) -> Result<()> {
        if r >= 0.0 && r.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "serving distance",
                value: r,
            })
        }
    }

    /// `P[r > R]`. Uses the closed form when one exists for the LOS model,
    /// the quadrature path otherwise.
    pub fn serving_distance_tail(&self, r: f64) -> Result<f64> {
        match self.cfg.los {
            LosModel::QuadExp { .. } | LosModel::AlwaysLos | LosModel::NeverLos => self.tail_closed_form(r),
            _ => self.tail_numeric(r),
        }
    }

    /// Serving distance below which a fraction `q` of users attach.
    pub fn serving_distance_quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain {
                what: "quantile level",
                value: q,
            });
        }
        let target = 1.0 - q;
        let (mut lo, mut hi) = (0.0, self.r_max);
        while self.serving_distance_tail(hi)? > target {
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.serving_distance_tail(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Density of the serving distance, 1/km.
    pub fn serving_distance_pdf(&self, r: f64) -> Result<f64> {
        match self.cfg.los {
            LosModel::QuadExp { .. } | LosModel::AlwaysLos | LosModel::NeverLos => self.pdf_closed_form(r),
            _ => self.pdf_numeric(r),
        }
    }

    /// Closed-form `P[r > R]`, available for the quadratic-exponential and
    /// the two constant LOS models.
    pub fn tail_closed_form(&self, r: f64) -> Result<f64> {
        Self::check_r(r)?;
        Ok((-self.void_exponent_closed(r)?).exp())
    }

    fn void_exponent_closed(&self, r: f64) -> Result<f64> {
        let lambda = self.cfg.lambda;
        let r_eq = self.cfg.pathloss.inv_eq_unchecked(r);
        match self.cfg.los {
            // f1 f2 f3 in log form: pi lambda [L^2 (1 - e^{-R^2/L^2}) + R_eq^2 - L^2 (1 - e^{-R_eq^2/L^2})]
            LosModel::QuadExp { l } => {
                let l2 = l * l;
                let los = -l2 * (-(r * r) / l2).exp_m1();
                let nlos = r_eq * r_eq + l2 * (-(r_eq * r_eq) / l2).exp_m1();
                Ok(PI * lambda * (los + nlos))
            }
            LosModel::AlwaysLos => Ok(PI * lambda * r * r),
            LosModel::NeverLos => Ok(PI * lambda * r_eq * r_eq),
            _ => Err(Error::config(format!("no closed-form serving-distance law for {}", self.cfg.los))),
        }
    }

    /// Closed-form density: `-(f1' f2 f3 + f1 f2' f3 + f1 f2 f3')`.
    pub fn pdf_closed_form(&self, r: f64) -> Result<f64> {
        self.check_pdf_r(r)?;
        let tail = self.tail_closed_form(r)?;
        Ok(tail * self.hazard(r))
    }

    /// `P[r > R]` from quadrature of the LOS and NLOS intensity measures.
    pub fn tail_numeric(&self, r: f64) -> Result<f64> {
        Self::check_r(r)?;
        let r_eq = self.cfg.pathloss.inv_eq_unchecked(r);
        let e = self.void_measure(Branch::Los, r)? + self.void_measure(Branch::Nlos, r_eq)?;
        Ok((-e).exp())
    }

    /// Density from the quadrature tail times the exact hazard rate.
    pub fn pdf_numeric(&self, r: f64) -> Result<f64> {
        self.check_pdf_r(r)?;
        Ok(self.tail_numeric(r)? * self.hazard(r))
    }

    fn check_pdf_r(&self, r: f64) -> Result<()> {
        if r > 0.0 && r.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "serving distance for the density",
                value: r,
            })
        }
    }

    /// `-d/dR log P[r > R] = 2 pi lambda [R p_L(R) + R_eq R_eq' p_NL(R_eq)]`.
    fn hazard(&self, r: f64) -> f64 {
        let pl = &self.cfg.pathloss;
        let r_eq = pl.inv_eq_unchecked(r);
        // R_eq R_eq' = beta_eq R_eq^2 / R
        let jac = pl.beta_eq() * r_eq * r_eq / r;
        2.0 * PI * self.cfg.lambda * (r * self.cfg.los.p_los(r) + jac * self.cfg.los.p_nlos(r_eq))
    }

    /// `lambda * int_{B(0,x)} p_branch`, by quadrature.
    fn void_measure(&self, branch: Branch, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        let los = self.cfg.los;
        let scale = 2.0 * PI * self.cfg.lambda;
        let f = |v: f64| {
            let p = match branch {
                Branch::Los => los.p_los(v),
                Branch::Nlos => los.p_nlos(v),
            };
            scale * v * p
        };
        // past the cut the LOS probability is negligible and p_NL = 1
        let cut = los.los_negligible_beyond(LOS_NEGLIGIBLE).unwrap_or(f64::INFINITY);
        let head = integrate_with_breaks(f, 0.0, x.min(cut), &los.breakpoints(), &self.opts.inner)?.value;
        let rest = match branch {
            Branch::Nlos if x > cut => 0.5 * scale * (x - cut) * (x + cut),
            _ => 0.0,
        };
        Ok(head + rest)
    }

    /// Laplace transform of the interference beyond a serving distance `R`,
    /// `E[exp(-s I_R)]`. `s` is in inverse linear-gain units.
    pub fn laplace_interference(&self, s: f64, r: f64) -> Result<f64> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::Domain {
                what: "Laplace argument",
                value: s,
            });
        }
        Self::check_r(r)?;
        if s == 0.0 {
            return Ok(1.0);
        }
        let e = self.interference_exponent(s, r)?;
        Ok((-e).exp())
    }

    /// `2 pi lambda` times the two PGFL integrals.
    fn interference_exponent(&self, s: f64, r: f64) -> Result<f64> {
        let pl = &self.cfg.pathloss;
        let r_eq = pl.inv_eq_unchecked(r);
        let los = self.branch_integral(Branch::Los, s, r)?;
        let nlos = self.branch_integral(Branch::Nlos, s, r_eq)?;
        Ok(los + nlos)
    }

    fn branch_integral(&self, branch: Branch, s: f64, lower: f64) -> Result<f64> {
        let pl = &self.cfg.pathloss;
        let los = self.cfg.los;
        let (k, beta) = match branch {
            Branch::Los => (pl.k_los(), pl.beta_los),
            Branch::Nlos => (pl.k_nlos(), pl.beta_nlos),
        };
        let constant = los.constant_probability().map(|p| match branch {
            Branch::Los => p,
            Branch::Nlos => 1.0 - p,
        });
        if constant == Some(0.0) {
            return Ok(0.0);
        }
        let scale = 2.0 * PI * self.cfg.lambda;
        // kernel s K v^-b / (s K v^-b + mu) = 1 / (1 + c v^b)
        let ln_c = (self.cfg.mu / (s * k)).ln();
        let kernel = move |v: f64| v / (1.0 + (ln_c + beta * v.ln()).exp());

        if let Some(p) = constant {
            if beta <= 2.0 {
                return Ok(f64::INFINITY);
            }
            return Ok(scale * p * power_law_tail_integral(kernel, ln_c, beta, lower, &self.opts.inner)?);
        }

        let f = |v: f64| {
            let p = match branch {
                Branch::Los => los.p_los(v),
                Branch::Nlos => los.p_nlos(v),
            };
            if p == 0.0 {
                0.0
            } else {
                scale * p * kernel(v)
            }
        };
        if branch == Branch::Nlos && beta <= 2.0 {
            return Ok(f64::INFINITY);
        }
        // the kernel turns from ~v into a power-law tail where c v^beta = 1
        let knee = (-ln_c / beta).exp();
        let mut breaks = los.breakpoints();
        breaks.push(knee);
        // past this point LOS is negligible: the LOS branch ends and the NLOS
        // branch has probability one
        if let Some(cut) = los.los_negligible_beyond(LOS_NEGLIGIBLE) {
            return match branch {
                Branch::Los if cut <= lower => Ok(0.0),
                Branch::Los => Ok(integrate_with_breaks(f, lower, cut, &breaks, &self.opts.inner)?.value),
                Branch::Nlos => {
                    let start = cut.max(lower).max(((10f64.ln() - ln_c) / beta).exp());
                    let head = if start > lower {
                        integrate_with_breaks(f, lower, start, &breaks, &self.opts.inner)?.value
                    } else {
                        0.0
                    };
                    Ok(head + scale * power_law_series(ln_c, beta, start))
                }
            };
        }
        let width = if lower > 0.0 { lower.max(knee) } else { knee };
        match integrate_semi_infinite_scaled(f, lower, width, &breaks, &self.opts.inner) {
            Ok(i) => Ok(i.value),
            // exp(-x) is exactly 0 in f64 anyway
            Err(Error::Convergence { value, error, .. }) if value - error > UNDERFLOW_EXPONENT => Ok(value),
            Err(e) => Err(e),
        }
    }

    /// `P[SIR > y | r = R]`, including the noise factor.
    pub fn conditional_ccdf(&self, y: f64, r: f64) -> Result<f64> {
        let s = self.laplace_argument(y, r);
        let noise = (-s * self.cfg.sigma2).exp();
        if noise == 0.0 {
            return Ok(0.0);
        }
        Ok(noise * self.laplace_interference(s, r)?)
    }

    /// `mu y R^beta_L / K_L`.
    pub fn laplace_argument(&self, y: f64, r: f64) -> f64 {
        let pl = &self.cfg.pathloss;
        self.cfg.mu * y * (pl.k_los_db / 10.0 * std::f64::consts::LN_10 + pl.beta_los * r.ln()).exp()
    }

    /// Coverage probability `P[SIR > y]` (SINR when `sigma2 > 0`).
    pub fn sir_ccdf(&self, y: f64) -> Result<f64> {
        Ok(self.sir_ccdf_integral(y)?.value.clamp(0.0, 1.0))
    }

    /// [`sir_ccdf`](Self::sir_ccdf) with its error estimate, truncation
    /// included.
    pub fn sir_ccdf_integral(&self, y: f64) -> Result<Integral> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::Domain {
                what: "SIR threshold",
                value: y,
            });
        }
        let failure = RefCell::new(None);
        let g = |r: f64| {
            if r == 0.0 {
                return 0.0;
            }
            let pdf = match self.serving_distance_pdf(r) {
                Ok(v) => v,
                Err(e) => return record(&failure, e),
            };
            if pdf == 0.0 {
                return 0.0;
            }
            match self.conditional_ccdf(y, r) {
                Ok(c) => c * pdf,
                Err(e) => record(&failure, e),
            }
        };
        let res = integrate_with_breaks(g, 0.0, self.r_max, &self.outer_breaks, &self.opts.outer);
        finish(res, failure, self.opts.tail_cutoff)
    }

    /// `P[SIR <= 10^(threshold_db/10)]`.
    pub fn outage_probability(&self, threshold_db: f64) -> Result<f64> {
        if !threshold_db.is_finite() {
            return Err(Error::Domain {
                what: "outage threshold (dB)",
                value: threshold_db,
            });
        }
        Ok(1.0 - self.sir_ccdf(db_to_linear(threshold_db))?)
    }

    /// Mean spectral efficiency `E[log2(1 + SIR)]`, bits/s/Hz.
    pub fn mean_spectral_efficiency(&self) -> Result<f64> {
        Ok(self.mean_spectral_efficiency_integral()?.value)
    }

    /// Rate integral evaluated serving-distance outermost: for each `R` the
    /// conditional rate `int_0^inf P[log2(1+SIR) > u | R] du` is integrated
    /// against the serving-distance density.
    pub fn mean_spectral_efficiency_integral(&self) -> Result<Integral> {
        let failure = RefCell::new(None);
        let rate_spec = self.opts.rate;
        let g = |r: f64| {
            if r == 0.0 {
                return 0.0;
            }
            let pdf = match self.serving_distance_pdf(r) {
                Ok(v) => v,
                Err(e) => return record(&failure, e),
            };
            if pdf == 0.0 {
                return 0.0;
            }
            let inner_failure = RefCell::new(None);
            let h = |u: f64| {
                let y = u.exp2() - 1.0;
                if y == 0.0 {
                    return 1.0;
                }
                if !y.is_finite() {
                    return 0.0;
                }
                match self.conditional_ccdf(y, r) {
                    Ok(c) => c,
                    Err(e) => record(&inner_failure, e),
                }
            };
            let res = integrate_semi_infinite_scaled(h, 0.0, 2.0, &[], &rate_spec);
            match finish(res, inner_failure, 0.0) {
                Ok(i) => i.value * pdf,
                Err(e) => record(&failure, e),
            }
        };
        let res = integrate_with_breaks(g, 0.0, self.r_max, &self.outer_breaks, &self.opts.outer);
        finish(res, failure, self.opts.tail_cutoff)
    }

    /// Area spectral efficiency `lambda * C`, bits/s/Hz/km^2.
    pub fn area_spectral_efficiency(&self) -> Result<f64> {
        Ok(self.cfg.lambda * self.mean_spectral_efficiency()?)
    }

    /// SIR CCDF on a dB grid, evaluated in parallel.
    pub fn sir_ccdf_curve(&self, thresholds_db: &[f64]) -> Result<Curve> {
        let ys: Vec<f64> = thresholds_db
            .par_iter()
            .map(|&t| self.sir_ccdf(db_to_linear(t)))
            .collect::<Result<_>>()?;
        let pts = thresholds_db.iter().copied().zip(ys).collect();
        Ok(Curve::new("threshold_db", "ccdf", pts)?
            .annotate("config", self.cfg.digest())
            .annotate("engine", "analytic")
            .annotate("outer_rel_tol", self.opts.outer.rel_tol)
            .annotate("inner_rel_tol", self.opts.inner.rel_tol))
    }
}

/// `int_lower^inf v / (1 + c v^beta) dv` for `beta > 2`: quadrature up to
/// where `c v^beta = 10`, then the convergent series
/// `V^2 sum_k (-1)^k w^-(k+1) / (beta (k+1) - 2)` with `w = c V^beta`.
fn power_law_tail_integral(
    kernel: impl Fn(f64) -> f64,
    ln_c: f64,
    beta: f64,
    lower: f64,
    spec: &QuadSpec,
) -> Result<f64> {
    let knee = ((10f64.ln() - ln_c) / beta).exp();
    let (head, start) = if knee > lower {
        (integrate_with_breaks(&kernel, lower, knee, &[], spec)?.value, knee)
    } else {
        (0.0, lower)
    };
    Ok(head + power_law_series(ln_c, beta, start))
}

/// `int_V^inf v / (1 + c v^beta) dv` by its expansion in `1 / (c V^beta)`;
/// needs `c V^beta > 1`.
fn power_law_series(ln_c: f64, beta: f64, start: f64) -> f64 {
    if start == 0.0 {
        return 0.0;
    }
    let w = (ln_c + beta * start.ln()).exp();
    let mut sum = 0.0;
    let mut wk = 1.0;
    for k in 0..200 {
        wk /= w;
        let term = wk / (beta * (k + 1) as f64 - 2.0);
        sum += if k % 2 == 0 { term } else { -term };
        if term < 1e-17 * sum.abs() {
            break;
        }
    }
    start * start * sum
}

fn record(slot: &RefCell<Option<Error>>, e: Error) -> f64 {
    slot.borrow_mut().get_or_insert(e);
    f64::NAN
}

fn finish(res: Result<Integral>, failure: RefCell<Option<Error>>, truncation: f64) -> Result<Integral> {
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let mut i = res?;
    i.error += truncation;
    Ok(i)
}
