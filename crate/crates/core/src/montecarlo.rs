//! Event-level simulator used as an independent check on the analytic
//! engine.
//!
//! Each trial drops a Poisson field of base stations on a disk around the
//! typical user, flags each one LOS with probability `p_L(d)`, attaches the
//! user to the strongest fading-free average power and draws exponential
//! fading for every link. Trial `i` draws from its own ChaCha stream keyed
//! by `(seed, i)`, so serial and parallel runs are bit-identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;

use crate::analytics::{Analyzer, NetworkConfig};
use crate::curve::{db_to_linear, Curve};
use crate::error::{Error, Result};

/// Half-width multiplier for a two-sided 95% normal interval.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    /// Radius chosen from density and LOS model; see [`Simulator::new`].
    Auto,
    /// Fixed radius, km.
    Radius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSpec {
    pub cfg: NetworkConfig,
    pub n_trials: usize,
    pub window: Window,
    /// Base stations closer than this (km) are moved out to it.
    pub min_distance_guard: f64,
    pub seed: u64,
    /// Redraw budget per trial for empty windows.
    pub max_redraws: u32,
}

impl SimSpec {
    pub fn new(cfg: NetworkConfig, n_trials: usize, seed: u64) -> Self {
        Self {
            cfg,
            n_trials,
            window: Window::Auto,
            min_distance_guard: 1e-6,
            seed,
            max_redraws: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        if self.n_trials < 1 {
            return Err(Error::config("n_trials must be at least 1"));
        }
        if let Window::Radius(r) = self.window {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::config("window radius must be positive"));
            }
        }
        if !(self.min_distance_guard > 0.0) {
            return Err(Error::config("min_distance_guard must be positive"));
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        let window = match self.window {
            Window::Auto => "auto".to_string(),
            Window::Radius(r) => format!("{r}"),
        };
        format!(
            "{} trials={} window={} guard={} seed={}",
            self.cfg.digest(),
            self.n_trials,
            window,
            self.min_distance_guard,
            self.seed
        )
    }
}

/// Result of one drop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    /// Linear SIR (SINR when noise is configured). Infinite when the serving
    /// base station is alone and there is no noise.
    pub sir: f64,
    /// Physical distance to the serving base station, km.
    pub serving_distance: f64,
    /// Serving distance in equivalent-LOS units, km; equals
    /// `serving_distance` when the serving link is LOS.
    pub equivalent_distance: f64,
    pub serving_is_los: bool,
    pub n_bs: usize,
    /// Empty windows redrawn before this drop.
    pub redraws: u32,
    /// Base stations moved out to the minimum-distance guard.
    pub guarded: u32,
}

impl TrialOutcome {
    /// No interferers and no noise: the SIR is unbounded and the trial is
    /// excluded from distributions.
    pub fn is_degenerate(&self) -> bool {
        !self.sir.is_finite()
    }
}

/// Homogeneous Poisson field of intensity `lambda` on the disk of the given
/// radius around the origin.
pub fn sample_ppp<R: Rng + ?Sized>(lambda: f64, radius: f64, rng: &mut R) -> Vec<[f64; 2]> {
    let mean = lambda * std::f64::consts::PI * radius * radius;
    let n = Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(0.0) as usize;
    (0..n)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let theta = std::f64::consts::TAU * rng.random::<f64>();
            [r * theta.cos(), r * theta.sin()]
        })
        .collect()
}

/// One base station as seen from the typical user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    /// km, after the minimum-distance guard.
    pub distance: f64,
    pub los: bool,
    /// Fading-free path gain.
    pub gain: f64,
    /// Path gain times the fading draw.
    pub received: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Drop {
    pub links: Vec<Link>,
    pub redraws: u32,
    pub guarded: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Association {
    /// Index of the serving link.
    pub serving: usize,
    pub sir: f64,
}

/// Serves the user from the link with the largest fading-free gain (lowest
/// index on ties) and computes its SIR, plus noise when `sigma2 > 0`.
/// `links` must be non-empty.
pub fn associate(links: &[Link], sigma2: f64) -> Association {
    let serving = links
        .iter()
        .enumerate()
        .fold(0, |best, (i, l)| if l.gain > links[best].gain { i } else { best });
    let interference: f64 = links
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != serving)
        .map(|(_, l)| l.received)
        .sum();
    let denom = interference + sigma2;
    let signal = links[serving].received;
    let sir = if denom > 0.0 { signal / denom } else { f64::INFINITY };
    Association { serving, sir }
}

/// Random stream of trial `index` under `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone)]
pub struct Simulator {
    spec: SimSpec,
    radius: f64,
    fading: Exp<f64>,
}

impl Simulator {
    /// Validates the spec and fixes the window radius.
    ///
    /// The automatic radius is the largest of `10/sqrt(lambda)`, five LOS
    /// length scales and three times the NLOS image of the 99.9th-percentile
    /// equivalent serving distance.
    pub fn new(spec: SimSpec) -> Result<Self> {
        spec.validate()?;
        let radius = match spec.window {
            Window::Radius(r) => r,
            Window::Auto => auto_radius(&spec.cfg)?,
        };
        let fading = Exp::new(spec.cfg.mu).map_err(|e| Error::config(e.to_string()))?;
        Ok(Self { spec, radius, fading })
    }

    pub fn spec(&self) -> &SimSpec {
        &self.spec
    }

    pub fn window_radius(&self) -> f64 {
        self.radius
    }

    /// Runs trial `index` on its own stream.
    pub fn run_indexed(&self, index: u64) -> Result<TrialOutcome> {
        self.run_trial(&mut trial_rng(self.spec.seed, index))
    }

    pub fn run_trial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TrialOutcome> {
        let drop = self.drop_links(rng)?;
        let a = associate(&drop.links, self.spec.cfg.sigma2);
        let serving = drop.links[a.serving];
        let equivalent_distance = if serving.los {
            serving.distance
        } else {
            self.spec.cfg.pathloss.eq_unchecked(serving.distance)
        };
        Ok(TrialOutcome {
            sir: a.sir,
            serving_distance: serving.distance,
            equivalent_distance,
            serving_is_los: serving.los,
            n_bs: drop.links.len(),
            redraws: drop.redraws,
            guarded: drop.guarded,
        })
    }

    /// One non-empty drop of the window: positions, LOS flags and fading.
    pub fn drop_links<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Drop> {
        let cfg = &self.spec.cfg;
        let mut redraws = 0u32;
        let points = loop {
            let p = sample_ppp(cfg.lambda, self.radius, rng);
            if !p.is_empty() {
                break p;
            }
            redraws += 1;
            if redraws > self.spec.max_redraws {
                return Err(Error::Simulation(format!(
                    "window of radius {} km stayed empty after {} redraws",
                    self.radius, self.spec.max_redraws
                )));
            }
        };

        let mut guarded = 0u32;
        let links = points
            .iter()
            .map(|&[x, y]| {
                let mut d = x.hypot(y);
                if d < self.spec.min_distance_guard {
                    d = self.spec.min_distance_guard;
                    guarded += 1;
                }
                let los = rng.random::<f64>() < cfg.los.p_los(d);
                let gain = cfg.pathloss.gain_unchecked(d, los);
                let fading = self.fading.sample(rng);
                Link {
                    distance: d,
                    los,
                    gain,
                    received: fading * gain,
                }
            })
            .collect();
        Ok(Drop {
            links,
            redraws,
            guarded,
        })
    }

    /// All trials, in trial-index order.
    pub fn run(&self) -> Result<SimRun> {
        let outcomes = (0..self.spec.n_trials as u64)
            .into_par_iter()
            .map(|i| self.run_indexed(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(SimRun {
            outcomes,
            radius: self.radius,
            digest: self.spec.digest(),
        })
    }
}

fn auto_radius(cfg: &NetworkConfig) -> Result<f64> {
    let mut r = 10.0 / cfg.lambda.sqrt();
    if let Some(l) = cfg.los.length_scale() {
        r = r.max(5.0 * l);
    }
    let q = Analyzer::new(*cfg)?.serving_distance_quantile(0.999)?;
    // far servers are NLOS and sit at the image of their equivalent distance
    Ok(r.max(3.0 * cfg.pathloss.inv_eq_unchecked(q)))
}

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    /// 95% half-width.
    pub half_width: f64,
    pub n: usize,
}

/// Outcomes of a full simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub outcomes: Vec<TrialOutcome>,
    pub radius: f64,
    pub digest: String,
}

impl SimRun {
    pub fn degenerate(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_degenerate()).count()
    }

    pub fn redraws(&self) -> u64 {
        self.outcomes.iter().map(|o| o.redraws as u64).sum()
    }

    pub fn guarded(&self) -> u64 {
        self.outcomes.iter().map(|o| o.guarded as u64).sum()
    }

    /// Finite SIR samples, sorted ascending.
    pub fn sorted_sir(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .outcomes
            .iter()
            .filter(|o| !o.is_degenerate())
            .map(|o| o.sir)
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Empirical `P[SIR <= threshold]` on a dB grid with 95% half-widths.
    pub fn sir_cdf(&self, thresholds_db: &[f64]) -> Result<Curve> {
        let sir = self.sorted_sir();
        if sir.is_empty() {
            return Err(Error::Simulation("every trial was degenerate".into()));
        }
        let n = sir.len() as f64;
        let (pts, hw): (Vec<_>, Vec<_>) = thresholds_db
            .iter()
            .map(|&t| {
                let y = db_to_linear(t);
                let p = sir.partition_point(|&s| s <= y) as f64 / n;
                ((t, p), Z95 * (p * (1.0 - p) / n).sqrt())
            })
            .unzip();
        Ok(Curve::new("threshold_db", "cdf", pts)?
            .with_half_width(hw)?
            .annotate("engine", "montecarlo")
            .annotate("spec", &self.digest)
            .annotate("window_km", self.radius)
            .annotate("samples", sir.len())
            .annotate("degenerate", self.degenerate())
            .annotate("redraws", self.redraws())
            .annotate("guarded", self.guarded()))
    }

    /// Sample mean of `log2(1 + SIR)` over non-degenerate trials.
    pub fn mean_se(&self) -> Result<Estimate> {
        let rates: Vec<f64> = self
            .outcomes
            .iter()
            .filter(|o| !o.is_degenerate())
            .map(|o| o.sir.ln_1p() / std::f64::consts::LN_2)
            .collect();
        estimate(&rates)
    }
}

/// Mean and standard error of a sample.
pub fn estimate(samples: &[f64]) -> Result<Estimate> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Simulation("need at least two samples for an estimate".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std_error = (var / n as f64).sqrt();
    Ok(Estimate {
        mean,
        std_error,
        half_width: Z95 * std_error,
        n,
    })
}

/// Empirical SIR CDF of `spec` on a dB grid.
pub fn estimate_sir_cdf(spec: &SimSpec, thresholds_db: &[f64]) -> Result<Curve> {
    Simulator::new(*spec)?.run()?.sir_cdf(thresholds_db)
}

/// Monte Carlo mean spectral efficiency of `spec`.
pub fn estimate_mean_se(spec: &SimSpec) -> Result<Estimate> {
    Simulator::new(*spec)?.run()?.mean_se()
}

/// Kolmogorov distance between the empirical distribution of `sorted`
/// (ascending) and the continuous CDF `cdf`.
pub fn kolmogorov_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::LosModel;

    fn spec(los: LosModel, lambda: f64, n: usize) -> SimSpec {
        SimSpec::new(NetworkConfig::new(lambda, los), n, 42)
    }

    #[test]
    fn same_seed_same_outcomes() {
        let s = spec(LosModel::quad_exp_default(), 100.0, 200);
        let a = Simulator::new(s).unwrap().run().unwrap();
        let b = Simulator::new(s).unwrap().run().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn serial_matches_parallel() {
        let s = spec(LosModel::three_gpp_default(), 50.0, 100);
        let sim = Simulator::new(s).unwrap();
        let par = sim.run().unwrap().outcomes;
        let ser: Vec<_> = (0..100).map(|i| sim.run_indexed(i).unwrap()).collect();
        assert_eq!(par, ser);
    }

    #[test]
    fn single_bs_is_degenerate() {
        let mut s = spec(LosModel::AlwaysLos, 1e-3, 50);
        s.window = Window::Radius(1.0);
        s.max_redraws = 1_000_000;
        let sim = Simulator::new(s).unwrap();
        let run = sim.run().unwrap();
        assert!(run.outcomes.iter().all(|o| o.n_bs >= 1));
        for o in &run.outcomes {
            if o.n_bs == 1 {
                assert!(o.is_degenerate() && o.sir == f64::INFINITY);
            }
        }
        assert!(run.degenerate() > 0);
        assert!(run.redraws() > 0);
    }

    #[test]
    fn empty_window_limit_is_an_error() {
        let mut s = spec(LosModel::AlwaysLos, 1e-6, 1);
        s.window = Window::Radius(0.01);
        s.max_redraws = 5;
        assert!(matches!(Simulator::new(s).unwrap().run(), Err(Error::Simulation(_))));
    }

    #[test]
    fn always_los_serves_nearest() {
        let s = spec(LosModel::AlwaysLos, 100.0, 1);
        let sim = Simulator::new(s).unwrap();
        for i in 0..200u64 {
            let o = sim.run_indexed(i).unwrap();
            // replay the stream to recover the nearest distance
            let mut rng = trial_rng(42, i);
            let pts = sample_ppp(100.0, sim.window_radius(), &mut rng);
            let nearest = pts.iter().map(|p| p[0].hypot(p[1])).fold(f64::INFINITY, f64::min);
            assert_eq!(o.serving_distance, nearest.max(1e-6));
            assert!(o.serving_is_los);
        }
    }

    #[test]
    fn guard_relocates_close_points() {
        let mut s = spec(LosModel::AlwaysLos, 100.0, 1);
        s.min_distance_guard = 0.5;
        s.window = Window::Radius(0.6);
        let sim = Simulator::new(s).unwrap();
        let o = sim.run_indexed(0).unwrap();
        assert!(o.guarded > 0);
        assert!(o.serving_distance >= 0.5);
    }

    #[test]
    fn cdf_is_monotone() {
        let s = spec(LosModel::quad_exp_default(), 100.0, 2000);
        let c = estimate_sir_cdf(&s, &crate::curve::default_threshold_grid_db()).unwrap();
        assert!(c.points.windows(2).all(|w| w[1].1 >= w[0].1));
        assert_eq!(c.half_width.as_ref().unwrap().len(), 101);
    }

    #[test]
    fn kolmogorov_of_exact_quantiles_is_small() {
        let n = 1000;
        let sorted: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = kolmogorov_distance(&sorted, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(LosModel::AlwaysLos, 100.0, 0);
        assert!(Simulator::new(s).is_err());
        s.n_trials = 1;
        s.window = Window::Radius(-1.0);
        assert!(Simulator::new(s).is_err());
    }
}
