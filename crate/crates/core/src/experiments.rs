//! Parameter sweeps, optimum search and analytic-versus-simulation
//! validation.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::analytics::{AnalyticOptions, Analyzer, NetworkConfig};
use crate::curve::{db_to_linear, linspace, logspace};
use crate::error::{Error, Result};
use crate::montecarlo::{kolmogorov_distance, SimRun, SimSpec, Simulator, Window, Z95};
use crate::propagation::LosModel;
use crate::quadrature::QuadSpec;

/// Outage thresholds used when a bare `outage` metric is requested.
pub const DEFAULT_OUTAGE_THRESHOLDS_DB: [f64; 2] = [-10.0, -5.0];

/// Density grid used when none is given: 17 points from 1 to 10^4 BS/km^2.
pub fn default_density_grid() -> Vec<f64> {
    logspace(1.0, 1e4, 17)
}

/// Quantity evaluated at each sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    /// `P[SIR > threshold]`.
    Ccdf { threshold_db: f64 },
    /// `P[SIR <= threshold]`.
    Outage { threshold_db: f64 },
    /// Mean spectral efficiency, bit/s/Hz.
    Se,
    /// Area spectral efficiency, bit/s/Hz/km^2.
    Ase,
}

impl Metric {
    /// Parses a comma-separated metric list. A bare `outage` expands to the
    /// default thresholds.
    pub fn parse_list(s: &str) -> Result<Vec<Metric>> {
        let mut out = Vec::new();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            if tok.eq_ignore_ascii_case("outage") {
                out.extend(
                    DEFAULT_OUTAGE_THRESHOLDS_DB
                        .iter()
                        .map(|&threshold_db| Metric::Outage { threshold_db }),
                );
            } else {
                out.push(tok.parse()?);
            }
        }
        Ok(out)
    }

    /// Whether larger values are better.
    pub fn maximize(&self) -> bool {
        !matches!(self, Metric::Outage { .. })
    }

    pub fn evaluate(&self, an: &Analyzer) -> Result<f64> {
        match *self {
            Metric::Ccdf { threshold_db } => an.sir_ccdf(db_to_linear(threshold_db)),
            Metric::Outage { threshold_db } => an.outage_probability(threshold_db),
            Metric::Se => an.mean_spectral_efficiency(),
            Metric::Ase => an.area_spectral_efficiency(),
        }
    }

    /// Monte Carlo estimate and its 95% half-width; `lambda` scales the
    /// area metric.
    pub fn estimate(&self, run: &SimRun, lambda: f64) -> Result<(f64, f64)> {
        match *self {
            Metric::Ccdf { threshold_db } => {
                let c = run.sir_cdf(&[threshold_db])?;
                Ok((1.0 - c.points[0].1, half_width(&c)))
            }
            Metric::Outage { threshold_db } => {
                let c = run.sir_cdf(&[threshold_db])?;
                Ok((c.points[0].1, half_width(&c)))
            }
            Metric::Se => {
                let e = run.mean_se()?;
                Ok((e.mean, e.half_width))
            }
            Metric::Ase => {
                let e = run.mean_se()?;
                Ok((lambda * e.mean, lambda * e.half_width))
            }
        }
    }
}

fn half_width(c: &crate::curve::Curve) -> f64 {
    c.half_width.as_ref().map_or(f64::NAN, |h| h[0])
}

fn parse_db(s: &str) -> Option<f64> {
    let s = s.trim();
    let s = s
        .strip_suffix("dB")
        .or_else(|| s.strip_suffix("db"))
        .or_else(|| s.strip_suffix("DB"))
        .unwrap_or(s);
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(tok: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown metric '{tok}' (expected se, ase, ccdf[@XdB] or outage@XdB)"));
        let t = tok.trim();
        let lower = t.to_ascii_lowercase();
        match lower.as_str() {
            "se" => return Ok(Metric::Se),
            "ase" => return Ok(Metric::Ase),
            "ccdf" => return Ok(Metric::Ccdf { threshold_db: 0.0 }),
            _ => {}
        }
        let (name, thr) = t.split_once('@').ok_or_else(bad)?;
        let threshold_db = parse_db(thr).ok_or_else(bad)?;
        match name.to_ascii_lowercase().as_str() {
            "ccdf" => Ok(Metric::Ccdf { threshold_db }),
            "outage" => Ok(Metric::Outage { threshold_db }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Ccdf { threshold_db } => write!(f, "ccdf@{threshold_db}dB"),
            Metric::Outage { threshold_db } => write!(f, "outage@{threshold_db}dB"),
            Metric::Se => f.write_str("se"),
            Metric::Ase => f.write_str("ase"),
        }
    }
}

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    /// Base-station density; one row per value.
    Lambda,
    /// LOS length scale of the quadratic-exponential model; one series per
    /// value, each evaluated over the density grid.
    LosScale,
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "lambda" | "density" => Ok(Variable::Lambda),
            "L" | "l" => Ok(Variable::LosScale),
            other => Err(Error::Parse(format!("unknown sweep variable '{other}' (expected lambda or L)"))),
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variable::Lambda => "lambda",
            Variable::LosScale => "L",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Analytic,
    MonteCarlo,
    Both,
}

impl Engine {
    pub fn analytic(self) -> bool {
        self != Engine::MonteCarlo
    }

    pub fn montecarlo(self) -> bool {
        self != Engine::Analytic
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "analytic" => Ok(Engine::Analytic),
            "montecarlo" | "mc" => Ok(Engine::MonteCarlo),
            "both" => Ok(Engine::Both),
            other => Err(Error::Parse(format!(
                "unknown engine '{other}' (expected analytic, montecarlo or both)"
            ))),
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Analytic => "analytic",
            Engine::MonteCarlo => "montecarlo",
            Engine::Both => "both",
        })
    }
}

/// Simulation settings applied to every Monte Carlo cell of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub n_trials: usize,
    pub seed: u64,
    pub window: Window,
    pub min_distance_guard: f64,
    pub max_redraws: u32,
}

impl Default for McSettings {
    fn default() -> Self {
        let s = SimSpec::new(NetworkConfig::new(1.0, LosModel::AlwaysLos), 10_000, 0);
        Self {
            n_trials: s.n_trials,
            seed: s.seed,
            window: s.window,
            min_distance_guard: s.min_distance_guard,
            max_redraws: s.max_redraws,
        }
    }
}

impl McSettings {
    pub fn digest(&self) -> String {
        let window = match self.window {
            Window::Auto => "auto".to_string(),
            Window::Radius(r) => fmt_num(r),
        };
        format!(
            "trials={} window={} guard={} seed={} max_redraws={}",
            self.n_trials, window, self.min_distance_guard, self.seed, self.max_redraws
        )
    }

    pub fn spec(&self, cfg: NetworkConfig) -> SimSpec {
        SimSpec {
            cfg,
            n_trials: self.n_trials,
            window: self.window,
            min_distance_guard: self.min_distance_guard,
            seed: self.seed,
            max_redraws: self.max_redraws,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: NetworkConfig,
    pub variable: Variable,
    /// Swept values: densities in BS/km^2 or length scales in km.
    pub values: Vec<f64>,
    /// Density grid of each series when sweeping `L`.
    pub densities: Vec<f64>,
    pub metrics: Vec<Metric>,
    pub engine: Engine,
    pub mc: McSettings,
    pub options: AnalyticOptions,
}

impl SweepSpec {
    pub fn new(base: NetworkConfig, variable: Variable, values: Vec<f64>, metrics: Vec<Metric>) -> Self {
        Self {
            base,
            variable,
            values,
            densities: default_density_grid(),
            metrics,
            engine: Engine::Analytic,
            mc: McSettings::default(),
            options: AnalyticOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.metrics.is_empty() {
            return Err(Error::config("at least one metric is required"));
        }
        for m in &self.metrics {
            if let Metric::Ccdf { threshold_db } | Metric::Outage { threshold_db } = m {
                if !threshold_db.is_finite() {
                    return Err(Error::config("thresholds must be finite"));
                }
            }
        }
        check_grid("values", &self.values)?;
        match self.variable {
            Variable::Lambda => {
                if self.values.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::config("lambda must be positive"));
                }
            }
            Variable::LosScale => {
                if !matches!(self.base.los, LosModel::QuadExp { .. }) {
                    return Err(Error::config("sweeping L requires the quadexp LOS model"));
                }
                if self.values.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::config("L must be positive"));
                }
                check_grid("densities", &self.densities)?;
                if self.densities.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::config("lambda must be positive"));
                }
            }
        }
        // catches invalid path-loss or fading settings once, up front
        self.cells().try_for_each(|(_, c)| c.validate())?;
        if self.engine.montecarlo() {
            self.mc.spec(self.base).validate()?;
        }
        Ok(())
    }

    /// Row coordinate: the swept densities, or the density grid when
    /// sweeping `L`.
    pub fn rows(&self) -> &[f64] {
        match self.variable {
            Variable::Lambda => &self.values,
            Variable::LosScale => &self.densities,
        }
    }

    /// Number of series: one per `L` value, or a single one.
    pub fn series(&self) -> usize {
        match self.variable {
            Variable::Lambda => 1,
            Variable::LosScale => self.values.len(),
        }
    }

    fn series_label(&self, s: usize) -> Option<String> {
        match self.variable {
            Variable::Lambda => None,
            Variable::LosScale => Some(format!("L={}m", fmt_num(self.values[s] * 1e3))),
        }
    }

    /// `((row, series), config)` for every cell in table order.
    fn cells(&self) -> impl Iterator<Item = ((usize, usize), NetworkConfig)> + '_ {
        let rows = self.rows().len();
        (0..rows).flat_map(move |r| {
            (0..self.series()).map(move |s| {
                let lambda = self.rows()[r];
                let cfg = match self.variable {
                    Variable::Lambda => self.base.with_lambda(lambda),
                    Variable::LosScale => self
                        .base
                        .with_lambda(lambda)
                        .with_los(LosModel::QuadExp { l: self.values[s] }),
                };
                ((r, s), cfg)
            })
        })
    }

    pub fn digest(&self) -> String {
        let values: Vec<String> = self.values.iter().map(|v| fmt_num(*v)).collect();
        let metrics: Vec<String> = self.metrics.iter().map(|m| m.to_string()).collect();
        let mut s = format!(
            "var={} values={} metrics={} engine={}",
            self.variable,
            values.join(","),
            metrics.join(","),
            self.engine
        );
        if self.variable == Variable::LosScale {
            let d: Vec<String> = self.densities.iter().map(|v| fmt_num(*v)).collect();
            s.push_str(&format!(" densities={}", d.join(",")));
        }
        s
    }
}

fn check_grid(what: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::config(format!("{what} must not be empty")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::config(format!("{what} must be finite")));
    }
    if v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config(format!("{what} must be strictly increasing")));
    }
    Ok(())
}

/// Shortest decimal form that reads back to the same `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x}")
}

/// Named series of a [`ResultTable`]; `None` marks a failed cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub row: usize,
    pub column: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    /// `key=value` lines describing every input of the run.
    pub config: Vec<String>,
    /// Quadrature tolerances of the analytic engine.
    pub tolerances: String,
    /// Optional wall-clock stamp; off by default so reruns are identical.
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub x_label: String,
    pub x: Vec<f64>,
    pub columns: Vec<Column>,
    pub failures: Vec<CellFailure>,
    pub provenance: Provenance,
}

impl ResultTable {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    fn body(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.x_label);
        for c in &self.columns {
            out.push(',');
            out.push_str(&c.name);
        }
        out.push('\n');
        for (i, x) in self.x.iter().enumerate() {
            out.push_str(&fmt_num(*x));
            for c in &self.columns {
                out.push(',');
                if let Some(v) = c.values[i] {
                    out.push_str(&fmt_num(v));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Git-style object hash of the data rows: SHA-256 over
    /// `"blob <len>\0" + body`.
    pub fn content_hash(&self) -> String {
        let body = self.body();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", body.len()).as_bytes());
        h.update(body.as_bytes());
        hex::encode(h.finalize())
    }

    /// CSV with `#` provenance header and, when cells failed, a `#` footer
    /// listing them.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in &self.provenance.config {
            out.push_str(&format!("# {line}\n"));
        }
        out.push_str(&format!("# tolerances: {}\n", self.provenance.tolerances));
        if let Some(t) = &self.provenance.timestamp {
            out.push_str(&format!("# timestamp: {t}\n"));
        }
        out.push_str(&format!("# content_sha256: {}\n", self.content_hash()));
        out.push_str(&self.body());
        for f in &self.failures {
            out.push_str(&format!(
                "# failed: row={} column={} reason={}\n",
                self.x[f.row],
                f.column,
                f.reason.replace('\n', " ")
            ));
        }
        out
    }

    /// Gnuplot script plotting every non-CI column of `csv_path` against the
    /// first column on log-x axes.
    pub fn plot_script(&self, csv_path: &str) -> String {
        let mut s = String::new();
        s.push_str("set datafile separator ','\n");
        s.push_str("set datafile commentschars '#'\n");
        s.push_str("set key autotitle columnhead\n");
        s.push_str("set logscale x\n");
        s.push_str(&format!("set xlabel '{}'\n", self.x_label));
        let plots: Vec<String> = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.name.ends_with("_ci"))
            .map(|(i, c)| {
                let col = i + 2;
                match self.columns.get(i + 1) {
                    Some(ci) if ci.name == format!("{}_ci", c.name) => format!(
                        "'{csv_path}' using 1:{col}:{} with yerrorlines title '{}'",
                        col + 1,
                        c.name
                    ),
                    _ => format!("'{csv_path}' using 1:{col} with linespoints title '{}'", c.name),
                }
            })
            .collect();
        s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
        s
    }
}

/// One line describing the quadrature settings.
pub fn tolerance_digest(o: &AnalyticOptions) -> String {
    let q = |s: &QuadSpec| format!("{:e}/{:e}/{}", s.rel_tol, s.abs_tol, s.max_subdivisions);
    format!(
        "inner={} outer={} rate={} tail_cutoff={:e} (rel/abs/max_subdivisions)",
        q(&o.inner),
        q(&o.outer),
        q(&o.rate),
        o.tail_cutoff
    )
}

type CellResult = Vec<std::result::Result<(f64, Option<f64>), String>>;

/// Evaluates every cell. Failing cells are left empty and listed in
/// [`ResultTable::failures`]; the sweep itself only fails on an invalid
/// spec.
pub fn run_sweep(spec: &SweepSpec) -> Result<ResultTable> {
    spec.validate()?;
    let cells: Vec<((usize, usize), NetworkConfig)> = spec.cells().collect();

    let analytic: Vec<CellResult> = if spec.engine.analytic() {
        cells
            .par_iter()
            .map(|(_, cfg)| match Analyzer::with_options(*cfg, spec.options) {
                Ok(an) => spec
                    .metrics
                    .iter()
                    .map(|m| m.evaluate(&an).map(|v| (v, None)).map_err(|e| e.to_string()))
                    .collect(),
                Err(e) => vec![Err(e.to_string()); spec.metrics.len()],
            })
            .collect()
    } else {
        Vec::new()
    };

    // trials are already parallel inside each run
    let mc: Vec<CellResult> = if spec.engine.montecarlo() {
        cells
            .iter()
            .map(|(_, cfg)| match Simulator::new(spec.mc.spec(*cfg)).and_then(|s| s.run()) {
                Ok(run) => spec
                    .metrics
                    .iter()
                    .map(|m| m.estimate(&run, cfg.lambda).map(|(v, h)| (v, Some(h))).map_err(|e| e.to_string()))
                    .collect(),
                Err(e) => vec![Err(e.to_string()); spec.metrics.len()],
            })
            .collect()
    } else {
        Vec::new()
    };

    let n_rows = spec.rows().len();
    let mut columns = Vec::new();
    let mut failures = Vec::new();
    for s in 0..spec.series() {
        let suffix = spec.series_label(s).map(|l| format!("[{l}]")).unwrap_or_default();
        for (mi, m) in spec.metrics.iter().enumerate() {
            let mut add = |results: &[CellResult], tag: &str, with_ci: bool| {
                let name = format!("{m}{tag}{suffix}");
                let mut vals = vec![None; n_rows];
                let mut ci = vec![None; n_rows];
                for (ci_idx, ((r, cs), _)) in cells.iter().enumerate() {
                    if *cs != s {
                        continue;
                    }
                    match &results[ci_idx][mi] {
                        Ok((v, h)) => {
                            vals[*r] = Some(*v);
                            ci[*r] = *h;
                        }
                        Err(reason) => failures.push(CellFailure {
                            row: *r,
                            column: name.clone(),
                            reason: reason.clone(),
                        }),
                    }
                }
                if with_ci {
                    let ci_name = format!("{m}{tag}_ci{suffix}");
                    columns.push(Column { name, values: vals });
                    columns.push(Column { name: ci_name, values: ci });
                } else {
                    columns.push(Column { name, values: vals });
                }
            };
            if spec.engine.analytic() {
                add(&analytic, "", false);
            }
            if spec.engine.montecarlo() {
                add(&mc, "_mc", true);
            }
        }
    }
    failures.sort_by(|a, b| (a.row, &a.column).cmp(&(b.row, &b.column)));

    let mut config = vec![format!("base: {}", spec.base.digest()), format!("sweep: {}", spec.digest())];
    if spec.engine.montecarlo() {
        config.push(format!("montecarlo: {}", spec.mc.digest()));
    }
    Ok(ResultTable {
        x_label: "lambda".into(),
        x: spec.rows().to_vec(),
        columns,
        failures,
        provenance: Provenance {
            config,
            tolerances: tolerance_digest(&spec.options),
            timestamp: None,
        },
    })
}

/// Shape of a metric over the density grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Single interior optimum, refined by golden-section search.
    Unimodal,
    /// Variation below the flatness tolerance; no meaningful optimum.
    Flat,
    /// Best grid point is an endpoint of the grid.
    Boundary,
    /// More than one local optimum on the grid.
    NonUnimodal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub lambda_star: f64,
    pub value: f64,
    /// Final bracket around `lambda_star`, BS/km^2.
    pub bracket: (f64, f64),
    pub shape: Shape,
    /// Metric on the density grid.
    pub grid: Vec<(f64, f64)>,
    pub evaluations: usize,
}

impl Optimum {
    pub fn bracket_width(&self) -> f64 {
        self.bracket.1 - self.bracket.0
    }

    pub fn is_unimodal(&self) -> bool {
        self.shape == Shape::Unimodal
    }
}

/// Relative spread below which a metric counts as flat.
const FLAT_TOLERANCE: f64 = 1e-5;
/// Golden-section stops once the bracket is this fraction of its midpoint.
const BRACKET_FRACTION: f64 = 0.02;

/// Locates the density that maximizes (SE, ASE, CCDF) or minimizes (outage)
/// `metric` for the base configuration of `spec`, using the analytic engine.
///
/// The metric is sampled on the density grid first (the swept values when
/// `spec` sweeps density, the density grid otherwise); the best interior
/// grid point is then refined by golden-section search in `log10(lambda)`.
pub fn find_optimal_density(spec: &SweepSpec, metric: Metric) -> Result<Optimum> {
    let grid = spec.rows().to_vec();
    check_grid("density grid", &grid)?;
    let sign = if metric.maximize() { 1.0 } else { -1.0 };
    let eval = |lambda: f64| -> Result<f64> {
        let an = Analyzer::with_options(spec.base.with_lambda(lambda), spec.options)?;
        metric.evaluate(&an)
    };
    let values = grid.par_iter().map(|&l| eval(l)).collect::<Result<Vec<f64>>>()?;
    let mut evaluations = grid.len();
    let samples: Vec<(f64, f64)> = grid.iter().copied().zip(values.iter().copied()).collect();

    let best = (0..values.len()).fold(0, |b, i| if sign * values[i] > sign * values[b] { i } else { b });
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let at = |i: usize, shape| Optimum {
        lambda_star: grid[i],
        value: values[i],
        bracket: (grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)]),
        shape,
        grid: samples.clone(),
        evaluations,
    };
    if hi - lo <= FLAT_TOLERANCE * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
        return Ok(at(best, Shape::Flat));
    }
    if best == 0 || best == grid.len() - 1 {
        return Ok(at(best, Shape::Boundary));
    }
    // improving up to the optimum and worsening after it
    let unimodal = (1..=best).all(|i| sign * values[i] >= sign * values[i - 1])
        && (best + 1..values.len()).all(|i| sign * values[i] <= sign * values[i - 1]);
    if !unimodal {
        return Ok(at(best, Shape::NonUnimodal));
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (grid[best - 1].log10(), grid[best + 1].log10());
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = sign * eval(10f64.powf(x1))?;
    let mut f2 = sign * eval(10f64.powf(x2))?;
    evaluations += 2;
    while 10f64.powf(b) - 10f64.powf(a) > BRACKET_FRACTION * 10f64.powf(0.5 * (a + b)) {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = sign * eval(10f64.powf(x1))?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = sign * eval(10f64.powf(x2))?;
        }
        evaluations += 1;
    }
    let (x, f) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    let (lambda_star, value) = if f >= sign * values[best] {
        (10f64.powf(x), sign * f)
    } else {
        (grid[best], values[best])
    };
    Ok(Optimum {
        lambda_star,
        value,
        bracket: (10f64.powf(a), 10f64.powf(b)),
        shape: Shape::Unimodal,
        grid: samples,
        evaluations,
    })
}

/// Analytic SIR CDF tabulated on a dB grid wide enough that the tails beyond
/// it are below `1e-3`, interpolated linearly in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCdf {
    /// `(threshold_db, P[SIR <= threshold])`, increasing in threshold.
    pub points: Vec<(f64, f64)>,
}

const TAIL_MASS: f64 = 1e-3;
const CDF_STEP_DB: f64 = 0.25;

impl TabulatedCdf {
    pub fn new(an: &Analyzer) -> Result<Self> {
        let cdf = |db: f64| an.sir_ccdf(db_to_linear(db)).map(|c| 1.0 - c);
        let mut lo = -30.0;
        while cdf(lo)? > TAIL_MASS {
            lo -= 10.0;
            if lo < -200.0 {
                return Err(Error::config("SIR distribution has no lower tail"));
            }
        }
        let mut hi = 40.0;
        while 1.0 - cdf(hi)? > TAIL_MASS {
            hi += 10.0;
            if hi > 300.0 {
                return Err(Error::config("SIR distribution has no upper tail"));
            }
        }
        let n = ((hi - lo) / CDF_STEP_DB).round() as usize + 1;
        let grid = linspace(lo, hi, n);
        let vals = grid.par_iter().map(|&d| cdf(d)).collect::<Result<Vec<f64>>>()?;
        let mut points: Vec<(f64, f64)> = grid.into_iter().zip(vals).collect();
        // quadrature noise must not make the table decrease
        for i in 1..points.len() {
            if points[i].1 < points[i - 1].1 {
                points[i].1 = points[i - 1].1;
            }
        }
        Ok(Self { points })
    }

    /// CDF at linear SIR `y`.
    pub fn cdf(&self, y: f64) -> f64 {
        if !(y > 0.0) {
            return 0.0;
        }
        if y == f64::INFINITY {
            return 1.0;
        }
        let db = 10.0 * y.log10();
        let p = &self.points;
        if db <= p[0].0 {
            return 0.0;
        }
        if db >= p[p.len() - 1].0 {
            return 1.0;
        }
        let i = p.partition_point(|q| q.0 <= db);
        let (x0, y0) = p[i - 1];
        let (x1, y1) = p[i];
        y0 + (y1 - y0) * (db - x0) / (x1 - x0)
    }
}

/// Analytic-versus-simulation comparison of the SIR distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub kolmogorov: f64,
    pub samples: usize,
    pub degenerate: usize,
    pub window_km: f64,
}

/// Kolmogorov distance between the analytic SIR CDF of `analytic` and the
/// empirical CDF of a simulation of `sim` (the two may use different LOS
/// models).
pub fn validate_sir_cdf(analytic: &NetworkConfig, options: AnalyticOptions, sim: &SimSpec) -> Result<Validation> {
    let an = Analyzer::with_options(*analytic, options)?;
    let table = TabulatedCdf::new(&an)?;
    let run = Simulator::new(*sim)?.run()?;
    let sorted = run.sorted_sir();
    if sorted.is_empty() {
        return Err(Error::Simulation("every trial was degenerate".into()));
    }
    Ok(Validation {
        kolmogorov: kolmogorov_distance(&sorted, |y| table.cdf(y)),
        samples: sorted.len(),
        degenerate: run.degenerate(),
        window_km: run.radius,
    })
}

/// Whether two independent estimates agree within `k` joint standard
/// errors.
pub fn agree_within(a: (f64, f64), b: (f64, f64), k: f64) -> bool {
    (a.0 - b.0).abs() <= k * (a.1 * a.1 + b.1 * b.1).sqrt()
}

/// Half-width to standard error.
pub fn std_error_of(half_width: f64) -> f64 {
    half_width / Z95
}
