//! Command-line front end.
//!
//! Every setting can come from a `key=value` config file (`--config PATH`)
//! or from a flag of the same name; flags win. Lengths are meters unless
//! suffixed with `km`, densities are BS/km^2 and thresholds are dB.
//!
//! Exit codes: 0 on success, 1 when some cells or the computation failed,
//! 2 for invalid input.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::analytics::{AnalyticOptions, Analyzer, NetworkConfig};
use crate::curve::{linspace, logspace};
use crate::error::{Error, Result};
use crate::experiments::{
    fmt_num, run_sweep, tolerance_digest, Engine, McSettings, Metric, SweepSpec, Variable,
};
use crate::montecarlo::{Simulator, Window};
use crate::propagation::{LosModel, PathLossParams};

/// Environment variable consulted for the seed when neither flag nor config
/// file sets one.
pub const SEED_ENV: &str = "CELLGEOM_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "cellgeom",
    version,
    about = "Coverage and spectral efficiency of Poisson small-cell networks with LOS/NLOS path loss",
    after_help = "Lengths are meters; a bare number or an 'm' suffix means meters, 'km' means kilometers. \
Densities are BS/km^2. Thresholds are dB. Value lists are 'a,b,c' or ranges 'start:stop:N' \
(linear) and 'start:stop:logN' (log-spaced)."
)]
struct Cli {
    /// key=value settings file; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// SIR CCDF over a threshold grid.
    #[command(allow_negative_numbers = true)]
    Ccdf {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        mc: McArgs,
        /// analytic, montecarlo or both.
        #[arg(long, allow_hyphen_values = true)]
        engine: Option<String>,
        /// Thresholds in dB (default -20:30:101).
        #[arg(long, allow_hyphen_values = true)]
        thresholds: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Metric table over base-station density or LOS length scale.
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long, allow_hyphen_values = true)]
        engine: Option<String>,
        /// lambda or L.
        #[arg(long, allow_hyphen_values = true)]
        var: Option<String>,
        /// Swept values: densities, or lengths when --var L.
        #[arg(long, allow_hyphen_values = true)]
        values: Option<String>,
        /// Density grid of each series when --var L (default 1:10000:log17).
        #[arg(long, allow_hyphen_values = true)]
        densities: Option<String>,
        /// Comma-separated: se, ase, ccdf[@XdB], outage[@XdB].
        #[arg(long, allow_hyphen_values = true)]
        metrics: Option<String>,
        /// Also write a gnuplot script reading the CSV (needs --output).
        #[arg(long, value_name = "PATH")]
        plot: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// LOS probability against distance for several models.
    #[command(allow_negative_numbers = true)]
    Losprob {
        #[command(flatten)]
        net: NetArgs,
        /// Comma-separated: quadexp, 3gpp, explinear, always, never.
        #[arg(long, allow_hyphen_values = true)]
        models: Option<String>,
        /// Largest distance (default 500m).
        #[arg(long, allow_hyphen_values = true)]
        dmax: Option<String>,
        /// Grid step (default 1m).
        #[arg(long, allow_hyphen_values = true)]
        step: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Args)]
struct NetArgs {
    /// Base-station density, BS/km^2 (default 100).
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// LOS model: quadexp, 3gpp, explinear, always or never.
    #[arg(long, allow_hyphen_values = true)]
    los: Option<String>,
    /// Length scale of quadexp (default 82.5m).
    #[arg(long = "L", allow_hyphen_values = true)]
    l: Option<String>,
    /// 3gpp breakpoint distance (default 156m).
    #[arg(long, allow_hyphen_values = true)]
    d0: Option<String>,
    /// 3gpp decay distance (default 30m).
    #[arg(long, allow_hyphen_values = true)]
    d1: Option<String>,
    /// explinear slope per meter (default 8.59e-3).
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// explinear offset (default 0.101).
    #[arg(long, allow_hyphen_values = true)]
    p: Option<String>,
    /// Fading rate (default 1).
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<String>,
    /// Normalized noise power (default 0).
    #[arg(long, allow_hyphen_values = true)]
    sigma2: Option<String>,
    /// LOS path loss at 1 km, dB.
    #[arg(long, allow_hyphen_values = true)]
    k_los_db: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta_los: Option<String>,
    /// NLOS path loss at 1 km, dB.
    #[arg(long, allow_hyphen_values = true)]
    k_nlos_db: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta_nlos: Option<String>,
}

#[derive(Debug, Args)]
struct McArgs {
    /// Monte Carlo trials (default 10000).
    #[arg(long, allow_hyphen_values = true)]
    trials: Option<String>,
    /// RNG seed; falls back to $CELLGEOM_SEED, then 1.
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    /// Simulation window radius, or auto.
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Write the CSV here instead of stdout.
    #[arg(long, short, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Add a wall-clock line to the provenance header.
    #[arg(long)]
    timestamp: bool,
}

/// Keys accepted in config files, in echo order.
pub const KNOWN_KEYS: &[&str] = &[
    "lambda", "los", "L", "d0", "d1", "alpha", "p", "mu", "sigma2", "k_los_db", "beta_los", "k_nlos_db",
    "beta_nlos", "trials", "seed", "window", "engine", "thresholds", "var", "values", "densities", "metrics",
    "models", "dmax", "step",
];

fn default_of(key: &str) -> &'static str {
    match key {
        "lambda" => "100",
        "los" => "quadexp",
        "L" => "82.5m",
        "d0" => "156m",
        "d1" => "30m",
        "alpha" => "8.59e-3",
        "p" => "0.101",
        "mu" => "1",
        "sigma2" => "0",
        "k_los_db" => "103.8",
        "beta_los" => "2.09",
        "k_nlos_db" => "145.4",
        "beta_nlos" => "3.75",
        "trials" => "10000",
        "window" => "auto",
        "engine" => "analytic",
        "thresholds" => "-20:30:101",
        "var" => "lambda",
        "densities" => "1:10000:log17",
        "metrics" => "se,ase,outage",
        "models" => "quadexp,3gpp,explinear",
        "dmax" => "500m",
        "step" => "1m",
        _ => "",
    }
}

fn canonical_key(raw: &str) -> Option<&'static str> {
    let k = raw.trim().replace('-', "_");
    KNOWN_KEYS.iter().copied().find(|&known| known == k)
}

/// Parses a `key=value` settings file. Blank lines and `#` comments are
/// skipped; unknown and repeated keys are errors. Keys may use `-` or `_`.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key=value", n + 1)))?;
        let key = canonical_key(k)
            .ok_or_else(|| Error::Parse(format!("config line {}: unknown key '{}'", n + 1, k.trim())))?;
        let v = v.trim();
        if v.is_empty() {
            return Err(Error::Parse(format!("config line {}: empty value for '{key}'", n + 1)));
        }
        if out.insert(key.to_string(), v.to_string()).is_some() {
            return Err(Error::Parse(format!("config line {}: '{key}' given twice", n + 1)));
        }
    }
    Ok(out)
}

/// How a bare number is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    /// Meters by default, `m` or `km` suffix; result in km.
    Length,
    /// Optional `dB` suffix.
    Decibel,
    Plain,
}

fn number(s: &str, what: &str) -> Result<f64> {
    let t = s.trim();
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse(format!("invalid {what} '{t}'")))
}

/// One scalar in `unit`; lengths come back in km.
pub fn parse_scalar(s: &str, unit: Unit) -> Result<f64> {
    let t = s.trim();
    match unit {
        Unit::Length => {
            if let Some(km) = t.strip_suffix("km") {
                number(km, "length")
            } else {
                Ok(number(t.strip_suffix('m').unwrap_or(t), "length")? / 1e3)
            }
        }
        Unit::Decibel => {
            let v = t
                .strip_suffix("dB")
                .or_else(|| t.strip_suffix("db"))
                .unwrap_or(t);
            number(v, "threshold")
        }
        Unit::Plain => number(t, "number"),
    }
}

/// A value list: `a,b,c`, `start:stop:N` or `start:stop:logN`.
pub fn parse_values(s: &str, unit: Unit) -> Result<Vec<f64>> {
    let t = s.trim();
    if t.is_empty() {
        return Err(Error::Parse("empty value list".into()));
    }
    if t.contains(':') {
        let parts: Vec<&str> = t.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(Error::Parse(format!("invalid range '{t}' (expected start:stop:N or start:stop:logN)")));
        };
        let (a, b) = (parse_scalar(a, unit)?, parse_scalar(b, unit)?);
        let n = n.trim();
        let (log, count) = match n.strip_prefix("log") {
            Some(c) => (true, c),
            None => (false, n),
        };
        let count: usize = count
            .parse()
            .ok()
            .filter(|&c| (1..=100_000).contains(&c))
            .ok_or_else(|| Error::Parse(format!("invalid point count '{n}' in range '{t}'")))?;
        let values = if log {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::Parse(format!("log range '{t}' needs positive ends")));
            }
            logspace(a, b, count)
        } else {
            linspace(a, b, count)
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("range '{t}' overflows")));
        }
        Ok(values)
    } else {
        t.split(',').map(|v| parse_scalar(v, unit)).collect()
    }
}

/// Settings from config file and flags, with the defaults filled in on
/// lookup. Remembers the value it hands out for each key so the effective
/// configuration can be echoed.
struct Settings {
    map: BTreeMap<String, String>,
    resolved: std::cell::RefCell<BTreeMap<&'static str, String>>,
}

impl Settings {
    fn get(&self, key: &'static str) -> String {
        self.get_or(key, default_of(key))
    }

    fn get_or(&self, key: &'static str, default: &str) -> String {
        let v = self.map.get(key).cloned().unwrap_or_else(|| default.to_string());
        self.resolved.borrow_mut().entry(key).or_insert_with(|| v.clone());
        v
    }

    fn resolve(&self, key: &'static str, value: String) {
        self.resolved.borrow_mut().insert(key, value);
    }

    fn scalar(&self, key: &'static str, unit: Unit) -> Result<f64> {
        parse_scalar(&self.get(key), unit).map_err(|e| Error::Parse(format!("{key}: {}", strip_parse(&e))))
    }

    fn echo(&self) -> Vec<String> {
        let resolved = self.resolved.borrow();
        KNOWN_KEYS
            .iter()
            .filter_map(|k| resolved.get(k).map(|v| format!("{k}={v}")))
            .collect()
    }
}

fn strip_parse(e: &Error) -> String {
    match e {
        Error::Parse(m) => m.clone(),
        other => other.to_string(),
    }
}

fn network(s: &Settings) -> Result<NetworkConfig> {
    let lambda = s.scalar("lambda", Unit::Plain)?;
    let los_name = s.get("los");
    let los = los_model(s, &los_name)?;
    let pathloss = PathLossParams {
        k_los_db: s.scalar("k_los_db", Unit::Plain)?,
        beta_los: s.scalar("beta_los", Unit::Plain)?,
        k_nlos_db: s.scalar("k_nlos_db", Unit::Plain)?,
        beta_nlos: s.scalar("beta_nlos", Unit::Plain)?,
    };
    let cfg = NetworkConfig {
        lambda,
        mu: s.scalar("mu", Unit::Plain)?,
        sigma2: s.scalar("sigma2", Unit::Plain)?,
        pathloss,
        los,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn los_model(s: &Settings, name: &str) -> Result<LosModel> {
    Ok(match name.trim().to_ascii_lowercase().as_str() {
        "quadexp" => LosModel::QuadExp {
            l: s.scalar("L", Unit::Length)?,
        },
        "3gpp" => LosModel::ThreeGpp {
            d0: s.scalar("d0", Unit::Length)?,
            d1: s.scalar("d1", Unit::Length)?,
        },
        "explinear" => LosModel::exp_linear_per_meter(s.scalar("alpha", Unit::Plain)?, s.scalar("p", Unit::Plain)?),
        "always" => LosModel::AlwaysLos,
        "never" => LosModel::NeverLos,
        other => {
            return Err(Error::Parse(format!(
                "unknown LOS model '{other}' (expected quadexp, 3gpp, explinear, always or never)"
            )))
        }
    })
}

fn mc_settings(s: &Settings, env_seed: Option<&str>) -> Result<McSettings> {
    let mut mc = McSettings::default();
    let trials = s.get("trials");
    mc.n_trials = trials
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("trials: invalid count '{trials}'")))?;
    let seed_text = match (s.map.get("seed"), env_seed) {
        (Some(v), _) => Some(v.clone()),
        (None, Some(e)) => Some(e.to_string()),
        (None, None) => None,
    };
    mc.seed = match seed_text {
        Some(t) => t
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("seed: invalid value '{t}'")))?,
        None => DEFAULT_SEED,
    };
    s.resolve("seed", mc.seed.to_string());
    let window = s.get("window");
    mc.window = if window.trim() == "auto" {
        Window::Auto
    } else {
        Window::Radius(parse_scalar(&window, Unit::Length)?)
    };
    Ok(mc)
}

fn engine(s: &Settings) -> Result<Engine> {
    s.get("engine").parse()
}

/// Outcome of one command: the text to emit and the exit code.
struct Output {
    csv: String,
    code: i32,
}

fn header(command: &str, s: &Settings, extra: &[String], timestamp: bool) -> String {
    let mut h = String::new();
    let _ = writeln!(h, "# cellgeom {} {command}", env!("CARGO_PKG_VERSION"));
    for line in s.echo() {
        let _ = writeln!(h, "# {line}");
    }
    for line in extra {
        let _ = writeln!(h, "# {line}");
    }
    if timestamp {
        let _ = writeln!(h, "# timestamp: {}", now());
    }
    h
}

fn now() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    format!("unix:{secs}")
}

fn cmd_ccdf(s: &Settings, env_seed: Option<&str>, timestamp: bool) -> Result<Output> {
    let cfg = network(s)?;
    let engine = engine(s)?;
    let thresholds = parse_values(&s.get("thresholds"), Unit::Decibel)?;
    if thresholds.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config("thresholds must be strictly increasing"));
    }
    let mc = if engine.montecarlo() {
        let m = mc_settings(s, env_seed)?;
        m.spec(cfg).validate()?;
        Some(m)
    } else {
        None
    };
    let opts = AnalyticOptions::default();
    let mut extra = vec![format!("config: {}", cfg.digest())];
    extra.push(format!("tolerances: {}", tolerance_digest(&opts)));
    if let Some(m) = &mc {
        extra.push(format!("montecarlo: {}", m.digest()));
    }

    let analytic = if engine.analytic() {
        let an = Analyzer::with_options(cfg, opts).map_err(runtime)?;
        Some(an.sir_ccdf_curve(&thresholds).map_err(runtime)?)
    } else {
        None
    };
    let sim = match &mc {
        Some(m) => {
            let run = Simulator::new(m.spec(cfg)).and_then(|sim| sim.run()).map_err(runtime)?;
            let cdf = run.sir_cdf(&thresholds).map_err(runtime)?;
            extra.push(format!(
                "montecarlo_run: window_km={} samples={} degenerate={} redraws={} guarded={}",
                run.radius,
                cdf.meta.get("samples").map_or("", String::as_str),
                run.degenerate(),
                run.redraws(),
                run.guarded()
            ));
            Some(cdf)
        }
        None => None,
    };
    if let (Some(a), Some(m)) = (&analytic, &sim) {
        let gap = a
            .ys()
            .zip(m.ys())
            .map(|(c, f)| (c - (1.0 - f)).abs())
            .fold(0.0, f64::max);
        extra.push(format!("max_abs_diff_on_grid: {}", fmt_num(gap)));
    }

    let mut csv = header("ccdf", s, &extra, timestamp);
    csv.push_str("threshold_db");
    if analytic.is_some() {
        csv.push_str(",analytic_ccdf");
    }
    if sim.is_some() {
        csv.push_str(",mc_ccdf,mc_ci");
    }
    csv.push('\n');
    for (i, t) in thresholds.iter().enumerate() {
        csv.push_str(&fmt_num(*t));
        if let Some(a) = &analytic {
            let _ = write!(csv, ",{}", fmt_num(a.points[i].1));
        }
        if let Some(m) = &sim {
            let hw = m.half_width.as_ref().map_or(f64::NAN, |h| h[i]);
            let _ = write!(csv, ",{},{}", fmt_num(1.0 - m.points[i].1), fmt_num(hw));
        }
        csv.push('\n');
    }
    Ok(Output { csv, code: EXIT_OK })
}

// failures after validation are computational, not usage errors
fn runtime(e: Error) -> Error {
    match e {
        Error::InvalidConfig(m) | Error::Parse(m) => Error::Simulation(m),
        other => other,
    }
}

fn cmd_sweep(
    s: &Settings,
    env_seed: Option<&str>,
    timestamp: bool,
    plot: Option<(&PathBuf, &PathBuf)>,
    err: &mut dyn Write,
) -> Result<(Output, Option<String>)> {
    let base = network(s)?;
    let variable: Variable = s.get("var").parse()?;
    let engine = engine(s)?;
    let metrics = Metric::parse_list(&s.get("metrics"))?;
    let values = match variable {
        Variable::Lambda => parse_values(&s.get_or("values", default_of("densities")), Unit::Plain)?,
        Variable::LosScale => parse_values(&s.get_or("values", "40m,82.5m,120m"), Unit::Length)?,
    };
    let mut spec = SweepSpec::new(base, variable, values, metrics);
    spec.engine = engine;
    if variable == Variable::LosScale {
        spec.densities = parse_values(&s.get("densities"), Unit::Plain)?;
    }
    if engine.montecarlo() {
        spec.mc = mc_settings(s, env_seed)?;
    }
    spec.validate()?;
    let mut table = run_sweep(&spec)?;
    let mut echo: Vec<String> = vec![format!("cellgeom {} sweep", env!("CARGO_PKG_VERSION"))];
    echo.extend(s.echo());
    echo.append(&mut table.provenance.config);
    table.provenance.config = echo;
    if timestamp {
        table.provenance.timestamp = Some(now());
    }
    let code = if table.is_complete() {
        EXIT_OK
    } else {
        for f in &table.failures {
            let _ = writeln!(err, "cell failed: lambda={} column={}: {}", fmt_num(table.x[f.row]), f.column, f.reason);
        }
        EXIT_FAILURE
    };
    let script = plot.map(|(_, csv_path)| table.plot_script(&csv_path.to_string_lossy()));
    Ok((Output { csv: table.to_csv(), code }, script))
}

fn cmd_losprob(s: &Settings, timestamp: bool) -> Result<Output> {
    // the base config is not needed, but its LOS parameters are
    let names: Vec<String> = s
        .get("models")
        .split(',')
        .map(|m| m.trim().to_ascii_lowercase())
        .filter(|m| !m.is_empty())
        .collect();
    if names.is_empty() {
        return Err(Error::Parse("models: empty list".into()));
    }
    let mut models = Vec::new();
    for n in &names {
        if models.iter().any(|(m, _): &(String, LosModel)| m == n) {
            return Err(Error::Parse(format!("models: '{n}' listed twice")));
        }
        let m = los_model(s, n)?;
        m.validate()?;
        models.push((n.clone(), m));
    }
    let dmax = s.scalar("dmax", Unit::Length)?;
    let step = s.scalar("step", Unit::Length)?;
    if !(step > 0.0) || !(dmax >= 0.0) {
        return Err(Error::config("dmax must be non-negative and step positive"));
    }
    let n = (dmax / step + 1e-9).floor() as usize + 1;
    if n > 10_000_000 {
        return Err(Error::config("distance grid too large"));
    }
    let grid_m: Vec<f64> = (0..n).map(|i| i as f64 * step * 1e3).collect();

    let mut extra: Vec<String> = models.iter().map(|(n, m)| format!("model {n}: {m}")).collect();
    // where each curve first drops to one half on the grid, and the exact
    // half-probability points
    let first_at_half = |m: &LosModel| grid_m.iter().copied().find(|&d| m.p_los(d / 1e3) <= 0.5);
    let mut crossings = Vec::new();
    for (name, m) in &models {
        if let Some(d) = m.crossing_distance(0.5) {
            let last = m.last_distance_at_or_above(0.5).unwrap_or(d);
            let exact = if (last - d).abs() > 1e-9 {
                format!("[{}m,{}m]", fmt_num(round6(d * 1e3)), fmt_num(round6(last * 1e3)))
            } else {
                format!("{}m", fmt_num(round6(d * 1e3)))
            };
            let grid = first_at_half(m).map_or("none".into(), |g| format!("{}m", fmt_num(g)));
            extra.push(format!("half_point {name}: exact={exact} grid={grid}"));
            crossings.push((name.clone(), first_at_half(m)));
        }
    }
    let q = crossings.iter().find(|c| c.0 == "quadexp").and_then(|c| c.1);
    let g = crossings.iter().find(|c| c.0 == "3gpp").and_then(|c| c.1);
    if let (Some(q), Some(g)) = (q, g) {
        let within = (q - g).abs() <= step * 1e3 * (1.0 + 1e-9);
        extra.push(format!("calibration quadexp vs 3gpp: grid gap {}m, within one step: {within}", fmt_num(round6((q - g).abs()))));
    }

    let mut csv = header("losprob", s, &extra, timestamp);
    csv.push_str("distance_m");
    for (n, _) in &models {
        csv.push(',');
        csv.push_str(n);
    }
    csv.push('\n');
    for d in &grid_m {
        csv.push_str(&fmt_num(round6(*d)));
        for (_, m) in &models {
            let _ = write!(csv, ",{}", fmt_num(m.p_los(d / 1e3)));
        }
        csv.push('\n');
    }
    Ok(Output { csv, code: EXIT_OK })
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn flags_of(net: &NetArgs) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("lambda", net.lambda.clone()),
        ("los", net.los.clone()),
        ("L", net.l.clone()),
        ("d0", net.d0.clone()),
        ("d1", net.d1.clone()),
        ("alpha", net.alpha.clone()),
        ("p", net.p.clone()),
        ("mu", net.mu.clone()),
        ("sigma2", net.sigma2.clone()),
        ("k_los_db", net.k_los_db.clone()),
        ("beta_los", net.beta_los.clone()),
        ("k_nlos_db", net.k_nlos_db.clone()),
        ("beta_nlos", net.beta_nlos.clone()),
    ]
}

fn mc_flags(mc: &McArgs) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("trials", mc.trials.clone()),
        ("seed", mc.seed.clone()),
        ("window", mc.window.clone()),
    ]
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
/// `env_seed` stands in for `$CELLGEOM_SEED`.
pub fn run<I, T>(args: I, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
            } else {
                let _ = out.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match dispatch(cli, env_seed, out, err) {
        Ok(code) => code,
        Err(e) => {
            let code = match e {
                Error::InvalidConfig(_) | Error::Parse(_) | Error::Domain { .. } => EXIT_USAGE,
                _ => EXIT_FAILURE,
            };
            let _ = writeln!(err, "error: {e}");
            code
        }
    }
}

fn dispatch(cli: Cli, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let mut map = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Parse(format!("cannot read config {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => BTreeMap::new(),
    };
    let mut flags = Vec::new();
    let (out_args, plot) = match &cli.command {
        Command::Ccdf { net, mc, engine, thresholds, out, .. } => {
            flags.extend(flags_of(net));
            flags.extend(mc_flags(mc));
            flags.push(("engine", engine.clone()));
            flags.push(("thresholds", thresholds.clone()));
            (out, None)
        }
        Command::Sweep {
            net,
            mc,
            engine,
            var,
            values,
            densities,
            metrics,
            plot,
            out,
        } => {
            flags.extend(flags_of(net));
            flags.extend(mc_flags(mc));
            flags.push(("engine", engine.clone()));
            flags.push(("var", var.clone()));
            flags.push(("values", values.clone()));
            flags.push(("densities", densities.clone()));
            flags.push(("metrics", metrics.clone()));
            (out, plot.as_ref())
        }
        Command::Losprob { net, models, dmax, step, out } => {
            flags.extend(flags_of(net));
            flags.push(("models", models.clone()));
            flags.push(("dmax", dmax.clone()));
            flags.push(("step", step.clone()));
            (out, None)
        }
    };
    for (k, v) in flags {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    }
    let settings = Settings {
        map,
        resolved: Default::default(),
    };

    let (result, script) = match &cli.command {
        Command::Ccdf { .. } => (cmd_ccdf(&settings, env_seed, out_args.timestamp)?, None),
        Command::Sweep { .. } => {
            let plot_target = match (plot, &out_args.output) {
                (Some(p), Some(o)) => Some((p, o)),
                (Some(_), None) => return Err(Error::config("--plot requires --output")),
                _ => None,
            };
            cmd_sweep(&settings, env_seed, out_args.timestamp, plot_target, err)?
        }
        Command::Losprob { .. } => (cmd_losprob(&settings, out_args.timestamp)?, None),
    };

    match &out_args.output {
        Some(path) => std::fs::write(path, &result.csv)
            .map_err(|e| Error::Simulation(format!("cannot write {}: {e}", path.display())))?,
        None => out
            .write_all(result.csv.as_bytes())
            .map_err(|e| Error::Simulation(format!("cannot write output: {e}")))?,
    }
    if let (Some(script), Some(path)) = (script, plot) {
        std::fs::write(path, script)
            .map_err(|e| Error::Simulation(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(result.code)
}

/// Entry point of the binary.
pub fn main() -> i32 {
    let env_seed = std::env::var(SEED_ENV).ok();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), env_seed.as_deref(), &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str], env_seed: Option<&str>) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["cellgeom"];
        full.extend_from_slice(args);
        let code = run(full, env_seed, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn lengths_default_to_meters() {
        assert_eq!(parse_scalar("82.5m", Unit::Length).unwrap(), 0.0825);
        assert_eq!(parse_scalar("82.5", Unit::Length).unwrap(), 0.0825);
        assert_eq!(parse_scalar("1.5km", Unit::Length).unwrap(), 1.5);
        assert!(parse_scalar("m", Unit::Length).is_err());
        assert!(parse_scalar("inf", Unit::Length).is_err());
        assert_eq!(parse_scalar("-5dB", Unit::Decibel).unwrap(), -5.0);
    }

    #[test]
    fn value_lists_and_ranges() {
        assert_eq!(parse_values("40m,82.5m,120m", Unit::Length).unwrap(), vec![0.04, 0.0825, 0.12]);
        let v = parse_values("1:10000:log17", Unit::Plain).unwrap();
        assert_eq!(v.len(), 17);
        assert_eq!((v[0], v[16]), (1.0, 1e4));
        assert_eq!(parse_values("-20:30:101", Unit::Decibel).unwrap().len(), 101);
        for bad in ["", "1:2", "1:2:0", "1:2:x", "0:10:log3", "1,,2", "1:2:3:4"] {
            assert!(parse_values(bad, Unit::Plain).is_err(), "{bad}");
        }
    }

    #[test]
    fn config_file_rules() {
        let c = parse_config("# network\nlambda = 10\nk-los-db=100 # comment\n\nL=40m\n").unwrap();
        assert_eq!(c["lambda"], "10");
        assert_eq!(c["k_los_db"], "100");
        assert_eq!(c["L"], "40m");
        assert!(parse_config("lamda=10").unwrap_err().to_string().contains("unknown key 'lamda'"));
        assert!(parse_config("lambda=1\nlambda=2").is_err());
        assert!(parse_config("lambda").is_err());
        assert!(parse_config("lambda=").is_err());
    }

    #[test]
    fn negative_lambda_is_usage_error() {
        let (code, out, err) = run_capture(&["ccdf", "--lambda", "-5"], None);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty());
        assert!(err.contains("lambda must be positive"), "{err}");
    }

    #[test]
    fn malformed_metric_is_echoed() {
        let (code, _, err) = run_capture(&["sweep", "--metrics", "se,outage@foo"], None);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("outage@foo"), "{err}");
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, _, _) = run_capture(&["ccdf", "--lamda", "5"], None);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn losprob_grid_and_calibration() {
        let (code, out, err) = run_capture(&["losprob"], None);
        assert_eq!(code, EXIT_OK, "{err}");
        let rows: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "distance_m,quadexp,3gpp,explinear");
        assert_eq!(rows.len(), 502);
        assert!(rows[1].starts_with("0,1,1,1"));
        assert!(out.contains("within one step: true"), "{out}");
        for r in &rows[1..] {
            let v: Vec<f64> = r.split(',').map(|x| x.parse().unwrap()).collect();
            assert!(v[1..].iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn seed_falls_back_to_environment() {
        let args = ["ccdf", "--engine", "montecarlo", "--trials", "200", "--lambda", "100", "--thresholds", "0"];
        let (c1, a, _) = run_capture(&args, Some("9"));
        let (c2, b, _) = run_capture(&args, Some("10"));
        let (_, c, _) = run_capture(&[&args[..], &["--seed", "9"]].concat(), Some("10"));
        assert_eq!((c1, c2), (0, 0));
        assert_ne!(a, b);
        assert!(a.contains("# seed=9\n"));
        assert_eq!(a, c);
    }
}
