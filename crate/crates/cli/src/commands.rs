use std::fs::File;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use contagion::charfn::{charfn_mc, riccati_solve};
use contagion::filter::{calibrate_mle, detect_jumps, filter_intensity, read_returns_csv, write_trajectory_csv, MleBounds, MleOptions};
use contagion::policy::{log_optimal_policy, preference_policy, ClassPreference, LogOptimalPolicy};
use contagion::simulate::{ergodic_average, fmt, relax, simulate_market, simulate_market_ensemble, MarketSimSpec, Scheme};
use contagion::stats::mean_stderr;
use contagion::value::{
    default_grid, g_fixed_point, hjb_residual_log, log_value_field, transversality_check, Axis, FixedPointSpec, Grid,
    LogValueFn, McSpec,
};
use contagion::UtilitySpec;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::output::Output;
use crate::{CliError, Common};

type Run = Result<Vec<PathBuf>, CliError>;

const TRADING_DAY: f64 = 1.0 / 252.0;

fn invalid(flag: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("--{flag}: {reason}"))
}

fn positive(flag: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(flag, format!("must be finite and > 0, got {v}")))
    }
}

fn parse_list(flag: &str, s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| invalid(flag, format!("cannot parse {t:?} as a number"))))
        .collect()
}

/// Intensity vector from `--lambda`; a single value is broadcast.
fn parse_lambda(s: &str, m: usize) -> Result<Vec<f64>, CliError> {
    let mut v = parse_list("lambda", s)?;
    if v.len() == 1 {
        v = vec![v[0]; m];
    }
    if v.len() != m {
        return Err(invalid("lambda", format!("expected {m} entries, got {}", v.len())));
    }
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(invalid("lambda", "entries must be finite and >= 0"));
    }
    Ok(v)
}

/// `lo:hi:n[,lo:hi:n..]`, one triple per class; a single triple is broadcast.
fn parse_axes(spec: &str, m: usize, allow_zero: bool) -> Result<Vec<Axis>, CliError> {
    let mut axes = Vec::new();
    for part in spec.split(',') {
        let f: Vec<&str> = part.split(':').collect();
        if f.len() != 3 {
            return Err(invalid("grid", format!("expected lo:hi:n, got {part:?}")));
        }
        let lo = f[0].trim().parse::<f64>().map_err(|_| invalid("grid", format!("bad lower bound {:?}", f[0])))?;
        let hi = f[1].trim().parse::<f64>().map_err(|_| invalid("grid", format!("bad upper bound {:?}", f[1])))?;
        let count = f[2].trim().parse::<usize>().map_err(|_| invalid("grid", format!("bad node count {:?}", f[2])))?;
        if !(lo.is_finite() && hi.is_finite() && hi > lo && (lo > 0.0 || (allow_zero && lo == 0.0)) && count >= 2) {
            return Err(invalid("grid", format!("need lo < hi, lo {} 0 and n >= 2 in {part:?}", if allow_zero { ">=" } else { ">" })));
        }
        axes.push(Axis { min: lo, max: hi, count });
    }
    if axes.len() == 1 {
        axes = vec![axes[0]; m];
    }
    if axes.len() != m {
        return Err(invalid("grid", format!("expected {m} axes, got {}", axes.len())));
    }
    Ok(axes)
}

/// `N` for an `N`-per-axis grid on the default box, or explicit axes.
fn parse_grid(spec: &str, cfg: &RunConfig, seed: u64) -> Result<Grid, CliError> {
    if let Ok(count) = spec.trim().parse::<usize>() {
        if count < 2 {
            return Err(invalid("grid", "need at least 2 nodes per axis"));
        }
        return Ok(default_grid(&cfg.hawkes, count, seed)?);
    }
    Ok(Grid::new(parse_axes(spec, cfg.hawkes.m(), false)?)?)
}

/// Cartesian product of the axes, last axis fastest.
fn product(axes: &[Axis]) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![]];
    for ax in axes {
        pts = pts.into_iter().flat_map(|p: Vec<f64>| (0..ax.count).map(move |i| [p.clone(), vec![ax.node(i)]].concat())).collect();
    }
    pts
}

struct Csv(String);

impl Csv {
    fn new(header: &[String]) -> Self {
        Csv(header.join(",") + "\n")
    }

    fn row(&mut self, fields: &[String]) {
        self.0.push_str(&fields.join(","));
        self.0.push('\n');
    }
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

fn preference(cfg: &RunConfig) -> Result<ClassPreference, CliError> {
    Ok(match cfg.utility {
        UtilitySpec::Log { .. } => ClassPreference::Log,
        UtilitySpec::Power { gamma, .. } => ClassPreference::Power { gamma },
        UtilitySpec::Exponential { .. } => ClassPreference::Exponential { kappa: cfg.utility.kappa(cfg.market.r())? },
    })
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    Euler,
    LogEuler,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Euler => Scheme::Euler,
            SchemeArg::LogEuler => Scheme::LogEuler,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1)]
    pub paths: usize,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = TRADING_DAY)]
    pub dt: f64,
    /// Initial wealth.
    #[arg(long, default_value_t = 1.0)]
    pub x0: f64,
    #[arg(long, value_enum, default_value_t = SchemeArg::Euler)]
    pub scheme: SchemeArg,
}

/// Paths follow the log-optimal feedback rule with the configured `beta`.
pub fn simulate(cfg: &RunConfig, a: &SimulateArgs) -> Run {
    if a.paths == 0 {
        return Err(invalid("paths", "must be at least 1"));
    }
    let spec = MarketSimSpec { x0: positive("x0", a.x0)?, horizon: positive("horizon", a.horizon)?, dt: positive("dt", a.dt)?, scheme: a.scheme.into() };
    let policy = LogOptimalPolicy::new(cfg.market.clone(), cfg.utility.beta())?;
    let mut out = Output::new(&a.common.out, "simulate", cfg, a)?;
    let paths = simulate_market_ensemble(&cfg.market, &cfg.hawkes, &policy, &spec, a.paths, a.common.seed)?;
    let width = a.paths.saturating_sub(1).to_string().len().max(4);
    for (p, path) in paths.iter().enumerate() {
        let mut buf = Vec::new();
        path.write_csv(&mut buf)?;
        out.bytes(&format!("path_{p:0width$}.csv"), &buf)?;
        let mut buf = Vec::new();
        path.write_events_csv(&mut buf)?;
        out.bytes(&format!("events_{p:0width$}.csv"), &buf)?;
    }
    let finals: Vec<f64> = paths.iter().map(|p| p.final_wealth()).collect();
    let logs: Vec<f64> = finals.iter().map(|x| x.max(f64::MIN_POSITIVE).ln()).collect();
    let m = cfg.hawkes.m();
    let counts: Vec<f64> = (0..m).map(|l| paths.iter().map(|p| p.counts.last().map_or(0, |c| c[l]) as f64).sum::<f64>() / a.paths as f64).collect();
    out.json(
        "summary.json",
        &json!({
            "policy": "log-optimal",
            "paths": a.paths,
            "final_wealth": mean_stderr(&finals),
            "final_log_wealth": mean_stderr(&logs),
            "mean_events": counts,
            "ruined_paths": paths.iter().filter(|p| p.ruined).count(),
        }),
    )?;
    Ok(out.written().to_vec())
}

#[derive(Args, Debug, Serialize)]
pub struct PolicyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Intensity vector, comma separated; defaults to the configured `lambda0`.
    #[arg(long)]
    pub lambda: Option<String>,
    /// Intensity grid for the weight table: `lo:hi:n[,lo:hi:n..]`.
    /// Defaults to `0:5*mean:41` per class.
    #[arg(long)]
    pub grid: Option<String>,
}

/// Log utility: the optimal policy. Power and exponential utility: the
/// policy of an investor who treats the current intensities as constant.
pub fn policy(cfg: &RunConfig, a: &PolicyArgs) -> Run {
    let m = cfg.hawkes.m();
    let lambda = match &a.lambda {
        Some(s) => parse_lambda(s, m)?,
        None => cfg.hawkes.lambda0().to_vec(),
    };
    let axes = match &a.grid {
        Some(s) => parse_axes(s, m, true)?,
        None => {
            let scale = cfg.hawkes.stationary_mean().unwrap_or_else(|_| cfg.hawkes.lambda0().to_vec());
            (0..m).map(|l| Axis { min: 0.0, max: 5.0 * scale[l].max(cfg.hawkes.lambda_inf()[l]).max(1e-3), count: 41 }).collect()
        }
    };
    let pref = preference(cfg)?;
    let mut out = Output::new(&a.common.out, "policy", cfg, a)?;
    let sp = cfg.market.spectral();
    let k = cfg.market.k();
    let merton = json!({
        "omega_bar": (0..m).map(|l| cfg.market.rbar()[l] / sp.kappa1[l]).collect::<Vec<_>>(),
        "omega_perp": cfg.market.rperp().iter().enumerate().map(|(i, v)| v / sp.kappa2[i / k]).collect::<Vec<_>>(),
    });
    let doc = match pref {
        ClassPreference::Log => json!({
            "utility": cfg.utility,
            "policy": log_optimal_policy(&cfg.market, &lambda, cfg.utility.beta())?,
            "merton": merton,
        }),
        _ => json!({
            "utility": cfg.utility,
            "frozen_intensity_policy": preference_policy(&cfg.market, &lambda, pref)?,
            "lambda": lambda,
        }),
    };
    out.json("policy.json", &doc)?;

    let mut header: Vec<String> = numbered("lambda", m).collect();
    header.extend(numbered("omega_bar", m));
    let mut csv = Csv::new(&header);
    for lam in product(&axes) {
        let bar = match pref {
            ClassPreference::Log => log_optimal_policy(&cfg.market, &lam, cfg.utility.beta())?.omega_bar,
            _ => preference_policy(&cfg.market, &lam, pref)?.class_totals,
        };
        csv.row(&lam.iter().chain(&bar).map(|v| fmt(*v)).collect::<Vec<_>>());
    }
    out.bytes("omega_grid.csv", csv.0.as_bytes())?;
    Ok(out.written().to_vec())
}

#[derive(Args, Debug, Serialize)]
pub struct ValueArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// `N` nodes per axis on the default box, or `lo:hi:n[,lo:hi:n..]`.
    #[arg(long, default_value = "17")]
    pub grid: String,
    #[arg(long, default_value_t = 2000)]
    pub paths: usize,
    /// Truncation horizon of the discounted integrals; derived from `--tol` when absent.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Tail tolerance for the truncation horizon. Defaults to 1e-6 (log) or 1e-9 (power, exponential).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Time step of the transversality simulation (log utility).
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    /// Paths of the transversality simulation (log utility).
    #[arg(long, default_value_t = 400)]
    pub tv_paths: usize,
    /// Last time of the transversality table; defaults to `10 / beta`.
    #[arg(long)]
    pub tv_horizon: Option<f64>,
    /// Fixed-point iteration cap (power, exponential).
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    /// Relative change at which the fixed point stops.
    #[arg(long, default_value_t = 1e-6)]
    pub iter_tol: f64,
    #[arg(long, default_value_t = 1.0)]
    pub relaxation: f64,
    /// Plain iteration without Anderson mixing.
    #[arg(long)]
    pub no_acceleration: bool,
}

pub fn value(cfg: &RunConfig, a: &ValueArgs) -> Run {
    if let Some(h) = a.horizon {
        positive("horizon", h)?;
    }
    let grid = parse_grid(&a.grid, cfg, a.common.seed)?;
    let m = cfg.hawkes.m();
    let mut out = Output::new(&a.common.out, "value", cfg, a)?;
    match cfg.utility {
        UtilitySpec::Log { beta } => {
            let mc = McSpec { paths: a.paths, seed: a.common.seed, horizon: a.horizon, tail_tol: positive("tol", a.tol.unwrap_or(1e-6))?, h_max: None };
            let field = log_value_field(&cfg.market, &cfg.hawkes, beta, &grid, &mc)?;
            let mut header: Vec<String> = numbered("lambda", m).collect();
            header.extend(["f", "stderr", "source"].map(String::from));
            let mut csv = Csv::new(&header);
            for (q, p) in grid.points().iter().enumerate() {
                let mut row: Vec<String> = p.iter().map(|v| fmt(*v)).collect();
                row.extend([field.value[q], field.stderr[q], field.source[q]].map(fmt));
                csv.row(&row);
            }
            out.bytes("value.csv", csv.0.as_bytes())?;
            out.json("value.json", &field)?;
            out.json("hjb.json", &hjb_residual_log(&cfg.market, &cfg.hawkes, &field)?)?;
            let last = positive("tv-horizon", a.tv_horizon.unwrap_or(10.0 / beta))?;
            let times: Vec<f64> = (0..=10).map(|i| last * i as f64 / 10.0).collect();
            let tv = transversality_check(&cfg.market, &cfg.hawkes, beta, LogValueFn::Field(&field), &times, 1.0, positive("dt", a.dt)?, a.tv_paths, a.common.seed)?;
            out.json("transversality.json", &tv)?;
        }
        _ => {
            let spec = FixedPointSpec {
                mc: McSpec { paths: a.paths, seed: a.common.seed, horizon: a.horizon, tail_tol: positive("tol", a.tol.unwrap_or(1e-9))?, h_max: None },
                max_iter: a.max_iter,
                tol: positive("iter-tol", a.iter_tol)?,
                relaxation: a.relaxation,
                accelerate: !a.no_acceleration,
            };
            let field = g_fixed_point(&cfg.market, &cfg.hawkes, &cfg.utility, &grid, &spec)?;
            let n = cfg.market.n();
            let mut header: Vec<String> = numbered("lambda", m).collect();
            header.extend(["g", "stderr"].map(String::from));
            header.extend(numbered("h", m));
            header.extend(numbered("omega", n));
            header.extend(numbered("omega_frozen", n));
            header.extend(["consumption", "flagged"].map(String::from));
            let mut csv = Csv::new(&header);
            for (q, p) in grid.points().iter().enumerate() {
                let mut row: Vec<String> = p.iter().map(|v| fmt(*v)).collect();
                row.extend([field.g[q], field.stderr[q]].map(fmt));
                row.extend(field.distortion[q].iter().map(|v| fmt(*v)));
                row.extend(field.weights[q].iter().map(|v| fmt(*v)));
                row.extend(field.frozen_weights[q].iter().map(|v| fmt(*v)));
                row.push(fmt(field.consumption[q]));
                row.push(u8::from(field.flagged[q]).to_string());
                csv.row(&row);
            }
            out.bytes("value.csv", csv.0.as_bytes())?;
            out.json("value.json", &field)?;
            if !field.converged {
                return Err(CliError::Runtime(format!("fixed point did not converge in {} iterations; partial results written", field.iterations.len())));
            }
        }
    }
    Ok(out.written().to_vec())
}

#[derive(Args, Debug, Serialize)]
pub struct CharfnArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Count frequencies, applied to every class.
    #[arg(long, default_value = "0.5,1,2")]
    pub u: String,
    /// Intensity frequency, applied to every class.
    #[arg(long, default_value_t = 0.0)]
    pub v: f64,
    /// Largest horizon; the table uses `T/3`, `2T/3` and `T`.
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
}

pub fn charfn(cfg: &RunConfig, a: &CharfnArgs) -> Run {
    let us = parse_list("u", &a.u)?;
    let t_max = positive("horizon", a.horizon)?;
    if !a.v.is_finite() {
        return Err(invalid("v", "must be finite"));
    }
    if a.paths < 2 {
        return Err(invalid("paths", "need at least 2"));
    }
    let m = cfg.hawkes.m();
    let mut out = Output::new(&a.common.out, "charfn", cfg, a)?;
    let mut csv = Csv::new(&["u", "v", "T", "re_phi", "im_phi", "re_phi_mc", "im_phi_mc", "stderr"].map(String::from));
    for &u in &us {
        for i in 1..=3 {
            let t = t_max * i as f64 / 3.0;
            let (uu, vv) = (vec![u; m], vec![a.v; m]);
            let exact = riccati_solve(&cfg.hawkes, &uu, &vv, t)?.phi;
            let mc = charfn_mc(&cfg.hawkes, &uu, &vv, t, a.paths, a.common.seed)?;
            csv.row(&[u, a.v, t, exact.re, exact.im, mc.phi.re, mc.phi.im, mc.stderr()].map(fmt));
        }
    }
    out.bytes("charfn.csv", csv.0.as_bytes())?;
    Ok(out.written().to_vec())
}

#[derive(Args, Debug, Serialize)]
pub struct FilterArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Returns CSV: a header, then `time, r_1, .., r_m` rows.
    #[arg(long)]
    pub data: PathBuf,
    /// Events are returns beyond this many trailing standard deviations.
    #[arg(long, default_value_t = 3.0)]
    pub threshold: f64,
    /// Trailing window length in observations.
    #[arg(long, default_value_t = 60)]
    pub window: usize,
    /// Spacing of the output rows in years.
    #[arg(long, default_value_t = TRADING_DAY)]
    pub dt: f64,
    /// Observations per year when the time column holds dates.
    #[arg(long, default_value_t = 252.0)]
    pub periods_per_year: f64,
    /// Count large positive returns as events too.
    #[arg(long)]
    pub two_sided: bool,
    /// Fit the intensity parameters by maximum likelihood first, starting from the config.
    #[arg(long)]
    pub calibrate: bool,
}

pub fn filter(cfg: &RunConfig, a: &FilterArgs) -> Run {
    let file = File::open(&a.data).map_err(|e| CliError::Validation(format!("--data {}: {e}", a.data.display())))?;
    let (series, axis) = read_returns_csv(file, a.periods_per_year).map_err(|e| CliError::Validation(format!("--data {}: {e}", a.data.display())))?;
    if series.returns.len() != cfg.hawkes.m() {
        return Err(CliError::Validation(format!("--data has {} return columns but hawkes.m is {}", series.returns.len(), cfg.hawkes.m())));
    }
    let events = detect_jumps(&series, a.window, a.threshold, !a.two_sided)?;
    let mut out = Output::new(&a.common.out, "filter", cfg, a)?;
    out.json("events.json", &json!({ "columns": series.names, "time_axis": axis, "events": events }))?;
    let params = if a.calibrate {
        let fit = calibrate_mle(&events, &cfg.hawkes, &MleBounds::default(), &MleOptions::default())?;
        out.json("calibration.json", &fit)?;
        fit.params
    } else {
        cfg.hawkes.clone()
    };
    let tr = filter_intensity(&events, &params, positive("dt", a.dt)?)?;
    let mut buf = Vec::new();
    write_trajectory_csv(&tr, &mut buf)?;
    out.bytes("intensity.csv", &buf)?;
    Ok(out.written().to_vec())
}

#[derive(Args, Debug, Serialize)]
pub struct MomentsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Length of the ergodic run; defaults to `2000 / min alpha`.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Batches for the batch-means standard error.
    #[arg(long, default_value_t = 20)]
    pub batches: usize,
}

pub fn moments(cfg: &RunConfig, a: &MomentsArgs) -> Run {
    let slow = cfg.hawkes.alpha().iter().cloned().fold(f64::INFINITY, f64::min);
    let horizon = positive("horizon", a.horizon.unwrap_or(2000.0 / slow))?;
    if a.batches < 2 {
        return Err(invalid("batches", "need at least 2"));
    }
    let mut out = Output::new(&a.common.out, "moments", cfg, a)?;
    let report = cfg.hawkes.check_stationarity();
    let doc = match cfg.hawkes.stationary_mean() {
        Ok(mean) => {
            let erg = ergodic_average(&cfg.hawkes, horizon, 50.0 / slow, a.batches, a.common.seed)?;
            let z: Vec<f64> = (0..mean.len()).map(|l| (erg.time_average[l] - mean[l]) / erg.stderr[l]).collect();
            json!({ "stationarity": report, "stationary_mean": mean, "ergodic": erg, "z_scores": z })
        }
        Err(_) => json!({ "stationarity": report, "stationary_mean": null }),
    };
    out.json("moments.json", &doc)?;
    Ok(out.written().to_vec())
}

#[derive(Args, Debug, Serialize)]
pub struct ScenarioArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 10.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = TRADING_DAY)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub x0: f64,
}

/// One path of a two-class market under the log-optimal policy. Each row
/// also carries the class weights just before any jump at that time.
pub fn scenario(cfg: &RunConfig, a: &ScenarioArgs) -> Run {
    if cfg.market.m() != 2 {
        return Err(CliError::Validation(format!("market.m: scenario needs two classes, got {}", cfg.market.m())));
    }
    let beta = cfg.utility.beta();
    let spec = MarketSimSpec { x0: positive("x0", a.x0)?, horizon: positive("horizon", a.horizon)?, dt: positive("dt", a.dt)?, scheme: Scheme::Euler };
    let policy = LogOptimalPolicy::new(cfg.market.clone(), beta)?;
    let mut out = Output::new(&a.common.out, "scenario", cfg, a)?;
    let path = simulate_market(&cfg.market, &cfg.hawkes, &policy, &spec, a.common.seed, 0)?;
    let (m, k) = (2, cfg.market.k());
    let mut header: Vec<String> = vec!["t".into()];
    header.extend(numbered("lambda", m));
    header.extend(numbered("omega_bar", m));
    header.extend(numbered("omega_bar_left", m));
    header.extend(numbered("S", m));
    header.extend(numbered("N", m));
    header.push("X".into());
    let mut csv = Csv::new(&header);
    for i in 0..path.times.len() {
        let bar = log_optimal_policy(&cfg.market, &path.lambda[i], beta)?.omega_bar;
        let left = if i > 0 && path.counts[i] != path.counts[i - 1] {
            let pre = relax(&cfg.hawkes, &path.lambda[i - 1], path.times[i] - path.times[i - 1]);
            log_optimal_policy(&cfg.market, &pre, beta)?.omega_bar
        } else {
            bar.clone()
        };
        let mut row = vec![fmt(path.times[i])];
        row.extend(path.lambda[i].iter().chain(&bar).chain(&left).map(|v| fmt(*v)));
        // First asset of each class stands for the class price.
        row.extend((0..m).map(|l| fmt(path.prices[i][1 + l * k])));
        row.extend(path.counts[i].iter().map(u64::to_string));
        row.push(fmt(path.wealth[i]));
        csv.row(&row);
    }
    out.bytes("scenario.csv", csv.0.as_bytes())?;
    let mut buf = Vec::new();
    path.write_events_csv(&mut buf)?;
    out.bytes("events.csv", &buf)?;
    Ok(out.written().to_vec())
}
