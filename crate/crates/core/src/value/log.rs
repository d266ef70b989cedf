use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hawkes::{HawkesParams, IntensityState};
use crate::market::MarketParams;
use crate::policy::{omega_perp_star, ClassPreference, ClassProblem, LogOptimalPolicy, Method};
use crate::simulate::{simulate_market_ensemble, MarketSimSpec, Scheme, Thinning};
use crate::stats::mean_stderr;

use super::grid::Grid;
use super::quadrature::{default_bounds, default_h_max, discounted_integral};

/// Source term of the log investor's intensity component.
///
/// `F(lambda) = 1 - r/beta - log(beta) + Phi*(lambda)/beta`, where `Phi*` is
/// the minimised portfolio objective (the negative of the optimal excess
/// growth rate). The intensity component `f` of the value function
/// `log(x)/beta + f(lambda)` satisfies `(A - beta) f = F`, so
/// `f = -int e^{-beta s} E[F(lambda_s)] ds`.
#[derive(Debug, Clone)]
pub struct LogSource {
    classes: Vec<ClassProblem>,
    constant: f64,
    beta: f64,
}

impl LogSource {
    pub fn new(market: &MarketParams, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::param("utility.beta", "must be finite and > 0"));
        }
        let perp = omega_perp_star(market);
        let perp_obj = -perp.iter().zip(market.rperp()).map(|(a, b)| a * b).sum::<f64>() + 0.5 * market.quad_form(&perp);
        Ok(Self {
            classes: (0..market.m()).map(|l| ClassProblem::new(market, l, 0.0, ClassPreference::Log)).collect(),
            constant: 1.0 - market.r() / beta - beta.ln() + perp_obj / beta,
            beta,
        })
    }

    /// Minimised objective at `lambda`.
    pub fn objective(&self, lambda: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (l, template) in self.classes.iter().enumerate() {
            let mut p = template.clone();
            p.intensity = lambda[l];
            total += p.solve(Method::Auto)?.objective;
        }
        Ok(total)
    }

    pub fn eval(&self, lambda: &[f64]) -> Result<f64> {
        Ok(self.constant + self.objective(lambda)? / self.beta)
    }
}

/// `F(lambda)` for one intensity vector.
pub fn f_source(market: &MarketParams, beta: f64, lambda: &[f64]) -> Result<f64> {
    LogSource::new(market, beta)?.eval(lambda)
}

/// Monte Carlo settings shared by the Feynman-Kac estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSpec {
    pub paths: usize,
    pub seed: u64,
    /// Truncation horizon; derived from `tail_tol` when absent.
    pub horizon: Option<f64>,
    /// Target for the neglected tail `e^{-beta T} sup|F| / beta`.
    pub tail_tol: f64,
    /// Largest quadrature sub-step; defaults to `0.1 / max alpha`.
    pub h_max: Option<f64>,
}

impl Default for McSpec {
    fn default() -> Self {
        Self { paths: 2000, seed: 0, horizon: None, tail_tol: 1e-6, h_max: None }
    }
}

impl McSpec {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.paths < 2 {
            return Err(Error::param("paths", "need at least 2 paths"));
        }
        if !(self.tail_tol.is_finite() && self.tail_tol > 0.0) {
            return Err(Error::param("tol", "must be finite and > 0"));
        }
        if let Some(h) = self.h_max {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::param("h_max", "must be finite and > 0"));
            }
        }
        Ok(())
    }
}

/// Smallest whole horizon with `e^{-rate T} sup / rate <= tol`.
pub fn required_horizon(rate: f64, sup: f64, tol: f64) -> f64 {
    let r = -(tol * rate / sup).ln() / rate;
    if r.is_finite() {
        r.ceil().max(1.0)
    } else {
        1.0
    }
}

fn resolve_horizon(spec: &McSpec, rate: f64, sup: f64) -> Result<f64> {
    let required = required_horizon(rate, sup, spec.tail_tol);
    match spec.horizon {
        None => Ok(required),
        Some(t) if !(t.is_finite() && t > 0.0) => Err(Error::param("horizon", "must be finite and > 0")),
        Some(t) if t < required => Err(Error::HorizonTooShort { given: t, required }),
        Some(t) => Ok(t),
    }
}

/// `sup |F|` over the nodes of a 9-per-axis grid on the default box,
/// widened to contain `extra`.
fn sup_abs_source(source: &LogSource, hawkes: &HawkesParams, extra: &[&[f64]], seed: u64) -> Result<f64> {
    let mut bounds = default_bounds(hawkes, seed)?;
    for x in extra {
        for (b, &v) in bounds.iter_mut().zip(x.iter()) {
            b.0 = b.0.min(v);
            b.1 = b.1.max(v);
        }
    }
    let grid = Grid::uniform(&bounds, 9)?;
    let mut sup: f64 = 0.0;
    for p in grid.points() {
        sup = sup.max(source.eval(&p)?.abs());
    }
    Ok(sup)
}

/// Outcome of a single-point Feynman-Kac estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FkEstimate {
    pub lambda0: Vec<f64>,
    /// `int_0^T e^{-beta s} E[F(lambda_s)] ds`.
    pub integral: f64,
    pub stderr: f64,
    /// Intensity component `f(lambda0) = -integral`.
    pub value: f64,
    /// `e^{-beta T} sup|F| / beta`.
    pub truncation_bound: f64,
    pub horizon: f64,
    pub paths: usize,
    pub sup_abs_source: f64,
}

fn path_integrals(source: &LogSource, hawkes: &HawkesParams, beta: f64, horizon: f64, h_max: f64, spec: &McSpec) -> Result<Vec<f64>> {
    (0..spec.paths as u64)
        .into_par_iter()
        .map(|p| {
            let path = Thinning::new(hawkes, None, spec.seed, p)?.run(&IntensityState::initial(hawkes), horizon)?;
            let mut err = None;
            let v = discounted_integral(hawkes, &path, beta, h_max, |lam| {
                source.eval(lam).unwrap_or_else(|e| {
                    err.get_or_insert(e);
                    f64::NAN
                })
            });
            match err {
                Some(e) => Err(e),
                None => Ok(v),
            }
        })
        .collect()
}

fn check_shapes(market: &MarketParams, hawkes: &HawkesParams) -> Result<()> {
    if market.m() != hawkes.m() {
        return Err(Error::Shape(format!("hawkes has {} classes, market has {}", hawkes.m(), market.m())));
    }
    hawkes.stationary_mean()?;
    Ok(())
}

/// Estimates `int_0^T e^{-beta s} E[F(lambda_s) | lambda_0] ds` by Monte
/// Carlo, integrating `F` along each path with an exponentially fitted
/// trapezoid rule.
pub fn f_feynman_kac(market: &MarketParams, hawkes: &HawkesParams, beta: f64, lambda0: &[f64], spec: &McSpec) -> Result<FkEstimate> {
    spec.validate()?;
    check_shapes(market, hawkes)?;
    let source = LogSource::new(market, beta)?;
    let start = hawkes.with_lambda0(lambda0.to_vec())?;
    let sup = sup_abs_source(&source, hawkes, &[lambda0], spec.seed)?;
    let horizon = resolve_horizon(spec, beta, sup)?;
    let h_max = spec.h_max.unwrap_or_else(|| default_h_max(hawkes));
    let values = path_integrals(&source, &start, beta, horizon, h_max, spec)?;
    let est = mean_stderr(&values);
    Ok(FkEstimate {
        lambda0: lambda0.to_vec(),
        integral: est.mean,
        stderr: est.stderr,
        value: -est.mean,
        truncation_bound: (-beta * horizon).exp() * sup / beta,
        horizon,
        paths: spec.paths,
        sup_abs_source: sup,
    })
}

/// The log investor's intensity component `f` on a grid, estimated with
/// common random numbers across nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogValueField {
    pub grid: Grid,
    pub beta: f64,
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
    pub source: Vec<f64>,
    pub horizon: f64,
    pub truncation_bound: f64,
    pub spec: McSpec,
    /// Per-path values, `per_path[node][path]`.
    #[serde(skip)]
    pub per_path: Vec<Vec<f64>>,
}

impl LogValueField {
    pub fn interpolate(&self, lambda: &[f64]) -> (f64, bool) {
        self.grid.interpolate(&self.value, lambda)
    }
}

pub fn log_value_field(market: &MarketParams, hawkes: &HawkesParams, beta: f64, grid: &Grid, spec: &McSpec) -> Result<LogValueField> {
    spec.validate()?;
    check_shapes(market, hawkes)?;
    if grid.dim() != hawkes.m() {
        return Err(Error::Shape(format!("grid has {} axes, hawkes has {} classes", grid.dim(), hawkes.m())));
    }
    let source = LogSource::new(market, beta)?;
    let points = grid.points();
    let refs: Vec<&[f64]> = points.iter().map(|p| p.as_slice()).collect();
    let sup = sup_abs_source(&source, hawkes, &refs, spec.seed)?;
    let horizon = resolve_horizon(spec, beta, sup)?;
    let h_max = spec.h_max.unwrap_or_else(|| default_h_max(hawkes));
    let mut per_path = Vec::with_capacity(points.len());
    for p in &points {
        let start = hawkes.with_lambda0(p.clone())?;
        per_path.push(path_integrals(&source, &start, beta, horizon, h_max, spec)?.into_iter().map(|v| -v).collect::<Vec<_>>());
    }
    let stats: Vec<_> = per_path.iter().map(|v| mean_stderr(v)).collect();
    Ok(LogValueField {
        grid: grid.clone(),
        beta,
        value: stats.iter().map(|s| s.mean).collect(),
        stderr: stats.iter().map(|s| s.stderr).collect(),
        source: points.iter().map(|p| source.eval(p)).collect::<Result<_>>()?,
        horizon,
        truncation_bound: (-beta * horizon).exp() * sup / beta,
        spec: *spec,
        per_path,
    })
}

/// HJB residual at one interior grid node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HjbPoint {
    pub lambda: Vec<f64>,
    pub residual: f64,
    pub stderr: f64,
    pub discretization: f64,
    pub budget: f64,
    /// Some excited state `lambda + d_l` left the grid box.
    pub flagged: bool,
    pub within_budget: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HjbReport {
    pub points: Vec<HjbPoint>,
    /// Share of unflagged interior nodes whose residual is within budget.
    pub fraction_within: f64,
    pub checked: usize,
}

/// Linear combination of node values: `(node, coefficient)` pairs.
type Stencil = Vec<(usize, f64)>;

/// Third difference along `axis` near `idx`, shifted inwards at the edges.
fn third_difference(grid: &Grid, values: &[f64], idx: &[usize], axis: usize) -> f64 {
    let n = grid.axes()[axis].count;
    let start = idx[axis].saturating_sub(1).min(n - 4);
    let mut at = idx.to_vec();
    let mut v = [0.0; 4];
    for (k, slot) in v.iter_mut().enumerate() {
        at[axis] = start + k;
        *slot = values[grid.flat_index(&at)];
    }
    v[3] - 3.0 * v[2] + 3.0 * v[1] - v[0]
}

/// Second difference along `axis` at the node nearest to `x`.
fn second_difference_near(grid: &Grid, values: &[f64], x: &[f64], axis: usize) -> f64 {
    let idx: Vec<usize> = grid
        .axes()
        .iter()
        .zip(x)
        .map(|(a, &v)| (((v.clamp(a.min, a.max) - a.min) / a.step()).round() as usize).min(a.count - 1))
        .collect();
    let n = grid.axes()[axis].count;
    let centre = idx[axis].clamp(1, n - 2);
    let mut at = idx.clone();
    let mut v = [0.0; 3];
    for (k, slot) in v.iter_mut().enumerate() {
        at[axis] = centre + k - 1;
        *slot = values[grid.flat_index(&at)];
    }
    v[2] - 2.0 * v[1] + v[0]
}

/// Residual of `(A - beta) f - F` at every interior node of the field.
///
/// The drift uses central differences and the jump term multilinear
/// interpolation at `lambda + d_l`. Because every node shares the same
/// random numbers, the residual is a per-path linear combination whose
/// spread gives its standard error. The budget per node is
/// `3 stderr + 2 (difference and interpolation error estimates) + tail`.
pub fn hjb_residual_log(market: &MarketParams, hawkes: &HawkesParams, field: &LogValueField) -> Result<HjbReport> {
    let grid = &field.grid;
    if grid.axes().iter().any(|a| a.count < 4) {
        return Err(Error::GridTooCoarse("the residual check needs at least 4 nodes per axis".into()));
    }
    if field.per_path.len() != grid.len() {
        return Err(Error::Shape("field lacks per-path values".into()));
    }
    let source = LogSource::new(market, field.beta)?;
    let beta = field.beta;
    let m = hawkes.m();
    let n_paths = field.per_path[0].len();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for g in (0..grid.len()).filter(|&g| grid.is_interior(g)) {
        let idx = grid.multi_index(g);
        let lambda = grid.point(g);
        let mut stencil: Stencil = vec![(g, -beta)];
        let mut flagged = false;
        let mut disc = 0.0;
        for l in 0..m {
            let drift = hawkes.alpha()[l] * (hawkes.lambda_inf()[l] - lambda[l]);
            let h = grid.axes()[l].step();
            let mut up = idx.clone();
            up[l] += 1;
            let mut down = idx.clone();
            down[l] -= 1;
            stencil.push((grid.flat_index(&up), drift / (2.0 * h)));
            stencil.push((grid.flat_index(&down), -drift / (2.0 * h)));
            disc += (drift * third_difference(grid, &field.value, &idx, l) / (6.0 * h)).abs();

            let target: Vec<f64> = lambda.iter().zip(hawkes.d_column(l)).map(|(a, b)| a + b).collect();
            flagged |= grid.hat_weights(&target, &mut weights);
            for &(q, w) in &weights {
                stencil.push((q, lambda[l] * w));
            }
            stencil.push((g, -lambda[l]));
            let curv: f64 = (0..m).map(|k| second_difference_near(grid, &field.value, &target, k).abs()).sum();
            disc += lambda[l] * curv / 8.0;
        }
        let f_here = source.eval(&lambda)?;
        let per_path: Vec<f64> = (0..n_paths)
            .map(|p| stencil.iter().map(|&(q, c)| c * field.per_path[q][p]).sum::<f64>() - f_here)
            .collect();
        let est = mean_stderr(&per_path);
        let budget = 3.0 * est.stderr + 2.0 * disc + beta * field.truncation_bound;
        points.push(HjbPoint {
            lambda,
            residual: est.mean,
            stderr: est.stderr,
            discretization: disc,
            budget,
            flagged,
            within_budget: est.mean.abs() <= budget,
        });
    }
    let checked: Vec<&HjbPoint> = points.iter().filter(|p| !p.flagged).collect();
    let fraction_within = if checked.is_empty() {
        f64::NAN
    } else {
        checked.iter().filter(|p| p.within_budget).count() as f64 / checked.len() as f64
    };
    Ok(HjbReport { checked: checked.len(), points, fraction_within })
}

/// Intensity component used in the transversality check.
#[derive(Debug, Clone, Copy)]
pub enum LogValueFn<'a> {
    Field(&'a LogValueField),
    Constant(f64),
}

impl LogValueFn<'_> {
    fn eval(&self, lambda: &[f64]) -> f64 {
        match self {
            LogValueFn::Field(f) => f.interpolate(lambda).0,
            LogValueFn::Constant(c) => *c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransversalityReport {
    pub times: Vec<f64>,
    /// `E[e^{-beta t} (f(lambda_t) + log(X_t) / beta)]`.
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// The `e^{-beta t} log(X_t) / beta` part alone.
    pub wealth_part: Vec<f64>,
    /// The `e^{-beta t} f(lambda_t)` part alone.
    pub intensity_part: Vec<f64>,
    pub ruined_paths: usize,
    /// Last value within three standard errors of zero and the absolute
    /// values non-increasing over the second half of the times.
    pub verdict: bool,
}

/// Simulates the log-optimal wealth and evaluates the discounted value
/// along it at the requested times.
#[allow(clippy::too_many_arguments)]
pub fn transversality_check(
    market: &MarketParams,
    hawkes: &HawkesParams,
    beta: f64,
    f: LogValueFn<'_>,
    times: &[f64],
    x0: f64,
    dt: f64,
    paths: usize,
    seed: u64,
) -> Result<TransversalityReport> {
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
        return Err(Error::param("times", "need an increasing list of non-negative times"));
    }
    if paths < 2 {
        return Err(Error::param("paths", "need at least 2 paths"));
    }
    let policy = LogOptimalPolicy::new(market.clone(), beta)?;
    let horizon = *times.last().unwrap();
    let spec = MarketSimSpec { x0, horizon: horizon.max(dt), dt, scheme: Scheme::LogEuler };
    let sims = simulate_market_ensemble(market, hawkes, &policy, &spec, paths, seed)?;
    let ruined_paths = sims.iter().filter(|s| s.ruined).count();
    let k = times.len();
    let mut total = vec![Vec::with_capacity(paths); k];
    let mut wealth_part = vec![0.0; k];
    let mut intensity_part = vec![0.0; k];
    for s in &sims {
        for (i, &t) in times.iter().enumerate() {
            let row = s.times.partition_point(|&u| u <= t + 1e-9).max(1) - 1;
            let disc = (-beta * t).exp();
            let lw = if s.ruined && s.times[row] < t { f64::NEG_INFINITY } else { s.wealth[row].ln() };
            let a = disc * lw / beta;
            let b = disc * f.eval(&s.lambda[row]);
            wealth_part[i] += a / paths as f64;
            intensity_part[i] += b / paths as f64;
            total[i].push(a + b);
        }
    }
    let stats: Vec<_> = total.iter().map(|v| mean_stderr(v)).collect();
    let mean: Vec<f64> = stats.iter().map(|s| s.mean).collect();
    let stderr: Vec<f64> = stats.iter().map(|s| s.stderr).collect();
    let max_se = stderr.iter().cloned().fold(0.0, f64::max);
    let tail = &mean[k / 2..];
    let verdict = mean[k - 1].abs() <= 3.0 * max_se.max(f64::MIN_POSITIVE)
        && tail.windows(2).all(|w| w[1].abs() <= w[0].abs() + 3.0 * max_se)
        && ruined_paths == 0;
    Ok(TransversalityReport { times: times.to_vec(), mean, stderr, wealth_part, intensity_part, ruined_paths, verdict })
}
