use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hawkes::{HawkesParams, IntensityState};
use crate::market::MarketParams;
use crate::policy::{preference_policy, ClassPreference};
use crate::simulate::Thinning;
use crate::stats::mean_stderr;
use crate::utility::UtilitySpec;

use super::grid::Grid;
use super::log::{required_horizon, McSpec};
use super::quadrature::{default_h_max, visit_nodes};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointSpec {
    pub mc: McSpec,
    pub max_iter: usize,
    /// Stop once the relative sup-norm change falls below this.
    pub tol: f64,
    /// `g <- w G(g) + (1 - w) g`; 1 is the plain iteration.
    pub relaxation: f64,
    /// Depth-one Anderson mixing on top of the relaxed map. Falls back to
    /// the plain step whenever the mixed iterate is not positive.
    pub accelerate: bool,
}

impl Default for FixedPointSpec {
    fn default() -> Self {
        Self { mc: McSpec { tail_tol: 1e-9, ..McSpec::default() }, max_iter: 50, tol: 1e-6, relaxation: 1.0, accelerate: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Map residual at the current iterate, `max_q |G(g) - g| / |G(g)|`.
    pub relative_change: f64,
    /// Whether the next iterate came from the mixed step.
    pub accelerated: bool,
    pub min_g: f64,
    pub max_g: f64,
}

/// Intensity component `g` of the power or exponential value function on
/// a grid, with the policy it induces.
///
/// Power utility: `V = x^gamma g(lambda) / gamma` and `C / x = g^{1/(gamma-1)}`.
/// Exponential utility: `V = -g(lambda) e^{-kappa x}` with `kappa = r gamma`
/// and `C = (kappa x - log g - log kappa) / gamma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GField {
    pub utility: UtilitySpec,
    pub grid: Grid,
    /// Discount rate of the fixed-point map: `beta - r gamma` for power
    /// utility, `max(rho, r)` with `rho = beta - r + r log kappa` for
    /// exponential utility.
    pub rate: f64,
    pub kappa: Option<f64>,
    pub horizon: f64,
    pub g: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Distorted intensities `h_l = lambda_l g(lambda + d_l) / g(lambda)`.
    pub distortion: Vec<Vec<f64>>,
    /// Optimal risky positions: wealth fractions (power) or amounts (exponential).
    pub weights: Vec<Vec<f64>>,
    /// The same preference solved at the undistorted intensities.
    pub frozen_weights: Vec<Vec<f64>>,
    /// `C / x` for power utility, `C - r x` for exponential utility.
    pub consumption: Vec<f64>,
    /// `lambda + d_l` left the grid box for some `l`.
    pub flagged: Vec<bool>,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    /// The last three successive changes each shrank.
    pub contracting: bool,
    pub spec: FixedPointSpec,
}

struct Problem<'a> {
    market: &'a MarketParams,
    grid: &'a Grid,
    points: Vec<Vec<f64>>,
    /// `lambda + d_l` per node and class.
    excited: Vec<Vec<Vec<f64>>>,
    pref: ClassPreference,
    kind: Kind,
}

#[derive(Clone, Copy)]
enum Kind {
    Power { gamma: f64 },
    /// `shift` is the amount by which the map's discount exceeds `rho`.
    Exponential { r: f64, kappa: f64, shift: f64 },
}

impl Problem<'_> {
    fn distortion(&self, g: &[f64], q: usize) -> (Vec<f64>, bool) {
        let mut flagged = false;
        let h = self.excited[q]
            .iter()
            .enumerate()
            .map(|(l, x)| {
                let (up, c) = self.grid.interpolate(g, x);
                flagged |= c;
                self.points[q][l] * (up / g[q])
            })
            .collect();
        (h, flagged)
    }

    /// Optimal scalar objective turned into the rate `K*` of the map.
    fn k_star(&self, h: &[f64]) -> Result<f64> {
        let obj = preference_policy(self.market, h, self.pref)?.objective;
        Ok(match self.kind {
            Kind::Power { gamma } => gamma * obj,
            Kind::Exponential { kappa, .. } => -kappa * obj,
        })
    }

    fn source(&self, g: &[f64]) -> Result<Vec<f64>> {
        (0..g.len())
            .into_par_iter()
            .map(|q| {
                let (h, _) = self.distortion(g, q);
                let k = self.k_star(&h)?;
                Ok(match self.kind {
                    Kind::Power { gamma } => (1.0 - gamma) * g[q].powf(gamma / (gamma - 1.0)) - g[q] * k,
                    Kind::Exponential { r, shift, .. } => -g[q] * (r * g[q].ln() + k - shift),
                })
            })
            .collect()
    }
}

/// Per-path rows `int e^{-rate s} phi_q(lambda_s) ds` of the hat basis for
/// paths started at `lambda0`.
fn basis_rows(hawkes: &HawkesParams, grid: &Grid, lambda0: &[f64], rate: f64, horizon: f64, h_max: f64, mc: &McSpec) -> Result<Vec<Vec<f64>>> {
    let start = hawkes.with_lambda0(lambda0.to_vec())?;
    (0..mc.paths as u64)
        .into_par_iter()
        .map(|p| {
            let path = Thinning::new(&start, None, mc.seed, p)?.run(&IntensityState::initial(&start), horizon)?;
            let mut row = vec![0.0; grid.len()];
            let mut w = Vec::with_capacity(1 << grid.dim());
            visit_nodes(&start, &path, rate, h_max, |lam, weight| {
                grid.hat_weights(lam, &mut w);
                for &(q, c) in &w {
                    row[q] += weight * c;
                }
            });
            Ok(row)
        })
        .collect()
}

fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    (0..rows[0].len()).map(|q| crate::stats::compensated_sum(rows.iter().map(|r| r[q])) / n).collect()
}

/// Solves `g = int_0^T e^{-rate s} E[G(g)(lambda_s)] ds` on the grid by
/// fixed-point iteration.
///
/// The expectation operator is assembled once as a matrix `W` acting on
/// node values through multilinear interpolation, with the same random
/// numbers for every starting node, so each iteration is a matrix-vector
/// product. The power map starts from `g = 1`; the exponential map starts
/// from the constant solution with the intensities frozen at their
/// stationary mean. The exponential map needs the spread of `K*` over the
/// box to be small against `rho`; otherwise an early iterate turns negative
/// and `LostPositivity` is returned.
pub fn g_fixed_point(market: &MarketParams, hawkes: &HawkesParams, utility: &UtilitySpec, grid: &Grid, spec: &FixedPointSpec) -> Result<GField> {
    utility.validate()?;
    spec.mc.validate()?;
    if spec.max_iter == 0 || !(spec.tol > 0.0) || !(spec.relaxation > 0.0 && spec.relaxation <= 1.0) {
        return Err(Error::param("fixed_point", "need max_iter >= 1, tol > 0 and relaxation in (0, 1]"));
    }
    if market.m() != hawkes.m() || grid.dim() != hawkes.m() {
        return Err(Error::Shape(format!("market m = {}, hawkes m = {}, grid axes = {}", market.m(), hawkes.m(), grid.dim())));
    }
    hawkes.stationary_mean()?;
    let r = market.r();
    let (kind, pref, rho, kappa) = match *utility {
        UtilitySpec::Power { beta, gamma } => (Kind::Power { gamma }, ClassPreference::Power { gamma }, beta - r * gamma, None),
        UtilitySpec::Exponential { beta, .. } => {
            let kappa = utility.kappa(r)?;
            let rho = beta - r + r * kappa.ln();
            // Discounting at `max(rho, r)` makes the map flat in the direction
            // of constant rescalings whenever `rho <= r`.
            (Kind::Exponential { r, kappa, shift: (r - rho).max(0.0) }, ClassPreference::Exponential { kappa }, rho, Some(kappa))
        }
        UtilitySpec::Log { .. } => {
            return Err(Error::param("utility.kind", "log utility has a closed-form wealth part; use the log value field"));
        }
    };
    if !(rho > 0.0) {
        return Err(Error::param("utility.beta", format!("the discount rate of the fixed-point map must be > 0, got {rho}")));
    }
    let rate = match kind {
        Kind::Exponential { shift, .. } => rho + shift,
        Kind::Power { .. } => rho,
    };
    let required = required_horizon(rate, 1.0, spec.mc.tail_tol * rate);
    let horizon = match spec.mc.horizon {
        None => required,
        Some(t) if t < required => return Err(Error::HorizonTooShort { given: t, required }),
        Some(t) => t,
    };
    let h_max = spec.mc.h_max.unwrap_or_else(|| default_h_max(hawkes));
    let points = grid.points();
    let excited: Vec<Vec<Vec<f64>>> = points
        .iter()
        .map(|p| (0..hawkes.m()).map(|l| p.iter().zip(hawkes.d_column(l)).map(|(a, b)| a + b).collect()).collect())
        .collect();
    let problem = Problem { market, grid, points, excited, pref, kind };

    let mut w_matrix = Vec::with_capacity(grid.len());
    for p in &problem.points {
        w_matrix.push(mean_rows(&basis_rows(hawkes, grid, p, rate, horizon, h_max, &spec.mc)?));
    }

    let mut g: Vec<f64> = match kind {
        Kind::Power { .. } => vec![1.0; grid.len()],
        Kind::Exponential { r, .. } => {
            let mean = hawkes.stationary_mean()?;
            vec![(-(rho + problem.k_star(&mean)?) / r).exp(); grid.len()]
        }
    };
    let mut iterations = Vec::new();
    let mut converged = false;
    // Previous iterate and its image under the relaxed map.
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
    for it in 1..=spec.max_iter {
        let s = problem.source(&g)?;
        let mapped: Vec<f64> = w_matrix.iter().map(|row| row.iter().zip(&s).map(|(a, b)| a * b).sum()).collect();
        let image: Vec<f64> = mapped.iter().zip(&g).map(|(n, o)| spec.relaxation * n + (1.0 - spec.relaxation) * o).collect();
        let min_image = image.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min_image > 0.0) || image.iter().any(|v| !v.is_finite()) {
            return Err(Error::LostPositivity { iteration: it, min_value: min_image });
        }
        let relative_change = image.iter().zip(&g).map(|(n, o)| ((n - o) / n).abs()).fold(0.0, f64::max);
        if relative_change < spec.tol {
            iterations.push(IterationRecord { iteration: it, relative_change, accelerated: false, min_g: min_image, max_g: image.iter().cloned().fold(0.0, f64::max) });
            g = image;
            converged = true;
            break;
        }
        let mixed = match (&previous, spec.accelerate) {
            (Some((g_old, image_old)), true) => anderson_step(&g, &image, g_old, image_old),
            _ => None,
        };
        let accelerated = mixed.is_some();
        let next = mixed.unwrap_or_else(|| image.clone());
        iterations.push(IterationRecord {
            iteration: it,
            relative_change,
            accelerated,
            min_g: next.iter().cloned().fold(f64::INFINITY, f64::min),
            max_g: next.iter().cloned().fold(0.0, f64::max),
        });
        previous = Some((std::mem::replace(&mut g, next), image));
    }
    let changes: Vec<f64> = iterations.iter().map(|r| r.relative_change).collect();
    let tail = &changes[changes.len().saturating_sub(4)..];
    let contracting = tail.len() >= 2 && tail.windows(2).all(|w| w[1] < w[0]);

    let s = problem.source(&g)?;
    let mut stderr = Vec::with_capacity(grid.len());
    for p in &problem.points {
        let rows = basis_rows(hawkes, grid, p, rate, horizon, h_max, &spec.mc)?;
        let vals: Vec<f64> = rows.iter().map(|row| row.iter().zip(&s).map(|(a, b)| a * b).sum()).collect();
        stderr.push(mean_stderr(&vals).stderr);
    }

    let mut distortion = Vec::with_capacity(grid.len());
    let mut flagged = Vec::with_capacity(grid.len());
    let mut weights = Vec::with_capacity(grid.len());
    let mut frozen_weights = Vec::with_capacity(grid.len());
    let mut consumption = Vec::with_capacity(grid.len());
    for q in 0..grid.len() {
        let (h, f) = problem.distortion(&g, q);
        weights.push(preference_policy(market, &h, pref)?.full);
        frozen_weights.push(preference_policy(market, &problem.points[q], pref)?.full);
        consumption.push(match *utility {
            UtilitySpec::Power { gamma, .. } => g[q].powf(1.0 / (gamma - 1.0)),
            UtilitySpec::Exponential { gamma, .. } => -(g[q].ln() + kappa.unwrap().ln()) / gamma,
            UtilitySpec::Log { .. } => unreachable!(),
        });
        distortion.push(h);
        flagged.push(f);
    }
    Ok(GField {
        utility: utility.resolved(r)?,
        grid: grid.clone(),
        rate,
        kappa,
        horizon,
        g,
        stderr,
        distortion,
        weights,
        frozen_weights,
        consumption,
        flagged,
        iterations,
        converged,
        contracting,
        spec: *spec,
    })
}

/// Secant step on the residual `f = T(g) - g` using the last two iterates.
/// Returns `None` when the step is degenerate or leaves the positive cone.
fn anderson_step(g: &[f64], image: &[f64], g_old: &[f64], image_old: &[f64]) -> Option<Vec<f64>> {
    let f: Vec<f64> = image.iter().zip(g).map(|(t, x)| t - x).collect();
    let df: Vec<f64> = f.iter().zip(image_old.iter().zip(g_old)).map(|(a, (t, x))| a - (t - x)).collect();
    let denom: f64 = df.iter().map(|v| v * v).sum();
    if !(denom > 0.0) {
        return None;
    }
    let theta = f.iter().zip(&df).map(|(a, b)| a * b).sum::<f64>() / denom;
    let next: Vec<f64> = image.iter().zip(image_old).map(|(t, t_old)| t - theta * (t - t_old)).collect();
    next.iter().all(|v| v.is_finite() && *v > 0.0).then_some(next)
}

/// Constant `g` of the jump-free power problem:
/// `g^{1/(gamma-1)} = (beta - r gamma + K*) / (1 - gamma)` with
/// `K* = -gamma theta^2 / (2 (1 - gamma))`.
pub fn power_g_without_jumps(beta: f64, gamma: f64, r: f64, theta2: f64) -> f64 {
    let k = -gamma * theta2 / (2.0 * (1.0 - gamma));
    ((beta - r * gamma + k) / (1.0 - gamma)).powf(gamma - 1.0)
}

/// Constant `g` of the jump-free exponential problem:
/// `log g = -(beta - r + r log(r gamma) + theta^2 / 2) / r`.
pub fn exponential_g_without_jumps(beta: f64, gamma: f64, r: f64, theta2: f64) -> f64 {
    (-(beta - r + r * (r * gamma).ln() + 0.5 * theta2) / r).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::JumpLaw;

    fn setup(j: f64, r: f64) -> (MarketParams, HawkesParams, Grid) {
        let mk = MarketParams::new(r, 1, 1, vec![0.2], vec![0.0], vec![0.04], vec![0.0], vec![j], vec![JumpLaw::Deterministic { zbar: 1.0 }]).unwrap();
        let hk = HawkesParams::new(vec![2.0], vec![0.5], vec![0.5], vec![vec![0.8]]).unwrap();
        let grid = Grid::uniform(&[(0.5, 4.0)], 6).unwrap();
        (mk, hk, grid)
    }

    fn quick() -> FixedPointSpec {
        FixedPointSpec { mc: McSpec { paths: 20, seed: 3, tail_tol: 1e-9, ..McSpec::default() }, ..FixedPointSpec::default() }
    }

    #[test]
    fn power_without_jumps_matches_scalar_solution() {
        let (mk, hk, grid) = setup(0.0, 0.02);
        let u = UtilitySpec::Power { beta: 0.2, gamma: -1.0 };
        let out = g_fixed_point(&mk, &hk, &u, &grid, &quick()).unwrap();
        let want = power_g_without_jumps(0.2, -1.0, 0.02, 0.04);
        assert!(out.converged, "{:?}", out.iterations);
        for g in &out.g {
            assert!(((g - want) / want).abs() < 1e-6, "{g} {want}");
        }
    }

    #[test]
    fn exponential_without_jumps_matches_scalar_solution() {
        let (mk, hk, grid) = setup(0.0, 0.05);
        let u = UtilitySpec::Exponential { beta: 0.1, gamma: 10.0, kappa: None };
        let out = g_fixed_point(&mk, &hk, &u, &grid, &quick()).unwrap();
        let want = exponential_g_without_jumps(0.1, 10.0, 0.05, 0.04);
        for g in &out.g {
            assert!(((g - want) / want).abs() < 1e-6, "{g} {want}");
        }
        assert_eq!(out.kappa, Some(0.5));
    }

    #[test]
    fn negative_rate_is_rejected() {
        let (mk, hk, grid) = setup(0.0, 0.02);
        let u = UtilitySpec::Power { beta: 0.01, gamma: 0.9 };
        assert!(g_fixed_point(&mk, &hk, &u, &grid, &quick()).is_err());
    }

    #[test]
    fn acceleration_reaches_the_plain_fixed_point() {
        let (mk, hk, grid) = setup(-0.1, 0.02);
        let u = UtilitySpec::Power { beta: 0.2, gamma: -1.0 };
        let fast = g_fixed_point(&mk, &hk, &u, &grid, &FixedPointSpec { tol: 1e-10, ..quick() }).unwrap();
        let plain = g_fixed_point(&mk, &hk, &u, &grid, &FixedPointSpec { tol: 1e-10, max_iter: 400, accelerate: false, ..quick() }).unwrap();
        assert!(fast.converged && plain.converged);
        assert!(fast.iterations.len() <= plain.iterations.len());
        for (a, b) in fast.g.iter().zip(&plain.g) {
            assert!(((a - b) / b).abs() < 1e-8, "{a} {b}");
        }
    }
}
