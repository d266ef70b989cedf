//! Optimal portfolio weights.
//!
//! With the block covariance the optimisation separates: the weight vector
//! splits as `omega = sum_l omegabar_l 1_l + omega_perp`, the orthogonal part
//! has a closed form, and each class reduces to a strictly convex scalar
//! problem in `varpi_l = k omegabar_l`, the total weight held in class `l`.
//! For log utility that problem is
//!
//! ```text
//! min  -varpi Rbar + (kappa1 / 2k) varpi^2 - lambda E[log(1 + varpi j Z)]
//! ```
//!
//! on the solvency set `1 + varpi j z > 0` for every support point `z`.
//! A one-point law gives a quadratic first-order condition, a two-point law
//! a cubic, anything else is solved by safeguarded Newton iteration.

pub mod solvers;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::MarketParams;
use crate::simulate::{Decision, JumpLaw, Policy};

use solvers::{cubic_roots, quadratic_plus_root, solve_increasing};

/// Below this jump exposure a class is treated as jump free.
pub const JUMP_FREE_THRESHOLD: f64 = 1e-12;

/// Preference-dependent shape of the class objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassPreference {
    Log,
    /// Power utility with exponent `gamma`; the variable is still a weight.
    Power { gamma: f64 },
    /// Exponential utility; the variable is a dollar amount.
    Exponential { kappa: f64 },
}

/// The scalar problem of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProblem {
    pub rbar: f64,
    /// `kappa1 / k`.
    pub a: f64,
    pub intensity: f64,
    /// `(j z, probability)` over the support of the mark law.
    pub atoms: Vec<(f64, f64)>,
    pub preference: ClassPreference,
}

/// How a class solution was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum RootProvenance {
    /// No jump exposure or zero intensity.
    Merton,
    Quadratic { polished: bool },
    /// Real cubic roots inside the solvency interval before selection.
    Cubic { admissible: Vec<f64> },
    /// The cubic produced no admissible root; the numeric solver took over.
    CubicFallback { iterations: usize },
    Numeric { iterations: usize, converged: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSolution {
    pub varpi: f64,
    pub foc_residual: f64,
    pub objective: f64,
    pub root: RootProvenance,
}

/// Which class solver to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Closed forms for one- and two-point laws, numeric otherwise.
    #[default]
    Auto,
    Quadratic,
    Cubic,
    Numeric,
}

impl ClassProblem {
    pub fn new(market: &MarketParams, class: usize, intensity: f64, preference: ClassPreference) -> Self {
        let k = market.k() as f64;
        let kappa1 = market.spectral().kappa1[class];
        let j = market.j()[class];
        Self {
            rbar: market.rbar()[class],
            a: kappa1 / k,
            intensity,
            atoms: market.laws()[class].atoms().into_iter().map(|(z, q)| (j * z, q)).collect(),
            preference,
        }
    }

    pub fn jump_free(&self) -> bool {
        self.intensity == 0.0 || self.atoms.iter().all(|(c, _)| c.abs() < JUMP_FREE_THRESHOLD)
    }

    /// Curvature multiplier of the quadratic term.
    fn curvature(&self) -> f64 {
        match self.preference {
            ClassPreference::Log => 1.0,
            ClassPreference::Power { gamma } => 1.0 - gamma,
            ClassPreference::Exponential { kappa } => kappa,
        }
    }

    /// Minimiser without the jump term.
    pub fn merton(&self) -> f64 {
        self.rbar / (self.curvature() * self.a)
    }

    /// Supremum of the solvency interval (`+inf` when unconstrained).
    pub fn upper(&self) -> f64 {
        if matches!(self.preference, ClassPreference::Exponential { .. }) {
            return f64::INFINITY;
        }
        let worst = self.atoms.iter().map(|(c, _)| -c).fold(0.0, f64::max);
        if worst > 0.0 {
            1.0 / worst
        } else {
            f64::INFINITY
        }
    }

    pub fn admissible(&self, x: f64) -> bool {
        x.is_finite() && (matches!(self.preference, ClassPreference::Exponential { .. }) || self.atoms.iter().all(|(c, _)| 1.0 + c * x > 0.0))
    }

    /// Objective value, `+inf` outside the solvency set.
    pub fn objective(&self, x: f64) -> f64 {
        if !self.admissible(x) {
            return f64::INFINITY;
        }
        let base = -x * self.rbar + 0.5 * self.curvature() * self.a * x * x;
        if self.intensity == 0.0 {
            return base;
        }
        let jump: f64 = match self.preference {
            ClassPreference::Log => -self.atoms.iter().map(|(c, q)| q * (c * x).ln_1p()).sum::<f64>(),
            ClassPreference::Power { gamma } => {
                -self.atoms.iter().map(|(c, q)| q * ((gamma * (c * x).ln_1p()).exp_m1())).sum::<f64>() / gamma
            }
            ClassPreference::Exponential { kappa } => {
                self.atoms.iter().map(|(c, q)| q * (-kappa * c * x).exp_m1()).sum::<f64>() / kappa
            }
        };
        base + self.intensity * jump
    }

    /// `(jump part of the first-order condition, its derivative)`.
    fn jump_terms(&self, x: f64) -> (f64, f64) {
        if self.intensity == 0.0 {
            return (0.0, 0.0);
        }
        let (mut v, mut dv) = (0.0, 0.0);
        for &(c, q) in &self.atoms {
            match self.preference {
                ClassPreference::Log => {
                    let den = 1.0 + c * x;
                    v -= q * c / den;
                    dv += q * c * c / (den * den);
                }
                ClassPreference::Power { gamma } => {
                    let base = 1.0 + c * x;
                    v -= q * c * base.powf(gamma - 1.0);
                    dv += q * (1.0 - gamma) * c * c * base.powf(gamma - 2.0);
                }
                ClassPreference::Exponential { kappa } => {
                    let e = (-kappa * c * x).exp();
                    v -= q * c * e;
                    dv += q * kappa * c * c * e;
                }
            }
        }
        (self.intensity * v, self.intensity * dv)
    }

    /// First-order condition and its derivative; strictly increasing on the
    /// solvency interval.
    pub fn foc(&self, x: f64) -> (f64, f64) {
        let quad = self.curvature() * self.a;
        let (jv, jd) = self.jump_terms(x);
        (-self.rbar + quad * x + jv, quad + jd)
    }

    /// `|FOC|` divided by the magnitude of its terms.
    pub fn foc_residual(&self, x: f64) -> f64 {
        let quad = self.curvature() * self.a * x;
        let (jv, _) = self.jump_terms(x);
        (-self.rbar + quad + jv).abs() / (1.0 + self.rbar.abs() + quad.abs() + jv.abs())
    }

    fn finish(&self, x: f64, root: RootProvenance) -> ClassSolution {
        ClassSolution { varpi: x, foc_residual: self.foc_residual(x), objective: self.objective(x), root }
    }

    fn merton_solution(&self) -> ClassSolution {
        self.finish(self.merton(), RootProvenance::Merton)
    }

    /// One Newton step on the exact condition, kept if it helps.
    fn polish(&self, x: f64) -> (f64, bool) {
        let (v, dv) = self.foc(x);
        if !(dv > 0.0) {
            return (x, false);
        }
        let next = x - v / dv;
        if self.admissible(next) && self.foc_residual(next) < self.foc_residual(x) {
            (next, true)
        } else {
            (x, false)
        }
    }

    fn log_only(&self, what: &str) -> Result<()> {
        if self.preference != ClassPreference::Log {
            return Err(Error::Numerical(format!("{what} closed form applies to log utility only")));
        }
        Ok(())
    }

    /// Closed-form root for a one-point law.
    pub fn solve_quadratic(&self) -> Result<ClassSolution> {
        self.log_only("quadratic")?;
        if self.atoms.len() != 1 {
            return Err(Error::Numerical("quadratic closed form needs a one-point law".into()));
        }
        if self.jump_free() {
            return Ok(self.merton_solution());
        }
        let c = self.atoms[0].0;
        let (a, rbar, lam) = (self.a, self.rbar, self.intensity);
        let x = quadratic_plus_root(a * c, a - rbar * c, -(rbar + lam * c));
        if !self.admissible(x) {
            return Err(Error::NoAdmissibleRoot(format!("quadratic root {x} violates solvency for jump {c}")));
        }
        let (x, polished) = self.polish(x);
        Ok(self.finish(x, RootProvenance::Quadratic { polished }))
    }

    /// Closed-form root for a two-point law.
    pub fn solve_cubic(&self) -> Result<ClassSolution> {
        self.log_only("cubic")?;
        if self.jump_free() {
            return Ok(self.merton_solution());
        }
        if self.atoms.len() == 1 {
            return self.solve_quadratic();
        }
        if self.atoms.len() != 2 {
            return Err(Error::Numerical("cubic closed form needs a two-point law".into()));
        }
        let (cu, p) = self.atoms[0];
        let (cd, _) = self.atoms[1];
        let (a, rbar, lam) = (self.a, self.rbar, self.intensity);
        let s = cu + cd;
        let pi = cu * cd;
        let mean = p * cu + (1.0 - p) * cd;
        let roots = cubic_roots(a * pi, a * s - rbar * pi, a - rbar * s - lam * pi, -(rbar + lam * mean));
        let admissible: Vec<f64> = roots.into_iter().filter(|x| self.admissible(*x)).collect();
        let mut accepted: Vec<(f64, f64)> = Vec::new();
        for &x0 in &admissible {
            let mut x = x0;
            for _ in 0..3 {
                let (next, moved) = self.polish(x);
                x = next;
                if !moved {
                    break;
                }
            }
            let res = self.foc_residual(x);
            if res < 1e-9 {
                accepted.push((x, res));
            }
        }
        accepted.sort_by(|l, r| l.1.total_cmp(&r.1));
        if let Some(&(best, _)) = accepted.first() {
            let distinct = accepted.iter().filter(|(x, _)| (x - best).abs() > 1e-8 * (1.0 + best.abs())).count();
            if distinct > 0 {
                return Err(Error::NoAdmissibleRoot(format!(
                    "cubic has {} distinct stationary points in the solvency interval: {accepted:?}",
                    distinct + 1
                )));
            }
            return Ok(self.finish(best, RootProvenance::Cubic { admissible }));
        }
        let num = self.solve_numeric()?;
        let iterations = match num.root {
            RootProvenance::Numeric { iterations, .. } => iterations,
            _ => 0,
        };
        Ok(ClassSolution { root: RootProvenance::CubicFallback { iterations }, ..num })
    }

    /// Safeguarded Newton on the first-order condition; any law, any
    /// preference.
    pub fn solve_numeric(&self) -> Result<ClassSolution> {
        if self.jump_free() {
            return Ok(self.merton_solution());
        }
        let upper = self.upper();
        let merton = self.merton();
        let x0 = if merton < upper { merton } else { upper * (1.0 - 1e-3) };
        let ftol = 1e-12 * (1.0 + self.rbar.abs());
        let r = solve_increasing(|x| self.foc(x), f64::NEG_INFINITY, upper, x0, ftol, 500);
        if !self.admissible(r.x) {
            return Err(Error::NoAdmissibleRoot(format!("numeric solver left the solvency interval at {}", r.x)));
        }
        Ok(self.finish(r.x, RootProvenance::Numeric { iterations: r.iterations, converged: r.converged }))
    }

    pub fn solve(&self, method: Method) -> Result<ClassSolution> {
        match method {
            Method::Quadratic => self.solve_quadratic(),
            Method::Cubic => self.solve_cubic(),
            Method::Numeric => self.solve_numeric(),
            Method::Auto => match (self.preference, self.atoms.len()) {
                (ClassPreference::Log, 1) => self.solve_quadratic(),
                (ClassPreference::Log, 2) => self.solve_cubic(),
                _ => self.solve_numeric(),
            },
        }
    }
}

fn check_lambda(market: &MarketParams, lambda: &[f64]) -> Result<()> {
    if lambda.len() != market.m() {
        return Err(Error::Shape(format!("expected {} intensities, got {}", market.m(), lambda.len())));
    }
    for (l, v) in lambda.iter().enumerate() {
        if !(v.is_finite() && *v >= 0.0) {
            return Err(Error::param(format!("lambda[{l}]"), "must be finite and >= 0"));
        }
    }
    Ok(())
}

fn solve_classes(market: &MarketParams, lambda: &[f64], pref: ClassPreference, method: Method) -> Result<Vec<ClassSolution>> {
    check_lambda(market, lambda)?;
    (0..market.m()).map(|l| ClassProblem::new(market, l, lambda[l], pref).solve(method)).collect()
}

fn require_laws(market: &MarketParams, ok: impl Fn(&JumpLaw) -> bool, what: &str) -> Result<()> {
    for (l, law) in market.laws().iter().enumerate() {
        if !ok(law) {
            return Err(Error::param(format!("laws[{l}]"), format!("expected a {what} law")));
        }
    }
    Ok(())
}

fn class_weights(market: &MarketParams, sols: &[ClassSolution]) -> Vec<f64> {
    sols.iter().map(|s| s.varpi / market.k() as f64).collect()
}

/// Orthogonal weights `Rperp_l / (c kappa2_l)` for a curvature multiplier
/// `c` (1 for log utility).
fn omega_perp_scaled(market: &MarketParams, curvature: f64) -> Vec<f64> {
    let kappa2 = market.spectral().kappa2;
    let k = market.k();
    market.rperp().iter().enumerate().map(|(i, r)| if k == 1 { 0.0 } else { r / (curvature * kappa2[i / k]) }).collect()
}

/// Log-utility orthogonal weights `Rperp_l / kappa2_l`, independent of the intensities.
pub fn omega_perp_star(market: &MarketParams) -> Vec<f64> {
    omega_perp_scaled(market, 1.0)
}

/// Class weights for one-point laws from the quadratic first-order condition.
pub fn omega_bar_deterministic(market: &MarketParams, lambda: &[f64]) -> Result<Vec<f64>> {
    require_laws(market, |l| matches!(l, JumpLaw::Deterministic { .. }), "deterministic")?;
    Ok(class_weights(market, &solve_classes(market, lambda, ClassPreference::Log, Method::Quadratic)?))
}

/// Class weights for two-point laws from the cubic first-order condition.
pub fn omega_bar_binomial(market: &MarketParams, lambda: &[f64]) -> Result<Vec<f64>> {
    require_laws(market, |l| matches!(l, JumpLaw::Binomial { .. }), "binomial")?;
    Ok(class_weights(market, &solve_classes(market, lambda, ClassPreference::Log, Method::Cubic)?))
}

/// Class weights for arbitrary discrete laws by safeguarded Newton.
pub fn omega_bar_numeric(market: &MarketParams, lambda: &[f64]) -> Result<Vec<f64>> {
    Ok(class_weights(market, &solve_classes(market, lambda, ClassPreference::Log, Method::Numeric)?))
}

/// Optimal consumption of the log investor, `beta * wealth`.
pub fn consumption_rate(beta: f64, wealth: f64) -> f64 {
    beta * wealth
}

/// Optimal log-utility policy at intensity `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyResult {
    pub lambda: Vec<f64>,
    pub omega_bar: Vec<f64>,
    pub omega_perp: Vec<f64>,
    pub omega_full: Vec<f64>,
    pub omega0: f64,
    pub consumption_rate_fraction: f64,
    /// Minimised objective `K(omega*, lambda)`.
    pub objective: f64,
    pub classes: Vec<ClassSolution>,
}

/// Assembles full weights from class and orthogonal parts.
pub fn full_weights(market: &MarketParams, omega_bar: &[f64], omega_perp: &[f64]) -> Vec<f64> {
    omega_perp.iter().enumerate().map(|(i, p)| omega_bar[i / market.k()] + p).collect()
}

pub fn log_optimal_policy(market: &MarketParams, lambda: &[f64], beta: f64) -> Result<PolicyResult> {
    log_optimal_policy_with(market, lambda, beta, Method::Auto)
}

pub fn log_optimal_policy_with(market: &MarketParams, lambda: &[f64], beta: f64, method: Method) -> Result<PolicyResult> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::param("beta", "must be finite and > 0"));
    }
    let classes = solve_classes(market, lambda, ClassPreference::Log, method)?;
    let omega_bar = class_weights(market, &classes);
    let omega_perp = omega_perp_star(market);
    let omega_full = full_weights(market, &omega_bar, &omega_perp);
    let perp_obj = -omega_perp.iter().zip(market.rperp()).map(|(a, b)| a * b).sum::<f64>() + 0.5 * market.quad_form(&omega_perp);
    let objective = classes.iter().map(|c| c.objective).sum::<f64>() + perp_obj;
    Ok(PolicyResult {
        lambda: lambda.to_vec(),
        omega0: 1.0 - omega_full.iter().sum::<f64>(),
        omega_bar,
        omega_perp,
        omega_full,
        consumption_rate_fraction: beta,
        objective,
        classes,
    })
}

/// The two-asset, two-class special case.
pub fn two_asset_policy(market: &MarketParams, lambda: &[f64], beta: f64) -> Result<PolicyResult> {
    if market.n() != 2 || market.k() != 1 || market.m() != 2 {
        return Err(Error::Shape(format!("two-asset policy needs n = 2, k = 1, m = 2; got n = {}, k = {}, m = {}", market.n(), market.k(), market.m())));
    }
    log_optimal_policy(market, lambda, beta)
}

/// Policy weights and objective for power or exponential preferences at
/// (possibly distorted) intensities. Weights are fractions of wealth for
/// power utility and dollar amounts for exponential utility.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralPolicy {
    pub class_totals: Vec<f64>,
    pub perp: Vec<f64>,
    pub full: Vec<f64>,
    /// Minimised scalar objective summed over classes and the orthogonal part.
    pub objective: f64,
    pub classes: Vec<ClassSolution>,
}

pub fn preference_policy(market: &MarketParams, lambda: &[f64], pref: ClassPreference) -> Result<GeneralPolicy> {
    let classes = solve_classes(market, lambda, pref, Method::Auto)?;
    let curvature = match pref {
        ClassPreference::Log => 1.0,
        ClassPreference::Power { gamma } => 1.0 - gamma,
        ClassPreference::Exponential { kappa } => kappa,
    };
    let perp = omega_perp_scaled(market, curvature);
    let bar = class_weights(market, &classes);
    let full = full_weights(market, &bar, &perp);
    let perp_obj = -perp.iter().zip(market.rperp()).map(|(a, b)| a * b).sum::<f64>() + 0.5 * curvature * market.quad_form(&perp);
    Ok(GeneralPolicy {
        class_totals: classes.iter().map(|c| c.varpi).collect(),
        objective: classes.iter().map(|c| c.objective).sum::<f64>() + perp_obj,
        perp,
        full,
        classes,
    })
}

/// Feedback form of the log-optimal policy: weights from the current
/// intensities, consumption `beta X`.
#[derive(Debug, Clone)]
pub struct LogOptimalPolicy {
    market: MarketParams,
    beta: f64,
}

impl LogOptimalPolicy {
    pub fn new(market: MarketParams, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::param("beta", "must be finite and > 0"));
        }
        Ok(Self { market, beta })
    }

    pub fn weights(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        Ok(log_optimal_policy(&self.market, lambda, self.beta)?.omega_full)
    }
}

impl Policy for LogOptimalPolicy {
    fn decide(&self, _t: f64, lambda: &[f64], wealth: f64) -> Decision {
        let weights = self.weights(lambda).expect("intensities along a simulated path are valid");
        Decision { weights, consumption: consumption_rate(self.beta, wealth) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_class(rbar: f64, upsilon: f64, j: f64, law: JumpLaw) -> MarketParams {
        MarketParams::new(0.02, 1, 1, vec![upsilon], vec![0.0], vec![rbar], vec![0.0], vec![j], vec![law]).unwrap()
    }

    #[test]
    fn merton_limit_example() {
        let mk = one_class(0.05, 0.2, -0.1, JumpLaw::Deterministic { zbar: 1.0 });
        let w = omega_bar_deterministic(&mk, &[0.0]).unwrap();
        assert!((w[0] - 1.25).abs() < 1e-12);
        let p = ClassProblem::new(&mk, 0, 0.0, ClassPreference::Log);
        assert!(p.foc_residual(w[0]) < 1e-12);
    }

    #[test]
    fn no_premium_means_short() {
        let mk = one_class(0.0, 0.2, -0.2, JumpLaw::Deterministic { zbar: 1.0 });
        let w = omega_bar_deterministic(&mk, &[1.0]).unwrap();
        assert!(w[0] < 0.0);
        assert!(ClassProblem::new(&mk, 0, 1.0, ClassPreference::Log).foc_residual(w[0]) < 1e-12);
    }

    #[test]
    fn closed_form_matches_printed_root_for_k1() {
        let (rbar, kappa1, c, lam): (f64, f64, f64, f64) = (0.07, 0.09, -0.25, 2.0);
        let mk = one_class(rbar, kappa1.sqrt(), c, JumpLaw::Deterministic { zbar: 1.0 });
        let w = omega_bar_deterministic(&mk, &[lam]).unwrap()[0];
        let disc = (c * rbar + kappa1).powi(2) + 4.0 * lam * c * c * kappa1;
        let printed = (-kappa1 + c * rbar + disc.sqrt()) / (2.0 * c * kappa1);
        assert!((w - printed).abs() < 1e-12);
    }

    #[test]
    fn binomial_degenerate_cases_match_deterministic() {
        let det = one_class(0.05, 0.2, -1.0, JumpLaw::Deterministic { zbar: 0.3 });
        let wd = omega_bar_deterministic(&det, &[1.0]).unwrap()[0];
        for law in [JumpLaw::Binomial { u: 0.3, dn: 0.1, p: 1.0 }, JumpLaw::Binomial { u: 0.3, dn: 0.3, p: 0.4 }, JumpLaw::Binomial { u: 0.3, dn: 0.6, p: 1.0 }] {
            let mk = one_class(0.05, 0.2, -1.0, law);
            let wb = omega_bar_binomial(&mk, &[1.0]).unwrap()[0];
            assert!((wb - wd).abs() < 1e-10, "{wb} vs {wd}");
        }
    }

    #[test]
    fn numeric_agrees_with_closed_forms() {
        let mk = one_class(0.05, 0.2, -1.0, JumpLaw::Binomial { u: 0.3, dn: 0.1, p: 0.5 });
        let a = omega_bar_binomial(&mk, &[1.0]).unwrap()[0];
        let b = omega_bar_numeric(&mk, &[1.0]).unwrap()[0];
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn perp_example() {
        let mk = MarketParams::new(0.0, 1, 2, vec![0.5], vec![0.0], vec![0.1], vec![-0.5, 0.5], vec![-0.2], vec![JumpLaw::Deterministic { zbar: 0.5 }]).unwrap();
        assert_eq!(omega_perp_star(&mk), vec![-2.0, 2.0]);
    }

    #[test]
    fn consumption_examples() {
        assert!((consumption_rate(0.02, 100.0) - 2.0).abs() < 1e-15);
        assert_eq!(consumption_rate(0.02, 0.0), 0.0);
        assert_eq!(consumption_rate(0.02, 200.0), 2.0 * consumption_rate(0.02, 100.0));
    }

    #[test]
    fn budget_identity() {
        let mk = MarketParams::new(0.01, 2, 2, vec![0.2, 0.3], vec![0.3, 0.1], vec![0.05, 0.04], vec![0.01, -0.01, 0.02, -0.02], vec![-0.5, -0.3], vec![JumpLaw::Deterministic { zbar: 0.2 }; 2]).unwrap();
        let p = log_optimal_policy(&mk, &[1.0, 2.0], 0.05).unwrap();
        assert_eq!(p.omega0 + p.omega_full.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn two_asset_shape_check() {
        let mk = one_class(0.05, 0.2, -0.5, JumpLaw::Deterministic { zbar: 0.2 });
        assert!(two_asset_policy(&mk, &[1.0], 0.05).is_err());
    }
}
