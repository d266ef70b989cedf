use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hawkes::{HawkesParams, IntensityState};
use crate::market::MarketParams;
use crate::rng::{substream, Stream};

use super::{Event, Thinning};

/// Portfolio weights (fractions of wealth in each risky asset) and the
/// consumption rate in currency per unit time.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub weights: Vec<f64>,
    pub consumption: f64,
}

/// A feedback rule evaluated on the pre-jump state.
pub trait Policy: Sync {
    fn decide(&self, t: f64, lambda: &[f64], wealth: f64) -> Decision;
}

/// Fixed weights and consumption proportional to wealth.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantPolicy {
    pub weights: Vec<f64>,
    pub consumption_fraction: f64,
}

impl Policy for ConstantPolicy {
    fn decide(&self, _t: f64, _lambda: &[f64], wealth: f64) -> Decision {
        Decision {
            weights: self.weights.clone(),
            consumption: self.consumption_fraction * wealth,
        }
    }
}

/// Discretisation of the diffusion part between knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Euler-Maruyama on discounted wealth and prices.
    #[default]
    Euler,
    /// Euler on the logarithms; exact for coefficients frozen over a step.
    LogEuler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketSimSpec {
    pub x0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub scheme: Scheme,
}

impl MarketSimSpec {
    fn validate(&self) -> Result<()> {
        if !(self.x0.is_finite() && self.x0 > 0.0) {
            return Err(Error::param("x0", "must be finite and > 0"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::param("horizon", "must be finite and > 0"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param("dt", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// One market trajectory recorded at every grid and event time.
///
/// Row `i` holds the state right after time `times[i]` (post-jump) together
/// with the decision taken there, which applies on `(times[i], times[i+1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub times: Vec<f64>,
    pub lambda: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u64>>,
    /// `S_0, S_1, .., S_n`.
    pub prices: Vec<Vec<f64>>,
    pub wealth: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
    pub consumption: Vec<f64>,
    pub events: Vec<Event>,
    /// Row index of each event.
    pub event_rows: Vec<usize>,
    /// Set when wealth reached zero or below; the path stops there.
    pub ruined: bool,
}

impl SimPath {
    pub fn final_wealth(&self) -> f64 {
        *self.wealth.last().expect("paths have at least one row")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let m = self.lambda[0].len();
        let n = self.weights[0].len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=m).map(|l| format!("lambda_{l}")));
        header.extend((1..=m).map(|l| format!("N_{l}")));
        header.extend((0..=n).map(|i| format!("S_{i}")));
        header.push("X".into());
        header.extend((1..=n).map(|i| format!("omega_{i}")));
        header.push("C".into());
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.times.len() {
            let mut row = vec![fmt(self.times[i])];
            row.extend(self.lambda[i].iter().map(|v| fmt(*v)));
            row.extend(self.counts[i].iter().map(|v| v.to_string()));
            row.extend(self.prices[i].iter().map(|v| fmt(*v)));
            row.push(fmt(self.wealth[i]));
            row.extend(self.weights[i].iter().map(|v| fmt(*v)));
            row.push(fmt(self.consumption[i]));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn write_events_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,class,z")?;
        for e in &self.events {
            writeln!(w, "{},{},{}", fmt(e.t), e.class + 1, fmt(e.z))?;
        }
        Ok(())
    }
}

/// Float formatting with 17 significant digits.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Simulates path `path` of the ensemble keyed by `seed`.
///
/// Jump times come from exact thinning and are inserted into the uniform
/// grid; weights are decided at each knot and therefore never see the jump
/// they are exposed to.
pub fn simulate_market(
    market: &MarketParams,
    hawkes: &HawkesParams,
    policy: &dyn Policy,
    spec: &MarketSimSpec,
    seed: u64,
    path: u64,
) -> Result<SimPath> {
    spec.validate()?;
    if hawkes.m() != market.m() {
        return Err(Error::Shape(format!("hawkes has {} classes, market has {}", hawkes.m(), market.m())));
    }
    let (n, k, m) = (market.n(), market.k(), market.m());
    let r = market.r();
    let excess = market.excess_returns();
    let sigma_diag: Vec<f64> = market.upsilon().iter().flat_map(|u| std::iter::repeat(u * u).take(k)).collect();

    let hp = Thinning::new(hawkes, Some(market.laws()), seed, path)?.run(&IntensityState::initial(hawkes), spec.horizon)?;
    let mut diffusion = substream(seed, path, Stream::Diffusion);

    let steps = ((spec.horizon / spec.dt) - 1e-9).ceil().max(1.0) as usize;
    let grid_time = |i: usize| if i >= steps { spec.horizon } else { i as f64 * spec.dt };

    let mut state = IntensityState::initial(hawkes);
    let mut x = spec.x0;
    let mut prices = vec![1.0; n + 1];
    let mut decision = policy.decide(0.0, &state.lambda, x);
    check_decision(&decision, n)?;

    let mut out = SimPath {
        times: vec![0.0],
        lambda: vec![state.lambda.clone()],
        counts: vec![state.counts.clone()],
        prices: vec![prices.clone()],
        wealth: vec![x],
        weights: vec![decision.weights.clone()],
        consumption: vec![decision.consumption],
        events: Vec::with_capacity(hp.events.len()),
        event_rows: Vec::with_capacity(hp.events.len()),
        ruined: false,
    };

    let mut next_grid = 1usize;
    let mut next_event = 0usize;
    let mut t = 0.0;
    let mut dw = vec![0.0; n];
    while next_grid <= steps || next_event < hp.events.len() {
        let tg = if next_grid <= steps { grid_time(next_grid) } else { f64::INFINITY };
        let te = hp.events.get(next_event).map_or(f64::INFINITY, |e| e.t);
        let (tau, event) = if te <= tg {
            if te == tg {
                next_grid += 1;
            }
            next_event += 1;
            (te, Some(hp.events[next_event - 1]))
        } else {
            next_grid += 1;
            (tg, None)
        };
        let h = tau - t;
        if h > 0.0 {
            let sq = h.sqrt();
            for v in dw.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut diffusion);
                *v = sq * z;
            }
            let shock = market.sigma_sqrt_apply(&dw);
            let w = &decision.weights;
            let port_shock: f64 = w.iter().zip(&shock).map(|(a, b)| a * b).sum();
            let port_drift: f64 = w.iter().zip(&excess).map(|(a, b)| a * b).sum();
            let c = decision.consumption / x;
            match spec.scheme {
                Scheme::Euler => {
                    x *= (r * h).exp() * (1.0 + (port_drift - c) * h + port_shock);
                    for i in 0..n {
                        prices[i + 1] *= (r * h).exp() * (1.0 + excess[i] * h + shock[i]);
                    }
                }
                Scheme::LogEuler => {
                    let var = market.quad_form(w);
                    x *= ((r + port_drift - c - 0.5 * var) * h + port_shock).exp();
                    for i in 0..n {
                        prices[i + 1] *= ((r + excess[i] - 0.5 * sigma_diag[i]) * h + shock[i]).exp();
                    }
                }
            }
            prices[0] *= (r * h).exp();
            state.decay_in_place(h, hawkes);
        }
        state.t = tau;
        t = tau;
        if let Some(e) = event {
            let exposure = market.jump_exposure(&decision.weights)[e.class];
            x *= 1.0 + exposure * e.z;
            let jl = market.j()[e.class];
            for i in e.class * k..(e.class + 1) * k {
                prices[i + 1] *= 1.0 + jl * e.z;
            }
            state.excite_in_place(e.class, hawkes);
            out.events.push(e);
            out.event_rows.push(out.times.len());
        }
        let ruined = !(x.is_finite() && x > 0.0);
        if !ruined {
            decision = policy.decide(t, &state.lambda, x);
            check_decision(&decision, n)?;
        }
        out.times.push(t);
        out.lambda.push(state.lambda.clone());
        out.counts.push(state.counts.clone());
        out.prices.push(prices.clone());
        out.wealth.push(x);
        out.weights.push(decision.weights.clone());
        out.consumption.push(decision.consumption);
        if ruined {
            out.ruined = true;
            break;
        }
    }
    debug_assert_eq!(out.counts.last().map(|c| c.len()), Some(m));
    Ok(out)
}

fn check_decision(d: &Decision, n: usize) -> Result<()> {
    if d.weights.len() != n {
        return Err(Error::Shape(format!("policy returned {} weights for {n} assets", d.weights.len())));
    }
    if d.weights.iter().any(|w| !w.is_finite()) || !d.consumption.is_finite() {
        return Err(Error::Numerical("policy returned a non-finite decision".into()));
    }
    Ok(())
}

/// Paths `0..n_paths` in index order.
pub fn simulate_market_ensemble(
    market: &MarketParams,
    hawkes: &HawkesParams,
    policy: &dyn Policy,
    spec: &MarketSimSpec,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<SimPath>> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|p| simulate_market(market, hawkes, policy, spec, seed, p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::JumpLaw;
    use crate::stats::mean_stderr;

    fn single(j: f64, zbar: f64, rbar: f64, upsilon: f64) -> MarketParams {
        MarketParams::new(0.03, 1, 1, vec![upsilon], vec![0.0], vec![rbar], vec![0.0], vec![j], vec![JumpLaw::Deterministic { zbar }]).unwrap()
    }

    fn hawkes(l0: f64) -> HawkesParams {
        HawkesParams::new(vec![1.0], vec![l0], vec![l0], vec![vec![0.0]]).unwrap()
    }

    #[test]
    fn riskless_account_is_exact() {
        let mk = single(0.0, 0.5, 0.05, 0.2);
        let pol = ConstantPolicy { weights: vec![0.0], consumption_fraction: 0.0 };
        let spec = MarketSimSpec { x0: 2.0, horizon: 3.0, dt: 0.1, scheme: Scheme::Euler };
        let a = simulate_market(&mk, &hawkes(1.0), &pol, &spec, 1, 0).unwrap();
        let b = simulate_market(&mk, &hawkes(1.0), &pol, &spec, 99, 0).unwrap();
        assert!((a.final_wealth() - 2.0 * (0.03f64 * 3.0).exp()).abs() < 1e-12);
        assert!((a.final_wealth() - b.final_wealth()).abs() < 1e-12);
    }

    #[test]
    fn gbm_log_mean() {
        let mk = single(0.0, 0.5, 0.05, 0.3);
        let pol = ConstantPolicy { weights: vec![0.6], consumption_fraction: 0.0 };
        let spec = MarketSimSpec { x0: 1.0, horizon: 1.0, dt: 0.05, scheme: Scheme::LogEuler };
        let paths = simulate_market_ensemble(&mk, &hawkes(0.5), &pol, &spec, 4000, 5).unwrap();
        let logs: Vec<f64> = paths.iter().map(|p| p.final_wealth().ln()).collect();
        let s = mean_stderr(&logs);
        let expect = 0.03 + 0.6 * 0.05 - 0.5 * 0.36 * 0.09;
        assert!((s.mean - expect).abs() < 4.0 * s.stderr, "{s:?} vs {expect}");
    }

    #[test]
    fn full_loss_jump_ruins() {
        let mk = single(-1.0, 1.0, 0.0, 0.2);
        let pol = ConstantPolicy { weights: vec![1.0], consumption_fraction: 0.0 };
        let spec = MarketSimSpec { x0: 1.0, horizon: 5.0, dt: 0.1, scheme: Scheme::Euler };
        let p = simulate_market(&mk, &hawkes(2.0), &pol, &spec, 3, 0).unwrap();
        assert!(p.ruined);
        assert_eq!(p.events.len(), 1);
        assert_eq!(p.final_wealth(), 0.0);
    }

    #[test]
    fn applied_weight_ignores_the_mark_of_its_jump() {
        struct Feedback;
        impl Policy for Feedback {
            fn decide(&self, _t: f64, lambda: &[f64], wealth: f64) -> Decision {
                Decision { weights: vec![0.5 / (1.0 + lambda[0]) + 0.01 * wealth.ln()], consumption: 0.0 }
            }
        }
        let hk = HawkesParams::new(vec![1.0], vec![1.0], vec![1.0], vec![vec![0.5]]).unwrap();
        let spec = MarketSimSpec { x0: 1.0, horizon: 5.0, dt: 0.25, scheme: Scheme::LogEuler };
        let a = simulate_market(&single(-0.5, 0.2, 0.05, 0.2), &hk, &Feedback, &spec, 8, 0).unwrap();
        let b = simulate_market(&single(-0.5, 0.4, 0.05, 0.2), &hk, &Feedback, &spec, 8, 0).unwrap();
        assert!(!a.events.is_empty());
        assert_eq!(a.event_rows, b.event_rows);
        let row = a.event_rows[0];
        assert_eq!(a.weights[row - 1], b.weights[row - 1]);
        assert_ne!(a.wealth[row], b.wealth[row]);
    }
}
