use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hawkes::{HawkesParams, IntensityState};
use crate::rng::{substream, Stream};

use super::JumpLaw;

/// One accepted event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub class: usize,
    /// Mark drawn from the class law, `1.0` when simulated without laws.
    pub z: f64,
}

/// Exact trajectory of `(N, lambda)` on `[t0, t0 + horizon]`.
///
/// Between events the intensity follows the deterministic relaxation, so the
/// event log plus the post-event intensities describe the path completely.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesPath {
    pub t0: f64,
    pub horizon: f64,
    pub start: IntensityState,
    pub events: Vec<Event>,
    /// `lambda(t_i+)` for every event `i`.
    pub post_event_lambda: Vec<Vec<f64>>,
    /// State at `t0 + horizon`.
    pub end: IntensityState,
}

impl HawkesPath {
    pub fn t_end(&self) -> f64 {
        self.t0 + self.horizon
    }

    /// Event counts on the path, per class.
    pub fn counts(&self) -> Vec<u64> {
        let mut c = vec![0u64; self.start.lambda.len()];
        for e in &self.events {
            c[e.class] += 1;
        }
        c
    }

    /// Knots `(t, lambda(t+))`: the start, every event, and the end.
    pub fn knots(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        std::iter::once((self.t0, self.start.lambda.as_slice()))
            .chain(self.events.iter().zip(&self.post_event_lambda).map(|(e, l)| (e.t, l.as_slice())))
            .chain(std::iter::once((self.t_end(), self.end.lambda.as_slice())))
    }

    /// Right-continuous intensity at absolute time `t` inside the path.
    pub fn lambda_at(&self, params: &HawkesParams, t: f64) -> Vec<f64> {
        let idx = self.events.partition_point(|e| e.t <= t);
        let (t_k, lam) = if idx == 0 {
            (self.t0, &self.start.lambda)
        } else {
            (self.events[idx - 1].t, &self.post_event_lambda[idx - 1])
        };
        relax(params, lam, t - t_k)
    }

    /// `int lambda_l ds` over the path, in closed form.
    pub fn compensator(&self, params: &HawkesParams) -> Vec<f64> {
        let m = params.m();
        let mut total = vec![0.0; m];
        let knots: Vec<(f64, &[f64])> = self.knots().collect();
        for w in knots.windows(2) {
            let (t_a, lam) = w[0];
            let tau = w[1].0 - t_a;
            for l in 0..m {
                total[l] += relaxation_integral(params.alpha()[l], params.lambda_inf()[l], lam[l], tau);
            }
        }
        total
    }
}

/// `lambda` after relaxing for `dt` with no events.
pub fn relax(params: &HawkesParams, lambda: &[f64], dt: f64) -> Vec<f64> {
    if dt == 0.0 {
        return lambda.to_vec();
    }
    lambda
        .iter()
        .zip(params.alpha())
        .zip(params.lambda_inf())
        .map(|((l, a), inf)| inf + (l - inf) * (-a * dt).exp())
        .collect()
}

/// `int_0^tau [inf + (l0 - inf) e^{-a s}] ds`.
pub fn relaxation_integral(a: f64, inf: f64, l0: f64, tau: f64) -> f64 {
    inf * tau + (l0 - inf) * (-(-a * tau).exp_m1()) / a
}

fn check_laws(params: &HawkesParams, laws: Option<&[JumpLaw]>) -> Result<()> {
    if let Some(laws) = laws {
        if laws.len() != params.m() {
            return Err(Error::param("laws", format!("expected {} laws, got {}", params.m(), laws.len())));
        }
        for (l, law) in laws.iter().enumerate() {
            law.validate(&format!("laws[{l}]"))?;
        }
    }
    Ok(())
}

/// Ogata thinning driven by the thinning and marks substreams of one path.
///
/// Successive calls to [`Thinning::run`] continue the same random streams,
/// which lets long paths be produced in chunks.
pub struct Thinning<'a> {
    params: &'a HawkesParams,
    laws: Option<&'a [JumpLaw]>,
    thinning: ChaCha8Rng,
    marks: ChaCha8Rng,
}

impl<'a> Thinning<'a> {
    pub fn new(params: &'a HawkesParams, laws: Option<&'a [JumpLaw]>, seed: u64, path: u64) -> Result<Self> {
        check_laws(params, laws)?;
        Ok(Self {
            params,
            laws,
            thinning: substream(seed, path, Stream::Thinning),
            marks: substream(seed, path, Stream::Marks),
        })
    }

    pub fn run(&mut self, start: &IntensityState, horizon: f64) -> Result<HawkesPath> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param("horizon", "must be finite and > 0"));
        }
        let params = self.params;
        let refresh = params.alpha().iter().map(|a| 1.0 / a).fold(f64::INFINITY, f64::min);
        let t_end = start.t + horizon;
        let mut state = start.clone();
        let mut events = Vec::new();
        let mut post = Vec::new();
        while state.t < t_end {
            // Intensities move monotonically toward lambda_inf between events,
            // so max(lambda, lambda_inf) dominates until the next event.
            let bound: f64 = state.lambda.iter().zip(params.lambda_inf()).map(|(l, i)| l.max(*i)).sum();
            let window_end = (state.t + refresh).min(t_end);
            if bound <= 0.0 {
                state.decay_in_place(window_end - state.t, params);
                state.t = window_end;
                continue;
            }
            let gap: f64 = self.thinning.sample::<f64, _>(Exp1) / bound;
            let candidate = state.t + gap;
            if candidate >= window_end {
                state.decay_in_place(window_end - state.t, params);
                state.t = window_end;
                continue;
            }
            state.decay_in_place(gap, params);
            let total = state.total_intensity();
            if self.thinning.random::<f64>() * bound >= total {
                continue;
            }
            let pick = self.thinning.random::<f64>() * total;
            let mut class = params.m() - 1;
            let mut acc = 0.0;
            for (l, lam) in state.lambda.iter().enumerate() {
                acc += lam;
                if pick < acc {
                    class = l;
                    break;
                }
            }
            let z = match self.laws {
                Some(laws) => laws[class].sample(&mut self.marks),
                None => 1.0,
            };
            state.excite_in_place(class, params);
            events.push(Event { t: state.t, class, z });
            post.push(state.lambda.clone());
        }
        state.t = t_end;
        Ok(HawkesPath {
            t0: start.t,
            horizon,
            start: start.clone(),
            events,
            post_event_lambda: post,
            end: state,
        })
    }
}

/// Path `path` of the ensemble keyed by `seed`, started from `lambda0` at time zero.
pub fn simulate_hawkes_path(
    params: &HawkesParams,
    laws: Option<&[JumpLaw]>,
    horizon: f64,
    seed: u64,
    path: u64,
) -> Result<HawkesPath> {
    Thinning::new(params, laws, seed, path)?.run(&IntensityState::initial(params), horizon)
}

/// Single trajectory (path index 0).
pub fn simulate_hawkes(params: &HawkesParams, laws: Option<&[JumpLaw]>, horizon: f64, seed: u64) -> Result<HawkesPath> {
    simulate_hawkes_path(params, laws, horizon, seed, 0)
}

/// Paths `0..n_paths`, returned in index order whatever the worker count.
pub fn simulate_hawkes_ensemble(
    params: &HawkesParams,
    laws: Option<&[JumpLaw]>,
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<HawkesPath>> {
    check_laws(params, laws)?;
    (0..n_paths as u64)
        .into_par_iter()
        .map(|p| simulate_hawkes_path(params, laws, horizon, seed, p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean_stderr, sample_variance};

    fn scalar(alpha: f64, inf: f64, l0: f64, d: f64) -> HawkesParams {
        HawkesParams::new_unchecked_stability(vec![alpha], vec![inf], vec![l0], vec![vec![d]]).unwrap()
    }

    #[test]
    fn poisson_reduction() {
        let p = scalar(1.0, 2.0, 2.0, 0.0);
        let paths = simulate_hawkes_ensemble(&p, None, 10.0, 10_000, 11).unwrap();
        let counts: Vec<f64> = paths.iter().map(|x| x.events.len() as f64).collect();
        let s = mean_stderr(&counts);
        assert!((s.mean - 20.0).abs() < 4.0 * s.stderr, "{s:?}");
        assert!((sample_variance(&counts) / 20.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn pure_decay_expected_count() {
        let p = scalar(5.0, 0.0, 5.0, 0.0);
        let paths = simulate_hawkes_ensemble(&p, None, 20.0, 20_000, 3).unwrap();
        let counts: Vec<f64> = paths.iter().map(|x| x.events.len() as f64).collect();
        let s = mean_stderr(&counts);
        let expect = 1.0 - (-100.0f64).exp();
        assert!((s.mean - expect).abs() < 4.0 * s.stderr, "{s:?}");
    }

    #[test]
    fn event_log_consistency() {
        let p = HawkesParams::new(vec![2.0, 1.5], vec![0.5, 0.8], vec![1.0, 2.0], vec![vec![0.5, 0.2], vec![0.3, 0.4]]).unwrap();
        let path = simulate_hawkes(&p, None, 20.0, 5).unwrap();
        assert!(path.events.windows(2).all(|w| w[0].t < w[1].t));
        assert_eq!(path.counts(), path.end.counts);
        for (e, lam) in path.events.iter().zip(&path.post_event_lambda) {
            let left = path.lambda_at(&p, e.t - 1e-12);
            let right = path.lambda_at(&p, e.t);
            assert_eq!(right, *lam);
            for l in 0..2 {
                assert!((right[l] - left[l] - p.d()[l][e.class]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_bad_horizon() {
        let p = scalar(1.0, 1.0, 1.0, 0.0);
        assert!(simulate_hawkes(&p, None, 0.0, 1).is_err());
        assert!(simulate_hawkes(&p, None, -1.0, 1).is_err());
    }

    #[test]
    fn ensemble_is_order_independent() {
        let p = scalar(2.0, 1.0, 1.0, 1.0);
        let a = simulate_hawkes_ensemble(&p, None, 5.0, 16, 9).unwrap();
        let b: Vec<HawkesPath> = (0..16).map(|i| simulate_hawkes_path(&p, None, 5.0, 9, i).unwrap()).collect();
        assert_eq!(a, b);
    }
}
