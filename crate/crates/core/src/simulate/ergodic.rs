use serde::Serialize;

use crate::error::{Error, Result};
use crate::hawkes::{HawkesParams, IntensityState};
use crate::stats::mean_stderr;

use super::thinning::Thinning;

/// Time averages of the intensity along one long path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicReport {
    pub horizon: f64,
    pub burn_in: f64,
    pub batches: usize,
    /// `(1/T) int lambda_l dt` after burn-in.
    pub time_average: Vec<f64>,
    /// Batch-means standard error of `time_average`.
    pub stderr: Vec<f64>,
    /// Time-average standard deviation of `lambda_l`.
    pub std_dev: Vec<f64>,
    pub events: Vec<u64>,
}

/// `int_0^tau (inf + D e^{-a s})^2 ds`.
fn square_integral(a: f64, inf: f64, l0: f64, tau: f64) -> f64 {
    let d = l0 - inf;
    let e1 = -(-a * tau).exp_m1() / a;
    let e2 = -(-2.0 * a * tau).exp_m1() / (2.0 * a);
    inf * inf * tau + 2.0 * inf * d * e1 + d * d * e2
}

/// Runs one path of length `burn_in + horizon` from `lambda0` and averages
/// the intensity over the last `horizon`, split into `batches` equal
/// batches for the standard error. Integrals are exact between events.
pub fn ergodic_average(params: &HawkesParams, horizon: f64, burn_in: f64, batches: usize, seed: u64) -> Result<ErgodicReport> {
    if batches < 2 {
        return Err(Error::param("batches", "need at least 2 batches"));
    }
    if !(horizon.is_finite() && horizon > 0.0) || !(burn_in.is_finite() && burn_in >= 0.0) {
        return Err(Error::param("horizon", "horizon must be > 0 and burn-in >= 0"));
    }
    let m = params.m();
    let mut sim = Thinning::new(params, None, seed, 0)?;
    let mut state = IntensityState::initial(params);
    if burn_in > 0.0 {
        state = sim.run(&state, burn_in)?.end;
    }
    let width = horizon / batches as f64;
    let mut batch_means = vec![Vec::with_capacity(batches); m];
    let mut first = vec![0.0; m];
    let mut second = vec![0.0; m];
    let mut events = vec![0u64; m];
    for _ in 0..batches {
        let path = sim.run(&state, width)?;
        let mut part = vec![0.0; m];
        let knots: Vec<(f64, &[f64])> = path.knots().collect();
        for w in knots.windows(2) {
            let tau = w[1].0 - w[0].0;
            for l in 0..m {
                let (a, inf, l0) = (params.alpha()[l], params.lambda_inf()[l], w[0].1[l]);
                part[l] += super::relaxation_integral(a, inf, l0, tau);
                second[l] += square_integral(a, inf, l0, tau);
            }
        }
        for l in 0..m {
            first[l] += part[l];
            batch_means[l].push(part[l] / width);
        }
        for (e, c) in events.iter_mut().zip(path.counts()) {
            *e += c;
        }
        state = path.end;
    }
    let time_average: Vec<f64> = first.iter().map(|v| v / horizon).collect();
    Ok(ErgodicReport {
        horizon,
        burn_in,
        batches,
        stderr: batch_means.iter().map(|b| mean_stderr(b).stderr).collect(),
        std_dev: (0..m).map(|l| (second[l] / horizon - time_average[l].powi(2)).max(0.0).sqrt()).collect(),
        time_average,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_integral_against_quadrature() {
        let (a, inf, l0, tau) = (1.7, 0.8, 2.5, 1.3);
        let n = 200_000;
        let h = tau / n as f64;
        let mid: f64 = (0..n).map(|i| {
            let s = (i as f64 + 0.5) * h;
            let v = inf + (l0 - inf) * (-a * s).exp();
            v * v * h
        }).sum();
        assert!((square_integral(a, inf, l0, tau) - mid).abs() < 1e-9);
    }

    #[test]
    fn poisson_time_average() {
        let p = HawkesParams::new(vec![1.0], vec![3.0], vec![3.0], vec![vec![0.0]]).unwrap();
        let r = ergodic_average(&p, 100.0, 0.0, 10, 1).unwrap();
        assert!((r.time_average[0] - 3.0).abs() < 1e-12);
        assert!(r.std_dev[0] < 1e-6);
    }
}
