use crate::error::Result;
use crate::hawkes::HawkesParams;
use crate::simulate::{ergodic_average, HawkesPath};

use super::grid::{Axis, Grid};

/// Weights `(w0, w1)` with `int_0^tau e^{-rate u} l(u) du = w0 l(0) + w1 l(tau)`
/// for every affine `l`.
pub fn fitted_weights(rate: f64, tau: f64) -> (f64, f64) {
    let x = rate * tau;
    // (1 - e^{-x}(1 + x)) / x^2 and (1 - e^{-x}) / x
    let (s, e) = if x.abs() < 1e-2 {
        let s = 0.5 - x / 3.0 + x * x / 8.0 - x.powi(3) / 30.0 + x.powi(4) / 144.0 - x.powi(5) / 840.0;
        let e = 1.0 - x / 2.0 + x * x / 6.0 - x.powi(3) / 24.0 + x.powi(4) / 120.0 - x.powi(5) / 720.0;
        (s, e)
    } else {
        ((1.0 - (-x).exp() * (1.0 + x)) / (x * x), -(-x).exp_m1() / x)
    };
    let w1 = tau * s;
    (tau * e - w1, w1)
}

/// Walks the quadrature nodes of `int_0^T e^{-rate s} f(lambda_s) ds` along
/// one intensity path and calls `visit(lambda, weight)` once per node, so the
/// integral is `sum weight * f(lambda)`.
///
/// Each inter-event segment is split into pieces no longer than `h_max`;
/// on each piece the integrand is taken affine in time and the discount
/// factor is integrated exactly. Left limits are used at event times.
pub fn visit_nodes<V: FnMut(&[f64], f64)>(params: &HawkesParams, path: &HawkesPath, rate: f64, h_max: f64, mut visit: V) {
    let knots: Vec<(f64, &[f64])> = path.knots().collect();
    let m = params.m();
    let mut lam = vec![0.0; m];
    for w in knots.windows(2) {
        let (ta, la) = w[0];
        let tau = w[1].0 - ta;
        if tau <= 0.0 {
            continue;
        }
        let n = (tau / h_max).ceil().max(1.0) as usize;
        let dt = tau / n as f64;
        let (w0, w1) = fitted_weights(rate, dt);
        let s0 = ta - path.start.t;
        let step_disc = (-rate * dt).exp();
        let mut disc = (-rate * s0).exp();
        for i in 0..=n {
            let elapsed = i as f64 * dt;
            for l in 0..m {
                let inf = params.lambda_inf()[l];
                lam[l] = inf + (la[l] - inf) * (-params.alpha()[l] * elapsed).exp();
            }
            let mut weight = 0.0;
            if i > 0 {
                weight += disc / step_disc * w1;
            }
            if i < n {
                weight += disc * w0;
            }
            visit(&lam, weight);
            disc *= step_disc;
        }
    }
}

/// `int_0^T e^{-rate s} f(lambda_s) ds` along one path.
pub fn discounted_integral<F: FnMut(&[f64]) -> f64>(params: &HawkesParams, path: &HawkesPath, rate: f64, h_max: f64, mut f: F) -> f64 {
    let mut acc = 0.0;
    let mut comp = 0.0;
    visit_nodes(params, path, rate, h_max, |lam, w| {
        let y = w * f(lam) - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    });
    acc
}

/// Default sub-step: a tenth of the fastest relaxation time.
pub fn default_h_max(params: &HawkesParams) -> f64 {
    0.1 / params.alpha().iter().cloned().fold(0.0, f64::max)
}

/// Box `[lambda_inf, max(mean + 8 sd, lambda_inf + 3 max_j d_lj)]` per axis,
/// with `mean` the stationary mean and `sd` the time-average standard
/// deviation along one long simulated path. Stationary intensities never
/// fall below `lambda_inf`; when it is zero the lower end is
/// `max(mean - 4 sd, mean / 1000)`. The upper end is at least twice the
/// lower so that a system without excitation still gets a proper box.
pub fn default_bounds(params: &HawkesParams, seed: u64) -> Result<Vec<(f64, f64)>> {
    let mean = params.stationary_mean()?;
    let slow = params.alpha().iter().cloned().fold(f64::INFINITY, f64::min);
    let report = ergodic_average(params, 2000.0 / slow, 50.0 / slow, 20, seed)?;
    Ok((0..params.m())
        .map(|l| {
            let inf = params.lambda_inf()[l];
            let jump = params.d()[l].iter().cloned().fold(0.0, f64::max);
            let sd = report.std_dev[l];
            let lo = if inf > 0.0 { inf } else { (mean[l] - 4.0 * sd).max(1e-3 * mean[l]) };
            (lo, (mean[l] + 8.0 * sd).max(inf + 3.0 * jump).max(2.0 * lo))
        })
        .collect())
}

pub fn default_grid(params: &HawkesParams, count: usize, seed: u64) -> Result<Grid> {
    Grid::new(default_bounds(params, seed)?.into_iter().map(|(min, max)| Axis { min, max, count }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hawkes::IntensityState;
    use crate::simulate::Thinning;

    #[test]
    fn fitted_weights_exact_for_affine() {
        for &(rate, tau) in &[(0.3, 0.7), (1e-6, 0.5), (0.0, 2.0), (5.0, 0.001), (2.0, 3.0)] {
            let (w0, w1) = fitted_weights(rate, tau);
            let n = 100_000;
            let h = tau / n as f64;
            let (mut i0, mut i1) = (0.0, 0.0);
            for k in 0..n {
                let u = (k as f64 + 0.5) * h;
                i0 += (-rate * u).exp() * (1.0 - u / tau) * h;
                i1 += (-rate * u).exp() * (u / tau) * h;
            }
            assert!((w0 - i0).abs() < 1e-9 * tau, "{rate} {tau}");
            assert!((w1 - i1).abs() < 1e-9 * tau, "{rate} {tau}");
        }
    }

    #[test]
    fn constant_integrand_is_exact() {
        let p = HawkesParams::new(vec![1.5], vec![1.0], vec![2.0], vec![vec![0.8]]).unwrap();
        let path = Thinning::new(&p, None, 3, 0).unwrap().run(&IntensityState::initial(&p), 10.0).unwrap();
        let v = discounted_integral(&p, &path, 0.2, 0.05, |_| 1.0);
        assert!((v - (1.0 - (-2.0f64).exp()) / 0.2).abs() < 1e-12);
    }

    #[test]
    fn intensity_integral_matches_compensator() {
        let p = HawkesParams::new(vec![1.5], vec![1.0], vec![2.0], vec![vec![0.8]]).unwrap();
        let path = Thinning::new(&p, None, 4, 0).unwrap().run(&IntensityState::initial(&p), 10.0).unwrap();
        let v = discounted_integral(&p, &path, 0.0, 0.01, |l| l[0]);
        let exact = path.compensator(&p)[0];
        assert!((v - exact).abs() < 1e-4 * exact, "{v} {exact}");
    }

    #[test]
    fn default_box_contains_excitations() {
        let p = HawkesParams::new(vec![2.0, 2.0], vec![0.5, 0.5], vec![0.5, 0.5], vec![vec![1.0, 0.6], vec![0.6, 1.0]]).unwrap();
        let b = default_bounds(&p, 1).unwrap();
        for (l, &(lo, hi)) in b.iter().enumerate() {
            assert!(lo <= 0.5 && hi >= 0.5 + 3.0 * 1.0, "{l}: {lo} {hi}");
        }
    }
}
