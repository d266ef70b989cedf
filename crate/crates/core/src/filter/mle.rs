use serde::Serialize;

use crate::error::{Error, Result};
use crate::hawkes::{HawkesParams, StationarityReport};

use super::EventStream;

/// Box constraints for the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MleBounds {
    pub alpha: (f64, f64),
    pub lambda_inf: (f64, f64),
    pub d: (f64, f64),
}

impl Default for MleBounds {
    fn default() -> Self {
        Self { alpha: (1e-3, 1e3), lambda_inf: (1e-6, 1e6), d: (0.0, 1e3) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MleOptions {
    pub max_iter: usize,
    /// Stop when the projected gradient is below `gtol (1 + |loglik|)`.
    pub gtol: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { max_iter: 500, gtol: 1e-9 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Calibration {
    pub params: HawkesParams,
    pub loglik: f64,
    pub converged: bool,
    /// Iterations used per class.
    pub iterations: Vec<usize>,
    pub horizon: f64,
    pub stationarity: StationarityReport,
}

/// Negative log-likelihood of class `l` and its gradient in the working
/// coordinates `(log alpha, log lambda_inf, d_l1, .., d_lm)`.
///
/// The intensity starts at `lambda_inf`. The sums over past events are
/// carried by the recursion `A_j <- e^{-alpha dt} A_j`, and their
/// `alpha`-derivatives `B_j` alongside.
fn class_nll(x: &[f64], merged: &[(f64, usize)], l: usize, m: usize, horizon: f64) -> (f64, Vec<f64>) {
    let alpha = x[0].exp();
    let mu = x[1].exp();
    let d = &x[2..];
    let mut a = vec![0.0; m];
    let mut b = vec![0.0; m];
    let (mut ll, mut ga, mut gm) = (0.0, 0.0, 0.0);
    let mut gd = vec![0.0; m];
    let mut prev = 0.0;
    let mut k = 0;
    while k < merged.len() {
        let t = merged[k].0;
        let dt = t - prev;
        let e = (-alpha * dt).exp();
        for j in 0..m {
            b[j] = e * (b[j] - dt * a[j]);
            a[j] *= e;
        }
        let lam = mu + d.iter().zip(&a).map(|(x, y)| x * y).sum::<f64>();
        let dlam_da: f64 = d.iter().zip(&b).map(|(x, y)| x * y).sum();
        let mut end = k;
        while end < merged.len() && merged[end].0 == t {
            if merged[end].1 == l {
                ll += lam.ln();
                gm += 1.0 / lam;
                ga += dlam_da / lam;
                for j in 0..m {
                    gd[j] += a[j] / lam;
                }
            }
            end += 1;
        }
        for &(_, j) in &merged[k..end] {
            a[j] += 1.0;
        }
        prev = t;
        k = end;
    }
    let mut c = vec![0.0; m];
    let mut dc = vec![0.0; m];
    for &(s, j) in merged {
        let tau = horizon - s;
        let e = (-alpha * tau).exp();
        let one_minus = -(-alpha * tau).exp_m1();
        c[j] += one_minus / alpha;
        dc[j] += tau * e / alpha - one_minus / (alpha * alpha);
    }
    ll -= mu * horizon + d.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>();
    gm -= horizon;
    ga -= d.iter().zip(&dc).map(|(x, y)| x * y).sum::<f64>();
    let mut grad = vec![-alpha * ga, -mu * gm];
    grad.extend((0..m).map(|j| -(gd[j] - c[j])));
    (-ll, grad)
}

fn relative_merged(events: &EventStream) -> Vec<(f64, usize)> {
    events.merged().into_iter().map(|(t, l)| (t - events.start, l)).collect()
}

/// Point-process log-likelihood with the intensity started at `lambda_inf`
/// (the `lambda0` of `params` is ignored).
pub fn log_likelihood(events: &EventStream, params: &HawkesParams) -> Result<f64> {
    if events.m() != params.m() {
        return Err(Error::Shape(format!("events have {} classes, parameters {}", events.m(), params.m())));
    }
    let m = params.m();
    let merged = relative_merged(events);
    let horizon = events.end - events.start;
    let mut total = 0.0;
    for l in 0..m {
        let mut x = vec![params.alpha()[l].ln(), params.lambda_inf()[l].ln()];
        x.extend_from_slice(&params.d()[l]);
        total -= class_nll(&x, &merged, l, m, horizon).0;
    }
    Ok(total)
}

/// Log-likelihood of the best homogeneous Poisson fit, `sum n_l (log(n_l / T) - 1)`.
pub fn poisson_log_likelihood(events: &EventStream) -> f64 {
    let horizon = events.end - events.start;
    events.counts().iter().filter(|&&n| n > 0).map(|&n| n as f64 * ((n as f64 / horizon).ln() - 1.0)).sum()
}

struct Minimum {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    converged: bool,
}

/// Projected BFGS on a box: active bounds are frozen for the step and the
/// inverse Hessian is reset whenever the direction stops descending.
fn projected_bfgs<F>(f: F, x0: Vec<f64>, lo: &[f64], hi: &[f64], opts: &MleOptions) -> Minimum
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let project = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let identity = || (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect::<Vec<f64>>()).collect::<Vec<_>>();
    let mut x = x0;
    project(&mut x);
    let (mut fx, mut g) = f(&x);
    let mut h = identity();
    for it in 1..=opts.max_iter {
        let free: Vec<bool> = (0..n).map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0))).collect();
        let pg_norm = (0..n).filter(|&i| free[i]).map(|i| g[i].abs()).fold(0.0, f64::max);
        if pg_norm <= opts.gtol * (1.0 + fx.abs()) {
            return Minimum { x, f: fx, iterations: it - 1, converged: true };
        }
        let mut p: Vec<f64> = (0..n).map(|i| if free[i] { -(0..n).filter(|&j| free[j]).map(|j| h[i][j] * g[j]).sum::<f64>() } else { 0.0 }).collect();
        let slope: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            h = identity();
            p = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            project(&mut xn);
            let dx: f64 = xn.iter().zip(&x).zip(&g).map(|((a, b), c)| (a - b) * c).sum();
            let (fn_, gn) = f(&xn);
            if fn_.is_finite() && fn_ <= fx + 1e-4 * dx.min(0.0) && dx < 0.0 {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            return Minimum { x, f: fx, iterations: it, converged: pg_norm <= 1e-6 * (1.0 + fx.abs()) };
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 * s.iter().map(|v| v * v).sum::<f64>().sqrt() * y.iter().map(|v| v * v).sum::<f64>().sqrt() {
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i][j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += (sy + yhy) * s[i] * s[j] / (sy * sy) - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        let df = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if df.abs() <= 1e-15 * (1.0 + fx.abs()) {
            let pg = (0..n)
                .filter(|&i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
                .map(|i| g[i].abs())
                .fold(0.0, f64::max);
            return Minimum { x, f: fx, iterations: it, converged: pg <= 1e-6 * (1.0 + fx.abs()) };
        }
    }
    Minimum { x, f: fx, iterations: opts.max_iter, converged: false }
}

/// Maximum-likelihood fit of `(alpha, lambda_inf, d)` with `lambda0` tied to
/// `lambda_inf`. The likelihood separates by class, so each class is fitted
/// on its own in `(log alpha, log lambda_inf, d_l.)`. A fit that does not
/// converge returns its best iterate with `converged = false`.
pub fn calibrate_mle(events: &EventStream, init: &HawkesParams, bounds: &MleBounds, opts: &MleOptions) -> Result<Calibration> {
    let m = init.m();
    if events.m() != m {
        return Err(Error::Shape(format!("events have {} classes, initial parameters {}", events.m(), m)));
    }
    for (name, (lo, hi)) in [("alpha", bounds.alpha), ("lambda_inf", bounds.lambda_inf)] {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::param(format!("bounds.{name}"), "need 0 < lo < hi < inf"));
        }
    }
    if !(bounds.d.0 >= 0.0 && bounds.d.1 > bounds.d.0 && bounds.d.1.is_finite()) {
        return Err(Error::param("bounds.d", "need 0 <= lo < hi < inf"));
    }
    let merged = relative_merged(events);
    let horizon = events.end - events.start;
    let mut lo = vec![bounds.alpha.0.ln(), bounds.lambda_inf.0.ln()];
    let mut hi = vec![bounds.alpha.1.ln(), bounds.lambda_inf.1.ln()];
    lo.extend(std::iter::repeat(bounds.d.0).take(m));
    hi.extend(std::iter::repeat(bounds.d.1).take(m));
    let (mut alpha, mut mu, mut d) = (vec![0.0; m], vec![0.0; m], vec![vec![0.0; m]; m]);
    let (mut loglik, mut converged, mut iterations) = (0.0, true, vec![0; m]);
    for l in 0..m {
        let mut x0 = vec![init.alpha()[l].ln(), init.lambda_inf()[l].max(bounds.lambda_inf.0).ln()];
        x0.extend_from_slice(&init.d()[l]);
        let res = projected_bfgs(|x| class_nll(x, &merged, l, m, horizon), x0, &lo, &hi, opts);
        alpha[l] = res.x[0].exp();
        mu[l] = res.x[1].exp();
        d[l] = res.x[2..].to_vec();
        loglik -= res.f;
        converged &= res.converged;
        iterations[l] = res.iterations;
    }
    let params = HawkesParams::new_unchecked_stability(alpha, mu.clone(), mu, d)?;
    Ok(Calibration { stationarity: params.check_stationarity(), params, loglik, converged, iterations, horizon })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream() -> EventStream {
        EventStream::new(vec![vec![0.3, 0.9, 1.0, 2.5, 4.0], vec![0.5, 1.0, 3.3]], None, 0.0, 5.0).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ev = stream();
        let merged = relative_merged(&ev);
        let x = [0.4f64.ln(), 0.7f64.ln(), 0.3, 0.5];
        for l in 0..2 {
            let (_, g) = class_nll(&x, &merged, l, 2, 5.0);
            for i in 0..4 {
                let h = 1e-6;
                let mut xp = x;
                xp[i] += h;
                let mut xm = x;
                xm[i] -= h;
                let fd = (class_nll(&xp, &merged, l, 2, 5.0).0 - class_nll(&xm, &merged, l, 2, 5.0).0) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-7 * (1.0 + fd.abs()), "class {l} coord {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn likelihood_matches_direct_formula() {
        let ev = stream();
        let p = HawkesParams::new_unchecked_stability(vec![1.5, 0.8], vec![0.6, 0.9], vec![0.6, 0.9], vec![vec![0.2, 0.4], vec![0.3, 0.1]]).unwrap();
        let mut direct = 0.0;
        for l in 0..2 {
            for &t in &ev.times[l] {
                direct += super::super::intensity_direct(&ev, &p, t, true)[l].ln();
            }
            let a = p.alpha()[l];
            let mut comp = p.lambda_inf()[l] * 5.0;
            for (j, ts) in ev.times.iter().enumerate() {
                for &s in ts {
                    comp += p.d()[l][j] * (1.0 - (-a * (5.0 - s)).exp()) / a;
                }
            }
            direct -= comp;
        }
        assert!((log_likelihood(&ev, &p).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn poisson_fit_recovers_rate() {
        let ev = EventStream::new(vec![(1..=200).map(|i| i as f64 * 0.5).collect()], None, 0.0, 100.0).unwrap();
        let init = HawkesParams::new(vec![1.0], vec![1.0], vec![1.0], vec![vec![0.5]]).unwrap();
        let fit = calibrate_mle(&ev, &init, &MleBounds::default(), &MleOptions::default()).unwrap();
        // Perfectly regular events carry no excitation signal.
        assert!((fit.loglik - poisson_log_likelihood(&ev)).abs() < 1e-6, "{fit:?}");
    }
}
