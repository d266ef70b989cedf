//! Monte Carlo checks against independently computed values.

use contagion::charfn::{charfn_mc, riccati_solve};
use contagion::filter::{calibrate_mle, detect_jumps, log_likelihood, EventStream, MleBounds, MleOptions, ReturnSeries};
use contagion::rng::{substream, Stream};
use contagion::simulate::{
    ergodic_average, simulate_hawkes_ensemble, simulate_market_ensemble, ConstantPolicy, MarketSimSpec, Scheme,
};
use contagion::stats::mean_stderr;
use contagion::value::{f_feynman_kac, f_source, McSpec};
use contagion::{HawkesParams, JumpLaw, MarketParams};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

fn excited() -> HawkesParams {
    HawkesParams::new(vec![2.0], vec![1.0], vec![1.5], vec![vec![1.0]]).unwrap()
}

#[test]
fn counts_match_compensator() {
    let p = excited();
    let paths = simulate_hawkes_ensemble(&p, None, 3.0, 4000, 11).unwrap();
    let diff: Vec<f64> = paths.iter().map(|x| x.counts()[0] as f64 - x.compensator(&p)[0]).collect();
    let s = mean_stderr(&diff);
    assert!(s.mean.abs() <= 4.0 * s.stderr, "{s:?}");
}

#[test]
fn expected_intensity_follows_linear_ode() {
    // E[lambda_t] = mean + e^{-(alpha - d) t} (lambda0 - mean) for m = 1.
    let p = excited();
    let t = 1.0;
    let paths = simulate_hawkes_ensemble(&p, None, t, 4000, 12).unwrap();
    let ends: Vec<f64> = paths.iter().map(|x| x.end.lambda[0]).collect();
    let s = mean_stderr(&ends);
    let want = 2.0 + (-t).exp() * (1.5 - 2.0);
    assert!((s.mean - want).abs() <= 4.0 * s.stderr, "{s:?} {want}");
}

#[test]
fn time_average_is_stationary_mean() {
    let p = HawkesParams::new(vec![2.0, 2.0], vec![0.5, 0.5], vec![0.5, 0.5], vec![vec![1.0, 0.6], vec![0.6, 1.0]]).unwrap();
    let mean = p.stationary_mean().unwrap();
    let r = ergodic_average(&p, 4000.0, 20.0, 40, 5).unwrap();
    for l in 0..2 {
        assert!((r.time_average[l] - mean[l]).abs() <= 3.0 * r.stderr[l], "{r:?} {mean:?}");
    }
}

#[test]
fn riccati_matches_monte_carlo_with_excitation() {
    let p = excited();
    for (u, t) in [(0.5, 0.5), (1.0, 1.0)] {
        let exact = riccati_solve(&p, &[u], &[0.3], t).unwrap().phi;
        let mc = charfn_mc(&p, &[u], &[0.3], t, 20_000, 3).unwrap();
        assert!((exact - mc.phi).norm() <= 4.0 * mc.stderr() + 1e-8, "{exact} {mc:?}");
    }
}

#[test]
fn poisson_characteristic_function() {
    let p = HawkesParams::new(vec![1.0], vec![2.0], vec![2.0], vec![vec![0.0]]).unwrap();
    let (u, v, t) = (0.7, 0.4, 1.3);
    let want = (Complex64::new(0.0, v * 2.0) + 2.0 * t * (Complex64::new(0.0, u).exp() - 1.0)).exp();
    let got = riccati_solve(&p, &[u], &[v], t).unwrap().phi;
    assert!((got - want).norm() < 1e-8);
}

#[test]
fn feynman_kac_constant_source() {
    let mk = MarketParams::new(0.02, 1, 1, vec![0.2], vec![0.0], vec![0.05], vec![0.0], vec![-0.1], vec![JumpLaw::Deterministic { zbar: 1.0 }]).unwrap();
    let hk = HawkesParams::new(vec![2.0], vec![1.0], vec![1.0], vec![vec![0.0]]).unwrap();
    let beta = 0.5;
    let est = f_feynman_kac(&mk, &hk, beta, &[1.0], &McSpec { paths: 200, seed: 2, ..Default::default() }).unwrap();
    let want = f_source(&mk, beta, &[1.0]).unwrap() / beta;
    assert!((est.integral - want).abs() <= 3.0 * est.stderr + est.truncation_bound + 1e-10, "{est:?} {want}");
}

#[test]
fn euler_weak_order_is_one() {
    // Constant weights and no jump exposure: wealth is geometric Brownian
    // motion, which the log scheme reproduces exactly on the same draws.
    let mk = MarketParams::new(0.02, 1, 1, vec![0.4], vec![0.0], vec![0.08], vec![0.0], vec![0.0], vec![JumpLaw::Deterministic { zbar: 1.0 }]).unwrap();
    let hk = HawkesParams::new(vec![1.0], vec![0.01], vec![0.01], vec![vec![0.0]]).unwrap();
    let pol = ConstantPolicy { weights: vec![2.0], consumption_fraction: 0.0 };
    let dts = [0.05, 0.025, 0.0125, 0.00625];
    let mut errors = Vec::new();
    for &dt in &dts {
        let run = |scheme| {
            let spec = MarketSimSpec { x0: 1.0, horizon: 1.0, dt, scheme };
            simulate_market_ensemble(&mk, &hk, &pol, &spec, 20_000, 9).unwrap()
        };
        let (euler, exact) = (run(Scheme::Euler), run(Scheme::LogEuler));
        let diff: Vec<f64> = euler.iter().zip(&exact).map(|(a, b)| a.final_wealth().ln() - b.final_wealth().ln()).collect();
        errors.push(mean_stderr(&diff).mean.abs());
    }
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope - 1.0).abs() <= 0.3, "slope {slope}, errors {errors:?}");
}

#[test]
fn gaussian_tail_event_rate() {
    let n = 100_000;
    let mut rng = substream(77, 0, Stream::Auxiliary);
    let col: Vec<f64> = (0..n).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); 0.01 * z }).collect();
    let window = 1000;
    let series = ReturnSeries { times: (0..n).map(|i| i as f64 / 252.0).collect(), names: vec!["x".into()], returns: vec![col] };
    let ev = detect_jumps(&series, window, 3.0, true).unwrap();
    let obs = (n - window) as f64;
    let rate = ev.times[0].len() as f64 / obs;
    let p = 0.001_349_898_031_630_094_5;
    assert!((rate - p).abs() <= 3.0 * (p * (1.0 - p) / obs).sqrt(), "rate {rate}");
}

#[test]
fn likelihood_peaks_near_truth() {
    let p = HawkesParams::new(vec![2.0], vec![1.0], vec![1.0], vec![vec![1.0]]).unwrap();
    let path = contagion::simulate::simulate_hawkes(&p, None, 500.0, 21).unwrap();
    let ev = EventStream::new(vec![path.events.iter().map(|e| e.t).collect()], None, 0.0, 500.0).unwrap();
    let at_truth = log_likelihood(&ev, &p).unwrap();
    for s in [0.5, 1.5] {
        let q = HawkesParams::new_unchecked_stability(vec![2.0 * s], vec![1.0 * s], vec![1.0 * s], vec![vec![1.0 * s]]).unwrap();
        assert!(at_truth >= log_likelihood(&ev, &q).unwrap());
    }
    let fit = calibrate_mle(&ev, &HawkesParams::new(vec![1.0], vec![0.5], vec![0.5], vec![vec![0.3]]).unwrap(), &MleBounds::default(), &MleOptions::default()).unwrap();
    assert!(fit.converged, "{fit:?}");
    assert!(fit.loglik >= at_truth);
}
