//! Scalar root finders used by the class-level optimisers.

/// Real roots of `a x^2 + b x + c`, ascending. Computed without
/// cancellation.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { vec![] } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let mut roots = if q == 0.0 { vec![0.0, 0.0] } else { vec![q / a, c / q] };
    roots.sort_by(f64::total_cmp);
    roots
}

/// The root `(-b + sqrt(b^2 - 4ac)) / (2a)`, evaluated stably.
pub fn quadratic_plus_root(a: f64, b: f64, c: f64) -> f64 {
    let sq = (b * b - 4.0 * a * c).max(0.0).sqrt();
    if b >= 0.0 {
        let q = -0.5 * (b + sq);
        if q == 0.0 {
            0.0
        } else {
            c / q
        }
    } else {
        0.5 * (-b + sq) / a
    }
}

/// Real roots of `a x^3 + b x^2 + c x + d`, ascending, each refined by a
/// couple of Newton steps on the polynomial. A negligible leading
/// coefficient drops the degree.
pub fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let scale = b.abs().max(c.abs()).max(d.abs());
    if a == 0.0 || a.abs() <= 1e-14 * scale {
        return quadratic_roots(b, c, d);
    }
    let (p2, p1, p0) = (b / a, c / a, d / a);
    // Depressed cubic t^3 + p t + q with x = t - p2 / 3.
    let shift = p2 / 3.0;
    let p = p1 - p2 * p2 / 3.0;
    let q = 2.0 * p2.powi(3) / 27.0 - p2 * p1 / 3.0 + p0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = if p == 0.0 && q == 0.0 {
        vec![-shift]
    } else if disc > 0.0 {
        let sign = if q >= 0.0 { 1.0 } else { -1.0 };
        let u = (-q / 2.0 - sign * disc.sqrt()).cbrt();
        let v = -p / (3.0 * u);
        vec![u + v - shift]
    } else {
        let r = (-p / 3.0).sqrt();
        let arg = if r == 0.0 { 0.0 } else { (-q / (2.0 * r.powi(3))).clamp(-1.0, 1.0) };
        let phi = arg.acos();
        (0..3)
            .map(|k| 2.0 * r * ((phi - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos() - shift)
            .collect()
    };
    for x in roots.iter_mut() {
        for _ in 0..3 {
            let f = ((a * *x + b) * *x + c) * *x + d;
            let df = (3.0 * a * *x + 2.0 * b) * *x + c;
            if df == 0.0 || !f.is_finite() {
                break;
            }
            let next = *x - f / df;
            if !next.is_finite() {
                break;
            }
            *x = next;
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Outcome of [`solve_increasing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarRoot {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Root of a strictly increasing function on the open interval `(lo, hi)`
/// (either end may be infinite) by Newton steps kept inside a shrinking
/// bracket, with bisection whenever a step leaves it.
///
/// `f` returns the value and derivative. Stops when `|f| <= ftol`.
pub fn solve_increasing<F>(f: F, lo: f64, hi: f64, x0: f64, ftol: f64, max_iter: usize) -> ScalarRoot
where
    F: Fn(f64) -> (f64, f64),
{
    debug_assert!(x0 > lo && x0 < hi);
    // Non-finite values only arise past a singular upper end, where the
    // function tends to +inf.
    let positive = |v: f64| !v.is_finite() || v > 0.0;
    let (mut a, mut b) = (lo, hi);
    if a.is_infinite() {
        let mut step = 1.0f64.max(x0.abs());
        let mut probe = x0;
        while positive(f(probe).0) {
            b = b.min(probe);
            probe = x0 - step;
            step *= 2.0;
            if !probe.is_finite() {
                return ScalarRoot { x: probe, value: f64::NAN, iterations: 0, converged: false };
            }
        }
        a = probe;
    }
    if b.is_infinite() {
        let mut step = 1.0f64.max(x0.abs());
        let mut probe = x0;
        while !positive(f(probe).0) {
            a = a.max(probe);
            probe = x0 + step;
            step *= 2.0;
            if !probe.is_finite() {
                return ScalarRoot { x: probe, value: f64::NAN, iterations: 0, converged: false };
            }
        }
        b = probe;
    }
    let mut x = if x0 > a && x0 < b { x0 } else { 0.5 * (a + b) };
    let mut best = ScalarRoot { x, value: f64::INFINITY, iterations: 0, converged: false };
    for it in 1..=max_iter {
        let (v, dv) = f(x);
        if v.is_finite() && v.abs() < best.value.abs() {
            best = ScalarRoot { x, value: v, iterations: it, converged: false };
        }
        if v.is_finite() && v.abs() <= ftol {
            return ScalarRoot { x, value: v, iterations: it, converged: true };
        }
        if positive(v) {
            b = x;
        } else {
            a = x;
        }
        let newton = if v.is_finite() && dv.is_finite() && dv > 0.0 { x - v / dv } else { f64::NAN };
        x = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if x <= a || x >= b {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_cases() {
        assert_eq!(quadratic_roots(1.0, -3.0, 2.0), vec![1.0, 2.0]);
        assert!(quadratic_roots(1.0, 0.0, 1.0).is_empty());
        assert_eq!(quadratic_roots(0.0, 2.0, -4.0), vec![2.0]);
        let r = quadratic_plus_root(1.0, 1e8, -1.0);
        assert!((r - 1e-8).abs() < 1e-22);
        assert_eq!(quadratic_plus_root(-1.0, 0.0, 4.0), -2.0);
    }

    #[test]
    fn cubic_three_real_roots() {
        let r = cubic_roots(2.0, -12.0, 22.0, -12.0);
        for (got, want) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn cubic_one_real_root() {
        let r = cubic_roots(1.0, 0.0, 1.0, -2.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_degenerates_to_quadratic() {
        assert_eq!(cubic_roots(0.0, 1.0, -3.0, 2.0), vec![1.0, 2.0]);
    }

    #[test]
    fn newton_bisection_on_singular_domain() {
        let f = |x: f64| (x + 1.0 / (1.0 - x) - 3.0, 1.0 + 1.0 / (1.0 - x).powi(2));
        let r = solve_increasing(f, f64::NEG_INFINITY, 1.0, 0.9, 1e-14, 200);
        assert!(r.converged, "{r:?}");
        assert!((r.x - (2.0 - 2f64.sqrt())).abs() < 1e-13);
        let r = solve_increasing(|x: f64| (x.exp() - 5.0, x.exp()), f64::NEG_INFINITY, f64::INFINITY, -30.0, 1e-13, 200);
        assert!((r.x - 5f64.ln()).abs() < 1e-13);
    }
}
