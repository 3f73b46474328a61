//! Scalar proximal map of the weighted Lp penalty.
//!
//! `prox_lp_scalar(q, w, p)` minimizes `f(s) = w |s|^p + (s - q)^2 / 2` over
//! the reals for `0 < p <= 1`. For `p = 1` it is exact soft-thresholding.
//! For `p < 1` the minimum is either 0 (when `|q|` is at or below a closed
//! form threshold) or `sign(q) s*` with `s*` the larger root of
//! `g(s) = s - |q| + w p s^(p-1)`. The root is found by the shrinkage
//! fixed-point iteration `s <- |q| - w p s^(p-1)` started at `|q|`, then
//! polished with Newton steps on `g` so the result is exact to machine
//! precision even immediately above the threshold, where the fixed point
//! contracts slowly.

/// The thresholding value: for `|q|` at or below it, the prox is 0.
pub fn lp_threshold(w: f64, p: f64) -> f64 {
    debug_assert!(w >= 0.0 && p > 0.0 && p <= 1.0);
    if w == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return w;
    }
    let root = inflection(w, p);
    root + w * p * root.powf(p - 1.0)
}

/// `s_f = (2 w (1 - p))^(1 / (2 - p))`, where the two branches of `g` merge.
fn inflection(w: f64, p: f64) -> f64 {
    (2.0 * w * (1.0 - p)).powf(1.0 / (2.0 - p))
}

/// Proximal map of `s -> w |s|^p` at `q`, with `fixed_point_iters` rounds of
/// the shrinkage fixed point before the Newton polish.
pub fn prox_lp_scalar(q: f64, w: f64, p: f64, fixed_point_iters: usize) -> f64 {
    debug_assert!(w >= 0.0, "weight must be non-negative");
    debug_assert!(p > 0.0 && p <= 1.0, "p must be in (0, 1]");
    if q == 0.0 || w == 0.0 {
        return q;
    }
    if p == 1.0 {
        let aq = q.abs();
        return if aq <= w { 0.0 } else { q.signum() * (aq - w) };
    }
    let s_f = inflection(w, p);
    let threshold = s_f + w * p * s_f.powf(p - 1.0);
    prox_lp_above(q, w, p, fixed_point_iters, s_f, threshold)
}

/// Prox with the (row-constant) threshold quantities precomputed, so the
/// dominant zero branch costs no transcendentals.
pub(crate) fn prox_lp_above(
    q: f64,
    w: f64,
    p: f64,
    fixed_point_iters: usize,
    s_f: f64,
    threshold: f64,
) -> f64 {
    let aq = q.abs();
    if aq <= threshold {
        return 0.0;
    }

    let wp = w * p;
    // monotone decreasing toward s* from s0 = |q|
    let mut s = aq;
    for _ in 0..fixed_point_iters {
        s = aq - wp * s.powf(p - 1.0);
    }
    // g is convex and increasing on [s_f, |q|] and the iterate sits at or
    // above the root, so Newton converges monotonically
    let tol = 1e-14 * aq.max(1.0);
    for _ in 0..40 {
        let sp1 = s.powf(p - 1.0);
        let g = s - aq + wp * sp1;
        if g.abs() <= tol {
            break;
        }
        let dg = 1.0 + wp * (p - 1.0) * sp1 / s;
        s = (s - g / dg).clamp(s_f, aq);
    }

    // never return a point that loses to the zero candidate
    let f_nz = w * s.powf(p) + 0.5 * (s - aq) * (s - aq);
    let f_zero = 0.5 * aq * aq;
    if f_nz > f_zero {
        return 0.0;
    }
    q.signum() * s
}

/// Per-row prox constants for a whole matrix sweep: weight, inflection
/// point and threshold.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ProxRow {
    pub w: f64,
    pub s_f: f64,
    pub threshold: f64,
}

impl ProxRow {
    pub fn new(w: f64, p: f64) -> Self {
        debug_assert!(w >= 0.0);
        if p == 1.0 || w == 0.0 {
            return ProxRow { w, s_f: 0.0, threshold: w };
        }
        let s_f = inflection(w, p);
        ProxRow { w, s_f, threshold: s_f + w * p * s_f.powf(p - 1.0) }
    }

    #[inline]
    pub fn apply(&self, q: f64, p: f64, fixed_point_iters: usize) -> f64 {
        if q == 0.0 || self.w == 0.0 {
            return q;
        }
        if p == 1.0 {
            let aq = q.abs();
            return if aq <= self.w { 0.0 } else { q.signum() * (aq - self.w) };
        }
        prox_lp_above(q, self.w, p, fixed_point_iters, self.s_f, self.threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    pub(crate) fn objective(s: f64, q: f64, w: f64, p: f64) -> f64 {
        w * s.abs().powf(p) + 0.5 * (s - q) * (s - q)
    }

    /// Independent oracle: grid search over [0, |q|] then golden-section
    /// refinement of the best bracket; compares against the zero candidate.
    pub(crate) fn prox_oracle(q: f64, w: f64, p: f64, grid: usize) -> f64 {
        if q == 0.0 {
            return 0.0;
        }
        let aq = q.abs();
        let mut best = (objective(0.0, aq, w, p), 0usize);
        for k in 1..=grid {
            let s = aq * k as f64 / grid as f64;
            let f = objective(s, aq, w, p);
            if f < best.0 {
                best = (f, k);
            }
        }
        let lo = aq * best.1.saturating_sub(1) as f64 / grid as f64;
        let hi = aq * (best.1 + 1).min(grid) as f64 / grid as f64;
        // golden-section refinement of f over [lo, hi]
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        for _ in 0..200 {
            if objective(c, aq, w, p) < objective(d, aq, w, p) {
                b = d;
            } else {
                a = c;
            }
            c = b - phi * (b - a);
            d = a + phi * (b - a);
            if (b - a).abs() < 1e-12 * aq.max(1.0) {
                break;
            }
        }
        let s = 0.5 * (a + b);
        if objective(s, aq, w, p) <= objective(0.0, aq, w, p) {
            q.signum() * s
        } else {
            0.0
        }
    }

    #[test]
    fn soft_threshold_for_p_one() {
        assert_eq!(prox_lp_scalar(2.0, 0.5, 1.0, 8), 1.5);
        assert_eq!(prox_lp_scalar(-2.0, 0.5, 1.0, 8), -1.5);
        assert_eq!(prox_lp_scalar(0.4, 0.5, 1.0, 8), 0.0);
        assert_eq!(lp_threshold(0.5, 1.0), 0.5);
    }

    #[test]
    fn threshold_example_p_half() {
        // w = 1, p = 0.5: s_f = 1, threshold = 1 + 0.5 = 1.5, so q = 1.2 -> 0
        assert!((lp_threshold(1.0, 0.5) - 1.5).abs() < 1e-14);
        assert_eq!(prox_lp_scalar(1.2, 1.0, 0.5, 8), 0.0);
        let oracle = prox_oracle(1.2, 1.0, 0.5, 100_000);
        assert_eq!(oracle, 0.0);
    }

    #[test]
    fn root_example_p_08() {
        // q = 3, w = 1, p = 0.8: root of s - 3 + 0.8 s^(-0.2)
        let s = prox_lp_scalar(3.0, 1.0, 0.8, 8);
        assert!(s > 0.0);
        let g = s - 3.0 + 0.8 * s.powf(-0.2);
        assert!(g.abs() < 1e-12);
        let oracle = prox_oracle(3.0, 1.0, 0.8, 100_000);
        assert!((s - oracle).abs() < 1e-6, "{s} vs {oracle}");
    }

    #[test]
    fn accurate_immediately_above_threshold() {
        for &p in &[0.5f64, 0.8] {
            for &w in &[0.3f64, 1.0, 5.0] {
                let t = lp_threshold(w, p);
                for &eps in &[1e-6, 1e-3, 0.1] {
                    let q = t + eps;
                    let s = prox_lp_scalar(q, w, p, 8);
                    let oracle = prox_oracle(q, w, p, 100_000);
                    assert!(
                        (s - oracle).abs() < 1e-5,
                        "p={p} w={w} q={q}: {s} vs {oracle}"
                    );
                }
            }
        }
    }

    #[test]
    fn odd_monotone_and_contractive() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let q: f64 = rng.random_range(-10.0..10.0);
            let w: f64 = rng.random_range(1e-3..5.0);
            let p: f64 = *[0.5, 0.8, 1.0].get(rng.random_range(0..3)).unwrap();
            let s = prox_lp_scalar(q, w, p, 8);
            // odd
            assert_eq!(prox_lp_scalar(-q, w, p, 8), -s);
            // shrinkage
            assert!(s.abs() <= q.abs() + 1e-12);
            assert!(s == 0.0 || s.signum() == q.signum());
            // monotone in q
            let s2 = prox_lp_scalar(q + 0.05, w, p, 8);
            assert!(s2 + 1e-12 >= s, "q={q} w={w} p={p}");
        }
    }

    #[test]
    fn zero_weight_is_identity() {
        assert_eq!(prox_lp_scalar(1.7, 0.0, 0.8, 8), 1.7);
    }
}
