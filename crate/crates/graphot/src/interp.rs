//! Interpolation functions `theta : [0,inf)^2 -> [0,inf)` used to average the
//! densities at the two ends of an edge. The admissible class is: symmetric,
//! monotone in each argument, positively 1-homogeneous, normalized by
//! `theta(1,1) = 1`, jointly concave, and with finite
//!
//! ```text
//! C_theta = \int_0^1 dt / sqrt(theta(1-t, t)) .
//! ```
//!
//! The two standard members are the arithmetic mean `(r+s)/2` and the
//! logarithmic mean `(r-s)/(log r - log s)`.

use crate::error::{GraphotError, Result};
use crate::quadrature::gl_integrate;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Relative closeness below which the logarithmic mean switches to its series
/// expansion in `z = (r-s)/(r+s)`.
const LOG_MEAN_SERIES_CUTOFF: f64 = 1e-4;

type ThetaEval = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum InterpolationFn {
    /// `theta_1(r,s) = (r+s)/2`
    Arithmetic,
    /// `theta_2(r,s) = (r-s)/(log r - log s)`, with `theta_2(r,r) = r` and
    /// `theta_2(r,0) = 0` as limiting values.
    Logarithmic,
    /// Caller-supplied evaluator; `name` is used in reports.
    Custom { name: String, eval: ThetaEval },
}

impl std::fmt::Debug for InterpolationFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Logarithmic mean with the stable series near the diagonal.
fn log_mean(r: f64, s: f64) -> f64 {
    if r <= 0.0 || s <= 0.0 {
        return 0.0;
    }
    let m = 0.5 * (r + s);
    let z = (r - s) / (r + s);
    if z.abs() < LOG_MEAN_SERIES_CUTOFF {
        // (r-s)/log(r/s) = m / (1 + z^2/3 + z^4/5 + ...)
        let z2 = z * z;
        m / (1.0 + z2 / 3.0 + z2 * z2 / 5.0)
    } else {
        (r - s) / (r.ln() - s.ln())
    }
}

/// Partial derivatives of the logarithmic mean for positive arguments.
fn log_mean_grad(r: f64, s: f64) -> (f64, f64) {
    let z = (r - s) / (r + s);
    if z.abs() < LOG_MEAN_SERIES_CUTOFF {
        // theta = m / h(z), h = 1 + z^2/3 + z^4/5
        let m = 0.5 * (r + s);
        let z2 = z * z;
        let h = 1.0 + z2 / 3.0 + z2 * z2 / 5.0;
        let hp = 2.0 * z / 3.0 + 4.0 * z * z2 / 5.0;
        let dz_dr = 2.0 * s / ((r + s) * (r + s));
        let dz_ds = -2.0 * r / ((r + s) * (r + s));
        let common = -m * hp / (h * h);
        (0.5 / h + common * dz_dr, 0.5 / h + common * dz_ds)
    } else {
        let l = r.ln() - s.ln();
        let dr = (l - (r - s) / r) / (l * l);
        let ds = (-l + (r - s) / s) / (l * l);
        (dr, ds)
    }
}

impl InterpolationFn {
    pub fn custom<F>(name: &str, eval: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        InterpolationFn::Custom {
            name: name.to_string(),
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            InterpolationFn::Arithmetic => "arithmetic",
            InterpolationFn::Logarithmic => "logarithmic",
            InterpolationFn::Custom { name, .. } => name,
        }
    }

    /// Evaluates `theta(r, s)`. Negative inputs are an error; zeros take the
    /// limiting values.
    pub fn eval(&self, r: f64, s: f64) -> Result<f64> {
        if r < 0.0 || s < 0.0 || !r.is_finite() || !s.is_finite() {
            return Err(GraphotError::NegativeInput { r, s });
        }
        Ok(self.eval_unchecked(r, s))
    }

    /// Evaluation without the sign check; used in solver hot loops where the
    /// caller guarantees non-negative arguments.
    pub(crate) fn eval_unchecked(&self, r: f64, s: f64) -> f64 {
        match self {
            InterpolationFn::Arithmetic => 0.5 * (r + s),
            InterpolationFn::Logarithmic => log_mean(r, s),
            InterpolationFn::Custom { eval, .. } => eval(r, s),
        }
    }

    /// Value together with partial derivatives, for positive arguments.
    /// Custom functions fall back to central differences.
    pub(crate) fn eval_with_grad(&self, r: f64, s: f64) -> (f64, f64, f64) {
        match self {
            InterpolationFn::Arithmetic => (0.5 * (r + s), 0.5, 0.5),
            InterpolationFn::Logarithmic => {
                let v = log_mean(r, s);
                let (dr, ds) = log_mean_grad(r, s);
                (v, dr, ds)
            }
            InterpolationFn::Custom { eval, .. } => {
                let v = eval(r, s);
                let h = 1e-7 * (r + s).max(1e-7);
                let dr = (eval(r + h, s) - eval((r - h).max(0.0), s))
                    / (h + (r - (r - h).max(0.0)));
                let ds = (eval(r, s + h) - eval(r, (s - h).max(0.0)))
                    / (h + (s - (s - h).max(0.0)));
                (v, dr, ds)
            }
        }
    }

    /// The constant `C_theta = \int_0^1 dt / sqrt(theta(1-t,t))`.
    ///
    /// By symmetry this is `2 \int_0^{1/2}`; the left half is summed over
    /// dyadic intervals `[2^{-k-1}, 2^{-k}]` (Gauss–Legendre on each), with a
    /// geometric-tail estimate. When the dyadic segments stop decaying the
    /// integral diverges and `CThetaInfinite` is returned.
    pub fn c_theta(&self, quad_tol: f64) -> Result<f64> {
        let f = |t: f64| {
            let th = self.eval_unchecked(1.0 - t, t);
            if th <= 0.0 {
                f64::INFINITY
            } else {
                1.0 / th.sqrt()
            }
        };
        let mut total = 0.0;
        let mut prev = f64::INFINITY;
        let mut k = 1u32;
        loop {
            let hi = 0.5f64.powi(k as i32);
            let lo = 0.5 * hi;
            let seg = gl_integrate(&f, lo, hi, 32);
            if !seg.is_finite() {
                return Err(GraphotError::CThetaInfinite);
            }
            total += seg;
            let ratio = seg / prev.max(f64::MIN_POSITIVE);
            if k >= 8 && ratio < 0.995 {
                // geometric tail bound
                let tail = seg * ratio / (1.0 - ratio);
                if tail < 0.5 * quad_tol {
                    total += tail;
                    break;
                }
            }
            if k > 2000 || (k > 200 && ratio >= 0.995) {
                // non-decaying dyadic segments: condition (6) fails
                return Err(GraphotError::CThetaInfinite);
            }
            prev = seg;
            k += 1;
        }
        Ok(2.0 * total)
    }

    /// Randomized audit of the admissibility conditions. Returns the list of
    /// violations found (empty when all sampled checks pass).
    pub fn validate_properties(&self, samples: usize, seed: u64) -> PropertyReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut violations = Vec::new();
        let tol = 1e-9;
        let mut record = |prop: &str, witness: Vec<f64>, detail: String| {
            violations.push(Violation {
                property: prop.to_string(),
                witness,
                detail,
            });
        };

        // normalization theta(1,1) = 1 and theta(a,a) = a
        let v11 = self.eval_unchecked(1.0, 1.0);
        if (v11 - 1.0).abs() > tol {
            record("normalization", vec![1.0, 1.0], format!("theta(1,1) = {v11}"));
        }
        for _ in 0..samples {
            let r: f64 = rng.gen_range(0.0..4.0);
            let s: f64 = rng.gen_range(0.0..4.0);
            let t: f64 = rng.gen_range(0.0..4.0);
            let lam: f64 = rng.gen_range(0.01..5.0);
            let v_rs = self.eval_unchecked(r, s);
            let v_sr = self.eval_unchecked(s, r);
            if (v_rs - v_sr).abs() > tol * (1.0 + v_rs.abs()) {
                record("symmetry", vec![r, s], format!("{v_rs} vs {v_sr}"));
            }
            // monotonicity in the first argument
            let (a, b) = if r <= s { (r, s) } else { (s, r) };
            let v_at = self.eval_unchecked(a, t);
            let v_bt = self.eval_unchecked(b, t);
            if v_at > v_bt + tol * (1.0 + v_bt.abs()) {
                record(
                    "monotonicity",
                    vec![a, b, t],
                    format!("theta({a},{t}) = {v_at} > theta({b},{t}) = {v_bt}"),
                );
            }
            // positive 1-homogeneity
            let v_scaled = self.eval_unchecked(lam * r, lam * s);
            if (v_scaled - lam * v_rs).abs() > 1e-7 * (1.0 + v_scaled.abs()) {
                record(
                    "homogeneity",
                    vec![lam, r, s],
                    format!("theta(l r, l s) = {v_scaled}, l theta(r,s) = {}", lam * v_rs),
                );
            }
            // midpoint concavity
            let (r2, s2): (f64, f64) = (rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0));
            let mid = self.eval_unchecked(0.5 * (r + r2), 0.5 * (s + s2));
            let avg = 0.5 * (v_rs + self.eval_unchecked(r2, s2));
            if mid < avg - 1e-8 * (1.0 + avg.abs()) {
                record(
                    "concavity",
                    vec![r, s, r2, s2],
                    format!("midpoint value {mid} < average {avg}"),
                );
            }
        }
        PropertyReport {
            theta: self.name().to_string(),
            samples,
            seed,
            passed: violations.is_empty(),
            violations,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Violation {
    pub property: String,
    pub witness: Vec<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PropertyReport {
    pub theta: String,
    pub samples: usize,
    pub seed: u64,
    pub passed: bool,
    pub violations: Vec<Violation>,
}

/// Parses the CLI spelling of a builtin interpolation.
pub fn parse_theta(name: &str) -> Result<InterpolationFn> {
    match name {
        "arithmetic" | "theta1" => Ok(InterpolationFn::Arithmetic),
        "logarithmic" | "theta2" => Ok(InterpolationFn::Logarithmic),
        other => Err(GraphotError::InvalidParameter(format!(
            "unknown interpolation '{other}' (expected 'arithmetic' or 'logarithmic')"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_simpson;

    #[test]
    fn arithmetic_c_theta_is_sqrt2() {
        let c = InterpolationFn::Arithmetic.c_theta(1e-10).unwrap();
        assert!((c - std::f64::consts::SQRT_2).abs() < 1e-9, "c = {c}");
    }

    #[test]
    fn log_mean_values() {
        let th = InterpolationFn::Logarithmic;
        assert!((th.eval(1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(th.eval(1.0, 0.0).unwrap(), 0.0);
        // (e - 1)/ (1 - 0) : log mean of e and 1 is (e-1)/1
        let v = th.eval(std::f64::consts::E, 1.0).unwrap();
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-14);
        // series value agrees with the direct ratio evaluated at the same
        // point (the ratio is still accurate to ~1e-11 at z ~ 5e-5)
        let (r, s) = (1.0, 1.0 + 1e-4);
        let series = th.eval(r, s).unwrap(); // z ~ 5e-5: series branch
        let direct = (r - s) / (r.ln() - s.ln());
        assert!((series - direct).abs() < 1e-10, "{series} vs {direct}");
    }

    #[test]
    fn log_mean_grad_matches_finite_difference() {
        let th = InterpolationFn::Logarithmic;
        for &(r, s) in &[(0.3, 1.7), (2.0, 2.0 + 1e-6), (0.01, 3.0)] {
            let (_, dr, ds) = th.eval_with_grad(r, s);
            let h = 1e-6;
            let fdr = (th.eval_unchecked(r + h, s) - th.eval_unchecked(r - h, s)) / (2.0 * h);
            let fds = (th.eval_unchecked(r, s + h) - th.eval_unchecked(r, s - h)) / (2.0 * h);
            assert!((dr - fdr).abs() < 1e-5, "dr {dr} vs {fdr} at ({r},{s})");
            assert!((ds - fds).abs() < 1e-5, "ds {ds} vs {fds} at ({r},{s})");
        }
    }

    #[test]
    fn log_mean_between_geometric_and_arithmetic() {
        let th = InterpolationFn::Logarithmic;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let r: f64 = rng.gen_range(1e-6..5.0);
            let s: f64 = rng.gen_range(1e-6..5.0);
            let v = th.eval(r, s).unwrap();
            assert!(v >= (r * s).sqrt() - 1e-12);
            assert!(v <= 0.5 * (r + s) + 1e-12);
        }
    }

    #[test]
    fn c_theta_log_mean_against_independent_quadrature() {
        // independent oracle: adaptive Simpson after the substitution t = x^2
        // which removes the sqrt(t)-type endpoint behavior; symmetric halves.
        let th = InterpolationFn::Logarithmic;
        let integrand = |t: f64| 1.0 / th.eval_unchecked(1.0 - t, t).sqrt();
        let half = adaptive_simpson(
            &|x: f64| {
                if x == 0.0 {
                    0.0
                } else {
                    2.0 * x * integrand(x * x)
                }
            },
            0.0,
            (0.5f64).sqrt(),
            1e-11,
        );
        let oracle = 2.0 * half;
        let c = th.c_theta(1e-10).unwrap();
        assert!((c - oracle).abs() < 1e-7, "dyadic {c} vs simpson {oracle}");
        // log mean <= arithmetic mean, so C_theta2 >= C_theta1
        assert!(c > std::f64::consts::SQRT_2);
    }

    #[test]
    fn c_theta_min_closed_form() {
        // theta = min(r,s): integral is 2 * int_0^{1/2} t^{-1/2} dt = 2 sqrt(2)
        let th = InterpolationFn::custom("min", |r, s| r.min(s));
        let c = th.c_theta(1e-10).unwrap();
        assert!((c - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-8, "c = {c}");
    }

    #[test]
    fn c_theta_divergence_detected() {
        // min(r,s)^2 * 2/(r+s): 1-homogeneous, theta(1-t,t) ~ 2 t^2 near 0,
        // so the integrand ~ 1/t and the integral diverges.
        let th = InterpolationFn::custom("min-squared-over-mean", |r: f64, s: f64| {
            if r + s == 0.0 {
                0.0
            } else {
                r.min(s).powi(2) * 2.0 / (r + s)
            }
        });
        assert!(matches!(
            th.c_theta(1e-8),
            Err(GraphotError::CThetaInfinite)
        ));
    }

    #[test]
    fn builtin_properties_pass() {
        for th in [InterpolationFn::Arithmetic, InterpolationFn::Logarithmic] {
            let report = th.validate_properties(500, 11);
            assert!(report.passed, "{:?}", report.violations.first());
        }
    }

    #[test]
    fn violations_carry_witnesses() {
        // not symmetric, caught with a concrete witness pair
        let th = InterpolationFn::custom("lopsided", |r, s| 0.7 * r + 0.3 * s);
        let report = th.validate_properties(200, 11);
        assert!(!report.passed);
        assert!(report.violations.iter().any(|v| v.property == "symmetry"));
        assert!(!report.violations[0].witness.is_empty());
    }

    #[test]
    fn negative_input_rejected() {
        assert!(InterpolationFn::Logarithmic.eval(-0.1, 1.0).is_err());
    }
}
