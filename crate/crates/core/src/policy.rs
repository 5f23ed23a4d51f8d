//! Choosing one grasp to execute, and fitting the analytic policy.
//!
//! The analytic policy models `P(grasping) = P(grasping | reaching) · P(reaching)`
//! with a linear term in the antipodal score and a sigmoid in the vertical score.

use std::fmt::Write as _;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::grasp::ScoredGrasp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidFit {
    /// Steepness.
    pub a: f64,
    /// Midpoint.
    pub b: f64,
}

impl SigmoidFit {
    pub fn eval(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-self.a * (x - self.b)).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticPolicy {
    pub sigmoid: SigmoidFit,
    pub linear: LinearFit,
}

impl Default for AnalyticPolicy {
    fn default() -> Self {
        AnalyticPolicy {
            sigmoid: SigmoidFit { a: 10.1244, b: 0.6103 },
            linear: LinearFit { slope: 0.8783, intercept: -0.0587 },
        }
    }
}

impl AnalyticPolicy {
    pub fn validate(&self) -> Result<()> {
        let all = [self.sigmoid.a, self.sigmoid.b, self.linear.slope, self.linear.intercept];
        if all.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("policy coefficients must be finite".into()))
        }
    }

    /// `key = value` lines for `a`, `b`, `slope` and `intercept`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("a", self.sigmoid.a),
            ("b", self.sigmoid.b),
            ("slope", self.linear.slope),
            ("intercept", self.linear.intercept),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

fn argmax_by(grasps: &[ScoredGrasp], score: impl Fn(&ScoredGrasp) -> Result<f64>) -> Result<usize> {
    if grasps.is_empty() {
        return Err(Error::Empty("grasp selection"));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, g) in grasps.iter().enumerate() {
        let s = score(g)?;
        if s > best.1 {
            best = (i, s);
        }
    }
    Ok(best.0)
}

/// Index maximizing `s_q + s_v`; ties go to the lower index.
pub fn heuristic_select(grasps: &[ScoredGrasp]) -> Result<usize> {
    argmax_by(grasps, |g| Ok(g.s_q + g.grasp.vertical_score()?))
}

/// Success probability of a grasp with antipodal score `s_q` and vertical score `s_v`.
///
/// Not clamped: tiny `s_q` gives slightly negative values.
pub fn grasp_probability(s_q: f64, s_v: f64, policy: &AnalyticPolicy) -> f64 {
    policy.linear.eval(s_q) * policy.sigmoid.eval(s_v)
}

/// Index maximizing [`grasp_probability`]; ties go to the lower index.
pub fn analytic_select(grasps: &[ScoredGrasp], policy: &AnalyticPolicy) -> Result<usize> {
    argmax_by(grasps, |g| Ok(grasp_probability(g.s_q, g.grasp.vertical_score()?, policy)))
}

fn check_samples(xs: &[f64], ys: &[f64], min: usize) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { expected: xs.len(), actual: ys.len() });
    }
    if xs.len() < min {
        return Err(Error::InvalidInput(format!("need at least {min} samples, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("samples must be finite".into()));
    }
    Ok(())
}

/// Means and centered second moments `(x̄, ȳ, Sxx, Syy, Sxy)`.
fn moments(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    (mx, my, sxx, syy, sxy)
}

/// Ordinary least-squares line through `(xs, ys)`.
pub fn fit_linear(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    check_samples(xs, ys, 2)?;
    let (mx, my, sxx, _, sxy) = moments(xs, ys);
    if !(sxx > 0.0) {
        return Err(Error::InvalidInput("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    Ok(LinearFit { slope, intercept: my - slope * mx })
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_samples(xs, ys, 2)?;
    let (_, _, sxx, syy, sxy) = moments(xs, ys);
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::InvalidInput("pearson needs non-zero variance in both variables".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Stop once an accepted step lowers the squared residual by less than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { tol: 1e-10, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidReport {
    pub fit: SigmoidFit,
    /// Sum of squared residuals at `fit`.
    pub residual: f64,
    /// Accepted steps.
    pub iterations: usize,
    pub converged: bool,
}

fn sse(fit: &SigmoidFit, xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter().zip(ys).map(|(x, y)| (y - fit.eval(*x)).powi(2)).sum()
}

/// Gauss-Newton normal equations `(JᵀJ, Jᵀr)` for the residual `y − f(x)`.
fn normal_equations(fit: &SigmoidFit, xs: &[f64], ys: &[f64]) -> (Matrix2<f64>, Vector2<f64>) {
    let mut jtj = Matrix2::zeros();
    let mut jtr = Vector2::zeros();
    for (x, y) in xs.iter().zip(ys) {
        let f = fit.eval(*x);
        let d = f * (1.0 - f);
        let j = Vector2::new(d * (x - fit.b), -fit.a * d);
        jtj += j * j.transpose();
        jtr += j * (y - f);
    }
    (jtj, jtr)
}

/// Levenberg-Marquardt fit of `1 / (1 + e^{−a(x − b)})` to `(xs, ys)`.
///
/// Damping starts at 1e−3 and moves by a factor of 10 per step. A fit that
/// runs out of iterations is still returned, with `converged = false`.
pub fn fit_sigmoid(xs: &[f64], ys: &[f64], init: SigmoidFit, opts: &FitOptions) -> Result<SigmoidReport> {
    check_samples(xs, ys, 3)?;
    if ys.iter().any(|y| !(0.0..=1.0).contains(y)) {
        return Err(Error::Domain("sigmoid targets must lie in [0, 1]".into()));
    }
    if !(init.a.is_finite() && init.b.is_finite()) {
        return Err(Error::InvalidInput("initial sigmoid parameters must be finite".into()));
    }
    let mut fit = init;
    let mut cost = sse(&fit, xs, ys);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let (jtj, jtr) = normal_equations(&fit, xs, ys);
        if cost == 0.0 || jtr.norm() == 0.0 {
            converged = true;
            break;
        }
        let damped = jtj + Matrix2::from_diagonal(&jtj.diagonal()) * lambda;
        let step = damped.lu().solve(&jtr);
        let candidate = step.map(|s| SigmoidFit { a: fit.a + s.x, b: fit.b + s.y });
        match candidate {
            Some(c) if sse(&c, xs, ys) < cost => {
                let new_cost = sse(&c, xs, ys);
                let decrease = cost - new_cost;
                fit = c;
                cost = new_cost;
                iterations += 1;
                lambda = (lambda / 10.0).max(1e-12);
                if decrease < opts.tol {
                    converged = true;
                    break;
                }
            }
            _ => {
                lambda *= 10.0;
                if lambda > 1e16 {
                    // No descent direction left at working precision.
                    converged = jtr.norm() < opts.tol.sqrt();
                    break;
                }
            }
        }
    }
    if !converged {
        log::warn!("sigmoid fit stopped after {iterations} steps without converging (residual {cost:e})");
    }
    Ok(SigmoidReport { fit, residual: cost, iterations, converged })
}
