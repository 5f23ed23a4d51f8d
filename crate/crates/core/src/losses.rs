//! Training losses with analytic gradients, plus a central-difference checker.
//!
//! Gradients are always taken with respect to the prediction inputs. Sums run
//! in input order so values are bit-reproducible.

use rand::Rng;

use crate::anchors::{AnchorLabel, LabelClass, PositiveAnchor, RefineLabel, ResidualBlock};
use crate::error::{Error, Result};
use crate::sampling::seeded_rng;

/// Probabilities are clamped to `[ε, 1 − ε]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;

/// Relative errors are measured against `max(|analytic|, |numeric|, floor)`.
pub const GRADIENT_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    /// One entry per prediction input.
    pub gradients: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalParams {
    pub gamma: f64,
    pub alpha: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        FocalParams { gamma: 2.0, alpha: 0.25 }
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}

pub fn mse_loss(pred: &[f64], gt: &[f64]) -> Result<LossResult> {
    check_len(pred.len(), gt.len())?;
    if pred.is_empty() {
        return Err(Error::Empty("mse_loss predictions"));
    }
    let n = pred.len() as f64;
    let value = pred.iter().zip(gt).map(|(p, g)| (g - p) * (g - p)).sum::<f64>() / n;
    let gradients = pred.iter().zip(gt).map(|(p, g)| -2.0 * (g - p) / n).collect();
    Ok(LossResult { value, gradients })
}

/// Smooth-L1 with its knee at `|pred − gt| = 1`.
pub fn smooth_l1(pred: f64, gt: f64) -> LossResult {
    let (value, grad) = smooth_l1_parts(pred - gt);
    LossResult { value, gradients: vec![grad] }
}

fn smooth_l1_parts(x: f64) -> (f64, f64) {
    if x.abs() < 1.0 {
        (0.5 * x * x, x)
    } else {
        (x.abs() - 0.5, x.signum())
    }
}

/// Clamped probability and the derivative of the clamp.
fn clamp_prob(p: f64) -> (f64, f64) {
    if p < PROB_EPS {
        (PROB_EPS, 0.0)
    } else if p > 1.0 - PROB_EPS {
        (1.0 - PROB_EPS, 0.0)
    } else {
        (p, 1.0)
    }
}

fn focal_parts(p: f64, positive: bool, f: &FocalParams) -> (f64, f64) {
    let (p, dclamp) = clamp_prob(p);
    let FocalParams { gamma, alpha } = *f;
    let (value, grad) = if positive {
        let q = 1.0 - p;
        let value = -alpha * q.powf(gamma) * p.ln();
        let grad = alpha * (gamma * q.powf(gamma - 1.0) * p.ln() - q.powf(gamma) / p);
        (value, grad)
    } else {
        let q = 1.0 - p;
        let value = -(1.0 - alpha) * p.powf(gamma) * q.ln();
        let grad = -(1.0 - alpha) * (gamma * p.powf(gamma - 1.0) * q.ln() - p.powf(gamma) / q);
        (value, grad)
    };
    (value, grad * dclamp)
}

/// Focal loss of probability `p` for a positive (`true`) or negative target.
pub fn focal_loss(p: f64, positive: bool, params: &FocalParams) -> LossResult {
    let (value, grad) = focal_parts(p, positive, params);
    LossResult { value, gradients: vec![grad] }
}

fn bce_parts(p: f64, positive: bool) -> (f64, f64) {
    let (p, dclamp) = clamp_prob(p);
    if positive {
        (-p.ln(), -dclamp / p)
    } else {
        (-(1.0 - p).ln(), dclamp / (1.0 - p))
    }
}

pub fn binary_cross_entropy(p: f64, positive: bool) -> LossResult {
    let (value, grad) = bce_parts(p, positive);
    LossResult { value, gradients: vec![grad] }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrnWeights {
    pub lambda_cls: f64,
    pub lambda_u: f64,
    pub focal: FocalParams,
}

impl Default for GrnWeights {
    fn default() -> Self {
        GrnWeights { lambda_cls: 0.2, lambda_u: 1.0, focal: FocalParams::default() }
    }
}

/// Sum of smooth-L1 over a residual block, accumulating `weight · ∂/∂pred` into `grad`.
fn residual_term(pred: &[f64], target: &ResidualBlock, weight: f64, grad: &mut [f64]) -> f64 {
    let mut value = 0.0;
    for (k, t) in target.to_array().iter().enumerate() {
        let (v, g) = smooth_l1_parts(pred[k] - t);
        value += weight * v;
        grad[k] += weight * g;
    }
    value
}

/// Loss of the proposal network over a batch of sampled points.
///
/// `pred` holds, per label, `M` anchor probabilities followed by the 8
/// residual predictions `(res_c, res_r, θ, s_q)` for the positive anchor.
/// Only the classification sum is divided by `k1`.
pub fn grn_loss(pred: &[f64], labels: &[AnchorLabel], weights: &GrnWeights, k1: usize) -> Result<LossResult> {
    if k1 == 0 {
        return Err(Error::InvalidInput("k1 must be positive".into()));
    }
    let Some(m) = labels.first().map(|l| l.classes.len()) else {
        return Err(Error::Empty("grn_loss labels"));
    };
    let stride = m + ResidualBlock::LEN;
    check_len(labels.len() * stride, pred.len())?;
    let mut grad = vec![0.0; pred.len()];
    let (mut cls, mut reg) = (0.0, 0.0);
    let cls_weight = weights.lambda_cls / k1 as f64;
    for (s, label) in labels.iter().enumerate() {
        check_len(m, label.classes.len())?;
        let base = s * stride;
        for (a, class) in label.classes.iter().enumerate() {
            if let Some(t) = class.target() {
                let (v, g) = focal_parts(pred[base + a], t > 0.5, &weights.focal);
                cls += v;
                grad[base + a] += cls_weight * g;
            }
        }
        if let Some(PositiveAnchor { residuals, .. }) = &label.positive {
            let r = base + m..base + stride;
            reg += residual_term(&pred[r.clone()], residuals, weights.lambda_u, &mut grad[r]);
        }
    }
    Ok(LossResult { value: cls_weight * cls + reg, gradients: grad })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RnWeights {
    pub lambda_cls: f64,
    pub lambda_u: f64,
}

impl Default for RnWeights {
    fn default() -> Self {
        RnWeights { lambda_cls: 0.2, lambda_u: 1.0 }
    }
}

/// Stride of one proposal in the [`rn_loss`] prediction layout.
pub const RN_STRIDE: usize = 1 + ResidualBlock::LEN;

/// Loss of the refinement network.
///
/// `pred` holds, per proposal, one probability then 8 residual predictions.
/// Classification is averaged over non-ignored proposals, regression over
/// positives.
pub fn rn_loss(pred: &[f64], labels: &[RefineLabel], weights: &RnWeights) -> Result<LossResult> {
    check_len(labels.len() * RN_STRIDE, pred.len())?;
    let n_cls = labels.iter().filter(|l| l.class != LabelClass::Ignore).count();
    if n_cls == 0 {
        return Err(Error::InvalidInput("rn_loss needs at least one labelled proposal".into()));
    }
    let n_reg = labels.iter().filter(|l| l.class == LabelClass::Positive).count();
    let cls_weight = weights.lambda_cls / n_cls as f64;
    let reg_weight = if n_reg > 0 { weights.lambda_u / n_reg as f64 } else { 0.0 };
    let mut grad = vec![0.0; pred.len()];
    let (mut cls, mut reg) = (0.0, 0.0);
    for (i, label) in labels.iter().enumerate() {
        let base = i * RN_STRIDE;
        if let Some(t) = label.class.target() {
            let (v, g) = bce_parts(pred[base], t > 0.5);
            cls += v;
            grad[base] += cls_weight * g;
        }
        if let Some(res) = &label.residuals {
            let r = base + 1..base + RN_STRIDE;
            reg += residual_term(&pred[r.clone()], res, 1.0, &mut grad[r.clone()]);
            grad[r].iter_mut().for_each(|g| *g *= reg_weight);
        }
    }
    Ok(LossResult { value: cls_weight * cls + reg_weight * reg, gradients: grad })
}

/// Largest relative gap between analytic and central-difference gradients.
pub fn gradient_check(f: impl Fn(&[f64]) -> LossResult, x: &[f64], h: f64) -> f64 {
    let analytic = f(x).gradients;
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe).value;
        probe[i] = x[i] - h;
        let down = f(&probe).value;
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs()).max(GRADIENT_FLOOR);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub name: &'static str,
    pub configs: usize,
    pub max_rel_error: f64,
}

/// Runs [`gradient_check`] on every loss at `configs` random inputs each.
///
/// Inputs keep probabilities inside `[0.02, 0.98]` and smooth-L1 arguments at
/// least `10·h` away from the knee.
pub fn gradient_suite(configs: usize, seed: u64, h: f64) -> Vec<GradientReport> {
    let mut rng = seeded_rng(seed);
    let mut reports = Vec::new();
    let mut run = |name: &'static str, rng: &mut rand_chacha::ChaCha8Rng, case: &dyn Fn(&mut rand_chacha::ChaCha8Rng) -> f64| {
        let max_rel_error = (0..configs).map(|_| case(rng)).fold(0.0, f64::max);
        reports.push(GradientReport { name, configs, max_rel_error });
    };
    run("mse", &mut rng, &|rng| {
        let n = rng.gen_range(1..12);
        let gt: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        gradient_check(|p| mse_loss(p, &gt).expect("aligned"), &x, h)
    });
    run("smooth_l1", &mut rng, &|rng| {
        let gt = rng.gen_range(-2.0..2.0);
        let x = gt + off_knee(rng, h);
        gradient_check(|p| smooth_l1(p[0], gt), &[x], h)
    });
    run("focal", &mut rng, &|rng| {
        let positive = rng.gen_bool(0.5);
        let x = rng.gen_range(0.02..0.98);
        gradient_check(|p| focal_loss(p[0], positive, &FocalParams::default()), &[x], h)
    });
    run("bce", &mut rng, &|rng| {
        let positive = rng.gen_bool(0.5);
        let x = rng.gen_range(0.02..0.98);
        gradient_check(|p| binary_cross_entropy(p[0], positive), &[x], h)
    });
    run("grn", &mut rng, &|rng| {
        let (labels, x) = random_grn_case(rng, 4, h);
        let k1 = rng.gen_range(1..8);
        gradient_check(|p| grn_loss(p, &labels, &GrnWeights::default(), k1).expect("aligned"), &x, h)
    });
    run("rn", &mut rng, &|rng| {
        let (labels, x) = random_rn_case(rng, h);
        gradient_check(|p| rn_loss(p, &labels, &RnWeights::default()).expect("aligned"), &x, h)
    });
    reports
}

/// Residual offset whose magnitude avoids the smooth-L1 knee by at least `10·h`.
fn off_knee(rng: &mut impl Rng, h: f64) -> f64 {
    loop {
        let x: f64 = rng.gen_range(-2.5..2.5);
        if (x.abs() - 1.0).abs() > 10.0 * h {
            return x;
        }
    }
}

fn random_block(rng: &mut impl Rng) -> ResidualBlock {
    let mut v = [0.0; 8];
    v.iter_mut().for_each(|e| *e = rng.gen_range(-1.0..1.0));
    ResidualBlock::from_slice(&v).expect("eight values")
}

fn predict_near(rng: &mut impl Rng, block: &ResidualBlock, h: f64) -> Vec<f64> {
    block.to_array().iter().map(|t| t + off_knee(rng, h)).collect()
}

fn random_class(rng: &mut impl Rng) -> LabelClass {
    [LabelClass::Positive, LabelClass::Negative, LabelClass::Ignore][rng.gen_range(0..3)]
}

fn random_grn_case(rng: &mut impl Rng, m: usize, h: f64) -> (Vec<AnchorLabel>, Vec<f64>) {
    let samples = rng.gen_range(1..5);
    let mut labels = Vec::with_capacity(samples);
    let mut x = Vec::with_capacity(samples * (m + ResidualBlock::LEN));
    for _ in 0..samples {
        let mut classes: Vec<LabelClass> = (0..m)
            .map(|_| if rng.gen_bool(0.5) { LabelClass::Negative } else { LabelClass::Ignore })
            .collect();
        let positive = rng.gen_bool(0.7).then(|| {
            let index = rng.gen_range(0..m);
            classes[index] = LabelClass::Positive;
            PositiveAnchor { index, residuals: random_block(rng) }
        });
        x.extend((0..m).map(|_| rng.gen_range(0.02..0.98)));
        match &positive {
            Some(p) => x.extend(predict_near(rng, &p.residuals, h)),
            None => x.extend((0..ResidualBlock::LEN).map(|_| rng.gen_range(-1.0..1.0))),
        }
        labels.push(AnchorLabel { classes, positive });
    }
    (labels, x)
}

fn random_rn_case(rng: &mut impl Rng, h: f64) -> (Vec<RefineLabel>, Vec<f64>) {
    let n = rng.gen_range(1..6);
    let mut labels = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n * RN_STRIDE);
    for i in 0..n {
        // The first proposal is never ignored so the batch is trainable.
        let class = match random_class(rng) {
            LabelClass::Ignore if i == 0 => LabelClass::Negative,
            c => c,
        };
        let residuals = (class == LabelClass::Positive).then(|| random_block(rng));
        x.push(rng.gen_range(0.02..0.98));
        match &residuals {
            Some(r) => x.extend(predict_near(rng, r, h)),
            None => x.extend((0..ResidualBlock::LEN).map(|_| rng.gen_range(-1.0..1.0))),
        }
        labels.push(RefineLabel { class, residuals });
    }
    (labels, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp::Vec3;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn center_block(c: Vec3) -> ResidualBlock {
        ResidualBlock { res_c: c, res_r: Vec3::zeros(), theta: 0.0, s_q: 0.0 }
    }

    #[test]
    fn mse_examples() {
        let r = mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((r.value, r.gradients), (0.0, vec![0.0, 0.0]));
        let r = mse_loss(&[0.0], &[1.0]).unwrap();
        assert_eq!((r.value, r.gradients), (1.0, vec![-2.0]));
        assert!(mse_loss(&[0.0], &[1.0, 2.0]).is_err());
        assert!(mse_loss(&[], &[]).is_err());
    }

    #[test]
    fn smooth_l1_examples() {
        assert_eq!(smooth_l1(0.5, 0.0).value, 0.125);
        assert_eq!(smooth_l1(2.0, 0.0).value, 1.5);
        assert_eq!(smooth_l1(0.0, 0.0), LossResult { value: 0.0, gradients: vec![0.0] });
        assert_eq!(smooth_l1(-3.0, 0.0).gradients, vec![-1.0]);
        // Both branches meet at the knee.
        assert_abs_diff_eq!(smooth_l1(1.0 - 1e-12, 0.0).value, smooth_l1(1.0, 0.0).value, epsilon = 1e-11);
    }

    #[test]
    fn focal_examples() {
        let f = FocalParams::default();
        // α · (1 − p)^γ · ln 2 at p = 1/2.
        let expected = 0.25 * 0.25 * LN_2;
        assert_abs_diff_eq!(focal_loss(0.5, true, &f).value, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(focal_loss(0.5, true, &f).value, 0.043_321_7, epsilon = 1e-7);
        assert_abs_diff_eq!(focal_loss(0.5, false, &f).value, 0.75 * 0.25 * LN_2, epsilon = 1e-15);
        assert!(focal_loss(1.0, true, &f).value < 1e-20);
        assert!(focal_loss(0.0, false, &f).value < 1e-20);
        assert!(focal_loss(1.5, false, &f).value.is_finite());
    }

    #[test]
    fn bce_examples() {
        assert_abs_diff_eq!(binary_cross_entropy(0.5, true).value, LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(binary_cross_entropy(0.5, false).value, LN_2, epsilon = 1e-15);
        assert!(binary_cross_entropy(1.0, true).value < 1e-6);
        assert!(binary_cross_entropy(0.0, false).value < 1e-6);
    }

    #[test]
    fn gradient_check_examples() {
        let gt = [0.3, -1.2, 0.8];
        assert!(gradient_check(|p| mse_loss(p, &gt).unwrap(), &[1.0, 0.5, -0.4], 1e-6) < 1e-6);
        let f = FocalParams::default();
        for y in [true, false] {
            assert!(gradient_check(|p| focal_loss(p[0], y, &f), &[0.3], 1e-6) < 1e-5);
        }
        // A deliberately wrong gradient is caught.
        let wrong = |p: &[f64]| LossResult { value: p[0] * p[0], gradients: vec![p[0]] };
        assert!(gradient_check(wrong, &[1.0], 1e-6) > 0.4);
    }

    fn positive_label(m: usize, index: usize, residuals: ResidualBlock) -> AnchorLabel {
        let mut classes = vec![LabelClass::Negative; m];
        classes[index] = LabelClass::Positive;
        AnchorLabel { classes, positive: Some(PositiveAnchor { index, residuals }) }
    }

    fn perfect_probs(label: &AnchorLabel) -> Vec<f64> {
        label.classes.iter().map(|c| if *c == LabelClass::Positive { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn grn_examples() {
        let res = center_block(Vec3::new(0.3, -0.1, 0.2));
        let label = positive_label(4, 2, res);
        let mut x = perfect_probs(&label);
        x.extend(res.to_array());
        let l = grn_loss(&x, std::slice::from_ref(&label), &GrnWeights::default(), 1).unwrap();
        assert!(l.value.abs() < 1e-6);

        x[4] += 0.5;
        let l = grn_loss(&x, std::slice::from_ref(&label), &GrnWeights::default(), 1).unwrap();
        assert_abs_diff_eq!(l.value, 0.125, epsilon = 1e-6);
        assert!(grn_loss(&x[1..], &[label], &GrnWeights::default(), 1).is_err());
    }

    #[test]
    fn grn_ignored_entries_have_no_gradient() {
        let label = AnchorLabel { classes: vec![LabelClass::Ignore; 4], positive: None };
        let x: Vec<f64> = (0..12).map(|i| 0.1 + 0.05 * i as f64).collect();
        let l = grn_loss(&x, &[label], &GrnWeights::default(), 3).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.gradients.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn grn_is_additive_over_batches() {
        let mut rng = seeded_rng(21);
        let (la, xa) = random_grn_case(&mut rng, 4, 1e-6);
        let (lb, xb) = random_grn_case(&mut rng, 4, 1e-6);
        let w = GrnWeights::default();
        let joint = grn_loss(&[xa.clone(), xb.clone()].concat(), &[la.clone(), lb.clone()].concat(), &w, 5).unwrap();
        let split = grn_loss(&xa, &la, &w, 5).unwrap().value + grn_loss(&xb, &lb, &w, 5).unwrap().value;
        assert_abs_diff_eq!(joint.value, split, epsilon = 1e-12);
    }

    #[test]
    fn rn_examples() {
        let neg = RefineLabel { class: LabelClass::Negative, residuals: None };
        let x = vec![0.0; RN_STRIDE];
        assert!(rn_loss(&x, &[neg], &RnWeights::default()).unwrap().value < 1e-6);

        let target = ResidualBlock { theta: 0.0, ..center_block(Vec3::zeros()) };
        let pos = RefineLabel { class: LabelClass::Positive, residuals: Some(target) };
        let mut x = vec![1.0];
        x.extend(target.to_array());
        x[7] += 2.0;
        let l = rn_loss(&x, &[pos], &RnWeights::default()).unwrap();
        assert_abs_diff_eq!(l.value, 1.5, epsilon = 1e-6);

        let ign = RefineLabel { class: LabelClass::Ignore, residuals: None };
        assert!(rn_loss(&[0.5; RN_STRIDE], &[ign], &RnWeights::default()).is_err());
    }

    #[test]
    fn suite_passes() {
        for r in gradient_suite(200, 1, 1e-6) {
            assert!(r.max_rel_error < 1e-5, "{}: {}", r.name, r.max_rel_error);
        }
    }

    proptest! {
        #[test]
        fn losses_are_non_negative(p in 0.0f64..1.0, y: bool, a in -5.0f64..5.0, b in -5.0f64..5.0) {
            prop_assert!(focal_loss(p, y, &FocalParams::default()).value >= 0.0);
            prop_assert!(binary_cross_entropy(p, y).value >= 0.0);
            prop_assert!(smooth_l1(a, b).value >= 0.0);
            prop_assert!(mse_loss(&[a], &[b]).unwrap().value >= 0.0);
        }

        #[test]
        fn grn_and_rn_gradients_match(seed in 0u64..10_000) {
            let mut rng = seeded_rng(seed);
            let (labels, x) = random_grn_case(&mut rng, 4, 1e-6);
            let e = gradient_check(|p| grn_loss(p, &labels, &GrnWeights::default(), 3).unwrap(), &x, 1e-6);
            prop_assert!(e < 1e-5);
            let (labels, x) = random_rn_case(&mut rng, 1e-6);
            let e = gradient_check(|p| rn_loss(p, &labels, &RnWeights::default()).unwrap(), &x, 1e-6);
            prop_assert!(e < 1e-5);
        }
    }
}
