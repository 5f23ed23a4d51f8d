use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use grasplab::anchors::{
    anchor_set, assign_anchor_labels_batch, assign_refine_labels, decode_proposal, AnchorThresholds,
    RefineThresholds, DEFAULT_CENTER_SCALE,
};
use grasplab::collision::{closing_region_points, CollisionChecker};
use grasplab::confidence::{point_confidence, select_positive_points, ConfidenceField, DEFAULT_DISTANCE_THRESHOLD};
use grasplab::contact::grasp_score;
use grasplab::dataio::{
    format_real, grasp_row, read_confidence, read_grasps, read_point_cloud, read_policy, read_xy,
    write_anchor_labels, write_confidence, write_grasps, write_point_cloud, write_refine_labels, AnchorLabelRow,
    RefineLabelRow,
};
use grasplab::losses::gradient_suite;
use grasplab::metrics::{evaluate_observed, EvalOptions, EvalReport, DEFAULT_COVERAGE_RADIUS, DEFAULT_POOL, DEFAULT_TOP};
use grasplab::policy::{analytic_select, fit_linear, fit_sigmoid, heuristic_select, pearson, AnalyticPolicy, FitOptions, SigmoidFit};
use grasplab::sampling::{attach_normals, ball_query, random_subsample, sample_candidates, SamplerConfig};
use grasplab::spatial::KdTree;
use grasplab::{Error, Grasp, PointCloud, ScoredGrasp, Vec3};

use crate::settings::{CliError, Settings};
use crate::{Cli, Command, FitMode, PolicyKind};

type CliResult<T = ()> = Result<T, CliError>;

const DEFAULT_NORMAL_K: usize = 16;
const DEFAULT_K1: usize = 768;
const DEFAULT_ANCHORS: usize = 4;
const DEFAULT_REGION_RADIUS: f64 = 0.02;
const DEFAULT_REGION_KEEP: usize = 256;
const DEFAULT_CLOSING_KEEP: usize = 64;
const DEFAULT_FD_STEP: f64 = 1e-6;
const DEFAULT_FD_CONFIGS: usize = 200;
const DEFAULT_FD_TOL: f64 = 1e-5;

/// Shared per-invocation state.
struct Ctx<'a> {
    settings: &'a Settings,
    seed: u64,
    subsample: Option<usize>,
}

pub fn dispatch(cli: &Cli, settings: &Settings) -> CliResult {
    let ctx = Ctx {
        settings,
        seed: settings.value(cli.seed, "seed", 0)?,
        subsample: settings.optional(cli.subsample, "subsample")?.filter(|n| *n > 0),
    };
    let start = Instant::now();
    let (name, result) = match &cli.command {
        Command::Normals { cloud, k, o } => ("normals", normals(&ctx, cloud, *k, o)),
        Command::Sample { cloud, gripper, centers, orientations, angles, angle_range, neighbors, o } => {
            let cfg = SamplerConfig {
                n_centers: settings.value(*centers, "sampler.centers", SamplerConfig::default().n_centers)?,
                n_orientation_perturbations: settings.value(
                    *orientations,
                    "sampler.orientations",
                    SamplerConfig::default().n_orientation_perturbations,
                )?,
                n_angle_perturbations: settings.value(*angles, "sampler.angles", SamplerConfig::default().n_angle_perturbations)?,
                angle_range: settings.real(*angle_range, "sampler.angle_range", SamplerConfig::default().angle_range)?,
                neighbors: settings.value(*neighbors, "sampler.neighbors", SamplerConfig::default().neighbors)?,
                rng_seed: ctx.seed,
            };
            cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
            ("sample", sample(&ctx, cloud, gripper.gripper.as_deref(), &cfg, o))
        }
        Command::Collide { cloud, grasps, gripper, o } => ("collide", collide(&ctx, cloud, grasps, gripper.gripper.as_deref(), o)),
        Command::Score { cloud, grasps, gripper, o } => ("score", score(&ctx, cloud, grasps, gripper.gripper.as_deref(), o)),
        Command::Confidence { cloud, grasps, dth, width, o } => ("confidence", confidence(&ctx, cloud, grasps, *dth, *width, o)),
        Command::Labels { grasps, cloud, confidence, k1, proposals, width, o } => (
            "labels",
            labels(&ctx, grasps, cloud, confidence.as_deref(), *k1, proposals.as_deref(), *width, o),
        ),
        Command::Regions { cloud, confidence, k1, radius, keep, proposals, gripper, o } => (
            "regions",
            regions(&ctx, cloud, confidence, *k1, *radius, *keep, proposals.as_deref(), gripper.gripper.as_deref(), o),
        ),
        Command::Losscheck { h, configs } => ("losscheck", losscheck(&ctx, *h, *configs)),
        Command::Select { grasps, policy, coeffs } => ("select", select(grasps, *policy, coeffs.as_deref())),
        Command::Fit { mode, xy, o } => ("fit", fit(&ctx, *mode, xy, o)),
        Command::Eval { grasps, scene, ground_truth, gripper, pool, top, observed, csv } => (
            "eval",
            eval(&ctx, grasps, scene, ground_truth, gripper.gripper.as_deref(), *pool, *top, observed.as_deref(), csv.as_deref()),
        ),
    };
    info!("{name} finished in {:.3} s", start.elapsed().as_secs_f64());
    result
}

/// Reads a cloud and applies `--subsample`.
fn load_input_cloud(ctx: &Ctx, path: &Path) -> CliResult<PointCloud> {
    let cloud = read_point_cloud(path)?;
    Ok(match ctx.subsample {
        Some(n) if n < cloud.len() => {
            info!("subsampling {} of {} points", n, cloud.len());
            random_subsample(&cloud, n, ctx.seed)
        }
        _ => cloud,
    })
}

fn with_normals(ctx: &Ctx, cloud: PointCloud) -> CliResult<PointCloud> {
    if cloud.has_normals() {
        return Ok(cloud);
    }
    let k = ctx.settings.value(None, "normals.k", DEFAULT_NORMAL_K)?;
    info!("input has no normals; estimating with k = {k}");
    estimate(cloud, k)
}

fn estimate(cloud: PointCloud, k: usize) -> CliResult<PointCloud> {
    let (out, invalid) = attach_normals(&cloud, k)?;
    if invalid > 0 {
        warn!("{invalid} points had degenerate neighbourhoods; their normals face the viewpoint");
    }
    Ok(out)
}

fn normals(ctx: &Ctx, cloud: &Path, k: Option<usize>, o: &Path) -> CliResult {
    let k = ctx.settings.value(k, "normals.k", DEFAULT_NORMAL_K)?;
    let out = estimate(load_input_cloud(ctx, cloud)?, k)?;
    write_point_cloud(o, &out)?;
    Ok(())
}

fn unscored(grasps: Vec<Grasp>) -> Vec<ScoredGrasp> {
    grasps.into_iter().map(|grasp| ScoredGrasp { grasp, s_q: 0.0 }).collect()
}

fn sample(ctx: &Ctx, cloud: &Path, gripper: Option<&str>, cfg: &SamplerConfig, o: &Path) -> CliResult {
    let s = ctx.settings.gripper(gripper)?;
    let cloud = with_normals(ctx, load_input_cloud(ctx, cloud)?)?;
    let candidates = sample_candidates(&cloud, &s, cfg)?;
    info!("{} candidates from {} points", candidates.len(), cloud.len());
    write_grasps(o, &unscored(candidates))?;
    Ok(())
}

fn collide(ctx: &Ctx, cloud: &Path, grasps: &Path, gripper: Option<&str>, o: &Path) -> CliResult {
    let s = ctx.settings.gripper(gripper)?;
    let scene = read_point_cloud(cloud)?;
    let input = read_grasps(grasps)?;
    let checker = CollisionChecker::new(&scene);
    let free: Vec<bool> = input.par_iter().map(|g| !checker.collides(&g.grasp, &s)).collect();
    let kept: Vec<ScoredGrasp> = input.iter().zip(free).filter(|(_, f)| *f).map(|(g, _)| *g).collect();
    info!("{} of {} grasps are collision-free", kept.len(), input.len());
    write_grasps(o, &kept)?;
    Ok(())
}

fn score(ctx: &Ctx, cloud: &Path, grasps: &Path, gripper: Option<&str>, o: &Path) -> CliResult {
    let s = ctx.settings.gripper(gripper)?;
    let cloud = with_normals(ctx, read_point_cloud(cloud)?)?;
    let input = read_grasps(grasps)?;
    let scored: Vec<ScoredGrasp> = input
        .par_iter()
        .map(|g| ScoredGrasp::new(g.grasp, grasp_score(&cloud, &g.grasp, &s)?))
        .collect::<Result<_, Error>>()?;
    write_grasps(o, &scored)?;
    Ok(())
}

fn confidence_width(ctx: &Ctx, width: Option<f64>) -> CliResult<f64> {
    ctx.settings
        .optional(width, "gripper.width")?
        .ok_or_else(|| CliError::usage("a gripper width is required: pass --width or set gripper.width"))
}

fn compute_confidence(ctx: &Ctx, cloud: &PointCloud, grasps: &[ScoredGrasp], dth: Option<f64>, width: Option<f64>) -> CliResult<ConfidenceField> {
    let d_th = ctx.settings.real(dth, "confidence.d_th", DEFAULT_DISTANCE_THRESHOLD)?;
    if d_th <= 0.0 {
        return Err(CliError::usage(format!("d_th must be positive, got {d_th}")));
    }
    let width = confidence_width(ctx, width)?;
    let centers: Vec<Grasp> = grasps.iter().map(|g| g.grasp).collect();
    Ok(point_confidence(cloud, &centers, d_th, width)?)
}

fn confidence(ctx: &Ctx, cloud: &Path, grasps: &Path, dth: Option<f64>, width: Option<f64>, o: &Path) -> CliResult {
    let cloud = load_input_cloud(ctx, cloud)?;
    let field = compute_confidence(ctx, &cloud, &read_grasps(grasps)?, dth, width)?;
    write_confidence(o, &field)?;
    Ok(())
}

fn read_field_for(path: &Path, cloud: &PointCloud) -> CliResult<ConfidenceField> {
    let field = read_confidence(path)?;
    if field.len() != cloud.len() {
        return Err(CliError::data(format!(
            "{}: field has {} values but the cloud has {} points",
            path.display(),
            field.len(),
            cloud.len()
        )));
    }
    Ok(field)
}

/// The `k1` most confident points, dropping those with zero confidence.
fn positive_points(ctx: &Ctx, field: &ConfidenceField, k1: Option<usize>) -> CliResult<Vec<usize>> {
    let k1 = ctx.settings.value(k1, "labels.k1", DEFAULT_K1)?;
    if k1 == 0 {
        return Err(CliError::usage("k1 must be at least 1"));
    }
    let mut picked = select_positive_points(field, k1.min(field.len()))?;
    picked.retain(|&i| field.values[i] > 0.0);
    if picked.len() < k1 {
        warn!("only {} points have positive confidence (k1 = {k1})", picked.len());
    }
    if picked.is_empty() {
        return Err(CliError::data("no point has positive grasp confidence"));
    }
    Ok(picked)
}

fn read_proposals(path: &Path, expected: usize) -> CliResult<Vec<ScoredGrasp>> {
    let proposals = read_grasps(path)?;
    if proposals.len() != expected {
        return Err(CliError::data(format!(
            "{}: expected one proposal per positive point ({expected}), found {}",
            path.display(),
            proposals.len()
        )));
    }
    Ok(proposals)
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))
}

#[allow(clippy::too_many_arguments)]
fn labels(
    ctx: &Ctx,
    grasps: &Path,
    cloud: &Path,
    confidence: Option<&Path>,
    k1: Option<usize>,
    proposals: Option<&Path>,
    width: Option<f64>,
    o: &Path,
) -> CliResult {
    let s = ctx.settings;
    let m = s.value(None, "anchors.m", DEFAULT_ANCHORS)?;
    let c_b = s.real(None, "anchors.c_b", DEFAULT_CENTER_SCALE)?;
    let defaults = AnchorThresholds::default();
    let thresholds = AnchorThresholds {
        positive: s.real(None, "anchors.positive", defaults.positive)?,
        negative: s.real(None, "anchors.negative", defaults.negative)?,
    };
    thresholds.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let rd = RefineThresholds::default();
    let refine = RefineThresholds {
        d1: s.real(None, "refine.d1", rd.d1)?,
        d2: s.real(None, "refine.d2", rd.d2)?,
        beta1: s.real(None, "refine.beta1", rd.beta1)?,
        beta2: s.real(None, "refine.beta2", rd.beta2)?,
        gamma1: s.real(None, "refine.gamma1", rd.gamma1)?,
        gamma2: s.real(None, "refine.gamma2", rd.gamma2)?,
        c_b,
    };
    refine.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let anchors = anchor_set(m).map_err(|e| CliError::usage(e.to_string()))?;

    let gt = read_grasps(grasps)?;
    if gt.is_empty() {
        return Err(CliError::data(format!("{}: no ground-truth grasps", grasps.display())));
    }
    let cloud = load_input_cloud(ctx, cloud)?;
    let field = match confidence {
        Some(p) => read_field_for(p, &cloud)?,
        None => compute_confidence(ctx, &cloud, &gt, None, width)?,
    };
    let positives = positive_points(ctx, &field, k1)?;

    // Each positive point learns from its nearest ground-truth grasp.
    let centers: Vec<Vec3> = gt.iter().map(|g| g.grasp.center).collect();
    let tree = KdTree::new(&centers);
    let assigned: Vec<usize> = positives.iter().map(|&p| tree.nearest(&cloud.points[p], 1)[0].0).collect();
    let pairs: Vec<(ScoredGrasp, Vec3)> = positives.iter().zip(&assigned).map(|(&p, &g)| (gt[g], cloud.points[p])).collect();
    let anchor_labels = assign_anchor_labels_batch(&pairs, &anchors, &thresholds, c_b)?;

    let proposals = match proposals {
        Some(path) => read_proposals(path, positives.len())?,
        // Without a network, propose the nearest anchor itself.
        None => pairs
            .iter()
            .map(|(g, p)| {
                let (a, _) = anchors.nearest(&g.grasp.orientation);
                let grasp = decode_proposal(&Vec3::zeros(), &Vec3::zeros(), 0.0, p, &anchors.directions()[a], c_b)?;
                Ok(ScoredGrasp { grasp, s_q: 0.0 })
            })
            .collect::<Result<_, Error>>()?,
    };
    let refine_labels = pairs
        .par_iter()
        .zip(&proposals)
        .map(|((g, _), prop)| assign_refine_labels(g, prop, &refine))
        .collect::<Result<Vec<_>, Error>>()?;

    create_dir(o)?;
    let rows: Vec<AnchorLabelRow> = positives
        .iter()
        .zip(&assigned)
        .zip(anchor_labels)
        .map(|((&point, &grasp), label)| AnchorLabelRow { point, grasp, label })
        .collect();
    write_anchor_labels(&o.join("anchors.csv"), &rows)?;
    let rows: Vec<RefineLabelRow> = positives
        .iter()
        .zip(&assigned)
        .zip(refine_labels)
        .map(|((&point, &grasp), label)| RefineLabelRow { point, grasp, label })
        .collect();
    write_refine_labels(&o.join("refine.csv"), &rows)?;
    info!("labelled {} positive points against {} grasps", positives.len(), gt.len());
    Ok(())
}

/// Independent, reproducible stream for item `i` of a run seeded with `seed`.
fn item_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)
}

fn index_row(out: &mut String, point: usize, padded: bool, indices: &[usize]) {
    let list: Vec<String> = indices.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "{point},{},{}", u8::from(padded), list.join(" "));
}

#[allow(clippy::too_many_arguments)]
fn regions(
    ctx: &Ctx,
    cloud: &Path,
    confidence: &Path,
    k1: Option<usize>,
    radius: Option<f64>,
    keep: Option<usize>,
    proposals: Option<&Path>,
    gripper: Option<&str>,
    o: &Path,
) -> CliResult {
    let radius = ctx.settings.real(radius, "region.radius", DEFAULT_REGION_RADIUS)?;
    let keep = ctx.settings.value(keep, "region.keep", DEFAULT_REGION_KEEP)?;
    let closing_keep = ctx.settings.value(None, "closing.keep", DEFAULT_CLOSING_KEEP)?;
    if radius <= 0.0 || keep == 0 || closing_keep == 0 {
        return Err(CliError::usage("region radius and point counts must be positive"));
    }
    let cloud = load_input_cloud(ctx, cloud)?;
    let field = read_field_for(confidence, &cloud)?;
    let positives = positive_points(ctx, &field, k1)?;
    let tree = KdTree::new(&cloud.points);
    let balls = positives
        .par_iter()
        .enumerate()
        .map(|(i, &p)| ball_query(&tree, &cloud.points[p], radius, keep, item_seed(ctx.seed, i)))
        .collect::<Result<Vec<_>, Error>>()?;
    create_dir(o)?;
    let mut out = String::from("point,padded,indices\n");
    for (&p, b) in positives.iter().zip(&balls) {
        index_row(&mut out, p, b.padded, &b.indices);
    }
    write_file(&o.join("regions.csv"), &out)?;

    if let Some(path) = proposals {
        let s = ctx.settings.gripper(gripper)?;
        let proposals = read_proposals(path, positives.len())?;
        let areas: Vec<Option<(bool, Vec<usize>)>> = proposals
            .par_iter()
            .enumerate()
            .map(|(i, g)| match closing_region_points(&cloud, &g.grasp, &s, closing_keep, item_seed(ctx.seed, i)) {
                Ok(r) => Ok(Some((r.padded, r.indices))),
                Err(Error::EmptyRegion(_)) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<_, Error>>()?;
        let mut out = String::from("point,padded,indices\n");
        let mut empty = 0;
        for (&p, area) in positives.iter().zip(&areas) {
            match area {
                Some((padded, idx)) => index_row(&mut out, p, *padded, idx),
                None => {
                    empty += 1;
                    index_row(&mut out, p, false, &[]);
                }
            }
        }
        if empty > 0 {
            warn!("{empty} proposals have empty closing areas");
        }
        write_file(&o.join("closing.csv"), &out)?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn losscheck(ctx: &Ctx, h: Option<f64>, configs: Option<usize>) -> CliResult {
    let h = ctx.settings.real(h, "losscheck.h", DEFAULT_FD_STEP)?;
    let configs = ctx.settings.value(configs, "losscheck.configs", DEFAULT_FD_CONFIGS)?;
    let tol = ctx.settings.real(None, "losscheck.tol", DEFAULT_FD_TOL)?;
    if h.is_nan() || h <= 0.0 || configs == 0 {
        return Err(CliError::usage("losscheck needs h > 0 and at least one configuration"));
    }
    let reports = gradient_suite(configs, ctx.seed, h);
    let mut failed = Vec::new();
    for r in &reports {
        let ok = r.max_rel_error < tol;
        println!("{} configs={} max_rel_error={:.3e} {}", r.name, r.configs, r.max_rel_error, if ok { "ok" } else { "FAIL" });
        if !ok {
            failed.push(r.name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::check(format!("gradient check above {tol:e} for: {}", failed.join(", "))))
    }
}

fn select(grasps: &Path, policy: PolicyKind, coeffs: Option<&Path>) -> CliResult {
    let list = read_grasps(grasps)?;
    let index = match policy {
        PolicyKind::Heuristic => heuristic_select(&list)?,
        PolicyKind::Analytic => {
            let base = AnalyticPolicy::default();
            let p = match coeffs {
                Some(path) => read_policy(path, &base)?,
                None => base,
            };
            analytic_select(&list, &p)?
        }
    };
    info!("selected grasp {index} of {}", list.len());
    println!("{}", grasp_row(&list[index]));
    Ok(())
}

fn fit(ctx: &Ctx, mode: FitMode, xy: &Path, o: &Path) -> CliResult {
    let (xs, ys) = read_xy(xy)?;
    match mode {
        FitMode::Linear => {
            let f = fit_linear(&xs, &ys)?;
            info!("pearson r = {}", format_real(pearson(&xs, &ys)?));
            write_file(o, &format!("slope = {}\nintercept = {}\n", format_real(f.slope), format_real(f.intercept)))
        }
        FitMode::Sigmoid => {
            let d = FitOptions::default();
            let opts = FitOptions {
                tol: ctx.settings.real(None, "fit.tol", d.tol)?,
                max_iter: ctx.settings.value(None, "fit.max_iter", d.max_iter)?,
            };
            let mean_x = xs.iter().sum::<f64>() / xs.len().max(1) as f64;
            let init = SigmoidFit {
                a: ctx.settings.real(None, "fit.a0", 1.0)?,
                b: ctx.settings.real(None, "fit.b0", mean_x)?,
            };
            let report = fit_sigmoid(&xs, &ys, init, &opts)?;
            info!("sigmoid fit: {} iterations, residual {}", report.iterations, format_real(report.residual));
            write_file(o, &format!("a = {}\nb = {}\n", format_real(report.fit.a), format_real(report.fit.b)))?;
            if report.converged {
                Ok(())
            } else {
                Err(CliError::check(format!("sigmoid fit did not converge in {} iterations", opts.max_iter)))
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn eval(
    ctx: &Ctx,
    grasps: &Path,
    scene: &Path,
    ground_truth: &Path,
    gripper: Option<&str>,
    pool: Option<usize>,
    top: Option<usize>,
    observed: Option<&Path>,
    csv: Option<&Path>,
) -> CliResult {
    let s = ctx.settings.gripper(gripper)?;
    let opts = EvalOptions {
        pool: ctx.settings.value(pool, "eval.pool", DEFAULT_POOL)?,
        top: ctx.settings.value(top, "eval.top", DEFAULT_TOP)?,
        coverage_radius: ctx.settings.real(None, "eval.radius", DEFAULT_COVERAGE_RADIUS)?,
    };
    if opts.top == 0 || opts.top > opts.pool || opts.coverage_radius <= 0.0 {
        return Err(CliError::usage("eval needs 0 < top <= pool and a positive coverage radius"));
    }
    let scored = read_grasps(grasps)?;
    let scene = with_normals(ctx, read_point_cloud(scene)?)?;
    let gt: Vec<Grasp> = read_grasps(ground_truth)?.into_iter().map(|g| g.grasp).collect();
    let observed = observed.map(read_point_cloud).transpose()?;
    let report = evaluate_observed(&scored, observed.as_ref().unwrap_or(&scene), &scene, &gt, &s, &opts)?;
    print!("{}", report.to_key_value());
    if let Some(path) = csv {
        write_file(path, &format!("{}\n{}\n", EvalReport::csv_header(), report.to_csv_row()))?;
    }
    Ok(())
}
