//! One function per subcommand. Each reads the config, does its work with
//! per-task random streams fanned out over rayon, and writes its CSVs in a
//! fixed order.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use smdl_core::analysis::{analyze as fit_points, bits_per_coordinate, volume_critical_bits, AnalysisPoint};
use smdl_core::compress::{
    critical_compression_fraction, critical_nq, critical_sigma, factorize, prune_and_retrain, quantize_with_mode,
    NoiseCurve, SigmaSearchConfig,
};
use smdl_core::fit::simple_fit;
use smdl_core::llc::{estimate_llc, MinibatchLoss};
use smdl_core::mdl::{build_eps_net, nats_to_bits, two_part_redundancy};
use smdl_core::volume::{dyadic_ladder, fit_scaling_with, volume_curve};
use smdl_core::zoo::{
    train_sgd, Bounds, Checkpoint, KlLandscape, Landscape, MlpModel, MlpSpec, NormalCrossing, NormalCrossingSpec,
    Quadratic, SingularBernoulli, TrainConfig,
};
use smdl_core::Error as CoreError;

use crate::audit;
use crate::checkpoint;
use crate::config::{AuditConfig, ExperimentConfig, LandscapeConfig, Scheme};
use crate::error::{Context, LabError, Result};
use crate::table::{float, opt_float, Manifest, ReadTable, Table};

pub const SWEEP_HEADER: &[&str] = &["step", "scheme", "control_parameter", "delta_loss", "critical_value", "epsilon", "seed"];
pub const LLC_HEADER: &[&str] = &["step", "lambda_hat", "nbeta", "gamma", "step_size", "chains", "seed"];

/// A subcommand invocation: the effective config and where outputs go.
pub struct Run<'a> {
    pub cfg: &'a ExperimentConfig,
    pub command: &'static str,
}

impl Run<'_> {
    pub fn out(&self) -> &Path {
        &self.cfg.output_dir
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            command: self.command.into(),
            seed: self.cfg.seed,
            config_sha256: self.cfg.sha256(),
        }
    }

    fn write(&self, name: &str, table: &Table) -> Result<PathBuf> {
        let path = self.out().join(name);
        table.write(&path, &self.manifest())?;
        Ok(path)
    }

    fn checkpoint_dir(&self) -> PathBuf {
        self.out().join("checkpoints")
    }
}

pub fn build_model(cfg: &ExperimentConfig) -> Result<MlpModel> {
    let m = ExperimentConfig::require(&cfg.model, "model")?;
    let data = m.teacher().generate().context(|| "generating the teacher dataset".into())?;
    let spec = MlpSpec::new(m.layers.clone(), m.loss).context(|| "model".into())?;
    MlpModel::new(spec, data).context(|| "model".into())
}

/// Checkpoints from the output directory, checked against the model.
fn load_checkpoints(run: &Run, model: &MlpModel) -> Result<Vec<Checkpoint>> {
    let dir = run.checkpoint_dir();
    let cps = checkpoint::read_all(&dir)?;
    let hash = model.spec().spec_hash();
    for c in &cps {
        if c.spec_hash != hash || c.params.len() != model.param_count() {
            return Err(LabError::format(
                dir.join(checkpoint::file_name(c.step)),
                "checkpoint does not match the configured model",
            ));
        }
    }
    Ok(cps)
}

pub fn train_toy(run: &Run) -> Result<()> {
    let cfg = run.cfg;
    let model = build_model(cfg)?;
    let t = ExperimentConfig::require(&cfg.training, "training")?;
    let train = TrainConfig {
        steps: t.steps,
        learning_rate: t.learning_rate,
        batch_size: t.batch_size,
        seed: cfg.seed,
        init_scale: t.init_scale,
        checkpoints: t.checkpoints.clone(),
    };
    let cps = train_sgd(&model, &train).context(|| "train-toy".into())?;
    let mut table = Table::new(&["step", "train_loss", "seed"]);
    for c in &cps {
        checkpoint::write(&run.checkpoint_dir(), c)?;
        table.push(vec![c.step.to_string(), float(c.train_loss), cfg.seed.to_string()]);
    }
    run.write("train.csv", &table)?;
    Ok(())
}

pub fn estimate_llc_cmd(run: &Run) -> Result<()> {
    let cfg = run.cfg;
    let llc = ExperimentConfig::require(&cfg.llc, "llc")?;
    let model = build_model(cfg)?;
    let cps = load_checkpoints(run, &model)?;
    let oracle = MinibatchLoss::new(&model);
    let estimates = cps
        .par_iter()
        .map(|c| estimate_llc(&oracle, &c.params, llc, cfg.seed).context(|| format!("estimate-llc, step {}", c.step)))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(LLC_HEADER);
    for (c, e) in cps.iter().zip(&estimates) {
        table.push(vec![
            c.step.to_string(),
            float(e.lambda_hat),
            float(llc.beta_n),
            float(llc.gamma),
            float(llc.step_size),
            llc.chains.to_string(),
            cfg.seed.to_string(),
        ]);
    }
    run.write("llc.csv", &table)?;
    Ok(())
}

/// Maps an unreachable tolerance to "no critical value"; other errors pass.
fn optional<T>(r: smdl_core::Result<T>) -> smdl_core::Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(CoreError::UnreachableTolerance(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Per checkpoint: ΔLoss at each grid point and the critical value per ε.
struct SweepResult {
    step: u64,
    grid: Vec<(f64, f64)>,
    critical: Vec<Option<f64>>,
}

fn sweep_table(run: &Run, scheme: Scheme, results: &[SweepResult]) -> Table {
    let mut table = Table::new(SWEEP_HEADER);
    for r in results {
        for (e, crit) in run.cfg.epsilons.iter().zip(&r.critical) {
            for &(control, delta) in &r.grid {
                table.push(vec![
                    r.step.to_string(),
                    scheme.name().into(),
                    float(control),
                    float(delta),
                    opt_float(*crit),
                    float(*e),
                    run.cfg.seed.to_string(),
                ]);
            }
        }
    }
    table
}

fn require_grid<T>(grid: &[T], key: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(LabError::Config(format!("`{key}` must not be empty")));
    }
    Ok(())
}

pub fn quantize_sweep(run: &Run) -> Result<()> {
    let cfg = run.cfg;
    let q = ExperimentConfig::require(&cfg.quantize, "quantize")?;
    require_grid(&q.grid, "quantize.grid")?;
    let model = build_model(cfg)?;
    let cps = load_checkpoints(run, &model)?;
    let loss = |p: &[f64]| model.full_loss(p);
    let results = cps
        .par_iter()
        .map(|c| {
            let ctx = || format!("quantize-sweep, step {}", c.step);
            let baseline = loss(&c.params);
            let grid = q
                .grid
                .iter()
                .map(|&n| {
                    quantize_with_mode(&c.params, n, q.search.mode, &loss, baseline, &q.search.m_search)
                        .map(|o| (n as f64, o.delta_loss))
                })
                .collect::<smdl_core::Result<Vec<_>>>()
                .context(ctx)?;
            let critical = cfg
                .epsilons
                .iter()
                .map(|&e| optional(critical_nq(&c.params, e, &loss, &q.search)).map(|o| o.map(|r| r.n_q as f64)))
                .collect::<smdl_core::Result<Vec<_>>>()
                .context(ctx)?;
            Ok(SweepResult {
                step: c.step,
                grid,
                critical,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    run.write(&Scheme::Quantize.sweep_file(), &sweep_table(run, Scheme::Quantize, &results))?;
    Ok(())
}

pub fn factorize_sweep(run: &Run) -> Result<()> {
    let cfg = run.cfg;
    let f = ExperimentConfig::require(&cfg.factorize, "factorize")?;
    require_grid(&f.grid, "factorize.grid")?;
    let model = build_model(cfg)?;
    let cps = load_checkpoints(run, &model)?;
    let loss = |p: &[f64]| model.full_loss(p);
    let results = cps
        .par_iter()
        .map(|c| {
            let ctx = || format!("factorize-sweep, step {}", c.step);
            let baseline = loss(&c.params);
            let grid = f
                .grid
                .iter()
                .map(|&keep| factorize(&model, &c.params, keep, &f.selection).map(|m| (keep, loss(&m.params) - baseline)))
                .collect::<smdl_core::Result<Vec<_>>>()
                .context(ctx)?;
            let critical = cfg
                .epsilons
                .iter()
                .map(|&e| {
                    optional(critical_compression_fraction(&model, &c.params, e, &f.selection, &loss))
                        .map(|o| o.map(|r| r.compression_fraction))
                })
                .collect::<smdl_core::Result<Vec<_>>>()
                .context(ctx)?;
            Ok(SweepResult {
                step: c.step,
                grid,
                critical,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    run.write(&Scheme::Factorize.sweep_file(), &sweep_table(run, Scheme::Factorize, &results))?;
    Ok(())
}

pub fn noise_sweep(run: &Run) -> Result<()> {
    let cfg = run.cfg;
    let n = ExperimentConfig::require(&cfg.noise, "noise")?;
    require_grid(&n.grid, "noise.grid")?;
    let model = build_model(cfg)?;
    let cps = load_checkpoints(run, &model)?;
    let loss = |p: &[f64]| model.full_loss(p);
    // The run seed shifts the configured noise seed so `--seed` reaches it.
    let search = SigmaSearchConfig {
        seed: n.search.seed.wrapping_add(cfg.seed),
        ..n.search
    };
    let results = cps
        .par_iter()
        .map(|c| {
            let ctx = || format!("noise-sweep, step {}", c.step);
            let curve = NoiseCurve::new(&c.params, n.mode, &loss, search.draws, search.seed).context(ctx)?;
            let grid = n.grid.iter().map(|&s| (s, curve.delta(s))).collect();
            let critical = cfg
                .epsilons
                .iter()
                .map(|&e| optional(critical_sigma(&c.params, e, n.mode, &loss, &search)).map(|o| o.map(|r| r.sigma)))
                .collect::<smdl_core::Result<Vec<_>>>()
                .context(ctx)?;
            Ok(SweepResult {
                step: c.step,
                grid,
                critical,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    run.write(&Scheme::Noise.sweep_file(), &sweep_table(run, Scheme::Noise, &results))?;
    Ok(())
}

pub fn prune_sweep(run: &Run) -> Result<()> {
    let cfg = run.cfg;
    let p = ExperimentConfig::require(&cfg.prune, "prune")?;
    require_grid(&p.grid, "prune.grid")?;
    let model = build_model(cfg)?;
    let cps = load_checkpoints(run, &model)?;
    let mut keeps = p.grid.clone();
    keeps.sort_by(f64::total_cmp);
    let tasks: Vec<(usize, f64)> = (0..cps.len()).flat_map(|i| keeps.iter().map(move |&k| (i, k))).collect();
    let deltas = tasks
        .par_iter()
        .map(|&(i, keep)| {
            prune_and_retrain(&model, &cps[i].params, keep, &p.retrain, cfg.seed)
                .map(|o| o.delta_loss)
                .context(|| format!("prune-sweep, step {}, keep {keep}", cps[i].step))
        })
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<SweepResult> = cps
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let grid: Vec<(f64, f64)> = keeps.iter().copied().zip(deltas[i * keeps.len()..(i + 1) * keeps.len()].iter().copied()).collect();
            let critical = cfg
                .epsilons
                .iter()
                .map(|&e| grid.iter().find(|(_, d)| *d <= e).map(|(k, _)| *k))
                .collect();
            SweepResult {
                step: c.step,
                grid,
                critical,
            }
        })
        .collect();
    run.write(&Scheme::Prune.sweep_file(), &sweep_table(run, Scheme::Prune, &results))?;
    Ok(())
}

/// Builds the configured landscape and hands it to `f`.
pub fn with_landscape<R>(lc: &LandscapeConfig, f: impl FnOnce(&dyn Landscape) -> Result<R>) -> Result<R> {
    let ctx = || format!("landscape `{}`", lc.name());
    match lc {
        LandscapeConfig::Quadratic { lo, hi, .. } => {
            let b = Bounds::new(lo.clone(), hi.clone()).context(ctx)?;
            f(&Quadratic::new(b))
        }
        LandscapeConfig::NormalCrossing {
            exponents, active, lo, hi, ..
        } => {
            let b = Bounds::new(lo.clone(), hi.clone()).context(ctx)?;
            let spec = NormalCrossingSpec {
                active: active.clone().unwrap_or_else(|| vec![true; exponents.len()]),
                exponents: exponents.clone(),
            };
            f(&NormalCrossing::new(spec, b).context(ctx)?)
        }
        LandscapeConfig::BernoulliKl { lo, hi, m_simplex, .. } => {
            let b = Bounds::new(lo.clone(), hi.clone()).context(ctx)?;
            let model = SingularBernoulli::new(b, *m_simplex).context(ctx)?;
            f(&KlLandscape::new(&model))
        }
    }
}

pub fn volume_fit(run: &Run) -> Result<()> {
    let cfg = run.cfg;
    let v = ExperimentConfig::require(&cfg.volume, "volume")?;
    let ladder = dyadic_ladder(v.ladder[0], v.ladder[1]);
    let results = v
        .landscapes
        .par_iter()
        .map(|lc| {
            with_landscape(lc, |l| {
                let ctx = || format!("volume-fit, landscape `{}`", lc.name());
                let curve = volume_curve(l, &ladder, v.samples, cfg.seed).context(ctx)?;
                let fit = fit_scaling_with(&curve, v.multiplicity, &v.window).context(ctx)?;
                let bits = volume_critical_bits(&curve, l.dim()).context(ctx)?;
                Ok((curve, fit, bits, l.ground_truth(), l.dim()))
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut vol = Table::new(&["landscape", "epsilon", "volume", "standard_error", "mc_samples", "total_volume"]);
    let mut fits = Table::new(&[
        "landscape",
        "lambda",
        "multiplicity",
        "log_c",
        "r_squared",
        "epsilon_min",
        "epsilon_max",
        "points_used",
        "true_lambda",
        "true_multiplicity",
    ]);
    let mut bits = Table::new(&["landscape", "epsilon", "critical_bits", "predicted_bits"]);
    for (lc, (curve, fit, b, truth, d)) in v.landscapes.iter().zip(&results) {
        let name = lc.name().to_string();
        for i in 0..curve.len() {
            vol.push(vec![
                name.clone(),
                float(curve.epsilons[i]),
                float(curve.volumes[i]),
                float(curve.standard_errors[i]),
                curve.mc_samples.to_string(),
                float(curve.total_volume),
            ]);
        }
        fits.push(vec![
            name.clone(),
            float(fit.lambda),
            fit.multiplicity.to_string(),
            float(fit.log_c),
            float(fit.r_squared),
            float(fit.epsilon_window.0),
            float(fit.epsilon_window.1),
            fit.points_used.to_string(),
            opt_float(truth.map(|t| t.lambda.to_f64())),
            truth.map(|t| t.multiplicity.to_string()).unwrap_or_default(),
        ]);
        let (lambda, m) = truth.map(|t| (t.lambda.to_f64(), t.multiplicity)).unwrap_or((fit.lambda, fit.multiplicity));
        for (e, measured) in curve.epsilons.iter().zip(b) {
            let predicted = if *e < 1.0 { bits_per_coordinate(lambda, *d, *e, m).ok() } else { None };
            bits.push(vec![name.clone(), float(*e), float(*measured), opt_float(predicted)]);
        }
    }
    run.write("volume.csv", &vol)?;
    run.write("volume_fit.csv", &fits)?;
    run.write("bits.csv", &bits)?;
    Ok(())
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub fn mdl_redundancy(run: &Run) -> Result<()> {
    let cfg = run.cfg;
    let m = ExperimentConfig::require(&cfg.mdl, "mdl")?;
    if m.a.is_empty() || m.n.is_empty() || m.trials == 0 {
        return Err(LabError::Config("`mdl.a`, `mdl.n` and `mdl.trials` must be non-empty".into()));
    }
    let model = audit::bernoulli_model(&m.model)?;
    let tasks: Vec<(f64, u64)> = m.a.iter().flat_map(|&a| m.n.iter().map(move |&n| (a, n))).collect();
    let results = tasks
        .par_iter()
        .map(|&(a, n)| {
            let ctx = || format!("mdl-redundancy, a = {a}, n = {n}");
            let net = build_eps_net(&model, a / n as f64, &m.net, cfg.seed).context(ctx)?;
            let runs = (0..m.trials)
                .map(|t| two_part_redundancy(&model, &net, n, a, cfg.seed.wrapping_add(t)))
                .collect::<smdl_core::Result<Vec<_>>>()
                .context(ctx)?;
            Ok((net, runs))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Table::new(&["n", "a", "seed", "code_length", "excess_bits", "redundancy"]);
    let mut summary = Table::new(&["a", "n", "median_redundancy", "centers", "kraft_mass", "audit_max_gap"]);
    let mut medians: Vec<(f64, u64, f64)> = Vec::new();
    for (&(a, n), (net, runs)) in tasks.iter().zip(&results) {
        for r in runs {
            rows.push(vec![
                n.to_string(),
                float(a),
                r.seed.to_string(),
                float(nats_to_bits(r.code_length)),
                float(nats_to_bits(r.excess_data)),
                float(nats_to_bits(r.redundancy)),
            ]);
        }
        let mut red: Vec<f64> = runs.iter().map(|r| nats_to_bits(r.redundancy)).collect();
        let med = median(&mut red);
        medians.push((a, n, med));
        summary.push(vec![
            float(a),
            n.to_string(),
            float(med),
            net.len().to_string(),
            float(net.kraft_mass()),
            float(net.audit_max_gap),
        ]);
        let mut dump = Table::new(&["center", "p1", "vr_volume", "code_length"]);
        for j in 0..net.len() {
            dump.push(vec![
                j.to_string(),
                float(net.centers[j][1]),
                float(net.vr_volumes[j]),
                float(nats_to_bits(net.code_lengths[j])),
            ]);
        }
        run.write(&format!("nets/net_a{a}_n{n}.csv"), &dump)?;
    }
    let mut fits = Table::new(&["a", "slope", "intercept", "r_squared"]);
    for &a in &m.a {
        let pts: Vec<(f64, f64)> = medians
            .iter()
            .filter(|(x, _, _)| *x == a)
            .map(|&(_, n, med)| ((n as f64).log2(), med))
            .collect();
        if pts.len() >= 2 {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let f = simple_fit(&x, &y).context(|| format!("mdl-redundancy slope, a = {a}"))?;
            fits.push(vec![float(a), float(f.slope()), float(f.intercept()), float(f.r_squared)]);
        }
    }
    run.write("redundancy.csv", &rows)?;
    run.write("redundancy_summary.csv", &summary)?;
    run.write("redundancy_fit.csv", &fits)?;
    Ok(())
}

pub fn lemma_audit(run: &Run) -> Result<()> {
    let cfg = run.cfg;
    let a = cfg.audit.clone().unwrap_or_else(AuditConfig::default);
    if a.instances == 0 || a.outcomes < 2 || !(a.m_simplex > 0.0 && a.m_simplex * a.outcomes as f64 <= 1.0) {
        return Err(LabError::Config("`audit` needs instances >= 1, outcomes >= 2 and 0 < m_simplex <= 1/outcomes".into()));
    }
    let jobs: [fn(&AuditConfig, u64) -> Result<audit::AuditRow>; 5] = [
        audit::audit_kl_l2,
        audit::audit_triangle,
        audit::audit_variance,
        audit::audit_fluctuation,
        audit::audit_inclusion,
    ];
    let rows = jobs.par_iter().map(|job| job(&a, cfg.seed)).collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&["validator", "instances", "violations", "worst_margin"]);
    for r in &rows {
        table.push(vec![r.validator.into(), r.instances.to_string(), r.violations.to_string(), float(r.worst_margin)]);
    }
    run.write("audit.csv", &table)?;
    let violations: usize = rows.iter().map(|r| r.violations).sum();
    if violations > 0 {
        return Err(LabError::Violations(violations));
    }
    Ok(())
}

/// λ̂ per step from an LLC table.
pub fn read_llc(path: &Path) -> Result<Vec<(u64, f64)>> {
    let t = ReadTable::read(path)?;
    t.rows
        .iter()
        .map(|r| Ok((t.uint(r, "step")?, t.float(r, "lambda_hat")?)))
        .collect()
}

/// Critical value per step at tolerance `epsilon` from a sweep table.
pub fn read_critical(path: &Path, epsilon: f64) -> Result<Vec<(u64, Option<f64>)>> {
    let t = ReadTable::read(path)?;
    let mut out: Vec<(u64, Option<f64>)> = Vec::new();
    for r in &t.rows {
        if t.float(r, "epsilon")? != epsilon {
            continue;
        }
        let step = t.uint(r, "step")?;
        let crit = t.opt_float(r, "critical_value")?;
        match out.iter().find(|(s, _)| *s == step) {
            Some((_, c)) if c.map(f64::to_bits) != crit.map(f64::to_bits) => {
                return Err(LabError::format(path, format!("step {step} has conflicting critical values")));
            }
            Some(_) => {}
            None => out.push((step, crit)),
        }
    }
    Ok(out)
}

pub fn analyze(run: &Run) -> Result<()> {
    let cfg = run.cfg;
    let an = ExperimentConfig::require(&cfg.analysis, "analysis")?;
    let scheme = an.scheme;
    let llc = read_llc(&run.out().join("llc.csv"))?;
    let sweep_path = run.out().join(scheme.sweep_file());
    let mut rows = Table::new(&["epsilon", "step", "lambda_hat", "critical_value", "included", "fitted", "residual"]);
    let mut fits = Table::new(&["scheme", "epsilon", "slope", "intercept", "r_squared", "included_points"]);
    for &eps in &cfg.epsilons {
        let crit = read_critical(&sweep_path, eps)?;
        if crit.is_empty() {
            return Err(LabError::format(&sweep_path, format!("no rows at epsilon {eps}")));
        }
        let mut points = Vec::new();
        for &(step, lambda) in &llc {
            let c = crit
                .iter()
                .find(|(s, _)| *s == step)
                .ok_or_else(|| LabError::format(&sweep_path, format!("no rows for step {step}")))?;
            let value = match c.1 {
                Some(v) => v,
                None if an.exclude_steps.contains(&step) => f64::NAN,
                None => {
                    return Err(LabError::Core {
                        context: format!("analyze, step {step}, epsilon {eps}"),
                        source: CoreError::UnreachableTolerance(
                            "no critical value; add the step to `analysis.exclude_steps`".into(),
                        ),
                    })
                }
            };
            points.push(AnalysisPoint {
                step,
                lambda_hat: lambda,
                critical_value: value,
            });
        }
        if let Some((s, _)) = crit.iter().find(|(s, _)| !llc.iter().any(|(l, _)| l == s)) {
            return Err(LabError::format(run.out().join("llc.csv"), format!("no LLC estimate for step {s}")));
        }
        let result = fit_points(&points, &an.exclude_steps).context(|| format!("analyze, epsilon {eps}"))?;
        let mut residuals = result.fit.residuals.iter();
        for (p, &inc) in result.points.iter().zip(&result.included) {
            let fitted = result.intercept() + result.slope() * p.lambda_hat;
            let residual = if inc { residuals.next().copied() } else { None };
            rows.push(vec![
                float(eps),
                p.step.to_string(),
                float(p.lambda_hat),
                if p.critical_value.is_nan() { String::new() } else { float(p.critical_value) },
                inc.to_string(),
                float(fitted),
                opt_float(residual),
            ]);
        }
        fits.push(vec![
            scheme.name().into(),
            float(eps),
            float(result.slope()),
            float(result.intercept()),
            float(result.r_squared()),
            result.included.iter().filter(|&&i| i).count().to_string(),
        ]);
    }
    run.write(&format!("analysis_{}.csv", scheme.name()), &rows)?;
    run.write(&format!("fit_{}.csv", scheme.name()), &fits)?;
    if an.gnuplot {
        let path = run.out().join(format!("analysis_{}.gp", scheme.name()));
        std::fs::write(&path, gnuplot_script(scheme)).map_err(|e| LabError::io(&path, e))?;
    }
    Ok(())
}

fn gnuplot_script(scheme: Scheme) -> String {
    let name = scheme.name();
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 'LLC estimate'\n\
         set ylabel 'critical value ({name})'\n\
         set terminal pngcairo size 800,600\n\
         set output 'analysis_{name}.png'\n\
         plot 'analysis_{name}.csv' every ::2 using 3:4 with points pt 7 title 'checkpoints', \\\n     \
         '' every ::2 using 3:6 with lines title 'fit'\n"
    )
}
