//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Pass criterion numbers as arguments to
//! run a subset: `cargo test -p smdl-lab --test acceptance -- 4 9`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rayon::prelude::*;
use smdl_core::analysis::{analyze, bits_slope, volume_critical_bits, AnalysisPoint};
use smdl_core::compress::{
    critical_compression_fraction, critical_nq, critical_sigma, factorize, quantize, quantize_with_mode,
    CriticalNqConfig, LayerSelection, MSearchConfig, NoiseCurve, NoiseMode, QuantMode, QuantizationSpec,
    SigmaSearchConfig,
};
use smdl_core::fit::simple_fit;
use smdl_core::llc::{estimate_llc, LlcConfig, MinibatchLoss, Preconditioner};
use smdl_core::mdl::{build_eps_net, two_part_redundancy, NetConfig};
use smdl_core::rng::{rng_stream, stream_id, tag};
use smdl_core::volume::{dyadic_ladder, fit_scaling, volume_curve, MultiplicityMode};
use smdl_core::zoo::{
    train_sgd, Bounds, KlLandscape, Landscape, LossKind, MlpModel, MlpSpec, NormalCrossing, NormalCrossingSpec,
    Quadratic, SingularBernoulli, TeacherTask, TrainConfig,
};
use smdl_lab::audit;
use smdl_lab::commands::build_model;
use smdl_lab::config::{AuditConfig, ExperimentConfig};

// Tolerances.
const VOLUME_LAMBDA_REL: f64 = 0.10;
const VOLUME_SAMPLES: usize = 1_000_000;
const LLC_REL: f64 = 0.10;
const ORDERING_SEEDS: u64 = 5;
const REDUNDANCY_SLOPE_ABS: f64 = 0.15;
const REDUNDANCY_SEEDS: u64 = 50;
const REDUNDANCY_A: f64 = 0.1;
const LEMMA_INSTANCES: usize = 10_000;
const M_SIMPLEX: f64 = 0.2;
const INCLUSION_CONFIGS: usize = 20;
const QUANT_VECTORS: usize = 1000;
const TOY_MONOTONE_FRACTION: f64 = 0.8;
const TOY_R2: f64 = 0.8;
const TOY_MIN_CHECKPOINTS: usize = 8;
const BITS_SLOPE_REL: f64 = 0.25;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn info(line: &str) {
    println!("    {line}");
}

fn square(h: f64) -> Bounds {
    Bounds::symmetric(2, h).unwrap()
}

fn minimally_singular() -> NormalCrossing {
    let spec = NormalCrossingSpec {
        exponents: vec![1, 1],
        active: vec![true, false],
    };
    NormalCrossing::new(spec, square(1.0)).unwrap()
}

fn k12(bounds: Bounds) -> NormalCrossing {
    NormalCrossing::new(NormalCrossingSpec::all_active(vec![1, 2]), bounds).unwrap()
}

/// The stretched box on which the `(1, 2)` crossing reaches its asymptotic
/// regime within the ladder.
fn k12_box() -> Bounds {
    Bounds::new(vec![-1.0, -8.0], vec![1.0, 8.0]).unwrap()
}

fn criterion_1() -> Outcome {
    let ladder = dyadic_ladder(2, 10);
    let cases: Vec<(&str, Box<dyn Landscape>, f64)> = vec![
        ("quadratic", Box::new(Quadratic::new(square(1.0))), 1.0),
        ("minimally singular", Box::new(minimally_singular()), 0.5),
        ("k=(1,2)", Box::new(k12(k12_box())), 0.25),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, l, truth) in &cases {
        let curve = volume_curve(l.as_ref(), &ladder, VOLUME_SAMPLES, 1).unwrap();
        let fit = fit_scaling(&curve, MultiplicityMode::SelectByFit).unwrap();
        let ok = (fit.lambda / truth - 1.0).abs() <= VOLUME_LAMBDA_REL;
        pass &= ok;
        parts.push(format!("{name} {:.4} (m={}, true {truth})", fit.lambda, fit.multiplicity));
    }
    outcome(pass, parts.join(", "))
}

fn gaussian_config() -> LlcConfig {
    LlcConfig {
        beta_n: 30.0,
        gamma: 1.0,
        step_size: 2.5e-3,
        chains: 4,
        steps_per_chain: 2000,
        burn_in: 200,
        batch_size: 1,
        baseline_batches: 1,
        preconditioner: Preconditioner::None,
    }
}

fn criterion_2() -> Outcome {
    let cfg = gaussian_config();
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [1usize, 2, 4, 8] {
        let q = Quadratic::new(Bounds::symmetric(d, 1.0).unwrap());
        let est = estimate_llc(&q, &vec![0.0; d], &cfg, 0).unwrap();
        let nb = cfg.beta_n;
        let truth = d as f64 / 2.0 * nb / (nb + cfg.gamma / 2.0);
        let rel = est.lambda_hat / truth - 1.0;
        pass &= rel.abs() <= LLC_REL;
        parts.push(format!("d={d} {:.4} vs {truth:.4} ({:+.1}%)", est.lambda_hat, 100.0 * rel));
    }
    outcome(pass, parts.join(", "))
}

fn criterion_3() -> Outcome {
    let cfg = gaussian_config();
    let quad = Quadratic::new(square(1.0));
    let min = minimally_singular();
    let k = k12(square(1.0));
    let mut ordered = 0;
    let mut parts = Vec::new();
    for seed in 0..ORDERING_SEEDS {
        let a = estimate_llc(&quad, &[0.0, 0.0], &cfg, seed).unwrap().lambda_hat;
        let b = estimate_llc(&min, &[0.0, 0.0], &cfg, seed).unwrap().lambda_hat;
        let c = estimate_llc(&k, &[0.0, 0.0], &cfg, seed).unwrap().lambda_hat;
        if a > b && b > c {
            ordered += 1;
        }
        parts.push(format!("[{a:.3} > {b:.3} > {c:.3}]"));
    }
    outcome(
        ordered == ORDERING_SEEDS,
        format!("{ordered}/{ORDERING_SEEDS} seeds ordered {}", parts.join(" ")),
    )
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Slope of the median redundancy (nats) on `ln n`.
fn redundancy_slope(model: &SingularBernoulli, a: f64) -> (f64, f64, Vec<f64>) {
    let ns: Vec<u64> = (6..=14).map(|k| 1u64 << k).collect();
    let medians: Vec<f64> = ns
        .par_iter()
        .map(|&n| {
            let net = build_eps_net(model, a / n as f64, &NetConfig::default(), 0).unwrap();
            let r: Vec<f64> = (0..REDUNDANCY_SEEDS)
                .map(|s| two_part_redundancy(model, &net, n, a, s).unwrap().redundancy)
                .collect();
            median(r)
        })
        .collect();
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let f = simple_fit(&x, &medians).unwrap();
    (f.slope(), f.r_squared, medians)
}

fn criterion_4() -> Outcome {
    let model = SingularBernoulli::default_model();
    let curve = volume_curve(&KlLandscape::new(&model), &dyadic_ladder(2, 10), VOLUME_SAMPLES, 1).unwrap();
    let vfit = fit_scaling(&curve, MultiplicityMode::SelectByFit).unwrap();
    let (slope, r2, medians) = redundancy_slope(&model, REDUNDANCY_A);
    info(&format!(
        "medians (nats) at n = 2^6..2^14: {}",
        medians.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>().join(" ")
    ));
    for a in [1.0, 10.0] {
        let (s, r, _) = redundancy_slope(&model, a);
        info(&format!("sensitivity: a = {a} slope {s:.4} (R^2 {r:.3})"));
    }
    let pass = (slope - 0.5).abs() <= REDUNDANCY_SLOPE_ABS;
    outcome(
        pass,
        format!(
            "a = {REDUNDANCY_A}: slope {slope:.4} (R^2 {r2:.3}) vs 1/2; KL-landscape volume fit lambda {:.4}, m = {}",
            vfit.lambda, vfit.multiplicity
        ),
    )
}

fn audit_config() -> AuditConfig {
    AuditConfig {
        instances: LEMMA_INSTANCES,
        outcomes: 3,
        m_simplex: M_SIMPLEX,
        ..AuditConfig::default()
    }
}

fn criterion_5() -> Outcome {
    let cfg = audit_config();
    let rows = [
        audit::audit_kl_l2(&cfg, 0).unwrap(),
        audit::audit_triangle(&cfg, 0).unwrap(),
        audit::audit_variance(&cfg, 0).unwrap(),
    ];
    let pass = rows.iter().all(|r| r.violations == 0 && r.instances == LEMMA_INSTANCES);
    let parts: Vec<String> = rows
        .iter()
        .map(|r| format!("{} {}/{} violations", r.validator, r.violations, r.instances))
        .collect();
    outcome(pass, parts.join(", "))
}

fn criterion_6() -> Outcome {
    let mut cfg = audit_config();
    cfg.inclusion.instances = INCLUSION_CONFIGS;
    let row = audit::audit_inclusion(&cfg, 0).unwrap();
    outcome(
        row.violations == 0 && row.instances == INCLUSION_CONFIGS,
        format!("{}/{} configurations violate (worst margin {:.3e})", row.violations, row.instances, row.worst_margin),
    )
}

fn criterion_7() -> Outcome {
    let ms = MSearchConfig::default();
    let failures: Vec<String> = (0..QUANT_VECTORS)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = rng_stream(7, stream_id(tag::DATA, i as u64));
            let len = 1 + rng.below(32);
            let scale = 10f64.powf(rng.uniform_in(-2.0, 2.0));
            let w: Vec<f64> = rng.normals(len).iter().map(|x| x * scale).collect();
            let curv: Vec<f64> = (0..len).map(|_| rng.uniform_in(0.1, 10.0)).collect();
            let loss = move |v: &[f64]| -> f64 {
                v.iter().zip(&w).zip(&curv).map(|((a, b), c)| c * (a - b) * (a - b)).sum()
            };
            let w2: Vec<f64> = rng.normals(len).iter().map(|x| x * scale).collect();
            let top = w2.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let mut bad = Vec::new();
            for n_q in (4..=64).step_by(2) {
                let spec = QuantizationSpec::new(n_q, top).unwrap();
                let once = quantize(&w2, &spec).unwrap();
                if quantize(&once, &spec).unwrap() != once {
                    bad.push(format!("idempotence v{i} n_q={n_q}"));
                }
                let neg: Vec<f64> = w2.iter().map(|x| -x).collect();
                let qn = quantize(&neg, &spec).unwrap();
                if qn.iter().zip(&once).any(|(a, b)| *a != -b + 0.0) {
                    bad.push(format!("odd symmetry v{i} n_q={n_q}"));
                }
                let mut levels: Vec<u64> = once.iter().map(|x| x.to_bits()).collect();
                levels.sort_unstable();
                levels.dedup();
                let on_grid = once.iter().all(|x| {
                    let k = x / spec.step();
                    (k - k.round()).abs() < 1e-9 && k.abs() <= (n_q / 2 - 1) as f64 + 1e-9
                });
                if levels.len() > (n_q - 1) as usize || !on_grid {
                    bad.push(format!("grid cardinality v{i} n_q={n_q}"));
                }
                let base = loss(&w2);
                let lm = quantize_with_mode(&w2, n_q, QuantMode::LossMinimized, &loss, base, &ms).unwrap();
                let mx = quantize_with_mode(&w2, n_q, QuantMode::MaxAbs, &loss, base, &ms).unwrap();
                if lm.delta_loss > mx.delta_loss {
                    bad.push(format!("dominance v{i} n_q={n_q}"));
                }
            }
            bad
        })
        .collect();
    outcome(
        failures.is_empty(),
        format!(
            "{} vectors x 31 n_q values, {} failures{}",
            QUANT_VECTORS,
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

/// Small three-layer teacher-student network with a few checkpoints.
fn oracle_instances() -> (MlpModel, Vec<Vec<f64>>) {
    let task = TeacherTask {
        samples: 256,
        teacher_layers: vec![4, 6, 6, 3],
        teacher_scale: 2.0,
        noise: 0.05,
        loss: LossKind::Mse,
        seed: 11,
    };
    let model = MlpModel::new(MlpSpec::new(vec![4, 8, 8, 3], LossKind::Mse).unwrap(), task.generate().unwrap()).unwrap();
    let cfg = TrainConfig {
        steps: 3000,
        learning_rate: 0.05,
        batch_size: 32,
        seed: 5,
        init_scale: 1.0,
        checkpoints: vec![500, 1500, 3000],
    };
    let params = train_sgd(&model, &cfg).unwrap().into_iter().map(|c| c.params).collect();
    (model, params)
}

fn criterion_8() -> Outcome {
    let (model, checkpoints) = oracle_instances();
    let loss = |p: &[f64]| model.full_loss(p);
    let mut mismatches = Vec::new();
    let mut noisy = Vec::new();
    let mut compared = [0usize; 3];
    for (ci, params) in checkpoints.iter().enumerate() {
        let base = loss(params);
        for rel in [0.5, 0.1, 0.01] {
            let eps = rel * base;
            let (mismatches, compared) = if rel < 0.05 {
                (&mut noisy, &mut [0usize; 3])
            } else {
                (&mut mismatches, &mut compared)
            };

            let qcfg = CriticalNqConfig {
                cap: 1024,
                ..CriticalNqConfig::default()
            };
            let found = critical_nq(params, eps, &loss, &qcfg).unwrap().n_q;
            let scan = (4..=1024)
                .step_by(2)
                .find(|&n| {
                    quantize_with_mode(params, n, qcfg.mode, &loss, base, &qcfg.m_search).unwrap().delta_loss <= eps
                })
                .unwrap();
            compared[0] += 1;
            if found != scan {
                mismatches.push(format!("n_q ckpt {ci} eps {rel}: {found} vs scan {scan}"));
            }

            let sel = LayerSelection::Hidden;
            let found = critical_compression_fraction(&model, params, eps, &sel, &loss).unwrap();
            let r = found.resolution;
            let scan = (1..=r)
                .map(|k| k as f64 / r as f64)
                .find(|&keep| loss(&factorize(&model, params, keep, &sel).unwrap().params) - base <= eps)
                .unwrap();
            compared[1] += 1;
            if (found.keep_fraction - scan).abs() > 1e-12 {
                mismatches.push(format!("keep ckpt {ci} eps {rel}: {} vs scan {scan}", found.keep_fraction));
            }

            let scfg = SigmaSearchConfig::default();
            let found = critical_sigma(params, eps, NoiseMode::Relative, &loss, &scfg).unwrap().sigma;
            let curve = NoiseCurve::new(params, NoiseMode::Relative, &loss, scfg.draws, scfg.seed).unwrap();
            let points = 400;
            let ratio = (scfg.upper / scfg.lower).powf(1.0 / points as f64);
            let scan = (0..=points)
                .map(|i| scfg.lower * ratio.powi(i))
                .find(|&s| curve.delta(s) >= eps)
                .unwrap();
            compared[2] += 1;
            if (found / scan).ln().abs() > ratio.ln() * (1.0 + 1e-9) {
                mismatches.push(format!("sigma ckpt {ci} eps {rel}: {found:.4e} vs scan {scan:.4e}"));
            }
        }
    }
    info(&format!(
        "diagnostic: eps = 0.01 x base loss, below the quantization noise floor: {} mismatches{}",
        noisy.len(),
        if noisy.is_empty() { String::new() } else { format!(": {}", noisy.join("; ")) }
    ));
    outcome(
        mismatches.is_empty(),
        format!(
            "eps in {{0.5, 0.1}} x base loss: n_q {} / fraction {} / sigma {} comparisons, {} mismatches{}",
            compared[0],
            compared[1],
            compared[2],
            mismatches.len(),
            if mismatches.is_empty() { String::new() } else { format!(": {}", mismatches.join("; ")) }
        ),
    )
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn criterion_9() -> Outcome {
    let cfg = ExperimentConfig::load(&workspace_root().join("configs/toy.json")).unwrap();
    let model = build_model(&cfg).unwrap();
    let t = cfg.training.as_ref().unwrap();
    let train = TrainConfig {
        steps: t.steps,
        learning_rate: t.learning_rate,
        batch_size: t.batch_size,
        seed: cfg.seed,
        init_scale: t.init_scale,
        checkpoints: t.checkpoints.clone(),
    };
    let cps = train_sgd(&model, &train).unwrap();
    let llc = cfg.llc.clone().unwrap();
    let eps = cfg.epsilons[0];
    let oracle = MinibatchLoss::new(&model);
    let loss = |p: &[f64]| model.full_loss(p);
    let search = cfg.quantize.as_ref().unwrap().search;
    let points: Vec<AnalysisPoint> = cps
        .par_iter()
        .map(|c| AnalysisPoint {
            step: c.step,
            lambda_hat: estimate_llc(&oracle, &c.params, &llc, cfg.seed).unwrap().lambda_hat,
            critical_value: critical_nq(&c.params, eps, &loss, &search).unwrap().n_q as f64,
        })
        .collect();
    let exclude = cfg.analysis.as_ref().map(|a| a.exclude_steps.clone()).unwrap_or_default();
    let result = analyze(&points, &exclude).unwrap();
    let rising = points.windows(2).filter(|w| w[1].lambda_hat >= w[0].lambda_hat).count();
    let pairs = points.len() - 1;
    let frac = rising as f64 / pairs as f64;
    info(&format!(
        "(step, lambda, n_q): {}",
        points
            .iter()
            .map(|p| format!("({}, {:.2}, {})", p.step, p.lambda_hat, p.critical_value))
            .collect::<Vec<_>>()
            .join(" ")
    ));
    let pass = points.len() >= TOY_MIN_CHECKPOINTS && frac >= TOY_MONOTONE_FRACTION && result.r_squared() >= TOY_R2;
    outcome(
        pass,
        format!(
            "{} checkpoints, lambda non-decreasing on {rising}/{pairs} pairs, critical n_q vs lambda R^2 {:.3} (slope {:.2}) at eps {eps}",
            points.len(),
            result.r_squared(),
            result.slope()
        ),
    )
}

fn criterion_10() -> Outcome {
    let eps = dyadic_ladder(4, 8);
    let center = vec![0.3137, 0.4271];
    let cases: Vec<(&str, Box<dyn Landscape>, Box<dyn Landscape>, f64)> = vec![
        (
            "quadratic",
            Box::new(Quadratic::new(square(1.0))),
            Box::new(Quadratic::new(square(1.0)).with_center(center.clone()).unwrap()),
            1.0,
        ),
        (
            "minimally singular",
            Box::new(minimally_singular()),
            Box::new(minimally_singular().with_center(center.clone()).unwrap()),
            0.5,
        ),
        (
            "k=(1,2)",
            Box::new(k12(k12_box())),
            Box::new(k12(k12_box()).with_center(center.clone()).unwrap()),
            0.25,
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, l, shifted, lambda) in &cases {
        let d = l.dim();
        let curve = volume_curve(l.as_ref(), &eps, VOLUME_SAMPLES, 3).unwrap();
        let bits = volume_critical_bits(&curve, d).unwrap();
        let slope = bits_slope(&eps, &bits).unwrap().slope();
        let target = lambda / d as f64;
        pass &= (slope / target - 1.0).abs() <= BITS_SLOPE_REL;
        parts.push(format!("{name} {slope:.4} vs {target:.4}"));

        let f = |w: &[f64]| shifted.loss(w);
        let direct: Vec<f64> = eps
            .iter()
            .map(|&e| (critical_nq(shifted.reference_point(), e, &f, &CriticalNqConfig::default()).unwrap().n_q as f64).log2())
            .collect();
        let dslope = bits_slope(&eps, &direct).unwrap().slope();
        info(&format!("diagnostic: direct grid quantization of one minimizer, {name}: slope {dslope:.4}"));
    }
    outcome(pass, format!("cell-volume critical bits slope vs lambda/d: {}", parts.join(", ")))
}

const DETERMINISM_CONFIG: &str = r#"{
  "seed": 3,
  "epsilons": [0.01, 0.05],
  "model": {
    "layers": [3, 6, 6, 2],
    "loss": "mse",
    "task": { "samples": 128, "teacher_layers": [3, 4, 2], "teacher_scale": 2.0, "noise": 0.1, "seed": 1 }
  },
  "training": { "steps": 400, "learning_rate": 0.05, "batch_size": 16, "init_scale": 0.5, "checkpoints": [100, 200, 300, 400] },
  "llc": {
    "beta_n": 26.0, "gamma": 100.0, "step_size": 1e-4, "chains": 2, "steps_per_chain": 200, "burn_in": 20,
    "batch_size": 32, "baseline_batches": 4, "preconditioner": { "kind": "rms_prop", "decay": 0.99, "stabilizer": 0.1 }
  },
  "quantize": { "grid": [4, 8, 16, 32] },
  "factorize": { "grid": [0.5, 1.0] },
  "noise": { "grid": [0.01, 0.1], "mode": "relative", "search": { "lower": 1e-6, "upper": 10.0, "draws": 2, "relative_tolerance": 1e-3, "seed": 0 } },
  "prune": { "grid": [0.5, 1.0], "retrain": { "steps": 50, "base_learning_rate": 0.05, "batch_size": 16 } },
  "volume": {
    "ladder": [2, 10], "samples": 100000,
    "landscapes": [
      { "kind": "quadratic", "name": "quadratic", "lo": [-1, -1], "hi": [1, 1] },
      { "kind": "bernoulli_kl", "name": "bernoulli_kl", "lo": [-0.5, -0.5], "hi": [0.5, 0.5], "m_simplex": 0.2 }
    ]
  },
  "mdl": {
    "a": [1.0], "n": [64, 256], "trials": 5,
    "net": { "grid_per_axis": 33, "pool_samples": 1000, "mc_samples": 20000, "audit_samples": 1000 }
  },
  "audit": { "instances": 200, "outcomes": 3, "m_simplex": 0.2,
    "fluctuation": { "instances": 3, "n": 100, "trials": 100 },
    "inclusion": { "instances": 2, "mc_samples": 5000 } },
  "analysis": { "scheme": "quantize", "gnuplot": true }
}"#;

const SUBCOMMANDS: &[&str] = &[
    "train-toy",
    "estimate-llc",
    "volume-fit",
    "quantize-sweep",
    "factorize-sweep",
    "noise-sweep",
    "prune-sweep",
    "mdl-redundancy",
    "lemma-audit",
    "analyze",
];

fn collect_files(dir: &Path, base: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            collect_files(&p, base, out);
        } else {
            out.insert(p.strip_prefix(base).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
        }
    }
}

fn criterion_11() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.json");
    std::fs::write(&config, DETERMINISM_CONFIG).unwrap();
    let mut trees = Vec::new();
    let mut failures = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        for cmd in SUBCOMMANDS {
            let status = Command::new(env!("CARGO_BIN_EXE_smdl"))
                .args([cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
                .status()
                .unwrap();
            if !status.success() {
                failures.push(format!("{cmd} exited with {status}"));
            }
        }
        let mut files = BTreeMap::new();
        collect_files(&out, &out, &mut files);
        trees.push(files);
    }
    let csvs = trees[0].keys().filter(|p| p.extension().is_some_and(|e| e == "csv")).count();
    let identical = trees[0] == trees[1];
    if !identical {
        for (p, bytes) in &trees[0] {
            if trees[1].get(p) != Some(bytes) {
                failures.push(format!("{} differs", p.display()));
            }
        }
    }
    outcome(
        identical && failures.is_empty() && csvs > 0,
        format!(
            "{} subcommands run twice, {} files ({csvs} CSV) compared, {}",
            SUBCOMMANDS.len(),
            trees[0].len(),
            if failures.is_empty() { "byte-identical".to_string() } else { failures.join("; ") }
        ),
    )
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Outcome); 11] = [
        (1, "volume-scaling recovery", criterion_1),
        (2, "LLC sampler oracle", criterion_2),
        (3, "LLC ordering", criterion_3),
        (4, "redundancy slope", criterion_4),
        (5, "lemma audits", criterion_5),
        (6, "volume-inclusion sandwich", criterion_6),
        (7, "quantization mechanics", criterion_7),
        (8, "critical-search oracle equivalence", criterion_8),
        (9, "toy LLC vs critical n_q", criterion_9),
        (10, "bits law", criterion_10),
        (11, "determinism", criterion_11),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {verdict} {name}: {} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
