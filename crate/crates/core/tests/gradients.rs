use smdl_core::rng::rng_stream;
use smdl_core::zoo::{
    Bounds, KlLandscape, Landscape, LossKind, MlpModel, MlpSpec, NormalCrossing, NormalCrossingSpec, Quadratic,
    SingularBernoulli, TeacherTask,
};

fn check_landscape(l: &dyn Landscape, seed: u64) {
    let d = l.dim();
    let mut rng = rng_stream(seed, 0);
    for _ in 0..50 {
        let mut w = vec![0.0; d];
        l.bounds().sample(&mut rng, &mut w);
        let mut g = vec![0.0; d];
        let k = l.loss_grad(&w, &mut g);
        assert!((k - l.loss(&w)).abs() < 1e-14);
        for j in 0..d {
            let h = 1e-6;
            let mut a = w.clone();
            let mut b = w.clone();
            a[j] += h;
            b[j] -= h;
            let fd = (l.loss(&a) - l.loss(&b)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6 * (1.0 + g[j].abs()), "coord {j}: {fd} vs {}", g[j]);
        }
    }
}

#[test]
fn landscape_gradients_match_central_differences() {
    let sq = Bounds::symmetric(3, 1.0).unwrap();
    check_landscape(&Quadratic::new(sq.clone()).with_curvature(vec![0.5, 2.0, 3.0]).unwrap(), 1);
    check_landscape(
        &NormalCrossing::new(NormalCrossingSpec::all_active(vec![1, 2, 3]), sq.clone())
            .unwrap()
            .with_center(vec![0.1, -0.2, 0.3])
            .unwrap(),
        2,
    );
    let partial = NormalCrossingSpec {
        exponents: vec![2, 1, 1],
        active: vec![true, false, true],
    };
    check_landscape(&NormalCrossing::new(partial, sq).unwrap(), 3);
    let m = SingularBernoulli::default_model();
    check_landscape(&KlLandscape::new(&m), 4);
    check_landscape(&KlLandscape::around(&m, &[0.2, -0.3]), 5);
}

fn check_mlp(loss: LossKind) {
    let task = TeacherTask {
        samples: 40,
        teacher_layers: vec![3, 4, 2],
        teacher_scale: 1.5,
        noise: 0.1,
        loss,
        seed: 7,
    };
    let model = MlpModel::new(MlpSpec::new(vec![3, 5, 4, 2], loss).unwrap(), task.generate().unwrap()).unwrap();
    let p = model.init_params(3, 1.0);
    let batch: Vec<usize> = (0..40).step_by(3).collect();
    let (l, g) = model.loss_and_grad(&p, &batch).unwrap();
    assert!((l - model.batch_loss(&p, &batch).unwrap()).abs() < 1e-14);
    for j in 0..p.len() {
        let h = 1e-6;
        let mut a = p.clone();
        let mut b = p.clone();
        a[j] += h;
        b[j] -= h;
        let fd = (model.batch_loss(&a, &batch).unwrap() - model.batch_loss(&b, &batch).unwrap()) / (2.0 * h);
        assert!((fd - g[j]).abs() < 1e-6 * (1.0 + g[j].abs()), "param {j}: {fd} vs {}", g[j]);
    }
}

#[test]
fn mlp_gradient_matches_central_differences_mse() {
    check_mlp(LossKind::Mse);
}

#[test]
fn mlp_gradient_matches_central_differences_cross_entropy() {
    check_mlp(LossKind::CrossEntropy);
}

#[test]
fn full_loss_is_the_mean_over_all_samples() {
    let task = TeacherTask {
        samples: 30,
        teacher_layers: vec![2, 3, 1],
        teacher_scale: 1.0,
        noise: 0.0,
        loss: LossKind::Mse,
        seed: 1,
    };
    let data = task.generate().unwrap();
    let model = MlpModel::new(MlpSpec::new(vec![2, 4, 1], LossKind::Mse).unwrap(), data.clone()).unwrap();
    let p = model.init_params(0, 0.5);
    let oracle: f64 = (0..30)
        .map(|i| {
            let y = model.forward(&p, data.inputs.row(i));
            (y[0] - data.targets.get(i, 0)).powi(2)
        })
        .sum::<f64>()
        / 30.0;
    assert!((model.full_loss(&p) - oracle).abs() < 1e-12);
}
