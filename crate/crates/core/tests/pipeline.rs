use roughtrap::controlled::{ControlledPath, FunctionId};
use roughtrap::covariance::CovarianceModel;
use roughtrap::grid::Partition;
use roughtrap::integrators::{decompose_i, midpoint, rough_integral, trapezoid};
use roughtrap::lift::{verify_lift, RoughLift};
use roughtrap::simulate::{sample_path, GaussianSampler, SamplerMethod};

#[test]
fn sample_lift_integrate() {
    let model = CovarianceModel::fbm(0.4).unwrap();
    let fine = Partition::uniform(2.0, 1 << 10).unwrap();
    let sampler = GaussianSampler::new(model, fine.clone(), SamplerMethod::Auto).unwrap();
    assert!(sampler.is_circulant());
    let x = sampler.sample(2, 77).unwrap();
    let lift = RoughLift::from_path(&x).unwrap();
    assert!(verify_lift(&lift, 1e-12).passed());

    let f = FunctionId::SinMix.build(2);
    let cp = ControlledPath::from_function(&f, &x).unwrap();
    let reference = rough_integral(&cp, &lift, &fine).unwrap().value;
    for n in [16, 64, 256] {
        let coarse = Partition::uniform(2.0, n).unwrap();
        let trap = trapezoid(&cp, &lift, &coarse).unwrap().value;
        let mid = midpoint(&f, &lift, &coarse).unwrap().value;
        let dec = decompose_i(&cp, &lift, &coarse).unwrap();
        assert!((dec.total() - trap).abs() <= 1e-12 * (1.0 + trap.abs()));
        assert!(trap.is_finite() && mid.is_finite() && reference.is_finite());
    }
}

#[test]
fn samplers_agree_in_law_and_are_reproducible() {
    let model = CovarianceModel::fbm(0.7).unwrap();
    let p = Partition::uniform(1.0, 32).unwrap();
    let a = sample_path(&model, &p, 3, 5).unwrap();
    let b = sample_path(&model, &p, 3, 5).unwrap();
    assert_eq!(a.values, b.values);
    let c = sample_path(&model, &p, 3, 6).unwrap();
    assert_ne!(a.values, c.values);

    // variance of X_1 from both factorizations
    let n = 4000;
    for method in [SamplerMethod::Cholesky, SamplerMethod::Circulant] {
        let s = GaussianSampler::new(model, p.clone(), method).unwrap();
        let var: f64 = (0..n)
            .map(|i| s.sample(1, i).unwrap().at(32)[0].powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((var - 1.0).abs() < 0.1, "{method:?}: {var}");
    }
}

#[test]
fn non_uniform_grids_use_cholesky() {
    let model = CovarianceModel::bifractional(0.6, 0.8).unwrap();
    let p = Partition::new(vec![0.0, 0.1, 0.15, 0.4, 0.7, 1.0]).unwrap();
    let s = GaussianSampler::new(model, p, SamplerMethod::Auto).unwrap();
    assert!(!s.is_circulant());
    assert!(GaussianSampler::new(
        model,
        Partition::uniform(1.0, 8).unwrap(),
        SamplerMethod::Circulant
    )
    .is_err());
}
