use cbss::evalmetrics::{aligned_mse, upsilon};
use cbss::ica::{separate_ignoring_classes, FixedPointIca};
use cbss::synthdata::{gen_mixture, MixtureSpec};
use cbss::{separate, separate_supervised, SeparationConfig};
use nalgebra::DMatrix;

#[test]
fn separation_is_affine_equivariant() {
    let data = gen_mixture(&MixtureSpec::cubic(0.5, 0.5), 2000, 21).unwrap();
    let obs = data.observations().unwrap();
    let b = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.5, 0.1, 0.7, 0.4, -0.2, 0.6, 1.5]);
    let cfg = SeparationConfig::new(6, 0.5);
    let base = separate(&obs, &cfg, 1).unwrap();
    let moved = separate(&obs.transformed(&b).unwrap(), &cfg, 1).unwrap();
    assert_eq!(base.labels, moved.labels);
    let (ra, rb) = (base.report.unwrap(), moved.report.unwrap());
    for (x, y) in ra.theta.iter().zip(&rb.theta) {
        assert!((x - y).abs() <= 1e-6 * x);
    }
    let e0 = aligned_mse(&base.s_hat, &data.s).unwrap();
    let e1 = aligned_mse(&moved.s_hat, &data.s).unwrap();
    assert!((e0 - e1).abs() < 1e-3, "{e0} vs {e1}");
}

#[test]
fn separation_is_deterministic() {
    let data = gen_mixture(&MixtureSpec::vanishing(0.4), 2000, 22).unwrap();
    let obs = data.observations().unwrap();
    let cfg = SeparationConfig::new(6, 0.4);
    assert_eq!(
        separate(&obs, &cfg, 9).unwrap(),
        separate(&obs, &cfg, 9).unwrap()
    );
}

#[test]
fn proposed_beats_plain_ica_on_contaminated_data() {
    let data = gen_mixture(&MixtureSpec::vanishing(0.4), 2000, 23).unwrap();
    let obs = data.observations().unwrap();
    let algo = FixedPointIca::default();
    let proposed = separate(&obs, &SeparationConfig::new(6, 0.4), 0).unwrap();
    let plain = separate_ignoring_classes(&obs, &algo, 0).unwrap();
    let known = separate_supervised(&obs, &data.labels, &algo, 0).unwrap();
    let mse = |s: &DMatrix<f64>| aligned_mse(s, &data.s).unwrap();
    assert!(mse(&proposed.s_hat) < mse(&plain.s_hat));
    assert!(mse(&known.s_hat) < 1e-2);
    assert!(upsilon(&proposed.labels, &data.labels).unwrap() > 0.8);
}

#[test]
fn pure_regular_data_separates() {
    let data = gen_mixture(&MixtureSpec::cubic(1.0, 0.0), 2000, 24).unwrap();
    let obs = data.observations().unwrap();
    let plain = separate_ignoring_classes(&obs, &FixedPointIca::default(), 0).unwrap();
    assert!(plain.unmixing.converged);
    assert!(aligned_mse(&plain.s_hat, &data.s).unwrap() < 1e-2);
}

#[test]
fn plain_ica_converges_on_contaminated_data() {
    for (spec, seed) in [
        (MixtureSpec::cubic(0.5, 0.0), 30),
        (MixtureSpec::vanishing(0.2), 31),
        (MixtureSpec::vanishing(0.4), 32),
    ] {
        let data = gen_mixture(&spec, 2000, seed).unwrap();
        let obs = data.observations().unwrap();
        let res = separate_ignoring_classes(&obs, &FixedPointIca::default(), seed).unwrap();
        assert!(res.unmixing.converged);
        assert!(res.unmixing.iterations < 200, "{}", res.unmixing.iterations);
    }
}
