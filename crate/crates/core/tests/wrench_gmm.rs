use lft_core::insertion_sim::{scripted_demonstrate, DemoPolicy, SceneConfig};
use lft_core::linalg::SquareMatrix;
use lft_core::recording::{Metadata, Recording, Source, Stream};
use lft_core::wrench_gmm::{
    build_dataset, fit_gmm, fit_gmm_traced, log_likelihood, select_k_bic, GmmConfig, GmmError, GmmModel,
};
use lft_core::dmp::phase;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn gaussian_cloud(rng: &mut StdRng, mean: &[f64], sd: &[f64], n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            mean.iter()
                .zip(sd)
                .map(|(&m, &s)| Normal::new(m, s).unwrap().sample(rng))
                .collect()
        })
        .collect()
}

fn two_clusters() -> Vec<Vec<f64>> {
    let mut rng = StdRng::seed_from_u64(7);
    let mut s = gaussian_cloud(&mut rng, &[0.8, 5.0], &[0.02, 0.1], 500);
    s.extend(gaussian_cloud(&mut rng, &[0.2, -5.0], &[0.02, 0.1], 500));
    s
}

fn three_clusters(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut s = gaussian_cloud(&mut rng, &[0.9, 2.0, 0.0], &[0.03, 0.2, 0.1], 300);
    s.extend(gaussian_cloud(&mut rng, &[0.5, -4.0, 1.0], &[0.03, 0.2, 0.1], 300));
    s.extend(gaussian_cloud(&mut rng, &[0.1, 8.0, -1.0], &[0.03, 0.2, 0.1], 300));
    s
}

fn demo_dataset() -> Vec<Vec<f64>> {
    let scene = SceneConfig::default();
    let rec = scripted_demonstrate(&scene, scene.nominal_start(), &DemoPolicy::default()).unwrap();
    let tau = rec.duration();
    let phases: Vec<f64> = (0..rec.frames).map(|k| phase(k as f64 * rec.dt, tau, 25.0 / 3.0)).collect();
    build_dataset(&rec, "wrench", &phases).unwrap()
}

fn assert_monotone(ll: &[f64]) {
    assert!(!ll.is_empty());
    for w in ll.windows(2) {
        assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "log-likelihood fell from {} to {}", w[0], w[1]);
    }
}

fn assert_valid(m: &GmmModel<f64>) {
    let s: f64 = m.priors.iter().sum();
    assert!((s - 1.0).abs() <= 1e-12);
    assert!(m.priors.iter().all(|&p| p >= 0.0));
    for c in &m.covariances {
        assert!(c.asymmetry() <= 1e-12);
        assert!(c.cholesky().is_some());
    }
    m.validate().unwrap();
}

#[test]
fn dataset_pairs_phase_with_wrench() {
    let rows = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]];
    let rec = Recording::new(
        0.01,
        0.0,
        3,
        vec![
            Stream::from_rows("wrench", "N", &rows),
            Stream::from_rows("zero", "N", &vec![vec![0.0; 3]; 3]),
        ],
        Metadata::new("t", Source::Scripted),
    )
    .unwrap();
    let phases = [1.0, 0.5, 0.25];
    let s = build_dataset(&rec, "wrench", &phases).unwrap();
    assert_eq!(s.len(), 3);
    for k in 0..3 {
        assert_eq!(s[k][0], phases[k]);
        assert_eq!(&s[k][1..], rows[k].as_slice());
    }
    let z = build_dataset(&rec, "zero", &phases).unwrap();
    assert!(z.iter().all(|r| r[1..].iter().all(|&v| v == 0.0)));
    assert_eq!(
        build_dataset(&rec, "wrench", &phases[..2]).unwrap_err(),
        GmmError::FrameMismatch { expected: 3, got: 2 }
    );
}

#[test]
fn single_component_is_the_regularized_sample_moments() {
    let samples = three_clusters(3);
    let cfg = GmmConfig::with_components(1);
    let m = fit_gmm(&samples, &cfg).unwrap();
    let n = samples.len() as f64;
    let d = samples[0].len();
    let mean: Vec<f64> = (0..d).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for s in &samples {
        for a in 0..d {
            for b in 0..d {
                cov[a][b] += (s[a] - mean[a]) * (s[b] - mean[b]) / n;
            }
        }
    }
    let ridge = 1e-6 * (0..d).map(|a| cov[a][a]).sum::<f64>() / d as f64;
    assert_eq!(m.priors, vec![1.0]);
    for a in 0..d {
        assert!((m.means[0][a] - mean[a]).abs() <= 1e-12 * mean[a].abs().max(1.0));
        for b in 0..d {
            let want = cov[a][b] + if a == b { ridge } else { 0.0 };
            assert!((m.covariances[0][(a, b)] - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }
}

#[test]
fn two_clusters_are_recovered() {
    let fit = fit_gmm_traced(&two_clusters(), &GmmConfig::with_components(2)).unwrap();
    assert_monotone(&fit.log_likelihoods);
    let m = &fit.model;
    assert_valid(m);
    let mut means = m.means.clone();
    means.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
    for (got, want) in means.iter().zip([[0.2, -5.0], [0.8, 5.0]]) {
        assert!((got[0] - want[0]).abs() <= 1e-2, "{got:?}");
        assert!((got[1] - want[1]).abs() <= 1e-2, "{got:?}");
    }
}

#[test]
fn log_likelihood_is_monotone_on_every_dataset() {
    let sets = [two_clusters(), three_clusters(11), demo_dataset()];
    for samples in &sets {
        for k in 1..=6 {
            let fit = fit_gmm_traced(samples, &GmmConfig::with_components(k)).unwrap();
            assert_monotone(&fit.log_likelihoods);
            assert_valid(&fit.model);
        }
    }
}

fn unit_model() -> GmmModel<f64> {
    GmmModel {
        priors: vec![1.0],
        means: vec![vec![0.3, -1.2]],
        covariances: vec![SquareMatrix::identity(2)],
        input_dim: 1,
    }
}

#[test]
fn log_likelihood_examples() {
    let m = unit_model();
    let at_mean = log_likelihood(&m, &[vec![0.3, -1.2]]).unwrap();
    assert!((at_mean - (1.0 / (2.0 * std::f64::consts::PI)).ln()).abs() <= 1e-15);

    let samples = three_clusters(5);
    let fitted = fit_gmm(&samples, &GmmConfig::with_components(3)).unwrap();
    let once = log_likelihood(&fitted, &samples).unwrap();
    let mut twice = samples.clone();
    twice.extend(samples.iter().cloned());
    let doubled = log_likelihood(&fitted, &twice).unwrap();
    assert!((doubled - 2.0 * once).abs() <= 1e-12 * once.abs());

    let mut outlier = samples.clone();
    outlier.push(vec![0.5, 500.0, -300.0]);
    let mean_before = once / samples.len() as f64;
    let mean_after = log_likelihood(&fitted, &outlier).unwrap() / outlier.len() as f64;
    assert!(mean_after < mean_before);

    assert!(matches!(
        log_likelihood(&m, &[vec![0.0, 1.0, 2.0]]),
        Err(GmmError::DimensionMismatch { .. })
    ));
}

#[test]
fn single_component_regression_is_linear_gaussian() {
    let c = SquareMatrix::<f64>::from_rows(&[
        vec![0.04, 0.3, -0.1],
        vec![0.3, 4.0, 0.2],
        vec![-0.1, 0.2, 1.5],
    ])
    .unwrap();
    let m = GmmModel {
        priors: vec![1.0],
        means: vec![vec![0.5, 3.0, -2.0]],
        covariances: vec![c.clone()],
        input_dim: 1,
    };
    m.validate().unwrap();
    for x in [0.0, 0.1, 0.5, 0.77, 1.0, 3.0] {
        let r = m.gmr(x);
        for a in 0..2 {
            let want = m.means[0][a + 1] + c[(a + 1, 0)] / c[(0, 0)] * (x - 0.5);
            assert!((r.mean[a] - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    let mut indep = m.clone();
    indep.covariances = vec![SquareMatrix::<f64>::from_rows(&[
        vec![0.04, 0.0, 0.0],
        vec![0.0, 4.0, 0.2],
        vec![0.0, 0.2, 1.5],
    ])
    .unwrap()];
    for x in [0.0, 0.3, 1.0] {
        assert_eq!(indep.gmr(x).mean, vec![3.0, -2.0]);
    }
}

fn pdf2(x: f64, f: f64, mu: &[f64], c: &SquareMatrix<f64>) -> f64 {
    let (a, b, d) = (c[(0, 0)], c[(0, 1)], c[(1, 1)]);
    let det = a * d - b * b;
    let (dx, df) = (x - mu[0], f - mu[1]);
    let q = (d * dx * dx - 2.0 * b * dx * df + a * df * df) / det;
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

#[test]
fn three_component_regression_matches_quadrature() {
    let comps = [
        (0.3, [0.85, 6.0], [[0.01, 0.05], [0.05, 1.0]]),
        (0.5, [0.5, -2.0], [[0.02, -0.08], [-0.08, 2.0]]),
        (0.2, [0.15, 1.0], [[0.005, 0.0], [0.0, 0.5]]),
    ];
    let m = GmmModel {
        priors: comps.iter().map(|c| c.0).collect(),
        means: comps.iter().map(|c| c.1.to_vec()).collect(),
        covariances: comps
            .iter()
            .map(|c| SquareMatrix::from_rows(&[c.2[0].to_vec(), c.2[1].to_vec()]).unwrap())
            .collect(),
        input_dim: 1,
    };
    m.validate().unwrap();
    let (lo, hi, n) = (-20.0, 25.0, 90_001);
    let h = (hi - lo) / (n - 1) as f64;
    for x in [0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95] {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let f = lo + i as f64 * h;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            let p: f64 = (0..3).map(|k| m.priors[k] * pdf2(x, f, &m.means[k], &m.covariances[k])).sum();
            num += w * f * p;
            den += w * p;
        }
        let oracle = num / den;
        let got = m.gmr(x).mean[0];
        assert!(
            (got - oracle).abs() <= 1e-3 * oracle.abs().max(1e-3),
            "x={x}: gmr {got} vs quadrature {oracle}"
        );
        let r = m.responsibilities(x);
        assert!((r.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn bic_selects_the_generating_count() {
    let mut rng = StdRng::seed_from_u64(21);
    let one = gaussian_cloud(&mut rng, &[0.5, 1.0, -1.0], &[0.2, 0.5, 0.3], 600);
    let base = GmmConfig::default();
    assert_eq!(select_k_bic(&one, &[1, 2, 3, 4], &base).unwrap(), 1);
    let three = three_clusters(13);
    assert_eq!(select_k_bic(&three, &[1, 2, 3, 4, 5, 6], &base).unwrap(), 3);
    assert_eq!(select_k_bic(&three, &[2], &base).unwrap(), 2);
    assert_eq!(select_k_bic(&three, &[], &base).unwrap_err(), GmmError::EmptyRange);
}

#[test]
fn degenerate_inputs_are_rejected() {
    let same = vec![vec![0.5, 1.0]; 40];
    assert!(matches!(
        fit_gmm(&same, &GmmConfig::with_components(2)),
        Err(GmmError::SingularCovariance(_))
    ));
    let few = vec![vec![0.5, 1.0], vec![0.4, 2.0], vec![0.3, 0.0]];
    assert!(matches!(
        fit_gmm(&few, &GmmConfig::with_components(2)),
        Err(GmmError::TooFewSamples { needed: 4, got: 3 })
    ));
}

#[test]
fn regression_is_continuous_over_phase() {
    let samples = demo_dataset();
    let m = fit_gmm(&samples, &GmmConfig::default()).unwrap();
    let x_min = samples.iter().map(|s| s[0]).fold(f64::MAX, f64::min);
    let coarse = 1e-2;
    let mut c: f64 = 0.0;
    let mut x = x_min;
    while x + coarse <= 1.0 {
        let a = m.gmr(x).mean;
        let b = m.gmr(x + coarse).mean;
        for d in 0..a.len() {
            c = c.max((b[d] - a[d]).abs() / coarse);
        }
        x += coarse;
    }
    let delta = 1e-4;
    let steps = ((1.0 - x_min) / delta) as usize;
    let mut prev = m.gmr(x_min).mean;
    for i in 1..=steps {
        let cur = m.gmr(x_min + i as f64 * delta).mean;
        for d in 0..cur.len() {
            assert!((cur[d] - prev[d]).abs() <= 10.0 * c * delta + 1e-12, "jump at step {i}");
        }
        prev = cur;
    }
}

#[test]
fn fitting_is_deterministic() {
    let s = three_clusters(17);
    let a = fit_gmm(&s, &GmmConfig::with_components(4)).unwrap();
    let b = fit_gmm(&s, &GmmConfig::with_components(4)).unwrap();
    let bits = |m: &GmmModel<f64>| -> Vec<u64> {
        m.priors
            .iter()
            .chain(m.means.iter().flatten())
            .chain(m.covariances.iter().flat_map(|c| c.as_slice().iter()))
            .map(|v| v.to_bits())
            .collect()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn single_precision_fit_is_valid() {
    let s: Vec<Vec<f32>> = two_clusters()
        .iter()
        .map(|r| r.iter().map(|&v| v as f32).collect())
        .collect();
    let m = fit_gmm(&s, &GmmConfig::<f32>::with_components(2)).unwrap();
    let mut means = m.means.clone();
    means.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
    assert!((means[0][1] + 5.0f32).abs() < 2e-2 && (means[1][1] - 5.0f32).abs() < 2e-2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fitted_models_satisfy_invariants(seed in 0u64..10_000, k in 1usize..6) {
        let s = three_clusters(seed);
        let fit = fit_gmm_traced(&s, &GmmConfig::with_components(k)).unwrap();
        let m = &fit.model;
        let sum: f64 = m.priors.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        prop_assert!(m.covariances.iter().all(|c| c.cholesky().is_some() && c.asymmetry() <= 1e-12));
        for w in fit.log_likelihoods.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs());
        }
    }

    #[test]
    fn responsibilities_sum_to_one(x in prop_oneof![-1e6f64..1e6, -2.0f64..2.0]) {
        let m = fit_gmm(&three_clusters(1), &GmmConfig::with_components(3)).unwrap();
        let r = m.responsibilities(x);
        prop_assert!((r.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(r.iter().all(|v| v.is_finite() && *v >= 0.0));
        let g = m.gmr(x);
        prop_assert!(g.mean.iter().all(|v| v.is_finite()));
    }
}
