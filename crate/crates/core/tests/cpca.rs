mod common;

use std::f64::consts::FRAC_PI_2;

use common::*;
use nalgebra::DMatrix;
use netcontrast::cpca::*;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn pairwise_distances(y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = y.nrows();
    DMatrix::from_fn(n, n, |i, j| (y.row(i) - y.row(j)).norm())
}

/// Columns with roughly the given variances, independent uniform noise.
fn synthetic(rng: &mut ChaCha8Rng, n: usize, variances: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(n, variances.len(), |_, j| {
        (rng.random::<f64>() * 2.0 - 1.0) * (3.0 * variances[j]).sqrt()
    })
}

#[test]
fn covariance_matches_two_pass_oracle() {
    let x = random_matrix(&mut rng(50), 50, 6);
    let c = covariance(&x).unwrap();
    assert!((c.clone() - covariance_oracle(&x)).amax() < 1e-12);
    assert_eq!(c, c.transpose());
}

#[test]
fn two_feature_closed_form() {
    let xt = DMatrix::from_row_slice(4, 2, &[2.0, 1.0, 2.0, -1.0, -2.0, 1.0, -2.0, -1.0]);
    let xb = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 1.0, -2.0, -1.0, 2.0, -1.0, -2.0]);
    assert_eq!(covariance(&xt).unwrap(), DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]));
    let m = fit_cpca(&xt, &xb, 1.0, 2).unwrap();
    assert!((m.eigenvalues[0] - 3.0).abs() < 1e-12);
    assert!((m.eigenvalues[1] + 3.0).abs() < 1e-12);
    assert!((m.components[(0, 0)] - 1.0).abs() < 1e-12);
    assert!(m.components[(1, 0)].abs() < 1e-12);
}

/// Eigenvalues of `[[a, b], [b, c]]` in closed form, descending.
fn eig2(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mid = 0.5 * (a + c);
    let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (mid + r, mid - r)
}

#[test]
fn random_two_feature_eigenvalues_match_closed_form() {
    let mut r = rng(2);
    for _ in 0..50 {
        let xt = random_matrix(&mut r, 30, 2);
        let xb = random_matrix(&mut r, 25, 2);
        let alpha = r.random::<f64>() * 5.0;
        let m = fit_cpca(&xt, &xb, alpha, 2).unwrap();
        let c = m.contrast_matrix();
        let (l1, l2) = eig2(c[(0, 0)], c[(0, 1)], c[(1, 1)]);
        assert!((m.eigenvalues[0] - l1).abs() < 1e-12);
        assert!((m.eigenvalues[1] - l2).abs() < 1e-12);
    }
}

#[test]
fn alpha_zero_matches_pca_oracle() {
    let mut r = rng(7);
    let xt = random_matrix(&mut r, 200, 10);
    let xb = random_matrix(&mut r, 80, 10);
    let m = fit_cpca(&xt, &xb, 0.0, 2).unwrap();
    let y = project(&xt, &m).unwrap();
    assert!(max_dev_up_to_sign(&y, &pca_scores_oracle(&xt)) < 1e-8);
}

#[test]
fn projection_matches_triple_loop() {
    let mut r = rng(8);
    let xt = random_matrix(&mut r, 40, 5);
    let xb = random_matrix(&mut r, 30, 5);
    let m = fit_cpca(&xt, &xb, 2.5, 2).unwrap();
    let means: Vec<f64> = column_means(&xt).iter().copied().collect();
    for x in [&xt, &xb] {
        let got = project(x, &m).unwrap();
        assert!((got - project_oracle(x, &means, &m.components)).amax() < 1e-12);
    }
}

#[test]
fn constant_background_selects_alpha_zero() {
    let mut r = rng(9);
    let xt = random_matrix(&mut r, 50, 4);
    let xb = DMatrix::from_element(20, 4, 3.0);
    let sel = auto_alpha(&xt, &xb, &default_alpha_grid()).unwrap();
    assert_eq!(sel.alpha, 0.0);
}

/// Fraction of the target embedding's variance contributed by feature `k`.
fn variance_share(xt: &DMatrix<f64>, w: &DMatrix<f64>, k: usize) -> f64 {
    let means: Vec<f64> = column_means(xt).iter().copied().collect();
    let y = project_oracle(xt, &means, w);
    let mut only_k = DMatrix::zeros(w.nrows(), w.ncols());
    only_k.set_row(k, &w.row(k));
    trace_variance_oracle(&project_oracle(xt, &means, &only_k)) / trace_variance_oracle(&y)
}

#[test]
fn target_unique_feature_dominates_selected_embedding() {
    let mut r = rng(10);
    let xt = synthetic(&mut r, 600, &[10.0, 20.0, 0.5]);
    let xb = synthetic(&mut r, 600, &[0.01, 20.0, 2.0]);
    let grid = default_alpha_grid();
    let sel = auto_alpha(&xt, &xb, &grid).unwrap();

    // Exhaustive evaluation with the oracle eigensolver.
    let ct = covariance_oracle(&xt);
    let cb = covariance_oracle(&xb);
    let means: Vec<f64> = column_means(&xt).iter().copied().collect();
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &a in &grid {
        let (_, vecs) = jacobi_eigen(&(&ct - &cb * a));
        let w = vecs.columns(0, 2).into_owned();
        let score = trace_variance_oracle(&project_oracle(&xt, &means, &w))
            / (1e-12 + trace_variance_oracle(&project_oracle(&xb, &means, &w)));
        if score > best.0 * (1.0 + 1e-9) {
            best = (score, a);
        }
    }
    assert_eq!(sel.alpha, best.1);
    let m = fit_cpca(&xt, &xb, sel.alpha, 2).unwrap();
    assert!(variance_share(&xt, &m.components, 0) >= 0.9);
    let pca = fit_cpca(&xt, &xb, 0.0, 2).unwrap();
    assert!(variance_share(&xt, &pca.components, 0) < 0.9);
}

#[test]
fn auto_alpha_rejects_empty_grid() {
    let x = random_matrix(&mut rng(1), 5, 2);
    assert_eq!(auto_alpha(&x, &x, &[]).unwrap_err(), CpcaError::EmptyGrid);
}

#[test]
fn stabilize_restores_flipped_column() {
    let mut r = rng(11);
    let xt = random_matrix(&mut r, 30, 4);
    let xb = random_matrix(&mut r, 20, 4);
    let m = fit_cpca(&xt, &xb, 1.0, 2).unwrap();
    let prev = Embedding::compute(&m, &xt, &xb).unwrap();
    let mut flipped = m.clone();
    flipped.flip(1);
    let fixed = stabilize_signs(&prev, flipped, &xt, &xb).unwrap();
    assert_eq!(Embedding::compute(&fixed, &xt, &xb).unwrap(), prev);
    let same = stabilize_signs(&prev, m.clone(), &xt, &xb).unwrap();
    assert_eq!(same, m);
    let short = random_matrix(&mut r, 3, 4);
    assert!(matches!(
        stabilize_signs(&prev, m, &short, &xb),
        Err(CpcaError::NodeCountMismatch { .. })
    ));
}

#[test]
fn rotation_updates_loadings_and_eigenvalues() {
    let mut r = rng(12);
    let xt = random_matrix(&mut r, 40, 5);
    let xb = random_matrix(&mut r, 30, 5);
    let m = fit_cpca(&xt, &xb, 1.5, 2).unwrap();
    let y = project(&xt, &m).unwrap();
    for _ in 0..20 {
        let theta = (r.random::<f64>() * 2.0 - 1.0) * 3.0;
        let rot = rotate(&m, theta);
        let (s, c) = theta.sin_cos();
        let manual = DMatrix::from_fn(5, 2, |i, j| {
            let (w1, w2) = (m.components[(i, 0)], m.components[(i, 1)]);
            if j == 0 {
                c * w1 + s * w2
            } else {
                -s * w1 + c * w2
            }
        });
        assert!((&rot.components - manual).amax() < 1e-12);
        let yr = project(&xt, &rot).unwrap();
        assert!((pairwise_distances(&yr) - pairwise_distances(&y)).amax() < 1e-9);
        assert!((&yr - &y * rotation_matrix(theta)).amax() < 1e-12);
        let (scaled, _) = scaled_loadings(&rot.components);
        assert_eq!(rot.scaled_loadings, scaled);
        let ct = covariance_oracle(&xt);
        for j in 0..2 {
            let w = rot.components.column(j);
            let var = (w.transpose() * &ct * w)[(0, 0)];
            assert!((rot.eigenvalues[j] - var).abs() < 1e-12);
        }
        assert!(rot.rotated);
    }
    let quarter = rotate(&m, FRAC_PI_2);
    assert!((quarter.components.column(0) - m.components.column(1)).amax() < 1e-15);
    assert!((quarter.components.column(1) + m.components.column(0)).amax() < 1e-15);
}

#[test]
fn scaled_loadings_of_unit_columns() {
    let w = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    assert_eq!(scaled_loadings(&w).0, w);
}

#[test]
fn export_has_documented_keys() {
    let x = random_matrix(&mut rng(3), 10, 3);
    let y = random_matrix(&mut rng(4), 10, 3);
    let m = fit_cpca(&x, &y, 1.0, 2).unwrap();
    let v = serde_json::to_value(m.export()).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(
        keys,
        ["alpha", "components", "degenerate", "eigenvalues", "rotated", "rotation", "scaled_loadings"]
    );
    let back = CpcaModel::from_export(&m.export(), &x, &y, &CpcaOptions::default()).unwrap();
    assert_eq!(back, m);
}

#[test]
fn standardized_fit_projects_scaled_inputs() {
    let mut r = rng(13);
    let xt = synthetic(&mut r, 100, &[100.0, 1.0, 0.01]);
    let xb = synthetic(&mut r, 80, &[50.0, 1.0, 0.02]);
    let opts = CpcaOptions { standardize: true };
    let m = fit_cpca_with(&xt, &xb, 1.0, 2, &opts).unwrap();
    let scales = m.scales.clone().unwrap();
    let scaled = DMatrix::from_fn(100, 3, |i, j| xt[(i, j)] / scales[j]);
    let c = covariance_oracle(&scaled);
    for j in 0..3 {
        assert!((c[(j, j)] - 1.0).abs() < 1e-12);
    }
    let y = project(&xt, &m).unwrap();
    let means: Vec<f64> = column_means(&scaled).iter().copied().collect();
    assert!((y - project_oracle(&scaled, &means, &m.components)).amax() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fit_invariants(seed in any::<u64>(), nt in 3usize..40, nb in 3usize..40, d in 2usize..8, alpha in 0.0f64..50.0) {
        let mut r = rng(seed);
        let xt = random_matrix(&mut r, nt, d);
        let xb = random_matrix(&mut r, nb, d);
        let m = fit_cpca(&xt, &xb, alpha, 2).unwrap();
        prop_assume!(!m.degenerate);
        let wtw = m.components.transpose() * &m.components;
        prop_assert!((wtw - DMatrix::<f64>::identity(2, 2)).amax() < 1e-10);
        prop_assert!(m.eigenvalues[0] >= m.eigenvalues[1]);
        let c = m.contrast_matrix();
        for j in 0..2 {
            let w = m.components.column(j);
            let q = (w.transpose() * &c * w)[(0, 0)];
            prop_assert!((q - m.eigenvalues[j]).abs() < 1e-8);
            let s = m.scaled_loadings.column(j);
            prop_assert_eq!(s.amax(), 1.0);
            prop_assert_eq!(s[w.iamax()], 1.0);
        }
        let y = project(&xt, &m).unwrap();
        for j in 0..2 {
            prop_assert!((y.column(j).sum() / nt as f64).abs() < 1e-9);
        }
        let rot = rotate(&m, seed as f64 * 1e-3);
        let wtw = rot.components.transpose() * &rot.components;
        prop_assert!((wtw - DMatrix::<f64>::identity(2, 2)).amax() < 1e-10);
    }

    #[test]
    fn stabilize_is_idempotent(seed in any::<u64>(), a0 in 0.0f64..10.0, a1 in 0.0f64..10.0) {
        let mut r = rng(seed);
        let xt = random_matrix(&mut r, 20, 4);
        let xb = random_matrix(&mut r, 15, 4);
        let prev = Embedding::compute(&fit_cpca(&xt, &xb, a0, 2).unwrap(), &xt, &xb).unwrap();
        let next = fit_cpca(&xt, &xb, a1, 2).unwrap();
        let once = stabilize_signs(&prev, next, &xt, &xb).unwrap();
        let twice = stabilize_signs(&prev, once.clone(), &xt, &xb).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn random_scaled_loadings_peak_at_one(seed in any::<u64>(), d in 1usize..10) {
        let w = random_matrix(&mut rng(seed), d, 2);
        let (s, degenerate) = scaled_loadings(&w);
        prop_assert!(!degenerate);
        for j in 0..2 {
            prop_assert_eq!(s.column(j).amax(), 1.0);
        }
    }
}

#[test]
fn background_variance_non_increasing_along_grid() {
    let mut r = rng(14);
    let xt = synthetic(&mut r, 300, &[3.0, 1.0, 2.0, 0.5, 4.0]);
    let xb = synthetic(&mut r, 200, &[1.0, 2.0, 2.0, 0.2, 3.0]);
    let prepared = Prepared::new(&xt, &xb, &CpcaOptions::default()).unwrap();
    let mut last = f64::INFINITY;
    for a in default_alpha_grid() {
        let m = prepared.fit(a, 2).unwrap();
        let vb = trace_variance(&project(&xb, &m).unwrap());
        assert!(vb <= last * (1.0 + 1e-6), "α = {a}: {vb} > {last}");
        last = vb;
    }
}
