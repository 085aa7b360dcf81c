mod support;

use diffanon::oneclass::gmm::VARIANCE_FLOOR;
use diffanon::oneclass::*;
use proptest::prelude::*;

fn cloud() -> impl Strategy<Value = (u64, usize, usize)> {
    // seed, n, d
    (any::<u64>(), 20usize..60, 1usize..6)
}

fn data(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = support::rng(seed);
    let mut x = support::gaussian(&mut rng, n, d);
    // a second, shifted cluster for half of the points
    for row in x.iter_mut().step_by(2) {
        row[0] += 4.0;
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gmm_fit_is_a_valid_mixture((seed, n, d) in cloud(), k in 1usize..4, full in any::<bool>()) {
        let x = data(seed, n, d);
        let kind = if full { CovarianceKind::Full } else { CovarianceKind::Diagonal };
        let fit = fit_gmm(&x, k, kind, seed).unwrap();
        let m = &fit.model;
        prop_assert_eq!(m.weights.len(), k);
        prop_assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(m.weights.iter().all(|&w| w > 0.0));
        for c in &m.covariances {
            prop_assert!(c.variances().iter().all(|&v| v >= VARIANCE_FLOOR * (1.0 - 1e-9)));
        }
        for w in fit.log_likelihood.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0));
        }
        for row in &x {
            prop_assert!(gmm_score(m, row).unwrap().is_finite());
        }
    }

    #[test]
    fn svm_dual_is_feasible((seed, n, d) in cloud(), nu in 0.05f64..0.6) {
        let x = data(seed, n, d);
        let fit = fit_ocsvm(&x, nu, 1.0 / d as f64, seed).unwrap();
        let cap = 1.0 / (nu * n as f64);
        prop_assert!((fit.dual.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(fit.dual.iter().all(|&a| a >= 0.0 && a <= cap * (1.0 + 1e-12)));
        let sv = fit.dual.iter().filter(|&&a| a > 0.0).count();
        // at least a nu fraction of the points are support vectors
        prop_assert!(sv as f64 >= nu * n as f64 - 1.0 - 1e-9);
        prop_assert_eq!(fit.model.support_vectors.len(), fit.model.alphas.len());
    }

    #[test]
    fn pca_basis_is_orthonormal((seed, n, d) in cloud(), target in 1usize..6) {
        let x = data(seed, n, d);
        let target = target.min(d);
        let basis = fit_pca(&x, target).unwrap();
        prop_assert_eq!(basis.components.len(), target);
        for (i, u) in basis.components.iter().enumerate() {
            for (j, v) in basis.components.iter().enumerate() {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-9, "<u{},u{}> = {}", i, j, dot);
            }
        }
        for w in basis.eigenvalues.windows(2) {
            prop_assert!(w[0] >= w[1] - 1e-12);
        }
        prop_assert!(basis.eigenvalues.iter().all(|&l| l >= -1e-12));
    }

    #[test]
    fn vae_scores_are_nonnegative((seed, n, d) in cloud()) {
        let x = data(seed, n, d);
        let training = VaeTraining { epochs: 2, batch_size: 8, learning_rate: 1e-3, seed };
        let fit = fit_vae(&x, 4, 2, training).unwrap();
        prop_assert!(fit.epoch_losses.iter().all(|l| l.is_finite()));
        for row in &x {
            let s = vae_score(&fit.model, row).unwrap();
            prop_assert!(s.is_finite() && s >= 0.0);
        }
    }
}
