use proptest::prelude::*;
use ustat_cs::bounds::{gershgorin_ric, is_vacuous, welch_lower_bound};
use ustat_cs::ensembles::{sample_matrix, EnsembleSpec, Family};
use ustat_cs::kernels::KernelId;
use ustat_cs::poisson::{
    eps_full, eps_mid, eps_single, joint_inconsistencies, lambda_n, log_binomial, one_minus_exp_neg,
    poisson_zero_approx, PoissonReport,
};
use ustat_cs::ustat::{max_over_subsets, u_statistic};

fn chain_input() -> impl Strategy<Value = (u64, u64, f64, Vec<f64>)> {
    (2u64..=10)
        .prop_flat_map(|k| (Just(k), k..=100u64, -12.0f64..=0.0))
        .prop_flat_map(|(k, n, lp)| {
            let p = 10f64.powf(lp);
            (Just(k), Just(n), Just(p), prop::collection::vec(0.0f64..=1.0, (k - 1) as usize))
        })
        .prop_map(|(k, n, p, mut u)| {
            u.sort_by(f64::total_cmp);
            let q = u.iter().map(|x| x * p).collect();
            (n, k, p, q)
        })
}

proptest! {
    #[test]
    fn error_bound_chain((n, k, p, q) in chain_input()) {
        let f = eps_full(n, k, p, &q).unwrap();
        let m = eps_mid(n, k, p, &q).unwrap();
        let s = eps_single(n, k, p, *q.last().unwrap()).unwrap();
        prop_assert!(f >= 0.0);
        prop_assert!(f <= m * (1.0 + 1e-12));
        prop_assert!(m <= s * (1.0 + 1e-12));
    }

    #[test]
    fn report_is_consistent((n, k, p, q) in chain_input()) {
        let r = PoissonReport::new(n, k, 1.0, p, &q).unwrap();
        prop_assert!((r.approx_zero + r.one_minus_approx_zero - 1.0).abs() < 1e-12);
        prop_assert!(r.flagged_overlaps.is_empty());
        let lambda = lambda_n(n, k, p).unwrap();
        prop_assert_eq!(r.lambda, lambda);
        prop_assert!((r.lambda.ln() - (log_binomial(n, k).unwrap() + p.ln())).abs() < 1e-9);
    }

    #[test]
    fn approx_zero_in_unit_interval(lambda in 0.0f64..1e6) {
        let z = poisson_zero_approx(lambda);
        prop_assert!((0.0..=1.0).contains(&z));
        prop_assert!((0.0..=1.0).contains(&one_minus_exp_neg(lambda)));
    }

    #[test]
    fn u_statistic_bounded_by_max(seed in 0u64..500, a in 0.0f64..4.0) {
        let spec = EnsembleSpec::new(Family::Gaussian, 5, 7, seed).unwrap();
        let phi = sample_matrix(&spec, 0).data;
        let u = u_statistic(&phi, KernelId::SigmaMaxSq, 3, a).unwrap();
        let mx = max_over_subsets(&phi, KernelId::SigmaMaxSq, 3).unwrap();
        prop_assert!((0.0..=1.0).contains(&u));
        if u > 0.0 {
            prop_assert!(mx > a);
        } else {
            prop_assert!(mx <= a);
        }
    }

    #[test]
    fn welch_positive_below_n(m in 1u64..200, extra in 1u64..200) {
        prop_assert!(welch_lower_bound(m + extra, m).unwrap() > 0.0);
    }

    #[test]
    fn gershgorin_linear(coh in 0.0f64..1.0, k in 1u32..50) {
        prop_assert!((gershgorin_ric(coh, k) - (k - 1) as f64 * coh).abs() < 1e-12);
    }
}

#[test]
fn inconsistent_joint_tails_are_flagged() {
    assert_eq!(joint_inconsistencies(0.1, &[0.05, 0.2, 0.1]), vec![2]);
    assert!(!is_vacuous(1.0));
    assert!(is_vacuous(1.0 + 1e-9));
}
