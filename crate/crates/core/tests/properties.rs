use nalgebra::DVector;
use proptest::prelude::*;

use stale_momentum::engine::{expected_iterates_exact, recurrence_iterates, StepParams};
use stale_momentum::queueing::{simulate, QueueConfig};
use stale_momentum::rates::{eigen_rate, gamma, growth_polynomial, smallest_magnitude_root};
use stale_momentum::staleness::{total_variation, StalenessDistribution};
use stale_momentum::verify::chi_square_test;
use stale_momentum::QuadraticObjective;

fn mu_s() -> impl Strategy<Value = f64> {
    0.0..0.95f64
}

fn mu_l() -> impl Strategy<Value = f64> {
    -0.9..0.9f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gamma_depends_on_alpha_lambda_product(
        ms in mu_s(), ml in mu_l(), alpha in 1e-3..1.0f64, lambda in 0.1..10.0f64, c in 0.1..10.0f64,
    ) {
        let a = gamma(&[lambda], ms, ml, alpha).unwrap();
        let b = gamma(&[lambda * c], ms, ml, alpha / c).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn vanishing_explicit_momentum_reduces_degree(
        ms in mu_s(), alpha in 1e-3..1.0f64, lambda in 0.1..10.0f64,
    ) {
        let exact = eigen_rate(ms, 0.0, alpha, lambda).unwrap().rate;
        let perturbed = eigen_rate(ms, 1e-8, alpha, lambda).unwrap().rate;
        prop_assert!((exact - perturbed).abs() < 1e-5, "{exact} vs {perturbed}");
    }

    #[test]
    fn smallest_root_is_a_root(
        ms in mu_s(), ml in mu_l(), alpha in 1e-3..1.0f64, lambda in 0.1..10.0f64,
    ) {
        let p = growth_polynomial(ms, ml, alpha, lambda).unwrap();
        prop_assume!(p.degree() > 0);
        let t = smallest_magnitude_root(&p).unwrap();
        let residual = p.eval(t).norm();
        prop_assert!(residual < 1e-9 * p.max_coefficient() * t.norm().max(1.0).powi(3),
            "residual {residual} at {t}");
        for r in p.inverse_roots().unwrap() {
            prop_assert!(t.norm() <= (1.0 / r.norm()) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn geometric_pmf_and_tail_agree(ms in mu_s(), lag in 0usize..200) {
        let d = StalenessDistribution::geometric(ms).unwrap();
        let head: f64 = (0..lag).map(|l| d.pmf(l)).sum();
        prop_assert!((head + d.tail(lag) - 1.0).abs() < 1e-12);
        prop_assert!(d.tail(lag + 1) <= d.tail(lag));
    }

    #[test]
    fn total_variation_is_a_metric(a in mu_s(), b in mu_s(), c in mu_s()) {
        let (da, db, dc) = (
            StalenessDistribution::geometric(a).unwrap(),
            StalenessDistribution::geometric(b).unwrap(),
            StalenessDistribution::geometric(c).unwrap(),
        );
        let ab = total_variation(&da, &db);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!((ab - total_variation(&db, &da)).abs() < 1e-15);
        prop_assert!(total_variation(&da, &da) < 1e-15);
        prop_assert!(ab <= total_variation(&da, &dc) + total_variation(&dc, &db) + 1e-12);
    }

    #[test]
    fn recurrence_matches_dynamic_program(
        ms in 0.0..0.9f64, ml in -0.5..0.8f64, alpha in 1e-3..0.3f64, lambda in 0.1..3.0f64,
    ) {
        let obj = QuadraticObjective::from_spectrum(&[lambda, 1.0], DVector::from_vec(vec![0.3, -1.0])).unwrap();
        let params = StepParams::new(alpha, ml).unwrap();
        let w0 = DVector::from_vec(vec![1.0, 2.0]);
        let dist = StalenessDistribution::geometric(ms).unwrap();
        let dp = expected_iterates_exact(&obj, params, &dist, 60, &w0).unwrap();
        let rec = recurrence_iterates(&obj, params, ms, 60, &w0).unwrap();
        let scale = dp.iterates.iter().map(|w| w.amax()).fold(1.0, f64::max);
        prop_assert!(dp.max_gap(&rec, 0..61) <= 1e-10 * scale);
    }

    #[test]
    fn simulation_is_deterministic(workers in 1u32..12, seed in any::<u64>()) {
        let cfg = QueueConfig::new(workers, 1.0, 500, seed);
        let a = simulate(&cfg).unwrap();
        prop_assert_eq!(&a, &simulate(&cfg).unwrap());
        prop_assert_eq!(a.check_consistency(), Ok(()));
    }

    #[test]
    fn chi_square_statistic_is_nonnegative(counts in prop::collection::vec(0u64..1000, 1..20), ms in mu_s()) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let t = chi_square_test(&counts, &StalenessDistribution::geometric(ms).unwrap(), 0.001).unwrap();
        prop_assert!(t.statistic >= 0.0);
        prop_assert!((0.0..=1.0).contains(&t.p_value));
        let observed: u64 = t.bins.iter().map(|b| b.1).sum();
        prop_assert_eq!(observed, counts.iter().sum::<u64>());
    }
}
