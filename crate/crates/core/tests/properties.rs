mod common;

use common::{random_chain, rel};
use proptest::prelude::*;
use wmlmc::figures::equal_sigma_chain;
use wmlmc::level_stats::MomentAccumulator;
use wmlmc::output::{fmt_num, round_sig};
use wmlmc::planner::{
    fixed_weight_plan, mlmc_plan, mlmc_plan_from, normalized_cost_wmlmc, optimal_theta_oracle, wmlmc_plan, StepInput,
};

fn single_cost(chain: &[wmlmc::level_stats::LevelMoments], v: f64) -> f64 {
    let top = chain.last().unwrap();
    (top.sigma_fine * top.eta / v).powi(2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn weighted_beats_unweighted_beats_single(seed in any::<u64>(), levels in 1usize..10, v in 0.001f64..1.0) {
        let chain = random_chain(seed, levels);
        let wm = wmlmc_plan(&chain, v).unwrap().planned_cost();
        let ml = mlmc_plan(&chain, v).unwrap().planned_cost();
        let single = single_cost(&chain, v);
        prop_assert!(wm <= ml * (1.0 + 1e-12));
        prop_assert!(ml <= single * (1.0 + 1e-12));
    }

    #[test]
    fn unit_weights_reproduce_mlmc(seed in any::<u64>(), levels in 2usize..10, v in 0.001f64..1.0) {
        let chain = random_chain(seed, levels);
        let fixed = fixed_weight_plan(&chain, v, &vec![1.0; levels - 1]).unwrap();
        let ml = mlmc_plan_from(&chain, v, 0).unwrap();
        prop_assert_eq!(fixed.n_samples, ml.n_samples);
        prop_assert_eq!(fixed.big_theta, ml.big_theta);
        prop_assert_eq!(fixed.levels.last().unwrap().e_cum, ml.levels.last().unwrap().e_cum);
    }

    #[test]
    fn continuous_counts_hit_the_variance_target(seed in any::<u64>(), levels in 1usize..10, v in 0.001f64..1.0) {
        let plan = wmlmc_plan(&random_chain(seed, levels), v).unwrap();
        let n = plan.continuous_samples();
        let var: f64 = plan
            .levels
            .iter()
            .filter(|lp| lp.active)
            .map(|lp| (plan.big_theta[lp.level] * lp.delta).powi(2) / n[lp.level])
            .sum();
        prop_assert!(rel(var, v * v) < 1e-9);
        let cost: f64 = plan.levels.iter().map(|lp| n[lp.level] * lp.eta * lp.eta).sum();
        prop_assert!(rel(cost, plan.planned_cost()) < 1e-9);
    }

    #[test]
    fn closed_form_weight_matches_brute_force(
        sigma_prev in 0.2f64..3.0,
        sigma in 0.2f64..3.0,
        rho in -0.999f64..0.999,
        eta in 1.0f64..8.0,
        e_prev in 0.5f64..50.0,
        v in 0.05f64..1.0,
    ) {
        let si = StepInput { sigma_prev, sigma, rho, eta, e_prev, v };
        let step = si.optimal();
        let (t, c) = optimal_theta_oracle(sigma_prev, sigma, rho, eta, e_prev, v);
        prop_assert!((step.theta - t).abs() < 1e-7, "closed {} oracle {}", step.theta, t);
        prop_assert!(c >= step.e * (1.0 - 1e-9));
    }

    #[test]
    fn normalized_recursion_matches_plans(rhos in prop::collection::vec(0.0f64..1.0, 1..6)) {
        let chain = equal_sigma_chain(&rhos);
        let plan = wmlmc_plan(&chain, 1.0).unwrap();
        let mus: Vec<f64> = (1..chain.len()).map(|l| chain[l - 1].eta / chain[l].eta).collect();
        let seq = normalized_cost_wmlmc(&rhos, &mus);
        for (l, lp) in plan.levels.iter().enumerate() {
            prop_assert!(rel(lp.e_cum / lp.eta, seq.deltas[l]) < 1e-12);
            prop_assert!(seq.deltas[l] <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn accumulator_merge_is_split_invariant(
        xs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..200),
        cut in 0usize..200,
    ) {
        let cut = cut % xs.len();
        let fill = |part: &[(f64, f64)]| {
            let mut a = MomentAccumulator::new();
            for &(f, c) in part {
                a.update(f, Some(c), 1.0);
            }
            a
        };
        let whole = fill(&xs);
        let merged = fill(&xs[..cut]).merge(&fill(&xs[cut..]));
        prop_assert_eq!(whole.n, merged.n);
        let scale = 1.0 + whole.m2_fine.abs();
        prop_assert!((whole.mean_fine - merged.mean_fine).abs() < 1e-12 * 10.0);
        prop_assert!((whole.m2_fine - merged.m2_fine).abs() < 1e-10 * scale);
        prop_assert!((whole.comoment - merged.comoment).abs() < 1e-10 * (1.0 + whole.comoment.abs()));
        prop_assert!((whole.m2_y - merged.m2_y).abs() < 1e-10 * (1.0 + whole.m2_y.abs()));
    }

    #[test]
    fn formatted_numbers_parse_back_to_rounded_value(x in prop::num::f64::NORMAL) {
        let s = fmt_num(x);
        prop_assert_eq!(s.parse::<f64>().unwrap(), round_sig(x));
        prop_assert_eq!(fmt_num(round_sig(x)), s);
    }
}
