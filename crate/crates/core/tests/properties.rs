mod common;

use coachres::linprog::{solve_lp, solve_mip, LpOptions, MipOptions, Model, Sense, Status};
use coachres::offline::{packability, solve_offline, solve_offline_fcfs, solve_offline_lp, FcfsConfig, OfflineOptions};
use coachres::policies::{FirstFit, Policy, RandomFit, Sfcfs};
use coachres::sim::{audit_fcfs, audit_sfcfs, plan_utilization, rng_stream, run_policy, DaySchedule, Purpose};
use coachres::domain::{validate_plan, ResidualCapacity};
use common::{brute_force_offline, tiny_instance};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Knapsacks {
    objective: Vec<i32>,
    rows: Vec<(Vec<u8>, u8)>,
}

fn knapsacks() -> impl Strategy<Value = Knapsacks> {
    (1usize..=12).prop_flat_map(|n| {
        (
            prop::collection::vec(-3i32..=12, n),
            prop::collection::vec((prop::collection::vec(0u8..=5, n), 0u8..=15), 1..=4),
        )
            .prop_map(|(objective, rows)| Knapsacks { objective, rows })
    })
}

fn model_of(k: &Knapsacks) -> Model {
    let mut m = Model::new("k");
    let vars: Vec<_> = k
        .objective
        .iter()
        .enumerate()
        .map(|(j, &c)| m.add_binary(format!("x{j}"), c as f64))
        .collect();
    for (i, (a, b)) in k.rows.iter().enumerate() {
        let coeffs = vars.iter().zip(a).map(|(&v, &c)| (v, c as f64)).collect();
        m.add_constraint(format!("r{i}"), coeffs, Sense::Le, *b as f64);
    }
    m
}

fn enumerate(k: &Knapsacks) -> f64 {
    let n = k.objective.len();
    (0u32..1 << n)
        .filter(|mask| {
            k.rows.iter().all(|(a, b)| {
                let lhs: u32 = (0..n).filter(|j| mask >> j & 1 == 1).map(|j| a[j] as u32).sum();
                lhs <= *b as u32
            })
        })
        .map(|mask| (0..n).filter(|j| mask >> j & 1 == 1).map(|j| k.objective[j]).sum::<i32>())
        .max()
        .unwrap() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mip_matches_enumeration(k in knapsacks()) {
        let m = model_of(&k);
        let s = solve_mip(&m, None, &MipOptions::default()).unwrap();
        prop_assert_eq!(s.status, Status::Optimal);
        prop_assert_eq!(s.objective, enumerate(&k));
        prop_assert!(m.max_violation(&s.values) <= 1e-9);
        let lp = solve_lp(&m, &LpOptions::default()).unwrap();
        prop_assert!(lp.objective >= s.objective - 1e-9);
    }

    #[test]
    fn relaxation_dominates_and_fcfs_is_dominated(seed in 0u64..5_000) {
        let inst = tiny_instance(seed);
        let reqs = inst.requests();
        let ip = solve_offline(&inst, &reqs, &OfflineOptions::default()).unwrap();
        let lp = solve_offline_lp(&inst, &reqs).unwrap();
        prop_assert!(lp.objective >= ip.value.as_f64() - 1e-6);
        prop_assert_eq!(ip.value.0, brute_force_offline(&inst));
        let fcfs = solve_offline_fcfs(&inst, &reqs, &FcfsConfig { seed, ..FcfsConfig::default() }).unwrap();
        prop_assert!(fcfs.value <= ip.value);
        prop_assert!(audit_fcfs(&inst, &reqs, &fcfs.plan).is_empty());
    }

    #[test]
    fn harness_invariants(seed in 0u64..5_000) {
        let inst = tiny_instance(seed);
        let reqs = inst.requests();
        let exact = solve_offline(&inst, &reqs, &OfflineOptions::default()).unwrap().value;
        let schedule = DaySchedule { horizon: reqs.len(), days: 3 };
        let mut policies: Vec<Box<dyn Policy>> = vec![
            Box::new(FirstFit),
            Box::new(RandomFit::new(rng_stream(seed, 0, Purpose::Policy))),
            Box::new(Sfcfs::new(None)),
        ];
        for p in policies.iter_mut() {
            let t = run_policy(&inst, p.as_mut(), schedule).unwrap();
            prop_assert!(validate_plan(&t.plan, &inst.train, &inst.types, inst.leg_count(), &reqs).is_empty());
            prop_assert!(t.revenue <= exact);
            prop_assert!(t.daily_revenue.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(t.daily_utilization.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!((t.utilization() - plan_utilization(&inst, &t.plan)).abs() < 1e-12);
            prop_assert!(t.utilization() <= 1.0);
            if p.name() == "SFCFS" {
                prop_assert!(audit_sfcfs(&inst, &reqs, &t.plan, None).unwrap().violations.is_empty());
                let accepted: Vec<_> = t.plan.assignments.keys().copied().collect();
                prop_assert!(packability(&inst, &accepted, None).unwrap().is_packable());
            } else {
                prop_assert!(audit_fcfs(&inst, &reqs, &t.plan).is_empty());
            }
        }
    }

    #[test]
    fn residual_capacity_round_trip(seed in 0u64..5_000) {
        let inst = tiny_instance(seed);
        let mut kappa = ResidualCapacity::full(&inst.train, inst.leg_count());
        let before = kappa.total_free();
        let mut used = 0u64;
        for r in inst.requests() {
            let t = inst.type_of(&r);
            if let Some(c) = kappa.first_feasible(t) {
                prop_assert!(kappa.fits(t, c));
                kappa.assign(t, c).unwrap();
                used += t.group_size as u64 * t.legs().len() as u64;
            } else {
                prop_assert!(kappa.feasible_coaches(t).is_empty());
                prop_assert!(!kappa.any_feasible(t));
            }
        }
        prop_assert_eq!(before - kappa.total_free(), used);
    }
}
