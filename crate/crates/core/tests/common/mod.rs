#![allow(dead_code)]

use coachres::domain::{AssignmentPlan, Coach, Network, Request, RequestType, ResidualCapacity, Train, TypeId, Yen};
use coachres::instance::Instance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random instance with at most 2 coaches of up to 4 seats, 3 legs and 8
/// requests.
pub fn tiny_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let legs = rng.random_range(1..=3);
    let caps: Vec<u32> = (0..rng.random_range(1..=2)).map(|_| rng.random_range(1..=4)).collect();
    let widest = *caps.iter().min().unwrap();
    let k = rng.random_range(1..=4);
    let types: Vec<RequestType> = (0..k)
        .map(|_| {
            let o = rng.random_range(1..=legs);
            let d = rng.random_range(o + 1..=legs + 1);
            let n = rng.random_range(1..=widest);
            RequestType::new(o, d, n, Yen(rng.random_range(1..=20)), 1.0 / k as f64).unwrap()
        })
        .collect();
    let arrivals: Vec<TypeId> = (0..rng.random_range(1..=8)).map(|_| TypeId(rng.random_range(0..k))).collect();
    Instance::new(Network::path(legs + 1).unwrap(), Train::new(caps).unwrap(), types)
        .unwrap()
        .with_arrivals(arrivals)
        .unwrap()
}

fn price(inst: &Instance, r: &Request) -> u64 {
    inst.type_of(r).price.0
}

/// Best revenue over every capacity-feasible choice of reject-or-coach.
pub fn brute_force_offline(inst: &Instance) -> u64 {
    fn go(inst: &Instance, reqs: &[Request], k: usize, kappa: &mut ResidualCapacity) -> u64 {
        if k == reqs.len() {
            return 0;
        }
        let t = inst.type_of(&reqs[k]);
        let mut best = go(inst, reqs, k + 1, kappa);
        for c in 0..kappa.coach_count() {
            if kappa.fits(t, Coach(c)) {
                let saved = kappa.clone();
                kappa.assign(t, Coach(c)).unwrap();
                best = best.max(price(inst, &reqs[k]) + go(inst, reqs, k + 1, kappa));
                *kappa = saved;
            }
        }
        best
    }
    let reqs = inst.requests();
    go(inst, &reqs, 0, &mut ResidualCapacity::full(&inst.train, inst.leg_count()))
}

/// Every reject-or-coach vector for `order`, kept when capacity holds and
/// no rejected request fit some coach at its arrival.
pub fn brute_force_fcfs(inst: &Instance, order: &[Request]) -> u64 {
    let coaches = inst.train.coach_count();
    let mut choice = vec![0usize; order.len()];
    let mut best = 0;
    loop {
        let mut kappa = ResidualCapacity::full(&inst.train, inst.leg_count());
        let mut ok = true;
        let mut value = 0;
        for (r, &ch) in order.iter().zip(&choice) {
            let t = inst.type_of(r);
            if ch == 0 {
                if kappa.any_feasible(t) {
                    ok = false;
                    break;
                }
            } else if kappa.assign(t, Coach(ch - 1)).is_ok() {
                value += price(inst, r);
            } else {
                ok = false;
                break;
            }
        }
        if ok {
            best = best.max(value);
        }
        let mut k = 0;
        loop {
            if k == choice.len() {
                return best;
            }
            choice[k] += 1;
            if choice[k] <= coaches {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

pub fn plan_value(inst: &Instance, plan: &AssignmentPlan) -> u64 {
    plan.assignments.keys().map(|r| price(inst, r)).sum()
}
