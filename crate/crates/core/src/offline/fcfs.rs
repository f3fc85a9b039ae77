//! First-come first-served offline model: a request may only be rejected
//! if, at its arrival, every coach is already too full on some leg of its
//! itinerary.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{add_assignment_block, OfflineError};
use crate::domain::{plan_revenue, AssignmentPlan, Coach, Request, ResidualCapacity, Yen};
use crate::instance::Instance;
use crate::linprog::{
    solve_mip, Constraint, CutCallback, CutOutcome, MipOptions, Model, Sense, Status, VarId,
};

/// `z[(request, leg, coach)]`: the leg that blocks the coach for a
/// rejected request.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FairnessVariables {
    pub z: BTreeMap<(Request, usize, Coach), VarId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcfsVars {
    pub x: Vec<Vec<VarId>>,
    pub y: Vec<VarId>,
    pub z: FairnessVariables,
}

impl FcfsVars {
    fn plan(&self, order: &[Request], values: &[f64]) -> AssignmentPlan {
        let mut plan = AssignmentPlan::new();
        for (i, r) in order.iter().enumerate() {
            match self.x[i].iter().position(|v| values[v.0] > 0.5) {
                Some(c) => plan.assign(*r, Coach(c)),
                None => plan.reject(*r),
            }
        }
        plan
    }

    /// Variable vector for a fair plan, with each rejected request's
    /// fairness variable set on the first blocking leg of every coach.
    fn point(&self, inst: &Instance, order: &[Request], plan: &AssignmentPlan, nvars: usize) -> Vec<f64> {
        let mut v = vec![0.0; nvars];
        let mut kappa = ResidualCapacity::full(&inst.train, inst.leg_count());
        for (i, r) in order.iter().enumerate() {
            let t = inst.type_of(r);
            match plan.coach_of(r) {
                Some(c) => {
                    v[self.x[i][c.0].0] = 1.0;
                    v[self.y[i].0] = 1.0;
                    let _ = kappa.assign(t, c);
                }
                None => {
                    for c in inst.train.coaches() {
                        if let Some(l) = t.legs().iter().find(|&l| kappa.free(c, l) < t.group_size) {
                            if let Some(z) = self.z.z.get(&(*r, l, c)) {
                                v[z.0] = 1.0;
                            }
                        }
                    }
                }
            }
        }
        v
    }
}

fn add_fairness_vars(m: &mut Model, inst: &Instance, order: &[Request]) -> FairnessVariables {
    let mut z = BTreeMap::new();
    for r in order {
        for l in inst.type_of(r).legs().iter() {
            for c in inst.train.coaches() {
                let v = m.add_binary(format!("z_{}_{l}_{}", r.arrival_index, c.number()), 0.0);
                z.insert((*r, l, c), v);
            }
        }
    }
    FairnessVariables { z }
}

/// `y_r + sum_l z_{r,l,c} = 1`: a rejected request names one blocking leg
/// per coach.
fn activation_row(inst: &Instance, order: &[Request], vars: &FcfsVars, pos: usize, c: Coach) -> Constraint {
    let r = order[pos];
    let mut coeffs = vec![(vars.y[pos], 1.0)];
    for l in inst.type_of(&r).legs().iter() {
        coeffs.push((vars.z.z[&(r, l, c)], 1.0));
    }
    Constraint::new(format!("act_{}_{}", r.arrival_index, c.number()), coeffs, Sense::Eq, 1.0)
}

/// One lazily separated rejection cut: earlier load of `coach` on `leg`
/// must reach `threshold` seats before `leg` may block `request`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FairnessCut {
    pub position: usize,
    pub request: Request,
    pub leg: usize,
    pub coach: Coach,
    pub threshold: u32,
}

impl FairnessCut {
    fn new(inst: &Instance, order: &[Request], position: usize, leg: usize, coach: Coach) -> Self {
        let r = order[position];
        let n = inst.type_of(&r).group_size;
        Self {
            position,
            request: r,
            leg,
            coach,
            threshold: inst.train.capacity(coach) - n + 1,
        }
    }

    pub fn to_constraint(&self, inst: &Instance, order: &[Request], vars: &FcfsVars) -> Constraint {
        let mut coeffs: Vec<(VarId, f64)> = order[..self.position]
            .iter()
            .enumerate()
            .filter(|(_, r)| inst.type_of(r).legs().contains(self.leg))
            .map(|(i, r)| (vars.x[i][self.coach.0], inst.type_of(r).group_size as f64))
            .collect();
        coeffs.push((vars.z.z[&(self.request, self.leg, self.coach)], -(self.threshold as f64)));
        Constraint::new(
            format!("fair_{}_{}_{}", self.request.arrival_index, self.leg, self.coach.number()),
            coeffs,
            Sense::Ge,
            0.0,
        )
    }
}

/// Full model: assignment block, fairness variables, activation rows and
/// every rejection row.
pub fn build_fcfs_model(inst: &Instance, order: &[Request]) -> Result<(Model, FcfsVars), OfflineError> {
    if order.is_empty() {
        return Err(OfflineError::NoRequests);
    }
    let mut m = Model::new("fcfs");
    let (x, y) = add_assignment_block(&mut m, inst, order);
    let z = add_fairness_vars(&mut m, inst, order);
    let vars = FcfsVars { x, y, z };
    for pos in 0..order.len() {
        for c in inst.train.coaches() {
            m.constraints.push(activation_row(inst, order, &vars, pos, c));
            for l in inst.type_of(&order[pos]).legs().iter() {
                let cut = FairnessCut::new(inst, order, pos, l, c);
                m.constraints.push(cut.to_constraint(inst, order, &vars));
            }
        }
    }
    Ok((m, vars))
}

/// Position of the earliest request that `plan` rejects although some
/// coach could take it, and the first such coach.
pub fn first_unfair_rejection(inst: &Instance, order: &[Request], plan: &AssignmentPlan) -> Option<(usize, Coach)> {
    let mut kappa = ResidualCapacity::full(&inst.train, inst.leg_count());
    for (i, r) in order.iter().enumerate() {
        let t = inst.type_of(r);
        match plan.coach_of(r) {
            Some(c) => {
                let _ = kappa.assign(t, c);
            }
            None => {
                if let Some(c) = kappa.first_feasible(t) {
                    return Some((i, c));
                }
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Separation {
    Certified,
    Cuts {
        position: usize,
        coach: Coach,
        cuts: Vec<FairnessCut>,
    },
}

/// Rejection cuts for the earliest unfair rejection and its first
/// feasible coach, one per leg of the itinerary.
pub fn separate_unfair_rejection(inst: &Instance, order: &[Request], plan: &AssignmentPlan) -> Separation {
    match first_unfair_rejection(inst, order, plan) {
        None => Separation::Certified,
        Some((position, coach)) => Separation::Cuts {
            position,
            coach,
            cuts: inst
                .type_of(&order[position])
                .legs()
                .iter()
                .map(|l| FairnessCut::new(inst, order, position, l, coach))
                .collect(),
        },
    }
}

/// Later load on a blocking leg must fit in the seats left free there:
/// `sum_{r' > r, l in L(r')} n(r') x_{r',c} <= (1 - z) w_c + (n(r) - 1) z`.
pub fn forward_filtering_cuts(inst: &Instance, order: &[Request], vars: &FcfsVars) -> Vec<Constraint> {
    let mut out = Vec::new();
    for (pos, r) in order.iter().enumerate() {
        let t = inst.type_of(r);
        for l in t.legs().iter() {
            for c in inst.train.coaches() {
                let mut coeffs: Vec<(VarId, f64)> = order[pos + 1..]
                    .iter()
                    .enumerate()
                    .filter(|(_, q)| inst.type_of(q).legs().contains(l))
                    .map(|(k, q)| (vars.x[pos + 1 + k][c.0], inst.type_of(q).group_size as f64))
                    .collect();
                if coeffs.is_empty() {
                    continue;
                }
                let w = inst.train.capacity(c) as f64;
                coeffs.push((vars.z.z[&(*r, l, c)], w - t.group_size as f64 + 1.0));
                out.push(Constraint::new(
                    format!("ff_{}_{l}_{}", r.arrival_index, c.number()),
                    coeffs,
                    Sense::Le,
                    w,
                ));
            }
        }
    }
    out
}

/// For each request, the earlier requests with a sub-itinerary and a
/// group no larger; seating the request implies seating all of them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DominanceRelation {
    pub dominated_by: BTreeMap<Request, Vec<Request>>,
}

pub fn dominance_relation(inst: &Instance, order: &[Request]) -> DominanceRelation {
    let mut rel = BTreeMap::new();
    for (i, r) in order.iter().enumerate() {
        let t = inst.type_of(r);
        let set: Vec<Request> = order[..i]
            .iter()
            .filter(|q| {
                let u = inst.type_of(q);
                u.legs().is_subset_of(t.legs()) && u.group_size <= t.group_size
            })
            .copied()
            .collect();
        rel.insert(*r, set);
    }
    DominanceRelation { dominated_by: rel }
}

/// `y_{t,k} >= y_{t,k+1}` for consecutive requests of one type.
pub fn precedence_cuts(order: &[Request], y: &[VarId]) -> Vec<Constraint> {
    let mut last: BTreeMap<usize, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for (i, r) in order.iter().enumerate() {
        if let Some(&p) = last.get(&r.type_id.0) {
            out.push(Constraint::new(
                format!("prec_{}_{}", order[p].arrival_index, r.arrival_index),
                vec![(y[p], 1.0), (y[i], -1.0)],
                Sense::Ge,
                0.0,
            ));
        }
        last.insert(r.type_id.0, i);
    }
    out
}

/// Dominance rows `sum_{r' in D(r)} y_{r'} >= |D(r)| y_r` for nonempty
/// sets, followed by the same-type precedence chains.
pub fn dominance_cuts(inst: &Instance, order: &[Request], vars: &FcfsVars) -> Vec<Constraint> {
    let rel = dominance_relation(inst, order);
    let pos: BTreeMap<Request, usize> = order.iter().enumerate().map(|(i, r)| (*r, i)).collect();
    let mut out = Vec::new();
    for (i, r) in order.iter().enumerate() {
        let set = &rel.dominated_by[r];
        if set.is_empty() {
            continue;
        }
        let mut coeffs: Vec<(VarId, f64)> = set.iter().map(|q| (vars.y[pos[q]], 1.0)).collect();
        coeffs.push((vars.y[i], -(set.len() as f64)));
        out.push(Constraint::new(format!("dom_{}", r.arrival_index), coeffs, Sense::Ge, 0.0));
    }
    out.extend(precedence_cuts(order, &vars.y));
    out
}

/// Requests whose earlier demand on every leg of their itinerary is at
/// most `(1 - delta)` of the seats on that leg.
pub fn preprocess_forced_assignments(inst: &Instance, order: &[Request], delta: f64) -> BTreeSet<Request> {
    let legs = inst.leg_count();
    let seats = inst.train.total_seats() as f64;
    let limit = (1.0 - delta) * seats + 1e-9;
    let mut demand = vec![0u64; legs + 1];
    let mut out = BTreeSet::new();
    for r in order {
        let t = inst.type_of(r);
        if t.legs().iter().all(|l| demand[l] as f64 <= limit) {
            out.insert(*r);
        }
        for l in t.legs().iter() {
            demand[l] += t.group_size as u64;
        }
    }
    out
}

/// Requests that some coach can take in every plan: on each leg, count
/// how many coaches the earlier demand could possibly block, and require
/// the total over the itinerary to stay below the number of coaches.
pub fn sound_forced_assignments(inst: &Instance, order: &[Request]) -> BTreeSet<Request> {
    let legs = inst.leg_count();
    let mut caps: Vec<u32> = inst.train.coach_capacities().to_vec();
    caps.sort_unstable();
    let mut demand = vec![0u64; legs + 1];
    let mut out = BTreeSet::new();
    for r in order {
        let t = inst.type_of(r);
        let n = t.group_size;
        let mut blockable = 0usize;
        for l in t.legs().iter() {
            let mut used = 0u64;
            for &w in &caps {
                let need = (w - n + 1) as u64;
                if used + need > demand[l] {
                    break;
                }
                used += need;
                blockable += 1;
            }
        }
        if blockable < caps.len() {
            out.insert(*r);
        }
        for l in t.legs().iter() {
            demand[l] += n as u64;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcfsConfig {
    pub time_limit: Option<Duration>,
    pub node_limit: usize,
    /// Seed of the RandomFit warm start and repair.
    pub seed: u64,
    pub precedence: bool,
    pub forward_filtering: bool,
    pub dominance: bool,
    /// Fix acceptance of requests that pass both the occupancy test and
    /// the per-leg blocking count.
    pub preprocess: bool,
    pub warm_start: bool,
}

impl Default for FcfsConfig {
    fn default() -> Self {
        Self {
            time_limit: Some(Duration::from_secs(30)),
            node_limit: 50_000,
            seed: 0,
            precedence: true,
            forward_filtering: false,
            dominance: false,
            preprocess: true,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FcfsStats {
    pub status: String,
    pub incumbent: f64,
    pub bound: f64,
    pub gap_percent: f64,
    pub nodes: usize,
    pub cuts: usize,
    pub separation_rounds: usize,
    pub repaired_incumbents: usize,
    pub forced: usize,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcfsSolution {
    pub plan: AssignmentPlan,
    pub value: Yen,
    pub bound: f64,
    /// Relative gap, as a fraction.
    pub gap: f64,
    pub status: Status,
    pub stats: FcfsStats,
}

fn random_fit_from(
    inst: &Instance,
    order: &[Request],
    start: usize,
    prefix: &AssignmentPlan,
    rng: &mut ChaCha8Rng,
) -> AssignmentPlan {
    let mut plan = AssignmentPlan::new();
    let mut kappa = ResidualCapacity::full(&inst.train, inst.leg_count());
    for (i, r) in order.iter().enumerate() {
        let t = inst.type_of(r);
        let choice = if i < start {
            prefix.coach_of(r)
        } else {
            let feas = kappa.feasible_coaches(t);
            (!feas.is_empty()).then(|| feas[rng.random_range(0..feas.len())])
        };
        match choice {
            Some(c) if kappa.assign(t, c).is_ok() => plan.assign(*r, c),
            _ => plan.reject(*r),
        }
    }
    plan
}

struct Separator<'a> {
    inst: &'a Instance,
    order: &'a [Request],
    vars: &'a FcfsVars,
    nvars: usize,
    activated: BTreeSet<(usize, Coach)>,
    rng: ChaCha8Rng,
    rounds: usize,
    repaired: usize,
}

impl CutCallback for Separator<'_> {
    fn separate(&mut self, values: &[f64]) -> CutOutcome {
        let plan = self.vars.plan(self.order, values);
        let Separation::Cuts { position, coach, cuts } = separate_unfair_rejection(self.inst, self.order, &plan) else {
            return CutOutcome::certified();
        };
        self.rounds += 1;
        let mut rows = Vec::new();
        if self.activated.insert((position, coach)) {
            rows.push(activation_row(self.inst, self.order, self.vars, position, coach));
        }
        rows.extend(cuts.iter().map(|c| c.to_constraint(self.inst, self.order, self.vars)));
        let repaired = random_fit_from(self.inst, self.order, position, &plan, &mut self.rng);
        self.repaired += 1;
        CutOutcome {
            cuts: rows,
            incumbent: Some(self.vars.point(self.inst, self.order, &repaired, self.nvars)),
        }
    }
}

/// Branch-and-cut for the FCFS model: rejection rows are separated lazily
/// from integral solutions, and each separated solution's fair prefix is
/// completed by RandomFit into a new incumbent.
pub fn solve_offline_fcfs(inst: &Instance, order: &[Request], cfg: &FcfsConfig) -> Result<FcfsSolution, OfflineError> {
    if order.is_empty() {
        return Err(OfflineError::NoRequests);
    }
    let start = Instant::now();
    let mut m = Model::new("fcfs_master");
    let (x, y) = add_assignment_block(&mut m, inst, order);
    let z = add_fairness_vars(&mut m, inst, order);
    let vars = FcfsVars { x, y, z };
    if cfg.precedence && !cfg.dominance {
        m.constraints.extend(precedence_cuts(order, &vars.y));
    }
    if cfg.dominance {
        m.constraints.extend(dominance_cuts(inst, order, &vars));
    }
    if cfg.forward_filtering {
        m.constraints.extend(forward_filtering_cuts(inst, order, &vars));
    }
    let mut forced = 0;
    if cfg.preprocess {
        let delta = crate::domain::max_group_fraction(&inst.types, &inst.train);
        let occupancy = preprocess_forced_assignments(inst, order, delta);
        let sound = sound_forced_assignments(inst, order);
        for (i, r) in order.iter().enumerate() {
            if occupancy.contains(r) && sound.contains(r) {
                m.vars[vars.y[i].0].lower = 1.0;
                forced += 1;
            }
        }
    }
    let nvars = m.vars.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let initial = cfg.warm_start.then(|| {
        let plan = random_fit_from(inst, order, 0, &AssignmentPlan::new(), &mut rng);
        vars.point(inst, order, &plan, nvars)
    });
    let mut sep = Separator {
        inst,
        order,
        vars: &vars,
        nvars,
        activated: BTreeSet::new(),
        rng,
        rounds: 0,
        repaired: 0,
    };
    let opts = MipOptions {
        time_limit: cfg.time_limit,
        node_limit: cfg.node_limit,
        initial_incumbent: initial,
        ..MipOptions::default()
    };
    let sol = solve_mip(&m, Some(&mut sep), &opts)?;
    if !sol.has_solution() {
        return Err(OfflineError::NoPlan(sol.status));
    }
    let plan = vars.plan(order, &sol.values);
    let value = plan_revenue(&plan, &inst.types);
    let bound = sol.bound.max(value.as_f64());
    let gap = if sol.status == Status::Optimal || bound <= 0.0 {
        0.0
    } else {
        (bound - value.as_f64()) / bound
    };
    let stats = FcfsStats {
        status: format!("{:?}", sol.status),
        incumbent: value.as_f64(),
        bound,
        gap_percent: 100.0 * gap,
        nodes: sol.nodes,
        cuts: sol.cuts_added,
        separation_rounds: sep.rounds,
        repaired_incumbents: sep.repaired,
        forced,
        elapsed_ms: start.elapsed().as_millis(),
    };
    Ok(FcfsSolution {
        plan,
        value,
        bound,
        gap,
        status: sol.status,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Network, RequestType, Train, TypeId};
    use crate::offline::tests::toy;

    #[test]
    fn toy_orders() {
        let (inst, order) = toy(&[1, 2, 0]);
        let s = solve_offline_fcfs(&inst, &order, &FcfsConfig::default()).unwrap();
        assert_eq!(s.value, Yen(8));
        assert_eq!(s.gap, 0.0);
        assert_eq!(first_unfair_rejection(&inst, &order, &s.plan), None);

        let (inst, order) = toy(&[0, 1, 2]);
        let s = solve_offline_fcfs(&inst, &order, &FcfsConfig::default()).unwrap();
        assert_eq!(s.value, Yen(10));
        assert_eq!(s.gap, 0.0);
    }

    #[test]
    fn full_model_matches_driver_on_toy() {
        for order in [[1, 2, 0], [0, 1, 2], [2, 0, 1]] {
            let (inst, reqs) = toy(&order);
            let (m, _) = build_fcfs_model(&inst, &reqs).unwrap();
            let full = solve_mip(&m, None, &MipOptions::default()).unwrap();
            let bc = solve_offline_fcfs(&inst, &reqs, &FcfsConfig::default()).unwrap();
            assert_eq!(full.objective, bc.value.as_f64(), "order {order:?}");
        }
    }

    #[test]
    fn separation_on_toy() {
        let (inst, order) = toy(&[1, 2, 0]);
        let mut plan = AssignmentPlan::new();
        plan.reject(order[0]);
        plan.reject(order[1]);
        plan.assign(order[2], Coach(0));
        match separate_unfair_rejection(&inst, &order, &plan) {
            Separation::Cuts { position, coach, cuts } => {
                assert_eq!((position, coach), (0, Coach(0)));
                assert_eq!(cuts.len(), 1);
                assert_eq!(cuts[0].leg, 1);
                assert_eq!(cuts[0].threshold, 2);
            }
            Separation::Certified => panic!("r2 was rejected on an empty train"),
        }
        let mut all = AssignmentPlan::new();
        for r in &order[..2] {
            all.assign(*r, Coach(0));
        }
        all.reject(order[2]);
        assert_eq!(separate_unfair_rejection(&inst, &order, &all), Separation::Certified);
    }

    #[test]
    fn figure2_pair_forces_small_group() {
        // One coach with free seats [6, 7, 22, 9] modelled as a 6-seat coach
        // on leg 1; a 1-seat request on leg 1 then a 6-seat full-length group.
        let types = vec![
            RequestType::new(1, 2, 1, Yen(3_080), 0.5).unwrap(),
            RequestType::new(1, 5, 6, Yen(6 * 14_720), 0.5).unwrap(),
        ];
        let inst = Instance::new(Network::path(5).unwrap(), Train::uniform(1, 6).unwrap(), types)
            .unwrap()
            .with_arrivals(vec![TypeId(0), TypeId(1)])
            .unwrap();
        let order = inst.requests();
        let s = solve_offline_fcfs(&inst, &order, &FcfsConfig::default()).unwrap();
        assert_eq!(s.plan.coach_of(&order[0]), Some(Coach(0)));
        assert!(s.plan.rejected.contains(&order[1]));
    }

    #[test]
    fn forward_filtering_substitution() {
        let (inst, order) = toy(&[0, 1, 2]);
        let (m, vars) = build_fcfs_model(&inst, &order).unwrap();
        let ff = forward_filtering_cuts(&inst, &order, &vars);
        let row = ff
            .iter()
            .find(|c| c.name == "ff_1_1_1")
            .expect("r1 has a later leg-1 request");
        // z = 1 for r1 (n = 2) on leg 1: later leg-1 load <= 1.
        let mut v = vec![0.0; m.vars.len()];
        v[vars.z.z[&(order[0], 1, Coach(0))].0] = 1.0;
        v[vars.x[1][0].0] = 1.0;
        assert_eq!(row.violation(&v), 0.0);
        let with_z_off = {
            let mut w = v.clone();
            w[vars.z.z[&(order[0], 1, Coach(0))].0] = 0.0;
            w
        };
        assert_eq!(row.violation(&with_z_off), 0.0);
        assert!((row.rhs - 2.0).abs() < 1e-12);
    }

    #[test]
    fn precedence_and_dominance() {
        let types = vec![
            RequestType::new(1, 2, 1, Yen(1), 0.5).unwrap(),
            RequestType::new(1, 2, 4, Yen(1), 0.25).unwrap(),
            RequestType::new(1, 2, 3, Yen(1), 0.25).unwrap(),
        ];
        let inst = Instance::new(Network::path(2).unwrap(), Train::uniform(1, 6).unwrap(), types)
            .unwrap()
            .with_arrivals(vec![TypeId(0), TypeId(0)])
            .unwrap();
        let order = inst.requests();
        let (_, vars) = build_fcfs_model(&inst, &order).unwrap();
        let prec = precedence_cuts(&order, &vars.y);
        assert_eq!(prec.len(), 1);
        assert_eq!(prec[0].coeffs, vec![(vars.y[0], 1.0), (vars.y[1], -1.0)]);

        // A 4-seat group followed by a 3-seat group on the same legs: the
        // later one dominates nothing earlier, so no row.
        let inst = inst.with_arrivals(vec![TypeId(1), TypeId(2)]).unwrap();
        let order = inst.requests();
        let (_, vars) = build_fcfs_model(&inst, &order).unwrap();
        assert!(dominance_cuts(&inst, &order, &vars).is_empty());
        let rel = dominance_relation(&inst, &order);
        assert!(rel.dominated_by.values().all(Vec::is_empty));
    }

    #[test]
    fn occupancy_test_examples() {
        let types = vec![RequestType::new(1, 2, 1, Yen(1), 1.0).unwrap()];
        let inst = Instance::new(Network::path(2).unwrap(), Train::uniform(1, 10).unwrap(), types).unwrap();
        let order = crate::domain::requests_from_types(&vec![TypeId(0); 10]);
        let forced = preprocess_forced_assignments(&inst, &order, 0.2);
        // Prior demand i - 1 <= 8 for the first nine.
        assert!(forced.contains(&order[0]));
        assert!(forced.contains(&order[8]));
        assert!(!forced.contains(&order[9]));
    }

    #[test]
    fn occupancy_test_alone_can_cut_off_the_optimum() {
        // Two 4-seat coaches. Pairs a, b on leg 1 and c, d on leg 2 can fill
        // different coaches, so the cheap full-length pair e may be blocked,
        // leaving room for both pricier leg-2 pairs after it.
        let types = vec![
            RequestType::new(1, 2, 2, Yen(2), 0.25).unwrap(),
            RequestType::new(2, 3, 2, Yen(2), 0.25).unwrap(),
            RequestType::new(1, 3, 2, Yen(3), 0.25).unwrap(),
            RequestType::new(2, 3, 2, Yen(5), 0.25).unwrap(),
        ];
        let arrivals = [0, 0, 1, 1, 2, 3, 3].map(TypeId).to_vec();
        let inst = Instance::new(Network::path(3).unwrap(), Train::uniform(2, 4).unwrap(), types)
            .unwrap()
            .with_arrivals(arrivals)
            .unwrap();
        let order = inst.requests();
        let e = order[4];
        assert!(preprocess_forced_assignments(&inst, &order, 0.5).contains(&e));
        assert!(!sound_forced_assignments(&inst, &order).contains(&e));

        let (mut m, vars) = build_fcfs_model(&inst, &order).unwrap();
        let free = solve_mip(&m, None, &MipOptions::default()).unwrap();
        assert_eq!(free.objective, 18.0);
        m.vars[vars.y[4].0].lower = 1.0;
        let forced = solve_mip(&m, None, &MipOptions::default()).unwrap();
        assert_eq!(forced.objective, 16.0);

        let s = solve_offline_fcfs(&inst, &order, &FcfsConfig::default()).unwrap();
        assert_eq!(s.value, Yen(18));
        assert!(s.plan.rejected.contains(&e));
    }
}
