//! Offline formulations: the plain assignment model over a known request
//! set, its relaxation, a packability oracle, and the first-come
//! first-served model with its branch-and-cut driver (in [`fcfs`]).

mod fcfs;

use std::collections::BTreeMap;
use std::time::Duration;

use thiserror::Error;

use crate::domain::{AssignmentPlan, Coach, DomainError, Request, ResidualCapacity, TypeId, Yen};
use crate::instance::Instance;
use crate::linprog::{LinprogError, MipOptions, Model, Sense, Status, VarId};
use crate::packing::{self, Fit, PackClass};

pub use fcfs::{
    build_fcfs_model, dominance_cuts, dominance_relation, first_unfair_rejection, forward_filtering_cuts,
    precedence_cuts, preprocess_forced_assignments, separate_unfair_rejection, solve_offline_fcfs,
    sound_forced_assignments, DominanceRelation, FairnessCut, FairnessVariables, FcfsConfig, FcfsSolution,
    FcfsStats, FcfsVars, Separation,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OfflineError {
    #[error("the request list is empty")]
    NoRequests,
    #[error(transparent)]
    Solver(#[from] LinprogError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("solver stopped without any feasible plan ({0:?})")]
    NoPlan(Status),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineOptions {
    pub time_limit: Option<Duration>,
    pub node_limit: usize,
}

impl Default for OfflineOptions {
    fn default() -> Self {
        Self {
            time_limit: Some(Duration::from_secs(30)),
            node_limit: 50_000,
        }
    }
}

impl OfflineOptions {
    fn mip(&self) -> MipOptions {
        MipOptions {
            time_limit: self.time_limit,
            node_limit: self.node_limit,
            ..MipOptions::default()
        }
    }
}

/// Variable ids of [`build_offline_model`]; `x[r][c]` and `y[r]` follow
/// the order of the request slice.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineVars {
    pub x: Vec<Vec<VarId>>,
    pub y: Vec<VarId>,
}

/// One binary per request and coach plus an acceptance binary per request.
pub fn build_offline_model(inst: &Instance, requests: &[Request]) -> Result<(Model, OfflineVars), OfflineError> {
    if requests.is_empty() {
        return Err(OfflineError::NoRequests);
    }
    let mut m = Model::new("offline");
    let (x, y) = add_assignment_block(&mut m, inst, requests);
    Ok((m, OfflineVars { x, y }))
}

pub(crate) fn add_assignment_block(
    m: &mut Model,
    inst: &Instance,
    requests: &[Request],
) -> (Vec<Vec<VarId>>, Vec<VarId>) {
    let coaches = inst.train.coach_count();
    let mut x = Vec::with_capacity(requests.len());
    let mut y = Vec::with_capacity(requests.len());
    for r in requests {
        let t = inst.type_of(r);
        let yr = m.add_binary(format!("y_{}", r.arrival_index), t.price.as_f64());
        let row: Vec<VarId> = (0..coaches)
            .map(|c| m.add_binary(format!("x_{}_{}", r.arrival_index, c + 1), 0.0))
            .collect();
        let mut link: Vec<(VarId, f64)> = row.iter().map(|&v| (v, 1.0)).collect();
        link.push((yr, -1.0));
        m.add_constraint(format!("assign_{}", r.arrival_index), link, Sense::Eq, 0.0);
        x.push(row);
        y.push(yr);
    }
    for c in 0..coaches {
        for l in 1..=inst.leg_count() {
            let coeffs: Vec<(VarId, f64)> = requests
                .iter()
                .enumerate()
                .filter(|(_, r)| inst.type_of(r).legs().contains(l))
                .map(|(i, r)| (x[i][c], inst.type_of(r).group_size as f64))
                .collect();
            if !coeffs.is_empty() {
                let cap = inst.train.capacity(Coach(c)) as f64;
                m.add_constraint(format!("cap_{}_{l}", c + 1), coeffs, Sense::Le, cap);
            }
        }
    }
    (x, y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineSolution {
    pub plan: AssignmentPlan,
    pub value: Yen,
    pub bound: f64,
    pub status: Status,
    pub nodes: usize,
}

impl OfflineSolution {
    /// `(bound - value) / bound`.
    pub fn gap(&self) -> f64 {
        if self.status == Status::Optimal || self.bound <= 0.0 {
            0.0
        } else {
            ((self.bound - self.value.as_f64()) / self.bound).max(0.0)
        }
    }
}

/// Requests grouped by type, each group in arrival order.
pub(crate) fn group_by_type(requests: &[Request]) -> BTreeMap<TypeId, Vec<Request>> {
    let mut groups: BTreeMap<TypeId, Vec<Request>> = BTreeMap::new();
    for r in requests {
        groups.entry(r.type_id).or_default().push(*r);
    }
    for g in groups.values_mut() {
        g.sort();
    }
    groups
}

fn classes_for(
    inst: &Instance,
    groups: &BTreeMap<TypeId, Vec<Request>>,
    mandatory: bool,
) -> Vec<PackClass> {
    groups
        .iter()
        .map(|(t, reqs)| {
            let ty = &inst.types[t.0];
            let n = reqs.len() as u32;
            PackClass::flat(ty.legs(), ty.group_size, if mandatory { n } else { 0 }, n, ty.price.as_f64())
        })
        .collect()
}

/// Seats the earliest requests of each type, filling coaches in order.
fn plan_from_counts(groups: &BTreeMap<TypeId, Vec<Request>>, counts: &[Vec<u32>]) -> AssignmentPlan {
    let mut plan = AssignmentPlan::new();
    for ((_, reqs), row) in groups.iter().zip(counts) {
        let mut it = reqs.iter();
        for (c, &k) in row.iter().enumerate() {
            for _ in 0..k {
                if let Some(r) = it.next() {
                    plan.assign(*r, Coach(c));
                }
            }
        }
        for r in it {
            plan.reject(*r);
        }
    }
    plan
}

/// Revenue-maximizing plan for a known request set, arrival order ignored.
pub fn solve_offline(inst: &Instance, requests: &[Request], opts: &OfflineOptions) -> Result<OfflineSolution, OfflineError> {
    if requests.is_empty() {
        return Err(OfflineError::NoRequests);
    }
    let groups = group_by_type(requests);
    let classes = classes_for(inst, &groups, false);
    let kappa = ResidualCapacity::full(&inst.train, inst.leg_count());
    let res = packing::solve_integer(&classes, &kappa, &opts.mip())?;
    if res.counts.is_empty() {
        return Err(OfflineError::NoPlan(res.status));
    }
    let plan = plan_from_counts(&groups, &res.int_counts());
    let value = crate::domain::plan_revenue(&plan, &inst.types);
    Ok(OfflineSolution {
        plan,
        value,
        bound: res.bound.max(value.as_f64()),
        status: res.status,
        nodes: res.nodes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Packability {
    Packable(AssignmentPlan),
    NotPackable,
    /// The search hit its limit before deciding.
    Undecided,
}

impl Packability {
    pub fn is_packable(&self) -> bool {
        matches!(self, Packability::Packable(_))
    }
}

/// Decision mode: can all `requests` be seated together on an empty train?
pub fn packability(inst: &Instance, requests: &[Request], time_limit: Option<Duration>) -> Result<Packability, OfflineError> {
    if requests.is_empty() {
        return Ok(Packability::Packable(AssignmentPlan::new()));
    }
    let groups = group_by_type(requests);
    let classes = classes_for(inst, &groups, true);
    let kappa = ResidualCapacity::full(&inst.train, inst.leg_count());
    Ok(match packing::pack_all(&classes, &kappa, time_limit)? {
        Fit::Yes(counts) => Packability::Packable(plan_from_counts(&groups, &counts)),
        Fit::No => Packability::NotPackable,
        Fit::Unknown => Packability::Undecided,
    })
}

/// Optimal solution of the continuous relaxation, as assignment mass per
/// request (aligned with the input slice) and per type.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineLp {
    pub mass: Vec<f64>,
    pub type_mass: BTreeMap<TypeId, f64>,
    pub objective: f64,
}

impl OfflineLp {
    pub fn mass_of(&self, requests: &[Request], r: &Request) -> Option<f64> {
        requests.iter().position(|q| q == r).map(|i| self.mass[i])
    }
}

/// LP relaxation. Requests of one type share the type's mass `M`; the
/// k-th earliest gets `clamp(M - (k - 1), 0, 1)`.
pub fn solve_offline_lp(inst: &Instance, requests: &[Request]) -> Result<OfflineLp, OfflineError> {
    if requests.is_empty() {
        return Err(OfflineError::NoRequests);
    }
    let groups = group_by_type(requests);
    let classes = classes_for(inst, &groups, false);
    let kappa = ResidualCapacity::full(&inst.train, inst.leg_count());
    let res = packing::solve_relaxed(&classes, &kappa)?;
    if res.status != Status::Optimal {
        return Err(OfflineError::NoPlan(res.status));
    }
    let mut by_request: BTreeMap<Request, f64> = BTreeMap::new();
    let mut type_mass = BTreeMap::new();
    for ((t, reqs), row) in groups.iter().zip(&res.counts) {
        let total: f64 = row.iter().sum::<f64>().max(0.0);
        type_mass.insert(*t, total);
        for (k, r) in reqs.iter().enumerate() {
            by_request.insert(*r, (total - k as f64).clamp(0.0, 1.0));
        }
    }
    Ok(OfflineLp {
        mass: requests.iter().map(|r| by_request[r]).collect(),
        type_mass,
        objective: res.objective,
    })
}
