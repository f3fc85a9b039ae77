//! Online accept-or-reject policies.
//!
//! A policy sees each request once, in arrival order, together with the
//! current residual capacity, and answers with a coach or a rejection.
//! The strict first-come first-served policy answers "accepted" without a
//! coach; coaches for its accepted set are fixed only at the end.

use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::domain::{AssignmentPlan, Coach, Request, RequestType, ResidualCapacity, TypeId};
use crate::instance::Instance;
use crate::offline::{packability, solve_offline, solve_offline_lp, OfflineError, OfflineOptions, Packability};
use crate::stochastic::{
    solve_apriori, AprioriOptions, AprioriPlan, ArrivalModel, CopyProbabilities, FluidSolution, StochasticError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error(transparent)]
    Offline(#[from] OfflineError),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
    #[error("bad policy parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept(Coach),
    /// Accepted; the coach is chosen after the last arrival.
    AcceptDeferred,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyDecision {
    pub verdict: Verdict,
    pub reason: &'static str,
}

impl PolicyDecision {
    fn accept(c: Coach, reason: &'static str) -> Self {
        Self {
            verdict: Verdict::Accept(c),
            reason,
        }
    }

    fn reject(reason: &'static str) -> Self {
        Self {
            verdict: Verdict::Reject,
            reason,
        }
    }

    pub fn is_accept(&self) -> bool {
        !matches!(self.verdict, Verdict::Reject)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PolicyStats {
    pub solver_calls: usize,
    pub block_solves: usize,
    pub fallbacks: usize,
    pub undecided: usize,
}

pub trait Policy {
    fn name(&self) -> &str;

    /// Decision for arrival `step` (1-based).
    fn decide(
        &mut self,
        inst: &Instance,
        step: usize,
        r: Request,
        kappa: &ResidualCapacity,
    ) -> Result<PolicyDecision, PolicyError>;

    /// Final coaches for deferred acceptances.
    fn finish(&mut self, _inst: &Instance) -> Result<Option<AssignmentPlan>, PolicyError> {
        Ok(None)
    }

    fn stats(&self) -> PolicyStats {
        PolicyStats::default()
    }
}

/// Lowest-index coach that fits.
pub fn first_fit(t: &RequestType, kappa: &ResidualCapacity) -> PolicyDecision {
    match kappa.first_feasible(t) {
        Some(c) => PolicyDecision::accept(c, "first-fit"),
        None => PolicyDecision::reject("no-room"),
    }
}

/// Uniformly random coach among those that fit.
pub fn random_fit(t: &RequestType, kappa: &ResidualCapacity, rng: &mut impl Rng) -> PolicyDecision {
    let feas = kappa.feasible_coaches(t);
    if feas.is_empty() {
        return PolicyDecision::reject("no-room");
    }
    PolicyDecision::accept(feas[rng.random_range(0..feas.len())], "random-fit")
}

/// Offers the request with probability `min(1, theta * mass / rate)`
/// and seats it in the first coach that fits.
pub fn lambda_decision(
    t: &RequestType,
    mass: f64,
    rate: f64,
    theta: f64,
    kappa: &ResidualCapacity,
    rng: &mut impl Rng,
) -> PolicyDecision {
    let p = if rate > 0.0 { (theta * mass / rate).min(1.0) } else { 0.0 };
    let coin: f64 = rng.random();
    if coin >= p {
        return PolicyDecision::reject("not-offered");
    }
    match kappa.first_feasible(t) {
        Some(c) => PolicyDecision::accept(c, "offered"),
        None => PolicyDecision::reject("no-room"),
    }
}

/// Accepts whenever some coach that still fits carries fluid mass for
/// the step, picking among those coaches in proportion to their mass.
pub fn fluid_empirical_decision(
    fluid: &FluidSolution,
    t: TypeId,
    ty: &RequestType,
    step: usize,
    kappa: &ResidualCapacity,
    rng: &mut impl Rng,
) -> PolicyDecision {
    if (0..kappa.coach_count()).all(|c| fluid.x(t, step, Coach(c)) <= 0.0) {
        return PolicyDecision::reject("no-mass");
    }
    let feas = kappa.feasible_coaches(ty);
    if feas.is_empty() {
        return PolicyDecision::reject("no-room");
    }
    let mass: Vec<f64> = feas.iter().map(|&c| fluid.x(t, step, c)).collect();
    let total: f64 = mass.iter().sum();
    if total <= 0.0 {
        return PolicyDecision::reject("no-mass-on-feasible");
    }
    let mut coin = rng.random::<f64>() * total;
    for (c, m) in feas.iter().zip(&mass) {
        if coin < *m {
            return PolicyDecision::accept(*c, "fluid");
        }
        coin -= m;
    }
    let last = feas.iter().zip(&mass).rev().find(|p| *p.1 > 0.0).map(|p| *p.0);
    PolicyDecision::accept(last.unwrap_or(feas[0]), "fluid")
}

pub struct FirstFit;

impl Policy for FirstFit {
    fn name(&self) -> &str {
        "FirstFit"
    }

    fn decide(&mut self, inst: &Instance, _: usize, r: Request, kappa: &ResidualCapacity) -> Result<PolicyDecision, PolicyError> {
        Ok(first_fit(inst.type_of(&r), kappa))
    }
}

pub struct RandomFit {
    rng: ChaCha8Rng,
}

impl RandomFit {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Self { rng }
    }
}

impl Policy for RandomFit {
    fn name(&self) -> &str {
        "RandomFit"
    }

    fn decide(&mut self, inst: &Instance, _: usize, r: Request, kappa: &ResidualCapacity) -> Result<PolicyDecision, PolicyError> {
        Ok(random_fit(inst.type_of(&r), kappa, &mut self.rng))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RomConfig {
    /// Sampling fraction.
    pub q: f64,
    /// Expected number of arrivals.
    pub n_estimate: f64,
    /// Re-solve the relaxation every `stride` packing-phase arrivals.
    pub stride: usize,
    /// Compare against the type's remaining LP mass instead of the
    /// request's own mass.
    pub adaptive: bool,
}

/// Sample-then-pack policy for the random-order model, and its adaptive
/// variant.
pub struct Rom {
    cfg: RomConfig,
    rng: ChaCha8Rng,
    history: Vec<Request>,
    type_mass: Vec<f64>,
    assigned: Vec<u32>,
    seen: Vec<u32>,
    since_solve: usize,
    solves: usize,
}

impl Rom {
    pub fn new(cfg: RomConfig, types: usize, rng: ChaCha8Rng) -> Result<Self, PolicyError> {
        if !(0.0..=1.0).contains(&cfg.q) || cfg.stride == 0 || !(cfg.n_estimate > 0.0) {
            return Err(PolicyError::Parameter(format!("{cfg:?}")));
        }
        Ok(Self {
            cfg,
            rng,
            history: Vec::new(),
            type_mass: vec![0.0; types],
            assigned: vec![0; types],
            seen: vec![0; types],
            since_solve: usize::MAX,
            solves: 0,
        })
    }

    /// Arrivals `i <= q n` are rejected outright.
    pub fn sampling_cutoff(&self) -> usize {
        (self.cfg.q * self.cfg.n_estimate + 1e-9).floor() as usize
    }
}

impl Policy for Rom {
    fn name(&self) -> &str {
        if self.cfg.adaptive {
            "AdaptiveROM"
        } else {
            "ROM"
        }
    }

    fn decide(&mut self, inst: &Instance, step: usize, r: Request, kappa: &ResidualCapacity) -> Result<PolicyDecision, PolicyError> {
        self.history.push(r);
        self.seen[r.type_id.0] += 1;
        if step <= self.sampling_cutoff() {
            return Ok(PolicyDecision::reject("sampling"));
        }
        if self.since_solve >= self.cfg.stride {
            let lp = solve_offline_lp(inst, &self.history)?;
            self.type_mass.iter_mut().for_each(|m| *m = 0.0);
            for (t, m) in lp.type_mass {
                self.type_mass[t.0] = m;
            }
            self.since_solve = 0;
            self.solves += 1;
        }
        self.since_solve += 1;
        let t = r.type_id.0;
        let target = if self.cfg.adaptive {
            self.type_mass[t] - self.assigned[t] as f64
        } else {
            self.type_mass[t] - (self.seen[t] as f64 - 1.0)
        }
        .clamp(0.0, 1.0);
        let z: f64 = self.rng.random();
        if target <= 0.0 || z > target {
            return Ok(PolicyDecision::reject("lp-mass"));
        }
        Ok(match kappa.first_feasible(inst.type_of(&r)) {
            Some(c) => {
                self.assigned[t] += 1;
                PolicyDecision::accept(c, "lp-mass")
            }
            None => PolicyDecision::reject("no-room"),
        })
    }

    fn stats(&self) -> PolicyStats {
        PolicyStats {
            solver_calls: self.solves,
            ..PolicyStats::default()
        }
    }
}

/// Offers type `t` at step `i` with probability `θ sum_c x_{t,i,c} / λ_t`.
pub struct LambdaPolicy {
    fluid: Arc<FluidSolution>,
    theta: f64,
    rng: ChaCha8Rng,
}

impl LambdaPolicy {
    pub fn new(fluid: Arc<FluidSolution>, theta: f64, rng: ChaCha8Rng) -> Result<Self, PolicyError> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(PolicyError::Parameter(format!("theta = {theta}")));
        }
        Ok(Self { fluid, theta, rng })
    }
}

impl Policy for LambdaPolicy {
    fn name(&self) -> &str {
        if self.theta == 1.0 {
            "Lambda"
        } else {
            "Theta"
        }
    }

    fn decide(&mut self, inst: &Instance, step: usize, r: Request, kappa: &ResidualCapacity) -> Result<PolicyDecision, PolicyError> {
        let t = r.type_id;
        Ok(lambda_decision(
            inst.type_of(&r),
            self.fluid.step_mass(t, step),
            self.fluid.rates[t.0],
            self.theta,
            kappa,
            &mut self.rng,
        ))
    }
}

pub struct FluidEmpirical {
    fluid: Arc<FluidSolution>,
    rng: ChaCha8Rng,
}

impl FluidEmpirical {
    pub fn new(fluid: Arc<FluidSolution>, rng: ChaCha8Rng) -> Self {
        Self { fluid, rng }
    }
}

impl Policy for FluidEmpirical {
    fn name(&self) -> &str {
        "Fluid"
    }

    fn decide(&mut self, inst: &Instance, step: usize, r: Request, kappa: &ResidualCapacity) -> Result<PolicyDecision, PolicyError> {
        Ok(fluid_empirical_decision(
            &self.fluid,
            r.type_id,
            inst.type_of(&r),
            step,
            kappa,
            &mut self.rng,
        ))
    }
}

/// Follows one pre-assignment plan for the whole horizon.
pub struct Fixed {
    plan: Arc<AprioriPlan>,
    seen: Vec<u32>,
}

impl Fixed {
    pub fn new(plan: Arc<AprioriPlan>) -> Self {
        let seen = vec![0; plan.coaches.len()];
        Self { plan, seen }
    }
}

impl Policy for Fixed {
    fn name(&self) -> &str {
        "Fixed"
    }

    fn decide(&mut self, inst: &Instance, _: usize, r: Request, kappa: &ResidualCapacity) -> Result<PolicyDecision, PolicyError> {
        let t = r.type_id;
        self.seen[t.0] += 1;
        Ok(match self.plan.coach_for(t, self.seen[t.0]) {
            Some(c) if kappa.fits(inst.type_of(&r), c) => PolicyDecision::accept(c, "planned"),
            _ => PolicyDecision::reject("unplanned"),
        })
    }
}

/// Day of arrival step `i` when `horizon` steps are split into `days`
/// equal blocks: `ceil(i days / horizon)`.
pub fn day_of(i: usize, horizon: usize, days: usize) -> usize {
    (i * days).div_ceil(horizon.max(1)).max(1)
}

/// First-come first-served policy driven by a pre-assignment plan that is
/// re-solved at the start of every block and whenever a feasible request
/// falls outside the plan. The latest plan always replaces the previous
/// one.
pub struct FcfsPolicy {
    am: Arc<ArrivalModel>,
    opts: AprioriOptions,
    days: usize,
    plan: Option<AprioriPlan>,
    cursor: Vec<u32>,
    block: usize,
    rng: ChaCha8Rng,
    stats: PolicyStats,
}

impl FcfsPolicy {
    pub fn new(am: Arc<ArrivalModel>, opts: AprioriOptions, days: usize, rng: ChaCha8Rng) -> Self {
        let types = am.type_count();
        Self {
            am,
            opts,
            days: days.max(1),
            plan: None,
            cursor: vec![0; types],
            block: 0,
            rng,
            stats: PolicyStats::default(),
        }
    }

    fn adopt(&mut self, plan: Option<AprioriPlan>) {
        self.plan = plan;
        self.cursor.iter_mut().for_each(|c| *c = 0);
    }

    fn copies_from(&self, step: usize) -> Result<Option<CopyProbabilities>, PolicyError> {
        if step > self.am.horizon {
            return Ok(None);
        }
        Ok(Some(CopyProbabilities::remaining(&self.am, step, self.opts.psi_threshold)?))
    }
}

impl Policy for FcfsPolicy {
    fn name(&self) -> &str {
        "FCFS"
    }

    fn decide(&mut self, inst: &Instance, step: usize, r: Request, kappa: &ResidualCapacity) -> Result<PolicyDecision, PolicyError> {
        let day = day_of(step.min(self.am.horizon), self.am.horizon, self.days);
        if day != self.block {
            self.block = day;
            self.stats.block_solves += 1;
            self.stats.solver_calls += 1;
            let plan = match self.copies_from(step)? {
                Some(copies) => solve_apriori(inst, kappa, &copies, None, &self.opts).ok(),
                None => None,
            };
            self.adopt(plan);
        }
        let ty = inst.type_of(&r);
        let t = r.type_id;
        if let Some(plan) = &self.plan {
            let j = self.cursor[t.0] + 1;
            if let Some(c) = plan.coach_for(t, j) {
                self.cursor[t.0] = j;
                if kappa.fits(ty, c) {
                    return Ok(PolicyDecision::accept(c, "planned"));
                }
            }
        }
        if !kappa.any_feasible(ty) {
            return Ok(PolicyDecision::reject("no-room"));
        }
        self.stats.solver_calls += 1;
        let forced = match self.copies_from(step + 1)? {
            Some(copies) => solve_apriori(inst, kappa, &copies, Some(t), &self.opts),
            None => {
                let empty = CopyProbabilities {
                    probs: vec![Vec::new(); inst.types.len()],
                };
                solve_apriori(inst, kappa, &empty, Some(t), &self.opts)
            }
        };
        match forced {
            Ok(plan) if plan.forced.is_some_and(|c| kappa.fits(ty, c)) => {
                let c = plan.forced.expect("checked");
                self.adopt(Some(plan));
                Ok(PolicyDecision::accept(c, "forced"))
            }
            _ => {
                self.stats.fallbacks += 1;
                let mut d = random_fit(ty, kappa, &mut self.rng);
                d.reason = "fallback";
                Ok(d)
            }
        }
    }

    fn stats(&self) -> PolicyStats {
        self.stats
    }
}

/// Strict first-come first-served: accept whenever the accepted set plus
/// the new request can still be packed under some reassignment.
pub struct Sfcfs {
    accepted: Vec<Request>,
    plan: AssignmentPlan,
    /// Residual capacity under `plan`.
    free: Option<ResidualCapacity>,
    time_limit: Option<Duration>,
    stats: PolicyStats,
}

impl Sfcfs {
    pub fn new(time_limit: Option<Duration>) -> Self {
        Self {
            accepted: Vec::new(),
            plan: AssignmentPlan::new(),
            free: None,
            time_limit,
            stats: PolicyStats::default(),
        }
    }

    fn residual_of(inst: &Instance, plan: &AssignmentPlan) -> ResidualCapacity {
        let mut free = ResidualCapacity::full(&inst.train, inst.leg_count());
        for (r, &c) in &plan.assignments {
            free.assign(inst.type_of(r), c).expect("packing plans are feasible");
        }
        free
    }

    pub fn accepted(&self) -> &[Request] {
        &self.accepted
    }
}

impl Policy for Sfcfs {
    fn name(&self) -> &str {
        "SFCFS"
    }

    fn decide(&mut self, inst: &Instance, _: usize, r: Request, _: &ResidualCapacity) -> Result<PolicyDecision, PolicyError> {
        let ty = inst.type_of(&r);
        let free = self
            .free
            .get_or_insert_with(|| ResidualCapacity::full(&inst.train, inst.leg_count()));
        if let Some(c) = free.first_feasible(ty) {
            free.assign(ty, c).expect("checked");
            self.plan.assign(r, c);
            self.accepted.push(r);
            return Ok(PolicyDecision {
                verdict: Verdict::AcceptDeferred,
                reason: "fits-current-packing",
            });
        }
        let mut candidate = self.accepted.clone();
        candidate.push(r);
        self.stats.solver_calls += 1;
        Ok(match packability(inst, &candidate, self.time_limit)? {
            Packability::Packable(plan) => {
                self.free = Some(Self::residual_of(inst, &plan));
                self.plan = plan;
                self.accepted = candidate;
                PolicyDecision {
                    verdict: Verdict::AcceptDeferred,
                    reason: "repacked",
                }
            }
            Packability::NotPackable => PolicyDecision::reject("not-packable"),
            Packability::Undecided => {
                self.stats.undecided += 1;
                PolicyDecision::reject("undecided")
            }
        })
    }

    /// Coaches for the accepted set from one offline solve, keeping the
    /// maintained packing if that solve does not seat everyone in time.
    fn finish(&mut self, inst: &Instance) -> Result<Option<AssignmentPlan>, PolicyError> {
        if self.accepted.is_empty() {
            return Ok(Some(AssignmentPlan::new()));
        }
        self.stats.solver_calls += 1;
        let opts = OfflineOptions {
            time_limit: self.time_limit,
            ..OfflineOptions::default()
        };
        let sol = solve_offline(inst, &self.accepted, &opts)?;
        Ok(Some(if sol.plan.rejected.is_empty() {
            sol.plan
        } else {
            self.plan.clone()
        }))
    }

    fn stats(&self) -> PolicyStats {
        self.stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{requests_from_types, Network, Train, Yen};
    use crate::offline::tests::toy;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn first_fit_cases() {
        let t = RequestType::new(1, 2, 2, Yen(1), 1.0).unwrap();
        let train = Train::uniform(4, 4).unwrap();
        let mut k = ResidualCapacity::full(&train, 2);
        assert_eq!(first_fit(&t, &k).verdict, Verdict::Accept(Coach(0)));
        for c in [0, 1, 3] {
            k.consume(Coach(c), t.legs(), 3).unwrap();
        }
        assert_eq!(first_fit(&t, &k).verdict, Verdict::Accept(Coach(2)));
        k.consume(Coach(2), t.legs(), 3).unwrap();
        assert_eq!(first_fit(&t, &k).verdict, Verdict::Reject);
    }

    #[test]
    fn random_fit_is_uniform() {
        let t = RequestType::new(1, 2, 1, Yen(1), 1.0).unwrap();
        let train = Train::uniform(3, 2).unwrap();
        let mut k = ResidualCapacity::full(&train, 1);
        k.consume(Coach(1), t.legs(), 2).unwrap();
        let mut g = rng(7);
        let n = 10_000;
        let zero = (0..n)
            .filter(|_| random_fit(&t, &k, &mut g).verdict == Verdict::Accept(Coach(0)))
            .count();
        assert!((zero as f64 / n as f64 - 0.5).abs() < 0.02);
        k.consume(Coach(2), t.legs(), 2).unwrap();
        assert!((0..50).all(|_| random_fit(&t, &k, &mut g).verdict == Verdict::Accept(Coach(0))));
        k.consume(Coach(0), t.legs(), 2).unwrap();
        assert_eq!(random_fit(&t, &k, &mut g).verdict, Verdict::Reject);
    }

    #[test]
    fn lambda_offer_probabilities() {
        let t = RequestType::new(1, 2, 1, Yen(1), 0.5).unwrap();
        let train = Train::uniform(2, 2).unwrap();
        let mut k = ResidualCapacity::full(&train, 1);
        let mut g = rng(1);
        assert!((0..100).all(|_| lambda_decision(&t, 0.5, 0.5, 1.0, &k, &mut g).is_accept()));
        assert!((0..100).all(|_| !lambda_decision(&t, 0.0, 0.5, 1.0, &k, &mut g).is_accept()));
        k.consume(Coach(0), t.legs(), 2).unwrap();
        k.consume(Coach(1), t.legs(), 2).unwrap();
        assert!((0..100).all(|_| !lambda_decision(&t, 0.5, 0.5, 1.0, &k, &mut g).is_accept()));

        // θ = 1 and the plain policy draw the same coins.
        let k = ResidualCapacity::full(&train, 1);
        let (mut a, mut b) = (rng(3), rng(3));
        for _ in 0..200 {
            assert_eq!(
                lambda_decision(&t, 0.2, 0.5, 1.0, &k, &mut a),
                lambda_decision(&t, 0.2, 0.5, 1.0, &k, &mut b)
            );
        }
    }

    #[test]
    fn fluid_empirical_frequency() {
        let fluid = FluidSolution {
            rates: vec![1.0],
            coach_mass: vec![vec![1.0, 3.0]],
            type_mass: vec![4.0],
            value: 0.0,
        };
        let t = RequestType::new(1, 2, 1, Yen(1), 1.0).unwrap();
        let train = Train::uniform(2, 2).unwrap();
        let mut k = ResidualCapacity::full(&train, 1);
        let mut g = rng(11);
        assert!((0..100).all(|_| fluid_empirical_decision(&fluid, TypeId(0), &t, 1, &k, &mut g).is_accept()));
        assert!(!fluid_empirical_decision(&fluid, TypeId(0), &t, 5, &k, &mut g).is_accept());
        // Both coaches fit: coach 2 carries 3 of the 4 units.
        let n = 10_000;
        let in_second = (0..n)
            .filter(|_| fluid_empirical_decision(&fluid, TypeId(0), &t, 2, &k, &mut g).verdict == Verdict::Accept(Coach(1)))
            .count();
        assert!((in_second as f64 / n as f64 - 0.75).abs() < 0.02);
        // Only coach 1 still fits: accepted there every time.
        k.consume(Coach(1), t.legs(), 2).unwrap();
        assert!((0..100).all(|_| {
            fluid_empirical_decision(&fluid, TypeId(0), &t, 2, &k, &mut g).verdict == Verdict::Accept(Coach(0))
        }));
    }

    #[test]
    fn rom_sampling_and_mass() {
        let (inst, order) = toy(&[0, 1, 2]);
        let mut p = Rom::new(
            RomConfig {
                q: 0.5,
                n_estimate: 10.0,
                stride: 1,
                adaptive: false,
            },
            3,
            rng(0),
        )
        .unwrap();
        let k = ResidualCapacity::full(&inst.train, 2);
        assert_eq!(p.sampling_cutoff(), 5);
        for (i, r) in order.iter().enumerate() {
            assert_eq!(p.decide(&inst, i + 1, *r, &k).unwrap().reason, "sampling");
        }

        // No sampling: the relaxation seats r2 and r3 fully.
        let (inst, order) = toy(&[1, 2]);
        let mut p = Rom::new(
            RomConfig {
                q: 0.0,
                n_estimate: 2.0,
                stride: 1,
                adaptive: false,
            },
            3,
            rng(0),
        )
        .unwrap();
        let d1 = p.decide(&inst, 1, order[0], &k).unwrap();
        assert_eq!(d1.verdict, Verdict::Accept(Coach(0)));
    }

    #[test]
    fn adaptive_rom_uses_type_mass() {
        // Three identical one-seat requests, a three-seat coach: the type
        // gets mass 3, every arrival is accepted.
        let types = vec![RequestType::new(1, 2, 1, Yen(1), 1.0).unwrap()];
        let inst = Instance::new(Network::path(2).unwrap(), Train::uniform(1, 3).unwrap(), types).unwrap();
        let reqs = requests_from_types(&[TypeId(0); 3]);
        let mut p = Rom::new(
            RomConfig {
                q: 0.0,
                n_estimate: 3.0,
                stride: 1,
                adaptive: true,
            },
            1,
            rng(5),
        )
        .unwrap();
        let mut k = ResidualCapacity::full(&inst.train, 1);
        for (i, r) in reqs.iter().enumerate() {
            let d = p.decide(&inst, i + 1, *r, &k).unwrap();
            let Verdict::Accept(c) = d.verdict else { panic!("{d:?}") };
            k.assign(&inst.types[0], c).unwrap();
        }
        // A fourth arrival: mass 3 (capacity), three already assigned.
        let r4 = requests_from_types(&[TypeId(0); 4])[3];
        let full = ResidualCapacity::full(&inst.train, 1);
        assert_eq!(p.decide(&inst, 4, r4, &full).unwrap().verdict, Verdict::Reject);
    }

    #[test]
    fn sfcfs_on_toy() {
        let (inst, order) = toy(&[1, 2, 0]);
        let mut p = Sfcfs::new(None);
        let k = ResidualCapacity::full(&inst.train, 2);
        let v: Vec<bool> = order.iter().map(|r| p.decide(&inst, 0, *r, &k).unwrap().is_accept()).collect();
        assert_eq!(v, vec![true, true, false]);

        let (inst, order) = toy(&[0, 1, 2]);
        let mut p = Sfcfs::new(None);
        let v: Vec<bool> = order.iter().map(|r| p.decide(&inst, 0, *r, &k).unwrap().is_accept()).collect();
        assert_eq!(v, vec![true, false, false]);
        let plan = p.finish(&inst).unwrap().unwrap();
        assert_eq!(crate::domain::plan_revenue(&plan, &inst.types), Yen(10));
    }

    #[test]
    fn days_split_evenly() {
        assert_eq!(day_of(1, 300, 30), 1);
        assert_eq!(day_of(10, 300, 30), 1);
        assert_eq!(day_of(11, 300, 30), 2);
        assert_eq!(day_of(300, 300, 30), 30);
    }
}
