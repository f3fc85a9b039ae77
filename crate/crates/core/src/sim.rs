//! Seeded simulation: instance sampling, the policy harness, fairness
//! audits and summary statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Duration;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::Serialize;
use thiserror::Error;

use crate::bounds::optimal_q;
use crate::domain::{
    max_group_fraction, validate_plan, AssignmentPlan, Request, ResidualCapacity, TypeId, Yen,
};
use crate::instance::Instance;
use crate::offline::{packability, solve_offline, OfflineError, OfflineOptions, Packability};
use crate::policies::{
    day_of, FcfsPolicy, FirstFit, Fixed, FluidEmpirical, LambdaPolicy, Policy, PolicyError, PolicyStats, RandomFit,
    Rom, RomConfig, Sfcfs, Verdict,
};
use crate::stochastic::{
    solve_apriori, solve_fluid, AprioriOptions, AprioriPlan, ArrivalModel, CopyProbabilities, FluidSolution,
    StochasticError, TotalArrivals,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("policy failed at step {step}: {source}")]
    Policy {
        step: usize,
        source: PolicyError,
        partial: Box<RunTrace>,
    },
    #[error("policy {policy} seated request {request:?} in coach {coach} where it does not fit")]
    Overbooked {
        policy: String,
        request: Request,
        coach: usize,
    },
    #[error("final plan of {0} breaks capacity or leaves accepted requests unseated")]
    BadFinalPlan(String),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
    #[error(transparent)]
    Offline(#[from] OfflineError),
}

/// Independent random streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Instance = 0,
    Order = 1,
    Policy = 2,
    WarmStart = 3,
    Bootstrap = 4,
}

/// ChaCha stream for `(run, purpose)` under a base seed.
pub fn rng_stream(seed: u64, run: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run.wrapping_mul(8).wrapping_add(purpose as u64));
    rng
}

/// Total count `X` (Poisson conditioned on `X >= 1`, capped at the
/// horizon), then i.i.d. types by rate.
pub fn generate_arrivals(am: &ArrivalModel, rng: &mut impl Rng) -> Vec<TypeId> {
    let count = match am.total {
        TotalArrivals::Fixed { count } => count,
        TotalArrivals::Poisson { mean } => {
            let dist = Poisson::new(mean).expect("model validated the mean");
            loop {
                let x: f64 = dist.sample(rng);
                if x >= 1.0 {
                    break (x as usize).min(am.horizon);
                }
            }
        }
    };
    let pick = WeightedIndex::new(&am.rates).expect("rates sum to one");
    (0..count).map(|_| TypeId(pick.sample(rng))).collect()
}

/// `base` with a sampled arrival sequence; the same seed gives the same
/// instance.
pub fn generate_instance(base: &Instance, am: &ArrivalModel, seed: u64) -> Instance {
    let mut rng = rng_stream(seed, 0, Purpose::Instance);
    let mut inst = base.clone();
    inst.arrivals = Some(generate_arrivals(am, &mut rng));
    inst
}

/// Uniformly random order (Fisher–Yates).
pub fn random_order_permutation<T: Clone>(items: &[T], rng: &mut impl Rng) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(rng);
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub request: Request,
    pub group: u32,
    pub verdict: Verdict,
    pub reason: &'static str,
    /// Smallest free count over all coaches and legs after the decision.
    pub residual_min: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub policy: String,
    pub rows: Vec<TraceRow>,
    pub plan: AssignmentPlan,
    pub revenue: Yen,
    /// Cumulative revenue at the end of each day.
    pub daily_revenue: Vec<f64>,
    /// Occupied share of seat-legs at the end of each day.
    pub daily_utilization: Vec<f64>,
    pub stats: PolicyStats,
}

impl RunTrace {
    pub fn utilization(&self) -> f64 {
        self.daily_utilization.last().copied().unwrap_or(0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,type,group,decision,coach,residual_min,reason\n");
        for r in &self.rows {
            let (d, c) = match r.verdict {
                Verdict::Accept(c) => ("accept", c.number().to_string()),
                Verdict::AcceptDeferred => (
                    "accept",
                    self.plan.coach_of(&r.request).map_or(String::new(), |c| c.number().to_string()),
                ),
                Verdict::Reject => ("reject", String::new()),
            };
            let _ = writeln!(
                s,
                "{},{},{},{d},{c},{},{}",
                r.step, r.request.type_id.0, r.group, r.residual_min, r.reason
            );
        }
        s
    }
}

/// How arrival steps map to days.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DaySchedule {
    pub horizon: usize,
    pub days: usize,
}

impl DaySchedule {
    pub fn for_instance(inst: &Instance) -> Self {
        match &inst.demand {
            Some(d) => Self {
                horizon: d.horizon_steps(),
                days: d.horizon_days as usize,
            },
            None => Self {
                horizon: inst.arrivals.as_ref().map_or(1, |a| a.len().max(1)),
                days: 1,
            },
        }
    }

    pub fn day(&self, step: usize) -> usize {
        day_of(step.min(self.horizon), self.horizon, self.days)
    }
}

fn seat_legs(inst: &Instance, r: &Request) -> u64 {
    let t = inst.type_of(r);
    t.group_size as u64 * t.legs().len() as u64
}

fn total_seat_legs(inst: &Instance) -> u64 {
    inst.train.total_seats() * inst.leg_count() as u64
}

/// Occupied share of all seat-legs under `plan`.
pub fn plan_utilization(inst: &Instance, plan: &AssignmentPlan) -> f64 {
    let used: u64 = plan.assignments.keys().map(|r| seat_legs(inst, r)).sum();
    used as f64 / total_seat_legs(inst) as f64
}

/// Feeds the instance's arrivals to `policy` and records every decision.
pub fn run_policy(inst: &Instance, policy: &mut dyn Policy, schedule: DaySchedule) -> Result<RunTrace, SimError> {
    let requests = inst.requests();
    let mut kappa = ResidualCapacity::full(&inst.train, inst.leg_count());
    let mut trace = RunTrace {
        policy: policy.name().to_string(),
        rows: Vec::with_capacity(requests.len()),
        plan: AssignmentPlan::new(),
        revenue: Yen(0),
        daily_revenue: vec![0.0; schedule.days],
        daily_utilization: vec![0.0; schedule.days],
        stats: PolicyStats::default(),
    };
    let capacity = total_seat_legs(inst) as f64;
    let mut revenue = 0.0;
    let mut used = 0u64;
    let mut day = 1;
    let mut deferred = Vec::new();
    for (k, r) in requests.iter().enumerate() {
        let step = k + 1;
        let today = schedule.day(step);
        while day < today {
            day += 1;
            trace.daily_revenue[day - 1] = revenue;
            trace.daily_utilization[day - 1] = used as f64 / capacity;
        }
        let d = match policy.decide(inst, step, *r, &kappa) {
            Ok(d) => d,
            Err(source) => {
                trace.stats = policy.stats();
                return Err(SimError::Policy {
                    step,
                    source,
                    partial: Box::new(trace),
                });
            }
        };
        let t = inst.type_of(r);
        match d.verdict {
            Verdict::Accept(c) => {
                if kappa.assign(t, c).is_err() {
                    return Err(SimError::Overbooked {
                        policy: trace.policy,
                        request: *r,
                        coach: c.number(),
                    });
                }
                trace.plan.assign(*r, c);
            }
            Verdict::AcceptDeferred => deferred.push(*r),
            Verdict::Reject => trace.plan.reject(*r),
        }
        if d.is_accept() {
            revenue += t.price.as_f64();
            used += seat_legs(inst, r);
        }
        trace.daily_revenue[day - 1] = revenue;
        trace.daily_utilization[day - 1] = used as f64 / capacity;
        trace.rows.push(TraceRow {
            step,
            request: *r,
            group: t.group_size,
            verdict: d.verdict,
            reason: d.reason,
            residual_min: kappa.min_free(),
        });
    }
    while day < schedule.days {
        day += 1;
        trace.daily_revenue[day - 1] = revenue;
        trace.daily_utilization[day - 1] = used as f64 / capacity;
    }
    let finish = policy.finish(inst);
    trace.stats = policy.stats();
    match finish {
        Err(source) => {
            return Err(SimError::Policy {
                step: requests.len(),
                source,
                partial: Box::new(trace),
            })
        }
        Ok(Some(final_plan)) if !deferred.is_empty() => {
            for r in &deferred {
                match final_plan.coach_of(r) {
                    Some(c) => trace.plan.assign(*r, c),
                    None => return Err(SimError::BadFinalPlan(trace.policy)),
                }
            }
        }
        Ok(None) if !deferred.is_empty() => return Err(SimError::BadFinalPlan(trace.policy)),
        Ok(_) => {}
    }
    if !validate_plan(&trace.plan, &inst.train, &inst.types, inst.leg_count(), &requests).is_empty() {
        return Err(SimError::BadFinalPlan(trace.policy));
    }
    trace.revenue = crate::domain::plan_revenue(&trace.plan, &inst.types);
    Ok(trace)
}

/// A request turned away although it fit at its arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FairnessViolation {
    pub step: usize,
    pub arrival_index: usize,
    pub type_id: usize,
}

/// Replays the plan in arrival order and reports every rejection that
/// some coach could have taken.
pub fn audit_fcfs(inst: &Instance, order: &[Request], plan: &AssignmentPlan) -> Vec<FairnessViolation> {
    let mut kappa = ResidualCapacity::full(&inst.train, inst.leg_count());
    let mut out = Vec::new();
    for (k, r) in order.iter().enumerate() {
        let t = inst.type_of(r);
        match plan.coach_of(r) {
            Some(c) => {
                let _ = kappa.assign(t, c);
            }
            None => {
                if kappa.any_feasible(t) {
                    out.push(FairnessViolation {
                        step: k + 1,
                        arrival_index: r.arrival_index,
                        type_id: r.type_id.0,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SfcfsAudit {
    pub violations: Vec<FairnessViolation>,
    /// Rejections the packing search could not settle in time.
    pub undecided: Vec<FairnessViolation>,
}

/// Reports every rejection for which the requests accepted before it,
/// together with it, could all have been packed.
pub fn audit_sfcfs(
    inst: &Instance,
    order: &[Request],
    plan: &AssignmentPlan,
    time_limit: Option<Duration>,
) -> Result<SfcfsAudit, OfflineError> {
    let mut accepted = Vec::new();
    let mut audit = SfcfsAudit::default();
    for (k, r) in order.iter().enumerate() {
        if plan.coach_of(r).is_some() {
            accepted.push(*r);
            continue;
        }
        let v = FairnessViolation {
            step: k + 1,
            arrival_index: r.arrival_index,
            type_id: r.type_id.0,
        };
        accepted.push(*r);
        match packability(inst, &accepted, time_limit)? {
            Packability::Packable(_) => audit.violations.push(v),
            Packability::NotPackable => {}
            Packability::Undecided => audit.undecided.push(v),
        }
        accepted.pop();
    }
    Ok(audit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; `None` for a single value.
    pub sd: Option<f64>,
    pub min: f64,
    pub max: f64,
}

pub fn summarize(xs: &[f64]) -> Option<Summary> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (n > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    Some(Summary {
        n,
        mean,
        sd,
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlandAltman {
    /// `(mean of the pair, a - b)`.
    pub pairs: Vec<(f64, f64)>,
    pub mean_difference: f64,
    pub lower_limit: f64,
    pub upper_limit: f64,
}

/// Agreement of paired measurements: mean difference with ±1.96 sd limits.
pub fn bland_altman(a: &[f64], b: &[f64]) -> Option<BlandAltman> {
    if a.len() != b.len() || a.is_empty() {
        return None;
    }
    let pairs: Vec<(f64, f64)> = a.iter().zip(b).map(|(x, y)| (0.5 * (x + y), x - y)).collect();
    let diffs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let s = summarize(&diffs)?;
    let half = 1.96 * s.sd.unwrap_or(0.0);
    Some(BlandAltman {
        pairs,
        mean_difference: s.mean,
        lower_limit: s.mean - half,
        upper_limit: s.mean + half,
    })
}

/// Percentile bootstrap 95% interval for the mean of `b - a` over paired
/// samples.
pub fn bootstrap_mean_difference(a: &[f64], b: &[f64], resamples: usize, rng: &mut impl Rng) -> Option<(f64, f64)> {
    if a.len() != b.len() || a.is_empty() || resamples == 0 {
        return None;
    }
    let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let n = d.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| d[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let at = |q: f64| means[((q * resamples as f64) as usize).min(resamples - 1)];
    Some((at(0.025), at(0.975)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum PolicyKind {
    FirstFit,
    RandomFit,
    Rom,
    AdaptiveRom,
    Lambda,
    Theta,
    Fluid,
    Fixed,
    Fcfs,
    Sfcfs,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 10] = [
        PolicyKind::FirstFit,
        PolicyKind::RandomFit,
        PolicyKind::Rom,
        PolicyKind::AdaptiveRom,
        PolicyKind::Lambda,
        PolicyKind::Theta,
        PolicyKind::Fluid,
        PolicyKind::Fixed,
        PolicyKind::Fcfs,
        PolicyKind::Sfcfs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::FirstFit => "FirstFit",
            PolicyKind::RandomFit => "RandomFit",
            PolicyKind::Rom => "ROM",
            PolicyKind::AdaptiveRom => "AdaptiveROM",
            PolicyKind::Lambda => "Lambda",
            PolicyKind::Theta => "Theta",
            PolicyKind::Fluid => "Fluid",
            PolicyKind::Fixed => "Fixed",
            PolicyKind::Fcfs => "FCFS",
            PolicyKind::Sfcfs => "SFCFS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let lower = s.to_ascii_lowercase();
        Self::ALL.into_iter().find(|k| k.name().to_ascii_lowercase() == lower)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    /// Sampling fraction; defaults to `1 / (2 - δ)`.
    pub q: Option<f64>,
    pub rom_stride: usize,
    pub theta: f64,
    pub apriori: AprioriOptions,
    /// Re-solve blocks for the FCFS policy; defaults to the horizon days.
    pub blocks: Option<usize>,
    /// Relative MIP gap for the re-solves inside the FCFS policy.
    pub fcfs_gap: f64,
    pub sfcfs_time_limit: Option<Duration>,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            q: None,
            rom_stride: 1,
            theta: 0.9218,
            // Node limits only, so runs do not depend on machine speed.
            apriori: AprioriOptions {
                time_limit: None,
                ..AprioriOptions::default()
            },
            blocks: None,
            fcfs_gap: 0.01,
            sfcfs_time_limit: Some(Duration::from_secs(5)),
        }
    }
}

/// One realized run with its audits.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub seed: u64,
    pub kind: PolicyKind,
    pub trace: RunTrace,
    pub fcfs_violations: Vec<FairnessViolation>,
    pub sfcfs_audit: Option<SfcfsAudit>,
}

/// Shared state for running many policies over many seeded realizations
/// of one base instance: the arrival model, the fluid solution and the
/// initial pre-assignment plan are computed once.
pub struct Experiment {
    pub base: Instance,
    pub model: Arc<ArrivalModel>,
    pub params: PolicyParams,
    pub schedule: DaySchedule,
    fluid: std::sync::OnceLock<Result<Arc<FluidSolution>, StochasticError>>,
    apriori: std::sync::OnceLock<Result<Arc<AprioriPlan>, StochasticError>>,
}

impl Experiment {
    pub fn new(base: Instance, params: PolicyParams) -> Result<Self, SimError> {
        let model = Arc::new(ArrivalModel::from_instance(&base)?);
        let schedule = DaySchedule::for_instance(&base);
        Ok(Self {
            base,
            model,
            params,
            schedule,
            fluid: Default::default(),
            apriori: Default::default(),
        })
    }

    pub fn fluid(&self) -> Result<Arc<FluidSolution>, SimError> {
        Ok(self
            .fluid
            .get_or_init(|| solve_fluid(&self.model, &self.base).map(Arc::new))
            .clone()?)
    }

    pub fn apriori_plan(&self) -> Result<Arc<AprioriPlan>, SimError> {
        Ok(self
            .apriori
            .get_or_init(|| {
                let kappa = ResidualCapacity::full(&self.base.train, self.base.leg_count());
                let copies = CopyProbabilities::initial(&self.model, self.params.apriori.psi_threshold)?;
                solve_apriori(&self.base, &kappa, &copies, None, &self.params.apriori).map(Arc::new)
            })
            .clone()?)
    }

    pub fn instance(&self, seed: u64) -> Instance {
        generate_instance(&self.base, &self.model, seed)
    }

    pub fn sampling_fraction(&self) -> f64 {
        self.params.q.unwrap_or_else(|| {
            optimal_q(max_group_fraction(&self.base.types, &self.base.train).min(0.999)).expect("δ below one")
        })
    }

    pub fn policy(&self, kind: PolicyKind, seed: u64) -> Result<Box<dyn Policy>, SimError> {
        let rng = rng_stream(seed, kind as u64 + 1, Purpose::Policy);
        let types = self.base.types.len();
        let rom = |adaptive| RomConfig {
            q: self.sampling_fraction(),
            n_estimate: self.model.total_mean(),
            stride: self.params.rom_stride,
            adaptive,
        };
        let wrap = |e: PolicyError| SimError::Policy {
            step: 0,
            source: e,
            partial: Box::new(RunTrace {
                policy: kind.name().to_string(),
                rows: Vec::new(),
                plan: AssignmentPlan::new(),
                revenue: Yen(0),
                daily_revenue: Vec::new(),
                daily_utilization: Vec::new(),
                stats: PolicyStats::default(),
            }),
        };
        Ok(match kind {
            PolicyKind::FirstFit => Box::new(FirstFit),
            PolicyKind::RandomFit => Box::new(RandomFit::new(rng)),
            PolicyKind::Rom => Box::new(Rom::new(rom(false), types, rng).map_err(wrap)?),
            PolicyKind::AdaptiveRom => Box::new(Rom::new(rom(true), types, rng).map_err(wrap)?),
            PolicyKind::Lambda => Box::new(LambdaPolicy::new(self.fluid()?, 1.0, rng).map_err(wrap)?),
            PolicyKind::Theta => Box::new(LambdaPolicy::new(self.fluid()?, self.params.theta, rng).map_err(wrap)?),
            PolicyKind::Fluid => Box::new(FluidEmpirical::new(self.fluid()?, rng)),
            PolicyKind::Fixed => Box::new(Fixed::new(self.apriori_plan()?)),
            PolicyKind::Fcfs => Box::new(FcfsPolicy::new(
                self.model.clone(),
                AprioriOptions {
                    relative_gap: self.params.fcfs_gap,
                    ..self.params.apriori.clone()
                },
                self.params.blocks.unwrap_or(self.schedule.days),
                rng,
            )),
            PolicyKind::Sfcfs => Box::new(Sfcfs::new(self.params.sfcfs_time_limit)),
        })
    }

    /// Runs one policy on the realization for `seed`, with the audits
    /// that apply to it.
    pub fn run(&self, kind: PolicyKind, seed: u64) -> Result<RunOutcome, SimError> {
        let inst = self.instance(seed);
        self.run_on(&inst, kind, seed)
    }

    pub fn run_on(&self, inst: &Instance, kind: PolicyKind, seed: u64) -> Result<RunOutcome, SimError> {
        let mut policy = self.policy(kind, seed)?;
        let trace = run_policy(inst, policy.as_mut(), self.schedule)?;
        let order = inst.requests();
        let fcfs_violations = audit_fcfs(inst, &order, &trace.plan);
        let sfcfs_audit = if kind == PolicyKind::Sfcfs {
            Some(audit_sfcfs(inst, &order, &trace.plan, self.params.sfcfs_time_limit)?)
        } else {
            None
        };
        Ok(RunOutcome {
            seed,
            kind,
            trace,
            fcfs_violations,
            sfcfs_audit,
        })
    }

    /// Offline optimum on the realized requests.
    pub fn exact(&self, inst: &Instance, opts: &OfflineOptions) -> Result<f64, SimError> {
        let reqs = inst.requests();
        if reqs.is_empty() {
            return Ok(0.0);
        }
        Ok(solve_offline(inst, &reqs, opts)?.value.as_f64())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyReport {
    pub policy: String,
    pub runs: usize,
    pub relative_revenue: Option<Summary>,
    pub revenue: Option<Summary>,
    pub utilization: Option<Summary>,
    pub fcfs_violations: usize,
    pub sfcfs_violations: usize,
    pub sfcfs_undecided: usize,
    pub solver_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub day: usize,
    pub policy: String,
    pub mean: f64,
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub exact: Option<Summary>,
    pub policies: Vec<PolicyReport>,
    /// Mean relative revenue per day (revenue so far over the final exact
    /// value).
    pub revenue_curves: Vec<CurvePoint>,
    pub utilization_curves: Vec<CurvePoint>,
}

/// Aggregates runs against per-seed offline optima.
pub fn metrics(outcomes: &[RunOutcome], exact: &BTreeMap<u64, f64>) -> Report {
    let mut by_kind: BTreeMap<PolicyKind, Vec<&RunOutcome>> = BTreeMap::new();
    for o in outcomes {
        by_kind.entry(o.kind).or_default().push(o);
    }
    let mut policies = Vec::new();
    let mut revenue_curves = Vec::new();
    let mut utilization_curves = Vec::new();
    for (kind, runs) in &by_kind {
        let rel: Vec<f64> = runs
            .iter()
            .filter_map(|o| exact.get(&o.seed).filter(|&&e| e > 0.0).map(|e| o.trace.revenue.as_f64() / e))
            .collect();
        let rev: Vec<f64> = runs.iter().map(|o| o.trace.revenue.as_f64()).collect();
        let util: Vec<f64> = runs.iter().map(|o| o.trace.utilization()).collect();
        policies.push(PolicyReport {
            policy: kind.name().to_string(),
            runs: runs.len(),
            relative_revenue: summarize(&rel),
            revenue: summarize(&rev),
            utilization: summarize(&util),
            fcfs_violations: runs.iter().map(|o| o.fcfs_violations.len()).sum(),
            sfcfs_violations: runs
                .iter()
                .filter_map(|o| o.sfcfs_audit.as_ref())
                .map(|a| a.violations.len())
                .sum(),
            sfcfs_undecided: runs
                .iter()
                .filter_map(|o| o.sfcfs_audit.as_ref())
                .map(|a| a.undecided.len())
                .sum(),
            solver_calls: runs.iter().map(|o| o.trace.stats.solver_calls).sum(),
        });
        let days = runs.iter().map(|o| o.trace.daily_revenue.len()).max().unwrap_or(0);
        for d in 0..days {
            let r: Vec<f64> = runs
                .iter()
                .filter_map(|o| {
                    let e = *exact.get(&o.seed)?;
                    (e > 0.0).then(|| o.trace.daily_revenue.get(d).copied().unwrap_or(0.0) / e)
                })
                .collect();
            if let Some(s) = summarize(&r) {
                revenue_curves.push(CurvePoint {
                    day: d + 1,
                    policy: kind.name().to_string(),
                    mean: s.mean,
                    sd: s.sd,
                });
            }
            let u: Vec<f64> = runs
                .iter()
                .map(|o| o.trace.daily_utilization.get(d).copied().unwrap_or(0.0))
                .collect();
            if let Some(s) = summarize(&u) {
                utilization_curves.push(CurvePoint {
                    day: d + 1,
                    policy: kind.name().to_string(),
                    mean: s.mean,
                    sd: s.sd,
                });
            }
        }
    }
    Report {
        exact: summarize(&exact.values().copied().collect::<Vec<_>>()),
        policies,
        revenue_curves,
        utilization_curves,
    }
}

/// Relative revenue of one policy per seed, in seed order.
pub fn relative_by_seed(outcomes: &[RunOutcome], kind: PolicyKind, exact: &BTreeMap<u64, f64>) -> Vec<(u64, f64)> {
    let mut v: Vec<(u64, f64)> = outcomes
        .iter()
        .filter(|o| o.kind == kind)
        .filter_map(|o| {
            let e = *exact.get(&o.seed)?;
            (e > 0.0).then(|| (o.seed, o.trace.revenue.as_f64() / e))
        })
        .collect();
    v.sort_by_key(|p| p.0);
    v
}

/// Coach of each accepted request, for reporting.
pub fn coach_loads(inst: &Instance, plan: &AssignmentPlan) -> Vec<u64> {
    let mut loads = vec![0u64; inst.train.coach_count()];
    for (r, c) in &plan.assignments {
        loads[c.0] += seat_legs(inst, r);
    }
    loads
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Coach, Network, RequestType, Train};
    use crate::offline::tests::toy;
    use crate::offline::{solve_offline_fcfs, FcfsConfig};

    #[test]
    fn instance_generation_is_deterministic() {
        let base = Instance::builtin("shinkansen-mini").unwrap();
        let am = ArrivalModel::from_instance(&base).unwrap();
        let a = generate_instance(&base, &am, 42);
        let b = generate_instance(&base, &am, 42);
        let c = generate_instance(&base, &am, 43);
        assert_eq!(a, b);
        assert_ne!(a.arrivals, c.arrivals);
        assert!(a.arrivals.as_ref().unwrap().len() <= am.horizon);
    }

    #[test]
    fn type_frequencies_match_rates() {
        let am = ArrivalModel::deterministic(vec![0.1, 0.2, 0.3, 0.4], 100_000).unwrap();
        let mut rng = rng_stream(1, 0, Purpose::Instance);
        let arr = generate_arrivals(&am, &mut rng);
        for (t, rate) in am.rates.iter().enumerate() {
            let f = arr.iter().filter(|x| x.0 == t).count() as f64 / arr.len() as f64;
            assert!((f - rate).abs() < 0.005, "type {t}: {f}");
        }
    }

    #[test]
    fn permutation_is_a_bijection() {
        let mut rng = rng_stream(3, 0, Purpose::Order);
        assert_eq!(random_order_permutation(&[7], &mut rng), vec![7]);
        let mut p = random_order_permutation(&[1, 2, 3, 4, 5, 6], &mut rng);
        p.sort();
        assert_eq!(p, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn first_fit_on_figure2_pair() {
        let types = vec![
            RequestType::new(1, 2, 1, Yen(3_080), 0.5).unwrap(),
            RequestType::new(1, 5, 6, Yen(6 * 14_720), 0.5).unwrap(),
        ];
        let inst = Instance::new(Network::path(5).unwrap(), Train::uniform(1, 6).unwrap(), types)
            .unwrap()
            .with_arrivals(vec![TypeId(0), TypeId(1)])
            .unwrap();
        let trace = run_policy(&inst, &mut FirstFit, DaySchedule::for_instance(&inst)).unwrap();
        assert_eq!(trace.rows[0].verdict, Verdict::Accept(Coach(0)));
        assert_eq!(trace.rows[1].verdict, Verdict::Reject);
        assert!(audit_fcfs(&inst, &inst.requests(), &trace.plan).is_empty());
    }

    #[test]
    fn audits_on_hand_built_plans() {
        let (inst, order) = toy(&[1, 2, 0]);
        let mut bad = AssignmentPlan::new();
        bad.reject(order[0]);
        bad.assign(order[1], Coach(0));
        bad.reject(order[2]);
        assert_eq!(audit_fcfs(&inst, &order, &bad).len(), 1);

        let bc = solve_offline_fcfs(&inst, &order, &FcfsConfig::default()).unwrap();
        assert!(audit_fcfs(&inst, &order, &bc.plan).is_empty());
    }

    /// Two 2-seat coaches. A (leg 1) goes to coach 1 and B (leg 2) to
    /// coach 2, so the full-length pair C fits nowhere: a fair FCFS
    /// rejection. Seating A and B together would have left coach 2 free.
    #[test]
    fn fcfs_fair_but_not_strict() {
        let types = vec![
            RequestType::new(1, 2, 1, Yen(1), 0.4).unwrap(),
            RequestType::new(2, 3, 1, Yen(1), 0.4).unwrap(),
            RequestType::new(1, 3, 2, Yen(4), 0.2).unwrap(),
        ];
        let inst = Instance::new(Network::path(3).unwrap(), Train::uniform(2, 2).unwrap(), types)
            .unwrap()
            .with_arrivals(vec![TypeId(0), TypeId(1), TypeId(2)])
            .unwrap();
        let order = inst.requests();
        let mut plan = AssignmentPlan::new();
        plan.assign(order[0], Coach(0));
        plan.assign(order[1], Coach(1));
        plan.reject(order[2]);
        assert!(audit_fcfs(&inst, &order, &plan).is_empty());
        let strict = audit_sfcfs(&inst, &order, &plan, None).unwrap();
        assert_eq!(strict.violations.len(), 1);
        assert_eq!(strict.violations[0].step, 3);

        let mut sfcfs = Sfcfs::new(None);
        let trace = run_policy(&inst, &mut sfcfs, DaySchedule::for_instance(&inst)).unwrap();
        assert_eq!(trace.revenue, Yen(6));
        assert!(audit_sfcfs(&inst, &order, &trace.plan, None).unwrap().violations.is_empty());
    }

    #[test]
    fn summaries() {
        assert_eq!(summarize(&[]), None);
        let one = summarize(&[3.0]).unwrap();
        assert_eq!(one.sd, None);
        let ba = bland_altman(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert!(ba.pairs.iter().all(|p| p.1 == 0.0));
        assert_eq!((ba.lower_limit, ba.upper_limit), (0.0, 0.0));
        let mut rng = rng_stream(0, 0, Purpose::Bootstrap);
        let (lo, hi) = bootstrap_mean_difference(&[1.0, 1.1, 0.9, 1.0], &[2.0, 2.1, 1.9, 2.0], 2000, &mut rng).unwrap();
        assert!(lo > 0.8 && hi < 1.2);
    }

    #[test]
    fn utilization_counts_seat_legs() {
        let (inst, _) = toy(&[0, 1, 2]);
        let trace = run_policy(&inst, &mut FirstFit, DaySchedule::for_instance(&inst)).unwrap();
        // r1 (2 seats, 2 legs) fills the only coach.
        assert_eq!(trace.utilization(), 1.0);
        assert_eq!(trace.revenue, Yen(10));
        assert!(trace.daily_revenue.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(coach_loads(&inst, &trace.plan), vec![4]);
    }
}
