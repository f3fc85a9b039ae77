//! Arrival probabilities and the stochastic planning models: the fluid
//! relaxation and the a-priori pre-assignment of likely requests.

use std::collections::BTreeMap;
use std::time::Duration;

use statrs::distribution::{Binomial, DiscreteCDF, Poisson};
use thiserror::Error;

use crate::domain::{Coach, DomainError, ResidualCapacity, TypeId};
use crate::instance::Instance;
use crate::linprog::{solve_lp, LinprogError, LpOptions, MipOptions, Model, Sense, Status, VarId};
use crate::packing::{self, PackClass};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StochasticError {
    #[error("arrival rates sum to {0}, expected 1")]
    BadRates(f64),
    #[error("expected total arrivals must be positive, got {0}")]
    BadMean(f64),
    #[error("the horizon must have at least one step")]
    ZeroHorizon,
    #[error("step {step} is outside the horizon 1..={horizon}")]
    OutOfHorizon { step: usize, horizon: usize },
    #[error("instance has no arrival model")]
    MissingArrivalModel,
    #[error("no request copy clears the probability threshold {0}")]
    EmptyPsi(f64),
    #[error("threshold must lie in (0, 1], got {0}")]
    BadThreshold(f64),
    #[error("the forced request does not fit the residual capacity")]
    Infeasible,
    #[error("solver stopped without a plan ({0:?})")]
    NoPlan(Status),
    #[error(transparent)]
    Solver(#[from] LinprogError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TotalArrivals {
    /// Poisson with this mean, conditioned on at least one arrival.
    Poisson { mean: f64 },
    /// Exactly `count` arrivals.
    Fixed { count: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalModel {
    pub rates: Vec<f64>,
    pub horizon: usize,
    pub total: TotalArrivals,
    /// `survival[i] = Pr[X >= i]`, index 0 unused.
    survival: Vec<f64>,
}

fn check_rates(rates: &[f64]) -> Result<(), StochasticError> {
    let sum: f64 = rates.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || rates.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
        return Err(StochasticError::BadRates(sum));
    }
    Ok(())
}

impl ArrivalModel {
    pub fn poisson(rates: Vec<f64>, mean: f64, horizon: usize) -> Result<Self, StochasticError> {
        check_rates(&rates)?;
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(StochasticError::BadMean(mean));
        }
        if horizon == 0 {
            return Err(StochasticError::ZeroHorizon);
        }
        let dist = Poisson::new(mean).map_err(|_| StochasticError::BadMean(mean))?;
        let at_least_one = dist.sf(0);
        let mut survival = vec![1.0; horizon + 1];
        for (i, s) in survival.iter_mut().enumerate().skip(2) {
            *s = (dist.sf(i as u64 - 1) / at_least_one).min(1.0);
        }
        Ok(Self {
            rates,
            horizon,
            total: TotalArrivals::Poisson { mean },
            survival,
        })
    }

    pub fn deterministic(rates: Vec<f64>, count: usize) -> Result<Self, StochasticError> {
        check_rates(&rates)?;
        if count == 0 {
            return Err(StochasticError::ZeroHorizon);
        }
        Ok(Self {
            rates,
            horizon: count,
            total: TotalArrivals::Fixed { count },
            survival: vec![1.0; count + 1],
        })
    }

    /// Poisson model from the instance's demand section.
    pub fn from_instance(inst: &Instance) -> Result<Self, StochasticError> {
        let d = inst.demand.as_ref().ok_or(StochasticError::MissingArrivalModel)?;
        Self::poisson(
            inst.types.iter().map(|t| t.arrival_rate).collect(),
            d.total_mean,
            d.horizon_steps(),
        )
    }

    pub fn type_count(&self) -> usize {
        self.rates.len()
    }

    pub fn total_mean(&self) -> f64 {
        match self.total {
            TotalArrivals::Poisson { mean } => mean,
            TotalArrivals::Fixed { count } => count as f64,
        }
    }

    fn check_step(&self, i: usize) -> Result<(), StochasticError> {
        if i == 0 || i > self.horizon {
            return Err(StochasticError::OutOfHorizon {
                step: i,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// `Pr[X >= i]`.
    pub fn survival(&self, i: usize) -> Result<f64, StochasticError> {
        self.check_step(i)?;
        Ok(self.survival[i])
    }

    /// `Pr[X >= i]` for `i = 1..=horizon`.
    pub fn survival_curve(&self) -> &[f64] {
        &self.survival[1..]
    }

    /// `Pr[X >= i + 1 | X >= i]`, defined for `i < horizon`.
    pub fn continue_probability(&self, i: usize) -> Result<f64, StochasticError> {
        self.check_step(i)?;
        self.check_step(i + 1)?;
        Ok(self.survival[i + 1] / self.survival[i])
    }

    /// `Pr[X_t >= j]` for the number of type-`t` arrivals.
    pub fn type_survival(&self, t: TypeId, j: u32) -> f64 {
        if j == 0 {
            return 1.0;
        }
        let rate = self.rates[t.0];
        if rate <= 0.0 {
            return 0.0;
        }
        match self.total {
            TotalArrivals::Poisson { mean } => Poisson::new(rate * mean).map_or(0.0, |d| d.sf(j as u64 - 1)),
            TotalArrivals::Fixed { count } => {
                Binomial::new(rate, count as u64).map_or(0.0, |d| d.sf(j as u64 - 1))
            }
        }
    }

    /// Expected arrivals from step `i` on, given that step `i` is reached.
    pub fn expected_remaining(&self, i: usize) -> Result<f64, StochasticError> {
        self.check_step(i)?;
        Ok(self.survival[i..].iter().sum::<f64>() / self.survival[i])
    }

    /// Tail of the remaining type-`t` count from step `i` on, as a Poisson
    /// thinning of [`expected_remaining`](Self::expected_remaining).
    pub fn remaining_type_survival(&self, t: TypeId, j: u32, i: usize) -> Result<f64, StochasticError> {
        if j == 0 {
            return Ok(1.0);
        }
        let mean = self.rates[t.0] * self.expected_remaining(i)?;
        Ok(if mean <= 0.0 {
            0.0
        } else {
            Poisson::new(mean).map_or(0.0, |d| d.sf(j as u64 - 1))
        })
    }
}

/// Request copies `(t, j)`, `j = 1..=counts[t]`, downward closed in `j`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PsiSet {
    pub counts: Vec<u32>,
}

impl PsiSet {
    pub fn len(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, t: TypeId, j: u32) -> bool {
        j >= 1 && self.counts.get(t.0).is_some_and(|&c| j <= c)
    }

    pub fn members(&self) -> Vec<(TypeId, u32)> {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(t, &c)| (1..=c).map(move |j| (TypeId(t), j)))
            .collect()
    }

    pub fn is_subset_of(&self, other: &PsiSet) -> bool {
        self.counts.iter().enumerate().all(|(t, &c)| c == 0 || other.contains(TypeId(t), c))
    }
}

/// Arrival probability of each request copy, non-increasing per type.
#[derive(Debug, Clone, PartialEq)]
pub struct CopyProbabilities {
    pub probs: Vec<Vec<f64>>,
}

impl CopyProbabilities {
    fn collect(am: &ArrivalModel, threshold: f64, f: impl Fn(TypeId, u32) -> f64) -> Result<Self, StochasticError> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(StochasticError::BadThreshold(threshold));
        }
        let probs = (0..am.type_count())
            .map(|t| {
                let mut v = Vec::new();
                for j in 1..=am.horizon as u32 {
                    let p = f(TypeId(t), j);
                    if p < threshold {
                        break;
                    }
                    v.push(p);
                }
                v
            })
            .collect();
        Ok(Self { probs })
    }

    /// `Pr[X_t >= j]` for the copies clearing `threshold`.
    pub fn initial(am: &ArrivalModel, threshold: f64) -> Result<Self, StochasticError> {
        Self::collect(am, threshold, |t, j| am.type_survival(t, j))
    }

    /// Copies still to come from step `i` on.
    pub fn remaining(am: &ArrivalModel, i: usize, threshold: f64) -> Result<Self, StochasticError> {
        am.check_step(i)?;
        Self::collect(am, threshold, |t, j| am.remaining_type_survival(t, j, i).unwrap_or(0.0))
    }

    pub fn psi(&self) -> PsiSet {
        PsiSet {
            counts: self.probs.iter().map(|v| v.len() as u32).collect(),
        }
    }
}

pub fn psi_set(am: &ArrivalModel, threshold: f64) -> Result<PsiSet, StochasticError> {
    Ok(CopyProbabilities::initial(am, threshold)?.psi())
}

/// `x[t][i - 1][c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidVars {
    pub x: Vec<Vec<Vec<VarId>>>,
}

/// Fluid relaxation with one variable per type, step and coach.
pub fn build_fluid_model(am: &ArrivalModel, inst: &Instance) -> Result<(Model, FluidVars), StochasticError> {
    if am.type_count() != inst.types.len() {
        return Err(StochasticError::BadRates(am.rates.iter().sum()));
    }
    let mut m = Model::new("fluid");
    let coaches = inst.train.coach_count();
    let mut x = Vec::with_capacity(inst.types.len());
    for (t, ty) in inst.types.iter().enumerate() {
        let mut per_step = Vec::with_capacity(am.horizon);
        for i in 1..=am.horizon {
            let obj = am.survival[i] * ty.price.as_f64();
            let row: Vec<VarId> = (0..coaches)
                .map(|c| m.add_continuous(format!("x_{t}_{i}_{}", c + 1), 0.0, f64::INFINITY, obj))
                .collect();
            m.add_constraint(
                format!("rate_{t}_{i}"),
                row.iter().map(|&v| (v, 1.0)).collect(),
                Sense::Le,
                am.rates[t],
            );
            per_step.push(row);
        }
        x.push(per_step);
    }
    for c in inst.train.coaches() {
        for l in 1..=inst.leg_count() {
            let mut coeffs = Vec::new();
            for (t, ty) in inst.types.iter().enumerate() {
                if ty.legs().contains(l) {
                    for step in &x[t] {
                        coeffs.push((step[c.0], ty.group_size as f64));
                    }
                }
            }
            if !coeffs.is_empty() {
                m.add_constraint(
                    format!("cap_{}_{l}", c.number()),
                    coeffs,
                    Sense::Le,
                    inst.train.capacity(c) as f64,
                );
            }
        }
    }
    Ok((m, FluidVars { x }))
}

/// Optimal fluid flows in aggregated form: per type and coach, the total
/// mass `coach_mass[t][c]`; within a type, mass occupies the earliest
/// steps first at rate `λ_t` per step.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidSolution {
    pub rates: Vec<f64>,
    pub coach_mass: Vec<Vec<f64>>,
    pub type_mass: Vec<f64>,
    /// Upper bound on the expected revenue of any policy.
    pub value: f64,
}

impl FluidSolution {
    /// `sum_c x_{t,i,c}`.
    pub fn step_mass(&self, t: TypeId, i: usize) -> f64 {
        let rate = self.rates[t.0];
        (self.type_mass[t.0] - rate * (i as f64 - 1.0)).clamp(0.0, rate)
    }

    /// `x_{t,i,c}`.
    pub fn x(&self, t: TypeId, i: usize, c: Coach) -> f64 {
        let total = self.type_mass[t.0];
        if total <= 0.0 {
            return 0.0;
        }
        self.step_mass(t, i) * self.coach_mass[t.0][c.0] / total
    }
}

/// Fluid relaxation solved in aggregated form. Because the survival curve
/// is non-increasing, a type's mass is worth the most on its earliest
/// steps, so per-step variables collapse to a concave piecewise-linear
/// value of the type's total mass; steps with equal survival share one
/// piece.
pub fn solve_fluid(am: &ArrivalModel, inst: &Instance) -> Result<FluidSolution, StochasticError> {
    if am.type_count() != inst.types.len() {
        return Err(StochasticError::BadRates(am.rates.iter().sum()));
    }
    let mut runs: Vec<(usize, f64)> = Vec::new();
    for i in 1..=am.horizon {
        let s = am.survival[i];
        match runs.last_mut() {
            Some((len, s0)) if (s - *s0).abs() <= 1e-12 => {
                *s0 = (*s0 * *len as f64 + s) / (*len as f64 + 1.0);
                *len += 1;
            }
            _ => runs.push((1, s)),
        }
    }
    let mut m = Model::new("fluid_aggregated");
    let coaches = inst.train.coach_count();
    let mut y: Vec<Vec<Option<VarId>>> = Vec::with_capacity(inst.types.len());
    for (t, ty) in inst.types.iter().enumerate() {
        let rate = am.rates[t];
        let cap_mass = inst.train.coach_capacities().iter().copied().max().unwrap_or(0) as f64 / ty.group_size as f64;
        let row: Vec<Option<VarId>> = (0..coaches)
            .map(|c| {
                (rate > 0.0).then(|| {
                    let ub = inst.train.coach_capacities()[c] as f64 / ty.group_size as f64;
                    m.add_continuous(format!("y_{t}_{}", c + 1), 0.0, ub, 0.0)
                })
            })
            .collect();
        if rate > 0.0 {
            // Pieces past the total mass any coach set could ever hold are never used.
            let reach = cap_mass * coaches as f64;
            let mut coeffs: Vec<(VarId, f64)> = row.iter().flatten().map(|&v| (v, 1.0)).collect();
            let mut covered = 0.0;
            for (k, &(len, s)) in runs.iter().enumerate() {
                if covered >= reach {
                    break;
                }
                let mass = rate * len as f64;
                let u = m.add_continuous(format!("w_{t}_{k}"), 0.0, mass, s * ty.price.as_f64());
                coeffs.push((u, -1.0));
                covered += mass;
            }
            m.add_constraint(format!("mass_{t}"), coeffs, Sense::Eq, 0.0);
        }
        y.push(row);
    }
    for c in 0..coaches {
        for l in 1..=inst.leg_count() {
            let coeffs: Vec<(VarId, f64)> = inst
                .types
                .iter()
                .enumerate()
                .filter(|(_, ty)| ty.legs().contains(l))
                .filter_map(|(t, ty)| y[t][c].map(|v| (v, ty.group_size as f64)))
                .collect();
            if !coeffs.is_empty() {
                m.add_constraint(
                    format!("cap_{}_{l}", c + 1),
                    coeffs,
                    Sense::Le,
                    inst.train.coach_capacities()[c] as f64,
                );
            }
        }
    }
    let sol = solve_lp(&m, &LpOptions::default())?;
    if sol.status != Status::Optimal {
        return Err(StochasticError::NoPlan(sol.status));
    }
    let mut coach_mass: Vec<Vec<f64>> = y
        .iter()
        .map(|row| row.iter().map(|v| v.map_or(0.0, |v| sol.values[v.0].max(0.0))).collect())
        .collect();
    spread_over_identical_coaches(&mut coach_mass, inst.train.coach_capacities());
    let type_mass = coach_mass.iter().map(|r| r.iter().sum()).collect();
    Ok(FluidSolution {
        rates: am.rates.clone(),
        coach_mass,
        type_mass,
        value: sol.objective,
    })
}

/// Coaches of equal capacity are interchangeable in the fluid LP, so the
/// average over each such class is optimal as well. Spreading the mass
/// keeps coach-level policies from betting on a single coach.
fn spread_over_identical_coaches(mass: &mut [Vec<f64>], capacities: &[u32]) {
    let mut classes: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (c, &w) in capacities.iter().enumerate() {
        classes.entry(w).or_default().push(c);
    }
    for row in mass.iter_mut() {
        for members in classes.values() {
            let avg = members.iter().map(|&c| row[c]).sum::<f64>() / members.len() as f64;
            for &c in members {
                row[c] = avg;
            }
        }
    }
}

/// `x[(t, j)][c]` over the copies of the Ψ-set.
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriVars {
    pub x: BTreeMap<(TypeId, u32), Vec<VarId>>,
}

/// Pre-assignment model with one binary per likely request copy and
/// coach, and copies of a type seated in order.
pub fn build_apriori_model(
    am: &ArrivalModel,
    inst: &Instance,
    threshold: f64,
) -> Result<(Model, AprioriVars, PsiSet), StochasticError> {
    let copies = CopyProbabilities::initial(am, threshold)?;
    let psi = copies.psi();
    if psi.is_empty() {
        return Err(StochasticError::EmptyPsi(threshold));
    }
    let mut m = Model::new("apriori");
    let mut x = BTreeMap::new();
    for (t, j) in psi.members() {
        let ty = &inst.types[t.0];
        let obj = copies.probs[t.0][j as usize - 1] * ty.price.as_f64();
        let vars: Vec<VarId> = inst
            .train
            .coaches()
            .map(|c| m.add_binary(format!("x_{}_{j}_{}", t.0, c.number()), obj))
            .collect();
        m.add_constraint(
            format!("once_{}_{j}", t.0),
            vars.iter().map(|&v| (v, 1.0)).collect(),
            Sense::Le,
            1.0,
        );
        if j > 1 {
            let prev: &Vec<VarId> = &x[&(t, j - 1)];
            let mut coeffs: Vec<(VarId, f64)> = prev.iter().map(|&v| (v, 1.0)).collect();
            coeffs.extend(vars.iter().map(|&v| (v, -1.0)));
            m.add_constraint(format!("order_{}_{j}", t.0), coeffs, Sense::Ge, 0.0);
        }
        x.insert((t, j), vars);
    }
    for c in inst.train.coaches() {
        for l in 1..=inst.leg_count() {
            let coeffs: Vec<(VarId, f64)> = x
                .iter()
                .filter(|((t, _), _)| inst.types[t.0].legs().contains(l))
                .map(|((t, _), v)| (v[c.0], inst.types[t.0].group_size as f64))
                .collect();
            if !coeffs.is_empty() {
                m.add_constraint(
                    format!("cap_{}_{l}", c.number()),
                    coeffs,
                    Sense::Le,
                    inst.train.capacity(c) as f64,
                );
            }
        }
    }
    Ok((m, AprioriVars { x }, psi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AprioriOptions {
    /// Copies with arrival probability below this are left out.
    pub psi_threshold: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: usize,
    pub relative_gap: f64,
}

impl Default for AprioriOptions {
    fn default() -> Self {
        Self {
            psi_threshold: 0.001,
            time_limit: Some(Duration::from_secs(2)),
            node_limit: 5_000,
            relative_gap: 1e-4,
        }
    }
}

/// Coaches for the planned copies of each type, in copy order, and the
/// coach of the forced request if there was one.
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriPlan {
    pub coaches: Vec<Vec<Coach>>,
    pub forced: Option<Coach>,
    pub value: f64,
    pub bound: f64,
    pub status: Status,
}

impl AprioriPlan {
    /// Coach planned for the `j`-th copy of type `t`.
    pub fn coach_for(&self, t: TypeId, j: u32) -> Option<Coach> {
        (j >= 1).then(|| self.coaches[t.0].get(j as usize - 1).copied()).flatten()
    }

    pub fn planned(&self) -> usize {
        self.coaches.iter().map(Vec::len).sum()
    }
}

/// Optimal pre-assignment of the copies in `copies` into the residual
/// capacity `kappa`. With `forced`, one extra request of that type must
/// be seated as well.
pub fn solve_apriori(
    inst: &Instance,
    kappa: &ResidualCapacity,
    copies: &CopyProbabilities,
    forced: Option<TypeId>,
    opts: &AprioriOptions,
) -> Result<AprioriPlan, StochasticError> {
    let mut classes: Vec<PackClass> = Vec::with_capacity(copies.probs.len() + 1);
    for (t, probs) in copies.probs.iter().enumerate() {
        let ty = &inst.types[t];
        classes.push(PackClass {
            legs: ty.legs(),
            size: ty.group_size,
            min: 0,
            max: probs.len() as u32,
            values: probs.iter().map(|p| p * ty.price.as_f64()).collect(),
        });
    }
    if let Some(t) = forced {
        let ty = &inst.types[t.0];
        if !kappa.any_feasible(ty) {
            return Err(StochasticError::Infeasible);
        }
        classes.push(PackClass::flat(ty.legs(), ty.group_size, 1, 1, ty.price.as_f64()));
    } else if copies.psi().is_empty() {
        return Err(StochasticError::EmptyPsi(opts.psi_threshold));
    }
    let mip = MipOptions {
        time_limit: opts.time_limit,
        node_limit: opts.node_limit,
        relative_gap: opts.relative_gap,
        ..MipOptions::default()
    };
    let res = packing::solve_integer(&classes, kappa, &mip)?;
    if res.counts.is_empty() {
        return Err(match res.status {
            Status::Infeasible => StochasticError::Infeasible,
            s => StochasticError::NoPlan(s),
        });
    }
    let counts = res.int_counts();
    let types = copies.probs.len();
    let coaches = counts[..types]
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .flat_map(|(c, &k)| std::iter::repeat_n(Coach(c), k as usize))
                .collect()
        })
        .collect();
    let forced_coach = forced.and_then(|_| counts[types].iter().position(|&k| k > 0).map(Coach));
    let value = packing::value_of(&classes, &counts);
    Ok(AprioriPlan {
        coaches,
        forced: forced_coach,
        value,
        bound: res.bound.max(value),
        status: res.status,
    })
}
