//! Type-aggregated packing models.
//!
//! Requests of the same type are interchangeable, so instead of one binary
//! per request and coach we use an integer count per class and coach. When
//! the copies of a class carry different (non-increasing) values, unit
//! piece variables `u_j` with `sum_j u_j = sum_c a_c` pick up the first
//! copies' values, which is exact for integer counts.

use std::time::Duration;

use crate::domain::{Coach, LegRange, ResidualCapacity};
use crate::linprog::{
    solve_lp, solve_mip, CutCallback, CutOutcome, LinprogError, LpOptions, MipOptions, Model, Sense,
    Status, VarId,
};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PackClass {
    pub legs: LegRange,
    pub size: u32,
    /// Copies that must be seated.
    pub min: u32,
    /// Copies available.
    pub max: u32,
    /// Value of the j-th seated copy, non-increasing, length `max`.
    pub values: Vec<f64>,
}

impl PackClass {
    pub fn flat(legs: LegRange, size: u32, min: u32, max: u32, value: f64) -> Self {
        Self {
            legs,
            size,
            min,
            max,
            values: vec![value; max as usize],
        }
    }

    fn is_flat(&self) -> bool {
        self.values
            .first()
            .is_none_or(|&v0| self.values.iter().all(|&v| (v - v0).abs() <= 1e-12 * v0.abs().max(1.0)))
    }

    fn fits_per_coach(&self, kappa: &ResidualCapacity, c: Coach) -> u32 {
        let row = kappa.row(c);
        self.legs
            .iter()
            .map(|l| row[l - 1] / self.size)
            .min()
            .unwrap_or(0)
    }

    fn value_of_first(&self, count: u32) -> f64 {
        self.values.iter().take(count as usize).sum()
    }
}

pub(crate) struct PackModel {
    pub model: Model,
    /// `a[k][c]`, absent when the class can never fit coach `c`.
    pub a: Vec<Vec<Option<VarId>>>,
    /// Piece variables for classes with varying copy values.
    pub u: Vec<Vec<VarId>>,
}

pub(crate) fn build(classes: &[PackClass], kappa: &ResidualCapacity, integer: bool) -> PackModel {
    let coaches = kappa.coach_count();
    let legs = kappa.leg_count();
    let mut model = Model::new("packing");
    let mut a = Vec::with_capacity(classes.len());
    let mut u = Vec::with_capacity(classes.len());
    for (k, cl) in classes.iter().enumerate() {
        let flat = cl.is_flat();
        let value = if flat { cl.values.first().copied().unwrap_or(0.0) } else { 0.0 };
        let row: Vec<Option<VarId>> = (0..coaches)
            .map(|c| {
                let ub = cl.fits_per_coach(kappa, Coach(c)).min(cl.max);
                (ub > 0).then(|| model.add_var(format!("a_{k}_{}", c + 1), 0.0, ub as f64, integer, value))
            })
            .collect();
        let pieces: Vec<VarId> = if flat {
            Vec::new()
        } else {
            cl.values
                .iter()
                .enumerate()
                .map(|(j, &v)| model.add_continuous(format!("u_{k}_{}", j + 1), 0.0, 1.0, v))
                .collect()
        };
        let present: Vec<(VarId, f64)> = row.iter().flatten().map(|&v| (v, 1.0)).collect();
        let reach: u32 = row
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_some())
            .map(|(c, _)| cl.fits_per_coach(kappa, Coach(c)).min(cl.max))
            .sum();
        if !flat {
            let mut coeffs = present.clone();
            coeffs.extend(pieces.iter().map(|&p| (p, -1.0)));
            model.add_constraint(format!("pieces_{k}"), coeffs, Sense::Eq, 0.0);
        }
        if cl.min > 0 && cl.min == cl.max {
            model.add_constraint(format!("count_{k}"), present.clone(), Sense::Eq, cl.max as f64);
        } else {
            if cl.min > 0 {
                model.add_constraint(format!("min_{k}"), present.clone(), Sense::Ge, cl.min as f64);
            }
            if reach > cl.max && flat {
                model.add_constraint(format!("max_{k}"), present.clone(), Sense::Le, cl.max as f64);
            }
        }
        a.push(row);
        u.push(pieces);
    }
    for c in 0..coaches {
        for l in 1..=legs {
            let mut coeffs = Vec::new();
            let mut worst = 0u64;
            for (k, cl) in classes.iter().enumerate() {
                if let Some(v) = a[k][c] {
                    if cl.legs.contains(l) {
                        coeffs.push((v, cl.size as f64));
                        worst += cl.size as u64 * model.vars[v.0].upper as u64;
                    }
                }
            }
            let cap = kappa.free(Coach(c), l);
            if !coeffs.is_empty() && worst > cap as u64 {
                model.add_constraint(format!("cap_{}_{l}", c + 1), coeffs, Sense::Le, cap as f64);
            }
        }
    }
    PackModel { model, a, u }
}

impl PackModel {
    pub fn counts(&self, values: &[f64]) -> Vec<Vec<f64>> {
        self.a
            .iter()
            .map(|row| row.iter().map(|v| v.map_or(0.0, |v| values[v.0])).collect())
            .collect()
    }

    /// Full variable vector for integer counts.
    pub fn point(&self, counts: &[Vec<u32>]) -> Vec<f64> {
        let mut x = vec![0.0; self.model.vars.len()];
        for (k, row) in self.a.iter().enumerate() {
            let mut total = 0u32;
            for (c, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    x[v.0] = counts[k][c] as f64;
                    total += counts[k][c];
                }
            }
            for (j, p) in self.u[k].iter().enumerate() {
                x[p.0] = if (j as u32) < total { 1.0 } else { 0.0 };
            }
        }
        x
    }
}

fn load_fits(classes: &[PackClass], kappa: &ResidualCapacity, counts: &[Vec<u32>]) -> Option<ResidualCapacity> {
    let mut free = kappa.clone();
    for (k, cl) in classes.iter().enumerate() {
        for (c, &n) in counts[k].iter().enumerate() {
            if n > 0 {
                free.consume(Coach(c), cl.legs, n * cl.size).ok()?;
            }
        }
    }
    Some(free)
}

/// First-fit completion: mandatory copies first (largest footprint
/// first), then optional copies by value per seat-leg. Returns `None` when
/// some mandatory copy cannot be placed.
pub(crate) fn greedy_complete(
    classes: &[PackClass],
    kappa: &ResidualCapacity,
    start: Vec<Vec<u32>>,
) -> Option<Vec<Vec<u32>>> {
    let mut counts = start;
    let mut free = load_fits(classes, kappa, &counts)?;
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by_key(|&k| std::cmp::Reverse(classes[k].size as usize * classes[k].legs.len()));
    for &k in &order {
        let cl = &classes[k];
        let mut have: u32 = counts[k].iter().sum();
        while have < cl.min {
            let c = (0..free.coach_count()).map(Coach).find(|&c| fits(&free, cl, c))?;
            place(&mut free, cl, c);
            counts[k][c.0] += 1;
            have += 1;
        }
    }
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (k, cl) in classes.iter().enumerate() {
            let have: u32 = counts[k].iter().sum();
            if have >= cl.max {
                continue;
            }
            let v = cl.values[have as usize];
            if v <= 0.0 {
                continue;
            }
            if (0..free.coach_count()).all(|c| !fits(&free, cl, Coach(c))) {
                continue;
            }
            let density = v / (cl.size as f64 * cl.legs.len() as f64);
            if best.is_none_or(|(_, d)| density > d) {
                best = Some((k, density));
            }
        }
        let Some((k, _)) = best else { break };
        let cl = &classes[k];
        let c = (0..free.coach_count())
            .map(Coach)
            .find(|&c| fits(&free, cl, c))
            .expect("checked above");
        place(&mut free, cl, c);
        counts[k][c.0] += 1;
    }
    Some(counts)
}

fn fits(free: &ResidualCapacity, cl: &PackClass, c: Coach) -> bool {
    let row = free.row(c);
    cl.legs.iter().all(|l| row[l - 1] >= cl.size)
}

fn place(free: &mut ResidualCapacity, cl: &PackClass, c: Coach) {
    free.consume(c, cl.legs, cl.size).expect("caller checked the fit");
}

struct Rounding<'a> {
    classes: &'a [PackClass],
    kappa: &'a ResidualCapacity,
    pm: &'a PackModel,
}

impl CutCallback for Rounding<'_> {
    fn separate(&mut self, _values: &[f64]) -> CutOutcome {
        CutOutcome::certified()
    }

    fn primal_heuristic(&mut self, lp_values: &[f64]) -> Option<Vec<f64>> {
        let floored: Vec<Vec<u32>> = self
            .pm
            .counts(lp_values)
            .into_iter()
            .map(|r| r.into_iter().map(|x| (x + 1e-6).floor().max(0.0) as u32).collect())
            .collect();
        let counts = greedy_complete(self.classes, self.kappa, floored)?;
        Some(self.pm.point(&counts))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct PackResult {
    pub status: Status,
    /// Per class and coach; integral for MIP solves.
    pub counts: Vec<Vec<f64>>,
    pub objective: f64,
    pub bound: f64,
    pub nodes: usize,
}

impl PackResult {
    pub fn int_counts(&self) -> Vec<Vec<u32>> {
        self.counts
            .iter()
            .map(|r| r.iter().map(|&x| x.round().max(0.0) as u32).collect())
            .collect()
    }
}

pub(crate) fn solve_integer(
    classes: &[PackClass],
    kappa: &ResidualCapacity,
    opts: &MipOptions,
) -> Result<PackResult, LinprogError> {
    let pm = build(classes, kappa, true);
    let mut opts = opts.clone();
    let zero = vec![vec![0u32; kappa.coach_count()]; classes.len()];
    if opts.initial_incumbent.is_none() {
        opts.initial_incumbent = greedy_complete(classes, kappa, zero).map(|c| pm.point(&c));
    }
    let mut cb = Rounding {
        classes,
        kappa,
        pm: &pm,
    };
    let sol = solve_mip(&pm.model, Some(&mut cb), &opts)?;
    let counts = if sol.has_solution() {
        pm.counts(&sol.values)
    } else {
        Vec::new()
    };
    Ok(PackResult {
        status: sol.status,
        counts,
        objective: sol.objective,
        bound: sol.bound,
        nodes: sol.nodes,
    })
}

pub(crate) fn solve_relaxed(classes: &[PackClass], kappa: &ResidualCapacity) -> Result<PackResult, LinprogError> {
    let pm = build(classes, kappa, false);
    let sol = solve_lp(&pm.model, &LpOptions::default())?;
    let counts = if sol.has_solution() {
        pm.counts(&sol.values)
    } else {
        Vec::new()
    };
    Ok(PackResult {
        status: sol.status,
        counts,
        objective: sol.objective,
        bound: sol.bound,
        nodes: 0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Fit {
    Yes(Vec<Vec<u32>>),
    No,
    Unknown,
}

/// Decides whether every mandatory copy can be seated at once
/// (`min == max` for all classes is the intended use).
pub(crate) fn pack_all(classes: &[PackClass], kappa: &ResidualCapacity, time_limit: Option<Duration>) -> Result<Fit, LinprogError> {
    for l in 1..=kappa.leg_count() {
        let need: u64 = classes
            .iter()
            .filter(|cl| cl.legs.contains(l))
            .map(|cl| cl.size as u64 * cl.min as u64)
            .sum();
        if need > kappa.leg_free(l) {
            return Ok(Fit::No);
        }
    }
    for cl in classes.iter().filter(|cl| cl.min > 0) {
        let room: u32 = (0..kappa.coach_count()).map(|c| cl.fits_per_coach(kappa, Coach(c))).sum();
        if room < cl.min {
            return Ok(Fit::No);
        }
    }
    let zero = vec![vec![0u32; kappa.coach_count()]; classes.len()];
    let mandatory: Vec<PackClass> = classes
        .iter()
        .map(|cl| PackClass::flat(cl.legs, cl.size, cl.min, cl.min, 0.0))
        .collect();
    if let Some(c) = greedy_complete(&mandatory, kappa, zero) {
        return Ok(Fit::Yes(c));
    }
    let opts = MipOptions {
        time_limit,
        stop_at: Some(0.0),
        ..MipOptions::default()
    };
    let res = solve_integer(&mandatory, kappa, &opts)?;
    Ok(match res.status {
        _ if !res.counts.is_empty() => Fit::Yes(res.int_counts()),
        Status::Infeasible | Status::Optimal => Fit::No,
        _ => Fit::Unknown,
    })
}

/// Total value of integer counts.
pub(crate) fn value_of(classes: &[PackClass], counts: &[Vec<u32>]) -> f64 {
    classes
        .iter()
        .zip(counts)
        .map(|(cl, row)| cl.value_of_first(row.iter().sum()))
        .sum()
}
