use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use super::simplex::{Basis, Simplex};
use super::{Constraint, LinprogError, Model, Solution, Status, FEAS_TOL, INT_TOL};

/// Answer of a lazy-constraint callback for an integral point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CutOutcome {
    /// Violated valid inequalities. Empty means the point is accepted.
    pub cuts: Vec<Constraint>,
    /// Optional feasible point discovered while separating, for example a
    /// repaired version of the rejected point.
    pub incumbent: Option<Vec<f64>>,
}

impl CutOutcome {
    pub fn certified() -> Self {
        Self::default()
    }
}

pub trait CutCallback {
    fn separate(&mut self, values: &[f64]) -> CutOutcome;

    /// Rounding heuristic run on fractional node solutions.
    fn primal_heuristic(&mut self, _lp_values: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct MipOptions {
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    pub iteration_limit: usize,
    /// Stop once `(bound - incumbent) / bound` falls to this value.
    pub relative_gap: f64,
    /// Known feasible point to start from.
    pub initial_incumbent: Option<Vec<f64>>,
    /// Prune every node whose bound is below this value.
    pub cutoff: Option<f64>,
    /// Stop as soon as an incumbent reaches this value.
    pub stop_at: Option<f64>,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self {
            node_limit: 50_000,
            time_limit: None,
            iteration_limit: 5_000_000,
            relative_gap: 0.0,
            initial_incumbent: None,
            cutoff: None,
            stop_at: None,
        }
    }
}

struct Node {
    bound: f64,
    seq: u64,
    parent: u64,
    changes: Rc<Vec<(usize, f64, f64)>>,
    basis: Rc<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on bound; earlier nodes first among equal bounds.
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    model: Model,
    root_lo: Vec<f64>,
    root_hi: Vec<f64>,
    cb: Option<&'a mut dyn CutCallback>,
    incumbent: Option<(Vec<f64>, f64)>,
    integral_objective: bool,
    cuts_added: usize,
    /// Best bound among nodes dropped only because of the relative gap.
    gap_bound: f64,
}

impl Search<'_> {
    fn inc_value(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::NEG_INFINITY, |(_, v)| *v)
    }

    /// Whether a node with LP bound `bound` can still beat the incumbent.
    fn promising(&self, bound: f64, opts: &MipOptions) -> bool {
        if let Some(c) = opts.cutoff {
            if bound < c - 1e-6 {
                return false;
            }
        }
        let inc = self.inc_value();
        if !inc.is_finite() {
            return true;
        }
        let b = if self.integral_objective {
            (bound + 1e-6).floor()
        } else {
            bound
        };
        if !b.is_finite() {
            return true;
        }
        let tol = 1e-9 * inc.abs().max(1.0) + opts.relative_gap * b.abs();
        b > inc + tol
    }

    /// `promising`, remembering the bounds that the gap tolerance gives up.
    fn keep(&mut self, bound: f64, opts: &MipOptions) -> bool {
        if self.promising(bound, opts) {
            return true;
        }
        if opts.relative_gap > 0.0 && opts.cutoff.is_none_or(|c| bound >= c - 1e-6) {
            let b = if self.integral_objective { (bound + 1e-6).floor() } else { bound };
            if b > self.inc_value() {
                self.gap_bound = self.gap_bound.max(b);
            }
        }
        false
    }

    fn round_integers(&self, values: &mut [f64]) {
        for (v, var) in values.iter_mut().zip(&self.model.vars) {
            if var.integer {
                *v = v.round();
            }
        }
    }

    /// Validates and possibly installs a candidate incumbent. Cuts the
    /// callback returns while checking it are added to `pending`.
    fn offer(&mut self, mut values: Vec<f64>, pending: &mut Vec<Constraint>) -> bool {
        if values.len() != self.model.vars.len() {
            return false;
        }
        if self
            .model
            .vars
            .iter()
            .zip(&values)
            .any(|(var, &x)| var.integer && (x - x.round()).abs() > INT_TOL)
        {
            return false;
        }
        self.round_integers(&mut values);
        if self.model.max_violation(&values) > 1e-6 {
            return false;
        }
        for ((x, lo), hi) in values.iter().zip(&self.root_lo).zip(&self.root_hi) {
            if *x < lo - 1e-6 || *x > hi + 1e-6 {
                return false;
            }
        }
        if let Some(cb) = self.cb.as_mut() {
            let out = cb.separate(&values);
            if !out.cuts.is_empty() {
                pending.extend(out.cuts);
                return false;
            }
        }
        let obj = self.model.objective_value(&values);
        if obj > self.inc_value() + 1e-9 {
            self.incumbent = Some((values, obj));
            true
        } else {
            false
        }
    }
}

fn most_fractional(model: &Model, values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (var, &x)) in model.vars.iter().zip(values).enumerate() {
        if !var.integer {
            continue;
        }
        let f = x - x.floor();
        let dist = f.min(1.0 - f);
        if dist <= INT_TOL {
            continue;
        }
        if best.is_none_or(|(_, d)| dist > d + 1e-12) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

/// Best-bound branch-and-bound. With a callback, every integral LP
/// solution is offered to it and the cuts it returns are added globally
/// before the node is re-solved.
pub fn solve_mip(
    model: &Model,
    cuts: Option<&mut dyn CutCallback>,
    opts: &MipOptions,
) -> Result<Solution, LinprogError> {
    model.validate()?;
    let start = Instant::now();
    let integral_objective = model.vars.iter().all(|v| {
        v.objective == 0.0 || (v.integer && (v.objective - v.objective.round()).abs() < 1e-12)
    });
    let mut spx = Simplex::new(model, opts.iteration_limit)?;
    let mut search = Search {
        model: model.clone(),
        root_lo: model.vars.iter().map(|v| v.lower).collect(),
        root_hi: model.vars.iter().map(|v| v.upper).collect(),
        cb: cuts,
        incumbent: None,
        integral_objective,
        cuts_added: 0,
        gap_bound: f64::NEG_INFINITY,
    };
    let mut pending: Vec<Constraint> = Vec::new();
    if let Some(init) = opts.initial_incumbent.clone() {
        search.offer(init, &mut pending);
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node {
        bound: f64::INFINITY,
        seq,
        parent: u64::MAX,
        changes: Rc::new(Vec::new()),
        basis: Rc::new(spx.basis()),
    });
    let mut last_solved = u64::MAX;
    let mut nodes = 0usize;
    let mut limit_status: Option<Status> = None;
    let mut root_unbounded = false;

    while let Some(node) = heap.pop() {
        if let Some(target) = opts.stop_at {
            if search.inc_value() >= target - 1e-6 {
                heap.push(node);
                break;
            }
        }
        if !search.keep(node.bound, opts) {
            continue;
        }
        if nodes >= opts.node_limit {
            heap.push(node);
            limit_status = Some(Status::NodeLimit);
            break;
        }
        if opts.time_limit.is_some_and(|t| start.elapsed() >= t) {
            heap.push(node);
            limit_status = Some(Status::TimeLimit);
            break;
        }
        nodes += 1;

        for j in 0..spx.structural_count() {
            spx.set_bounds(j, search.root_lo[j], search.root_hi[j]);
        }
        for &(j, lo, hi) in node.changes.iter() {
            let (l, h) = (spx.lo[j].max(lo), spx.hi[j].min(hi));
            spx.set_bounds(j, l, h);
        }
        if !pending.is_empty() {
            search.cuts_added += pending.len();
            spx.add_rows(&pending)?;
            search.model.constraints.append(&mut pending);
        }
        if node.parent != last_solved {
            spx.set_basis(&node.basis)?;
        }

        loop {
            let status = if node.parent == u64::MAX && last_solved == u64::MAX && nodes == 1 {
                spx.solve_primal()?
            } else {
                spx.resolve()?
            };
            last_solved = node.seq;
            match status {
                Status::Optimal => {}
                Status::Unbounded => {
                    root_unbounded = nodes == 1;
                    break;
                }
                Status::IterationLimit => {
                    limit_status = Some(Status::IterationLimit);
                    break;
                }
                _ => break,
            }
            let values = spx.structural_values();
            let obj = search.model.objective_value(&values);
            if !search.keep(obj, opts) {
                break;
            }
            match most_fractional(&search.model, &values) {
                Some(j) => {
                    if let Some(cb) = search.cb.as_mut() {
                        if let Some(h) = cb.primal_heuristic(&values) {
                            search.offer(h, &mut pending);
                        }
                    }
                    let basis = Rc::new(spx.basis());
                    let x = values[j];
                    for (lo, hi) in [(f64::NEG_INFINITY, x.floor()), (x.ceil(), f64::INFINITY)] {
                        seq += 1;
                        let mut ch = (*node.changes).clone();
                        ch.push((j, lo, hi));
                        heap.push(Node {
                            bound: obj,
                            seq,
                            parent: node.seq,
                            changes: Rc::new(ch),
                            basis: Rc::clone(&basis),
                        });
                    }
                    break;
                }
                None => {
                    let mut point = values;
                    search.round_integers(&mut point);
                    let mut fresh = Vec::new();
                    let mut accepted_by_cb = true;
                    if let Some(cb) = search.cb.as_mut() {
                        let out = cb.separate(&point);
                        if let Some(inc) = out.incumbent {
                            search.offer(inc, &mut fresh);
                        }
                        if !out.cuts.is_empty() {
                            if out.cuts.iter().all(|c| c.violation(&point) <= FEAS_TOL) {
                                return Err(LinprogError::IneffectiveCuts);
                            }
                            fresh.extend(out.cuts);
                            accepted_by_cb = false;
                        }
                    }
                    if accepted_by_cb {
                        let obj = search.model.objective_value(&point);
                        if obj > search.inc_value() + 1e-9 {
                            search.incumbent = Some((point, obj));
                        }
                    }
                    fresh.append(&mut pending);
                    if fresh.is_empty() {
                        break;
                    }
                    search.cuts_added += fresh.len();
                    spx.add_rows(&fresh)?;
                    search.model.constraints.extend(fresh);
                    if accepted_by_cb {
                        // Only incumbent-check cuts were added; they are
                        // still global, so re-solving is harmless.
                        continue;
                    }
                }
            }
        }
        if root_unbounded {
            break;
        }
        if limit_status == Some(Status::IterationLimit) {
            break;
        }
    }

    if root_unbounded {
        return Ok(Solution {
            status: Status::Unbounded,
            values: Vec::new(),
            objective: f64::NEG_INFINITY,
            bound: f64::INFINITY,
            iterations: spx.iterations,
            nodes,
            cuts_added: search.cuts_added,
        });
    }

    let open_bound = heap
        .iter()
        .filter(|n| search.promising(n.bound, opts) || limit_status.is_some())
        .map(|n| n.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let inc = search.inc_value();
    let (values, objective) = match search.incumbent.take() {
        Some((v, o)) => (v, o),
        None => (Vec::new(), f64::NEG_INFINITY),
    };
    let status = match limit_status {
        Some(s) => s,
        None if values.is_empty() => Status::Infeasible,
        None => Status::Optimal,
    };
    let bound = if limit_status.is_some() {
        open_bound.max(inc).max(search.gap_bound)
    } else {
        inc.max(search.gap_bound)
    };
    Ok(Solution {
        status,
        values,
        objective,
        bound,
        iterations: spx.iterations,
        nodes,
        cuts_added: search.cuts_added,
    })
}
