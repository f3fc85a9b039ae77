//! A small exact-enough LP/MIP engine: bounded-variable revised simplex with
//! a dense basis inverse, dual simplex warm starts, and best-bound
//! branch-and-bound with a lazy-cut callback.
//!
//! Models are always maximized. Sizes targeted are hundreds of rows and a
//! few thousand columns.

mod mip;
mod simplex;

use std::fmt::Write as _;
use std::time::Duration;

use thiserror::Error;

pub use mip::{solve_mip, CutCallback, CutOutcome, MipOptions};

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-7;
/// Integrality tolerance.
pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinprogError {
    #[error("constraint {row} references undeclared variable {var}")]
    UnknownVariable { row: usize, var: usize },
    #[error("variable {0} has lower bound above upper bound")]
    BadBounds(usize),
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("basis matrix became singular")]
    SingularBasis,
    #[error("cut callback returned cuts that the rejected point already satisfies")]
    IneffectiveCuts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(name: impl Into<String>, coeffs: Vec<(VarId, f64)>, sense: Sense, rhs: f64) -> Self {
        Self {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        }
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` breaks the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let act = self.activity(values);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// A maximization model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Model {
    pub name: String,
    pub vars: Vec<Variable>,
    pub constraints: Vec<Constraint>,
}

impl Model {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        integer: bool,
        objective: f64,
    ) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            integer,
            objective,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> VarId {
        self.add_var(name, 0.0, 1.0, true, objective)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64, objective: f64) -> VarId {
        self.add_var(name, lower, upper, false, objective)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint::new(name, coeffs, sense, rhs));
        self.constraints.len() - 1
    }

    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn row_count(&self) -> usize {
        self.constraints.len()
    }

    pub fn integer_count(&self) -> usize {
        self.vars.iter().filter(|v| v.integer).count()
    }

    pub fn validate(&self) -> Result<(), LinprogError> {
        for (j, v) in self.vars.iter().enumerate() {
            if v.lower > v.upper || v.lower.is_nan() || v.upper.is_nan() {
                return Err(LinprogError::BadBounds(j));
            }
            if !v.objective.is_finite() {
                return Err(LinprogError::NonFinite(format!("objective of {}", v.name)));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            validate_row(c, i, self.vars.len())?;
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars.iter().zip(values).map(|(v, x)| v.objective * x).sum()
    }

    /// Largest bound or row violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self
            .vars
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(0.0, f64::max);
        self.constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(bounds, f64::max)
    }

    /// CPLEX LP text format.
    pub fn to_lp_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "\\ {}", if self.name.is_empty() { "model" } else { &self.name });
        s.push_str("Maximize\n obj:");
        let obj: Vec<(VarId, f64)> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.objective != 0.0)
            .map(|(j, v)| (VarId(j), v.objective))
            .collect();
        write_terms(&mut s, self, &obj);
        s.push_str("\nSubject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(s, " {}:", lp_name(&c.name, "c", i));
            write_terms(&mut s, self, &c.coeffs);
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            let _ = writeln!(s, " {op} {}", c.rhs);
        }
        s.push_str("Bounds\n");
        for (j, v) in self.vars.iter().enumerate() {
            let name = lp_name(&v.name, "x", j);
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, true) => {
                    let _ = writeln!(s, " {} <= {} <= {}", v.lower, name, v.upper);
                }
                (true, false) => {
                    let _ = writeln!(s, " {name} >= {}", v.lower);
                }
                (false, true) => {
                    let _ = writeln!(s, " -inf <= {name} <= {}", v.upper);
                }
                (false, false) => {
                    let _ = writeln!(s, " {name} free");
                }
            }
        }
        let ints: Vec<String> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.integer)
            .map(|(j, v)| lp_name(&v.name, "x", j))
            .collect();
        if !ints.is_empty() {
            s.push_str("General\n");
            for chunk in ints.chunks(8) {
                let _ = writeln!(s, " {}", chunk.join(" "));
            }
        }
        s.push_str("End\n");
        s
    }
}

fn validate_row(c: &Constraint, row: usize, n: usize) -> Result<(), LinprogError> {
    if !c.rhs.is_finite() {
        return Err(LinprogError::NonFinite(format!("rhs of row {row}")));
    }
    for &(v, a) in &c.coeffs {
        if v.0 >= n {
            return Err(LinprogError::UnknownVariable { row, var: v.0 });
        }
        if !a.is_finite() {
            return Err(LinprogError::NonFinite(format!("row {row}")));
        }
    }
    Ok(())
}

fn lp_name(name: &str, prefix: &str, idx: usize) -> String {
    let clean: String = name
        .chars()
        .map(|ch| if ch.is_ascii_alphanumeric() || "_.[]".contains(ch) { ch } else { '_' })
        .collect();
    if clean.is_empty() || clean.starts_with(|ch: char| ch.is_ascii_digit() || ch == '.') {
        format!("{prefix}{idx}")
    } else {
        clean
    }
}

fn write_terms(s: &mut String, m: &Model, terms: &[(VarId, f64)]) {
    if terms.is_empty() {
        s.push_str(" 0");
        return;
    }
    for &(v, a) in terms {
        let name = lp_name(&m.vars[v.0].name, "x", v.0);
        let sign = if a < 0.0 { '-' } else { '+' };
        let _ = write!(s, " {sign} {} {name}", a.abs());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NodeLimit,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    /// One value per variable; empty when no feasible point is known.
    pub values: Vec<f64>,
    /// Objective of `values`, or negative infinity when there are none.
    pub objective: f64,
    /// Best proven upper bound.
    pub bound: f64,
    pub iterations: usize,
    pub nodes: usize,
    pub cuts_added: usize,
}

impl Solution {
    pub fn has_solution(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    /// Relative gap `(bound - incumbent) / bound`, 0 when proven optimal.
    pub fn gap(&self) -> f64 {
        if !self.has_solution() {
            return f64::INFINITY;
        }
        if self.status == Status::Optimal {
            return 0.0;
        }
        if self.bound.abs() < 1e-12 {
            return 0.0;
        }
        ((self.bound - self.objective) / self.bound.abs()).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub iteration_limit: usize,
    pub time_limit: Option<Duration>,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            iteration_limit: 200_000,
            time_limit: None,
        }
    }
}

/// Solves the continuous relaxation (integrality flags are ignored).
pub fn solve_lp(model: &Model, opts: &LpOptions) -> Result<Solution, LinprogError> {
    model.validate()?;
    let mut spx = simplex::Simplex::new(model, opts.iteration_limit)?;
    let status = spx.solve_primal()?;
    let (values, objective) = match status {
        Status::Optimal => {
            let v = spx.structural_values();
            let obj = model.objective_value(&v);
            (v, obj)
        }
        _ => (Vec::new(), f64::NEG_INFINITY),
    };
    let bound = match status {
        Status::Optimal => objective,
        Status::Unbounded => f64::INFINITY,
        Status::Infeasible => f64::NEG_INFINITY,
        _ => f64::INFINITY,
    };
    Ok(Solution {
        status,
        values,
        objective,
        bound,
        iterations: spx.iterations,
        nodes: 0,
        cuts_added: 0,
    })
}
