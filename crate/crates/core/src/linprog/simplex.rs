//! Revised bounded-variable simplex over a dense explicit basis inverse.
//!
//! Every row `i` gets a logical column `n + i` with entry -1, so the system
//! reads `A x - s = 0` and the row sense becomes a bound on `s`.

use super::{Constraint, LinprogError, Model, Sense, Status, FEAS_TOL};

const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    Lower,
    Upper,
    /// Free nonbasic variable resting at zero.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Basis {
    pub head: Vec<usize>,
    pub state: Vec<VarState>,
}

pub(crate) struct Simplex {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    head: Vec<usize>,
    state: Vec<VarState>,
    x: Vec<f64>,
    binv: Vec<f64>,
    since_refactor: usize,
    pub iterations: usize,
    iteration_limit: usize,
}

impl Simplex {
    pub fn new(model: &Model, iteration_limit: usize) -> Result<Self, LinprogError> {
        let n = model.vars.len();
        let scale = model
            .vars
            .iter()
            .map(|v| v.objective.abs())
            .fold(0.0, f64::max);
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let mut spx = Self {
            n,
            m: 0,
            cols: vec![Vec::new(); n],
            cost: model.vars.iter().map(|v| v.objective / scale).collect(),
            lo: model.vars.iter().map(|v| v.lower).collect(),
            hi: model.vars.iter().map(|v| v.upper).collect(),
            head: Vec::new(),
            state: Vec::new(),
            x: vec![0.0; n],
            binv: Vec::new(),
            since_refactor: 0,
            iterations: 0,
            iteration_limit,
        };
        for j in 0..n {
            let st = spx.resting_state(j);
            spx.state.push(st);
            spx.x[j] = spx.resting_value(j, st);
        }
        spx.add_rows(&model.constraints)?;
        Ok(spx)
    }

    pub fn structural_count(&self) -> usize {
        self.n
    }

    fn resting_state(&self, j: usize) -> VarState {
        if self.lo[j].is_finite() {
            VarState::Lower
        } else if self.hi[j].is_finite() {
            VarState::Upper
        } else {
            VarState::Zero
        }
    }

    fn resting_value(&self, j: usize, st: VarState) -> f64 {
        match st {
            VarState::Lower => self.lo[j],
            VarState::Upper => self.hi[j],
            _ => 0.0,
        }
    }

    /// Appends rows with their logical variables basic, then refactors.
    pub fn add_rows(&mut self, rows: &[Constraint]) -> Result<(), LinprogError> {
        for c in rows {
            let i = self.m;
            for &(v, a) in &c.coeffs {
                if a != 0.0 {
                    self.cols[v.0].push((i, a));
                }
            }
            let (lo, hi) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
                Sense::Eq => (c.rhs, c.rhs),
            };
            self.lo.push(lo);
            self.hi.push(hi);
            self.cost.push(0.0);
            self.state.push(VarState::Basic);
            self.x.push(0.0);
            self.head.push(self.n + i);
            self.m += 1;
        }
        self.refactor()
    }

    pub fn basis(&self) -> Basis {
        Basis {
            head: self.head.clone(),
            state: self.state.clone(),
        }
    }

    /// Installs a basis saved earlier. Rows added since then get their
    /// logical variable basic.
    pub fn set_basis(&mut self, b: &Basis) -> Result<(), LinprogError> {
        let old_m = b.head.len();
        let mut head = b.head.clone();
        head.extend((old_m..self.m).map(|i| self.n + i));
        let mut state = b.state.clone();
        state.extend(std::iter::repeat_n(VarState::Basic, self.m - old_m));
        self.head = head;
        self.state = state;
        self.reseat_nonbasic();
        if self.refactor().is_err() {
            self.slack_basis();
            self.refactor()?;
        }
        Ok(())
    }

    fn slack_basis(&mut self) {
        self.head = (0..self.m).map(|i| self.n + i).collect();
        for j in 0..self.n {
            self.state[j] = self.resting_state(j);
        }
        for i in 0..self.m {
            self.state[self.n + i] = VarState::Basic;
        }
        self.reseat_nonbasic();
    }

    /// Changes a structural variable's bounds and keeps nonbasic values on
    /// their bounds. Call [`recompute_basics`](Self::recompute_basics) after a batch.
    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
    }

    pub fn reseat_nonbasic(&mut self) {
        for j in 0..self.n + self.m {
            let st = self.state[j];
            if st == VarState::Basic {
                continue;
            }
            let st = match st {
                VarState::Lower if self.lo[j].is_finite() => VarState::Lower,
                VarState::Upper if self.hi[j].is_finite() => VarState::Upper,
                VarState::Zero if !self.lo[j].is_finite() && !self.hi[j].is_finite() => VarState::Zero,
                _ => {
                    if self.lo[j].is_finite() {
                        VarState::Lower
                    } else if self.hi[j].is_finite() {
                        VarState::Upper
                    } else {
                        VarState::Zero
                    }
                }
            };
            self.state[j] = st;
            self.x[j] = self.resting_value(j, st);
        }
    }

    pub fn recompute_basics(&mut self) {
        self.reseat_nonbasic();
        let m = self.m;
        let mut r = vec![0.0; m];
        for j in 0..self.n + m {
            if self.state[j] == VarState::Basic || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            self.for_col(j, |row, a| r[row] -= a * xj);
        }
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            let v: f64 = row.iter().zip(&r).map(|(b, rr)| b * rr).sum();
            self.x[self.head[k]] = v;
        }
    }

    #[inline]
    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for &(row, a) in &self.cols[j] {
                f(row, a);
            }
        } else {
            f(j - self.n, -1.0);
        }
    }

    /// Rebuilds the dense inverse from the basis header by Gauss-Jordan
    /// elimination with partial pivoting.
    pub fn refactor(&mut self) -> Result<(), LinprogError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.head.iter().enumerate() {
            self.for_col(j, |row, v| a[row * m + k] = v);
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = a[col * m + col].abs();
            for r in col + 1..m {
                let v = a[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-11 {
                return Err(LinprogError::SingularBasis);
            }
            if piv != col {
                for c in 0..m {
                    a.swap(piv * m + c, col * m + c);
                    inv.swap(piv * m + c, col * m + c);
                }
            }
            let p = a[col * m + col];
            for c in 0..m {
                a[col * m + c] /= p;
                inv[col * m + c] /= p;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f == 0.0 {
                    continue;
                }
                for c in 0..m {
                    a[r * m + c] -= f * a[col * m + c];
                    inv[r * m + c] -= f * inv[col * m + c];
                }
            }
        }
        // `a` was B with columns in basis order; rows of `inv` now index basis positions.
        self.binv = inv;
        self.since_refactor = 0;
        self.recompute_basics();
        Ok(())
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        self.for_col(j, |row, a| {
            for (k, al) in alpha.iter_mut().enumerate() {
                *al += self.binv[k * m + row] * a;
            }
        });
        alpha
    }

    fn duals(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![0.0; m];
        for (k, &c) in cb.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &self.binv[k * m..(k + 1) * m];
            for (p, b) in pi.iter_mut().zip(row) {
                *p += c * b;
            }
        }
        pi
    }

    fn reduced_cost(&self, j: usize, cj: f64, pi: &[f64]) -> f64 {
        let mut d = cj;
        self.for_col(j, |row, a| d -= pi[row] * a);
        d
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let p = alpha[r];
        for c in 0..m {
            self.binv[r * m + c] /= p;
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for (k, chunk) in before.chunks_mut(m).enumerate() {
            let f = alpha[k];
            if f != 0.0 {
                for (v, pr) in chunk.iter_mut().zip(prow.iter()) {
                    *v -= f * pr;
                }
            }
        }
        for (k, chunk) in after.chunks_mut(m).enumerate() {
            let f = alpha[r + 1 + k];
            if f != 0.0 {
                for (v, pr) in chunk.iter_mut().zip(prow.iter()) {
                    *v -= f * pr;
                }
            }
        }
        self.since_refactor += 1;
    }

    fn maybe_refactor(&mut self) -> Result<(), LinprogError> {
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    fn infeasibility(&self, k: usize) -> f64 {
        let j = self.head[k];
        let v = self.x[j];
        if v < self.lo[j] - FEAS_TOL {
            self.lo[j] - v
        } else if v > self.hi[j] + FEAS_TOL {
            v - self.hi[j]
        } else {
            0.0
        }
    }

    pub fn primal_feasible(&self) -> bool {
        (0..self.m).all(|k| self.infeasibility(k) == 0.0)
    }

    /// Composite primal simplex: minimizes the sum of infeasibilities while
    /// any basic variable is out of bounds, then maximizes the objective.
    pub fn solve_primal(&mut self) -> Result<Status, LinprogError> {
        let bland_after = 2 * (self.m + self.n);
        let mut pivots = 0usize;
        loop {
            if self.iterations >= self.iteration_limit {
                return Ok(Status::IterationLimit);
            }
            self.maybe_refactor()?;
            let m = self.m;
            let phase1 = !self.primal_feasible();
            let cb: Vec<f64> = (0..m)
                .map(|k| {
                    let j = self.head[k];
                    if phase1 {
                        let v = self.x[j];
                        if v < self.lo[j] - FEAS_TOL {
                            1.0
                        } else if v > self.hi[j] + FEAS_TOL {
                            -1.0
                        } else {
                            0.0
                        }
                    } else {
                        self.cost[j]
                    }
                })
                .collect();
            let pi = self.duals(&cb);
            let bland = pivots >= bland_after;

            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..self.n + m {
                let st = self.state[j];
                if st == VarState::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let cj = if phase1 { 0.0 } else { self.cost[j] };
                let d = self.reduced_cost(j, cj, &pi);
                let dir = match st {
                    VarState::Lower if d > DUAL_TOL => 1.0,
                    VarState::Upper if d < -DUAL_TOL => -1.0,
                    VarState::Zero if d.abs() > DUAL_TOL => d.signum(),
                    _ => continue,
                };
                if bland {
                    enter = Some((j, dir, d.abs()));
                    break;
                }
                if enter.is_none_or(|(_, _, best)| d.abs() > best) {
                    enter = Some((j, dir, d.abs()));
                }
            }
            let Some((q, dir, _)) = enter else {
                return Ok(if phase1 { Status::Infeasible } else { Status::Optimal });
            };

            let alpha = self.ftran(q);
            let mut best_t = self.hi[q] - self.lo[q];
            let mut leave: Option<(usize, VarState)> = None;
            let mut best_piv = 0.0;
            for (k, &a) in alpha.iter().enumerate() {
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                let rate = -dir * a;
                let j = self.head[k];
                let v = self.x[j];
                let (lo, hi) = (self.lo[j], self.hi[j]);
                let hit = if rate < 0.0 {
                    if v > hi + FEAS_TOL {
                        Some(((v - hi) / -rate, VarState::Upper))
                    } else if v >= lo - FEAS_TOL && lo.is_finite() {
                        Some(((v - lo).max(0.0) / -rate, VarState::Lower))
                    } else {
                        None
                    }
                } else if v < lo - FEAS_TOL {
                    Some(((lo - v) / rate, VarState::Lower))
                } else if v <= hi + FEAS_TOL && hi.is_finite() {
                    Some(((hi - v).max(0.0) / rate, VarState::Upper))
                } else {
                    None
                };
                let Some((t, st)) = hit else { continue };
                let better = match leave {
                    _ if t < best_t - 1e-12 => true,
                    Some((lk, _)) if t <= best_t + 1e-12 => {
                        if bland {
                            j < self.head[lk]
                        } else {
                            a.abs() > best_piv
                        }
                    }
                    None if t <= best_t + 1e-12 && !best_t.is_finite() => true,
                    _ => false,
                };
                if better {
                    best_t = t;
                    leave = Some((k, st));
                    best_piv = a.abs();
                }
            }
            if !best_t.is_finite() {
                return Ok(if phase1 { Status::Infeasible } else { Status::Unbounded });
            }
            let t = best_t;
            for (k, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    self.x[self.head[k]] -= dir * t * a;
                }
            }
            self.x[q] += dir * t;
            match leave {
                Some((r, st)) => {
                    let out = self.head[r];
                    self.state[out] = st;
                    self.x[out] = if st == VarState::Lower { self.lo[out] } else { self.hi[out] };
                    self.pivot(r, &alpha);
                    self.head[r] = q;
                    self.state[q] = VarState::Basic;
                }
                None => {
                    let st = if dir > 0.0 { VarState::Upper } else { VarState::Lower };
                    self.state[q] = st;
                    self.x[q] = if st == VarState::Lower { self.lo[q] } else { self.hi[q] };
                }
            }
            self.iterations += 1;
            pivots += 1;
        }
    }

    /// Dual simplex from a dual-feasible basis. Returns `Infeasible` on a
    /// dual ray, `IterationLimit`, or `Optimal` once primal feasible; a
    /// primal clean-up pass should follow an `Optimal` return.
    pub fn solve_dual(&mut self) -> Result<Status, LinprogError> {
        loop {
            if self.iterations >= self.iteration_limit {
                return Ok(Status::IterationLimit);
            }
            self.maybe_refactor()?;
            let m = self.m;
            let mut r = None;
            let mut worst = 0.0;
            for k in 0..m {
                let inf = self.infeasibility(k);
                if inf > worst {
                    worst = inf;
                    r = Some(k);
                }
            }
            let Some(r) = r else {
                return Ok(Status::Optimal);
            };
            let out = self.head[r];
            let below = self.x[out] < self.lo[out];
            let target = if below { self.lo[out] } else { self.hi[out] };

            let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
            let pi = self.duals(&cb);
            let brow = &self.binv[r * m..(r + 1) * m];

            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..self.n + m {
                let st = self.state[j];
                if st == VarState::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let mut arj = 0.0;
                self.for_col(j, |row, a| arj += brow[row] * a);
                if arj.abs() < PIVOT_TOL {
                    continue;
                }
                // x_r moves by -arj per unit increase of x_j.
                let ok = match st {
                    VarState::Lower => (below && arj < 0.0) || (!below && arj > 0.0),
                    VarState::Upper => (below && arj > 0.0) || (!below && arj < 0.0),
                    VarState::Zero => true,
                    VarState::Basic => false,
                };
                if !ok {
                    continue;
                }
                let d = self.reduced_cost(j, self.cost[j], &pi);
                let ratio = d.abs() / arj.abs();
                let better = match enter {
                    None => true,
                    Some((_, br, ba)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && arj.abs() > ba),
                };
                if better {
                    enter = Some((j, ratio, arj.abs()));
                }
            }
            let Some((q, _, _)) = enter else {
                return Ok(Status::Infeasible);
            };
            let alpha = self.ftran(q);
            if alpha[r].abs() < PIVOT_TOL {
                // Inverse drifted; rebuild and retry.
                self.refactor()?;
                self.iterations += 1;
                continue;
            }
            let delta = (self.x[out] - target) / alpha[r];
            for (k, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    self.x[self.head[k]] -= a * delta;
                }
            }
            self.x[q] += delta;
            self.state[out] = if below { VarState::Lower } else { VarState::Upper };
            self.x[out] = target;
            self.pivot(r, &alpha);
            self.head[r] = q;
            self.state[q] = VarState::Basic;
            self.iterations += 1;
        }
    }

    /// Warm re-solve after bound changes or added rows.
    pub fn resolve(&mut self) -> Result<Status, LinprogError> {
        self.recompute_basics();
        match self.solve_dual()? {
            Status::Infeasible => {
                // Confirm with the primal method from the current basis; a
                // dual ray under slightly wrong reduced costs is not proof.
                if self.dual_feasible() {
                    Ok(Status::Infeasible)
                } else {
                    self.solve_primal()
                }
            }
            Status::IterationLimit => Ok(Status::IterationLimit),
            _ => self.solve_primal(),
        }
    }

    fn dual_feasible(&self) -> bool {
        let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        let pi = self.duals(&cb);
        (0..self.n + self.m).all(|j| {
            let st = self.state[j];
            if st == VarState::Basic || self.lo[j] == self.hi[j] {
                return true;
            }
            let d = self.reduced_cost(j, self.cost[j], &pi);
            match st {
                VarState::Lower => d <= 1e-7,
                VarState::Upper => d >= -1e-7,
                _ => d.abs() <= 1e-7,
            }
        })
    }

    pub fn structural_values(&self) -> Vec<f64> {
        self.x[..self.n].to_vec()
    }
}
