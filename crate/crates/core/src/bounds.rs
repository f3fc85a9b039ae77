//! Closed-form performance guarantees and an exact dynamic program for
//! tiny instances.

use thiserror::Error;

use crate::domain::{ResidualCapacity, Train};
use crate::instance::Instance;
use crate::stochastic::ArrivalModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("{what} = {value} is outside its domain")]
    Domain { what: &'static str, value: f64 },
    #[error("the guarantee needs delta >= 2/omega = {min}, got {delta}")]
    HypothesisViolated { delta: f64, min: f64 },
    #[error("state space of {states} states exceeds the limit of {limit}")]
    StateSpaceTooLarge { states: f64, limit: f64 },
    #[error("arrival model has {model} types, instance has {instance}")]
    TypeMismatch { model: usize, instance: usize },
}

fn domain(what: &'static str, value: f64) -> BoundsError {
    BoundsError::Domain { what, value }
}

/// Competitive ratio `1 - ln(2 - δ) / (1 - δ)` of the random-order
/// sample-then-pack algorithm.
pub fn rom_ratio(delta: f64) -> Result<f64, BoundsError> {
    if !(0.0..1.0).contains(&delta) {
        return Err(domain("delta", delta));
    }
    Ok(1.0 - (2.0 - delta).ln() / (1.0 - delta))
}

/// Sampling fraction `1 / (2 - δ)` attaining [`rom_ratio`].
pub fn optimal_q(delta: f64) -> Result<f64, BoundsError> {
    if !(0.0..1.0).contains(&delta) {
        return Err(domain("delta", delta));
    }
    Ok(1.0 / (2.0 - delta))
}

/// Earlier baseline ratio `1 / (4|L| + 2)`.
pub fn naori_baseline(legs: usize) -> Result<f64, BoundsError> {
    if legs == 0 {
        return Err(domain("legs", 0.0));
    }
    Ok(1.0 / (4.0 * legs as f64 + 2.0))
}

/// Multiplier `1 - ln((i - 1) / (q n)) / (1 - δ)` on `OPT / n` for the
/// expected revenue of arrival `i` in the packing phase. May be negative.
pub fn per_arrival_bound(i: usize, q: f64, n: usize, delta: f64) -> Result<f64, BoundsError> {
    if !(0.0..1.0).contains(&delta) {
        return Err(domain("delta", delta));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(domain("q", q));
    }
    let cutoff = q * n as f64;
    if (i as f64) <= cutoff {
        return Err(domain("i", i as f64));
    }
    Ok(1.0 - ((i as f64 - 1.0) / cutoff).ln() / (1.0 - delta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub delta: f64,
    pub coaches: usize,
    pub omega: f64,
    pub legs: usize,
}

impl BoundInputs {
    fn check(&self) -> Result<(), BoundsError> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(domain("delta", self.delta));
        }
        if !(self.omega >= 1.0) {
            return Err(domain("omega", self.omega));
        }
        if self.delta * self.omega < 1.0 - 1e-12 {
            return Err(domain("delta * omega", self.delta * self.omega));
        }
        if self.coaches == 0 {
            return Err(domain("coaches", 0.0));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guarantee {
    /// Clamped to `[0, 1]`.
    pub factor: f64,
    /// The raw expression was negative.
    pub vacuous: bool,
    /// `1/δ - θω < 0`, a regime the concentration argument does not cover
    /// as a positive deviation.
    pub negative_deviation: bool,
}

fn theta_raw(inp: &BoundInputs, theta: f64) -> (f64, f64) {
    let load = theta * inp.omega;
    let dev = 1.0 / inp.delta - load;
    let exponent = -(inp.coaches as f64 / 2.0) * dev * dev / (load + dev / 3.0);
    (theta * (1.0 - inp.legs as f64 * exponent.exp()), dev)
}

fn clamp(raw: f64, dev: f64) -> Guarantee {
    Guarantee {
        factor: raw.clamp(0.0, 1.0),
        vacuous: raw < 0.0,
        negative_deviation: dev < 0.0,
    }
}

/// Factor `1 - |L| exp(-|C| (1/δ - ω)² / (2ω + (2/3)(1/δ - ω)))` of the
/// fluid upper bound guaranteed by the λ-policy.
pub fn fluid_guarantee(inp: &BoundInputs) -> Result<Guarantee, BoundsError> {
    inp.check()?;
    let min = 2.0 / inp.omega;
    if inp.delta < min - 1e-12 {
        return Err(BoundsError::HypothesisViolated { delta: inp.delta, min });
    }
    let (raw, dev) = theta_raw(inp, 1.0);
    Ok(clamp(raw, dev))
}

/// Factor of the θ-scaled policy,
/// `θ (1 - |L| exp(-(|C|/2)(1/δ - θω)² / (θω + (1/δ - θω)/3)))`.
pub fn theta_guarantee(inp: &BoundInputs, theta: f64) -> Result<Guarantee, BoundsError> {
    inp.check()?;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(domain("theta", theta));
    }
    let (raw, dev) = theta_raw(inp, theta);
    Ok(clamp(raw, dev))
}

/// Maximizes [`theta_guarantee`] over `(0, 1]`: a grid scan followed by
/// golden-section refinement to `1e-5`.
pub fn optimize_theta(inp: &BoundInputs) -> Result<(f64, Guarantee), BoundsError> {
    inp.check()?;
    let f = |th: f64| theta_raw(inp, th).0;
    const GRID: usize = 1000;
    let step = 1.0 / GRID as f64;
    let best = (1..=GRID)
        .map(|k| k as f64 * step)
        .max_by(|a, b| f(*a).total_cmp(&f(*b)))
        .expect("grid is nonempty");
    let (mut lo, mut hi) = ((best - step).max(1e-9), (best + step).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    while hi - lo > 1e-5 {
        if f(a) < f(b) {
            lo = a;
            a = b;
            b = lo + g * (hi - lo);
        } else {
            hi = b;
            b = a;
            a = hi - g * (hi - lo);
        }
    }
    let mid = 0.5 * (lo + hi);
    let theta = [mid, best, 1.0]
        .into_iter()
        .max_by(|x, y| f(*x).total_cmp(&f(*y)))
        .expect("candidates");
    Ok((theta, theta_guarantee(inp, theta)?))
}

/// `(1 - δ) |C|`, in coach-capacity units.
pub fn safe_assignment_threshold(delta: f64, coaches: usize) -> Result<f64, BoundsError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(domain("delta", delta));
    }
    Ok((1.0 - delta) * coaches as f64)
}

/// Whether the occupancy of `leg`, summed over coaches as fractions of
/// each coach's capacity, is within [`safe_assignment_threshold`]. When it
/// is, every single-leg group with `n <= δ ω_c` for all coaches fits
/// some coach.
pub fn leg_is_safe(kappa: &ResidualCapacity, train: &Train, leg: usize, delta: f64) -> Result<bool, BoundsError> {
    let limit = safe_assignment_threshold(delta, train.coach_count())?;
    let occupancy: f64 = train
        .coaches()
        .map(|c| (train.capacity(c) - kappa.free(c, leg)) as f64 / train.capacity(c) as f64)
        .sum();
    Ok(occupancy <= limit + 1e-12)
}

/// Largest state space [`exact_dp_value`] will enumerate.
pub const DP_STATE_LIMIT: f64 = 1e7;

/// Optimal expected revenue by backward induction over residual
/// capacities: each step that is reached brings one request of type `t`
/// with probability `λ_t`, which is rejected or seated in a coach that
/// fits.
pub fn exact_dp_value(inst: &Instance, am: &ArrivalModel) -> Result<f64, BoundsError> {
    if am.type_count() != inst.types.len() {
        return Err(BoundsError::TypeMismatch {
            model: am.type_count(),
            instance: inst.types.len(),
        });
    }
    let legs = inst.leg_count();
    let caps: Vec<u32> = inst.train.coach_capacities().to_vec();
    // Mixed radix over (coach, leg) free counts.
    let mut radix = Vec::with_capacity(caps.len() * legs);
    for &w in &caps {
        radix.extend(std::iter::repeat_n(w as usize + 1, legs));
    }
    let states_f: f64 = radix.iter().map(|&r| r as f64).product();
    if states_f * am.horizon as f64 > DP_STATE_LIMIT {
        return Err(BoundsError::StateSpaceTooLarge {
            states: states_f * am.horizon as f64,
            limit: DP_STATE_LIMIT,
        });
    }
    let states = states_f as usize;
    let mut stride = vec![1usize; radix.len()];
    for k in 1..radix.len() {
        stride[k] = stride[k - 1] * radix[k - 1];
    }
    // Per type and coach: state offset removed by a seating.
    let moves: Vec<Vec<usize>> = inst
        .types
        .iter()
        .map(|t| {
            (0..caps.len())
                .map(|c| t.legs().iter().map(|l| t.group_size as usize * stride[c * legs + l - 1]).sum())
                .collect()
        })
        .collect();
    let digit = |s: usize, k: usize| (s / stride[k]) % radix[k];
    let fits = |s: usize, t: usize, c: usize| {
        let ty = &inst.types[t];
        ty.legs().iter().all(|l| digit(s, c * legs + l - 1) >= ty.group_size as usize)
    };
    let curve = am.survival_curve();
    let mut next = vec![0.0f64; states];
    let mut cur = vec![0.0f64; states];
    for i in (1..=am.horizon).rev() {
        let cont = if i < am.horizon { curve[i] / curve[i - 1] } else { 0.0 };
        for s in 0..states {
            let stay = cont * next[s];
            let mut v = 0.0;
            for (t, ty) in inst.types.iter().enumerate() {
                let rate = am.rates[t];
                if rate == 0.0 {
                    continue;
                }
                let mut best = stay;
                for c in 0..caps.len() {
                    if fits(s, t, c) {
                        best = best.max(ty.price.as_f64() + cont * next[s - moves[t][c]]);
                    }
                }
                v += rate * best;
            }
            cur[s] = v;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(next[states - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Coach, Network, RequestType, Yen};
    use crate::stochastic::{solve_fluid, tests::tiny};

    #[test]
    fn rom_closed_forms() {
        let r = rom_ratio(0.06).unwrap();
        assert!((r - 0.2950).abs() < 5e-4, "{r}");
        assert!((optimal_q(0.06).unwrap() - 0.5155).abs() < 1e-4);
        assert!((rom_ratio(0.0).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-15);
        assert!(rom_ratio(1.0).is_err());
        let mut last = f64::INFINITY;
        for k in 1..=90 {
            let v = rom_ratio(k as f64 / 100.0).unwrap();
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn baseline_values() {
        assert!((naori_baseline(4).unwrap() - 1.0 / 18.0).abs() < 1e-15);
        assert!((naori_baseline(5).unwrap() - 0.0455).abs() < 1e-4);
        assert_eq!(naori_baseline(1).unwrap(), 1.0 / 6.0);
        // The ratio beats the baseline on all of δ <= 0.9 once |L| >= 5; for
        // shorter routes the crossing comes earlier (δ ≈ 0.575 at |L| = 1).
        for legs in 5..=10 {
            for k in 0..=90 {
                assert!(rom_ratio(k as f64 / 100.0).unwrap() > naori_baseline(legs).unwrap());
            }
        }
        assert!(rom_ratio(0.57).unwrap() > naori_baseline(1).unwrap());
        assert!(rom_ratio(0.58).unwrap() < naori_baseline(1).unwrap());
        assert!(rom_ratio(0.9).unwrap() < naori_baseline(4).unwrap());
    }

    #[test]
    fn per_arrival_multiplier() {
        assert!((per_arrival_bound(51, 0.5, 100, 0.06).unwrap() - 1.0).abs() < 1e-12);
        assert!(per_arrival_bound(50, 0.5, 100, 0.06).is_err());
        let near_one = per_arrival_bound(80, 0.5, 100, 0.999).unwrap();
        assert!(near_one < -100.0);
    }

    #[test]
    fn fluid_guarantee_cases() {
        let inp = BoundInputs {
            delta: 0.06,
            coaches: 20,
            omega: 100.0,
            legs: 4,
        };
        let g = fluid_guarantee(&inp).unwrap();
        assert!((g.factor - 1.0).abs() < 1e-6);
        assert!(g.negative_deviation);
        assert_eq!(fluid_guarantee(&BoundInputs { legs: 0, ..inp }).unwrap().factor, 1.0);
        assert!(matches!(
            fluid_guarantee(&BoundInputs { delta: 0.01, ..inp }),
            Err(BoundsError::HypothesisViolated { .. })
        ));
        let mut last = 0.0;
        for coaches in 1..40 {
            let f = fluid_guarantee(&BoundInputs {
                delta: 0.03,
                coaches,
                ..inp
            })
            .unwrap()
            .factor;
            assert!(f >= last);
            last = f;
        }
    }

    #[test]
    fn theta_optimum() {
        let inp = BoundInputs {
            delta: 0.01,
            coaches: 20,
            omega: 100.0,
            legs: 4,
        };
        let (theta, g) = optimize_theta(&inp).unwrap();
        assert!((theta - 0.9218).abs() < 1e-3, "{theta}");
        assert!((g.factor - 0.916).abs() < 1e-3, "{}", g.factor);
        for k in 1..=100 {
            let th = k as f64 / 100.0;
            assert!(theta_guarantee(&inp, th).unwrap().factor <= th + 1e-15);
        }
        let at2 = BoundInputs { delta: 0.02, ..inp };
        assert_eq!(
            theta_guarantee(&at2, 1.0).unwrap(),
            fluid_guarantee(&at2).unwrap()
        );
        for delta in [0.02, 0.03, 0.06, 0.2] {
            let (th, _) = optimize_theta(&BoundInputs { delta, ..inp }).unwrap();
            assert!((th - 1.0).abs() < 1e-4, "delta {delta}: {th}");
        }
        assert!(theta_guarantee(&inp, 0.0).is_err());
    }

    #[test]
    fn safe_threshold_values() {
        assert!((safe_assignment_threshold(0.06, 20).unwrap() - 18.8).abs() < 1e-12);
        assert_eq!(safe_assignment_threshold(1.0, 5).unwrap(), 0.0);
    }

    /// Every capacity matrix of up to three coaches with up to five seats:
    /// a safe leg always has room for a single-leg group within δω.
    #[test]
    fn safe_leg_admits_single_leg_groups() {
        for coaches in 1..=3usize {
            for omega in 1..=5u32 {
                let train = Train::uniform(coaches, omega).unwrap();
                let combos = (omega as usize + 1).pow(coaches as u32);
                for code in 0..combos {
                    let mut rest = code;
                    let free: Vec<Vec<u32>> = (0..coaches)
                        .map(|_| {
                            let f = (rest % (omega as usize + 1)) as u32;
                            rest /= omega as usize + 1;
                            vec![f]
                        })
                        .collect();
                    let kappa = ResidualCapacity::from_rows(free).unwrap();
                    for n in 1..=omega {
                        let delta = n as f64 / omega as f64;
                        if leg_is_safe(&kappa, &train, 1, delta).unwrap() {
                            assert!(
                                (0..coaches).any(|c| kappa.free(Coach(c), 1) >= n),
                                "{kappa:?} n={n}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn dp_one_step_and_empty() {
        let inst = tiny(&[0.4, 0.6], &[10, 4], &[(1, 3, 2), (1, 2, 1)], 5);
        let am = ArrivalModel::deterministic(vec![0.4, 0.6], 1).unwrap();
        assert!((exact_dp_value(&inst, &am).unwrap() - (0.4 * 10.0 + 0.6 * 4.0)).abs() < 1e-12);

        // One seat: only the first request is seated.
        let types = vec![RequestType::new(1, 2, 1, Yen(3), 1.0).unwrap()];
        let inst = Instance::new(Network::path(2).unwrap(), Train::uniform(1, 1).unwrap(), types).unwrap();
        let am = ArrivalModel::deterministic(vec![1.0], 3).unwrap();
        assert_eq!(exact_dp_value(&inst, &am).unwrap(), 3.0);
    }

    #[test]
    fn dp_below_fluid() {
        let inst = tiny(&[0.3, 0.2, 0.5], &[10, 4, 7], &[(1, 3, 2), (1, 2, 1), (2, 3, 1)], 2);
        let am = ArrivalModel::poisson(vec![0.3, 0.2, 0.5], 4.0, 4).unwrap();
        let dp = exact_dp_value(&inst, &am).unwrap();
        let fluid = solve_fluid(&am, &inst).unwrap().value;
        assert!(dp > 0.0);
        assert!(dp <= fluid + 1e-6, "dp {dp} fluid {fluid}");
    }

    #[test]
    fn dp_refuses_large_state_spaces() {
        let inst = tiny(&[1.0], &[1], &[(1, 3, 1)], 100);
        let big = Instance::new(inst.network.clone(), Train::uniform(4, 100).unwrap(), inst.types.clone()).unwrap();
        let am = ArrivalModel::deterministic(vec![1.0], 10).unwrap();
        assert!(matches!(
            exact_dp_value(&big, &am),
            Err(BoundsError::StateSpaceTooLarge { .. })
        ));
    }
}
