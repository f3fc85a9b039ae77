//! Problem representation: the station path, the train, request types and
//! requests, residual capacities and assignment plans.
//!
//! Stations and legs are numbered from 1. Leg `l` joins station `l` and
//! station `l + 1`. Coaches and request types are array positions and are
//! numbered from 0 in code; reports print coaches from 1.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("a network needs at least two stations, got {0}")]
    TooFewStations(usize),
    #[error("a train needs at least one coach")]
    NoCoaches,
    #[error("coach {0} has zero seats")]
    EmptyCoach(usize),
    #[error("itinerary {origin}->{destination} is not a forward trip on a {stations}-station path")]
    BadItinerary {
        origin: usize,
        destination: usize,
        stations: usize,
    },
    #[error("group size must be at least 1")]
    EmptyGroup,
    #[error("group of {group} does not fit the smallest coach ({capacity} seats)")]
    GroupTooLarge { group: u32, capacity: u32 },
    #[error("arrival rate {0} is outside (0, 1]")]
    BadRate(f64),
    #[error("request type {0} is not in the catalog")]
    UnknownType(usize),
    #[error("coach {coach} cannot host a group of {group} on legs {legs}")]
    InfeasibleAssignment {
        coach: usize,
        group: u32,
        legs: LegRange,
    },
    #[error("residual capacity has {got} legs, expected {expected}")]
    LegMismatch { got: usize, expected: usize },
}

/// Integer yen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Yen(pub u64);

impl Yen {
    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl Add for Yen {
    type Output = Yen;
    fn add(self, rhs: Yen) -> Yen {
        Yen(self.0 + rhs.0)
    }
}

impl AddAssign for Yen {
    fn add_assign(&mut self, rhs: Yen) {
        self.0 += rhs.0;
    }
}

impl Sum for Yen {
    fn sum<I: Iterator<Item = Yen>>(iter: I) -> Yen {
        iter.fold(Yen(0), Add::add)
    }
}

impl fmt::Display for Yen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = self.0.to_string();
        let mut out = String::with_capacity(digits.len() + digits.len() / 3 + 1);
        for (i, ch) in digits.chars().enumerate() {
            if i > 0 && (digits.len() - i) % 3 == 0 {
                out.push(',');
            }
            out.push(ch);
        }
        write!(f, "¥{out}")
    }
}

/// Stations along a single line, in travel order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    station_names: Vec<String>,
}

impl Network {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, DomainError> {
        let station_names: Vec<String> = names.into_iter().map(Into::into).collect();
        if station_names.len() < 2 {
            return Err(DomainError::TooFewStations(station_names.len()));
        }
        Ok(Self { station_names })
    }

    /// Anonymous path with `stations` stops.
    pub fn path(stations: usize) -> Result<Self, DomainError> {
        Self::new((1..=stations).map(|s| format!("S{s}")))
    }

    pub fn station_names(&self) -> &[String] {
        &self.station_names
    }

    pub fn station_count(&self) -> usize {
        self.station_names.len()
    }

    pub fn leg_count(&self) -> usize {
        self.station_names.len() - 1
    }
}

/// Seats per coach, in the fixed coach order used for first-fit and
/// min-index tie-breaking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Train {
    coach_capacities: Vec<u32>,
}

impl Train {
    pub fn new(coach_capacities: Vec<u32>) -> Result<Self, DomainError> {
        if coach_capacities.is_empty() {
            return Err(DomainError::NoCoaches);
        }
        if let Some(c) = coach_capacities.iter().position(|&w| w == 0) {
            return Err(DomainError::EmptyCoach(c));
        }
        Ok(Self { coach_capacities })
    }

    pub fn uniform(coaches: usize, seats: u32) -> Result<Self, DomainError> {
        Self::new(vec![seats; coaches])
    }

    pub fn coach_capacities(&self) -> &[u32] {
        &self.coach_capacities
    }

    pub fn coach_count(&self) -> usize {
        self.coach_capacities.len()
    }

    pub fn capacity(&self, coach: Coach) -> u32 {
        self.coach_capacities[coach.0]
    }

    pub fn coaches(&self) -> impl Iterator<Item = Coach> + '_ {
        (0..self.coach_capacities.len()).map(Coach)
    }

    /// Reference capacity ω. For heterogeneous trains this is the largest coach.
    pub fn reference_capacity(&self) -> u32 {
        *self.coach_capacities.iter().max().expect("non-empty train")
    }

    pub fn min_capacity(&self) -> u32 {
        *self.coach_capacities.iter().min().expect("non-empty train")
    }

    pub fn total_seats(&self) -> u64 {
        self.coach_capacities.iter().map(|&w| w as u64).sum()
    }
}

/// Coach position in the train, from 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coach(pub usize);

impl Coach {
    /// 1-based number as printed in reports.
    pub fn number(self) -> usize {
        self.0 + 1
    }
}

impl fmt::Display for Coach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Inclusive range of 1-based leg indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LegRange {
    pub first: usize,
    pub last: usize,
}

impl LegRange {
    pub fn iter(self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }

    pub fn len(self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn contains(self, leg: usize) -> bool {
        self.first <= leg && leg <= self.last
    }

    pub fn is_subset_of(self, other: LegRange) -> bool {
        other.first <= self.first && self.last <= other.last
    }
}

impl fmt::Display for LegRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.first == self.last {
            write!(f, "{{{}}}", self.first)
        } else {
            write!(f, "{{{}..{}}}", self.first, self.last)
        }
    }
}

/// Index into an instance's request-type catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeId(pub usize);

/// A class of requests sharing itinerary, group size and price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestType {
    pub origin: usize,
    pub destination: usize,
    pub group_size: u32,
    pub price: Yen,
    pub arrival_rate: f64,
}

impl RequestType {
    pub fn new(
        origin: usize,
        destination: usize,
        group_size: u32,
        price: Yen,
        arrival_rate: f64,
    ) -> Result<Self, DomainError> {
        if origin == 0 || origin >= destination {
            return Err(DomainError::BadItinerary {
                origin,
                destination,
                stations: destination.max(origin),
            });
        }
        if group_size == 0 {
            return Err(DomainError::EmptyGroup);
        }
        if !(arrival_rate > 0.0 && arrival_rate <= 1.0) {
            return Err(DomainError::BadRate(arrival_rate));
        }
        Ok(Self {
            origin,
            destination,
            group_size,
            price,
            arrival_rate,
        })
    }

    /// Checks the type against a concrete network and train.
    pub fn validate_for(&self, network: &Network, train: &Train) -> Result<(), DomainError> {
        if self.origin == 0 || self.origin >= self.destination || self.destination > network.station_count() {
            return Err(DomainError::BadItinerary {
                origin: self.origin,
                destination: self.destination,
                stations: network.station_count(),
            });
        }
        if self.group_size == 0 {
            return Err(DomainError::EmptyGroup);
        }
        if self.group_size > train.min_capacity() {
            return Err(DomainError::GroupTooLarge {
                group: self.group_size,
                capacity: train.min_capacity(),
            });
        }
        if !(self.arrival_rate > 0.0 && self.arrival_rate <= 1.0) {
            return Err(DomainError::BadRate(self.arrival_rate));
        }
        Ok(())
    }

    pub fn legs(&self) -> LegRange {
        legs_of(self)
    }
}

/// Legs traversed by a request type: `origin ..= destination - 1`.
pub fn legs_of(t: &RequestType) -> LegRange {
    LegRange {
        first: t.origin,
        last: t.destination - 1,
    }
}

/// The `ordinal`-th arrival of a type, arriving `arrival_index`-th overall.
/// Requests order by arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Request {
    pub arrival_index: usize,
    pub type_id: TypeId,
    pub ordinal: u32,
}

impl PartialOrd for Request {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Request {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.arrival_index, self.type_id, self.ordinal).cmp(&(
            other.arrival_index,
            other.type_id,
            other.ordinal,
        ))
    }
}

/// Builds requests from a sequence of type ids, numbering ordinals per type
/// and arrival indices from 1.
pub fn requests_from_types(type_ids: &[TypeId]) -> Vec<Request> {
    let mut seen: BTreeMap<TypeId, u32> = BTreeMap::new();
    type_ids
        .iter()
        .enumerate()
        .map(|(i, &type_id)| {
            let ordinal = seen.entry(type_id).or_insert(0);
            *ordinal += 1;
            Request {
                arrival_index: i + 1,
                type_id,
                ordinal: *ordinal,
            }
        })
        .collect()
}

/// Free seats per coach and leg.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ResidualCapacity {
    legs: usize,
    free: Vec<u32>,
}

impl ResidualCapacity {
    /// Empty train.
    pub fn full(train: &Train, legs: usize) -> Self {
        let free = train
            .coach_capacities()
            .iter()
            .flat_map(|&w| std::iter::repeat_n(w, legs))
            .collect();
        Self { legs, free }
    }

    /// From explicit rows, one per coach.
    pub fn from_rows(rows: Vec<Vec<u32>>) -> Result<Self, DomainError> {
        let legs = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != legs) {
            return Err(DomainError::LegMismatch {
                got: bad.len(),
                expected: legs,
            });
        }
        Ok(Self {
            legs,
            free: rows.into_iter().flatten().collect(),
        })
    }

    pub fn leg_count(&self) -> usize {
        self.legs
    }

    pub fn coach_count(&self) -> usize {
        if self.legs == 0 {
            0
        } else {
            self.free.len() / self.legs
        }
    }

    /// Free seats of `coach` on 1-based `leg`.
    pub fn free(&self, coach: Coach, leg: usize) -> u32 {
        self.free[coach.0 * self.legs + leg - 1]
    }

    pub fn row(&self, coach: Coach) -> &[u32] {
        &self.free[coach.0 * self.legs..(coach.0 + 1) * self.legs]
    }

    pub fn fits(&self, t: &RequestType, coach: Coach) -> bool {
        let row = self.row(coach);
        t.legs().iter().all(|l| row[l - 1] >= t.group_size)
    }

    /// Coaches that can host the type on every leg of its itinerary, in coach order.
    pub fn feasible_coaches(&self, t: &RequestType) -> Vec<Coach> {
        (0..self.coach_count())
            .map(Coach)
            .filter(|&c| self.fits(t, c))
            .collect()
    }

    pub fn first_feasible(&self, t: &RequestType) -> Option<Coach> {
        (0..self.coach_count()).map(Coach).find(|&c| self.fits(t, c))
    }

    pub fn any_feasible(&self, t: &RequestType) -> bool {
        self.first_feasible(t).is_some()
    }

    /// Residual capacity after seating `t` in `coach`.
    pub fn apply_assignment(&self, t: &RequestType, coach: Coach) -> Result<Self, DomainError> {
        let mut next = self.clone();
        next.assign(t, coach)?;
        Ok(next)
    }

    /// In-place variant of [`apply_assignment`](Self::apply_assignment).
    pub fn assign(&mut self, t: &RequestType, coach: Coach) -> Result<(), DomainError> {
        self.consume(coach, t.legs(), t.group_size)
    }

    /// Takes `seats` seats of `coach` on every leg of `legs`.
    pub fn consume(&mut self, coach: Coach, legs: LegRange, seats: u32) -> Result<(), DomainError> {
        let ok = coach.0 < self.coach_count()
            && legs.last <= self.legs
            && legs.iter().all(|l| self.free[coach.0 * self.legs + l - 1] >= seats);
        if !ok {
            return Err(DomainError::InfeasibleAssignment {
                coach: coach.number(),
                group: seats,
                legs,
            });
        }
        for l in legs.iter() {
            self.free[coach.0 * self.legs + l - 1] -= seats;
        }
        Ok(())
    }

    pub fn total_free(&self) -> u64 {
        self.free.iter().map(|&f| f as u64).sum()
    }

    /// Smallest free count over all coach-legs.
    pub fn min_free(&self) -> u32 {
        self.free.iter().copied().min().unwrap_or(0)
    }

    /// Free seats on `leg` summed over coaches.
    pub fn leg_free(&self, leg: usize) -> u64 {
        (0..self.coach_count())
            .map(|c| self.free(Coach(c), leg) as u64)
            .sum()
    }

    /// Entrywise `self >= other`.
    pub fn dominates(&self, other: &ResidualCapacity) -> bool {
        self.legs == other.legs
            && self.free.len() == other.free.len()
            && self.free.iter().zip(&other.free).all(|(a, b)| a >= b)
    }
}

/// Which requests were seated where, and which were turned away.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssignmentPlan {
    pub assignments: BTreeMap<Request, Coach>,
    pub rejected: BTreeSet<Request>,
}

impl AssignmentPlan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn assign(&mut self, r: Request, c: Coach) {
        self.assignments.insert(r, c);
    }

    pub fn reject(&mut self, r: Request) {
        self.rejected.insert(r);
    }

    pub fn coach_of(&self, r: &Request) -> Option<Coach> {
        self.assignments.get(r).copied()
    }

    pub fn accepted_count(&self) -> usize {
        self.assignments.len()
    }
}

/// Revenue of the seated requests.
pub fn plan_revenue(plan: &AssignmentPlan, types: &[RequestType]) -> Yen {
    plan.assignments
        .keys()
        .map(|r| types[r.type_id.0].price)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Seating the request overflowed the coach on this leg.
    Capacity {
        request: Request,
        coach: Coach,
        leg: usize,
    },
    /// The request is both seated and rejected.
    Consistency { request: Request },
    /// The plan references a request outside the arrival order or a coach
    /// outside the train.
    Unknown { request: Request },
}

/// Replays the plan in arrival order and lists every broken rule.
pub fn validate_plan(
    plan: &AssignmentPlan,
    train: &Train,
    types: &[RequestType],
    legs: usize,
    arrival_order: &[Request],
) -> Vec<Violation> {
    let mut out = Vec::new();
    let known: BTreeSet<Request> = arrival_order.iter().copied().collect();
    for r in plan.assignments.keys().chain(plan.rejected.iter()) {
        if !known.contains(r) || r.type_id.0 >= types.len() {
            out.push(Violation::Unknown { request: *r });
        }
    }
    for r in plan.assignments.keys() {
        if plan.rejected.contains(r) {
            out.push(Violation::Consistency { request: *r });
        }
    }
    // Replay with signed loads so that every overflowing leg is reported.
    let mut load = vec![0i64; train.coach_count() * legs];
    for r in arrival_order {
        let Some(&coach) = plan.assignments.get(r) else {
            continue;
        };
        let Some(t) = types.get(r.type_id.0) else {
            continue;
        };
        if coach.0 >= train.coach_count() {
            out.push(Violation::Unknown { request: *r });
            continue;
        }
        for l in t.legs().iter().filter(|&l| l <= legs) {
            let cell = &mut load[coach.0 * legs + l - 1];
            *cell += t.group_size as i64;
            if *cell > train.capacity(coach) as i64 {
                out.push(Violation::Capacity {
                    request: *r,
                    coach,
                    leg: l,
                });
            }
        }
    }
    out
}

/// δ: the largest group as a fraction of the reference coach capacity.
pub fn max_group_fraction(types: &[RequestType], train: &Train) -> f64 {
    let largest = types.iter().map(|t| t.group_size).max().unwrap_or(0);
    largest as f64 / train.reference_capacity() as f64
}
