//! Instances: network, train, request-type catalog, optional demand
//! description and optional fixed arrival sequence. JSON in and out.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{requests_from_types, DomainError, Network, Request, RequestType, Train, TypeId, Yen};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("reading instance: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing instance: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
    #[error("unknown builtin instance `{0}` (expected `shinkansen` or `shinkansen-mini`)")]
    UnknownBuiltin(String),
}

/// Average demand and fare of one origin-destination pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdDemand {
    pub origin: usize,
    pub destination: usize,
    /// Fare per passenger.
    pub price: u64,
    /// Expected number of requests over the horizon.
    pub demand: f64,
}

/// How requests are generated: expected total, discretized horizon and
/// per-pair demand split over group sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSpec {
    pub total_mean: f64,
    /// Number of time steps; defaults to `ceil(total_mean + 4 sqrt(total_mean))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default = "default_days")]
    pub horizon_days: u32,
    /// Probability of group sizes 1, 2, ...
    pub group_size_distribution: Vec<f64>,
    pub od: Vec<OdDemand>,
}

fn default_days() -> u32 {
    30
}

impl DemandSpec {
    pub fn horizon_steps(&self) -> usize {
        self.horizon
            .unwrap_or_else(|| (self.total_mean + 4.0 * self.total_mean.sqrt()).ceil() as usize)
    }

    /// One request type per pair and group size with positive probability.
    /// The group pays `size` fares and arrives with rate
    /// `demand * g(size) / total demand`.
    pub fn expand_types(&self) -> Result<Vec<RequestType>, InstanceError> {
        let total: f64 = self.od.iter().map(|o| o.demand).sum();
        if total <= 0.0 {
            return Err(InstanceError::Invalid("total OD demand must be positive".into()));
        }
        let gsum: f64 = self.group_size_distribution.iter().sum();
        if (gsum - 1.0).abs() > 1e-9 {
            return Err(InstanceError::Invalid(format!(
                "group size distribution sums to {gsum}, expected 1"
            )));
        }
        let mut types = Vec::new();
        for o in &self.od {
            for (i, &g) in self.group_size_distribution.iter().enumerate() {
                if g <= 0.0 || o.demand <= 0.0 {
                    continue;
                }
                let n = i as u32 + 1;
                types.push(RequestType::new(
                    o.origin,
                    o.destination,
                    n,
                    Yen(o.price * n as u64),
                    o.demand * g / total,
                )?);
            }
        }
        Ok(types)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub network: Network,
    pub train: Train,
    pub types: Vec<RequestType>,
    pub demand: Option<DemandSpec>,
    /// Fixed arrival sequence, as type ids.
    pub arrivals: Option<Vec<TypeId>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceFile {
    #[serde(default)]
    name: String,
    stations: Vec<String>,
    coach_capacities: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    types: Option<Vec<TypeFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arrival_model: Option<DemandSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arrivals: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TypeFile {
    origin: usize,
    destination: usize,
    group_size: u32,
    price: u64,
    arrival_rate: f64,
}

impl Instance {
    pub fn new(network: Network, train: Train, types: Vec<RequestType>) -> Result<Self, InstanceError> {
        let inst = Self {
            name: String::new(),
            network,
            train,
            types,
            demand: None,
            arrivals: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_arrivals(mut self, arrivals: Vec<TypeId>) -> Result<Self, InstanceError> {
        self.arrivals = Some(arrivals);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.types.is_empty() {
            return Err(InstanceError::Invalid("instance has no request types".into()));
        }
        for t in &self.types {
            t.validate_for(&self.network, &self.train)?;
        }
        if let Some(arr) = &self.arrivals {
            if let Some(bad) = arr.iter().find(|t| t.0 >= self.types.len()) {
                return Err(DomainError::UnknownType(bad.0).into());
            }
        }
        if let Some(d) = &self.demand {
            if !(d.total_mean > 0.0) {
                return Err(InstanceError::Invalid("total_mean must be positive".into()));
            }
            if d.horizon_days == 0 {
                return Err(InstanceError::Invalid("horizon_days must be at least 1".into()));
            }
        }
        Ok(())
    }

    pub fn leg_count(&self) -> usize {
        self.network.leg_count()
    }

    pub fn type_of(&self, r: &Request) -> &RequestType {
        &self.types[r.type_id.0]
    }

    /// Requests of the fixed arrival sequence (empty when there is none).
    pub fn requests(&self) -> Vec<Request> {
        self.arrivals
            .as_deref()
            .map(requests_from_types)
            .unwrap_or_default()
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let f: InstanceFile = serde_json::from_str(text)?;
        let network = Network::new(f.stations)?;
        let train = Train::new(f.coach_capacities)?;
        let types = match (f.types, &f.arrival_model) {
            (Some(ts), _) => ts
                .into_iter()
                .map(|t| RequestType::new(t.origin, t.destination, t.group_size, Yen(t.price), t.arrival_rate))
                .collect::<Result<Vec<_>, _>>()?,
            (None, Some(d)) => d.expand_types()?,
            (None, None) => {
                return Err(InstanceError::Invalid(
                    "instance needs `types` or an `arrival_model`".into(),
                ))
            }
        };
        let inst = Self {
            name: f.name,
            network,
            train,
            types,
            demand: f.arrival_model,
            arrivals: f.arrivals.map(|a| a.into_iter().map(TypeId).collect()),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        let f = InstanceFile {
            name: self.name.clone(),
            stations: self.network.station_names().to_vec(),
            coach_capacities: self.train.coach_capacities().to_vec(),
            types: Some(
                self.types
                    .iter()
                    .map(|t| TypeFile {
                        origin: t.origin,
                        destination: t.destination,
                        group_size: t.group_size,
                        price: t.price.0,
                        arrival_rate: t.arrival_rate,
                    })
                    .collect(),
            ),
            arrival_model: self.demand.clone(),
            arrivals: self
                .arrivals
                .as_ref()
                .map(|a| a.iter().map(|t| t.0).collect()),
        };
        serde_json::to_string_pretty(&f).expect("instance serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), InstanceError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    /// `shinkansen` (16 coaches, full demand) or `shinkansen-mini`
    /// (4 coaches of 25 seats, 350 expected requests).
    pub fn builtin(name: &str) -> Result<Self, InstanceError> {
        match name {
            "shinkansen" => shinkansen(),
            "shinkansen-mini" => shinkansen_mini(),
            other => Err(InstanceError::UnknownBuiltin(other.to_string())),
        }
    }
}

pub const SHINKANSEN_STATIONS: [&str; 5] = ["Tokyo", "Shin-Yokohama", "Nagoya", "Kyoto", "Shin-Osaka"];

/// Seats of the sixteen N700S coaches, in train order.
pub const SHINKANSEN_CAPACITIES: [u32; 16] = [65, 100, 85, 100, 90, 100, 75, 68, 64, 68, 63, 100, 90, 100, 80, 75];

/// (origin, destination, fare, average demand).
pub const SHINKANSEN_OD: [(usize, usize, u64, f64); 10] = [
    (1, 2, 3_010, 87.0),
    (1, 3, 11_300, 677.0),
    (2, 3, 10_640, 125.0),
    (1, 4, 14_170, 390.0),
    (2, 4, 13_500, 110.0),
    (3, 4, 5_910, 77.0),
    (1, 5, 14_720, 846.0),
    (2, 5, 14_390, 175.0),
    (3, 5, 6_680, 232.0),
    (4, 5, 3_080, 61.0),
];

pub const DEFAULT_GROUP_SIZES: [f64; 6] = [0.55, 0.25, 0.10, 0.05, 0.03, 0.02];

fn shinkansen_demand(total_mean: f64) -> DemandSpec {
    DemandSpec {
        total_mean,
        horizon: None,
        horizon_days: 30,
        group_size_distribution: DEFAULT_GROUP_SIZES.to_vec(),
        od: SHINKANSEN_OD
            .iter()
            .map(|&(origin, destination, price, demand)| OdDemand {
                origin,
                destination,
                price,
                demand,
            })
            .collect(),
    }
}

fn shinkansen_with(name: &str, capacities: Vec<u32>, total_mean: f64) -> Result<Instance, InstanceError> {
    let demand = shinkansen_demand(total_mean);
    let types = demand.expand_types()?;
    let inst = Instance {
        name: name.to_string(),
        network: Network::new(SHINKANSEN_STATIONS)?,
        train: Train::new(capacities)?,
        types,
        demand: Some(demand),
        arrivals: None,
    };
    inst.validate()?;
    Ok(inst)
}

pub fn shinkansen() -> Result<Instance, InstanceError> {
    let total: f64 = SHINKANSEN_OD.iter().map(|o| o.3).sum();
    shinkansen_with("shinkansen", SHINKANSEN_CAPACITIES.to_vec(), total)
}

pub fn shinkansen_mini() -> Result<Instance, InstanceError> {
    shinkansen_with("shinkansen-mini", vec![25; 4], 350.0)
}
