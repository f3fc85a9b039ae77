use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, ensure, Context, Result};
use coachres::offline::OfflineOptions;
use coachres::sim::{bland_altman, metrics, relative_by_seed, Experiment, PolicyKind, PolicyParams, RunOutcome};
use coachres::stochastic::AprioriOptions;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::commands::{load_instance, sig};
use crate::{ReportArgs, SimulateArgs};

/// Experiment file. Every field is optional; unknown fields are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub name: String,
    pub instance: String,
    pub policies: Vec<String>,
    /// Explicit seeds; when absent, `replications` seeds from `seed`.
    pub seeds: Option<Vec<u64>>,
    pub seed: u64,
    pub replications: usize,
    pub out: PathBuf,
    pub parallel: usize,
    pub exact: bool,
    pub exact_node_limit: usize,
    pub exact_time_limit_secs: Option<f64>,
    pub q: Option<f64>,
    pub rom_stride: usize,
    pub theta: f64,
    pub psi_threshold: f64,
    pub apriori_node_limit: usize,
    pub apriori_gap: f64,
    pub fcfs_gap: f64,
    pub blocks: Option<usize>,
    pub sfcfs_time_limit_secs: Option<f64>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let p = PolicyParams::default();
        Self {
            name: "experiment".into(),
            instance: "shinkansen-mini".into(),
            policies: vec!["RandomFit".into(), "Fixed".into()],
            seeds: None,
            seed: 1,
            replications: 1,
            out: PathBuf::from("runs"),
            parallel: 1,
            exact: true,
            exact_node_limit: 50_000,
            exact_time_limit_secs: None,
            q: p.q,
            rom_stride: p.rom_stride,
            theta: p.theta,
            psi_threshold: p.apriori.psi_threshold,
            apriori_node_limit: p.apriori.node_limit,
            apriori_gap: p.apriori.relative_gap,
            fcfs_gap: p.fcfs_gap,
            blocks: p.blocks,
            sfcfs_time_limit_secs: p.sfcfs_time_limit.map(|d| d.as_secs_f64()),
        }
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().trim_start_matches('=').parse()?);
        ensure!(a <= b, "empty seed range {s}");
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse::<u64>().with_context(|| format!("bad seed `{x}`")))
        .collect()
}

impl ExperimentSpec {
    pub fn resolve(a: &SimulateArgs) -> Result<Self> {
        let mut spec = match &a.config {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => Self::default(),
        };
        if let Some(v) = &a.name {
            spec.name = v.clone();
        }
        if let Some(v) = &a.instance {
            spec.instance = v.clone();
        }
        if let Some(v) = &a.policies {
            spec.policies = v.clone();
        }
        if let Some(v) = &a.seeds {
            spec.seeds = Some(parse_seeds(v)?);
        }
        if let Some(v) = a.seed {
            spec.seed = v;
        }
        if let Some(v) = a.replications {
            spec.replications = v;
            if a.seeds.is_none() {
                spec.seeds = None;
            }
        }
        if let Some(v) = &a.out {
            spec.out = v.clone();
        }
        if let Some(v) = a.parallel {
            spec.parallel = v;
        }
        if a.no_exact {
            spec.exact = false;
        }
        ensure!(!spec.policies.is_empty(), "no policies given");
        ensure!(!spec.seeds().is_empty(), "no seeds given");
        ensure!(spec.parallel >= 1, "parallel must be at least 1");
        Ok(spec)
    }

    pub fn seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.replications as u64).map(|k| self.seed + k).collect(),
        }
    }

    pub fn kinds(&self) -> Result<Vec<PolicyKind>> {
        let mut out: Vec<PolicyKind> = Vec::new();
        for p in &self.policies {
            let Some(k) = PolicyKind::parse(p) else {
                bail!("unknown policy `{p}`");
            };
            if !out.contains(&k) {
                out.push(k);
            }
        }
        Ok(out)
    }

    fn params(&self) -> PolicyParams {
        PolicyParams {
            q: self.q,
            rom_stride: self.rom_stride,
            theta: self.theta,
            apriori: AprioriOptions {
                psi_threshold: self.psi_threshold,
                time_limit: None,
                node_limit: self.apriori_node_limit,
                relative_gap: self.apriori_gap,
            },
            blocks: self.blocks,
            fcfs_gap: self.fcfs_gap,
            sfcfs_time_limit: self.sfcfs_time_limit_secs.map(Duration::from_secs_f64),
        }
    }

    pub fn dir(&self) -> PathBuf {
        self.out.join(&self.name)
    }
}

/// Write through a temporary file so readers never see a partial file.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))
}

enum JobResult {
    Exact(u64, f64),
    Run(Box<RunOutcome>),
    Failed { label: String, seed: u64, error: String },
}

pub fn simulate(a: &SimulateArgs) -> Result<bool> {
    let spec = ExperimentSpec::resolve(a)?;
    let kinds = spec.kinds()?;
    let seeds = spec.seeds();
    let base = load_instance(&spec.instance)?;
    let exp = Experiment::new(base, spec.params())?;
    if kinds.iter().any(|k| matches!(k, PolicyKind::Lambda | PolicyKind::Theta | PolicyKind::Fluid)) {
        exp.fluid()?;
    }
    if kinds.contains(&PolicyKind::Fixed) {
        exp.apriori_plan()?;
    }
    let dir = spec.dir();
    for k in &kinds {
        fs::create_dir_all(dir.join(k.name()))?;
    }

    let mut jobs: Vec<(u64, Option<PolicyKind>)> = Vec::new();
    for &s in &seeds {
        if spec.exact {
            jobs.push((s, None));
        }
        jobs.extend(kinds.iter().map(|&k| (s, Some(k))));
    }
    let exact_opts = OfflineOptions {
        time_limit: spec.exact_time_limit_secs.map(Duration::from_secs_f64),
        node_limit: spec.exact_node_limit,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(spec.parallel).build()?;
    let results: Vec<JobResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(seed, kind)| {
                let inst = exp.instance(seed);
                match kind {
                    None => match exp.exact(&inst, &exact_opts) {
                        Ok(v) => JobResult::Exact(seed, v),
                        Err(e) => JobResult::Failed {
                            label: "Exact".into(),
                            seed,
                            error: e.to_string(),
                        },
                    },
                    Some(k) => {
                        let written = exp.run_on(&inst, k, seed).map_err(|e| e.to_string()).and_then(|o| {
                            let path = dir.join(k.name()).join(format!("{seed}.trace.csv"));
                            write_atomic(&path, &o.trace.to_csv()).map_err(|e| format!("{e:#}"))?;
                            Ok(o)
                        });
                        match written {
                            Ok(o) => JobResult::Run(Box::new(o)),
                            Err(error) => JobResult::Failed {
                                label: k.name().into(),
                                seed,
                                error,
                            },
                        }
                    }
                }
            })
            .collect()
    });

    let mut exact = BTreeMap::new();
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            JobResult::Exact(s, v) => {
                exact.insert(s, v);
            }
            JobResult::Run(o) => outcomes.push(*o),
            JobResult::Failed { label, seed, error } => {
                eprintln!("{label} seed {seed} failed: {error}");
                failures.push(json!({"policy": label, "seed": seed, "error": error}));
            }
        }
    }
    let report = metrics(&outcomes, &exact);

    let mut pairs = Vec::new();
    let mut ba_csv = String::from("policy_a,policy_b,seed,mean,difference\n");
    for (i, &ka) in kinds.iter().enumerate() {
        for &kb in &kinds[i + 1..] {
            let ra: BTreeMap<u64, f64> = relative_by_seed(&outcomes, ka, &exact).into_iter().collect();
            let rb: BTreeMap<u64, f64> = relative_by_seed(&outcomes, kb, &exact).into_iter().collect();
            let common: Vec<u64> = ra.keys().filter(|s| rb.contains_key(s)).copied().collect();
            let xa: Vec<f64> = common.iter().map(|s| ra[s]).collect();
            let xb: Vec<f64> = common.iter().map(|s| rb[s]).collect();
            if let Some(ba) = bland_altman(&xa, &xb) {
                for (s, (m, d)) in common.iter().zip(&ba.pairs) {
                    ba_csv.push_str(&format!("{},{},{s},{m},{d}\n", ka.name(), kb.name()));
                }
                pairs.push(json!({
                    "policy_a": ka.name(),
                    "policy_b": kb.name(),
                    "n": common.len(),
                    "mean_difference": ba.mean_difference,
                    "lower_limit": ba.lower_limit,
                    "upper_limit": ba.upper_limit,
                }));
            }
        }
    }

    let mut curves = String::from("day,policy,mean,sd\n");
    for p in &report.revenue_curves {
        curves.push_str(&format!("{},{},{},{}\n", p.day, p.policy, p.mean, opt(p.sd)));
    }
    let mut util = String::from("day,policy,mean,sd\n");
    for p in &report.utilization_curves {
        util.push_str(&format!("{},{},{},{}\n", p.day, p.policy, p.mean, opt(p.sd)));
    }
    let mut exact_csv = String::from("seed,value\n");
    for (s, v) in &exact {
        exact_csv.push_str(&format!("{s},{v}\n"));
    }
    let doc = json!({
        "experiment": spec.name,
        "spec": spec,
        "seeds": seeds,
        "exact_by_seed": exact,
        "report": report,
        "bland_altman": pairs,
        "failures": failures,
    });
    write_atomic(&dir.join("metrics.json"), &serde_json::to_string_pretty(&doc)?)?;
    write_atomic(&dir.join("curves.csv"), &curves)?;
    write_atomic(&dir.join("utilization.csv"), &util)?;
    write_atomic(&dir.join("bland_altman.csv"), &ba_csv)?;
    write_atomic(&dir.join("exact.csv"), &exact_csv)?;
    print_report(&doc);
    println!("results in {}", dir.display());
    Ok(failures.is_empty())
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

fn cell(v: &Value) -> String {
    v.as_f64().map_or("n/a".into(), sig)
}

fn print_report(doc: &Value) {
    let r = &doc["report"];
    if let Some(e) = r["exact"].as_object() {
        println!(
            "Exact: mean {} over {} seeds",
            cell(&e["mean"]),
            e["n"]
        );
    }
    println!(
        "{:<12} {:>5} {:>10} {:>10} {:>10} {:>10} {:>6} {:>6}",
        "policy", "runs", "rel mean", "rel sd", "rel min", "util", "fcfs", "sfcfs"
    );
    for p in r["policies"].as_array().into_iter().flatten() {
        let rel = &p["relative_revenue"];
        println!(
            "{:<12} {:>5} {:>10} {:>10} {:>10} {:>10} {:>6} {:>6}",
            p["policy"].as_str().unwrap_or(""),
            p["runs"].to_string(),
            cell(&rel["mean"]),
            cell(&rel["sd"]),
            cell(&rel["min"]),
            cell(&p["utilization"]["mean"]),
            p["fcfs_violations"].to_string(),
            p["sfcfs_violations"].to_string()
        );
    }
    for b in doc["bland_altman"].as_array().into_iter().flatten() {
        println!(
            "{} - {}: mean difference {} limits [{}, {}]",
            b["policy_a"].as_str().unwrap_or(""),
            b["policy_b"].as_str().unwrap_or(""),
            cell(&b["mean_difference"]),
            cell(&b["lower_limit"]),
            cell(&b["upper_limit"])
        );
    }
    for f in doc["failures"].as_array().into_iter().flatten() {
        println!("failed: {} seed {}: {}", f["policy"], f["seed"], f["error"]);
    }
}

pub fn report(a: &ReportArgs) -> Result<bool> {
    let path = a.dir.join("metrics.json");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let doc: Value = serde_json::from_str(&text)?;
    print_report(&doc);
    Ok(doc["failures"].as_array().is_none_or(|f| f.is_empty()))
}
