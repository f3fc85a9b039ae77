use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use coachres::bounds::{
    fluid_guarantee, naori_baseline, optimal_q, optimize_theta, rom_ratio, theta_guarantee, BoundInputs, Guarantee,
};
use coachres::instance::Instance;
use coachres::offline::{build_fcfs_model, solve_offline_fcfs, FcfsConfig};
use coachres::offline::{build_offline_model, solve_offline, OfflineOptions};
use coachres::sim::{audit_fcfs, generate_instance, plan_utilization};
use coachres::stochastic::ArrivalModel;
use serde_json::{json, Value};

use crate::{BoundsArgs, GenArgs, OfflineArgs, OfflineMode};

/// Builtin name or file path.
pub fn load_instance(source: &str) -> Result<Instance> {
    match source {
        "shinkansen" | "shinkansen-mini" => Ok(Instance::builtin(source)?),
        path => Instance::load(path).with_context(|| format!("loading {path}")),
    }
}

/// Six significant digits.
pub fn sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let decimals = (5 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn gen(a: &GenArgs) -> Result<bool> {
    let mut inst = load_instance(&a.builtin)?;
    if let Some(seed) = a.seed {
        let am = ArrivalModel::from_instance(&inst)?;
        inst = generate_instance(&inst, &am, seed);
    }
    inst.save(&a.output)
        .with_context(|| format!("writing {}", a.output.display()))?;
    println!(
        "{}: {} coaches, {} legs, {} types{}",
        a.output.display(),
        inst.train.coach_count(),
        inst.leg_count(),
        inst.types.len(),
        inst.arrivals
            .as_ref()
            .map_or(String::new(), |r| format!(", {} arrivals", r.len()))
    );
    Ok(true)
}

fn with_arrivals(a: &OfflineArgs) -> Result<Instance> {
    let inst = load_instance(&a.instance)?;
    if inst.arrivals.is_some() {
        return Ok(inst);
    }
    let am = ArrivalModel::from_instance(&inst).context("instance has neither arrivals nor an arrival model")?;
    Ok(generate_instance(&inst, &am, a.seed))
}

fn write_lp(dir: &Path, name: &str, text: String) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn offline(a: &OfflineArgs) -> Result<bool> {
    let inst = with_arrivals(a)?;
    let order = inst.requests();
    if order.is_empty() {
        bail!("instance has no requests");
    }
    let limit = (a.time_limit > 0.0).then(|| Duration::from_secs_f64(a.time_limit));
    if let Some(dir) = &a.dump_lp {
        if a.mode != OfflineMode::Fcfs {
            write_lp(dir, "offline.lp", build_offline_model(&inst, &order)?.0.to_lp_string())?;
        }
        if a.mode != OfflineMode::Plain {
            write_lp(dir, "fcfs.lp", build_fcfs_model(&inst, &order)?.0.to_lp_string())?;
        }
    }
    let mut report = json!({
        "instance": inst.name,
        "requests": order.len(),
        "coaches": inst.train.coach_count(),
        "legs": inst.leg_count(),
    });
    let mut ok = true;
    if a.mode != OfflineMode::Fcfs {
        let t = Instant::now();
        let opts = OfflineOptions {
            time_limit: limit,
            node_limit: a.node_limit,
        };
        let s = solve_offline(&inst, &order, &opts)?;
        report["plain"] = json!({
            "status": format!("{:?}", s.status),
            "value": s.value.0,
            "bound": s.bound,
            "gap": s.gap(),
            "nodes": s.nodes,
            "accepted": s.plan.accepted_count(),
            "utilization": plan_utilization(&inst, &s.plan),
            "elapsed_ms": t.elapsed().as_millis() as u64,
        });
    }
    if a.mode != OfflineMode::Plain {
        let t = Instant::now();
        let cfg = FcfsConfig {
            time_limit: limit,
            node_limit: a.node_limit,
            seed: a.seed,
            forward_filtering: a.extra_cuts,
            dominance: a.extra_cuts,
            ..FcfsConfig::default()
        };
        let s = solve_offline_fcfs(&inst, &order, &cfg)?;
        let violations = audit_fcfs(&inst, &order, &s.plan);
        ok &= violations.is_empty();
        report["fcfs"] = json!({
            "status": format!("{:?}", s.status),
            "value": s.value.0,
            "bound": s.bound,
            "gap": s.gap,
            "accepted": s.plan.accepted_count(),
            "utilization": plan_utilization(&inst, &s.plan),
            "audit_violations": violations.len(),
            "stats": s.stats,
            "elapsed_ms": t.elapsed().as_millis() as u64,
        });
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print_offline(&report);
    }
    Ok(ok)
}

fn print_offline(r: &Value) {
    println!(
        "{} requests, {} coaches, {} legs",
        r["requests"], r["coaches"], r["legs"]
    );
    println!(
        "{:<8} {:>12} {:>14} {:>10} {:>10} {:>9} {:>7} {:>10}",
        "problem", "status", "value", "bound", "gap %", "accepted", "util %", "ms"
    );
    for key in ["plain", "fcfs"] {
        let s = &r[key];
        if s.is_null() {
            continue;
        }
        let f = |k: &str| s[k].as_f64().unwrap_or(f64::NAN);
        println!(
            "{key:<8} {:>12} {:>14} {:>10} {:>10} {:>9} {:>7} {:>10}",
            s["status"].as_str().unwrap_or(""),
            s["value"].to_string(),
            sig(f("bound")),
            sig(100.0 * f("gap")),
            s["accepted"].to_string(),
            sig(100.0 * f("utilization")),
            s["elapsed_ms"].to_string()
        );
    }
    if let Some(v) = r["fcfs"]["audit_violations"].as_u64() {
        println!("fcfs audit: {v} violations");
    }
}

fn guarantee_json(g: &Guarantee) -> Value {
    json!({"factor": g.factor, "vacuous": g.vacuous, "negative_deviation": g.negative_deviation})
}

pub fn bounds(a: &BoundsArgs) -> Result<bool> {
    let inp = BoundInputs {
        delta: a.delta,
        coaches: a.coaches,
        omega: a.omega,
        legs: a.legs,
    };
    let ratio = rom_ratio(a.delta)?;
    let q = optimal_q(a.delta)?;
    let baseline = naori_baseline(a.legs)?;
    let fluid = fluid_guarantee(&inp);
    let theta = theta_guarantee(&inp, a.theta)?;
    let (theta_star, best) = optimize_theta(&inp)?;
    if a.json {
        let out = json!({
            "inputs": {"delta": a.delta, "coaches": a.coaches, "omega": a.omega, "legs": a.legs, "theta": a.theta},
            "rom_ratio": ratio,
            "optimal_q": q,
            "naori_baseline": baseline,
            "fluid_guarantee": match &fluid {
                Ok(g) => guarantee_json(g),
                Err(e) => json!({"error": e.to_string()}),
            },
            "theta_guarantee": guarantee_json(&theta),
            "theta_star": theta_star,
            "theta_star_guarantee": guarantee_json(&best),
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(true);
    }
    let flags = |g: &Guarantee| {
        let mut s = String::new();
        if g.vacuous {
            s.push_str(" (vacuous)");
        }
        if g.negative_deviation {
            s.push_str(" (negative deviation)");
        }
        s
    };
    println!(
        "delta {} coaches {} omega {} legs {}",
        sig(a.delta),
        a.coaches,
        sig(a.omega),
        a.legs
    );
    println!("{:<28} {}", "random-order ratio", sig(ratio));
    println!("{:<28} {}", "sampling fraction q", sig(q));
    println!("{:<28} {}", "baseline 1/(4|L|+2)", sig(baseline));
    match fluid {
        Ok(g) => println!("{:<28} {}{}", "fluid guarantee", sig(g.factor), flags(&g)),
        Err(e) => println!("{:<28} n/a: {e}", "fluid guarantee"),
    }
    println!(
        "{:<28} {}{}",
        format!("guarantee at theta {}", sig(a.theta)),
        sig(theta.factor),
        flags(&theta)
    );
    println!("{:<28} {}", "best theta", sig(theta_star));
    println!("{:<28} {}{}", "guarantee at best theta", sig(best.factor), flags(&best));
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::sig;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig(0.29501347), "0.295013");
        assert_eq!(sig(1796200.0), "1796200");
        assert_eq!(sig(12.3456789), "12.3457");
        assert_eq!(sig(0.0), "0");
    }
}
