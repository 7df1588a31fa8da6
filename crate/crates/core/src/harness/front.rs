//! `front-sweep` and `gip-stats`.

use serde_json::json;

use super::config::{missing, RunConfig};
use super::csv::{int, num, Table};
use super::manifest::SeedRecord;
use super::plot::Plot;
use super::{farm, mean_ci, quantile, unit_source, Plan, Report};
use crate::engine::RandomSource;
use crate::error::Result;
use crate::infection::{encode_gip, reconstruct_gip, replay_gip, run_infection, run_recorded, InfectionOutcome, InfectionSetup};
use crate::lattice::JumpDistribution;
use crate::stats::{two_proportion_z, wilson_ci, z_for_level};

struct Unit {
    rho: f64,
    horizon: f64,
    label: String,
    setup: InfectionSetup,
    source: RandomSource,
}

/// The `rho x horizon` grid, with every setup validated and its window sized.
fn units(cfg: &RunConfig, law: &JumpDistribution) -> Result<(Vec<Unit>, f64)> {
    if !cfg.rho.values().is_empty() && cfg.horizon.values().is_empty() {
        return Err(missing("horizon", "is required with a density grid"));
    }
    let mut out = Vec::new();
    let mut cost = 0.0;
    for &rho in cfg.rho.values() {
        for &horizon in cfg.horizon.values() {
            let mut setup = InfectionSetup::new(law.clone(), rho, horizon);
            setup.sample_dt = cfg.sample_dt;
            setup.speed_bound = cfg.speed_bound;
            setup.target_error = cfg.target_error;
            setup.validate()?;
            let w = setup.window()?;
            cost += cfg.replicas as f64 * (rho * w.volume() as f64 + 1.0) * horizon;
            let label = format!("rho={},T={}", num(rho), num(horizon));
            let source = unit_source(cfg, &label);
            out.push(Unit { rho, horizon, label, setup, source });
        }
    }
    Ok((out, cost))
}

fn record_truncation(report: &mut Report, runs: &[InfectionOutcome]) {
    for o in runs {
        report.truncation.window_exits += o.window_exits;
        report.truncation.outside_core += o.outside_core as u64;
    }
}

pub(super) fn plan_front(cfg: &RunConfig, law: JumpDistribution) -> Result<Plan> {
    let (units, cost) = units(cfg, &law)?;
    let cfg = cfg.clone();
    Ok(Plan { cost, job: Box::new(move || front_sweep(&cfg, units)) })
}

fn front_sweep(cfg: &RunConfig, units: Vec<Unit>) -> Result<Report> {
    let mut report = Report::default();
    let mut speed = Table::new(&["rho", "T", "t", "replicas", "mean_speed", "ci_lo", "ci_hi"]);
    let mut finals = Table::new(&["rho", "T", "replicas", "final_speed", "ci_lo", "ci_hi", "sign", "sign_change"]);
    let mut events =
        Table::new(&["rho", "T", "threshold_speed", "replicas", "hits", "frequency", "ci_lo", "ci_hi"]);
    let mut per = Table::new(&[
        "rho", "T", "replica", "stream", "r_T", "running_max", "infected", "range", "window_exits", "outside_core",
    ]);
    let mut plot = Plot::new("front speed", "t", "mean r_t / t");
    let mut unit_json = Vec::new();
    let mut prev_sign: Vec<(f64, i32)> = Vec::new();
    let mut sign_changes = Vec::new();
    for u in &units {
        let runs = farm(cfg.replicas, &u.source, |s| run_infection(&u.setup, s))?;
        report.seeds.push(SeedRecord::new(&u.label, &u.source, cfg.replicas));
        record_truncation(&mut report, &runs);
        let times: Vec<f64> = runs.first().map(|o| o.trace.samples.iter().map(|s| s.0).collect()).unwrap_or_default();
        let mut curve = Vec::new();
        for (i, &t) in times.iter().enumerate() {
            let xs: Vec<f64> = runs.iter().map(|o| o.trace.samples[i].1 as f64 / t).collect();
            let (m, lo, hi) = mean_ci(&xs, cfg.level);
            speed.push(vec![num(u.rho), num(u.horizon), num(t), int(cfg.replicas), num(m), num(lo), num(hi)]);
            curve.push((t, m));
        }
        let xs: Vec<f64> = runs.iter().map(|o| o.front as f64 / u.horizon).collect();
        let (m, lo, hi) = mean_ci(&xs, cfg.level);
        let sign = if lo > 0.0 { 1 } else if hi < 0.0 { -1 } else { 0 };
        // sign change against the previous density at the same horizon
        let change = prev_sign.iter().rev().find(|(t, _)| *t == u.horizon).is_some_and(|&(_, s)| s != 0 && sign != 0 && s != sign);
        if change {
            sign_changes.push(json!({"rho": u.rho, "T": u.horizon}));
        }
        prev_sign.push((u.horizon, sign));
        finals.push(vec![
            num(u.rho),
            num(u.horizon),
            int(cfg.replicas),
            num(m),
            num(lo),
            num(hi),
            int(sign),
            int(change as u8),
        ]);
        let mut uj = json!({"rho": u.rho, "T": u.horizon, "replicas": cfg.replicas, "final_speed": m, "ci": [lo, hi]});
        if let Some(v) = cfg.threshold_speed {
            let hits = runs.iter().filter(|o| o.front as f64 >= v * u.horizon).count() as u64;
            let ci = wilson_ci(hits, cfg.replicas, cfg.level);
            let f = hits as f64 / cfg.replicas as f64;
            events.push(vec![
                num(u.rho),
                num(u.horizon),
                num(v),
                int(cfg.replicas),
                int(hits),
                num(f),
                num(ci.lo),
                num(ci.hi),
            ]);
            uj["event"] = json!({"threshold_speed": v, "hits": hits, "frequency": f, "ci": [ci.lo, ci.hi]});
        }
        for (r, o) in runs.iter().enumerate() {
            per.push(vec![
                num(u.rho),
                num(u.horizon),
                int(r),
                int(u.source.replica(r as u64).stream),
                int(o.front),
                int(o.front_running_max),
                int(o.infected),
                int(o.infected_range),
                int(o.window_exits),
                int(o.outside_core as u8),
            ]);
        }
        plot = plot.line(format!("rho={} T={}", num(u.rho), num(u.horizon)), curve);
        unit_json.push(uj);
    }
    report.summary.insert("units".into(), json!(unit_json));
    report.summary.insert("sign_changes".into(), json!(sign_changes));
    if cfg.threshold_speed.is_some() {
        report.summary.insert("event_trends".into(), json!(event_trends(cfg, &unit_json)));
    }
    if report.truncation.outside_core > 0 {
        report.warnings.push(format!("{} runs outgrew the sized window core", report.truncation.outside_core));
    }
    report.table("front_speed", speed);
    report.table("front_final", finals);
    if cfg.threshold_speed.is_some() {
        report.table("front_events", events);
    }
    report.table("front_replicas", per);
    report.plots.push(("front_speed".into(), plot));
    Ok(report)
}

/// For each density, the threshold frequency at the first horizon against the last.
fn event_trends(cfg: &RunConfig, units: &[serde_json::Value]) -> Vec<serde_json::Value> {
    let z_crit = z_for_level(2.0 * cfg.level - 1.0);
    cfg.rho
        .values()
        .iter()
        .filter_map(|&rho| {
            let pts: Vec<&serde_json::Value> = units.iter().filter(|u| u["rho"] == json!(rho)).collect();
            let (a, b) = (pts.first()?, pts.last()?);
            if pts.len() < 2 {
                return None;
            }
            let hits = |u: &serde_json::Value| u["event"]["hits"].as_u64().unwrap_or(0);
            let n = cfg.replicas;
            let z = two_proportion_z(hits(a), n, hits(b), n);
            Some(json!({
                "rho": rho,
                "T_first": a["T"],
                "T_last": b["T"],
                "frequency_first": a["event"]["frequency"],
                "frequency_last": b["event"]["frequency"],
                "z": z,
                "decreasing": hits(b) < hits(a),
                "significant": z > z_crit,
            }))
        })
        .collect()
}

pub(super) fn plan_gip(cfg: &RunConfig, law: JumpDistribution) -> Result<Plan> {
    let (units, cost) = units(cfg, &law)?;
    let cfg = cfg.clone();
    Ok(Plan { cost, job: Box::new(move || gip_stats(&cfg, units)) })
}

/// Counts from rebuilding a path to every occupied site of one run.
#[derive(Default)]
struct GipCheck {
    infected_sites: u64,
    paths: u64,
    missing_paths: u64,
    spurious_paths: u64,
    encoding_violations: u64,
    replay_mismatches: u64,
}

fn gip_check(setup: &InfectionSetup, source: &RandomSource) -> Result<(InfectionOutcome, GipCheck)> {
    let run = run_recorded(setup, source)?;
    let infected = run.state.infected_sites(&run.last);
    let mut c = GipCheck { infected_sites: infected.len() as u64, ..Default::default() };
    for (site, _) in run.last.occupied() {
        let path = reconstruct_gip(&run.state, &run.last, site);
        match (&path, infected.contains_key(&site)) {
            (Ok(_), false) => c.spurious_paths += 1,
            (Err(_), true) => c.missing_paths += 1,
            _ => {}
        }
        let Ok(path) = path else { continue };
        c.paths += 1;
        let enc = match encode_gip(&path, &run.state, &run.initial, &run.log) {
            Ok(e) if e.check().is_ok() => e,
            _ => {
                c.encoding_violations += 1;
                continue;
            }
        };
        let ok = match (replay_gip(&enc, &run.initial, &run.log, setup.horizon), path.trajectory(&run.initial, &run.log)) {
            (Ok(rep), Ok(traj)) => {
                rep.endpoint == site && rep.particles == path.particles && rep.jumps == enc.k && rep.trajectory == traj
            }
            _ => false,
        };
        c.replay_mismatches += !ok as u64;
    }
    Ok((run.outcome, c))
}

fn gip_stats(cfg: &RunConfig, units: Vec<Unit>) -> Result<Report> {
    let mut report = Report::default();
    let mut stats = Table::new(&[
        "rho", "T", "replicas", "jumps_q50", "jumps_q90", "jumps_q99", "jumps_max", "range_q50", "range_q90", "range_q99",
        "range_max",
    ]);
    let mut per = Table::new(&["rho", "T", "replica", "stream", "max_gip_jumps", "infected_range"]);
    let mut checks = Table::new(&[
        "rho",
        "T",
        "replica",
        "stream",
        "infected_sites",
        "paths",
        "missing_paths",
        "spurious_paths",
        "encoding_violations",
        "replay_mismatches",
    ]);
    let mut totals = [0u64; 5];
    let mut unit_json = Vec::new();
    for u in &units {
        let runs: Vec<(InfectionOutcome, Option<GipCheck>)> = if cfg.gip_check {
            farm(cfg.replicas, &u.source, |s| gip_check(&u.setup, s).map(|(o, c)| (o, Some(c))))?
        } else {
            farm(cfg.replicas, &u.source, |s| run_infection(&u.setup, s).map(|o| (o, None)))?
        };
        report.seeds.push(SeedRecord::new(&u.label, &u.source, cfg.replicas));
        let outcomes: Vec<InfectionOutcome> = runs.iter().map(|r| r.0.clone()).collect();
        record_truncation(&mut report, &outcomes);
        let sorted = |f: fn(&InfectionOutcome) -> i64| {
            let mut v: Vec<f64> = outcomes.iter().map(|o| f(o) as f64 / u.horizon).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let jumps = sorted(|o| o.max_gip_jumps);
        let range = sorted(|o| o.infected_range);
        let qs = [0.5, 0.9, 0.99, 1.0];
        let mut row = vec![num(u.rho), num(u.horizon), int(cfg.replicas)];
        row.extend(qs.iter().map(|&q| num(quantile(&jumps, q))));
        row.extend(qs.iter().map(|&q| num(quantile(&range, q))));
        stats.push(row);
        unit_json.push(json!({
            "rho": u.rho, "T": u.horizon, "replicas": cfg.replicas,
            "jumps_max": quantile(&jumps, 1.0), "range_max": quantile(&range, 1.0),
        }));
        for (r, (o, c)) in runs.iter().enumerate() {
            let stream = u.source.replica(r as u64).stream;
            per.push(vec![num(u.rho), num(u.horizon), int(r), int(stream), int(o.max_gip_jumps), int(o.infected_range)]);
            if let Some(c) = c {
                checks.push(vec![
                    num(u.rho),
                    num(u.horizon),
                    int(r),
                    int(stream),
                    int(c.infected_sites),
                    int(c.paths),
                    int(c.missing_paths),
                    int(c.spurious_paths),
                    int(c.encoding_violations),
                    int(c.replay_mismatches),
                ]);
                for (t, v) in totals
                    .iter_mut()
                    .zip([c.paths, c.missing_paths, c.spurious_paths, c.encoding_violations, c.replay_mismatches])
                {
                    *t += v;
                }
            }
        }
    }
    report.summary.insert("units".into(), json!(unit_json));
    if cfg.gip_check {
        report.summary.insert(
            "gip_check".into(),
            json!({
                "paths": totals[0], "missing_paths": totals[1], "spurious_paths": totals[2],
                "encoding_violations": totals[3], "replay_mismatches": totals[4],
            }),
        );
    }
    report.table("gip_stats", stats);
    report.table("gip_replicas", per);
    if cfg.gip_check {
        report.table("gip_check", checks);
    }
    Ok(report)
}
