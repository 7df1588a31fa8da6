//! `renorm`: the scale ladder, box-event estimates, their monotonicity under
//! thinning, and the trigger estimate.

use serde_json::json;

use super::config::{missing, RenormKind, RunConfig};
use super::csv::{int, num, Table};
use super::manifest::SeedRecord;
use super::plot::Plot;
use super::{unit_source, Plan, Report};
use crate::error::Result;
use crate::lattice::JumpDistribution;
use crate::renorm::{
    box_event_monotonicity, decreasing_trend, estimate_box_events, trigger_estimate_at, Frequency, ScaleLadder,
};

const EVENT_HEADER: [&str; 9] = ["event", "k", "L0", "rho", "replicas", "hits", "frequency", "ci_lo", "ci_hi"];

fn event_row(event: &str, k: usize, l0: u64, rho: f64, f: &Frequency) -> Vec<String> {
    vec![event.into(), int(k), int(l0), num(rho), int(f.replicas), int(f.hits), num(f.value), num(f.ci.lo), num(f.ci.hi)]
}

fn opt(x: Option<u128>) -> String {
    x.map_or_else(|| "overflow".into(), int)
}

pub(super) fn plan(cfg: &RunConfig, law: JumpDistribution) -> Result<Plan> {
    let kind = cfg.renorm_kind.ok_or_else(|| missing("renorm_kind", "is required"))?;
    let d = law.dim();
    match kind {
        RenormKind::Ladder => {
            let k_max = cfg.k_max.ok_or_else(|| missing("k_max", "is required for the ladder"))?;
            let ladders: Vec<ScaleLadder> =
                cfg.l0.values().iter().map(|&l0| ScaleLadder::new(l0, d, k_max)).collect::<Result<_>>()?;
            Ok(Plan { cost: 0.0, job: Box::new(move || Ok(ladder_report(&ladders))) })
        }
        RenormKind::BoxEvents | RenormKind::Monotonicity => {
            let k = cfg.k;
            let ladders: Vec<ScaleLadder> =
                cfg.l0.values().iter().map(|&l0| ScaleLadder::new(l0, d, k)).collect::<Result<_>>()?;
            for l in &ladders {
                l.boxes(k)?;
            }
            let rho_low = if kind == RenormKind::Monotonicity {
                let r = cfg.rho_low.ok_or_else(|| missing("rho_low", "is required for monotonicity"))?;
                if cfg.rho.values().len() != 1 || !(0.0..=cfg.rho.values()[0]).contains(&r) {
                    return Err(missing("rho", "must be one density at least rho_low"));
                }
                Some(r)
            } else {
                None
            };
            let cfg = cfg.clone();
            Ok(Plan {
                cost: 0.0,
                job: Box::new(move || match rho_low {
                    None => box_events(&cfg, &law, &ladders),
                    Some(r) => monotonicity(&cfg, &law, &ladders, r),
                }),
            })
        }
        RenormKind::Trigger => {
            if let Some(&l) = cfg.scales.values().iter().find(|&&l| l < 1) {
                return Err(missing("scales", &format!("entry {l} must be at least 1")));
            }
            let cfg = cfg.clone();
            Ok(Plan { cost: 0.0, job: Box::new(move || trigger(&cfg, &law)) })
        }
    }
}

fn ladder_report(ladders: &[ScaleLadder]) -> Report {
    let mut report = Report::default();
    let mut t = Table::new(&[
        "L0",
        "k",
        "L_k",
        "velocity",
        "density",
        "half_width",
        "index_count",
        "index_bound",
    ]);
    let mut limits = Table::new(&["L0", "k_max", "density_limit"]);
    for l in ladders {
        let l0 = l.scales[0];
        for k in 0..=l.k_max() {
            let (count, bound) = if k < l.k_max() { (opt(l.index_count(k)), opt(l.index_bound(k))) } else { ("".into(), "".into()) };
            t.push(vec![
                int(l0),
                int(k),
                int(l.scales[k]),
                num(l.velocities[k]),
                num(l.densities[k]),
                opt(l.half_width(k)),
                count,
                bound,
            ]);
        }
        limits.push(vec![int(l0), int(l.k_max()), num(l.density_limit)]);
    }
    // scales can exceed the JSON integer range
    let summary: Vec<_> = ladders
        .iter()
        .map(|l| {
            json!({
                "L0": l.scales[0].to_string(),
                "scales": l.scales.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
                "velocities": l.velocities, "densities": l.densities, "density_limit": l.density_limit,
            })
        })
        .collect();
    report.summary.insert("ladders".into(), json!(summary));
    report.table("ladder", t);
    report.table("ladder_limits", limits);
    report
}

fn box_events(cfg: &RunConfig, law: &JumpDistribution, ladders: &[ScaleLadder]) -> Result<Report> {
    let mut report = Report::default();
    let mut t = Table::new(&EVENT_HEADER);
    let mut per = Table::new(&["k", "L0", "rho", "replica", "stream", "e", "e_relaxed", "d", "range", "front"]);
    let mut unit_json = Vec::new();
    let k = cfg.k;
    for l in ladders {
        let l0 = l.scales[0] as u64;
        let rhos: Vec<f64> = if cfg.rho.values().is_empty() { vec![l.densities[k]] } else { cfg.rho.values().to_vec() };
        for rho in rhos {
            let label = format!("k={k},L0={l0},rho={}", num(rho));
            let src = unit_source(cfg, &label);
            let est = estimate_box_events(law, l, k, 0.0, rho, cfg.replicas, &src)?;
            report.seeds.push(SeedRecord::new(&label, &src, cfg.replicas));
            t.push(event_row("E", k, l0, rho, &est.p_hat));
            t.push(event_row("E_relaxed", k, l0, rho, &est.p_relaxed));
            t.push(event_row("D", k, l0, rho, &est.fast_spread));
            for (r, o) in est.outcomes.iter().enumerate() {
                per.push(vec![
                    int(k),
                    int(l0),
                    num(rho),
                    int(r),
                    int(src.replica(r as u64).stream),
                    int(o.e as u8),
                    int(o.e_relaxed as u8),
                    int(o.d as u8),
                    int(o.range),
                    int(o.front),
                ]);
            }
            unit_json.push(json!({
                "k": k, "L0": l0, "rho": rho, "replicas": cfg.replicas, "p_hat": est.p_hat,
                "p_relaxed": est.p_relaxed, "fast_spread": est.fast_spread, "nesting_violations": est.nesting_violations,
            }));
        }
    }
    report.summary.insert("units".into(), json!(unit_json));
    report.table("renorm", t);
    report.table("renorm_replicas", per);
    Ok(report)
}

fn monotonicity(cfg: &RunConfig, law: &JumpDistribution, ladders: &[ScaleLadder], rho_low: f64) -> Result<Report> {
    let mut report = Report::default();
    let rho = cfg.rho.values()[0];
    let k = cfg.k;
    let mut t =
        Table::new(&["k", "L0", "rho_low", "rho", "replicas", "e_violations", "d_violations", "front_violations"]);
    let mut unit_json = Vec::new();
    for l in ladders {
        let l0 = l.scales[0] as u64;
        let label = format!("k={k},L0={l0},rho_low={},rho={}", num(rho_low), num(rho));
        let src = unit_source(cfg, &label);
        let m = box_event_monotonicity(law, l, k, rho_low, rho, cfg.replicas, &src)?;
        report.seeds.push(SeedRecord::new(&label, &src, cfg.replicas));
        t.push(vec![
            int(k),
            int(l0),
            num(rho_low),
            num(rho),
            int(m.replicas),
            int(m.e_violations),
            int(m.d_violations),
            int(m.front_violations),
        ]);
        unit_json.push(json!({"k": k, "L0": l0, "rho_low": rho_low, "rho": rho, "result": m}));
    }
    report.summary.insert("units".into(), json!(unit_json));
    report.table("renorm_monotone", t);
    Ok(report)
}

fn trigger(cfg: &RunConfig, law: &JumpDistribution) -> Result<Report> {
    let mut report = Report::default();
    let mut t = Table::new(&EVENT_HEADER);
    let mut extra = Table::new(&["L", "rho", "replicas", "relay_violations", "construction_lower_bound"]);
    let (mut slow, mut very_slow) = (Vec::new(), Vec::new());
    let mut unit_json = Vec::new();
    for &l in cfg.scales.values() {
        let rho = match cfg.rho.values() {
            [] => (l as f64).sqrt(),
            [r] => *r,
            _ => return Err(missing("rho", "must be empty (rho = sqrt(L)) or one density for the trigger")),
        };
        let label = format!("L={l},rho={}", num(rho));
        let src = unit_source(cfg, &label);
        let r = trigger_estimate_at(law, l, rho, cfg.replicas, &src)?;
        report.seeds.push(SeedRecord::new(&label, &src, cfg.replicas));
        t.push(event_row("slow", 0, l, rho, &r.slow));
        t.push(event_row("very_slow", 0, l, rho, &r.very_slow));
        t.push(event_row("all_relays", 0, l, rho, &r.all_relays));
        extra.push(vec![int(l), num(rho), int(cfg.replicas), int(r.relay_violations), num(r.construction_lower_bound)]);
        slow.push(r.slow);
        very_slow.push(r.very_slow);
        unit_json.push(json!({
            "L": l, "rho": rho, "slow": r.slow, "very_slow": r.very_slow, "all_relays": r.all_relays,
            "relay_violations": r.relay_violations, "construction_lower_bound": r.construction_lower_bound,
        }));
    }
    let alpha = 1.0 - cfg.level;
    report.summary.insert("units".into(), json!(unit_json));
    report.summary.insert("slow_decreasing".into(), json!(decreasing_trend(&slow, alpha)));
    report.summary.insert("very_slow_decreasing".into(), json!(decreasing_trend(&very_slow, alpha)));
    let pts = |fs: &[Frequency]| cfg.scales.values().iter().zip(fs).map(|(&l, f)| (l as f64, f.value)).collect();
    report.plots.push((
        "trigger".into(),
        Plot::new("trigger frequencies", "L", "frequency").line("r_L < 8L", pts(&slow)).line("r_L < L", pts(&very_slow)),
    ));
    report.table("renorm", t);
    report.table("trigger", extra);
    Ok(report)
}
