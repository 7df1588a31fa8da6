//! `couple` (monotone and sprinkled couplings) and `decouple`.

use serde_json::json;

use super::config::{missing, probe_name, CouplingKind, RunConfig};
use super::csv::{int, num, Table};
use super::manifest::SeedRecord;
use super::{farm, unit_source, Plan, Report};
use crate::coupling::{
    decoupling_probe, run_monotone, run_sprinkled, DecouplingProbe, SprinkleOutcome, SprinkleSchedule, SprinkleSummary,
};
use crate::error::Result;
use crate::infection::InfectionSetup;
use crate::lattice::{JumpDistribution, SiteBox};
use crate::stats::{two_proportion_z, z_for_level};

pub(super) fn plan_couple(cfg: &RunConfig, law: JumpDistribution) -> Result<Plan> {
    match cfg.coupling.ok_or_else(|| missing("coupling", "is required: monotone or sprinkled"))? {
        CouplingKind::Monotone => plan_monotone(cfg, law),
        CouplingKind::Sprinkled => plan_sprinkled(cfg, law),
    }
}

fn plan_monotone(cfg: &RunConfig, law: JumpDistribution) -> Result<Plan> {
    let rho_low = cfg.rho_low.ok_or_else(|| missing("rho_low", "is required for the monotone coupling"))?;
    let mut cost = 0.0;
    let mut units = Vec::new();
    for &rho in cfg.rho.values() {
        if !(0.0..=rho).contains(&rho_low) {
            return Err(missing("rho_low", &format!("= {rho_low} must lie in [0, rho = {rho}]")));
        }
        if cfg.horizon.values().is_empty() {
            return Err(missing("horizon", "is required"));
        }
        for &t in cfg.horizon.values() {
            let mut setup = InfectionSetup::new(law.clone(), rho, t);
            setup.sample_dt = cfg.sample_dt;
            setup.validate()?;
            cost += 2.0 * cfg.replicas as f64 * (rho * setup.window()?.volume() as f64 + 1.0) * t;
            units.push((rho, t));
        }
    }
    let cfg = cfg.clone();
    Ok(Plan {
        cost,
        job: Box::new(move || {
            let mut report = Report::default();
            let mut per = Table::new(&[
                "rho_low",
                "rho",
                "T",
                "replica",
                "stream",
                "checks",
                "domination_violations",
                "infection_violations",
                "particles_low",
                "particles_high",
                "infected_low",
                "infected_high",
            ]);
            let mut agg =
                Table::new(&["rho_low", "rho", "T", "replicas", "checks", "domination_violations", "infection_violations"]);
            let mut unit_json = Vec::new();
            for (rho, t) in units {
                let label = format!("rho_low={},rho={},T={}", num(rho_low), num(rho), num(t));
                let src = unit_source(&cfg, &label);
                let runs = farm(cfg.replicas, &src, |s| run_monotone(&law, rho_low, rho, t, cfg.sample_dt, s))?;
                report.seeds.push(SeedRecord::new(&label, &src, cfg.replicas));
                let (mut checks, mut dom, mut inf) = (0u64, 0u64, 0u64);
                for (r, o) in runs.iter().enumerate() {
                    checks += o.checks;
                    dom += o.domination_violations;
                    inf += o.infection_violations;
                    per.push(vec![
                        num(rho_low),
                        num(rho),
                        num(t),
                        int(r),
                        int(src.replica(r as u64).stream),
                        int(o.checks),
                        int(o.domination_violations),
                        int(o.infection_violations),
                        int(o.particles_low),
                        int(o.particles_high),
                        int(o.infected_low),
                        int(o.infected_high),
                    ]);
                }
                agg.push(vec![num(rho_low), num(rho), num(t), int(cfg.replicas), int(checks), int(dom), int(inf)]);
                unit_json.push(json!({
                    "rho_low": rho_low, "rho": rho, "T": t, "replicas": cfg.replicas, "checks": checks,
                    "domination_violations": dom, "infection_violations": inf,
                }));
            }
            report.summary.insert("units".into(), json!(unit_json));
            report.table("monotone", agg);
            report.table("monotone_replicas", per);
            Ok(report)
        }),
    })
}

fn plan_sprinkled(cfg: &RunConfig, law: JumpDistribution) -> Result<Plan> {
    let d = law.dim();
    let [a, b] = cfg.target.ok_or_else(|| missing("target", "= [a, b] is required for the sprinkled coupling"))?;
    let target = SiteBox::cube(d, a, b);
    if a > b {
        return Err(missing("target", &format!("[{a}, {b}] is empty")));
    }
    let rho = match cfg.rho.values() {
        [r] => *r,
        _ => return Err(missing("rho", "must be a single density for the sprinkled coupling")),
    };
    let mut scheds = Vec::new();
    let mut cost = 0.0;
    for &t in cfg.horizon.values() {
        let s = SprinkleSchedule::new(rho, t, target.clone(), cfg.meeting_window_c)?;
        cost += cfg.replicas as f64 * (rho + s.rho_star) * s.halo.volume() as f64 * t;
        scheds.push(s);
    }
    let cfg = cfg.clone();
    Ok(Plan {
        cost,
        job: Box::new(move || {
            let mut report = Report::default();
            let mut agg = Table::new(&[
                "rho",
                "T",
                "rho_star",
                "box_side",
                "rematches",
                "union_bound",
                "replicas",
                "failures",
                "frequency",
                "ci_lo",
                "ci_hi",
                "fallbacks",
                "bad_a",
                "bad_b0",
                "merged_decreases",
                "merged_separations",
                "eta0_p",
                "star0_p",
                "eta_final_p",
                "star_final_p",
                "independence_corr",
            ]);
            let mut per = Table::new(&[
                "T",
                "replica",
                "stream",
                "dominated",
                "fallback",
                "bad_a",
                "bad_b_count",
                "failure_sites",
                "merged_final",
                "eta_particles",
                "star_particles",
            ]);
            let mut unit_json = Vec::new();
            let mut summaries: Vec<(f64, SprinkleSummary)> = Vec::new();
            for s in &scheds {
                report.warnings.extend(s.warnings());
                let label = format!("rho={},T={}", num(rho), num(s.horizon));
                let src = unit_source(&cfg, &label);
                let runs: Vec<SprinkleOutcome> = farm(cfg.replicas, &src, |r| run_sprinkled(&law, s, r))?;
                report.seeds.push(SeedRecord::new(&label, &src, cfg.replicas));
                let sum = SprinkleSummary::new(s, &runs, cfg.level);
                report.truncation.fallbacks += sum.fallbacks;
                agg.push(vec![
                    num(rho),
                    num(s.horizon),
                    num(s.rho_star),
                    int(s.box_side),
                    int(s.rematch_times.len()),
                    num(s.inversion_union_bound()),
                    int(sum.replicas),
                    int(sum.failures),
                    num(sum.failures as f64 / sum.replicas as f64),
                    num(sum.failure_ci.lo),
                    num(sum.failure_ci.hi),
                    int(sum.fallbacks),
                    int(sum.bad_a),
                    int(sum.bad_b0),
                    int(sum.merged_decreases),
                    int(sum.merged_separations),
                    num(sum.eta_initial_fit.p_value),
                    num(sum.star_initial_fit.p_value),
                    num(sum.eta_final_fit.p_value),
                    num(sum.star_final_fit.p_value),
                    num(sum.independence_corr),
                ]);
                for (r, o) in runs.iter().enumerate() {
                    per.push(vec![
                        num(s.horizon),
                        int(r),
                        int(src.replica(r as u64).stream),
                        int(o.dominated_on_h as u8),
                        int(o.fallback as u8),
                        int(o.bad_a as u8),
                        int(o.bad_b.iter().filter(|&&x| x).count()),
                        int(o.failure_sites.len()),
                        int(o.merged_counts.last().copied().unwrap_or(0)),
                        int(o.eta_particles),
                        int(o.star_particles),
                    ]);
                }
                unit_json.push(json!({"T": s.horizon, "schedule": {
                    "rho_star": s.rho_star, "box_side": s.box_side, "rematches": s.rematch_times.len(),
                    "union_bound": s.inversion_union_bound(),
                }, "summary": sum}));
                summaries.push((s.horizon, sum));
            }
            let mut trend = Table::new(&["T_first", "T_last", "replicas", "frequency_first", "frequency_last", "z", "significant"]);
            if let (Some((ta, a)), Some((tb, b))) = (summaries.first(), summaries.last()) {
                if summaries.len() >= 2 {
                    let z = two_proportion_z(a.failures, a.replicas, b.failures, b.replicas);
                    let sig = z > z_for_level(2.0 * cfg.level - 1.0);
                    let fa = a.failures as f64 / a.replicas as f64;
                    let fb = b.failures as f64 / b.replicas as f64;
                    trend.push(vec![num(*ta), num(*tb), int(cfg.replicas), num(fa), num(fb), num(z), int(sig as u8)]);
                    report.summary.insert(
                        "trend".into(),
                        json!({"T_first": ta, "T_last": tb, "frequency_first": fa, "frequency_last": fb, "z": z, "significant": sig}),
                    );
                }
            }
            report.summary.insert("units".into(), json!(unit_json));
            report.table("sprinkle", agg);
            report.table("sprinkle_trend", trend);
            report.table("sprinkle_replicas", per);
            Ok(report)
        }),
    })
}

pub(super) fn plan_decouple(cfg: &RunConfig, law: JumpDistribution) -> Result<Plan> {
    let side = cfg.side.ok_or_else(|| missing("side", "is required"))?;
    let probes = cfg.probes()?;
    let mut units = Vec::new();
    for p in &probes {
        for &gap in cfg.gap.values() {
            let probe = DecouplingProbe::new(law.dim(), side, gap, *p, *p)?;
            for &rho in cfg.rho.values() {
                if !(rho > 0.0) {
                    return Err(missing("rho", &format!("= {rho} must be positive")));
                }
                units.push((probe.clone(), rho));
            }
        }
    }
    if cfg.replicas < 2 {
        return Err(missing("replicas", "must be at least 2"));
    }
    let cfg = cfg.clone();
    Ok(Plan {
        cost: 0.0,
        job: Box::new(move || {
            let mut report = Report::default();
            let mut t = Table::new(&[
                "probe",
                "rho",
                "rho_star",
                "side",
                "gap",
                "replicas",
                "joint",
                "first",
                "second",
                "error_term",
                "lhs",
                "rhs",
                "margin",
                "sigma",
                "holds",
                "holds_without_error",
                "correlation",
            ]);
            let mut unit_json = Vec::new();
            for (probe, rho) in units {
                let name = probe_name(&probe.first);
                let label = format!("probe={name},rho={},gap={}", num(rho), num(probe.gap));
                let src = unit_source(&cfg, &label);
                let r = decoupling_probe(&law, &probe, rho, cfg.replicas, cfg.error_constant, cfg.level, &src)?;
                for part in ["joint", "first", "second"] {
                    report.seeds.push(SeedRecord::new(format!("{label},{part}"), &src.derive_label(part), cfg.replicas));
                }
                t.push(vec![
                    name.clone(),
                    num(rho),
                    num(r.rho_star),
                    int(probe.side),
                    num(probe.gap),
                    int(r.replicas),
                    num(r.joint.mean),
                    num(r.first.mean),
                    num(r.second.mean),
                    num(r.error_term),
                    num(r.lhs),
                    num(r.rhs),
                    num(r.margin),
                    num(r.sigma),
                    int(r.holds as u8),
                    int(r.holds_without_error as u8),
                    num(r.correlation),
                ]);
                unit_json.push(json!({"probe": name, "report": r}));
            }
            report.summary.insert("units".into(), json!(unit_json));
            report.table("decouple", t);
            Ok(report)
        }),
    })
}
