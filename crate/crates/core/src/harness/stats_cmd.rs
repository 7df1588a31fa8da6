//! `stats`: the invariant-measure and drift checks and the exact oracles.

use serde_json::json;

use super::config::{missing, RunConfig, StatsKind};
use super::csv::{int, num, Table};
use super::manifest::SeedRecord;
use super::plot::Plot;
use super::{unit_source, Plan, Report};
use crate::engine::invariant_measure_check;
use crate::error::Result;
use crate::lattice::{JumpDistribution, SiteBox};
use crate::stats::kernel::{jump_cutoff, DEFAULT_CELL_BUDGET};
use crate::stats::{
    deviation_tail, exact_kernel, floor_spread, kernel_floor_scan, kernel_mc, log_slope, meeting_floor_scan, meeting_mc,
    mushroom_tail, poisson_pmf, poisson_tail, poisson_upper_tail, walk_moments,
};

fn need_times(cfg: &RunConfig) -> Result<()> {
    if cfg.horizon.values().is_empty() {
        return Err(missing("horizon", "is required"));
    }
    Ok(())
}

fn check_points(cfg: &RunConfig, d: usize) -> Result<()> {
    if cfg.points.is_empty() {
        return Err(missing("points", "is required"));
    }
    if let Some(p) = cfg.points.iter().find(|p| p.len() != d) {
        return Err(missing("points", &format!("entry {p:?} needs {d} coordinates")));
    }
    Ok(())
}

fn check_eps(cfg: &RunConfig) -> Result<()> {
    if cfg.eps.values().is_empty() || cfg.eps.values().iter().any(|e| !(*e > 0.0)) {
        return Err(missing("eps", "must be a nonempty list of positive slopes"));
    }
    Ok(())
}

fn coords(x: &[i64]) -> String {
    x.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

pub(super) fn plan(cfg: &RunConfig, law: JumpDistribution) -> Result<Plan> {
    let kind = cfg.stats_kind.ok_or_else(|| missing("stats_kind", "is required"))?;
    let d = law.dim();
    let mut cost = 0.0;
    match kind {
        StatsKind::Invariant => {
            need_times(cfg)?;
            let [a, b] = cfg.interior.ok_or_else(|| missing("interior", "= [a, b] is required"))?;
            if a > b {
                return Err(missing("interior", "is empty"));
            }
            let vol = SiteBox::cube(d, a, b).volume() as f64;
            for &rho in cfg.rho.values() {
                for &t in cfg.horizon.values() {
                    cost += cfg.replicas as f64 * rho * vol * t;
                }
            }
        }
        StatsKind::Drift | StatsKind::Deviation | StatsKind::Mushroom => {
            need_times(cfg)?;
            if kind != StatsKind::Drift {
                check_eps(cfg)?;
            }
            if kind == StatsKind::Drift && cfg.replicas < 2 {
                return Err(missing("replicas", "must be at least 2"));
            }
            cost = cfg.replicas as f64 * cfg.horizon.values().iter().sum::<f64>() * cfg.eps.values().len().max(1) as f64;
        }
        StatsKind::PoissonTail => {
            if cfg.thresholds.is_empty() {
                return Err(missing("thresholds", "is required"));
            }
        }
        StatsKind::Kernel | StatsKind::KernelMc | StatsKind::Meeting | StatsKind::Floors => {
            need_times(cfg)?;
            for &t in cfg.horizon.values() {
                // the meeting oracle works on the same table
                let r = jump_cutoff(t) as u64;
                let cells = (2 * r + 1).checked_pow(d as u32).unwrap_or(u64::MAX);
                if cells > DEFAULT_CELL_BUDGET {
                    return Err(missing("horizon", &format!("t = {t} needs {cells} kernel cells, over the budget")));
                }
            }
            if matches!(kind, StatsKind::KernelMc | StatsKind::Meeting) {
                check_points(cfg, d)?;
                cost = cfg.replicas as f64 * cfg.horizon.values().iter().sum::<f64>();
            }
            if let Some(c) = cfg.window_c {
                if !(c > 0.0) {
                    return Err(missing("window_c", "must be positive"));
                }
            }
        }
    }
    let cfg = cfg.clone();
    Ok(Plan { cost, job: Box::new(move || execute(kind, &cfg, &law)) })
}

fn execute(kind: StatsKind, cfg: &RunConfig, law: &JumpDistribution) -> Result<Report> {
    let mut report = Report::default();
    let d = law.dim();
    let mut units = Vec::new();
    match kind {
        StatsKind::Invariant => {
            let [a, b] = cfg.interior.expect("checked in planning");
            let interior = SiteBox::cube(d, a, b);
            let mut t = Table::new(&["rho", "t", "replicas", "slack", "statistic", "dof", "p_value", "window_exits"]);
            let mut h = Table::new(&["rho", "t", "replicas", "count", "observed", "expected"]);
            for &rho in cfg.rho.values() {
                for &time in cfg.horizon.values() {
                    let label = format!("rho={},t={}", num(rho), num(time));
                    let src = unit_source(cfg, &label);
                    let r = invariant_measure_check(law, rho, &interior, time, cfg.replicas, &src, cfg.target_error)?;
                    report.seeds.push(SeedRecord::new(&label, &src, cfg.replicas));
                    report.truncation.window_exits += r.window_exits;
                    t.push(vec![
                        num(rho),
                        num(time),
                        int(cfg.replicas),
                        int(r.slack),
                        num(r.fit.statistic),
                        int(r.fit.dof),
                        num(r.fit.p_value),
                        int(r.window_exits),
                    ]);
                    let total: u64 = r.histogram.iter().sum();
                    let last = r.histogram.len() - 1;
                    for (k, &o) in r.histogram.iter().enumerate() {
                        let p = if k == last { poisson_upper_tail(rho, k as u64) } else { poisson_pmf(rho, k as u64) };
                        let label = if k == last { format!(">={k}") } else { k.to_string() };
                        h.push(vec![num(rho), num(time), int(cfg.replicas), label, int(o), num(p * total as f64)]);
                    }
                    units.push(json!({"rho": rho, "t": time, "replicas": cfg.replicas, "fit": r.fit}));
                }
            }
            report.table("invariant", t);
            report.table("invariant_hist", h);
        }
        StatsKind::Drift => {
            let v = law.drift().first();
            let mut t = Table::new(&[
                "t",
                "replicas",
                "drift",
                "speed_mean",
                "speed_sigma",
                "jumps_mean",
                "jumps_var",
                "z_speed",
                "z_jumps_mean",
                "z_jumps_var",
            ]);
            for &time in cfg.horizon.values() {
                let label = format!("t={}", num(time));
                let src = unit_source(cfg, &label);
                let m = walk_moments(law, time, cfg.replicas, &src)?;
                report.seeds.push(SeedRecord::new(&label, &src, cfg.replicas));
                let z = m.z_scores(v);
                t.push(vec![
                    num(time),
                    int(cfg.replicas),
                    num(v),
                    num(m.speed_mean),
                    num(m.speed_sigma),
                    num(m.jumps_mean),
                    num(m.jumps_var),
                    num(z[0]),
                    num(z[1]),
                    num(z[2]),
                ]);
                units.push(json!({"t": time, "moments": m, "z": z}));
            }
            report.table("drift", t);
        }
        StatsKind::PoissonTail => {
            let mut t = Table::new(&["rho", "A", "exact", "chernoff_bound", "ratio", "dominated"]);
            let (mut checked, mut violations) = (0u64, 0u64);
            for &rho in cfg.rho.values() {
                for &a in &cfg.thresholds {
                    let r = poisson_tail(rho, a);
                    let dominated = r.chernoff_bound.map(|b| r.exact <= b);
                    checked += dominated.is_some() as u64;
                    violations += (dominated == Some(false)) as u64;
                    let o = |x: Option<f64>| x.map_or_else(String::new, num);
                    let dom = dominated.map_or_else(String::new, |b| int(b as u8));
                    t.push(vec![num(rho), int(a), num(r.exact), o(r.chernoff_bound), o(r.ratio), dom]);
                }
            }
            report.summary.insert("checked".into(), json!(checked));
            report.summary.insert("violations".into(), json!(violations));
            report.table("poisson_tail", t);
        }
        StatsKind::Kernel => {
            let mut head = vec!["t".to_string()];
            head.extend((1..=d).map(|i| format!("x{i}")));
            head.push("prob".into());
            let head: Vec<&str> = head.iter().map(|s| s.as_str()).collect();
            let mut dump = Table::new(&head);
            let mut mass = Table::new(&["t", "radius", "mass", "truncation_error", "within"]);
            for &time in cfg.horizon.values() {
                let k = exact_kernel(law, time)?;
                for (x, p) in k.iter() {
                    let mut row = vec![num(time)];
                    row.extend(x[..d].iter().map(|c| int(*c)));
                    row.push(num(p));
                    dump.push(row);
                }
                let m = k.mass();
                let within = (1.0 - 1e-12..=1.0 + 4.0 * f64::EPSILON).contains(&m);
                mass.push(vec![num(time), int(k.radius), format!("{m:.17}"), num(k.truncation_error), int(within as u8)]);
                units.push(json!({"t": time, "radius": k.radius, "mass": m, "truncation_error": k.truncation_error, "within": within}));
            }
            report.table("kernel", dump);
            report.table("kernel_mass", mass);
        }
        StatsKind::KernelMc => {
            let mut t = Table::new(&["t", "x", "samples", "exact", "hits", "frequency", "sigma", "z"]);
            for &time in cfg.horizon.values() {
                let label = format!("t={}", num(time));
                let src = unit_source(cfg, &label);
                report.seeds.push(SeedRecord::new(&label, &src, 0));
                for p in kernel_mc(law, time, &cfg.points, cfg.replicas, &src)? {
                    t.push(vec![num(time), p.label.clone(), int(p.samples), num(p.exact), int(p.hits), num(p.frequency), num(p.sigma), num(p.z)]);
                    units.push(json!({"t": time, "point": p}));
                }
            }
            report.table("kernel_mc", t);
        }
        StatsKind::Meeting => {
            let mut t = Table::new(&["t", "x", "y", "route", "samples", "exact", "hits", "frequency", "sigma", "z"]);
            for &time in cfg.horizon.values() {
                for x in &cfg.points {
                    let y = vec![0i64; d];
                    let label = format!("t={},x={}", num(time), coords(x));
                    let src = unit_source(cfg, &label);
                    report.seeds.push(SeedRecord::new(&label, &src, 0));
                    let m = meeting_mc(law, x, &y, time, cfg.replicas, &src)?;
                    for p in [&m.pair, &m.difference] {
                        t.push(vec![
                            num(time),
                            coords(x),
                            coords(&y),
                            p.label.clone(),
                            int(p.samples),
                            num(p.exact),
                            int(p.hits),
                            num(p.frequency),
                            num(p.sigma),
                            num(p.z),
                        ]);
                    }
                    units.push(json!(m));
                }
            }
            report.table("meeting", t);
        }
        StatsKind::Floors => {
            let c = cfg.window_c.unwrap_or_else(|| 0.5 * (1.0 - law.drift().abs_sum()).sqrt());
            let k = kernel_floor_scan(law, cfg.horizon.values(), c)?;
            let m = meeting_floor_scan(law, cfg.horizon.values(), cfg.meeting_ratio)?;
            let mut t = Table::new(&["scan", "t", "floor", "points"]);
            for (name, pts) in [("kernel", &k), ("meeting", &m)] {
                for p in pts.iter() {
                    t.push(vec![name.into(), num(p.t), num(p.floor), int(p.points)]);
                }
            }
            report.summary.insert("window_c".into(), json!(c));
            report.summary.insert("kernel_spread".into(), json!(floor_spread(&k)));
            report.summary.insert("meeting_spread".into(), json!(floor_spread(&m)));
            units.push(json!({"kernel": k, "meeting": m}));
            report.table("floors", t);
        }
        StatsKind::Deviation => {
            let mut t = Table::new(&["eps", "u", "replicas", "hits", "frequency", "ci_lo", "ci_hi"]);
            let mut fits = Table::new(&["eps", "points", "slope", "intercept", "r_squared"]);
            let mut plot = Plot::new("deviation tail", "u", "log frequency");
            for &eps in cfg.eps.values() {
                let mut pts = Vec::new();
                for &u in cfg.horizon.values() {
                    let label = format!("eps={},u={}", num(eps), num(u));
                    let src = unit_source(cfg, &label);
                    let p = deviation_tail(law, eps, u, cfg.replicas, &src)?;
                    report.seeds.push(SeedRecord::new(&label, &src, cfg.replicas));
                    t.push(vec![num(eps), num(u), int(p.replicas), int(p.hits), num(p.frequency), num(p.ci.lo), num(p.ci.hi)]);
                    pts.push(p);
                }
                let fit = log_slope(&pts);
                if let Some(f) = &fit {
                    fits.push(vec![num(eps), int(f.points), num(f.slope), num(f.intercept), num(f.r_squared)]);
                }
                plot = plot.line(
                    format!("eps={}", num(eps)),
                    pts.iter().filter(|p| p.hits > 0).map(|p| (p.u, p.frequency.ln())).collect(),
                );
                units.push(json!({"eps": eps, "points": pts, "fit": fit}));
            }
            report.plots.push(("deviation".into(), plot));
            report.table("deviation", t);
            report.table("deviation_fit", fits);
        }
        StatsKind::Mushroom => {
            let mut t = Table::new(&["eps", "horizon", "replicas", "unsettled", "envelope_failures", "slope", "r_squared"]);
            let mut tail = Table::new(&["eps", "horizon", "replicas", "u", "tail"]);
            for &eps in cfg.eps.values() {
                for &h in cfg.horizon.values() {
                    let label = format!("eps={},horizon={}", num(eps), num(h));
                    let src = unit_source(cfg, &label);
                    let r = mushroom_tail(law, eps, cfg.replicas, h, &src)?;
                    report.seeds.push(SeedRecord::new(&label, &src, cfg.replicas));
                    let (slope, r2) = r.fit.map_or((String::new(), String::new()), |f| (num(f.slope), num(f.r_squared)));
                    t.push(vec![num(eps), num(h), int(cfg.replicas), int(r.unsettled), int(r.envelope_failures), slope, r2]);
                    for &(u, p) in &r.tail {
                        tail.push(vec![num(eps), num(h), int(cfg.replicas), num(u), num(p)]);
                    }
                    if r.unsettled > 0 {
                        report.warnings.push(format!("eps = {eps}: {} trajectories settled only in the second half", r.unsettled));
                    }
                    units.push(json!({
                        "eps": eps, "horizon": h, "unsettled": r.unsettled,
                        "envelope_failures": r.envelope_failures, "fit": r.fit,
                    }));
                }
            }
            report.table("mushroom", t);
            report.table("mushroom_tail", tail);
        }
    }
    report.summary.insert("units".into(), json!(units));
    Ok(report)
}
