use modegraph::dynamics::{coefficients, midcell, State, Trajectory};
use modegraph::equilibria::{assignable_equilibria, format_point, parse_rational, roa_box, Rational};
use modegraph::export;
use modegraph::graph::{
    build_basin_graph, build_full_graph, density_probe, plan_route, scc_decompose, CtrlGraph, ProbeBudget, Region,
};
use modegraph::localctrl::{grid_sweep, sample_sweep, SampleSweep};
use modegraph::relax::{
    benchmark_suite, convergence_study, simulate_mixed, BenchmarkCase, MixSignal, ModeMix, SwitchSchedule,
};
use serde_json::{json, Value};

use crate::config::{Format, RunConfig, SweepMode};
use crate::output::Outputs;
use crate::CliError;

fn config_err(field: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {e}"))
}

fn initial_state(cfg: &RunConfig) -> Result<State, CliError> {
    let n = cfg.device.particle_count();
    if cfg.initial_state.len() != n {
        return Err(config_err(
            "initial_state",
            format!("expected {n} coordinates, got {}", cfg.initial_state.len()),
        ));
    }
    State::new(cfg.initial_state.clone()).map_err(|e| config_err("initial_state", e))
}

fn mix_signal(cfg: &RunConfig) -> Result<Option<(MixSignal, f64)>, CliError> {
    let Some(m) = &cfg.mixture else { return Ok(None) };
    let values = m
        .weights
        .iter()
        .enumerate()
        .map(|(j, w)| ModeMix::new(w.clone()).map_err(|e| config_err(&format!("mixture.weights[{j}]"), e)))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(w) = values.iter().find(|w| w.modes() > cfg.device.mode_count) {
        return Err(config_err(
            "mixture.weights",
            format!("{} weights exceed mode_count {}", w.modes(), cfg.device.mode_count),
        ));
    }
    let sig = MixSignal::new(m.breakpoints.clone(), values).map_err(|e| config_err("mixture.breakpoints", e))?;
    Ok(Some((sig, m.horizon)))
}

fn sample_times(total: f64, step: f64, marks: &[f64]) -> Vec<f64> {
    let mut times = vec![0.0];
    if total > 0.0 {
        let n = (total / step).ceil() as usize;
        times.extend((1..n).map(|j| j as f64 * step));
        times.extend(marks.iter().copied().filter(|&m| m > 0.0 && m < total));
        times.push(total);
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

pub fn simulate(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let x0 = initial_state(cfg)?;
    let a = coefficients(&cfg.device)?;
    let (traj, limit_mode) = if let Some((sig, horizon)) = mix_signal(cfg)? {
        (simulate_mixed(&x0, &sig, &a, cfg.dt, horizon), None)
    } else {
        for (j, s) in cfg.schedule.iter().enumerate() {
            if s.mode > cfg.device.mode_count {
                return Err(config_err(
                    &format!("schedule[{j}].mode"),
                    format!("mode {} exceeds mode_count {}", s.mode, cfg.device.mode_count),
                ));
            }
        }
        let entries: Vec<(u32, f64)> = cfg.schedule.iter().map(|s| (s.mode, s.duration)).collect();
        let total: f64 = entries.iter().map(|e| e.1).sum();
        let mut marks = Vec::new();
        let mut acc = 0.0;
        for e in &entries {
            acc += e.1;
            marks.push(acc);
        }
        let step = cfg.sample_dt.unwrap_or(if total > 0.0 { total / 1000.0 } else { 1.0 });
        let times = sample_times(total, step, &marks);
        let sched = SwitchSchedule { entries, period: total };
        let states = sched.states_at(&x0, &a, &times);
        let last_mode = cfg.schedule.iter().rev().find(|s| s.duration > 0.0).map(|s| s.mode);
        (Trajectory { times, states }, last_mode)
    };
    out.emit("trajectory.csv", Format::Csv, export::trajectory_csv(&traj).as_bytes())?;
    let last = traj.last();
    let mut summary = json!({
        "samples": traj.len(),
        "final_time": traj.times.last(),
        "final_state": last.coords(),
    });
    if let Some(u) = limit_mode {
        let limit: Vec<f64> = last.coords().iter().map(|&x| midcell(x, u)).collect();
        summary["limit_under_last_mode"] = json!(limit);
    }
    out.emit_json("summary.json", &summary)?;
    Ok(summary)
}

pub fn equilibria(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let n = cfg.device.particle_count();
    let nodes = assignable_equilibria(cfg.device.mode_count, n);
    let list: Vec<Value> = nodes
        .iter()
        .enumerate()
        .map(|(i, e)| {
            json!({
                "id": i,
                "coords": e.coords.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
                "witnesses": e.witnesses.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
            })
        })
        .collect();
    out.emit_json("equilibria.json", &json!(list))?;
    let mut csv = String::from("id");
    for i in 1..=n {
        csv.push_str(&format!(",x{i}"));
    }
    csv.push_str(",label\n");
    for (i, e) in nodes.iter().enumerate() {
        csv.push_str(&i.to_string());
        for x in e.to_f64() {
            csv.push(',');
            csv.push_str(&export::fmt_f64(x));
        }
        csv.push_str(&format!(",\"{}\"\n", e.label()));
    }
    out.emit("equilibria.csv", Format::Csv, csv.as_bytes())?;
    Ok(json!({ "nodes": nodes.len(), "modes": cfg.device.mode_count, "particles": n }))
}

fn region(cfg: &RunConfig) -> Result<Option<Region>, CliError> {
    cfg.region
        .as_deref()
        .map(|s| Region::parse(s, cfg.device.particle_count()).map_err(|e| config_err("region", e)))
        .transpose()
}

fn build_graph(cfg: &RunConfig) -> Result<CtrlGraph, CliError> {
    let region = region(cfg)?;
    let n = cfg.device.particle_count();
    let modes = cfg.device.mode_count;
    Ok(if cfg.transit {
        build_full_graph(modes, n, region.as_ref(), &coefficients(&cfg.device)?)
    } else {
        build_basin_graph(modes, n, region.as_ref())
    })
}

fn emit_graph(g: &CtrlGraph, out: &mut Outputs) -> Result<Value, CliError> {
    let d = scc_decompose(g);
    out.emit("graph.dot", Format::Dot, export::graph_dot(g).as_bytes())?;
    out.emit_json("graph.json", &export::graph_json(g))?;
    out.emit_json("scc.json", &export::scc_json(g, &d))?;
    Ok(json!({
        "nodes": g.node_count(),
        "edges": g.edges().len(),
        "components": d.len(),
        "component_sizes": d.components.iter().map(|c| c.len()).collect::<Vec<_>>(),
    }))
}

pub fn graph(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, CliError> {
    if let Some(p) = &cfg.probe {
        let cell = roa_box(p.cell[0], &p.cell[1..]).map_err(|e| config_err("probe.cell", e))?;
        let a = coefficients(&cfg.device)?;
        if a.len() != cell.indices.len() {
            return Err(config_err("probe.cell", "dimension differs from the particle count"));
        }
        let budget = ProbeBudget {
            cell_modes: p.cell_modes,
            connector_modes: p.connector_modes,
        };
        let probe = density_probe(&cell, p.depth, &a, budget);
        out.emit_json("probe.json", &json!(probe.levels))?;
        let mut summary = emit_graph(&probe.graph, out)?;
        summary["levels"] = json!(probe.levels.iter().map(|l| json!({
            "level": l.level,
            "nodes": l.nodes,
            "components": l.components,
        })).collect::<Vec<_>>());
        return Ok(summary);
    }
    let g = build_graph(cfg)?;
    emit_graph(&g, out)
}

fn parse_point(field: &str, coords: &[String], n: usize) -> Result<Vec<Rational>, CliError> {
    if coords.len() != n {
        return Err(config_err(field, format!("expected {n} coordinates, got {}", coords.len())));
    }
    coords
        .iter()
        .map(|c| parse_rational(c).map_err(|e| config_err(field, e)))
        .collect()
}

pub fn plan(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let n = cfg.device.particle_count();
    let from = parse_point("from", &cfg.from, n)?;
    let to = parse_point("to", &cfg.to, n)?;
    let g = build_graph(cfg)?;
    let lookup = |field: &str, p: &[Rational]| {
        g.node_id(p)
            .ok_or_else(|| config_err(field, format!("{} is not a node of the graph", format_point(p))))
    };
    let (src, dst) = (lookup("from", &from)?, lookup("to", &to)?);
    let a = coefficients(&cfg.device)?;
    let schedule = plan_route(&g, src, dst, &a, cfg.tolerance)?;
    let start = g.nodes()[src].to_f64();
    let target = g.nodes()[dst].to_f64();
    let landed = schedule.execute(&start, &a);
    let miss = landed.distance(&target);
    if miss > cfg.tolerance {
        return Err(CliError::Internal(format!(
            "schedule lands {miss:e} from the target, above tolerance {}",
            cfg.tolerance
        )));
    }
    let doc = json!({
        "from": g.nodes()[src].label(),
        "to": g.nodes()[dst].label(),
        "path": schedule.path.iter().map(|&i| g.nodes()[i].label()).collect::<Vec<_>>(),
        "steps": schedule.steps.iter().map(|&(u, d)| json!({"mode": u, "dwell": d})).collect::<Vec<_>>(),
        "total_duration": schedule.total_duration(),
        "tolerance": schedule.tolerance,
        "landing_error": miss,
    });
    out.emit_json("schedule.json", &doc)?;
    Ok(doc)
}

pub fn localctrl(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let result = match cfg.sweep {
        SweepMode::Grid => grid_sweep(&cfg.device, cfg.device.mode_count, cfg.spacing_um)?,
        SweepMode::Sample => sample_sweep(&SampleSweep {
            particles: cfg.sample_particles,
            modes: cfg.device.mode_count,
            samples: cfg.samples,
            seed: cfg.seed,
            radius_range_um: cfg.radius_range_um,
            channel_height_um: cfg.device.channel_height_um,
            spacing_um: cfg.spacing_um,
            viscosity_pa_s: cfg.device.viscosity_pa_s,
            acoustic_energy_j_m3: cfg.device.acoustic_energy_j_m3,
        })?,
    };
    let p = result.percentage / 100.0;
    if !(result.wilson_lo <= p + 1e-12 && p <= result.wilson_hi + 1e-12) {
        return Err(CliError::Internal("percentage outside its Wilson interval".into()));
    }
    let summary = export::sweep_summary_json(&result);
    out.emit("sweep.csv", Format::Csv, export::sweep_csv(&result).as_bytes())?;
    out.emit_json("summary.json", &summary)?;
    if result.particles == 2 && result.samples.is_empty() && out.wants(Format::Svg) {
        out.emit("heatmap.svg", Format::Svg, export::sweep_svg(&result)?.as_bytes())?;
    }
    Ok(summary)
}

pub fn relax(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, CliError> {
    let cases = match mix_signal(cfg)? {
        Some((signal, horizon)) => {
            let x0 = initial_state(cfg)?;
            let a = coefficients(&cfg.device)?;
            let traj = simulate_mixed(&x0, &signal, &a, cfg.dt, horizon);
            out.emit("trajectory.csv", Format::Csv, export::trajectory_csv(&traj).as_bytes())?;
            vec![BenchmarkCase {
                name: "config".into(),
                x0: x0.into_inner(),
                signal,
                coefficients: a,
                horizon,
            }]
        }
        None => benchmark_suite(),
    };
    let mut report = Vec::new();
    let mut worst = 0.0f64;
    for case in &cases {
        let points = convergence_study(case, cfg.period, cfg.halvings)?;
        let ratios: Vec<f64> = points.windows(2).map(|w| w[1].error / w[0].error).collect();
        worst = ratios.iter().copied().fold(worst, f64::max);
        report.push(json!({
            "case": case.name,
            "points": export::error_report_json(&points),
            "ratios": ratios,
        }));
    }
    out.emit_json("errors.json", &json!(report))?;
    Ok(json!({ "cases": cases.len(), "worst_halving_ratio": worst }))
}
