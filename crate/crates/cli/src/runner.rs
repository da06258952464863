//! Repeated campaigns over a policy × order grid, with deterministic CSV output.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use qvs::campaigns::{run_campaign, CampaignLog, InitialData};
use qvs::evaluation::{
    aggregate, binary_metrics, value_metrics, vs_of_points, Metric, MetricsReport, RunGroup,
};
use qvs::problems::{draw_initial_indices, draw_initial_points};
use qvs::Order;

use crate::config::{Cell, Mode, Plan};
use crate::dataset::real;
use crate::error::{CliError, CliResult};
use crate::generate::Problem;

/// Order at which trajectories record the diversity of discoveries.
const TRAJECTORY_ORDER: Order = Order::SHANNON;

struct Outcome {
    log: CampaignLog,
    metrics: Vec<Metric>,
    trajectory: Vec<(usize, f64, f64)>,
}

pub struct RunSummary {
    pub report: MetricsReport,
    pub output_dir: PathBuf,
    pub log_count: usize,
}

/// Runs every cell for every repeat. With `bench`, also writes the cross-q matrix
/// unconditionally and per-query trajectories.
pub fn execute(plan: &Plan, bench: bool) -> CliResult<RunSummary> {
    let ex = &plan.config.execution;
    let initial: Vec<InitialData> = (0..ex.repeats)
        .map(|r| initial_data(plan, repeat_seed(plan, r)))
        .collect::<CliResult<_>>()?;

    let tasks: Vec<(usize, usize)> = (0..ex.repeats)
        .flat_map(|r| (0..plan.cells.len()).map(move |c| (r, c)))
        .collect();
    let mut results: Vec<Option<Outcome>> = (0..tasks.len()).map(|_| None).collect();

    let next = AtomicUsize::new(0);
    let workers = ex.jobs.min(tasks.len()).max(1);
    let mut failure = None;
    std::thread::scope(|s| {
        let (tx, rx) = mpsc::channel();
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, tasks, initial) = (&next, &tasks, &initial);
            s.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(r, c)) = tasks.get(k) else { break };
                let out = run_one(plan, plan.cells[c], r, &initial[r], bench);
                let failed = out.is_err();
                if tx.send((k, out)).is_err() || failed {
                    // stop handing out work after a failure
                    next.store(tasks.len(), Ordering::Relaxed);
                    break;
                }
            });
        }
        drop(tx);
        for (k, out) in rx {
            match out {
                Ok(o) => results[k] = Some(o),
                Err(e) => {
                    let (r, c) = tasks[k];
                    let cell = plan.cells[c];
                    failure.get_or_insert(CliError::runtime(format!(
                        "{} repeat {r}: {e}",
                        cell_label(cell)
                    )));
                }
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let results: Vec<Outcome> = results
        .into_iter()
        .map(|o| o.expect("every task reported"))
        .collect();

    let dir = &ex.output_dir;
    std::fs::create_dir_all(dir.join("logs"))?;
    for (&(r, c), o) in tasks.iter().zip(&results) {
        let cell = plan.cells[c];
        write_log(
            &dir.join("logs")
                .join(format!("{}_r{r}.csv", cell_label(cell))),
            cell,
            r,
            &o.log,
        )?;
    }

    let groups: Vec<RunGroup> = plan
        .cells
        .iter()
        .enumerate()
        .map(|(c, cell)| RunGroup {
            policy: cell.policy.name().to_string(),
            q_policy: cell.q,
            runs: tasks
                .iter()
                .zip(&results)
                .filter(|((_, tc), _)| *tc == c)
                .map(|(_, o)| o.metrics.clone())
                .collect(),
        })
        .collect();
    let report = aggregate(&groups)?;
    write_metrics(&dir.join("metrics.csv"), &report)?;
    if bench || plan.q_values.len() > 1 {
        write_cross_q(
            &dir.join("cross_q.csv"),
            &report,
            diversity_metric(plan.mode),
        )?;
    }
    if bench {
        let mut w = csv::Writer::from_path(dir.join("trajectories.csv"))?;
        w.write_record([
            "policy",
            "q_policy",
            "repeat",
            "step",
            "iteration",
            "incumbent",
            "vs",
        ])?;
        for (&(r, c), o) in tasks.iter().zip(&results) {
            let cell = plan.cells[c];
            for (step, &(iteration, incumbent, vs)) in o.trajectory.iter().enumerate() {
                w.write_record([
                    cell.policy.name().to_string(),
                    order_field(cell.q),
                    r.to_string(),
                    (step + 1).to_string(),
                    iteration.to_string(),
                    real(incumbent),
                    real(vs),
                ])?;
            }
        }
        w.flush()?;
    }
    Ok(RunSummary {
        report,
        output_dir: dir.clone(),
        log_count: tasks.len(),
    })
}

pub fn repeat_seed(plan: &Plan, repeat: usize) -> u64 {
    plan.config.execution.base_seed.wrapping_add(repeat as u64)
}

fn initial_data(plan: &Plan, seed: u64) -> CliResult<InitialData> {
    let count = plan.config.problem.initial;
    Ok(match &plan.problem {
        Problem::Binary(p) => InitialData::Indices(draw_initial_indices(p.len(), count, seed)?),
        Problem::Real(p) => InitialData::Indices(draw_initial_indices(p.len(), count, seed)?),
        Problem::Continuous(f) => {
            use qvs::problems::Objective;
            InitialData::Points(draw_initial_points(f.domain(), count, seed))
        }
    })
}

fn run_one(
    plan: &Plan,
    cell: Cell,
    repeat: usize,
    initial: &InitialData,
    bench: bool,
) -> CliResult<Outcome> {
    let cfg = plan.campaign_config(cell, repeat_seed(plan, repeat));
    let log = run_campaign(
        cell.policy,
        plan.problem.as_core(),
        initial,
        &cfg,
        &plan.spec,
    )?;
    let metrics = match plan.mode {
        Mode::Binary => binary_metrics(&log, &plan.spec, &plan.eval_orders)?,
        Mode::Real | Mode::Continuous => {
            let t = plan.config.problem.threshold.unwrap_or(f64::NEG_INFINITY);
            value_metrics(&log, &plan.spec, &plan.eval_orders, Some(t))?
        }
    };
    let trajectory = if bench {
        trajectory(plan, &log)?
    } else {
        Vec::new()
    };
    Ok(Outcome {
        log,
        metrics,
        trajectory,
    })
}

/// `(iteration, incumbent, VS of discoveries so far)` after each query.
fn trajectory(plan: &Plan, log: &CampaignLog) -> CliResult<Vec<(usize, f64, f64)>> {
    let threshold = match plan.mode {
        Mode::Binary => 1.0,
        _ => plan.config.problem.threshold.unwrap_or(f64::NEG_INFINITY),
    };
    let incumbents = log.incumbent_trace();
    let mut found: Vec<&[f64]> = Vec::new();
    let mut out = Vec::new();
    for (k, e) in log.entries().iter().enumerate() {
        if e.observation >= threshold {
            found.push(&e.point);
        }
        if e.iteration > 0 {
            out.push((
                e.iteration,
                incumbents[k],
                vs_of_points(&found, &plan.spec, TRAJECTORY_ORDER)?,
            ));
        }
    }
    Ok(out)
}

fn diversity_metric(mode: Mode) -> &'static str {
    match mode {
        Mode::Binary => "vs_positives",
        Mode::Real | Mode::Continuous => "vs_threshold",
    }
}

/// File stem for a cell, e.g. `qvs-as_q1` or `random`.
pub fn cell_label(cell: Cell) -> String {
    match cell.q {
        Some(q) => format!("{}_q{q}", cell.policy.name()),
        None => cell.policy.name().to_string(),
    }
}

fn order_field(q: Option<Order>) -> String {
    q.map(|q| q.to_string()).unwrap_or_default()
}

fn write_log(path: &Path, cell: Cell, repeat: usize, log: &CampaignLog) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iter", "repeat", "policy", "q", "item", "observation"])?;
    let q = order_field(cell.q);
    for e in log.entries() {
        let item = match e.index {
            Some(i) => i.to_string(),
            None => e
                .point
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(";"),
        };
        w.write_record([
            e.iteration.to_string(),
            repeat.to_string(),
            log.policy().name().to_string(),
            q.clone(),
            item,
            real(e.observation),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_metrics(path: &Path, report: &MetricsReport) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "policy",
        "q_policy",
        "q_eval",
        "metric",
        "mean",
        "stderr",
        "best_flag",
    ])?;
    for r in &report.rows {
        w.write_record([
            r.policy.clone(),
            order_field(r.q_policy),
            order_field(r.q_eval),
            r.metric.clone(),
            real(r.summary.mean),
            real(r.summary.stderr),
            u8::from(r.best).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean diversity for each policy order (rows) at each evaluation order (columns).
fn write_cross_q(path: &Path, report: &MetricsReport, metric: &str) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "policy",
        "q_policy",
        "q_eval",
        "mean",
        "stderr",
        "best_flag",
    ])?;
    for r in report.rows.iter().filter(|r| r.metric == metric) {
        w.write_record([
            r.policy.clone(),
            order_field(r.q_policy),
            order_field(r.q_eval),
            real(r.summary.mean),
            real(r.summary.stderr),
            u8::from(r.best).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
