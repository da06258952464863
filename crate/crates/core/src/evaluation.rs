//! Post-hoc metrics on campaign logs and their aggregation over repeats.

use crate::campaigns::{normalize_scores, CampaignLog};
use crate::error::{Error, Result};
use crate::problems::nearest;
use crate::select::{greedy_select_kernel, improves};
use crate::spectral::{build_kernel_matrix, eigen_symmetric, euclidean_distance, KernelSpec};
use crate::vendi::{vendi_score, Order};

/// Eigenvalues at or below this make the log-determinant `-inf`.
pub const LOGDET_FLOOR: f64 = 1e-12;

/// `VS_q` of a point set; 0 for the empty set.
pub fn vs_of_points<P: AsRef<[f64]>>(points: &[P], spec: &KernelSpec, order: Order) -> Result<f64> {
    if points.is_empty() {
        return Ok(0.0);
    }
    vendi_score(&build_kernel_matrix(spec, points)?, order)
}

pub fn max_pairwise_distance<P: AsRef<[f64]>>(points: &[P]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            best = best.max(euclidean_distance(points[i].as_ref(), points[j].as_ref()));
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    /// `-inf` when the kernel matrix is numerically singular.
    pub logdet: f64,
    pub det: f64,
}

pub fn kernel_logdet<P: AsRef<[f64]>>(points: &[P], spec: &KernelSpec) -> Result<LogDet> {
    if points.is_empty() {
        return Ok(LogDet {
            logdet: 0.0,
            det: 1.0,
        });
    }
    let spectrum = eigen_symmetric(&build_kernel_matrix(spec, points)?)?;
    if spectrum.eigenvalues.iter().any(|&l| l <= LOGDET_FLOOR) {
        return Ok(LogDet {
            logdet: f64::NEG_INFINITY,
            det: 0.0,
        });
    }
    let logdet: f64 = spectrum.eigenvalues.iter().map(|l| l.ln()).sum();
    Ok(LogDet {
        logdet,
        det: logdet.exp(),
    })
}

/// `VS_q` of the positives in a binary-label log.
pub fn eval_vs_of_positives(log: &CampaignLog, spec: &KernelSpec, order: Order) -> Result<f64> {
    vs_of_points(&log.positives(), spec, order)
}

pub fn eval_max_pairwise_distance(log: &CampaignLog) -> f64 {
    max_pairwise_distance(&log.positives())
}

pub fn eval_kernel_logdet(log: &CampaignLog, spec: &KernelSpec) -> Result<LogDet> {
    kernel_logdet(&log.positives(), spec)
}

/// `VS_q` of the queried points whose observed value is at least `threshold`.
pub fn eval_threshold_discoveries(
    log: &CampaignLog,
    threshold: f64,
    spec: &KernelSpec,
    order: Order,
) -> Result<f64> {
    let good: Vec<&[f64]> = log
        .entries()
        .iter()
        .filter(|e| e.observation >= threshold)
        .map(|e| e.point.as_slice())
        .collect();
    vs_of_points(&good, spec, order)
}

/// Best observation in the log.
pub fn eval_best_value(log: &CampaignLog) -> f64 {
    log.entries()
        .iter()
        .map(|e| e.observation)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The `m` observed points (as log entry positions) forming the reported solution set:
/// greedy qVS over all observations with values normalized to `[0, 1]`.
pub fn report_solutions(
    log: &CampaignLog,
    spec: &KernelSpec,
    order: Order,
    m: usize,
) -> Result<Vec<usize>> {
    let entries = log.entries();
    let m = m.min(entries.len());
    if m == 0 {
        return Ok(Vec::new());
    }
    let points: Vec<&[f64]> = entries.iter().map(|e| e.point.as_slice()).collect();
    let values: Vec<f64> = entries.iter().map(|e| e.observation).collect();
    let kernel = build_kernel_matrix(spec, &points)?;
    let all: Vec<usize> = (0..entries.len()).collect();
    greedy_select_kernel(&kernel, &normalize_scores(&values), order, m, &[], &all)
}

/// Rank-ordered solutions: the best observation, then repeatedly the best one at least
/// `tau` from all earlier picks. May return fewer than `m`.
pub fn rank_ordered_solutions(log: &CampaignLog, tau: f64, m: usize) -> Vec<usize> {
    let entries = log.entries();
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| {
        entries[b]
            .observation
            .total_cmp(&entries[a].observation)
            .then(a.cmp(&b))
    });
    let mut picked: Vec<usize> = Vec::with_capacity(m);
    for i in order {
        if picked.len() == m {
            break;
        }
        if picked
            .iter()
            .all(|&j| euclidean_distance(&entries[i].point, &entries[j].point) >= tau)
        {
            picked.push(i);
        }
    }
    picked
}

/// Number of distinct centers that are nearest to at least one point.
pub fn peaks_covered<P: AsRef<[f64]>>(points: &[P], centers: &[Vec<f64>]) -> usize {
    let mut hit = vec![false; centers.len()];
    if centers.is_empty() {
        return 0;
    }
    for p in points {
        hit[nearest(centers, p.as_ref())] = true;
    }
    hit.iter().filter(|&&h| h).count()
}

/// One named per-run measurement, optionally tied to an evaluation order.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub q_eval: Option<Order>,
    pub value: f64,
}

impl Metric {
    pub fn new(name: &str, q_eval: Option<Order>, value: f64) -> Self {
        Metric {
            name: name.to_string(),
            q_eval,
            value,
        }
    }
}

/// Metrics for a binary-label log: VS of positives at each order, the positive count,
/// their maximum pairwise distance, and the kernel log-determinant and determinant.
pub fn binary_metrics(
    log: &CampaignLog,
    spec: &KernelSpec,
    eval_orders: &[Order],
) -> Result<Vec<Metric>> {
    let mut out = Vec::with_capacity(eval_orders.len() + 4);
    for &q in eval_orders {
        out.push(Metric::new(
            "vs_positives",
            Some(q),
            eval_vs_of_positives(log, spec, q)?,
        ));
    }
    out.push(Metric::new("positives", None, log.positives().len() as f64));
    out.push(Metric::new(
        "max_pairwise_distance",
        None,
        eval_max_pairwise_distance(log),
    ));
    let ld = eval_kernel_logdet(log, spec)?;
    out.push(Metric::new("logdet", None, ld.logdet));
    out.push(Metric::new("det", None, ld.det));
    Ok(out)
}

/// Metrics for a real-valued log: best value, and the VS of observations reaching
/// `threshold` at each order when a threshold is given.
pub fn value_metrics(
    log: &CampaignLog,
    spec: &KernelSpec,
    eval_orders: &[Order],
    threshold: Option<f64>,
) -> Result<Vec<Metric>> {
    let mut out = vec![Metric::new("best_value", None, eval_best_value(log))];
    if let Some(t) = threshold {
        for &q in eval_orders {
            out.push(Metric::new(
                "vs_threshold",
                Some(q),
                eval_threshold_discoveries(log, t, spec, q)?,
            ));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(count)`; 0 for a single value.
    pub stderr: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    let n = values.len();
    if n == 0 {
        return Err(Error::Empty("metric values"));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 || values.iter().all(|&v| v == values[0]) {
        return Ok(Summary {
            mean: values[0],
            stderr: 0.0,
            count: n,
        });
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Ok(Summary {
        mean,
        stderr: (var / n as f64).sqrt(),
        count: n,
    })
}

/// Flags every entry tied with the maximum (relative tolerance as in selection).
pub fn best_flags(values: &[f64]) -> Vec<bool> {
    let max = values
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|&v| !v.is_nan() && (v == max || !improves(max, v)))
        .collect()
}

/// All repeats of one policy at one policy order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunGroup {
    pub policy: String,
    pub q_policy: Option<Order>,
    pub runs: Vec<Vec<Metric>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub policy: String,
    pub q_policy: Option<Order>,
    pub q_eval: Option<Order>,
    pub metric: String,
    pub summary: Summary,
    /// Best mean within its `(metric, q_eval)` column.
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
}

impl MetricsReport {
    pub fn get(
        &self,
        policy: &str,
        q_policy: Option<Order>,
        metric: &str,
        q_eval: Option<Order>,
    ) -> Option<&MetricRow> {
        self.rows.iter().find(|r| {
            r.policy == policy && r.q_policy == q_policy && r.metric == metric && r.q_eval == q_eval
        })
    }

    /// Rows of one `(metric, q_eval)` column, in group order.
    pub fn column(&self, metric: &str, q_eval: Option<Order>) -> Vec<&MetricRow> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric && r.q_eval == q_eval)
            .collect()
    }
}

/// Means and standard errors per group and metric, with best flags per column.
pub fn aggregate(groups: &[RunGroup]) -> Result<MetricsReport> {
    if groups.is_empty() {
        return Err(Error::Empty("run groups"));
    }
    let mut rows = Vec::new();
    for g in groups {
        let first = g.runs.first().ok_or(Error::Empty("runs in group"))?;
        for (k, m) in first.iter().enumerate() {
            let mut values = Vec::with_capacity(g.runs.len());
            for run in &g.runs {
                let other = run
                    .get(k)
                    .filter(|o| o.name == m.name && o.q_eval == m.q_eval)
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "runs of {} report different metrics",
                            g.policy
                        ))
                    })?;
                values.push(other.value);
            }
            rows.push(MetricRow {
                policy: g.policy.clone(),
                q_policy: g.q_policy,
                q_eval: m.q_eval,
                metric: m.name.clone(),
                summary: summarize(&values)?,
                best: false,
            });
        }
    }
    let mut columns: Vec<(String, Option<Order>)> = Vec::new();
    for r in &rows {
        if !columns
            .iter()
            .any(|(n, q)| *n == r.metric && *q == r.q_eval)
        {
            columns.push((r.metric.clone(), r.q_eval));
        }
    }
    for (name, q) in columns {
        let idx: Vec<usize> = (0..rows.len())
            .filter(|&i| rows[i].metric == name && rows[i].q_eval == q)
            .collect();
        let means: Vec<f64> = idx.iter().map(|&i| rows[i].summary.mean).collect();
        for (i, flag) in idx.into_iter().zip(best_flags(&means)) {
            rows[i].best = flag;
        }
    }
    Ok(MetricsReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaigns::{LogEntry, PolicyKind, Snapshot};

    fn log_of(points: &[(Vec<f64>, f64)]) -> CampaignLog {
        let mut log = CampaignLog::new(PolicyKind::QvsAs, Order::SHANNON);
        for (i, (p, y)) in points.iter().enumerate() {
            log.push(LogEntry {
                iteration: i,
                index: Some(i),
                point: p.clone(),
                observation: *y,
                snapshot: Snapshot::default(),
            });
        }
        log
    }

    #[test]
    fn vs_of_positives() {
        let spec = KernelSpec::gaussian(0.01).unwrap();
        let none = log_of(&[(vec![0.0], 0.0), (vec![1.0], 0.0)]);
        assert_eq!(
            eval_vs_of_positives(&none, &spec, Order::SHANNON).unwrap(),
            0.0
        );
        let far = log_of(&[
            (vec![0.0], 1.0),
            (vec![5.0], 1.0),
            (vec![10.0], 1.0),
            (vec![2.0], 0.0),
        ]);
        assert!((eval_vs_of_positives(&far, &spec, Order::SHANNON).unwrap() - 3.0).abs() < 1e-9);
        assert_eq!(
            eval_vs_of_positives(&far, &spec, Order::COUNT).unwrap(),
            3.0
        );
    }

    #[test]
    fn distances() {
        assert_eq!(
            eval_max_pairwise_distance(&log_of(&[(vec![0.0, 0.0], 1.0), (vec![3.0, 4.0], 1.0)])),
            5.0
        );
        assert_eq!(
            eval_max_pairwise_distance(&log_of(&[(vec![0.0, 0.0], 1.0)])),
            0.0
        );
        let line = log_of(&[(vec![0.0], 1.0), (vec![1.0], 1.0), (vec![2.0], 1.0)]);
        assert_eq!(eval_max_pairwise_distance(&line), 2.0);
    }

    #[test]
    fn logdet() {
        let spec = KernelSpec::gaussian(1e-3).unwrap();
        let id = log_of(&[(vec![0.0], 1.0), (vec![1.0], 1.0), (vec![2.0], 1.0)]);
        let ld = eval_kernel_logdet(&id, &spec).unwrap();
        assert!(ld.logdet.abs() < 1e-12 && (ld.det - 1.0).abs() < 1e-12);
        let dup = log_of(&[(vec![0.0], 1.0), (vec![0.0], 1.0)]);
        let ld = eval_kernel_logdet(&dup, &spec).unwrap();
        assert_eq!((ld.logdet, ld.det), (f64::NEG_INFINITY, 0.0));
        // k = 0.5 at distance sqrt(2 ln 2) for unit lengthscale
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let d = (2.0 * 2f64.ln()).sqrt();
        let half = log_of(&[(vec![0.0], 1.0), (vec![d], 1.0)]);
        assert!((eval_kernel_logdet(&half, &spec).unwrap().det - 0.75).abs() < 1e-12);
    }

    #[test]
    fn threshold_discoveries() {
        let spec = KernelSpec::gaussian(1e-3).unwrap();
        let log = log_of(&[(vec![0.0], 3.0), (vec![1.0], 9.0), (vec![2.0], 12.0)]);
        assert_eq!(
            eval_threshold_discoveries(&log, 100.0, &spec, Order::SHANNON).unwrap(),
            0.0
        );
        let all = eval_threshold_discoveries(&log, f64::MIN, &spec, Order::SHANNON).unwrap();
        assert!((all - 3.0).abs() < 1e-9);
        let two = eval_threshold_discoveries(&log, 9.0, &spec, Order::SHANNON).unwrap();
        assert!((two - 2.0).abs() < 1e-9);
    }

    #[test]
    fn summaries() {
        assert_eq!(
            summarize(&[4.5]).unwrap(),
            Summary {
                mean: 4.5,
                stderr: 0.0,
                count: 1
            }
        );
        let s = summarize(&[2.0, 4.0]).unwrap();
        assert_eq!((s.mean, s.stderr), (3.0, 1.0));
        assert!(summarize(&[]).is_err());
        assert_eq!(best_flags(&[3.0, 3.0, 2.0]), vec![true, true, false]);
    }

    #[test]
    fn aggregate_flags_per_column() {
        let run = |a: f64, b: f64| {
            vec![
                Metric::new("vs_positives", Some(Order::COUNT), a),
                Metric::new("vs_positives", Some(Order::SHANNON), b),
            ]
        };
        let groups = vec![
            RunGroup {
                policy: "qvs-as".into(),
                q_policy: Some(Order::COUNT),
                runs: vec![run(5.0, 1.0), run(7.0, 1.0)],
            },
            RunGroup {
                policy: "qvs-as".into(),
                q_policy: Some(Order::SHANNON),
                runs: vec![run(4.0, 3.0), run(4.0, 2.0)],
            },
        ];
        let report = aggregate(&groups).unwrap();
        let a = report
            .get(
                "qvs-as",
                Some(Order::COUNT),
                "vs_positives",
                Some(Order::COUNT),
            )
            .unwrap();
        assert!(a.best && a.summary.mean == 6.0);
        let b = report
            .get(
                "qvs-as",
                Some(Order::SHANNON),
                "vs_positives",
                Some(Order::SHANNON),
            )
            .unwrap();
        assert!(b.best && (b.summary.stderr - 0.5).abs() < 1e-15);
        assert_eq!(report.column("vs_positives", Some(Order::COUNT)).len(), 2);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn solution_reports() {
        let spec = KernelSpec::gaussian(0.1).unwrap();
        let log = log_of(&[
            (vec![0.0], 1.0),
            (vec![0.01], 0.99),
            (vec![1.0], 0.9),
            (vec![0.5], 0.1),
        ]);
        assert_eq!(
            report_solutions(&log, &spec, Order::COUNT, 2).unwrap(),
            vec![0, 1]
        );
        let diverse = report_solutions(&log, &spec, Order::SHANNON, 2).unwrap();
        assert_eq!(diverse, vec![0, 2]);
        assert_eq!(rank_ordered_solutions(&log, 0.3, 3), vec![0, 2, 3]);
        let pts: Vec<&[f64]> = diverse
            .iter()
            .map(|&i| log.entries()[i].point.as_slice())
            .collect();
        assert_eq!(peaks_covered(&pts, &[vec![0.0], vec![1.0], vec![3.0]]), 2);
    }

    #[test]
    fn metrics_are_deterministic() {
        let spec = KernelSpec::gaussian(0.7).unwrap();
        let log = log_of(&[
            (vec![0.3, 0.1], 1.0),
            (vec![0.9, -0.2], 1.0),
            (vec![0.0, 0.5], 0.0),
        ]);
        let qs = [Order::COUNT, Order::SHANNON, Order::Infinity];
        let a = binary_metrics(&log, &spec, &qs).unwrap();
        let b = binary_metrics(&log, &spec, &qs).unwrap();
        assert_eq!(
            a.iter().map(|m| m.value.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|m| m.value.to_bits()).collect::<Vec<_>>()
        );
    }
}
