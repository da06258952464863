//! One-shot scoring and greedy selection on a dataset file.

use qvs::select::{greedy_select, GreedyConfig};
use qvs::{
    build_kernel_matrix, quality_weighted_vendi_score, vendi_score, KernelSpec, Order, Point,
    ScoredSet,
};

use crate::dataset::{real, Dataset};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRow {
    pub q: Order,
    pub vs: f64,
    /// Present when the dataset has a `value` column.
    pub qvs: Option<f64>,
}

fn points(data: &Dataset) -> CliResult<Vec<Point>> {
    data.points
        .iter()
        .map(|p| Point::new(p.clone()).map_err(CliError::from))
        .collect()
}

/// `VS_q` of all rows at each order, plus qVS with min-max normalized values.
pub fn score(data: &Dataset, spec: &KernelSpec, orders: &[Order]) -> CliResult<Vec<ScoreRow>> {
    let items = points(data)?;
    let kernel = build_kernel_matrix(spec, &items)?;
    let scored = match data.normalized_values() {
        Some(s) => Some(ScoredSet::new(items, s)?),
        None => None,
    };
    orders
        .iter()
        .map(|&q| {
            let qvs = match &scored {
                Some(set) => Some(quality_weighted_vendi_score(set, spec, q)?),
                None => None,
            };
            Ok(ScoreRow {
                q,
                vs: vendi_score(&kernel, q)?,
                qvs,
            })
        })
        .collect()
}

pub fn write_scores<W: std::io::Write>(rows: &[ScoreRow], out: W) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let with_qvs = rows.iter().any(|r| r.qvs.is_some());
    let mut header = vec!["q", "vs"];
    if with_qvs {
        header.push("qvs");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.q.to_string(), real(r.vs)];
        if let Some(v) = r.qvs {
            rec.push(real(v));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub indices: Vec<usize>,
    pub qvs: f64,
}

/// Greedy qVS selection of `batch` rows. Rows without a `value` column all score 1.
pub fn select(
    data: &Dataset,
    spec: &KernelSpec,
    order: Order,
    batch: usize,
) -> CliResult<Selection> {
    if batch > data.len() {
        return Err(CliError::config(format!(
            "batch of {batch} exceeds the {} rows in the dataset",
            data.len()
        )));
    }
    let items = points(data)?;
    let pool = match data.normalized_values() {
        Some(s) => ScoredSet::new(items, s)?,
        None => ScoredSet::unweighted(items)?,
    };
    let indices = greedy_select(&pool, spec, order, GreedyConfig { batch_size: batch }, &[])?;
    let chosen = ScoredSet::new(
        indices.iter().map(|&i| pool.items()[i].clone()).collect(),
        indices.iter().map(|&i| pool.scores()[i]).collect(),
    )?;
    let qvs = quality_weighted_vendi_score(&chosen, spec, order)?;
    Ok(Selection { indices, qvs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(rows: &[[f64; 2]], values: Option<Vec<f64>>) -> Dataset {
        Dataset {
            points: rows.iter().map(|r| r.to_vec()).collect(),
            labels: None,
            values,
        }
    }

    #[test]
    fn orthogonal_rows_score_their_count() {
        let d = Dataset {
            points: vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            labels: None,
            values: None,
        };
        let rows = score(
            &d,
            &KernelSpec::Cosine,
            &[Order::COUNT, Order::SHANNON, Order::Infinity],
        )
        .unwrap();
        for r in rows {
            assert!((r.vs - 3.0).abs() < 1e-9);
            assert_eq!(r.qvs, None);
        }
    }

    #[test]
    fn constant_values_halve_the_score() {
        let d = data(&[[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]], Some(vec![7.0; 3]));
        let spec = KernelSpec::gaussian(0.7).unwrap();
        let r = score(&d, &spec, &[Order::SHANNON]).unwrap()[0];
        assert!((r.qvs.unwrap() - 0.5 * r.vs).abs() < 1e-12);
    }

    #[test]
    fn selection_prefers_far_apart_rows_and_rejects_large_batches() {
        let d = data(&[[0.0, 0.0], [0.01, 0.0], [5.0, 5.0]], None);
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let s = select(&d, &spec, Order::SHANNON, 2).unwrap();
        assert_eq!(s.indices, vec![0, 2]);
        assert!((s.qvs - 2.0).abs() < 1e-6);
        assert_eq!(
            select(&d, &spec, Order::SHANNON, 4)
                .unwrap_err()
                .exit_code(),
            2
        );
    }
}
