//! Dataset CSV files: feature columns `x0..x{d-1}`, optional `label` (0/1) and
//! optional `value` columns.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<Vec<f64>>,
    pub labels: Option<Vec<bool>>,
    pub values: Option<Vec<f64>>,
}

enum Column {
    Feature(usize),
    Label,
    Value,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::from_reader(file).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_reader<R: Read>(reader: R) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| CliError::config(format!("line 1: {e}")))?
            .clone();
        let mut columns = Vec::with_capacity(headers.len());
        for name in headers.iter() {
            let col = match name {
                "label" => Column::Label,
                "value" => Column::Value,
                _ => match name.strip_prefix('x').and_then(|k| k.parse::<usize>().ok()) {
                    Some(k) => Column::Feature(k),
                    None => {
                        return Err(CliError::config(format!("line 1: unknown column `{name}`")))
                    }
                },
            };
            columns.push(col);
        }
        let dim = columns
            .iter()
            .filter(|c| matches!(c, Column::Feature(_)))
            .count();
        for k in 0..dim {
            if !columns
                .iter()
                .any(|c| matches!(c, Column::Feature(j) if *j == k))
            {
                return Err(CliError::config(format!(
                    "line 1: feature columns must be x0..x{}; x{k} is missing",
                    dim - 1
                )));
            }
        }
        if dim == 0 {
            return Err(CliError::config("line 1: no feature columns"));
        }
        let has_label = columns.iter().any(|c| matches!(c, Column::Label));
        let has_value = columns.iter().any(|c| matches!(c, Column::Value));

        let mut data = Dataset {
            points: Vec::new(),
            labels: has_label.then(Vec::new),
            values: has_value.then(Vec::new),
        };
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                CliError::config(format!("line {line}: {e}"))
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let mut point = vec![0.0; dim];
            for (field, col) in record.iter().zip(&columns) {
                match col {
                    Column::Feature(k) => point[*k] = parse_real(field, line)?,
                    Column::Label => {
                        let label = match field {
                            "0" => false,
                            "1" => true,
                            _ => {
                                return Err(CliError::config(format!(
                                    "line {line}: label must be 0 or 1, got `{field}`"
                                )))
                            }
                        };
                        data.labels
                            .as_mut()
                            .expect("label column present")
                            .push(label);
                    }
                    Column::Value => {
                        let v = parse_real(field, line)?;
                        data.values.as_mut().expect("value column present").push(v);
                    }
                }
            }
            data.points.push(point);
        }
        if data.points.is_empty() {
            return Err(CliError::config("no data rows"));
        }
        Ok(data)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let file = std::fs::File::create(path)?;
        self.to_writer(file)
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim()).map(|k| format!("x{k}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        if self.values.is_some() {
            header.push("value".into());
        }
        w.write_record(&header)?;
        for (i, p) in self.points.iter().enumerate() {
            let mut row: Vec<String> = p.iter().map(|&v| real(v)).collect();
            if let Some(labels) = &self.labels {
                row.push(if labels[i] { "1" } else { "0" }.into());
            }
            if let Some(values) = &self.values {
                row.push(real(values[i]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// The `value` column mapped to `[0, 1]` by min-max; a constant column maps to 0.5.
    pub fn normalized_values(&self) -> Option<Vec<f64>> {
        self.values
            .as_ref()
            .map(|v| qvs::campaigns::normalize_scores(v))
    }
}

/// Shortest text that parses back to `v`, in exponent form for extreme magnitudes.
pub fn real(v: f64) -> String {
    format!("{v:?}")
}

fn parse_real(field: &str, line: u64) -> CliResult<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(CliError::config(format!(
            "line {line}: non-finite number `{field}`"
        ))),
        Err(_) => Err(CliError::config(format!(
            "line {line}: cannot parse `{field}` as a number"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> CliResult<Dataset> {
        Dataset::from_reader(s.as_bytes())
    }

    #[test]
    fn reads_features_labels_and_values() {
        let d = parse("x1,x0,label,value\n2,1,1,0.5\n4,3,0,-1\n").unwrap();
        assert_eq!(d.points, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(d.labels, Some(vec![true, false]));
        assert_eq!(d.values, Some(vec![0.5, -1.0]));
    }

    #[test]
    fn errors_name_the_line() {
        let err = parse("x0,x1\n1,2\n3,oops\n").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        let err = parse("x0,x1\n1,2\n3\n").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        let err = parse("x0,label\n1,2\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("label"), "{err}");
        let err = parse("x0,x2\n1,2\n").unwrap_err().to_string();
        assert!(err.contains("x1"), "{err}");
        assert!(parse("x0,y\n1,2\n").is_err());
        assert!(parse("x0\n").is_err());
        assert!(parse("x0\nNaN\n").is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let d = Dataset {
            points: vec![vec![0.1, -1e-300], vec![1.0 / 3.0, 12345.678]],
            labels: Some(vec![true, false]),
            values: Some(vec![std::f64::consts::PI, -0.0]),
        };
        let mut buf = Vec::new();
        d.to_writer(&mut buf).unwrap();
        assert_eq!(Dataset::from_reader(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn constant_values_normalize_to_half() {
        let d = parse("x0,value\n0,3\n1,3\n").unwrap();
        assert_eq!(d.normalized_values(), Some(vec![0.5, 0.5]));
        let d = parse("x0,value\n0,1\n1,3\n2,2\n").unwrap();
        assert_eq!(d.normalized_values(), Some(vec![0.0, 1.0, 0.5]));
    }
}
