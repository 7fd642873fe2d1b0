//! Evaluation report: per-sample metric rows plus aggregate means, emitted
//! as JSON and as an aligned-column text table.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRow {
    pub id: String,
    /// Metric name → value, in the report's column order.
    pub values: Vec<(String, Option<f64>)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub columns: Vec<String>,
    pub samples: Vec<SampleRow>,
    /// Mean over samples that produced a value, per column.
    pub aggregate: Vec<(String, Option<f64>)>,
    /// Metrics requested but skipped (e.g. missing ground truth), with reason.
    pub skipped: Vec<(String, String)>,
}

impl EvalReport {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, samples: Vec::new(), aggregate: Vec::new(), skipped: Vec::new() }
    }

    pub fn push_sample(&mut self, id: String, values: Vec<(String, Option<f64>)>) {
        self.samples.push(SampleRow { id, values });
    }

    pub fn skip(&mut self, metric: &str, reason: &str) {
        self.skipped.push((metric.to_string(), reason.to_string()));
    }

    /// Recomputes the aggregate row from the sample rows.
    pub fn finalize(&mut self) {
        self.aggregate = self
            .columns
            .iter()
            .map(|col| {
                let values: Vec<f64> = self
                    .samples
                    .iter()
                    .filter_map(|s| {
                        s.values.iter().find(|(name, _)| name == col).and_then(|(_, v)| *v)
                    })
                    .collect();
                let mean = if values.is_empty() {
                    None
                } else {
                    Some(values.iter().sum::<f64>() / values.len() as f64)
                };
                (col.clone(), mean)
            })
            .collect();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned-column text rendering.
    pub fn to_table(&self) -> String {
        let mut header = vec!["sample".to_string()];
        header.extend(self.columns.iter().cloned());
        let fmt = |v: &Option<f64>| match v {
            Some(x) => format!("{x:.6}"),
            None => "-".to_string(),
        };
        let mut rows: Vec<Vec<String>> = vec![header];
        for s in &self.samples {
            let mut row = vec![s.id.clone()];
            for col in &self.columns {
                let v = s.values.iter().find(|(name, _)| name == col).map(|(_, v)| *v).unwrap_or(None);
                row.push(fmt(&v));
            }
            rows.push(row);
        }
        let mut agg_row = vec!["mean".to_string()];
        for col in &self.columns {
            let v = self.aggregate.iter().find(|(name, _)| name == col).map(|(_, v)| *v).unwrap_or(None);
            agg_row.push(fmt(&v));
        }
        rows.push(agg_row);

        let cols = rows[0].len();
        let widths: Vec<usize> =
            (0..cols).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for (i, row) in rows.iter().enumerate() {
            let line: Vec<String> =
                row.iter().zip(&widths).map(|(cell, &w)| format!("{cell:<w$}")).collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
            if i == 0 {
                let total: usize = widths.iter().sum::<usize>() + 2 * (cols - 1);
                out.push_str(&"-".repeat(total));
                out.push('\n');
            }
        }
        for (metric, reason) in &self.skipped {
            out.push_str(&format!("skipped {metric}: {reason}\n"));
        }
        out
    }
}
