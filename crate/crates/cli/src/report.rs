//! Deterministic CSV reports: header row, 17-significant-digit decimals,
//! LF line endings. Identical inputs produce identical bytes.

use std::fs;
use std::path::Path;

use anyhow::Context;

/// 17 significant digits, enough to round-trip any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Minimal CSV assembly with full control over cell formatting.
#[derive(Debug, Clone)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: Vec<S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row<S: Into<String>>(&mut self, row: Vec<S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        assert_eq!(row.len(), self.header.len(), "csv row arity");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        fs::write(path, self.to_csv())
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Fixed-range histogram plus summary statistics. Out-of-range values clamp
/// into the boundary bins, so counts always sum to the sample count.
#[derive(Debug, Clone)]
pub struct HistogramReport {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl HistogramReport {
    pub fn build(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        assert!(bins > 0 && hi > lo);
        let width = (hi - lo) / bins as f64;
        let bin_edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let idx = ((v - lo) / width).floor();
            let idx = (idx.max(0.0) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        let n = values.len();
        let mean = if n > 0 {
            values.iter().sum::<f64>() / n as f64
        } else {
            0.0
        };
        let std = if n > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (n - 1) as f64;
            var.sqrt()
        } else {
            0.0
        };
        Self {
            bin_edges,
            counts,
            mean,
            std,
            count: n,
        }
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_table(&self) -> CsvTable {
        let mut table = CsvTable::new(vec!["bin_lo", "bin_hi", "count"]);
        for (i, &c) in self.counts.iter().enumerate() {
            table.push_row(vec![
                fmt_f64(self.bin_edges[i]),
                fmt_f64(self.bin_edges[i + 1]),
                c.to_string(),
            ]);
        }
        table
    }
}
