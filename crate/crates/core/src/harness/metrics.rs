//! CSV emission for per-round metrics and per-client costs.

use std::io::{BufRead, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};

use super::CostReport;

pub const METRICS_HEADER: &str = "strategy,partition,round,seed,test_accuracy,abstain_fraction,L_d,L_u,comm_bytes,rho,pseudo_label_accuracy";

const COST_HEADER: &str =
    "strategy,client,rounds,knowledge_bytes,parameter_bytes,per_round_bytes,total_bytes";

/// One row of `metrics.csv`. Fields that do not apply to a strategy are `None`
/// and written as empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub strategy: String,
    pub partition: String,
    pub round: usize,
    pub seed: u64,
    pub test_accuracy: f64,
    pub abstain_fraction: Option<f64>,
    pub loss_d: Option<f64>,
    pub loss_u: Option<f64>,
    /// Cumulative bytes sent per client up to and including this round.
    pub comm_bytes: u64,
    pub rho: Option<f64>,
    pub pseudo_label_accuracy: Option<f64>,
}

impl MetricRow {
    pub fn new(strategy: &str, partition: &str, round: usize, seed: u64, test_accuracy: f64) -> Self {
        Self {
            strategy: strategy.to_string(),
            partition: partition.to_string(),
            round,
            seed,
            test_accuracy,
            abstain_fraction: None,
            loss_d: None,
            loss_u: None,
            comm_bytes: 0,
            rho: None,
            pseudo_label_accuracy: None,
        }
    }

    fn to_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.strategy,
            self.partition,
            self.round,
            self.seed,
            self.test_accuracy,
            opt(self.abstain_fraction),
            opt(self.loss_d),
            opt(self.loss_u),
            self.comm_bytes,
            opt(self.rho),
            opt(self.pseudo_label_accuracy),
        )
    }

    fn from_line(line: usize, text: &str) -> Result<Self> {
        let cells: Vec<&str> = text.split(',').collect();
        if cells.len() != 11 {
            return Err(Error::Parse(format!("line {line}: expected 11 cells, got {}", cells.len())));
        }
        let bad = |what: &str| Error::Parse(format!("line {line}: invalid {what}"));
        let opt = |i: usize, what: &str| -> Result<Option<f64>> {
            if cells[i].is_empty() {
                Ok(None)
            } else {
                cells[i].parse().map(Some).map_err(|_| bad(what))
            }
        };
        Ok(Self {
            strategy: cells[0].to_string(),
            partition: cells[1].to_string(),
            round: cells[2].parse().map_err(|_| bad("round"))?,
            seed: cells[3].parse().map_err(|_| bad("seed"))?,
            test_accuracy: cells[4].parse().map_err(|_| bad("test_accuracy"))?,
            abstain_fraction: opt(5, "abstain_fraction")?,
            loss_d: opt(6, "L_d")?,
            loss_u: opt(7, "L_u")?,
            comm_bytes: cells[8].parse().map_err(|_| bad("comm_bytes"))?,
            rho: opt(9, "rho")?,
            pseudo_label_accuracy: opt(10, "pseudo_label_accuracy")?,
        })
    }
}

fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Writes a timestamp comment, the header, then one line per row.
pub fn write_metrics_csv<W: Write>(mut w: W, rows: &[MetricRow]) -> Result<()> {
    writeln!(w, "# generated_at_unix={}", timestamp())?;
    writeln!(w, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.to_line())?;
    }
    Ok(())
}

/// Reads rows back, skipping `#` comments; the header must match exactly.
pub fn read_metrics_csv<R: BufRead>(r: R) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line != METRICS_HEADER {
                return Err(Error::Parse(format!("line {n}: unexpected header `{line}`")));
            }
            header_seen = true;
            continue;
        }
        rows.push(MetricRow::from_line(n, &line)?);
    }
    if !header_seen {
        return Err(Error::Parse("missing header".into()));
    }
    Ok(rows)
}

pub fn write_cost_csv<W: Write>(mut w: W, reports: &[CostReport]) -> Result<()> {
    writeln!(w, "{COST_HEADER}")?;
    for r in reports {
        for c in &r.per_client {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.strategy,
                c.client,
                r.rounds,
                c.knowledge_bytes,
                c.parameter_bytes,
                c.per_round_bytes,
                c.total_bytes
            )?;
        }
    }
    Ok(())
}
