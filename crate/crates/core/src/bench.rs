//! Runtime harness: align every trace of a log at several balance factors,
//! repeatedly, and record one row per run.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::loss::LossParams;
use crate::net::StochasticNet;
use crate::product::build_sync_product;
use crate::search::{align_product, SearchConfig, SearchError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub trace: usize,
    pub trace_length: usize,
    pub alpha: f64,
    pub repeat: usize,
    /// `ok`, `budget_exceeded` or `no_deadlock`.
    pub status: &'static str,
    pub cost: Option<u32>,
    pub loss: Option<f64>,
    pub expanded: Option<usize>,
    pub runtime_ms: f64,
}

/// Runs `traces × alphas × repeats` alignments, in that nesting order.
pub fn run_bench(
    net: &StochasticNet,
    traces: &[Vec<String>],
    alphas: &[f64],
    repeats: usize,
    config: &SearchConfig,
) -> Result<Vec<BenchRow>, crate::loss::LossError> {
    let params: Vec<LossParams> = alphas.iter().map(|a| LossParams::new(*a)).collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity(traces.len() * alphas.len() * repeats);
    for (i, trace) in traces.iter().enumerate() {
        for p in &params {
            for repeat in 0..repeats {
                let start = Instant::now();
                // the product is rebuilt each run so it counts toward the time
                let sp = build_sync_product(trace, net);
                let result = align_product(&sp, *p, config);
                let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
                let (status, cost, loss, expanded) = match result {
                    Ok(o) => ("ok", Some(o.alignment.cost), Some(o.alignment.loss), Some(o.stats.expanded)),
                    Err(SearchError::BudgetExceeded { .. }) => ("budget_exceeded", None, None, None),
                    Err(SearchError::NoDeadlockReachable { expanded }) => ("no_deadlock", None, None, Some(expanded)),
                    Err(SearchError::Loss(e)) => return Err(e),
                };
                rows.push(BenchRow {
                    trace: i,
                    trace_length: trace.len(),
                    alpha: p.alpha(),
                    repeat,
                    status,
                    cost,
                    loss,
                    expanded,
                    runtime_ms,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::{running_example, trace};

    #[test]
    fn row_count_and_header() {
        let net = running_example();
        let traces = vec![trace(&["a", "d", "c"]), trace(&["b"])];
        let rows = run_bench(&net, &traces, &[0.0, 1.0], 3, &SearchConfig::default()).unwrap();
        assert_eq!(rows.len(), 12);
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 13);
        assert!(text.starts_with("trace,trace_length,alpha,repeat,status,cost,loss,expanded,runtime_ms\n"));
    }
}
