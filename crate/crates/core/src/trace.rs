//! Per-iteration records and their CSV encodings.
//!
//! Optimization traces use the header
//! `algo,seed,k,T_k,grad_calls,time_s,f_gap,dist`; GLM recovery traces use
//! `algo,seed,k,T_k,pg_calls,dist`. Floats are written in Rust's shortest
//! round-trip form, so equal traces always serialize to equal bytes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const RUN_TRACE_HEADER: [&str; 8] = [
    "algo",
    "seed",
    "k",
    "T_k",
    "grad_calls",
    "time_s",
    "f_gap",
    "dist",
];

pub const RECOVERY_TRACE_HEADER: [&str; 6] = ["algo", "seed", "k", "T_k", "pg_calls", "dist"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub t_k: f64,
    pub grad_calls: u64,
    pub time_s: f64,
    pub f_gap: f64,
    pub dist: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunTrace {
    pub algo: String,
    pub seed: u64,
    /// Parameter bundle used for the run, as `(name, value)` pairs.
    pub params: Vec<(String, f64)>,
    pub rows: Vec<TraceRow>,
    /// Number of function evaluations charged to the algorithm itself
    /// (monitoring evaluations are not counted).
    pub func_calls: u64,
}

impl RunTrace {
    pub fn new(algo: impl Into<String>, seed: u64, params: Vec<(String, f64)>) -> Self {
        Self {
            algo: algo.into(),
            seed,
            params,
            rows: Vec::new(),
            func_calls: 0,
        }
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn final_f_gap(&self) -> f64 {
        self.rows.last().map_or(f64::INFINITY, |r| r.f_gap)
    }

    pub fn grad_calls(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.grad_calls)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_run_traces(std::slice::from_ref(self), out)
    }
}

/// Writes several traces into one CSV, header first.
pub fn write_run_traces<W: Write>(traces: &[RunTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUN_TRACE_HEADER)?;
    for t in traces {
        for r in &t.rows {
            w.write_record([
                t.algo.clone(),
                t.seed.to_string(),
                r.k.to_string(),
                r.t_k.to_string(),
                r.grad_calls.to_string(),
                r.time_s.to_string(),
                r.f_gap.to_string(),
                r.dist.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses a CSV written by [`write_run_traces`], grouping rows by `(algo, seed)`.
pub fn read_run_traces<R: std::io::Read>(input: R) -> Result<Vec<RunTrace>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut traces: Vec<RunTrace> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let algo = field(0).to_string();
        let seed: u64 = field(1).parse().unwrap_or(0);
        let row = TraceRow {
            k: field(2).parse().unwrap_or(0),
            t_k: field(3).parse().unwrap_or(f64::NAN),
            grad_calls: field(4).parse().unwrap_or(0),
            time_s: field(5).parse().unwrap_or(f64::NAN),
            f_gap: field(6).parse().unwrap_or(f64::NAN),
            dist: field(7).parse().unwrap_or(f64::NAN),
        };
        match traces.last_mut() {
            Some(t) if t.algo == algo && t.seed == seed => t.rows.push(row),
            _ => {
                let mut t = RunTrace::new(algo, seed, Vec::new());
                t.rows.push(row);
                traces.push(t);
            }
        }
    }
    Ok(traces)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub k: usize,
    pub t_k: f64,
    pub pg_calls: u64,
    pub dist: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RecoveryTrace {
    pub algo: String,
    pub seed: u64,
    /// Increase constant of the link that generated the data.
    pub link_alpha: f64,
    pub rows: Vec<RecoveryRow>,
}

impl RecoveryTrace {
    pub fn final_dist(&self) -> f64 {
        self.rows.last().map_or(f64::INFINITY, |r| r.dist)
    }

    /// First iteration at which `dist <= target`, if any.
    pub fn first_hit(&self, target: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.dist <= target).map(|r| r.k)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_recovery_traces(std::slice::from_ref(self), out)
    }
}

pub fn write_recovery_traces<W: Write>(traces: &[RecoveryTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECOVERY_TRACE_HEADER)?;
    for t in traces {
        for r in &t.rows {
            w.write_record([
                t.algo.clone(),
                t.seed.to_string(),
                r.k.to_string(),
                r.t_k.to_string(),
                r.pg_calls.to_string(),
                r.dist.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunTrace {
        let mut t = RunTrace::new("gd", 9, vec![("step".into(), 0.5)]);
        for k in 0..3 {
            t.rows.push(TraceRow {
                k,
                t_k: k as f64,
                grad_calls: k as u64,
                time_s: 0.0,
                f_gap: 1.0 / (k as f64 + 3.0),
                dist: 0.1 * k as f64,
            });
        }
        t
    }

    #[test]
    fn header_is_exact() {
        let mut buf = Vec::new();
        RunTrace::new("gd", 0, vec![]).write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "algo,seed,k,T_k,grad_calls,time_s,f_gap,dist\n"
        );
        let mut buf = Vec::new();
        RecoveryTrace::default().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "algo,seed,k,T_k,pg_calls,dist\n");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = sample();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = read_run_traces(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].rows, t.rows);
    }

    #[test]
    fn first_hit_finds_threshold() {
        let t = RecoveryTrace {
            algo: "glmtron".into(),
            seed: 0,
            link_alpha: 0.5,
            rows: (0..5)
                .map(|k| RecoveryRow {
                    k,
                    t_k: k as f64,
                    pg_calls: k as u64,
                    dist: 10f64.powi(-(k as i32)),
                })
                .collect(),
        };
        assert_eq!(t.first_hit(1e-3), Some(3));
        assert_eq!(t.first_hit(1e-9), None);
    }
}
