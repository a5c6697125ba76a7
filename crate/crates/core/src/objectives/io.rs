//! Problem files: `<stem>.csv` with header `j,x_1..x_d,y` and a `<stem>.json`
//! sidecar `{n, d, link, alpha, seed, w_star}`.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{GlmProblem, LinkFunction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub n: usize,
    pub d: usize,
    pub link: String,
    /// Leaky slope, or the user-supplied increase constant for logistic.
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub w_star: Vec<f64>,
}

impl ProblemMeta {
    pub fn describe(problem: &GlmProblem, seed: Option<u64>) -> Self {
        let link = problem.link;
        let alpha = link.shape_alpha().or_else(|| {
            let a = link.increase_alpha();
            (a > 0.0 && link.name() == "logistic").then_some(a)
        });
        Self {
            n: problem.n(),
            d: problem.d(),
            link: link.name().to_string(),
            alpha,
            seed,
            w_star: problem.w_star.iter().copied().collect(),
        }
    }

    pub fn link_function(&self) -> Result<LinkFunction> {
        let link = LinkFunction::parse(&self.link, self.alpha)?;
        match (self.link.as_str(), self.alpha) {
            ("logistic", Some(a)) => link.with_increase_alpha(a),
            _ => Ok(link),
        }
    }
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `problem` to `csv_path` and its sidecar next to it. Returns the
/// sidecar path.
pub fn write_problem(problem: &GlmProblem, seed: Option<u64>, csv_path: &Path) -> Result<PathBuf> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(csv_path)?));
    let d = problem.d();
    let mut header = Vec::with_capacity(d + 2);
    header.push("j".to_string());
    header.extend((1..=d).map(|i| format!("x_{i}")));
    header.push("y".to_string());
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(d + 2);
    for i in 0..problem.n() {
        rec.clear();
        rec.push(i.to_string());
        rec.extend(problem.x.row(i).iter().map(|v| v.to_string()));
        rec.push(problem.y[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;

    let meta = ProblemMeta::describe(problem, seed);
    let side = sidecar_path(csv_path);
    serde_json::to_writer_pretty(BufWriter::new(File::create(&side)?), &meta)?;
    Ok(side)
}

/// Reads a problem written by [`write_problem`].
pub fn read_problem(csv_path: &Path) -> Result<(GlmProblem, ProblemMeta)> {
    let malformed = |reason: String| Error::MalformedProblem {
        path: csv_path.to_path_buf(),
        reason,
    };
    let meta: ProblemMeta = serde_json::from_reader(BufReader::new(File::open(sidecar_path(csv_path))?))?;
    let link = meta.link_function()?;
    if meta.w_star.len() != meta.d {
        return Err(malformed(format!("w_star has {} entries, d = {}", meta.w_star.len(), meta.d)));
    }

    let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(csv_path)?));
    let headers = rdr.headers()?.clone();
    if headers.len() != meta.d + 2 || &headers[0] != "j" || &headers[meta.d + 1] != "y" {
        return Err(malformed(format!("unexpected header for d = {}", meta.d)));
    }
    let mut x = DMatrix::zeros(meta.n, meta.d);
    let mut y = DVector::zeros(meta.n);
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if i >= meta.n {
            return Err(malformed(format!("more than n = {} rows", meta.n)));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| malformed(format!("row {i}: `{s}`: {e}")))
        };
        for j in 0..meta.d {
            x[(i, j)] = parse(&rec[j + 1])?;
        }
        y[i] = parse(&rec[meta.d + 1])?;
        rows += 1;
    }
    if rows != meta.n {
        return Err(malformed(format!("expected {} rows, found {rows}", meta.n)));
    }
    let problem = GlmProblem {
        x,
        y,
        w_star: DVector::from_vec(meta.w_star.clone()),
        link,
    };
    Ok((problem, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_clock::SeededRng;
    use crate::objectives::generate_problem;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for link in [LinkFunction::leaky_relu(0.1).unwrap(), LinkFunction::logistic().with_increase_alpha(0.05).unwrap()] {
            let p = generate_problem(&mut SeededRng::new(11, 2), 30, 4, link).unwrap();
            let path = dir.path().join("prob.csv");
            write_problem(&p, Some(11), &path).unwrap();
            let (back, meta) = read_problem(&path).unwrap();
            assert_eq!(back, p);
            assert_eq!(meta.seed, Some(11));
        }
    }

    #[test]
    fn header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = generate_problem(&mut SeededRng::new(1, 1), 2, 3, LinkFunction::identity()).unwrap();
        let path = dir.path().join("p.csv");
        write_problem(&p, None, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "j,x_1,x_2,x_3,y");
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = generate_problem(&mut SeededRng::new(1, 1), 5, 2, LinkFunction::identity()).unwrap();
        let path = dir.path().join("p.csv");
        write_problem(&p, None, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let cut: Vec<&str> = text.lines().take(4).collect();
        std::fs::write(&path, cut.join("\n") + "\n").unwrap();
        assert!(matches!(read_problem(&path), Err(Error::MalformedProblem { .. })));
    }
}
