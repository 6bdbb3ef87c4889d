//! On-disk formats: measure files, result files and small CSV helpers.
//!
//! A measure file is a `#` header line `# srw-measure v1 d=<d>` followed by
//! one CSV row per atom, `weight,x_1,…,x_d`. Weights need not sum to one;
//! they are normalised on load.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use srw_core::{DiscreteMeasure, SrwResult, TransportPlan};

use crate::error::{CliError, Result};

pub const MEASURE_MAGIC: &str = "srw-measure";
pub const MEASURE_VERSION: &str = "v1";

/// Plan entries at or below this mass are dropped from sparse output.
pub const PLAN_THRESHOLD: f64 = 1e-12;

/// Locale-independent rendering with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_owned(), source })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_owned(), source })?;
    }
    fs::write(path, bytes).map_err(|source| CliError::Write { path: path.to_owned(), source })
}

pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    let text = read_text(path)?;
    parse_measure(&text).map_err(|message| CliError::Parse { path: path.to_owned(), message })
}

pub fn write_measure(path: &Path, measure: &DiscreteMeasure) -> Result<()> {
    write_bytes(path, format_measure(measure).as_bytes())
}

fn parse_header(line: &str) -> std::result::Result<usize, String> {
    let mut tokens = line.trim_start_matches('#').split_whitespace();
    if tokens.next() != Some(MEASURE_MAGIC) {
        return Err(format!("expected header `# {MEASURE_MAGIC} {MEASURE_VERSION} d=<d>`"));
    }
    match tokens.next() {
        Some(MEASURE_VERSION) => {}
        Some(v) => return Err(format!("unsupported measure file version {v}")),
        None => return Err("header is missing the version".into()),
    }
    let d = tokens
        .find_map(|t| t.strip_prefix("d="))
        .ok_or_else(|| String::from("header is missing d=<d>"))?;
    match d.parse::<usize>() {
        Ok(d) if d > 0 => Ok(d),
        _ => Err(format!("invalid dimension `{d}`")),
    }
}

/// Parses the text of a measure file.
pub fn parse_measure(text: &str) -> std::result::Result<DiscreteMeasure, String> {
    let (header, body) = text.split_once('\n').unwrap_or((text, ""));
    let d = parse_header(header.trim())?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(body.as_bytes());
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let line = record.position().map_or(row + 2, |p| p.line() as usize + 1);
        if record.len() != d + 1 {
            return Err(format!("line {line}: expected {} columns, found {}", d + 1, record.len()));
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| format!("line {line}: `{field}` is not a number"))?;
            if !v.is_finite() {
                return Err(format!("line {line}: non-finite value"));
            }
            if col == 0 {
                if v < 0.0 {
                    return Err(format!("line {line}: negative weight"));
                }
                weights.push(v);
            } else {
                points.push(v);
            }
        }
    }
    if weights.is_empty() {
        return Err("measure has no atoms".into());
    }
    DiscreteMeasure::from_unnormalized(d, points, weights).map_err(|e| e.to_string())
}

pub fn format_measure(measure: &DiscreteMeasure) -> String {
    let d = measure.dim();
    let mut out = format!("# {MEASURE_MAGIC} {MEASURE_VERSION} d={d}\n");
    for (i, w) in measure.weights().iter().enumerate() {
        out.push_str(&fmt_f64(*w));
        for x in measure.point(i) {
            out.push(',');
            out.push_str(&fmt_f64(*x));
        }
        out.push('\n');
    }
    out
}

/// Transport plan as stored in a result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "lowercase")]
pub enum PlanRecord {
    /// `(i, j, mass)` for every entry above `threshold`.
    Sparse { rows: usize, cols: usize, threshold: f64, entries: Vec<(usize, usize, f64)> },
    Dense { rows: usize, cols: usize, values: Vec<Vec<f64>> },
}

impl PlanRecord {
    pub fn sparse(plan: &TransportPlan) -> Self {
        PlanRecord::Sparse {
            rows: plan.rows(),
            cols: plan.cols(),
            threshold: PLAN_THRESHOLD,
            entries: plan.nonzeros(PLAN_THRESHOLD).collect(),
        }
    }

    pub fn dense(plan: &TransportPlan) -> Self {
        let values = (0..plan.rows()).map(|i| plan.matrix().row(i).to_vec()).collect();
        PlanRecord::Dense { rows: plan.rows(), cols: plan.cols(), values }
    }
}

/// JSON document written by `srw dist`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub value: f64,
    pub value_squared: f64,
    pub k: usize,
    pub d: usize,
    pub algorithm: String,
    pub gamma: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub relative_gap: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Row-major `d × d`.
    pub omega: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanRecord>,
}

impl ResultFile {
    pub fn from_result(result: &SrwResult, gamma: f64, epsilon: f64) -> Self {
        let omega = result.omega.matrix();
        let d = omega.dim();
        ResultFile {
            value: result.value,
            value_squared: result.value_squared,
            k: result.k,
            d,
            algorithm: result.algorithm.name().to_owned(),
            gamma,
            epsilon,
            iterations: result.iterations,
            relative_gap: result.gap,
            converged: result.converged,
            seed: None,
            omega: omega.as_slice().chunks(d).map(<[f64]>::to_vec).collect(),
            plan: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result files contain only plain data");
        s.push('\n');
        s
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Parse { path: path.to_owned(), message: e.to_string() })
    }
}

/// One CSV row per plan entry above the threshold: source and target indices,
/// mass, then both endpoints.
pub fn format_segments(mu: &DiscreteMeasure, nu: &DiscreteMeasure, plan: &TransportPlan) -> String {
    let d = mu.dim();
    let mut header = vec![String::from("source"), "target".into(), "mass".into()];
    header.extend((1..=d).map(|c| format!("x{c}")));
    header.extend((1..=d).map(|c| format!("y{c}")));
    let mut out = header.join(",");
    out.push('\n');
    for (i, j, w) in plan.nonzeros(PLAN_THRESHOLD) {
        let mut row = vec![i.to_string(), j.to_string(), fmt_f64(w)];
        row.extend(mu.point(i).iter().chain(nu.point(j)).map(|x| fmt_f64(*x)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// `<prefix>_mu.csv` and `<prefix>_nu.csv`.
pub fn pair_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let with = |suffix: &str| {
        let mut name = prefix.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(suffix);
        prefix.with_file_name(name)
    };
    (with("_mu.csv"), with("_nu.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_roundtrip_is_exact() {
        let m = DiscreteMeasure::new(2, vec![0.1, -1.0 / 3.0, 1e-300, 7.0], vec![0.3, 0.7]).unwrap();
        let back = parse_measure(&format_measure(&m)).unwrap();
        assert_eq!(back.points(), m.points());
        assert_eq!(back.weights(), m.weights());
    }

    #[test]
    fn weights_are_normalised() {
        let m = parse_measure("# srw-measure v1 d=1\n1,0\n3,1\n").unwrap();
        assert_eq!(m.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let m = parse_measure("# srw-measure v1 d=2\n# atoms\n1, 2, 3\n\n1,4,5\n").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.point(1), &[4.0, 5.0]);
    }

    #[test]
    fn bad_files_are_rejected() {
        let cases = [
            ("", "header"),
            ("1,2\n", "header"),
            ("# srw-measure v2 d=1\n1,0\n", "version"),
            ("# srw-measure v1\n1,0\n", "d=<d>"),
            ("# srw-measure v1 d=0\n1\n", "dimension"),
            ("# srw-measure v1 d=2\n1,0\n", "columns"),
            ("# srw-measure v1 d=1\n-1,0\n", "negative"),
            ("# srw-measure v1 d=1\n1,nan\n", "non-finite"),
            ("# srw-measure v1 d=1\n1,inf\n", "non-finite"),
            ("# srw-measure v1 d=1\n1,x\n", "not a number"),
            ("# srw-measure v1 d=1\n", "no atoms"),
            ("# srw-measure v1 d=1\n0,1\n", "total weight"),
        ];
        for (text, needle) in cases {
            let err = parse_measure(text).unwrap_err();
            assert!(err.contains(needle), "{text:?}: {err}");
        }
    }

    #[test]
    fn error_line_numbers_count_the_header() {
        let err = parse_measure("# srw-measure v1 d=1\n1,0\n1,0,0\n").unwrap_err();
        assert!(err.starts_with("line 3"), "{err}");
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(2.0), "2.0000000000000000e0");
        let x = 1.0 / 3.0;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn pair_paths_append_suffixes() {
        let (a, b) = pair_paths(Path::new("out/cube"));
        assert_eq!(a, Path::new("out/cube_mu.csv"));
        assert_eq!(b, Path::new("out/cube_nu.csv"));
    }

    #[test]
    fn sparse_plan_drops_tiny_entries() {
        let plan = TransportPlan::independent(&[0.5, 0.5], &[1.0 - 1e-13, 1e-13]);
        match PlanRecord::sparse(&plan) {
            PlanRecord::Sparse { entries, .. } => {
                assert_eq!(entries.len(), 2);
                assert!(entries.iter().all(|e| e.1 == 0));
            }
            PlanRecord::Dense { .. } => unreachable!(),
        }
    }

    #[test]
    fn segments_for_a_dirac_pair() {
        let mu = DiscreteMeasure::dirac(&[0.0, 1.0]).unwrap();
        let nu = DiscreteMeasure::dirac(&[2.0, 3.0]).unwrap();
        let plan = TransportPlan::independent(&[1.0], &[1.0]);
        let text = format_segments(&mu, &nu, &plan);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "source,target,mass,x1,x2,y1,y2");
        assert_eq!(lines.len(), 2);
        let vals: Vec<f64> = lines[1].split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals, [1.0, 0.0, 1.0, 2.0, 3.0]);
    }
}
