//! Front comparison, hypervolume and front export.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::ArchivedSolution;
use crate::nsga2::pareto_dominates;

/// One member of a non-dominated front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub cost: f64,
    pub resilience: f64,
    /// Option index per pipe; may be empty when only objectives are known.
    pub indices: Vec<usize>,
}

impl FrontPoint {
    pub fn new(cost: f64, resilience: f64) -> Self {
        Self {
            cost,
            resilience,
            indices: Vec::new(),
        }
    }

    pub fn objectives(&self) -> [f64; 2] {
        [self.cost, self.resilience]
    }
}

impl From<&ArchivedSolution> for FrontPoint {
    fn from(s: &ArchivedSolution) -> Self {
        Self {
            cost: s.eval.cost,
            resilience: s.eval.resilience,
            indices: s.indices.clone(),
        }
    }
}

pub fn front_from_solutions(solutions: &[ArchivedSolution]) -> Vec<FrontPoint> {
    solutions.iter().map(FrontPoint::from).collect()
}

/// Default relative tolerance for objective equality.
pub const DEFAULT_MATCH_TOLERANCE: f64 = 1e-9;

/// `|x − y| ≤ tol · max(|x|, |y|)`.
pub fn approx_eq(x: f64, y: f64, tol: f64) -> bool {
    x == y || (x - y).abs() <= tol * x.abs().max(y.abs())
}

pub fn objectives_approx_eq(a: [f64; 2], b: [f64; 2], tol: f64) -> bool {
    approx_eq(a[0], b[0], tol) && approx_eq(a[1], b[1], tol)
}

/// How two fronts' members are judged to be the same solution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Equal objective vectors within the relative tolerance.
    #[default]
    Objective,
    /// Identical option-index vectors.
    Decision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub tol: f64,
    pub match_mode: MatchMode,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_MATCH_TOLERANCE,
            match_mode: MatchMode::Objective,
        }
    }
}

/// Counts from comparing two non-dominated sets.
///
/// A member is rejected when some member of the other set strictly
/// dominates it; accepted members are split into those also present in the
/// other accepted set (common) and the rest (unique).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n1_total: usize,
    pub n1_accepted: usize,
    pub n1_rejected: usize,
    pub n1_unique: usize,
    pub n2_total: usize,
    pub n2_accepted: usize,
    pub n2_rejected: usize,
    pub n2_unique: usize,
    pub n_common: usize,
    pub fe1: Option<u64>,
    pub fe2: Option<u64>,
}

impl ComparisonReport {
    /// Checks the bookkeeping identities of both sides.
    pub fn check_identities(&self) -> Result<(), String> {
        let sides = [
            (1, self.n1_total, self.n1_accepted, self.n1_rejected, self.n1_unique),
            (2, self.n2_total, self.n2_accepted, self.n2_rejected, self.n2_unique),
        ];
        for (side, total, accepted, rejected, unique) in sides {
            if total != accepted + rejected {
                return Err(format!("side {side}: total {total} != accepted {accepted} + rejected {rejected}"));
            }
            if accepted != self.n_common + unique {
                return Err(format!(
                    "side {side}: accepted {accepted} != common {} + unique {unique}",
                    self.n_common
                ));
            }
        }
        Ok(())
    }

    /// The same comparison seen from the other side.
    pub fn swapped(&self) -> Self {
        Self {
            n1_total: self.n2_total,
            n1_accepted: self.n2_accepted,
            n1_rejected: self.n2_rejected,
            n1_unique: self.n2_unique,
            n2_total: self.n1_total,
            n2_accepted: self.n1_accepted,
            n2_rejected: self.n1_rejected,
            n2_unique: self.n1_unique,
            n_common: self.n_common,
            fe1: self.fe2,
            fe2: self.fe1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("front {side} is not a non-dominated set: member {index} {reason} member {other}")]
    InputNotAFront {
        side: u8,
        /// Zero-based position of the offending member.
        index: usize,
        other: usize,
        reason: &'static str,
    },
    #[error("front {side} member {index} has a non-finite objective")]
    NonFinite { side: u8, index: usize },
    #[error("reference point {ref_point:?} is not dominated by front member {index}")]
    RefPointInvalid { ref_point: [f64; 2], index: usize },
}

/// Checks that `front` is finite, duplicate-free and mutually
/// non-dominated. `side` only labels the error.
pub fn validate_front(front: &[FrontPoint], tol: f64, side: u8) -> Result<(), MetricsError> {
    for (i, p) in front.iter().enumerate() {
        if !(p.cost.is_finite() && p.resilience.is_finite()) {
            return Err(MetricsError::NonFinite { side, index: i });
        }
    }
    for (i, a) in front.iter().enumerate() {
        for (j, b) in front.iter().enumerate().take(i) {
            let (pa, pb) = (a.objectives(), b.objectives());
            let reason = if objectives_approx_eq(pa, pb, tol) {
                "duplicates"
            } else if pareto_dominates(pb, pa) {
                "is dominated by"
            } else if pareto_dominates(pa, pb) {
                "dominates"
            } else {
                continue;
            };
            return Err(MetricsError::InputNotAFront {
                side,
                index: i,
                other: j,
                reason,
            });
        }
    }
    Ok(())
}

fn same_solution(a: &FrontPoint, b: &FrontPoint, opts: &CompareOptions) -> bool {
    match opts.match_mode {
        MatchMode::Objective => objectives_approx_eq(a.objectives(), b.objectives(), opts.tol),
        MatchMode::Decision => a.indices == b.indices,
    }
}

fn rejected_flags(front: &[FrontPoint], other: &[FrontPoint], tol: f64) -> Vec<bool> {
    front
        .iter()
        .map(|a| {
            other.iter().any(|b| {
                pareto_dominates(b.objectives(), a.objectives())
                    && !objectives_approx_eq(a.objectives(), b.objectives(), tol)
            })
        })
        .collect()
}

/// Compares two fronts. Common members are paired one-to-one, greedily in
/// input order, so `n_common` is the same from either side.
pub fn compare_fronts(
    pf1: &[FrontPoint],
    pf2: &[FrontPoint],
    opts: &CompareOptions,
) -> Result<ComparisonReport, MetricsError> {
    validate_front(pf1, opts.tol, 1)?;
    validate_front(pf2, opts.tol, 2)?;
    let rejected1 = rejected_flags(pf1, pf2, opts.tol);
    let rejected2 = rejected_flags(pf2, pf1, opts.tol);
    let accepted1: Vec<&FrontPoint> = pf1.iter().zip(&rejected1).filter(|(_, &r)| !r).map(|(p, _)| p).collect();
    let accepted2: Vec<&FrontPoint> = pf2.iter().zip(&rejected2).filter(|(_, &r)| !r).map(|(p, _)| p).collect();

    let mut taken = vec![false; accepted2.len()];
    let mut n_common = 0;
    for a in &accepted1 {
        if let Some(k) = (0..accepted2.len()).find(|&k| !taken[k] && same_solution(a, accepted2[k], opts)) {
            taken[k] = true;
            n_common += 1;
        }
    }

    let report = ComparisonReport {
        n1_total: pf1.len(),
        n1_accepted: accepted1.len(),
        n1_rejected: pf1.len() - accepted1.len(),
        n1_unique: accepted1.len() - n_common,
        n2_total: pf2.len(),
        n2_accepted: accepted2.len(),
        n2_rejected: pf2.len() - accepted2.len(),
        n2_unique: accepted2.len() - n_common,
        n_common,
        fe1: None,
        fe2: None,
    };
    debug_assert!(report.check_identities().is_ok());
    Ok(report)
}

/// Exact area dominated by `front` (cost minimised, resilience maximised)
/// and bounded by `ref_point = (cost_ref, resilience_ref)`.
pub fn hypervolume_2d(front: &[[f64; 2]], ref_point: [f64; 2]) -> Result<f64, MetricsError> {
    for (index, p) in front.iter().enumerate() {
        if !(p[0] <= ref_point[0] && p[1] >= ref_point[1]) {
            return Err(MetricsError::RefPointInvalid { ref_point, index });
        }
    }
    let mut sorted = front.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(b[1].total_cmp(&a[1])));
    let mut area = 0.0;
    let mut best = ref_point[1];
    for (k, p) in sorted.iter().enumerate() {
        best = best.max(p[1]);
        let next_cost = sorted.get(k + 1).map_or(ref_point[0], |q| q[0]);
        area += (next_cost - p[0]) * (best - ref_point[1]);
    }
    Ok(area)
}

#[derive(Debug, Error)]
pub enum FrontIoError {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot export an empty front")]
    EmptyFront,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Svg,
}

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

/// Front CSV: header `cost,resilience,idx_1,...,idx_N`, one row per member.
pub fn front_to_csv(front: &[FrontPoint]) -> String {
    let n = front.iter().map(|p| p.indices.len()).max().unwrap_or(0);
    let mut out = String::from("cost,resilience");
    for k in 1..=n {
        write!(out, ",idx_{k}").unwrap();
    }
    out.push('\n');
    for p in front {
        out.push_str(&fmt_full(p.cost));
        out.push(',');
        out.push_str(&fmt_full(p.resilience));
        for i in &p.indices {
            write!(out, ",{i}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses a front CSV. Error line numbers count the header as line 1.
pub fn front_from_csv(text: &str) -> Result<Vec<FrontPoint>, FrontIoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| FrontIoError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let ok_header = header.len() >= 2
        && &header[0] == "cost"
        && &header[1] == "resilience"
        && header.iter().skip(2).enumerate().all(|(k, h)| h == format!("idx_{}", k + 1));
    if !ok_header {
        return Err(FrontIoError::Malformed {
            line: 1,
            message: "expected header cost,resilience,idx_1,...".into(),
        });
    }
    let mut front = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| FrontIoError::Malformed {
            line,
            message: e.to_string(),
        })?;
        let bad = |message: String| FrontIoError::Malformed { line, message };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("not a number: {s:?}")));
        let cost = num(&record[0])?;
        let resilience = num(&record[1])?;
        let indices = record
            .iter()
            .skip(2)
            .map(|s| s.parse::<usize>().map_err(|_| bad(format!("not an option index: {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        front.push(FrontPoint {
            cost,
            resilience,
            indices,
        });
    }
    Ok(front)
}

/// Scatter plot of the front, cost on x and resilience on y.
pub fn front_to_svg(front: &[FrontPoint]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const M: f64 = 60.0;
    let range = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        }
    };
    let (x0, x1) = range(&mut front.iter().map(|p| p.cost));
    let (y0, y1) = range(&mut front.iter().map(|p| p.resilience));
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<line x1="{M}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - M, W - M, H - M).unwrap();
    writeln!(s, r#"<line x1="{M}" y1="{M}" x2="{M}" y2="{}" stroke="black"/>"#, H - M).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">Cost</text>"#, W / 2.0, H - 15.0).unwrap();
    writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 15 {})">Network resilience</text>"#,
        H / 2.0,
        H / 2.0
    )
    .unwrap();
    for (v, x) in [(x0, sx(x0)), (x1, sx(x1))] {
        writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle" font-size="10">{v:.4e}</text>"#, H - M + 15.0).unwrap();
    }
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
        writeln!(s, r#"<text x="{}" y="{y:.2}" text-anchor="end" font-size="10">{v:.4}</text>"#, M - 5.0).unwrap();
    }
    for p in front {
        writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="steelblue"/>"#,
            sx(p.cost),
            sy(p.resilience)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), FrontIoError> {
    let io_err = |source| FrontIoError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn export_front(front: &[FrontPoint], format: ExportFormat, path: &Path) -> Result<(), FrontIoError> {
    if front.is_empty() {
        return Err(FrontIoError::EmptyFront);
    }
    let text = match format {
        ExportFormat::Csv => front_to_csv(front),
        ExportFormat::Svg => front_to_svg(front),
    };
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<FrontPoint> {
        v.iter().map(|&(c, r)| FrontPoint::new(c, r)).collect()
    }

    #[test]
    fn identical_fronts_are_all_common() {
        let pf = pts(&[(1.0, 0.1), (2.0, 0.2), (3.0, 0.3)]);
        let r = compare_fronts(&pf, &pf, &CompareOptions::default()).unwrap();
        assert_eq!(r.n_common, 3);
        assert_eq!((r.n1_rejected, r.n1_unique, r.n2_rejected, r.n2_unique), (0, 0, 0, 0));
    }

    #[test]
    fn single_domination() {
        let r = compare_fronts(&pts(&[(1.0, 1.0)]), &pts(&[(0.5, 2.0)]), &CompareOptions::default()).unwrap();
        assert_eq!((r.n1_total, r.n1_accepted, r.n1_rejected, r.n1_unique), (1, 0, 1, 0));
        assert_eq!((r.n2_total, r.n2_accepted, r.n2_rejected, r.n2_unique), (1, 1, 0, 1));
        assert_eq!(r.n_common, 0);
    }

    #[test]
    fn dominated_input_is_rejected() {
        let bad = pts(&[(1.0, 1.0), (2.0, 0.5)]);
        let err = compare_fronts(&bad, &pts(&[(1.0, 1.0)]), &CompareOptions::default()).unwrap_err();
        assert!(matches!(err, MetricsError::InputNotAFront { side: 1, index: 1, .. }));
    }

    #[test]
    fn round_off_still_matches() {
        let a = pts(&[(1000.0, 0.3)]);
        let b = pts(&[(1000.0 * (1.0 + 1e-12), 0.3)]);
        assert_eq!(compare_fronts(&a, &b, &CompareOptions::default()).unwrap().n_common, 1);
    }

    #[test]
    fn hypervolume_single_rectangle() {
        assert_eq!(hypervolume_2d(&[[1.0, 1.0]], [2.0, 0.0]).unwrap(), 1.0);
        assert!(hypervolume_2d(&[[3.0, 1.0]], [2.0, 0.0]).is_err());
    }

    #[test]
    fn hypervolume_ignores_dominated_points() {
        let front = [[1.0, 0.2], [2.0, 0.5], [3.0, 0.9]];
        let base = hypervolume_2d(&front, [4.0, 0.0]).unwrap();
        let with_dominated = hypervolume_2d(&[front[0], front[1], front[2], [2.5, 0.4]], [4.0, 0.0]).unwrap();
        assert_eq!(base, with_dominated);
        // 3·0.2 + 2·0.3 + 1·0.4
        assert!((base - 1.6).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let front = vec![
            FrontPoint {
                cost: 1.0 / 3.0,
                resilience: 0.123_456_789_012_345_67,
                indices: vec![0, 3, 2],
            },
            FrontPoint {
                cost: 6.02e23,
                resilience: -1e-300,
                indices: vec![1, 1, 1],
            },
        ];
        let text = front_to_csv(&front);
        assert!(text.starts_with("cost,resilience,idx_1,idx_2,idx_3\n"));
        assert_eq!(front_from_csv(&text).unwrap(), front);
    }

    #[test]
    fn csv_reports_bad_line() {
        let err = front_from_csv("cost,resilience\n1,0.5\nx,0.2\n").unwrap_err();
        assert!(matches!(err, FrontIoError::Malformed { line: 3, .. }));
    }

    #[test]
    fn svg_has_one_marker_per_point() {
        let svg = front_to_svg(&pts(&[(1.0, 0.1), (2.0, 0.2), (3.0, 0.3)]));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains(">Cost<") && svg.contains(">Network resilience<"));
    }
}
