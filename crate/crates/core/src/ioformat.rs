//! JSON files for problems, plans and regularization paths.
//!
//! Every file carries `format_version`; files written by a newer version are
//! rejected. Floats are written in shortest round-trip form, so save/load is
//! bit-exact. An unbounded last segment stores `"inf"` as its upper end.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, UotError};
use crate::path::{MultiplierCoefficients, PathKind, PathSegment, RegularizationPath};
use crate::problem::{CostMatrix, FlatIndex, Histogram, Problem, TransportPlan};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    SqEuclidean,
    Euclidean,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::SqEuclidean => "sqeuclidean",
            Metric::Euclidean => "euclidean",
        })
    }
}

/// `C_ij = ‖x_i − y_j‖²` or `‖x_i − y_j‖`.
pub fn cost_from_points(x: &[Vec<f64>], y: &[Vec<f64>], metric: Metric) -> Result<CostMatrix> {
    let dim = x.first().or(y.first()).map_or(0, Vec::len);
    for (name, cloud) in [("X", x), ("Y", y)] {
        if let Some(k) = cloud.iter().position(|p| p.len() != dim) {
            return Err(UotError::validation(
                name,
                Some(k),
                format!("point has dimension {}, expected {dim}", cloud[k].len()),
            ));
        }
        for (k, p) in cloud.iter().enumerate() {
            if p.iter().any(|v| !v.is_finite()) {
                return Err(UotError::validation(name, Some(k), "non-finite coordinate"));
            }
        }
    }
    let mut data = Vec::with_capacity(x.len() * y.len());
    for xi in x {
        for yj in y {
            let sq: f64 = xi.iter().zip(yj).map(|(u, v)| (u - v) * (u - v)).sum();
            data.push(match metric {
                Metric::SqEuclidean => sq,
                Metric::Euclidean => sq.sqrt(),
            });
        }
    }
    CostMatrix::new(x.len(), y.len(), data)
}

/// On-disk problem: explicit costs `C`, or point clouds `X`, `Y` with a metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub format_version: u32,
    pub n: usize,
    pub m: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<Vec<Vec<f64>>>,
    #[serde(rename = "X", default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Y", default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    /// Indices of target points generated as outliers, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outliers: Option<Vec<usize>>,
}

impl ProblemFile {
    pub fn from_problem(problem: &Problem) -> Self {
        ProblemFile {
            format_version: FORMAT_VERSION,
            n: problem.n(),
            m: problem.m(),
            a: problem.a.as_slice().to_vec(),
            b: problem.b.as_slice().to_vec(),
            cost: Some(problem.cost.as_slice().chunks(problem.m()).map(<[f64]>::to_vec).collect()),
            x: None,
            y: None,
            metric: None,
            outliers: None,
        }
    }

    pub fn from_points(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, metric: Metric, a: Vec<f64>, b: Vec<f64>) -> Self {
        ProblemFile {
            format_version: FORMAT_VERSION,
            n: x.len(),
            m: y.len(),
            a,
            b,
            cost: None,
            x: Some(x),
            y: Some(y),
            metric: Some(metric),
            outliers: None,
        }
    }

    pub fn to_problem(&self) -> Result<Problem> {
        check_version(self.format_version)?;
        let cost = match (&self.cost, &self.x, &self.y) {
            (Some(rows), None, None) => {
                if self.metric.is_some() {
                    return Err(UotError::validation("metric", None, "only allowed together with X and Y"));
                }
                check_len("C", self.n, rows.len())?;
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != self.m {
                        return Err(UotError::validation(
                            "C",
                            Some(i),
                            format!("row has {} entries, expected m = {}", row.len(), self.m),
                        ));
                    }
                }
                CostMatrix::from_rows(rows)?
            }
            (None, Some(x), Some(y)) => {
                check_len("X", self.n, x.len())?;
                check_len("Y", self.m, y.len())?;
                cost_from_points(x, y, self.metric.unwrap_or_default())?
            }
            _ => {
                return Err(UotError::validation(
                    "C",
                    None,
                    "give either C or both X and Y (with an optional metric)",
                ))
            }
        };
        check_len("a", self.n, self.a.len())?;
        check_len("b", self.m, self.b.len())?;
        Problem::new(
            cost,
            Histogram::named("a", self.a.clone())?,
            Histogram::named("b", self.b.clone())?,
        )
    }
}

fn check_len(field: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(UotError::validation(
            field,
            None,
            format!("has {got} entries, header says {expected}"),
        ));
    }
    Ok(())
}

fn check_version(found: u32) -> Result<()> {
    if found != FORMAT_VERSION {
        return Err(UotError::FormatVersion {
            found,
            supported: FORMAT_VERSION,
        });
    }
    Ok(())
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| UotError::Parse(format!("{what}: {e}")))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| UotError::Parse(e.to_string()))?;
    text.push('\n');
    let mut file = fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

pub fn parse_problem(text: &str) -> Result<Problem> {
    parse::<ProblemFile>(text, "problem file")?.to_problem()
}

pub fn load_problem_file(path: impl AsRef<Path>) -> Result<ProblemFile> {
    parse(&fs::read_to_string(path)?, "problem file")
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<Problem> {
    load_problem_file(path)?.to_problem()
}

pub fn save_problem(path: impl AsRef<Path>, problem: &Problem) -> Result<()> {
    write_json(path.as_ref(), &ProblemFile::from_problem(problem))
}

pub fn save_problem_file(path: impl AsRef<Path>, file: &ProblemFile) -> Result<()> {
    write_json(path.as_ref(), file)
}

/// SHA-256 over the dimensions and the little-endian bits of `a`, `b`, `C`.
pub fn problem_hash(problem: &Problem) -> String {
    let mut hasher = Sha256::new();
    hasher.update((problem.n() as u64).to_le_bytes());
    hasher.update((problem.m() as u64).to_le_bytes());
    for v in problem.a.as_slice().iter().chain(problem.b.as_slice()).chain(problem.cost.as_slice()) {
        hasher.update(v.to_bits().to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub format_version: u32,
    pub n: usize,
    pub m: usize,
    pub plan: Vec<Vec<f64>>,
}

pub fn save_plan(path: impl AsRef<Path>, plan: &TransportPlan) -> Result<()> {
    let file = PlanFile {
        format_version: FORMAT_VERSION,
        n: plan.rows(),
        m: plan.cols(),
        plan: plan.to_rows(),
    };
    write_json(path.as_ref(), &file)
}

pub fn parse_plan(text: &str) -> Result<TransportPlan> {
    let file: PlanFile = parse(text, "plan file")?;
    check_version(file.format_version)?;
    check_len("plan", file.n, file.plan.len())?;
    if let Some(i) = file.plan.iter().position(|r| r.len() != file.m) {
        return Err(UotError::validation("plan", Some(i), format!("row length differs from m = {}", file.m)));
    }
    TransportPlan::from_rows(&file.plan)
}

pub fn load_plan(path: impl AsRef<Path>) -> Result<TransportPlan> {
    parse_plan(&fs::read_to_string(path)?)
}

/// Upper end of a segment: a number or the token `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Upper {
    Finite(f64),
    Token(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentRecord {
    lambda_lo: f64,
    lambda_hi: Upper,
    active: Vec<[usize; 2]>,
    m_tilde: Vec<f64>,
    c_tilde: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    multipliers_m_tilde: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    multipliers_c_tilde: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathFile {
    format_version: u32,
    kind: String,
    problem_hash: String,
    n: usize,
    m: usize,
    complete: bool,
    terminal_balanced: bool,
    coincident_events: usize,
    segments: Vec<SegmentRecord>,
}

/// A path read back from disk with the hash of the problem it was computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportedPath {
    pub path: RegularizationPath,
    pub problem_hash: String,
}

impl ImportedPath {
    /// Errors when `problem` is not the one the path was computed for.
    pub fn check_problem(&self, problem: &Problem) -> Result<()> {
        let hash = problem_hash(problem);
        if hash != self.problem_hash {
            return Err(UotError::Precondition(format!(
                "path was computed for problem {}, got {hash}",
                self.problem_hash
            )));
        }
        Ok(())
    }
}

pub fn path_to_string(path: &RegularizationPath, problem: &Problem) -> Result<String> {
    let segments = path
        .segments
        .iter()
        .map(|s| SegmentRecord {
            lambda_lo: s.lambda_lo,
            lambda_hi: s.lambda_hi.map_or_else(|| Upper::Token("inf".into()), Upper::Finite),
            active: s.active.iter().map(|q| [q.i, q.j]).collect(),
            m_tilde: s.m_tilde.clone(),
            c_tilde: s.c_tilde.clone(),
            multipliers_m_tilde: s.multipliers.as_ref().map(|mc| mc.m_tilde.clone()),
            multipliers_c_tilde: s.multipliers.as_ref().map(|mc| mc.c_tilde.clone()),
        })
        .collect();
    let file = PathFile {
        format_version: FORMAT_VERSION,
        kind: path.kind.as_str().into(),
        problem_hash: problem_hash(problem),
        n: path.n,
        m: path.m,
        complete: path.complete,
        terminal_balanced: path.terminal_balanced,
        coincident_events: path.coincident_events,
        segments,
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| UotError::Parse(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn export_path(file: impl AsRef<Path>, path: &RegularizationPath, problem: &Problem) -> Result<()> {
    fs::write(file, path_to_string(path, problem)?)?;
    Ok(())
}

pub fn parse_path(text: &str) -> Result<ImportedPath> {
    let file: PathFile = parse(text, "path file")?;
    check_version(file.format_version)?;
    let kind = match file.kind.as_str() {
        "full" => PathKind::Full,
        "semi-relaxed" => PathKind::SemiRelaxed,
        other => return Err(UotError::validation("kind", None, format!("unknown path kind `{other}`"))),
    };
    let (n, m) = (file.n, file.m);
    let mut segments = Vec::with_capacity(file.segments.len());
    for (k, rec) in file.segments.into_iter().enumerate() {
        let field = format!("segments[{k}]");
        let lambda_hi = match rec.lambda_hi {
            Upper::Finite(v) => Some(v),
            Upper::Token(t) if t == "inf" => None,
            Upper::Token(t) => {
                return Err(UotError::validation(format!("{field}.lambda_hi"), None, format!("expected a number or \"inf\", got \"{t}\"")))
            }
        };
        if !(rec.lambda_lo >= 0.0) || lambda_hi.is_some_and(|h| !(h > rec.lambda_lo) || !h.is_finite()) {
            return Err(UotError::validation(field, None, "segment bounds are not increasing"));
        }
        let k_len = rec.active.len();
        if rec.m_tilde.len() != k_len || rec.c_tilde.len() != k_len {
            return Err(UotError::validation(field, None, "coefficient lengths differ from the active set size"));
        }
        let mut active = Vec::with_capacity(k_len);
        for (p, [i, j]) in rec.active.into_iter().enumerate() {
            if i >= n || j >= m {
                return Err(UotError::validation(format!("{field}.active"), Some(p), format!("index ({i}, {j}) outside {n}x{m}")));
            }
            active.push(FlatIndex::new(i, j, m));
        }
        let multipliers = match (rec.multipliers_m_tilde, rec.multipliers_c_tilde) {
            (Some(m_tilde), Some(c_tilde)) if m_tilde.len() == m && c_tilde.len() == m => {
                Some(MultiplierCoefficients { m_tilde, c_tilde })
            }
            (None, None) => None,
            _ => return Err(UotError::validation(field, None, "multiplier coefficients must both be present with length m")),
        };
        let values = rec.m_tilde.iter().chain(&rec.c_tilde).chain(multipliers.iter().flat_map(|mc| mc.m_tilde.iter().chain(&mc.c_tilde)));
        if values.clone().any(|v| !v.is_finite()) {
            return Err(UotError::validation(field, None, "non-finite coefficient"));
        }
        segments.push(PathSegment {
            lambda_lo: rec.lambda_lo,
            lambda_hi,
            active,
            m_tilde: rec.m_tilde,
            c_tilde: rec.c_tilde,
            multipliers,
        });
    }
    if segments.windows(2).any(|w| w[0].lambda_hi != Some(w[1].lambda_lo)) {
        return Err(UotError::validation("segments", None, "consecutive segments do not share their breakpoint"));
    }
    Ok(ImportedPath {
        path: RegularizationPath {
            kind,
            n,
            m,
            segments,
            terminal_balanced: file.terminal_balanced,
            complete: file.complete,
            coincident_events: file.coincident_events,
        },
        problem_hash: file.problem_hash,
    })
}

pub fn import_path(file: impl AsRef<Path>) -> Result<ImportedPath> {
    parse_path(&fs::read_to_string(file)?)
}

/// Writes one row per breakpoint: `lambda,active_size,objective`. The
/// semi-relaxed start at λ = 0 has no finite objective and is left out.
pub fn write_breakpoints_csv<W: Write>(out: W, path: &RegularizationPath, problem: &Problem) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| UotError::Parse(format!("csv: {e}"));
    writer.write_record(["lambda", "active_size", "objective"]).map_err(csv_err)?;
    for seg in path.segments.iter().filter(|s| s.lambda_lo > 0.0) {
        let objective = path.objective_at(problem, seg.lambda_lo)?;
        writer
            .write_record([seg.lambda_lo.to_string(), seg.active.len().to_string(), objective.to_string()])
            .map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}
