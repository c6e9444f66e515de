//! Batch front end: problem files in, machine-readable reports out.
//!
//! A problem file is a single JSON document describing either a descriptor
//! triple or a higher-order model, with optional entry masks, solver
//! settings and precomputed parameter tables for sweeps. Reports are
//! rendered with a fixed field order and 17-significant-digit numbers, so
//! identical inputs produce byte-identical output.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::Error;
use crate::linalg;
use crate::radius::{
    compute_radius_descriptor, compute_radius_higher_order, HigherOrderMask, RadiusResult,
};
use crate::stln::{PartitionChoice, StlnConfig};
use crate::systems::{
    canonical_form, is_c_controllable_pencil, is_c_controllable_toeplitz, DescriptorSystem,
    FailingMode, HigherOrderSystem, PerturbationMask,
};

/// Exit codes shared by the binary and the tests.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const INPUT_ERROR: i32 = 1;
    pub const NO_CONVERGENCE: i32 = 2;
    pub const UNCONTROLLABLE: i32 = 3;
    pub const INCONCLUSIVE: i32 = 4;
}

/// Errors that terminate a command with exit code 1, carrying the
/// diagnostic the user sees.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed problem file {path}: {detail}")]
    Malformed { path: String, detail: String },
    #[error("{0}")]
    Invalid(String),
    #[error("unknown parameter `{name}`; available: {available}")]
    UnknownParameter { name: String, available: String },
    #[error(transparent)]
    Compute(#[from] Error),
}

// ---------------------------------------------------------------------------
// problem files
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DescriptorFile {
    #[serde(rename = "kind")]
    _kind: String,
    n: usize,
    m: usize,
    #[serde(rename = "E")]
    e: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "mask_E")]
    mask_e: Option<Vec<Vec<bool>>>,
    #[serde(rename = "mask_A")]
    mask_a: Option<Vec<Vec<bool>>>,
    #[serde(rename = "mask_B")]
    mask_b: Option<Vec<Vec<bool>>>,
    solver: Option<SolverFile>,
    parameters: Option<std::collections::BTreeMap<String, Vec<DescriptorEntry>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DescriptorEntry {
    value: f64,
    #[serde(rename = "E")]
    e: Option<Vec<Vec<f64>>>,
    #[serde(rename = "A")]
    a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    b: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HigherOrderFile {
    #[serde(rename = "kind")]
    _kind: String,
    degree: usize,
    state_dim: usize,
    input_dim: usize,
    coefficients: Vec<Vec<Vec<f64>>>,
    input: Vec<Vec<f64>>,
    coeff_masks: Option<Vec<Vec<Vec<bool>>>>,
    input_mask: Option<Vec<Vec<bool>>>,
    solver: Option<SolverFile>,
    parameters: Option<std::collections::BTreeMap<String, Vec<HigherOrderEntry>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HigherOrderEntry {
    value: f64,
    coefficients: Option<Vec<Vec<Vec<f64>>>>,
    input: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverFile {
    omega: Option<f64>,
    epsilon: Option<f64>,
    max_iter: Option<usize>,
    partition_col: Option<PartitionFile>,
    multistart: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PartitionFile {
    Index(usize),
    Name(String),
}

enum ProblemFile {
    Descriptor(DescriptorFile),
    HigherOrder(HigherOrderFile),
}

/// Command-line overrides; flags win over file settings, which win over
/// defaults.
#[derive(Debug, Default, Clone)]
pub struct SolverOverrides {
    pub omega: Option<f64>,
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub partition: Option<PartitionChoice>,
    pub multistart: Option<bool>,
}

/// A parsed, validated problem.
#[derive(Debug)]
pub enum Problem {
    Descriptor {
        sys: DescriptorSystem,
        mask: PerturbationMask,
        solver: StlnConfig,
        parameters: ParameterTables,
    },
    HigherOrder {
        sys: HigherOrderSystem,
        mask: Option<HigherOrderMask>,
        solver: StlnConfig,
        parameters: ParameterTables,
    },
}

/// Precomputed sweep tables: parameter name -> list of (value, system).
#[derive(Debug)]
pub struct ParameterTables {
    descriptor: std::collections::BTreeMap<String, Vec<(f64, DescriptorSystem)>>,
    higher_order: std::collections::BTreeMap<String, Vec<(f64, HigherOrderSystem)>>,
}

impl ParameterTables {
    fn empty() -> Self {
        Self {
            descriptor: Default::default(),
            higher_order: Default::default(),
        }
    }

    fn names(&self) -> Vec<String> {
        self.descriptor
            .keys()
            .chain(self.higher_order.keys())
            .cloned()
            .collect()
    }
}

fn matrix(
    rows: &[Vec<f64>],
    name: &str,
    nrows: usize,
    ncols: usize,
) -> Result<DMatrix<f64>, CliError> {
    let m = linalg::matrix_from_rows(rows)
        .map_err(|e| CliError::Invalid(format!("field {name}: {e}")))?;
    if m.shape() != (nrows, ncols) {
        return Err(CliError::Invalid(format!(
            "field {name}: expected shape {nrows}x{ncols}, found {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m)
}

fn bool_matrix(
    rows: &[Vec<bool>],
    name: &str,
    nrows: usize,
    ncols: usize,
) -> Result<DMatrix<bool>, CliError> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Invalid(format!(
            "field {name}: expected shape {nrows}x{ncols}"
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Reads and validates a problem file.
pub fn load_problem(path: &Path, overrides: &SolverOverrides) -> Result<Problem, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Malformed {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
    let kind = value
        .get("kind")
        .and_then(|k| k.as_str())
        .ok_or_else(|| CliError::Malformed {
            path: path.display().to_string(),
            detail: "missing field `kind` (\"descriptor\" or \"higher_order\")".into(),
        })?
        .to_string();
    let file = match kind.as_str() {
        "descriptor" => {
            ProblemFile::Descriptor(serde_path_to_error::deserialize(value).map_err(|e| {
                CliError::Malformed {
                    path: path.display().to_string(),
                    detail: format!("{} (at {})", e.inner(), e.path()),
                }
            })?)
        }
        "higher_order" => {
            ProblemFile::HigherOrder(serde_path_to_error::deserialize(value).map_err(|e| {
                CliError::Malformed {
                    path: path.display().to_string(),
                    detail: format!("{} (at {})", e.inner(), e.path()),
                }
            })?)
        }
        other => {
            return Err(CliError::Malformed {
                path: path.display().to_string(),
                detail: format!(
                    "field kind: expected \"descriptor\" or \"higher_order\", found \"{other}\""
                ),
            })
        }
    };

    match file {
        ProblemFile::Descriptor(d) => {
            let n = d.n;
            let m = d.m;
            let e = matrix(&d.e, "E", n, n)?;
            let a = matrix(&d.a, "A", n, n)?;
            let b = matrix(&d.b, "B", n, m)?;
            let sys = DescriptorSystem::new(e, a, b)?;
            let mask = {
                let me = match &d.mask_e {
                    Some(rows) => bool_matrix(rows, "mask_E", n, n)?,
                    None => DMatrix::from_element(n, n, true),
                };
                let ma = match &d.mask_a {
                    Some(rows) => bool_matrix(rows, "mask_A", n, n)?,
                    None => DMatrix::from_element(n, n, true),
                };
                let mb = match &d.mask_b {
                    Some(rows) => bool_matrix(rows, "mask_B", n, m)?,
                    None => DMatrix::from_element(n, m, true),
                };
                PerturbationMask::new(me, ma, mb).map_err(|err| match err {
                    Error::EmptyMask => CliError::Invalid(
                        "empty perturbation structure: every mask entry is false".into(),
                    ),
                    other => CliError::Compute(other),
                })?
            };
            let solver = merge_solver(d.solver.as_ref(), overrides)?;
            let mut tables = ParameterTables::empty();
            if let Some(params) = &d.parameters {
                for (name, entries) in params {
                    let mut list = Vec::new();
                    for entry in entries {
                        let e2 = match &entry.e {
                            Some(rows) => matrix(rows, "parameters.E", n, n)?,
                            None => sys.e().clone(),
                        };
                        let a2 = match &entry.a {
                            Some(rows) => matrix(rows, "parameters.A", n, n)?,
                            None => sys.a().clone(),
                        };
                        let b2 = match &entry.b {
                            Some(rows) => matrix(rows, "parameters.B", n, m)?,
                            None => sys.b().clone(),
                        };
                        list.push((entry.value, DescriptorSystem::new(e2, a2, b2)?));
                    }
                    tables.descriptor.insert(name.clone(), list);
                }
            }
            Ok(Problem::Descriptor {
                sys,
                mask,
                solver,
                parameters: tables,
            })
        }
        ProblemFile::HigherOrder(h) => {
            let d = h.degree;
            let nn = h.state_dim;
            let mm = h.input_dim;
            if h.coefficients.len() != d + 1 {
                return Err(CliError::Invalid(format!(
                    "field coefficients: expected {} matrices (degree {d} plus constant term), found {}",
                    d + 1,
                    h.coefficients.len()
                )));
            }
            let coeffs = h
                .coefficients
                .iter()
                .enumerate()
                .map(|(i, rows)| matrix(rows, &format!("coefficients[{i}]"), nn, nn))
                .collect::<Result<Vec<_>, _>>()?;
            let input = matrix(&h.input, "input", nn, mm)?;
            let sys = HigherOrderSystem::new(coeffs, input)?;
            let mask = match (&h.coeff_masks, &h.input_mask) {
                (None, None) => None,
                _ => {
                    let cm = match &h.coeff_masks {
                        Some(list) => {
                            if list.len() != d + 1 {
                                return Err(CliError::Invalid(format!(
                                    "field coeff_masks: expected {} matrices, found {}",
                                    d + 1,
                                    list.len()
                                )));
                            }
                            list.iter()
                                .enumerate()
                                .map(|(i, rows)| {
                                    bool_matrix(rows, &format!("coeff_masks[{i}]"), nn, nn)
                                })
                                .collect::<Result<Vec<_>, _>>()?
                        }
                        None => vec![DMatrix::from_element(nn, nn, true); d + 1],
                    };
                    let im = match &h.input_mask {
                        Some(rows) => bool_matrix(rows, "input_mask", nn, mm)?,
                        None => DMatrix::from_element(nn, mm, true),
                    };
                    Some(HigherOrderMask::new(cm, im)?)
                }
            };
            let solver = merge_solver(h.solver.as_ref(), overrides)?;
            let mut tables = ParameterTables::empty();
            if let Some(params) = &h.parameters {
                for (name, entries) in params {
                    let mut list = Vec::new();
                    for entry in entries {
                        let coeffs2 = match &entry.coefficients {
                            Some(raw) => {
                                if raw.len() != d + 1 {
                                    return Err(CliError::Invalid(format!(
                                        "parameters.{name}: expected {} coefficient matrices",
                                        d + 1
                                    )));
                                }
                                raw.iter()
                                    .enumerate()
                                    .map(|(i, rows)| {
                                        matrix(
                                            rows,
                                            &format!("parameters.coefficients[{i}]"),
                                            nn,
                                            nn,
                                        )
                                    })
                                    .collect::<Result<Vec<_>, _>>()?
                            }
                            None => sys.coeffs().to_vec(),
                        };
                        let input2 = match &entry.input {
                            Some(rows) => matrix(rows, "parameters.input", nn, mm)?,
                            None => sys.input().clone(),
                        };
                        list.push((entry.value, HigherOrderSystem::new(coeffs2, input2)?));
                    }
                    tables.higher_order.insert(name.clone(), list);
                }
            }
            Ok(Problem::HigherOrder {
                sys,
                mask,
                solver,
                parameters: tables,
            })
        }
    }
}

fn merge_solver(
    file: Option<&SolverFile>,
    overrides: &SolverOverrides,
) -> Result<StlnConfig, CliError> {
    let defaults = StlnConfig::default();
    let file = file.cloned().unwrap_or_default();
    let file_partition = match file.partition_col {
        None => None,
        Some(PartitionFile::Index(j)) => Some(PartitionChoice::Column(j)),
        Some(PartitionFile::Name(s)) if s == "last" => Some(PartitionChoice::Last),
        Some(PartitionFile::Name(s)) => {
            return Err(CliError::Invalid(format!(
                "field solver.partition_col: expected a column index or \"last\", found \"{s}\""
            )));
        }
    };
    let cfg = StlnConfig {
        omega: overrides.omega.or(file.omega).unwrap_or(defaults.omega),
        epsilon: overrides
            .epsilon
            .or(file.epsilon)
            .unwrap_or(defaults.epsilon),
        max_iter: overrides
            .max_iter
            .or(file.max_iter)
            .unwrap_or(defaults.max_iter),
        partition: overrides
            .partition
            .or(file_partition)
            .unwrap_or(defaults.partition),
        // an explicit --partition-col asks for that single column, so it
        // switches a file-level multistart off unless --multistart is also
        // passed
        multistart: overrides
            .multistart
            .or(if overrides.partition.is_some() {
                Some(false)
            } else {
                file.multistart
            })
            .unwrap_or(defaults.multistart),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Parses a `--partition-col` argument: a column index or `last`.
pub fn parse_partition(arg: &str) -> Result<PartitionChoice, String> {
    if arg == "last" {
        return Ok(PartitionChoice::Last);
    }
    arg.parse::<usize>()
        .map(PartitionChoice::Column)
        .map_err(|_| format!("expected a column index or \"last\", found \"{arg}\""))
}

// ---------------------------------------------------------------------------
// report rendering
// ---------------------------------------------------------------------------

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn render_matrix(out: &mut String, m: &DMatrix<f64>, indent: &str) {
    out.push('[');
    for i in 0..m.nrows() {
        if i > 0 {
            out.push(',');
        }
        out.push('\n');
        out.push_str(indent);
        out.push_str("  [");
        for j in 0..m.ncols() {
            if j > 0 {
                out.push_str(", ");
            }
            out.push_str(&fmt_f64(m[(i, j)]));
        }
        out.push(']');
    }
    out.push('\n');
    out.push_str(indent);
    out.push(']');
}

fn render_descriptor_object(out: &mut String, sys: &DescriptorSystem, indent: &str) {
    let deeper = format!("{indent}  ");
    let _ = write!(
        out,
        "{{\n{indent}  \"kind\": \"descriptor\",\n{indent}  \"n\": {},\n{indent}  \"m\": {},\n{indent}  \"E\": ",
        sys.n(),
        sys.m()
    );
    render_matrix(out, sys.e(), &deeper);
    let _ = write!(out, ",\n{indent}  \"A\": ");
    render_matrix(out, sys.a(), &deeper);
    let _ = write!(out, ",\n{indent}  \"B\": ");
    render_matrix(out, sys.b(), &deeper);
    let _ = write!(out, "\n{indent}}}");
}

fn render_higher_order_object(out: &mut String, sys: &HigherOrderSystem, indent: &str) {
    let deeper = format!("{indent}    ");
    let _ = write!(
        out,
        "{{\n{indent}  \"kind\": \"higher_order\",\n{indent}  \"degree\": {},\n{indent}  \"state_dim\": {},\n{indent}  \"input_dim\": {},\n{indent}  \"coefficients\": [",
        sys.degree(),
        sys.state_dim(),
        sys.input_dim()
    );
    for (i, p) in sys.coeffs().iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "\n{indent}    ");
        render_matrix(out, p, &deeper);
    }
    let _ = write!(out, "\n{indent}  ],\n{indent}  \"input\": ");
    render_matrix(out, sys.input(), &format!("{indent}  "));
    let _ = write!(out, "\n{indent}}}");
}

/// Renders the radius report with fixed field order and formatting.
pub fn render_report(result: &RadiusResult, cfg: &StlnConfig) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(
        out,
        "  \"radius_frobenius\": {},",
        fmt_f64(result.radius_frobenius)
    );
    let _ = writeln!(
        out,
        "  \"radius_spectral\": {},",
        fmt_f64(result.radius_spectral)
    );
    let _ = writeln!(out, "  \"converged\": {},", result.converged);
    let _ = writeln!(
        out,
        "  \"uncontrollability_verified\": {},",
        result.uncontrollability_verified
    );
    let _ = writeln!(out, "  \"iterations\": {},", result.iterations);
    let _ = writeln!(
        out,
        "  \"refine_iterations\": {},",
        result.refine_iterations
    );
    let _ = writeln!(
        out,
        "  \"partition_col_used\": {},",
        result.partition_col_used
    );
    let partition = match cfg.partition {
        PartitionChoice::Last => "\"last\"".to_string(),
        PartitionChoice::Column(j) => j.to_string(),
    };
    let _ = writeln!(
        out,
        "  \"solver\": {{\n    \"omega\": {},\n    \"epsilon\": {},\n    \"max_iter\": {},\n    \"partition_col\": {},\n    \"multistart\": {}\n  }},",
        fmt_f64(cfg.omega),
        fmt_f64(cfg.epsilon),
        cfg.max_iter,
        partition,
        cfg.multistart
    );
    out.push_str("  \"perturbations\": {\n    \"delta_E\": ");
    render_matrix(&mut out, &result.delta_e, "    ");
    out.push_str(",\n    \"delta_A\": ");
    render_matrix(&mut out, &result.delta_a, "    ");
    out.push_str(",\n    \"delta_B\": ");
    render_matrix(&mut out, &result.delta_b, "    ");
    out.push_str("\n  },\n  \"perturbed_system\": ");
    render_descriptor_object(&mut out, &result.perturbed, "  ");
    match &result.perturbed_higher_order {
        Some(h) => {
            out.push_str(",\n  \"perturbed_higher_order\": ");
            render_higher_order_object(&mut out, h, "  ");
        }
        None => out.push_str(",\n  \"perturbed_higher_order\": null"),
    }
    out.push_str("\n}\n");
    out
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

fn solve(problem: &Problem) -> Result<(RadiusResult, StlnConfig), CliError> {
    match problem {
        Problem::Descriptor {
            sys, mask, solver, ..
        } => Ok((
            compute_radius_descriptor(sys, mask, solver)?,
            solver.clone(),
        )),
        Problem::HigherOrder {
            sys, mask, solver, ..
        } => Ok((
            compute_radius_higher_order(sys, mask.as_ref(), solver)?,
            solver.clone(),
        )),
    }
}

/// `radius` command: computes the structured radius and renders the report.
/// Returns the exit code and the report text.
pub fn cmd_radius(path: &Path, overrides: &SolverOverrides) -> Result<(i32, String), CliError> {
    let problem = load_problem(path, overrides)?;
    let (result, cfg) = solve(&problem)?;
    let report = render_report(&result, &cfg);
    let code = if result.converged {
        exit_code::OK
    } else {
        exit_code::NO_CONVERGENCE
    };
    Ok((code, report))
}

/// `check` command: controllability verdicts from the pencil and Toeplitz
/// criteria and whether they agree.
pub fn cmd_check(path: &Path) -> Result<(i32, String), CliError> {
    let problem = load_problem(path, &SolverOverrides::default())?;
    let dsys = match &problem {
        Problem::Descriptor { sys, .. } => sys.clone(),
        Problem::HigherOrder { sys, .. } => canonical_form(sys).0,
    };
    let mut out = String::new();
    if matches!(problem, Problem::HigherOrder { .. }) {
        out.push_str("note: higher-order model tested through its canonical descriptor form\n");
    }
    let toeplitz_ok = is_c_controllable_toeplitz(&dsys, linalg::DEFAULT_RANK_TOL);
    let _ = writeln!(
        out,
        "toeplitz: {}",
        if toeplitz_ok {
            "controllable"
        } else {
            "uncontrollable (controllability matrix is row-rank deficient)"
        }
    );
    match is_c_controllable_pencil(&dsys, linalg::DEFAULT_RANK_TOL) {
        Err(Error::SingularPencil) => {
            out.push_str("pencil:   inconclusive (singular pencil)\n");
            out.push_str("criteria agree: not applicable\n");
            Ok((exit_code::INCONCLUSIVE, out))
        }
        Err(other) => Err(other.into()),
        Ok(report) => {
            let pencil_desc = match report.failing_mode {
                FailingMode::None => "controllable".to_string(),
                FailingMode::Spectral(s) => {
                    format!(
                        "uncontrollable (rank drop at s = {:.6} + {:.6}i)",
                        s.re, s.im
                    )
                }
                FailingMode::AtInfinity => "uncontrollable (rank [E B] deficient)".to_string(),
            };
            let _ = writeln!(out, "pencil:   {pencil_desc}");
            let _ = writeln!(
                out,
                "criteria agree: {}",
                if report.controllable == toeplitz_ok {
                    "yes"
                } else {
                    "no"
                }
            );
            let code = if toeplitz_ok {
                exit_code::OK
            } else {
                exit_code::UNCONTROLLABLE
            };
            Ok((code, out))
        }
    }
}

enum SweepTarget {
    DescriptorEntry {
        source: char,
        row: usize,
        col: usize,
    },
    CoefficientEntry {
        index: usize,
        row: usize,
        col: usize,
    },
    InputEntry {
        row: usize,
        col: usize,
    },
    Table(String),
}

/// Parses names like `E[0][1]`, `A[2][2]`, `B[2][0]`, `P0[0][1]`, `b[1][0]`
/// or a key of the file's parameter tables.
fn parse_sweep_target(name: &str, problem: &Problem) -> Result<SweepTarget, CliError> {
    let tables = match problem {
        Problem::Descriptor { parameters, .. } => parameters,
        Problem::HigherOrder { parameters, .. } => parameters,
    };
    if tables.names().iter().any(|k| k == name) {
        return Ok(SweepTarget::Table(name.to_string()));
    }

    let parse_indices = |rest: &str| -> Option<(usize, usize)> {
        // expects "[i][j]"
        let rest = rest.strip_prefix('[')?;
        let (i, rest) = rest.split_once(']')?;
        let rest = rest.strip_prefix('[')?;
        let j = rest.strip_suffix(']')?;
        Some((i.parse().ok()?, j.parse().ok()?))
    };

    let entry = match problem {
        Problem::Descriptor { .. } => {
            let (head, rest) = name.split_at(name.find('[').unwrap_or(name.len()));
            match head {
                "E" | "A" | "B" => {
                    parse_indices(rest).map(|(row, col)| SweepTarget::DescriptorEntry {
                        source: head.chars().next().unwrap(),
                        row,
                        col,
                    })
                }
                _ => None,
            }
        }
        Problem::HigherOrder { .. } => {
            let (head, rest) = name.split_at(name.find('[').unwrap_or(name.len()));
            if head == "b" {
                parse_indices(rest).map(|(row, col)| SweepTarget::InputEntry { row, col })
            } else if let Some(idx) = head.strip_prefix('P') {
                idx.parse::<usize>().ok().and_then(|index| {
                    parse_indices(rest).map(|(row, col)| SweepTarget::CoefficientEntry {
                        index,
                        row,
                        col,
                    })
                })
            } else {
                None
            }
        }
    };
    entry.ok_or_else(|| {
        let mut available: Vec<String> = tables.names();
        match problem {
            Problem::Descriptor { .. } => {
                available.extend(["E[i][j]".into(), "A[i][j]".into(), "B[i][j]".into()])
            }
            Problem::HigherOrder { sys, .. } => {
                for k in (0..=sys.degree()).rev() {
                    available.push(format!("P{k}[i][j]"));
                }
                available.push("b[i][j]".into());
            }
        }
        CliError::UnknownParameter {
            name: name.to_string(),
            available: available.join(", "),
        }
    })
}

fn with_descriptor_entry(
    sys: &DescriptorSystem,
    source: char,
    row: usize,
    col: usize,
    value: f64,
) -> Result<DescriptorSystem, CliError> {
    let (mut e, mut a, mut b) = (sys.e().clone(), sys.a().clone(), sys.b().clone());
    let target = match source {
        'E' => &mut e,
        'A' => &mut a,
        _ => &mut b,
    };
    if row >= target.nrows() || col >= target.ncols() {
        return Err(CliError::Invalid(format!(
            "entry {source}[{row}][{col}] out of range for a {}x{} matrix",
            target.nrows(),
            target.ncols()
        )));
    }
    target[(row, col)] = value;
    Ok(DescriptorSystem::new(e, a, b)?)
}

/// `sweep` command: one radius computation per value, rows in input order.
pub fn cmd_sweep(
    path: &Path,
    param: &str,
    values: &[f64],
    overrides: &SolverOverrides,
) -> Result<(i32, String), CliError> {
    if values.is_empty() {
        return Err(CliError::Invalid("no sweep values given".into()));
    }
    let problem = load_problem(path, overrides)?;
    let target = parse_sweep_target(param, &problem)?;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:<24} {:<24} {:>10} {:>10}",
        param, "radius_frobenius", "radius_spectral", "iterations", "converged"
    );
    let mut any_unconverged = false;
    for &value in values {
        let result = match (&problem, &target) {
            (
                Problem::Descriptor {
                    sys, mask, solver, ..
                },
                SweepTarget::DescriptorEntry { source, row, col },
            ) => {
                let swept = with_descriptor_entry(sys, *source, *row, *col, value)?;
                compute_radius_descriptor(&swept, mask, solver)?
            }
            (
                Problem::Descriptor {
                    mask,
                    solver,
                    parameters,
                    ..
                },
                SweepTarget::Table(name),
            ) => {
                let list = &parameters.descriptor[name];
                let swept = lookup_value(list, value, name)?;
                compute_radius_descriptor(swept, mask, solver)?
            }
            (
                Problem::HigherOrder {
                    sys, mask, solver, ..
                },
                SweepTarget::CoefficientEntry { index, row, col },
            ) => {
                if *index > sys.degree() {
                    return Err(CliError::Invalid(format!(
                        "coefficient P{index} out of range for degree {}",
                        sys.degree()
                    )));
                }
                let mut coeffs = sys.coeffs().to_vec();
                let pos = sys.degree() - index;
                if *row >= coeffs[pos].nrows() || *col >= coeffs[pos].ncols() {
                    return Err(CliError::Invalid(format!(
                        "entry P{index}[{row}][{col}] out of range"
                    )));
                }
                coeffs[pos][(*row, *col)] = value;
                let swept = HigherOrderSystem::new(coeffs, sys.input().clone())?;
                compute_radius_higher_order(&swept, mask.as_ref(), solver)?
            }
            (
                Problem::HigherOrder {
                    sys, mask, solver, ..
                },
                SweepTarget::InputEntry { row, col },
            ) => {
                if *row >= sys.input().nrows() || *col >= sys.input().ncols() {
                    return Err(CliError::Invalid(format!(
                        "entry b[{row}][{col}] out of range"
                    )));
                }
                let mut input = sys.input().clone();
                input[(*row, *col)] = value;
                let swept = HigherOrderSystem::new(sys.coeffs().to_vec(), input)?;
                compute_radius_higher_order(&swept, mask.as_ref(), solver)?
            }
            (
                Problem::HigherOrder {
                    mask,
                    solver,
                    parameters,
                    ..
                },
                SweepTarget::Table(name),
            ) => {
                let list = &parameters.higher_order[name];
                let swept = lookup_value(list, value, name)?;
                compute_radius_higher_order(swept, mask.as_ref(), solver)?
            }
            (Problem::Descriptor { .. }, _)
            | (Problem::HigherOrder { .. }, SweepTarget::DescriptorEntry { .. }) => {
                unreachable!("target parsed against the same problem kind")
            }
        };
        any_unconverged |= !result.converged;
        let _ = writeln!(
            out,
            "{:<24} {:<24} {:<24} {:>10} {:>10}",
            value,
            fmt_f64(result.radius_frobenius),
            fmt_f64(result.radius_spectral),
            result.iterations,
            result.converged
        );
    }
    let code = if any_unconverged {
        exit_code::NO_CONVERGENCE
    } else {
        exit_code::OK
    };
    Ok((code, out))
}

fn lookup_value<'a, T>(list: &'a [(f64, T)], value: f64, name: &str) -> Result<&'a T, CliError> {
    list.iter()
        .find(|(v, _)| (v - value).abs() <= 1e-12 * v.abs().max(1.0))
        .map(|(_, sys)| sys)
        .ok_or_else(|| {
            CliError::Invalid(format!(
                "parameter {name} has no precomputed entry for value {value}; available: {}",
                list.iter()
                    .map(|(v, _)| v.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })
}
