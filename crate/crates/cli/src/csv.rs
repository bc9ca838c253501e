//! CSV emission for plotting: evolved functions and solved gauge functions.

use std::io::Write as _;
use std::path::Path;

use gaugeops::gauge::{residual_eta, solve_eta_1d};
use gaugeops::{Expr, GaugeError};
use thiserror::Error;

use crate::format::fmt_num;
use crate::scenario::Scenario;
use crate::verify::{flow_solver_for, gauge_for, operator_for, RunError};

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("gauge solver: {0}")]
    Gauge(#[from] GaugeError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: String, source: ::csv::Error },
    #[error("{0}")]
    Invalid(String),
}

/// What was written, for callers that want to report or test it.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSummary {
    pub rows: usize,
    pub nan_rows: usize,
    /// evolve: worst `|U_t ψ - η V_t η⁻¹ ψ|`; eta: worst relative error
    /// against the normalized closed form, when one is given
    pub max_discrepancy: Option<f64>,
}

/// CSV writer that maps errors to [`CsvError`] with the file name attached.
struct Table {
    path: String,
    writer: ::csv::Writer<std::fs::File>,
}

impl Table {
    fn create(path: &Path, header: &[String]) -> Result<Self, CsvError> {
        let name = path.display().to_string();
        let writer = ::csv::Writer::from_path(path).map_err(|source| CsvError::Csv { path: name.clone(), source })?;
        let mut table = Table { path: name, writer };
        table.row(header)?;
        Ok(table)
    }

    fn row(&mut self, cells: &[String]) -> Result<(), CsvError> {
        self.writer.write_record(cells).map_err(|source| CsvError::Csv { path: self.path.clone(), source })
    }

    /// Flushes the records and appends `# comment` lines.
    fn finish(self, comments: &[String]) -> Result<(), CsvError> {
        let path = self.path;
        let io = |source| CsvError::Io { path: path.clone(), source };
        let mut file = self.writer.into_inner().map_err(|e| io(e.into_error()))?;
        for c in comments {
            writeln!(file, "# {c}").map_err(io)?;
        }
        file.flush().map_err(io)
    }
}

fn cell(v: &Result<f64, String>) -> String {
    match v {
        Ok(x) => fmt_num(*x),
        Err(_) => "nan".to_string(),
    }
}

/// Writes `x_1..x_n, t, V_t_psi, U_t_psi, eta_gauge_U` for every point of a
/// `grid_n`-per-axis grid over the sample box and every time.
pub fn run_evolve(s: &Scenario, psi: &Expr, times: &[f64], grid_n: usize, out: &Path) -> Result<CsvSummary, CsvError> {
    if times.is_empty() || grid_n == 0 {
        return Err(CsvError::Invalid("need at least one time and one grid point".into()));
    }
    let op = operator_for(s)?;
    let eta = gauge_for(s, &op)?;
    let solver = flow_solver_for(s)?;
    let grid = s.sample_box.uniform_grid(grid_n);

    let mut header: Vec<String> = (1..=s.dim()).map(|i| format!("x_{i}")).collect();
    header.extend(["t", "V_t_psi", "U_t_psi", "eta_gauge_U"].map(String::from));
    let mut table = Table::create(out, &header)?;
    let (mut rows, mut nan_rows, mut worst) = (0, 0, 0.0f64);
    let mut first_error: Option<String> = None;
    for p in &grid {
        for &t in times {
            let v = solver.evolve_hom(psi, t).eval(p).map_err(|e| e.to_string());
            let u = solver.evolve_nonhom(&s.potential, psi, t).eval(p).map_err(|e| e.to_string());
            let gauge = solver.flow(p, t).map_err(|e| e.to_string()).and_then(|end| {
                let value = || -> Result<f64, GaugeError> { Ok(eta.eval(p)? * psi.eval(&end)? / eta.eval(&end)?) };
                value().map_err(|e| e.to_string())
            });
            if let (Ok(u), Ok(g)) = (&u, &gauge) {
                worst = worst.max((u - g).abs());
            }
            if let Some(e) = [&v, &u, &gauge].into_iter().find_map(|r| r.as_ref().err()) {
                nan_rows += 1;
                first_error.get_or_insert_with(|| e.clone());
            }
            let mut cells: Vec<String> = p.iter().map(|x| fmt_num(*x)).collect();
            cells.extend([fmt_num(t), cell(&v), cell(&u), cell(&gauge)]);
            table.row(&cells)?;
            rows += 1;
        }
    }
    let footer: Vec<String> =
        first_error.map(|e| format!("{nan_rows} of {rows} rows contain nan; first failure: {e}")).into_iter().collect();
    table.finish(&footer)?;
    Ok(CsvSummary { rows, nan_rows, max_discrepancy: Some(worst) })
}

/// Solves the gauge function on `grid_n` points of the (1-D) sample box and
/// writes `x, eta_solved, [eta_closed_form,] residual`. The closed form is
/// normalized to 1 at the anchor like the solved one.
pub fn run_eta(s: &Scenario, grid_n: usize, out: &Path) -> Result<CsvSummary, CsvError> {
    if s.dim() != 1 {
        return Err(CsvError::Invalid(format!("the gauge solver is one-dimensional, scenario has dim {}", s.dim())));
    }
    if grid_n < 2 {
        return Err(CsvError::Invalid("grid needs at least two points".into()));
    }
    let op = operator_for(s)?;
    let grid: Vec<f64> = s.sample_box.uniform_grid(grid_n).into_iter().map(|p| p[0]).collect();
    let (lo, hi) = s.sample_box.bounds()[0];
    let anchor = s.anchor.unwrap_or(0.5 * (lo + hi));
    let solved = solve_eta_1d(&op, anchor, &grid)?;
    let closed = match &s.eta {
        Some(e) => {
            let at_anchor = e.eval(&[anchor]).map_err(GaugeError::from)?;
            if at_anchor == 0.0 {
                return Err(CsvError::Invalid(format!("closed-form eta vanishes at the anchor {anchor}")));
            }
            Some((e, at_anchor))
        }
        None => None,
    };

    let header: &[&str] = if closed.is_some() {
        &["x", "eta_solved", "eta_closed_form", "residual"]
    } else {
        &["x", "eta_solved", "residual"]
    };
    let mut table = Table::create(out, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>())?;
    let mut worst: Option<f64> = None;
    for &x in &grid {
        let value = solved.eval(&[x])?;
        let residual = residual_eta(&op, &solved, &[vec![x]])?.value;
        let mut cells = vec![fmt_num(x), fmt_num(value)];
        if let Some((e, scale)) = closed {
            let reference = e.eval(&[x]).map_err(GaugeError::from)? / scale;
            let rel = ((value - reference) / reference).abs();
            worst = Some(worst.map_or(rel, |w| w.max(rel)));
            cells.push(fmt_num(reference));
        }
        cells.push(fmt_num(residual));
        table.row(&cells)?;
    }
    table.finish(&[])?;
    Ok(CsvSummary { rows: grid.len(), nan_rows: 0, max_discrepancy: worst })
}
