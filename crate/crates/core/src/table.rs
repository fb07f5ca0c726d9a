//! Maximum-correlation table over the number of basis functions `n` and the
//! degree `d`.
//!
//! Cells with `m = n - d >= d` use the closed form; cells with `1 <= m < d`
//! fall back to the direct computation from the basis moments; `m < 1` is
//! not a valid configuration.

use serde::Serialize;

use crate::copula::{closed_form_max_correlation, CopulaError, MaxCorrCopula};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellMethod {
    ClosedForm,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Cell {
    Value { value: f64, method: CellMethod },
    NotAvailable,
}

impl Cell {
    pub fn value(&self) -> Option<f64> {
        match self {
            Cell::Value { value, .. } => Some(*value),
            Cell::NotAvailable => None,
        }
    }

    /// Three-decimal rendering, or `NA`.
    pub fn render(&self) -> String {
        match self {
            Cell::Value { value, .. } => format!("{value:.3}"),
            Cell::NotAvailable => "NA".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub n: usize,
    /// Single-span (Bernstein) system with `d = n - 1`.
    pub bernstein: Cell,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxCorrTable {
    pub degrees: Vec<usize>,
    pub rows: Vec<TableRow>,
}

pub fn max_correlation_cell(n: usize, d: usize) -> Result<Cell, CopulaError> {
    if n < d + 1 {
        return Ok(Cell::NotAvailable);
    }
    let m = n - d;
    if m >= d {
        Ok(Cell::Value {
            value: closed_form_max_correlation(n, d)?,
            method: CellMethod::ClosedForm,
        })
    } else {
        Ok(Cell::Value {
            value: MaxCorrCopula::uniform(d, m)?.correlation(),
            method: CellMethod::Direct,
        })
    }
}

/// Rows `n = 2..=n_max`.
pub fn max_correlation_table(n_max: usize, degrees: &[usize]) -> Result<MaxCorrTable, CopulaError> {
    let mut rows = Vec::new();
    for n in 2..=n_max {
        let bernstein = max_correlation_cell(n, n - 1)?;
        let cells = degrees
            .iter()
            .map(|&d| max_correlation_cell(n, d))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(TableRow {
            n,
            bernstein,
            cells,
        });
    }
    Ok(MaxCorrTable {
        degrees: degrees.to_vec(),
        rows,
    })
}
