//! The estimation-study summary table.

use std::fmt::Write as _;

use mbridge::bench::StudyRow;

pub const TABLE1_COLUMNS: [&str; 8] = [
    "Parameter",
    "True",
    "MCEM_Est",
    "MCEM_CII",
    "MCEM_CIS",
    "MCMC_Est",
    "MCMC_CII",
    "MCMC_CIS",
];

/// One row per off-diagonal rate, in the order given.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1 {
    rows: Vec<[String; 8]>,
}

pub fn emit_table1(rows: &[StudyRow]) -> Table1 {
    let rows = rows
        .iter()
        .map(|r| {
            [
                format!("lambda_{}{}", r.i + 1, r.j + 1),
                format!("{}", r.truth),
                format!("{:.3}", r.mcem.mean),
                format!("{:.3}", r.mcem.q025),
                format!("{:.3}", r.mcem.q975),
                format!("{:.3}", r.gibbs.mean),
                format!("{:.3}", r.gibbs.q025),
                format!("{:.3}", r.gibbs.q975),
            ]
        })
        .collect();
    Table1 { rows }
}

impl Table1 {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = TABLE1_COLUMNS.join(",").to_lowercase();
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Right-aligned columns separated by two spaces.
    pub fn to_text(&self) -> String {
        let mut widths = TABLE1_COLUMNS.map(str::len);
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: &[&str]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            let _ = writeln!(out, "{}", padded.join("  "));
        };
        line(&TABLE1_COLUMNS);
        for row in &self.rows {
            line(&row.each_ref().map(String::as_str));
        }
        out
    }
}
