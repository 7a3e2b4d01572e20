//! Score tables rendered as markdown or CSV.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Text for missing values.
pub const NOT_AVAILABLE: &str = "N/A";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Better {
    Higher,
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// Three decimals.
    Score,
    /// Fraction shown as a percentage with one decimal.
    Percent,
    Text,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: Kind,
    /// Best-value direction; `None` disables highlighting.
    pub better: Option<Better>,
}

impl Column {
    pub fn score(name: &str, better: Better) -> Self {
        Self {
            name: name.into(),
            kind: Kind::Score,
            better: Some(better),
        }
    }

    pub fn percent(name: &str, better: Option<Better>) -> Self {
        Self {
            name: name.into(),
            kind: Kind::Percent,
            better,
        }
    }

    pub fn text(name: &str) -> Self {
        Self {
            name: name.into(),
            kind: Kind::Text,
            better: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Number(Option<f64>),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub label: String,
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub title: String,
    pub label: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
}

/// `x` rounded half-up to `places` decimals, as an integer count of units.
fn rounded_units(x: f64, places: i32) -> i64 {
    let scale = 10f64.powi(places);
    let units = (x.abs() * scale + 0.5 + 1e-9).floor() as i64;
    if x < 0.0 {
        -units
    } else {
        units
    }
}

fn format_units(units: i64, places: usize) -> String {
    let scale = 10i64.pow(places as u32);
    let sign = if units < 0 { "-" } else { "" };
    let a = units.unsigned_abs() as i64;
    format!("{sign}{}.{:0places$}", a / scale, a % scale)
}

/// Three decimals, half-up: `0.8875 -> "0.888"`.
pub fn format_score(x: f64) -> String {
    format_units(rounded_units(x, 3), 3)
}

/// Percentage with one decimal: `0.1256 -> "12.6%"`.
pub fn format_percent(x: f64) -> String {
    format!("{}%", format_units(rounded_units(x * 100.0, 1), 1))
}

impl Table {
    pub fn new(title: &str, label: &str, columns: Vec<Column>) -> Self {
        Self {
            title: title.into(),
            label: label.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, label: impl Into<String>, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(Row {
            label: label.into(),
            cells,
        });
    }

    fn units(&self, col: usize, v: f64) -> i64 {
        match self.columns[col].kind {
            Kind::Percent => rounded_units(v * 100.0, 1),
            _ => rounded_units(v, 3),
        }
    }

    /// Displayed value of the best cell in each column, when it has at least
    /// two numbers to compare.
    fn best(&self) -> Vec<Option<i64>> {
        (0..self.columns.len())
            .map(|c| {
                let better = self.columns[c].better?;
                let vals: Vec<i64> = self
                    .rows
                    .iter()
                    .filter_map(|r| match r.cells.get(c) {
                        Some(Cell::Number(Some(v))) => Some(self.units(c, *v)),
                        _ => None,
                    })
                    .collect();
                if vals.len() < 2 {
                    return None;
                }
                match better {
                    Better::Higher => vals.into_iter().max(),
                    Better::Lower => vals.into_iter().min(),
                }
            })
            .collect()
    }

    fn display(&self, col: usize, cell: &Cell) -> String {
        match cell {
            Cell::Text(s) => s.clone(),
            Cell::Number(None) => NOT_AVAILABLE.into(),
            Cell::Number(Some(v)) => match self.columns[col].kind {
                Kind::Percent => format_percent(*v),
                _ => format_score(*v),
            },
        }
    }

    /// Best values per column are bold.
    pub fn to_markdown(&self) -> String {
        let best = self.best();
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "### {}\n", self.title);
        }
        let header: Vec<&str> = std::iter::once(self.label.as_str())
            .chain(self.columns.iter().map(|c| c.name.as_str()))
            .collect();
        let _ = writeln!(out, "| {} |", header.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
        for row in &self.rows {
            let mut cells = vec![row.label.clone()];
            for (c, cell) in row.cells.iter().enumerate() {
                let text = self.display(c, cell);
                let is_best = matches!(cell, Cell::Number(Some(v)) if best[c] == Some(self.units(c, *v)));
                cells.push(if is_best { format!("**{text}**") } else { text });
            }
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
        out
    }

    /// Full-precision values, empty for missing ones.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = std::iter::once(self.label.as_str())
            .chain(self.columns.iter().map(|c| c.name.as_str()))
            .collect();
        w.write_record(&header).expect("in-memory csv");
        for row in &self.rows {
            let mut rec = vec![row.label.clone()];
            rec.extend(row.cells.iter().map(|c| match c {
                Cell::Text(s) => s.clone(),
                Cell::Number(Some(v)) => v.to_string(),
                Cell::Number(None) => String::new(),
            }));
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_up_rounding() {
        assert_eq!(format_score(0.8875), "0.888");
        assert_eq!(format_score(0.0005), "0.001");
        assert_eq!(format_score(0.0004999), "0.000");
        assert_eq!(format_score(1.0), "1.000");
        assert_eq!(format_score(-0.0605), "-0.061");
        assert_eq!(format_percent(0.1256), "12.6%");
        assert_eq!(format_percent(-0.06), "-6.0%");
    }

    #[test]
    fn marks_best_only_with_two_rows() {
        let cols = vec![Column::score("S", Better::Higher), Column::score("M", Better::Lower)];
        let mut t = Table::new("", "Model", cols);
        t.push("a", vec![Cell::Number(Some(0.8)), Cell::Number(Some(0.05))]);
        assert!(!t.to_markdown().contains("**"));
        t.push("b", vec![Cell::Number(Some(0.7)), Cell::Number(None)]);
        let md = t.to_markdown();
        assert!(md.contains("| a | **0.800** | 0.050 |"), "{md}");
        assert!(md.contains("| b | 0.700 | N/A |"), "{md}");
    }

    #[test]
    fn csv_keeps_precision() {
        let mut t = Table::new("x", "Model", vec![Column::score("S", Better::Higher)]);
        t.push("a", vec![Cell::Number(Some(0.123456))]);
        t.push("b", vec![Cell::Number(None)]);
        assert_eq!(t.to_csv(), "Model,S\na,0.123456\nb,\n");
    }
}
