//! Versioned JSON reports and their table renderings.

use serde::{Deserialize, Serialize};
use sinet_eval::dataset::naming::OTHER;
use sinet_eval::dataset::DatasetStats;
use sinet_eval::{DatasetReport, GeneralizationRow, MetricReport, Scores};

use crate::config::Format;
use crate::error::{CliError, Result};
use crate::table::{Better, Cell, Column, Table};

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Full run configuration as `key=value` lines.
    pub config: String,
    pub images: usize,
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// `(initial - final) / initial`.
    pub loss_drop: f64,
    /// Mean per-image IoU of the thresholded prediction.
    pub iou: f64,
    pub scores: Option<Scores>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    /// Overrides relative to the baseline, `key=value` separated by spaces.
    pub overrides: String,
    pub decoder: String,
    pub tem_conv: String,
    pub reverse: String,
    pub groups: String,
    pub result: TrainReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub baseline: String,
    pub rows: Vec<AblationRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossReport {
    pub metric: String,
    pub datasets: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub rows: Vec<GeneralizationRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Report {
    Eval { run: String, report: DatasetReport },
    Train(TrainReport),
    Ablation(AblationReport),
    Crossdata(CrossReport),
    Stats { stats: DatasetStats },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub version: u32,
    #[serde(flatten)]
    pub report: Report,
}

pub fn metric_columns() -> Vec<Column> {
    vec![
        Column::score("S_alpha", Better::Higher),
        Column::score("E_phi", Better::Higher),
        Column::score("F_beta^w", Better::Higher),
        Column::score("M", Better::Lower),
    ]
}

fn metric_cells(s: Option<&Scores>) -> Vec<Cell> {
    match s {
        Some(s) => s.as_array().iter().map(|&v| Cell::Number(Some(v))).collect(),
        None => vec![Cell::Number(None); 4],
    }
}

fn report_row(t: &mut Table, label: String, r: &MetricReport) {
    let mut cells = vec![Cell::Text(r.count.to_string())];
    cells.extend(metric_cells(Some(&r.scores)));
    t.push(label, cells);
}

fn eval_tables(run: &str, report: &DatasetReport) -> Vec<Table> {
    let columns = || {
        let mut c = vec![Column::text("Images")];
        c.extend(metric_columns());
        c
    };
    let mut overall = Table::new(&format!("{} ({})", report.dataset, run), "Model", columns());
    match &report.overall {
        Some(r) => report_row(&mut overall, run.to_string(), r),
        None => {
            let mut cells = vec![Cell::Text("0".into())];
            cells.extend(metric_cells(None));
            overall.push(run, cells);
        }
    }
    let mut out = vec![overall];
    if report.super_classes.iter().any(|c| c.super_class != OTHER) {
        let mut supers = Table::new("Super-classes", "Super-class", columns());
        for c in &report.super_classes {
            report_row(&mut supers, c.super_class.clone(), &c.report);
        }
        let mut subs = Table::new("Sub-classes", "Sub-class", columns());
        for c in &report.sub_classes {
            let label = format!("{} / {}", c.super_class, c.sub_class.as_deref().unwrap_or(OTHER));
            report_row(&mut subs, label, &c.report);
        }
        out.push(supers);
        out.push(subs);
    }
    out
}

fn train_columns() -> Vec<Column> {
    let mut c = metric_columns();
    c.extend([
        Column::score("IoU", Better::Higher),
        Column::score("Initial loss", Better::Lower),
        Column::score("Final loss", Better::Lower),
        Column::percent("Loss drop", Some(Better::Higher)),
    ]);
    c
}

fn train_cells(r: &TrainReport) -> Vec<Cell> {
    let mut cells = metric_cells(r.scores.as_ref());
    cells.extend([r.iou, r.initial_loss, r.final_loss, r.loss_drop].map(|v| Cell::Number(Some(v))));
    cells
}

fn ablation_table(a: &AblationReport) -> Table {
    let mut cols = vec![
        Column::text("Decoder"),
        Column::text("TEM conv"),
        Column::text("Reverse"),
        Column::text("Groups"),
    ];
    cols.extend(train_columns());
    let mut t = Table::new("Ablation", "Variant", cols);
    for r in &a.rows {
        let mut cells: Vec<Cell> = [&r.decoder, &r.tem_conv, &r.reverse, &r.groups]
            .map(|s| Cell::Text(s.clone()))
            .to_vec();
        cells.extend(train_cells(&r.result));
        t.push(r.name.clone(), cells);
    }
    t
}

fn cross_table(c: &CrossReport) -> Table {
    let cols = vec![
        Column {
            better: None,
            ..Column::score("Self", Better::Higher)
        },
        Column {
            better: None,
            ..Column::score("Mean others", Better::Higher)
        },
        Column::percent("Drop", Some(Better::Lower)),
    ];
    let mut t = Table::new(&format!("Generalization ({})", c.metric), "Trained on", cols);
    for r in &c.rows {
        t.push(
            r.dataset.clone(),
            vec![Cell::Number(Some(r.self_score)), Cell::Number(r.mean_others), Cell::Number(r.drop)],
        );
    }
    t
}

fn stats_tables(s: &DatasetStats) -> Vec<Table> {
    let plain = |name: &str| Column {
        better: None,
        ..Column::score(name, Better::Higher)
    };
    let mut dist = Table::new(
        &format!("{}: {} images, {} empty masks", s.dataset, s.images, s.empty_masks),
        "Quantity",
        vec![Column::text("Count"), plain("Min"), plain("Mean"), plain("Max")],
    );
    for (name, d) in [
        ("Object size", &s.object_size),
        ("Global contrast", &s.global_contrast),
        ("Local contrast", &s.local_contrast),
        ("Center distance", &s.center_distance),
    ] {
        dist.push(
            name,
            vec![
                Cell::Text(d.values.len().to_string()),
                Cell::Number(d.min),
                Cell::Number(d.mean),
                Cell::Number(d.max),
            ],
        );
    }
    let mut attrs = Table::new(
        "Attributes",
        "Attribute",
        vec![Column::text("Present"), Column::text("Known"), Column::percent("Share", None)],
    );
    for a in &s.attributes {
        let share = (a.known > 0).then(|| a.present as f64 / a.known as f64);
        attrs.push(
            a.attribute.name(),
            vec![
                Cell::Text(a.present.to_string()),
                Cell::Text(a.known.to_string()),
                Cell::Number(share),
            ],
        );
    }
    let mut res = Table::new("Resolutions", "Width x height", vec![Column::text("Images")]);
    for r in &s.resolutions {
        res.push(format!("{} x {}", r.width, r.height), vec![Cell::Text(r.count.to_string())]);
    }
    vec![dist, attrs, res]
}

impl Envelope {
    pub fn new(report: Report) -> Self {
        Self {
            version: REPORT_VERSION,
            report,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(REPORT_VERSION) => {}
            Some(v) => {
                return Err(CliError::Validation(format!(
                    "report version {v} is not supported (expected {REPORT_VERSION})"
                )))
            }
            None => return Err(CliError::Validation("report has no version".into())),
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn tables(&self) -> Vec<Table> {
        match &self.report {
            Report::Eval { run, report } => eval_tables(run, report),
            Report::Train(r) => {
                let mut t = Table::new(&format!("Toy training ({} images, {} steps)", r.images, r.steps), "Run", train_columns());
                t.push("toy", train_cells(r));
                vec![t]
            }
            Report::Ablation(a) => vec![ablation_table(a)],
            Report::Crossdata(c) => vec![cross_table(c)],
            Report::Stats { stats } => stats_tables(stats),
        }
    }

    pub fn to_markdown(&self) -> String {
        self.tables().iter().map(Table::to_markdown).collect::<Vec<_>>().join("\n")
    }

    pub fn to_csv(&self) -> String {
        self.tables().iter().map(Table::to_csv).collect::<Vec<_>>().join("\n")
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
            Format::Markdown => self.to_markdown(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_version_check() {
        let e = Envelope::new(Report::Train(TrainReport {
            config: "decoder=ncd\n".into(),
            images: 4,
            steps: 3,
            initial_loss: 2.5,
            final_loss: 1.0,
            loss_drop: 0.6,
            iou: 0.5,
            scores: None,
        }));
        let json = e.to_json();
        assert!(json.contains("\"kind\": \"train\""));
        let back = Envelope::from_json(&json).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.to_markdown(), e.to_markdown());
        let future = json.replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(Envelope::from_json(&future), Err(CliError::Validation(_))));
    }
}
