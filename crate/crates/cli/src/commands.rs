//! Subcommand implementations. Each returns the text for stdout and any
//! warnings for stderr.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use sinet_core::weights::{load_model, save_model};
use sinet_eval::dataset::stats::HEATMAP_SIZE;
use sinet_eval::dataset::{dataset_stats, Attribute, DatasetStats};
use sinet_eval::{evaluate_dataset, generalization_table, load_manifest, EvalOptions, GrayMap};

use crate::config::{Format, RunConfig};
use crate::error::{CliError, Result};
use crate::imageio::{list_images, load_rgb, predict_map, save_rgb};
use crate::report::{AblationReport, CrossReport, Envelope, Report};
use crate::toy::{default_variants, parse_grid, run_ablation, run_toy, toy_data};

#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn report(envelope: &Envelope, format: Format) -> Self {
        Self {
            stdout: envelope.render(format),
            warnings: Vec::new(),
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string()
}

/// Writes one `<stem>.png` probability map per input image.
pub fn infer(cfg: &RunConfig, weights: &Path, input: &Path, out: &Path) -> Result<Outcome> {
    cfg.validate()?;
    let (net, store) = load_model(weights)?;
    let images = list_images(input)?;
    let mut outcome = Outcome::default();
    if images.is_empty() {
        outcome.warnings.push(format!("no images found in {}", input.display()));
    }
    create_dir(out)?;
    for path in &images {
        let image = load_rgb(path)?;
        let map = predict_map(&net, &store, &image, cfg.input_size)?;
        map.save_png(&out.join(format!("{}.png", stem(path))))?;
    }
    outcome.stdout = format!("wrote {} predictions to {}\n", images.len(), out.display());
    Ok(outcome)
}

/// Trains on synthetic blobs. `out` receives `loss.csv`, `report.json`, the
/// data as `data/Imgs` and `data/GT`, and 8-bit `predictions`.
pub fn train_toy(cfg: &RunConfig, out: &Path, weights: Option<&Path>) -> Result<Outcome> {
    cfg.validate()?;
    let data = toy_data(cfg);
    let run = run_toy(cfg, &data, |_| {})?;
    create_dir(out)?;
    write(&out.join("loss.csv"), run.curve.to_csv())?;
    let (imgs, gts, preds) = (out.join("data/Imgs"), out.join("data/GT"), out.join("predictions"));
    for d in [&imgs, &gts, &preds] {
        create_dir(d)?;
    }
    for (i, ((sample, mask), prob)) in data.iter().zip(&run.masks).zip(&run.probabilities).enumerate() {
        let name = format!("blob_{i:03}");
        save_rgb(&imgs.join(format!("{name}.png")), &sample.image)?;
        mask.save_png(&gts.join(format!("{name}.png")))?;
        prob.save_png(&preds.join(format!("{name}.png")))?;
    }
    if let Some(w) = weights {
        save_model(w, &run.net, &run.store, cfg.dtype).map_err(sinet_core::CoreError::from)?;
    }
    let envelope = Envelope::new(Report::Train(run.report));
    write(&out.join("report.json"), envelope.to_json())?;
    Ok(Outcome::report(&envelope, cfg.format))
}

pub fn eval(cfg: &RunConfig, predictions: &Path, dataset: &Path, run: &str, out: Option<&Path>) -> Result<Outcome> {
    let manifest = load_manifest(dataset)?;
    let report = evaluate_dataset(
        predictions,
        &manifest,
        EvalOptions {
            skip_missing: cfg.skip_missing,
        },
    )?;
    let mut warnings = manifest.warnings.clone();
    if !report.skipped.is_empty() {
        warnings.push(format!("skipped {} masks without predictions", report.skipped.len()));
    }
    if report.overall.is_none() {
        warnings.push("no images were scored".into());
    }
    let envelope = Envelope::new(Report::Eval {
        run: run.to_string(),
        report,
    });
    if let Some(out) = out {
        create_dir(out)?;
        write(&out.join("eval.json"), envelope.to_json())?;
    }
    let mut outcome = Outcome::report(&envelope, cfg.format);
    outcome.warnings = warnings;
    Ok(outcome)
}

fn histograms_csv(s: &DatasetStats) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["quantity", "bin_lo", "bin_hi", "count"]).expect("in-memory csv");
    for (name, d) in [
        ("object_size", &s.object_size),
        ("global_contrast", &s.global_contrast),
        ("local_contrast", &s.local_contrast),
        ("center_distance", &s.center_distance),
    ] {
        let h = &d.histogram;
        let width = (h.hi - h.lo) / h.counts.len() as f64;
        for (i, c) in h.counts.iter().enumerate() {
            let lo = h.lo + width * i as f64;
            w.write_record([name.to_string(), lo.to_string(), (lo + width).to_string(), c.to_string()])
                .expect("in-memory csv");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

fn cooccurrence_csv(s: &DatasetStats) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![String::new()];
    header.extend(Attribute::ALL.iter().map(|a| a.name().to_string()));
    w.write_record(&header).expect("in-memory csv");
    for (a, row) in Attribute::ALL.iter().zip(&s.cooccurrence) {
        let mut rec = vec![a.name().to_string()];
        rec.extend(row.iter().map(|c| c.to_string()));
        w.write_record(&rec).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

/// Writes `stats.json`, `histograms.csv`, `cooccurrence.csv` and, when any
/// mask is non-empty, `heatmap.png`.
pub fn stats(cfg: &RunConfig, dataset: &Path, out: &Path) -> Result<Outcome> {
    let manifest = load_manifest(dataset)?;
    let stats = dataset_stats(&manifest)?;
    create_dir(out)?;
    write(&out.join("histograms.csv"), histograms_csv(&stats))?;
    write(&out.join("cooccurrence.csv"), cooccurrence_csv(&stats))?;
    if let Some(h) = &stats.heatmap {
        let peak = h.values.iter().copied().fold(0.0, f64::max);
        let scaled: Vec<f64> = h.values.iter().map(|v| if peak > 0.0 { v / peak } else { 0.0 }).collect();
        GrayMap::new(HEATMAP_SIZE, HEATMAP_SIZE, scaled)?.save_png(&out.join("heatmap.png"))?;
    }
    let mut warnings = manifest.warnings.clone();
    warnings.extend(stats.warnings.iter().cloned());
    if stats.images == 0 {
        warnings.push(format!("dataset {} has no images", stats.dataset));
    }
    let envelope = Envelope::new(Report::Stats { stats });
    write(&out.join("stats.json"), envelope.to_json())?;
    let mut outcome = Outcome::report(&envelope, cfg.format);
    outcome.warnings = warnings;
    Ok(outcome)
}

/// Trains every variant on the same blobs. Without a grid file the default
/// one-axis-at-a-time set is used.
pub fn ablate(cfg: &RunConfig, grid: Option<&Path>, out: &Path) -> Result<Outcome> {
    cfg.validate()?;
    let variants = match grid {
        Some(p) => parse_grid(&read(p)?)?,
        None => default_variants(),
    };
    create_dir(out)?;
    let curves = out.join("curves");
    create_dir(&curves)?;
    let mut io_error = None;
    let mut index = 0;
    let rows = run_ablation(cfg, &variants, |_, run| {
        let path = curves.join(format!("variant_{index:02}.csv"));
        index += 1;
        if let Err(e) = write(&path, run.curve.to_csv()) {
            io_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = io_error {
        return Err(e);
    }
    let envelope = Envelope::new(Report::Ablation(AblationReport {
        baseline: cfg.to_kv_string(),
        rows,
    }));
    write(&out.join("ablation.json"), envelope.to_json())?;
    Ok(Outcome::report(&envelope, cfg.format))
}

#[derive(Deserialize)]
struct MatrixJson {
    datasets: Vec<String>,
    scores: Vec<Vec<f64>>,
}

/// `(names, rows)` from JSON `{"datasets": [...], "scores": [[...]]}` or a
/// CSV whose header row and first column name the datasets.
pub fn read_matrix(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = read(path)?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let m: MatrixJson = serde_json::from_str(&text)?;
        return Ok((m.datasets, m.scores));
    }
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| CliError::Validation(e.to_string()))?.clone();
    let names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Validation(e.to_string()))?;
        labels.push(rec.get(0).unwrap_or_default().trim().to_string());
        let row = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Validation(format!("matrix value {v:?} is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if labels != names {
        return Err(CliError::Validation(format!(
            "row labels {labels:?} do not match column labels {names:?}"
        )));
    }
    Ok((names, rows))
}

pub fn crossdata(cfg: &RunConfig, matrix: &Path, metric: &str, out: Option<&Path>) -> Result<Outcome> {
    let (datasets, matrix) = read_matrix(matrix)?;
    if matrix.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::Validation("matrix values must be finite".into()));
    }
    let rows = generalization_table(&datasets, &matrix)?;
    let mut warnings = Vec::new();
    if datasets.len() == 1 {
        warnings.push("a single dataset has no cross-dataset score; drop is N/A".into());
    }
    let envelope = Envelope::new(Report::Crossdata(CrossReport {
        metric: metric.to_string(),
        datasets,
        matrix,
        rows,
    }));
    if let Some(out) = out {
        create_dir(out)?;
        write(&out.join("crossdata.json"), envelope.to_json())?;
    }
    let mut outcome = Outcome::report(&envelope, cfg.format);
    outcome.warnings = warnings;
    Ok(outcome)
}

/// Re-renders a saved report.
pub fn render(report: &Path, format: Format) -> Result<Outcome> {
    let envelope = Envelope::from_json(&read(report)?)?;
    Ok(Outcome::report(&envelope, format))
}
