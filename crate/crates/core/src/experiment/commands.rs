use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::metrics::{
    assemble_report, correlation_study, delta_iou_histogram, ClsScore, ConfidenceSource, EpochHistogram, EvalReport,
    ModelConfidence, ReportRow,
};
use crate::regressor::{read_checkpoint, train as train_model, write_checkpoint, DirModelParams, TrainReport};
use crate::suppression::{FusionRule, SuppressorRegistry};
use crate::world::{build_dataset, format::write_dataset};

use super::pipeline::{raw_detections, score, EvalSplit};
use super::ExperimentConfig;

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", dir.display())).into())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Format(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenDataSummary {
    pub path: PathBuf,
    pub records: usize,
    pub hash: String,
    pub warnings: Vec<String>,
}

/// Writes the training split at `data.epoch` to `out`.
pub fn gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<GenDataSummary> {
    let samples = build_dataset(&cfg.world, cfg.data_epoch)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let file = File::create(out).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", out.display())))?;
    let mut w = BufWriter::new(file);
    write_dataset(&mut w, &cfg.world, &samples)?;
    w.flush()?;
    let mut warnings = Vec::new();
    if cfg.world.num_scenes == 0 {
        warnings.push("world.num_scenes = 0: dataset has a header only".to_owned());
    }
    Ok(GenDataSummary {
        path: out.to_owned(),
        records: samples.len(),
        hash: cfg.hash(),
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: DirModelParams,
    pub report: TrainReport,
    pub checkpoint: PathBuf,
    pub report_path: PathBuf,
}

/// Trains the configured model and writes its checkpoint and training report into `dir`.
pub fn train(cfg: &ExperimentConfig, dir: &Path) -> Result<TrainOutcome> {
    let (params, report) = train_model(&cfg.world, &cfg.model, &cfg.optim, cfg.feature_mode_train)?;
    create_dir(dir)?;
    let checkpoint = dir.join(cfg.file_name("model", "ckpt"));
    let mut bytes = Vec::new();
    write_checkpoint(&mut bytes, &params, report.epochs.len() as u64)?;
    write_file(&checkpoint, &bytes)?;
    let report_path = dir.join(cfg.file_name("train", "json"));
    write_json(&report_path, &report)?;
    Ok(TrainOutcome {
        params,
        report,
        checkpoint,
        report_path,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<DirModelParams> {
    let bytes = fs::read(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    Ok(read_checkpoint(bytes.as_slice())?.0)
}

/// Report files written next to each other: JSON plus CSV tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub json: PathBuf,
    pub rows_csv: PathBuf,
    pub correlations_csv: PathBuf,
    pub histograms_csv: PathBuf,
    pub checks_csv: PathBuf,
}

pub fn write_report(cfg: &ExperimentConfig, dir: &Path, stem: &str, report: &EvalReport) -> Result<ReportFiles> {
    create_dir(dir)?;
    let files = ReportFiles {
        json: dir.join(cfg.file_name(stem, "json")),
        rows_csv: dir.join(cfg.file_name(stem, "csv")),
        correlations_csv: dir.join(cfg.file_name(&format!("{stem}-correlation"), "csv")),
        histograms_csv: dir.join(cfg.file_name(&format!("{stem}-delta-iou"), "csv")),
        checks_csv: dir.join(cfg.file_name(&format!("{stem}-checks"), "csv")),
    };
    write_file(&files.json, report.to_json()?.as_bytes())?;
    write_file(&files.rows_csv, report.rows_csv().as_bytes())?;
    write_file(&files.correlations_csv, report.correlations_csv().as_bytes())?;
    write_file(&files.histograms_csv, report.histograms_csv().as_bytes())?;
    write_file(&files.checks_csv, report.checks_csv().as_bytes())?;
    Ok(files)
}

#[derive(Debug, Clone)]
pub struct EvaluateOutcome {
    pub report: EvalReport,
    pub files: ReportFiles,
}

/// Evaluates `params` on the held-out split: the configured fusion rule first, then the
/// classification-only baseline.
pub fn evaluate_params(cfg: &ExperimentConfig, params: &DirModelParams) -> Result<EvalReport> {
    let split = EvalSplit::build(cfg)?;
    let nms = SuppressorRegistry::with_builtins().build(&cfg.nms_method, &cfg.nms)?;
    let raw = raw_detections(&split, Some((params, cfg.feature_mode_infer)))?;
    let table = "evaluate";
    let mut rows = Vec::new();
    for rule in [cfg.fusion, FusionRule::ClsOnly] {
        if rows.iter().any(|r: &ReportRow| r.label == rule.name()) {
            continue;
        }
        let s = score(&raw, rule, cfg, nms.as_ref(), &cfg.eval)?;
        rows.push(ReportRow::ok(table, rule.name(), s.ap, s.ap50, s.ap75));
    }
    let model = ModelConfidence {
        label: format!("{}-{}", params.variant, cfg.feature_mode_infer),
        params,
        mode: cfg.feature_mode_infer,
    };
    let sources: [&dyn ConfidenceSource; 2] = [&ClsScore, &model];
    let correlations = correlation_study(&sources, &split.samples, &cfg.eval)?;
    let histograms = vec![EpochHistogram {
        epoch: cfg.eval_epoch(),
        histogram: delta_iou_histogram(&split.samples, cfg.eval.hist_bin_width),
    }];
    Ok(assemble_report(rows)?
        .with_correlations(correlations)
        .with_histograms(histograms))
}

pub fn evaluate(cfg: &ExperimentConfig, checkpoint: &Path, dir: &Path) -> Result<EvaluateOutcome> {
    let params = load_checkpoint(checkpoint)?;
    let report = evaluate_params(cfg, &params)?;
    let files = write_report(cfg, dir, "report", &report)?;
    Ok(EvaluateOutcome { report, files })
}
