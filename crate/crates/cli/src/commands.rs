//! Subcommand bodies. Each returns the text for standard output and writes
//! any files it produces.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use silkforge::evalsuite::{evaluate_records, feature_property_correlation, EvalOptions, TrendMetrics};
use silkforge::model::{load_checkpoint, save_checkpoint, Checkpoint};
use silkforge::seqdata::fasta::to_fasta_string;
use silkforge::seqdata::uniprot::write_atomic;
use silkforge::seqdata::{
    fetch_uniprot, parse_properties_tsv, read_fasta_file, read_labeled, write_labeled_tsv, write_properties_tsv,
    AminoAcidSequence, BackgroundDistribution, LabeledRecord, MinMaxScaler, PropertyVector, MEAN_PROPERTIES,
    PROPERTY_NAMES,
};
use silkforge::synthetic::{composition_corpus, property_dataset, PropertyDesign, RepeatGrammar, SWISSPROT_COMPOSITION};
use silkforge::train::{predict_properties, StageResult};
use silkforge::{Error, Result};

use crate::cli::{AblationMode, Command, Format, GenerateArgs, SyntheticKind};
use crate::config::RunConfig;
use crate::pipeline;

pub fn run(command: Command) -> Result<String> {
    match command {
        Command::FetchData { taxonomy, scores, out } => fetch_data(taxonomy, &scores, &out),
        Command::InitConfig { out, out_dir } => {
            write_atomic(&out, RunConfig::desk(out_dir).to_json().as_bytes())?;
            Ok(String::new())
        }
        Command::MakeSynthetic { kind, n, seed, out } => make_synthetic(kind, n, seed, &out),
        Command::Distill { config, data } => distill(&config, data),
        Command::FinetuneRepeats { config, data, model } => finetune_repeats(&config, data, model),
        Command::FinetuneProperties { config, data, fasta, folds, select, model } => {
            finetune_properties(&config, data, fasta, folds, select, model)
        }
        Command::Generate(args) => generate(&args),
        Command::Predict { model, fasta, normalized, format } => predict(&model, &fasta, normalized, format),
        Command::Evaluate { fasta, reference, background, window, threshold, format } => {
            evaluate(&fasta, reference.as_deref(), &background, EvalOptions { window, threshold }, format)
        }
        Command::Trend { pred, reference, normalize, format } => trend(&pred, &reference, normalize, format),
        Command::Correlate { data, fasta, format } => correlate(&data, fasta.as_deref(), format),
        Command::Ablate { mode, config, format } => ablate(mode, &config, format),
    }
}

/// Attach the path to bare I/O errors.
fn at<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn read_text(path: &Path) -> Result<String> {
    at(path, fs::read_to_string(path).map_err(Error::from))
}

fn load_model(path: &Path) -> Result<Checkpoint> {
    at(path, load_checkpoint(path))
}

fn read_fasta(path: &Path) -> Result<Vec<silkforge::seqdata::FastaRecord>> {
    at(path, read_fasta_file(path))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

fn sequences(path: &Path) -> Result<Vec<AminoAcidSequence>> {
    let recs = read_fasta(path)?;
    if recs.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no records", path.display())));
    }
    Ok(recs.into_iter().map(|r| r.sequence).collect())
}

fn required(path: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.ok_or_else(|| Error::Config(format!("no {what} given (flag or config)")))
}

fn load_background(spec: &str) -> Result<BackgroundDistribution> {
    if spec == "builtin" {
        Ok(BackgroundDistribution::builtin())
    } else {
        BackgroundDistribution::parse_tsv(&read_text(Path::new(spec))?)
    }
}

fn fetch_data(taxonomy: u32, scores: &[u8], out: &Path) -> Result<String> {
    let s = fetch_uniprot(taxonomy, scores, out)?;
    Ok(to_json(&json!({ "written": s.written, "skipped": s.skipped, "from_cache": s.from_cache })))
}

fn make_synthetic(kind: SyntheticKind, n: usize, seed: u64, out: &Path) -> Result<String> {
    let fasta = |seqs: Vec<AminoAcidSequence>| {
        let recs: Vec<_> = seqs
            .into_iter()
            .enumerate()
            .map(|(i, s)| silkforge::seqdata::FastaRecord::new(format!("syn{:04}", i + 1), s))
            .collect();
        to_fasta_string(&recs)
    };
    let text = match kind {
        SyntheticKind::Repeats => fasta(RepeatGrammar::default().corpus(n, seed)?),
        SyntheticKind::General => fasta(general_grammar().corpus(n, seed)?),
        SyntheticKind::Composition => fasta(composition_corpus(n, (40, 110), &SWISSPROT_COMPOSITION, seed)?),
        SyntheticKind::Properties => write_labeled_tsv(&property_dataset(n, &PropertyDesign::default(), seed)?),
    };
    write_atomic(out, text.as_bytes())?;
    Ok(String::new())
}

/// Grammar for the desk-scale general corpus: wider block ranges and more GPGXX linkers.
pub fn general_grammar() -> RepeatGrammar {
    RepeatGrammar { poly_a: (3, 10), blocks: (3, 7), p_gpgxx: 0.6, p_ygqgg: 0.1 }
}

#[derive(Serialize)]
struct StageSummary {
    stage: String,
    checkpoint: String,
    steps: usize,
    best_epoch: usize,
    best_val_loss: f64,
    stopped_early: bool,
    examples: usize,
    truncated_examples: usize,
}

/// Save a stage's checkpoint and log, returning its summary.
fn save_stage(dir: &Path, name: &str, run: &StageResult) -> Result<StageSummary> {
    fs::create_dir_all(dir)?;
    let ck = dir.join(format!("{name}.ck"));
    save_checkpoint(&ck, &run.checkpoint)?;
    write_atomic(&dir.join(format!("{name}.log.jsonl")), run.report.log_jsonl().as_bytes())?;
    Ok(StageSummary {
        stage: name.to_string(),
        checkpoint: ck.display().to_string(),
        steps: run.report.steps,
        best_epoch: run.report.best_epoch(),
        best_val_loss: run.report.best_val(),
        stopped_early: run.report.stopped_early,
        examples: run.truncation.examples,
        truncated_examples: run.truncation.truncated_examples,
    })
}

fn distill(config: &Path, data: Option<PathBuf>) -> Result<String> {
    let cfg = at(config, RunConfig::load(config))?;
    let corpus = sequences(&required(data.or(cfg.data.corpus.clone()), "general corpus")?)?;
    let run = pipeline::distill(&cfg, &corpus)?;
    let mut summaries = Vec::new();
    if let Some(t) = &run.teacher {
        summaries.push(save_stage(&cfg.data.out_dir, "teacher", t)?);
    }
    summaries.push(save_stage(&cfg.data.out_dir, "student", &run.student)?);
    Ok(to_json(&summaries))
}

fn finetune_repeats(config: &Path, data: Option<PathBuf>, model: Option<PathBuf>) -> Result<String> {
    let cfg = at(config, RunConfig::load(config))?;
    let repeats = sequences(&required(data.or(cfg.data.repeats.clone()), "repeat corpus")?)?;
    let student = load_model(&model.unwrap_or_else(|| cfg.out("student.ck")))?;
    let run = pipeline::level1(&cfg, &student, &repeats)?;
    Ok(to_json(&save_stage(&cfg.data.out_dir, "level1", &run)?))
}

fn labeled(cfg: &RunConfig, data: Option<PathBuf>, fasta: Option<PathBuf>) -> Result<Vec<LabeledRecord>> {
    let tsv = required(data.or(cfg.data.properties.clone()), "properties table")?;
    at(&tsv, read_labeled(&tsv, fasta.or(cfg.data.properties_fasta.clone()).as_deref()))
}

fn finetune_properties(
    config: &Path,
    data: Option<PathBuf>,
    fasta: Option<PathBuf>,
    folds: Option<usize>,
    select: Option<usize>,
    model: Option<PathBuf>,
) -> Result<String> {
    let cfg = at(config, RunConfig::load(config))?;
    let records = labeled(&cfg, data, fasta)?;
    let start = load_model(&model.unwrap_or_else(|| cfg.out("level1.ck")))?;
    let folds = folds.unwrap_or(cfg.level2.folds);
    let select = select.unwrap_or(cfg.level2.select);
    let runs = pipeline::level2(&cfg, &start, &records, folds, select, cfg.level2.reinit_adapter)?;
    let dir = cfg.out("level2");
    let mut out = Vec::new();
    for run in &runs {
        let name = format!("fold{:02}", run.fold);
        let summary = save_stage(&dir, &name, &run.result)?;
        let val: Vec<LabeledRecord> = run.val_indices.iter().map(|&i| records[i].clone()).collect();
        write_atomic(&dir.join(format!("{name}.val.tsv")), write_labeled_tsv(&val).as_bytes())?;
        out.push(json!({
            "fold": run.fold,
            "train_records": run.train_indices.len(),
            "val_records": run.val_indices.len(),
            "summary": summary,
        }));
    }
    Ok(to_json(&out))
}

fn generate(args: &GenerateArgs) -> Result<String> {
    let ck = load_model(&args.model)?;
    let mut sampling = silkforge::model::SamplingConfig::default();
    if let Some(t) = args.temperature {
        sampling.temperature = t;
    }
    if let Some(k) = args.top_k {
        sampling.top_k = k;
    }
    if let Some(m) = args.max_new {
        sampling.max_new = m;
    }
    let records = match &args.properties {
        None => pipeline::sample_unconditional(&ck, &sampling, args.n, args.seed)?.complete()?,
        Some(text) => {
            let raw = PropertyVector::parse_csv(text)?;
            let scaler = ck
                .scaler
                .as_ref()
                .ok_or_else(|| Error::State("model has no property scaler; train it with finetune-properties".into()))?;
            let v = clamp01(scaler.apply(&raw)?);
            pipeline::sample_conditioned(&ck, &v, &sampling, args.n, args.seed)?.complete()?
        }
    };
    let text = to_fasta_string(&records);
    match &args.out {
        Some(path) => {
            write_atomic(path, text.as_bytes())?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

/// Values outside the training range are clipped to the nearest bin.
fn clamp01(v: PropertyVector) -> PropertyVector {
    PropertyVector::from_array(v.to_array().map(|x| x.clamp(0.0, 1.0)), true)
}

fn predict(model: &Path, fasta: &Path, normalized: bool, format: Format) -> Result<String> {
    let ck = load_model(model)?;
    let records = read_fasta(fasta)?;
    let max_len = ck.params.config.context_len;
    let mut rows = Vec::with_capacity(records.len());
    for r in &records {
        let v = predict_properties(&ck, &r.sequence, max_len)?;
        let v = match (&ck.scaler, normalized) {
            (_, true) => v,
            (Some(s), false) => s.invert(&v)?,
            (None, false) => return Err(Error::State("model has no scaler; use --normalized".into())),
        };
        rows.push((r.id().to_string(), v));
    }
    Ok(match format {
        Format::Tsv => write_properties_tsv(rows.iter().map(|(id, v)| (id.as_str(), v))),
        Format::Json => to_json(&rows.iter().map(|(id, v)| json!({ "id": id, "properties": v })).collect::<Vec<_>>()),
    })
}

fn evaluate(fasta: &Path, reference: Option<&Path>, background: &str, opts: EvalOptions, format: Format) -> Result<String> {
    let records = read_fasta(fasta)?;
    let reference = reference.map(read_fasta).transpose()?;
    let report = evaluate_records(&records, reference.as_deref(), &load_background(background)?, &opts)?;
    Ok(match format {
        Format::Tsv => report.to_tsv(),
        Format::Json => to_json(&report),
    })
}

fn trend(pred: &Path, reference: &Path, normalize: bool, format: Format) -> Result<String> {
    let p = parse_properties_tsv(&read_text(pred)?)?;
    let r = parse_properties_tsv(&read_text(reference)?)?;
    let by_id: HashMap<&str, &PropertyVector> = p.iter().map(|row| (row.id.as_str(), &row.properties)).collect();
    let mut pairs = Vec::with_capacity(r.len());
    for row in &r {
        let pv = by_id
            .get(row.id.as_str())
            .ok_or_else(|| Error::Format(format!("record '{}' missing from predictions", row.id)))?;
        pairs.push((**pv, row.properties));
    }
    if normalize {
        let scaler = MinMaxScaler::fit(&pairs.iter().map(|(_, r)| *r).collect::<Vec<_>>())?;
        let scale = |v: &PropertyVector| scaler.apply(&PropertyVector { normalized: false, ..*v });
        pairs = pairs.iter().map(|(p, r)| Ok((scale(p)?, scale(r)?))).collect::<Result<_>>()?;
    }
    let pick = |v: &PropertyVector| {
        let a = v.to_array();
        MEAN_PROPERTIES.iter().map(|&k| a[k]).collect::<Vec<f64>>()
    };
    let cols: Vec<String> = MEAN_PROPERTIES.iter().map(|&k| PROPERTY_NAMES[k].to_string()).collect();
    let report = silkforge::evalsuite::trend_metrics(
        &pairs.iter().map(|(p, _)| pick(p)).collect::<Vec<_>>(),
        &pairs.iter().map(|(_, r)| pick(r)).collect::<Vec<_>>(),
        &cols,
    )?;
    Ok(match format {
        Format::Tsv => report.to_tsv(),
        Format::Json => to_json(&report),
    })
}

fn correlate(data: &Path, fasta: Option<&Path>, format: Format) -> Result<String> {
    let records = at(data, read_labeled(data, fasta))?;
    let m = feature_property_correlation(&records)?;
    Ok(match format {
        Format::Tsv => m.to_tsv(),
        Format::Json => to_json(&m),
    })
}

/// Load `<out_dir>/<name>.ck` when present, otherwise train and save it.
fn cached(cfg: &RunConfig, name: &str, train: impl FnOnce() -> Result<StageResult>) -> Result<Checkpoint> {
    let path = cfg.out(&format!("{name}.ck"));
    if path.exists() {
        return load_model(&path);
    }
    let run = train()?;
    save_stage(&cfg.data.out_dir, name, &run)?;
    Ok(run.checkpoint)
}

#[derive(Serialize)]
struct Arm {
    name: String,
    /// Held-out trend over the four mean properties (no-level1 mode).
    trend: Option<silkforge::evalsuite::TrendReport>,
    /// Level-1 best validation loss (no-distill mode).
    level1_val_loss: Option<f64>,
    samples: pipeline::SampleQuality,
}

fn ablate(mode: AblationMode, config: &Path, format: Format) -> Result<String> {
    let cfg = at(config, RunConfig::load(config))?;
    let corpus = || sequences(&required(cfg.data.corpus.clone(), "data.corpus")?);
    let repeats = sequences(&required(cfg.data.repeats.clone(), "data.repeats")?)?;
    let student = cached(&cfg, "student", || Ok(pipeline::distill(&cfg, &corpus()?)?.student))?;
    let (w, t) = (cfg.eval.window, cfg.eval.threshold);
    let arms = match mode {
        AblationMode::NoLevel1 => {
            let level1 = cached(&cfg, "level1", || pipeline::level1(&cfg, &student, &repeats))?;
            let records = labeled(&cfg, None, None)?;
            let mut arms = Vec::new();
            for (name, start, reinit) in [("full", &level1, cfg.level2.reinit_adapter), ("no-level1", &student, true)] {
                let runs = pipeline::level2(&cfg, start, &records, cfg.level2.folds, cfg.level2.select, reinit)?;
                let held = pipeline::held_out(&runs, &records, cfg.tokenizer.max_len)?;
                let mut samples = pipeline::Sampled::default();
                let per_run = cfg.eval.n_samples.div_ceil(runs.len());
                for (k, run) in runs.iter().enumerate() {
                    for (j, &i) in run.val_indices.iter().take(per_run).enumerate() {
                        if k * per_run + j >= cfg.eval.n_samples {
                            break;
                        }
                        let v = run.result.checkpoint.scaler.as_ref().expect("level-2 scaler").apply(&records[i].properties)?;
                        let seed = cfg.eval.seed.wrapping_add((k * per_run + j) as u64);
                        samples.extend(pipeline::sample_conditioned(&run.result.checkpoint, &v, &cfg.sampling, 1, seed)?);
                    }
                }
                                arms.push(Arm {
                    name: name.into(),
                    trend: Some(held.trend()?),
                    level1_val_loss: None,
                    samples: pipeline::sample_quality(&samples, &repeats, w, t)?,
                });
            }
            arms
        }
        AblationMode::NoDistill => {
            let scratch = cached(&cfg, "undistilled", || pipeline::train_undistilled(&cfg, &corpus()?))?;
            let mut arms = Vec::new();
            for (name, base) in [("full", &student), ("no-distill", &scratch)] {
                let run = pipeline::level1(&cfg, base, &repeats)?;
                let samples = pipeline::sample_unconditional(&run.checkpoint, &cfg.sampling, cfg.eval.n_samples, cfg.eval.seed)?;
                arms.push(Arm {
                    name: name.into(),
                    trend: None,
                    level1_val_loss: Some(run.report.best_val()),
                    samples: pipeline::sample_quality(&samples, &repeats, w, t)?,
                });
            }
            arms
        }
    };
    Ok(match format {
        Format::Json => to_json(&json!({ "mode": format!("{mode:?}"), "arms": arms })),
        Format::Tsv => ablation_tsv(&arms),
    })
}

fn ablation_tsv(arms: &[Arm]) -> String {
    let mut out = String::from("arm\tpearson\tspearman\tmae\trmse\tr2\tcosine\tlevel1_val_loss\tvalid_fraction\tmin_ks_p\n");
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
    for a in arms {
        let m: Option<&TrendMetrics> = a.trend.as_ref().map(|t| &t.overall);
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}",
            a.name,
            opt(m.and_then(|m| m.pearson)),
            opt(m.and_then(|m| m.spearman)),
            opt(m.map(|m| m.mae)),
            opt(m.map(|m| m.rmse)),
            opt(m.and_then(|m| m.r2)),
            opt(m.and_then(|m| m.cosine)),
            opt(a.level1_val_loss),
            a.samples.valid_fraction,
            a.samples.min_ks_p,
        )
        .expect("string write");
    }
    out
}
