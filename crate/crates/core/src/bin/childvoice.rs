//! `childvoice`: the pipeline as subcommands.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 data error.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use childvoice::balance::LabeledMatrix;
use childvoice::clustering::{cluster_features, FactorSet};
use childvoice::config::RunConfig;
use childvoice::corpus::{filter_quality, load_manifest};
use childvoice::eval::{
    f1_per_class, format_scores_table, run_experiment, stats_table, subject_vote, write_importance_csv,
    write_scores_csv, write_stats_csv, Clustering, SamplePrediction, SpeechSelection,
};
use childvoice::features::{
    extract_manifest, read_feature_csv, select_features, write_feature_csv, FeatureMatrix, FeatureRow, FeatureSet,
};
use childvoice::model::{grid_search, prepare_training, train_erf, CvOptions, ErfParams, Forest};

#[derive(Debug, Parser)]
#[command(name = "childvoice", version, about = "Sex classification of children's voices")]
struct Cli {
    /// Run configuration (flat TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Treat unreadable audio as fatal.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract a feature CSV from a manifest.
    Extract {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long)]
        segment_seconds: Option<f64>,
    },
    /// Run the full evaluation matrix.
    Run(RunArgs),
    /// Fit a factor set on one cohort.
    Cluster {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        cutoff: Option<f64>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Train a forest on one cohort, grid-searching when the grid has several candidates.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Factor set to project onto before training.
        #[arg(long)]
        factors: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Score a trained forest on a feature CSV and write per-sample predictions.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        factors: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Girls-vs-boys statistics per age and feature.
    Stats {
        #[arg(long)]
        features: Option<PathBuf>,
        /// Comma-separated ages; an empty string selects none, absent selects all.
        #[arg(long)]
        ages: Option<String>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Write the importance table of a trained forest.
    Importance {
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        factors: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    feature_sets: Option<Vec<FeatureSet>>,
    #[arg(long, value_delimiter = ',')]
    groupings: Option<Vec<childvoice::corpus::GroupingMode>>,
    #[arg(long, value_delimiter = ',')]
    speech_types: Option<Vec<SpeechSelection>>,
    #[arg(long, value_delimiter = ',')]
    clustering: Option<Vec<Clustering>>,
    #[arg(long)]
    cutoff: Option<f64>,
    /// Disable Borderline-SMOTE.
    #[arg(long)]
    no_smote: bool,
    #[arg(long)]
    smote_k: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    outer_folds: Option<usize>,
}

/// Cohort selection shared by `cluster`, `train` and `evaluate`.
#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, default_value = "eg_vtl")]
    feature_set: FeatureSet,
    #[arg(long, default_value = "both")]
    speech_type: SpeechSelection,
    /// Age group label: a year such as `9` or a band such as `5-8`.
    #[arg(long)]
    group: Option<String>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

type CliResult<T> = Result<T, Failure>;

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: error.into() }
}

fn data(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: error.into() }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        c.experiment.seed = s;
    }
    if let Some(j) = cli.jobs {
        c.jobs = j;
    }
    c.strict |= cli.strict;
    Ok(c)
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let mut cfg = load_config(&cli)?;
    if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global()
            .map_err(usage)?;
    }
    match cli.command {
        Command::Extract {
            manifest,
            output,
            segment_seconds,
        } => {
            set(&mut cfg.manifest, manifest.map(Some));
            set(&mut cfg.segment_seconds, segment_seconds);
            cfg.validate().map_err(usage)?;
            cmd_extract(&cfg, &output)
        }
        Command::Run(args) => {
            apply_run_args(&mut cfg, args);
            cfg.validate().map_err(usage)?;
            cmd_run(&cfg)
        }
        Command::Cluster { data, cutoff, output } => {
            set(&mut cfg.experiment.cutoff, cutoff);
            set(&mut cfg.features, data.features.clone().map(Some));
            cfg.validate().map_err(usage)?;
            cmd_cluster(&cfg, &data, &output)
        }
        Command::Train { data, factors, output } => {
            set(&mut cfg.features, data.features.clone().map(Some));
            cfg.validate().map_err(usage)?;
            cmd_train(&cfg, &data, factors.as_deref(), &output)
        }
        Command::Evaluate {
            data,
            forest,
            factors,
            output,
        } => {
            set(&mut cfg.features, data.features.clone().map(Some));
            cfg.validate().map_err(usage)?;
            cmd_evaluate(&cfg, &data, &forest, factors.as_deref(), &output)
        }
        Command::Stats { features, ages, output } => {
            set(&mut cfg.features, features.map(Some));
            cfg.validate().map_err(usage)?;
            let ages = match ages {
                None => None,
                Some(s) => Some(parse_ages(&s).map_err(usage)?),
            };
            cmd_stats(&cfg, ages, &output)
        }
        Command::Importance { forest, factors, output } => cmd_importance(&forest, factors.as_deref(), &output),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_run_args(cfg: &mut RunConfig, a: RunArgs) {
    set(&mut cfg.manifest, a.manifest.map(Some));
    set(&mut cfg.features, a.features.map(Some));
    set(&mut cfg.output_dir, a.output_dir);
    let e = &mut cfg.experiment;
    set(&mut e.feature_sets, a.feature_sets);
    set(&mut e.groupings, a.groupings);
    set(&mut e.speech_types, a.speech_types);
    set(&mut e.clustering, a.clustering);
    set(&mut e.cutoff, a.cutoff);
    if let Some(k) = a.smote_k {
        e.smote_k = Some(k);
    }
    if a.no_smote {
        e.smote_k = None;
    }
    set(&mut e.folds, a.folds);
    set(&mut e.repeats, a.repeats);
    set(&mut e.outer_folds, a.outer_folds);
}

fn parse_ages(s: &str) -> anyhow::Result<Vec<u8>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u8>().with_context(|| format!("bad age {t:?}")))
        .collect()
}

/// Writes through a temporary file in the destination directory, renamed
/// into place only when `body` succeeds.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(data)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("temporary file in {}", dir.display()))
        .map_err(data)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).map_err(data)?;
        w.flush().map_err(data)?;
    }
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(data)?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(data)
}

fn extract_rows(cfg: &RunConfig, manifest: &Path) -> CliResult<Vec<FeatureRow>> {
    let entries = load_manifest(manifest).map_err(data)?;
    let kept = filter_quality(&entries);
    info!("{} of {} manifest entries pass the quality filter", kept.len(), entries.len());
    let ex = extract_manifest(&kept, &cfg.dsp, cfg.segment_seconds, cfg.strict).map_err(data)?;
    for s in &ex.skipped {
        warn!("skipped {} ({}): {}", s.audio_path.display(), s.subject_id, s.message);
    }
    if ex.rows.is_empty() {
        return Err(data(anyhow!("extraction produced no feature rows")));
    }
    Ok(ex.rows)
}

/// Feature rows from the configured feature CSV, or extracted from the manifest.
fn load_rows(cfg: &RunConfig) -> CliResult<Vec<FeatureRow>> {
    if let Some(p) = &cfg.features {
        let file = fs::File::open(p).with_context(|| format!("opening {}", p.display())).map_err(data)?;
        let (_, rows) = read_feature_csv(file)
            .with_context(|| p.display().to_string())
            .map_err(data)?;
        return Ok(rows);
    }
    match &cfg.manifest {
        Some(m) => extract_rows(cfg, m),
        None => Err(usage(anyhow!("no input: give --features or --manifest (or set them in the config)"))),
    }
}

fn cmd_extract(cfg: &RunConfig, output: &Path) -> CliResult<()> {
    let Some(manifest) = &cfg.manifest else {
        return Err(usage(anyhow!("extract needs --manifest")));
    };
    let rows = extract_rows(cfg, manifest)?;
    let names = childvoice::features::inventory();
    write_atomic(output, |w| Ok(write_feature_csv(w, names, &rows)?))?;
    println!("{} rows written to {}", rows.len(), output.display());
    Ok(())
}

fn cmd_run(cfg: &RunConfig) -> CliResult<()> {
    let rows = load_rows(cfg)?;
    let report = run_experiment(&rows, &cfg.experiment).map_err(data)?;
    let out = &cfg.output_dir;
    write_atomic(&out.join("scores.csv"), |w| Ok(write_scores_csv(w, &report.cells)?))?;
    write_atomic(&out.join("importance.csv"), |w| Ok(write_importance_csv(w, &report.cells)?))?;
    write_atomic(&out.join("stats.csv"), |w| Ok(write_stats_csv(w, &report.stats)?))?;
    write_text(&out.join("report.json"), &report.to_json().map_err(data)?)?;
    let models = out.join("models");
    for cell in &report.cells {
        let Some(r) = cell.result() else { continue };
        let k = &cell.key;
        let stem = format!("{}_{}_{}_{}_{}", k.grouping, k.group, k.feature_set, k.speech_type, k.clustering);
        write_text(&models.join(format!("{stem}.forest.json")), &r.forest.to_json().map_err(data)?)?;
        if let Some(f) = &r.factor_set {
            write_text(&models.join(format!("{stem}.factors.json")), &f.to_json().map_err(data)?)?;
        }
    }
    print!("{}", format_scores_table(&report));
    Ok(())
}

fn group_filter(label: &str) -> anyhow::Result<(u8, u8)> {
    let parse = |s: &str| s.trim().parse::<u8>().with_context(|| format!("bad age group {label:?}"));
    match label.split_once('-') {
        Some((lo, hi)) => Ok((parse(lo)?, parse(hi)?)),
        None => {
            let a = parse(label)?;
            Ok((a, a))
        }
    }
}

/// The cohort's feature matrix for the chosen set, speech type and age group.
fn cohort_matrix(cfg: &RunConfig, d: &DataArgs) -> CliResult<FeatureMatrix> {
    let range = d.group.as_deref().map(group_filter).transpose().map_err(usage)?;
    let rows: Vec<FeatureRow> = load_rows(cfg)?
        .into_iter()
        .filter(|r| d.speech_type.admits(r.key.speech_type))
        .filter(|r| range.is_none_or(|(lo, hi)| (lo..=hi).contains(&r.key.age)))
        .collect();
    let m = select_features(&rows, d.feature_set);
    if m.n_rows() == 0 {
        return Err(data(anyhow!("no complete rows for the selected cohort")));
    }
    if m.dropped > 0 {
        warn!("{} rows with missing features dropped", m.dropped);
    }
    Ok(m)
}

fn load_factors(path: Option<&Path>) -> CliResult<Option<FactorSet>> {
    path.map(|p| FactorSet::from_json(&read_text(p)?).with_context(|| p.display().to_string()).map_err(data))
        .transpose()
}

fn project(m: &FeatureMatrix, factors: Option<&FactorSet>) -> CliResult<LabeledMatrix> {
    let d = LabeledMatrix::from_matrix(m);
    match factors {
        None => Ok(d),
        Some(f) => {
            let x = f.transform_rows(&d.names, &d.x).map_err(data)?;
            LabeledMatrix::new(f.names(), x, d.y, d.subject_ids).map_err(data)
        }
    }
}

fn cmd_cluster(cfg: &RunConfig, d: &DataArgs, output: &Path) -> CliResult<()> {
    let m = cohort_matrix(cfg, d)?;
    let f = cluster_features(&m, cfg.experiment.cutoff).map_err(data)?;
    write_text(output, &f.to_json().map_err(data)?)?;
    println!("{} features -> {} factors", m.n_cols(), f.len());
    for factor in &f.factors {
        println!("  {}", factor.name());
    }
    Ok(())
}

fn cmd_train(cfg: &RunConfig, d: &DataArgs, factors: Option<&Path>, output: &Path) -> CliResult<()> {
    let m = cohort_matrix(cfg, d)?;
    let factors = load_factors(factors)?;
    let x = project(&m, factors.as_ref())?;
    let e = &cfg.experiment;
    let seed = childvoice::model::derive_seed(e.seed, &[0]);
    let best = if e.grid.len() == 1 {
        e.grid[0].clone()
    } else {
        let cv = CvOptions {
            folds: e.folds,
            repeats: e.repeats,
            group_by_subject: e.group_by_subject,
            smote_k: e.smote_k,
            seed,
        };
        let g = grid_search(&x, &e.grid, &cv).map_err(data)?;
        for row in &g.cv_table {
            info!("{}: {:.4}", row.params.label(), row.mean_weighted_f1);
        }
        g.best
    };
    let train = prepare_training(&x, e.smote_k, childvoice::model::derive_seed(e.seed, &[1])).map_err(data)?;
    let params = ErfParams {
        seed: childvoice::model::derive_seed(e.seed, &[2]),
        ..best
    };
    let forest = train_erf(&train, &params).map_err(data)?;
    write_text(output, &forest.to_json().map_err(data)?)?;
    println!("trained {} on {} rows ({} features)", params.label(), train.len(), train.n_features());
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig, d: &DataArgs, forest: &Path, factors: Option<&Path>, output: &Path) -> CliResult<()> {
    let forest = Forest::from_json(&read_text(forest)?).map_err(data)?;
    let factors = load_factors(factors)?;
    let m = cohort_matrix(cfg, d)?;
    let x = project(&m, factors.as_ref())?;
    if x.names != forest.feature_names {
        return Err(data(anyhow!(
            "feature columns do not match the forest (forest expects {} columns, data has {})",
            forest.feature_names.len(),
            x.names.len()
        )));
    }
    let mut preds = Vec::with_capacity(x.len());
    for (i, row) in x.x.iter().enumerate() {
        preds.push(SamplePrediction {
            subject_id: x.subject_ids[i].clone(),
            truth: x.y[i],
            prediction: forest.predict(row).map_err(data)?,
        });
    }
    write_atomic(output, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["subject_id", "age", "segment_index", "truth", "prediction", "vote_F", "vote_M"])?;
        for (p, key) in preds.iter().zip(&m.keys) {
            c.write_record([
                p.subject_id.clone(),
                key.age.to_string(),
                key.segment_index.to_string(),
                p.truth.to_string(),
                p.prediction.label.to_string(),
                format!("{:?}", p.prediction.vote_fraction[0]),
                format!("{:?}", p.prediction.vote_fraction[1]),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    let truth: Vec<_> = preds.iter().map(|p| p.truth).collect();
    let labels: Vec<_> = preds.iter().map(|p| p.prediction.label).collect();
    let samples = f1_per_class(&truth, &labels).map_err(data)?;
    let votes = subject_vote(&preds);
    let vt: Vec<_> = votes.iter().map(|v| v.truth).collect();
    let vl: Vec<_> = votes.iter().map(|v| v.label).collect();
    let subjects = f1_per_class(&vt, &vl).map_err(data)?;
    let f = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.3}"));
    println!(
        "samples:  F1_G {} F1_B {} mean {:.3} weighted {:.3}",
        f(samples.f1_f),
        f(samples.f1_m),
        samples.mean_f1,
        samples.weighted_f1
    );
    println!(
        "subjects: F1_G {} F1_B {} mean {:.3} weighted {:.3}",
        f(subjects.f1_f),
        f(subjects.f1_m),
        subjects.mean_f1,
        subjects.weighted_f1
    );
    Ok(())
}

fn cmd_stats(cfg: &RunConfig, ages: Option<Vec<u8>>, output: &Path) -> CliResult<()> {
    let rows = load_rows(cfg)?;
    let table = match ages {
        Some(a) if a.is_empty() => Vec::new(),
        Some(a) => stats_table(&rows, &a),
        None => stats_table(&rows, &cfg.experiment.stats_ages),
    };
    write_atomic(output, |w| Ok(write_stats_csv(w, &table)?))?;
    println!("{} rows written to {}", table.len(), output.display());
    Ok(())
}

fn cmd_importance(forest: &Path, factors: Option<&Path>, output: &Path) -> CliResult<()> {
    let forest = Forest::from_json(&read_text(forest)?).map_err(data)?;
    let factors = load_factors(factors)?;
    let table = forest.importance();
    let members = |name: &str| -> Vec<String> {
        factors
            .as_ref()
            .and_then(|f| f.factors.iter().find(|x| x.name() == name))
            .map_or_else(|| vec![name.to_string()], |x| x.members.clone())
    };
    write_atomic(output, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["factor", "members", "weight"])?;
        for (name, weight) in table.ranked() {
            c.write_record([name.to_string(), members(name).join(";"), format!("{weight:?}")])?;
        }
        c.flush()?;
        Ok(())
    })?;
    for (name, weight) in table.ranked() {
        println!("{weight:8.4}  {name}");
    }
    Ok(())
}
