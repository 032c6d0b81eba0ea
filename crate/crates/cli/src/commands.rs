use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use dsi_core::eval::CategoryFilter;
use dsi_core::ml::model::ModelIoError;
use dsi_core::phantom::{self, PhantomError};
use dsi_core::pipeline::{self, FeatureRow, PipelineConfig};
use dsi_core::{dsi, signal, Feature, Scorer, TrainedModel};

use crate::{Cli, Command};

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn domain(message: impl fmt::Display) -> Self {
        Self {
            code: 1,
            message: message.to_string(),
        }
    }

    fn io(message: impl fmt::Display) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }

    pub fn code(&self) -> u8 {
        self.code
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| {
                CliError::domain(format!("cannot configure {jobs} worker threads: {e}"))
            })?;
    }
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match cli.command {
        Command::Synth {
            out,
            benign,
            malignant,
        } => synth(config, out, benign, malignant),
        Command::Extract { cohort, out } => extract(&config, cohort, out, cli.lenient),
        Command::Train {
            features_csv,
            out,
            features,
        } => train(&config, features_csv, out, &features),
        Command::Eval {
            features_csv,
            model,
            out,
        } => evaluate(&config, features_csv, model, out),
        Command::Render {
            frame,
            mask,
            model,
            out,
            scorer,
        } => render(config, &frame, &mask, model, &out, scorer),
        Command::Config { print_defaults } => {
            let shown = if print_defaults {
                PipelineConfig::default()
            } else {
                config
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&shown).expect("config serializes")
            );
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::domain(format!("invalid config {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn read_table(path: &Path) -> Result<Vec<FeatureRow>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    pipeline::features_from_csv(&text)
        .map_err(|e| CliError::domain(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<TrainedModel> {
    // A missing or unreadable model is reported as a domain error: the
    // command cannot proceed without a trained bundle.
    TrainedModel::load(path).map_err(|e| match e {
        ModelIoError::Io(..) => CliError::domain(format!("model not available: {e}")),
        ModelIoError::Format(_) => CliError::domain(e),
    })
}

fn phantom_error(e: PhantomError) -> CliError {
    if e.is_io() {
        CliError::io(match e {
            PhantomError::Write { .. } => e.to_string(),
            other => format!("cannot write cohort: {other}"),
        })
    } else {
        CliError::domain(e)
    }
}

fn synth(
    mut config: PipelineConfig,
    out: Option<PathBuf>,
    benign: Option<usize>,
    malignant: Option<usize>,
) -> Result<()> {
    if let Some(n) = benign {
        config.cohort.n_benign = n;
    }
    if let Some(n) = malignant {
        config.cohort.n_malignant = n;
    }
    let dir = out.unwrap_or(config.paths.cohort_dir);
    let manifest =
        phantom::synth_cohort(&config.cohort, config.seed, &dir).map_err(phantom_error)?;
    println!(
        "wrote {} lesions ({} benign, {} malignant) to {}",
        manifest.entries.len(),
        config.cohort.n_benign,
        config.cohort.n_malignant,
        dir.display()
    );
    Ok(())
}

fn extract(
    config: &PipelineConfig,
    cohort: Option<PathBuf>,
    out: Option<PathBuf>,
    lenient: bool,
) -> Result<()> {
    let cohort = cohort.unwrap_or_else(|| config.paths.cohort_dir.clone());
    let out = out.unwrap_or_else(|| config.paths.features_csv.clone());
    let manifest = phantom::CohortManifest::load(&cohort).map_err(phantom_error)?;
    let (rows, failures) = pipeline::extract_cohort(&manifest, &config.analysis);
    for f in &failures {
        log::warn!("lesion {} skipped: {}", f.id, f.error);
    }
    if let Some(first) = failures.first() {
        if !lenient {
            let msg = format!(
                "{} of {} lesions failed (first: {}: {}); rerun with --lenient to skip them",
                failures.len(),
                manifest.entries.len(),
                first.id,
                first.error
            );
            return Err(CliError::domain(msg));
        }
    }
    write_file(&out, &pipeline::features_to_csv(&rows))?;
    println!(
        "wrote {} feature rows to {} ({} skipped)",
        rows.len(),
        out.display(),
        failures.len()
    );
    Ok(())
}

fn parse_subset(spec: &str) -> Result<Option<Vec<Feature>>> {
    match spec {
        "auto" => Ok(None),
        "all" => Ok(Some(Feature::DEFAULT_SUBSET.to_vec())),
        list => list
            .split(',')
            .map(|s| s.trim().parse::<Feature>().map_err(CliError::domain))
            .collect::<Result<Vec<_>>>()
            .map(Some),
    }
}

fn selection_report_path(model: &Path) -> PathBuf {
    model.with_extension("selection.json")
}

fn train(
    config: &PipelineConfig,
    features_csv: Option<PathBuf>,
    out: Option<PathBuf>,
    features: &str,
) -> Result<()> {
    let csv = features_csv.unwrap_or_else(|| config.paths.features_csv.clone());
    let out = out.unwrap_or_else(|| config.paths.model_path.clone());
    let rows = read_table(&csv)?;
    let settings = &config.train;
    let (model, selection) = match parse_subset(features)? {
        None => pipeline::train(&rows, settings, config.seed).map_err(CliError::domain)?,
        Some(subset) => {
            let (table, labels): (Vec<_>, Vec<_>) =
                rows.iter().map(|r| (r.features, r.label)).unzip();
            let model = TrainedModel::fit(&table, &labels, &subset, &settings.params(config.seed))
                .map_err(CliError::domain)?;
            (model, None)
        }
    };
    model.save(&out).map_err(CliError::io)?;
    if let Some(sel) = &selection {
        let report = serde_json::to_string_pretty(sel).expect("selection serializes");
        write_file(&selection_report_path(&out), &report)?;
        println!(
            "scored {} of {} subsets with {}; best training AUC {:.4}",
            sel.enumerated - sel.skipped,
            sel.enumerated,
            sel.scorer,
            sel.best.auc
        );
    }
    let names: Vec<&str> = model.subset.iter().map(|f| f.name()).collect();
    println!(
        "trained on {} lesions, features [{}], C = {}, gamma = {}; wrote {}",
        rows.len(),
        names.join(", "),
        model.svm.c,
        model.svm.gamma,
        out.display()
    );
    Ok(())
}

fn evaluate(
    config: &PipelineConfig,
    features_csv: Option<PathBuf>,
    model: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    let csv = features_csv.unwrap_or_else(|| config.paths.features_csv.clone());
    let model_path = model.unwrap_or_else(|| config.paths.model_path.clone());
    let out = out.unwrap_or_else(|| config.paths.report_dir.clone());
    let rows = read_table(&csv)?;
    let model = load_model(&model_path)?;
    let report = pipeline::evaluate(
        &rows,
        &model.subset,
        &config.train,
        &config.eval,
        config.seed,
    )
    .map_err(CliError::domain)?;
    write_file(&out.join("report.json"), &report.to_json())?;
    write_file(&out.join("report.csv"), &report.to_csv())?;
    for scorer in Scorer::ALL {
        if let Some(row) = report.row(scorer.name(), CategoryFilter::All, 0.0) {
            match (row.auc, row.acc) {
                (Some(auc), Some(acc)) => println!(
                    "{:<13} all lesions: AUC {:.3} ± {:.3}, accuracy {:.3} ± {:.3} ({} repeats)",
                    scorer.name(),
                    auc.mean,
                    auc.std,
                    acc.mean,
                    acc.std,
                    row.repeats_used
                ),
                _ => println!("{:<13} all lesions: unavailable", scorer.name()),
            }
        }
    }
    println!(
        "wrote {} report rows to {}",
        report.rows.len(),
        out.display()
    );
    Ok(())
}

fn render(
    config: PipelineConfig,
    frame: &Path,
    mask: &Path,
    model: Option<PathBuf>,
    out: &Path,
    scorer: Option<Scorer>,
) -> Result<()> {
    let model_path = model.unwrap_or_else(|| config.paths.model_path.clone());
    let model = load_model(&model_path)?;
    let mut settings = config.dsi.clone();
    if let Some(s) = scorer {
        settings.scorer = s;
    }
    let rf = signal::read_frame(frame).map_err(|e| match e {
        signal::FrameError::Io { .. } => CliError::io(e),
        other => CliError::domain(other),
    })?;
    let mask = signal::read_mask(mask, rf.geometry()).map_err(|e| match e {
        signal::MaskError::Io { .. } => CliError::io(e),
        other => CliError::domain(other),
    })?;
    let rendered = pipeline::render_lesion(&rf, &mask, &model, &config.analysis, &settings)
        .map_err(|e| match &e {
            pipeline::RenderError::Analysis(a) if a.is_io() => CliError::io(e),
            _ => CliError::domain(e),
        })?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    }
    dsi::write_png(out, &rendered.image).map_err(|e| match e {
        dsi::DsiError::Io { .. } => CliError::io(e),
        other => CliError::domain(other),
    })?;
    let provenance =
        serde_json::to_string_pretty(&rendered.provenance).expect("provenance serializes");
    write_file(&out.with_extension("json"), &provenance)?;
    println!(
        "rendered {} overlay (global score {:.4}, mean color index {:.1}) to {}",
        settings.scorer,
        rendered.provenance.global_score,
        rendered.provenance.mean_color_index,
        out.display()
    );
    Ok(())
}
