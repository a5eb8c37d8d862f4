use std::path::Path;

use log::info;
use reo_core::datasetio::{read_dataset, validate_dataset, Dataset};
use reo_core::error::{Error, Result};
use reo_core::evalkit::{ablate_tokens, emit_report, evaluate, read_json_reports, Report, ReportFormat};
use reo_core::model::{Model, ModelConfig, TokenStrategy};
use reo_core::numerics::Real;
use reo_core::synthdata::{build_dataset, Category, GeneratorConfig, SceneRecord, Split};
use reo_core::training::{load_model, save_model, train_stage1, train_stage2, DialogueIndex, StageConfig};

use crate::{AblateArgs, Command, EvalArgs, GenDataArgs, ReportArgs, TrainArgs, ValidateArgs};

pub const NUMERIC_MODE_VAR: &str = "REO_NUMERIC_MODE";
pub const LOSS_CURVE_FILE: &str = "loss_curve.csv";
pub const STAGE_CONFIG_FILE: &str = "stage_config.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumericMode {
    F32,
    F64,
}

impl NumericMode {
    pub fn from_env() -> Result<Self> {
        match std::env::var(NUMERIC_MODE_VAR).as_deref() {
            Err(_) | Ok("") | Ok("f32") => Ok(NumericMode::F32),
            Ok("f64") => Ok(NumericMode::F64),
            Ok(other) => Err(Error::Config(format!("{NUMERIC_MODE_VAR} must be f32 or f64, got {other:?}"))),
        }
    }
}

pub fn run<F: Real>(command: Command) -> Result<()> {
    info!("numeric mode {}", std::any::type_name::<F>());
    match command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train::<F>(a),
        Command::Eval(a) => eval::<F>(a),
        Command::AblateTokens(a) => ablate::<F>(a),
        Command::Report(a) => report(a),
        Command::Validate(a) => validate(a),
    }
}

fn check_clean(dir: &Path) -> Result<()> {
    let report = validate_dataset(dir)?;
    for v in &report.violations {
        eprintln!("violation: {v}");
    }
    info!(
        "validated {} scenes and {} dialogues: {} violation(s)",
        report.scenes_checked,
        report.dialogues_checked,
        report.violations.len()
    );
    if report.is_clean() {
        Ok(())
    } else {
        Err(Error::Validation(report.violations.len()))
    }
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let cfg = GeneratorConfig {
        n_train: a.scenes as usize,
        n_test: a.test as usize,
        classes: a.classes,
        seed: a.seed,
        ..GeneratorConfig::default()
    };
    cfg.validate()?;
    if a.out.exists() && std::fs::read_dir(&a.out).map_err(|e| Error::io(&a.out, e))?.next().is_some() {
        return Err(Error::Config(format!("output directory {} is not empty", a.out.display())));
    }
    info!("generator config {}", serde_json::to_string(&cfg).expect("plain struct"));
    build_dataset(&cfg, &a.out)?;
    check_clean(&a.out)
}

fn validate(a: ValidateArgs) -> Result<()> {
    check_clean(&a.data)
}

fn stage_config(stage: u8, file: Option<&Path>, overrides: &[String]) -> Result<StageConfig> {
    let mut text = match file {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => String::new(),
    };
    for o in overrides {
        text.push('\n');
        text.push_str(o);
    }
    let cfg = StageConfig::defaults(stage)?.apply_text(&text)?;
    if cfg.stage != stage {
        return Err(Error::Config(format!("config sets stage {} but stage {stage} was requested", cfg.stage)));
    }
    Ok(cfg)
}

fn load_data(dir: &Path) -> Result<Dataset> {
    let ds = read_dataset(dir)?;
    info!("dataset {}: {} scenes, seed {}", dir.display(), ds.scenes.len(), ds.meta.seed);
    Ok(ds)
}

fn split_scenes(ds: &Dataset, split: Split, limit: Option<usize>) -> Vec<&SceneRecord> {
    let all: Vec<&SceneRecord> = ds.split(split).collect();
    match limit {
        Some(n) => all.into_iter().take(n).collect(),
        None => all,
    }
}

fn train<F: Real>(a: TrainArgs) -> Result<()> {
    let cfg = stage_config(a.stage, a.config.as_deref(), &a.overrides)?;
    info!("resolved stage config:\n{}", cfg.to_text());
    let mut model: Model<F> = match (&a.init, cfg.stage) {
        (Some(dir), _) => {
            let (m, from) = load_model(dir)?;
            if cfg.stage == 2 && from < 1 {
                return Err(Error::Config(format!("{} is not a stage-1 checkpoint", dir.display())));
            }
            info!("initialized from {} (stage {from})", dir.display());
            m
        }
        (None, 1) => {
            let m = Model::init(ModelConfig::default())?;
            info!("fresh model, init seed {}", m.config.init_seed);
            m
        }
        (None, _) => return Err(Error::Config("stage 2 requires --init with a stage-1 checkpoint".into())),
    };
    let ds = load_data(&a.data)?;
    let index = DialogueIndex::new(&ds.dialogues);
    let scenes = split_scenes(&ds, Split::Train, None);
    let report = if cfg.stage == 1 {
        train_stage1(&mut model, &scenes, &index, &cfg)?
    } else {
        train_stage2(&mut model, &scenes, &index, &cfg)?
    };
    save_model(&model, cfg.stage, &a.out)?;
    write_text(&a.out.join(LOSS_CURVE_FILE), &report.loss_curve_csv())?;
    write_text(&a.out.join(STAGE_CONFIG_FILE), &cfg.to_text())?;
    let last = report.epochs.last().map_or(f64::NAN, |e| e.mean_loss);
    info!("stage {} finished: {} steps, final epoch loss {last}", cfg.stage, report.step_losses.len());
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn report_format(explicit: Option<&str>, path: &Path) -> Result<ReportFormat> {
    match explicit {
        Some(f) => f.parse(),
        None => Ok(ReportFormat::for_path(path)),
    }
}

/// `dir/stem_suffix` next to a report file.
fn sibling(path: &Path, suffix: &str) -> std::path::PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    path.with_file_name(format!("{stem}_{suffix}"))
}

fn eval<F: Real>(a: EvalArgs) -> Result<()> {
    let category = Category::from_task_name(&a.task)
        .ok_or_else(|| Error::Config(format!("unknown task {:?}; expected landcover, counting, vqa or agb", a.task)))?;
    let format = report_format(a.format.as_deref(), &a.report)?;
    let (model, stage) = load_model::<F>(&a.ckpt)?;
    info!("checkpoint {} (stage {stage})", a.ckpt.display());
    if category == Category::Agb {
        if stage < 2 {
            return Err(Error::Config("biomass evaluation needs a stage-2 checkpoint".into()));
        }
        if let Some(s) = &a.strategy {
            let s: TokenStrategy = s.parse()?;
            if s != model.config.reg_visual_strategy {
                return Err(Error::Config(format!(
                    "checkpoint was trained with the {} strategy, not {s}",
                    model.config.reg_visual_strategy
                )));
            }
        }
    }
    let ds = load_data(&a.data)?;
    let index = DialogueIndex::new(&ds.dialogues);
    let scenes = split_scenes(&ds, Split::Test, a.limit);
    let result = evaluate(&model, &scenes, &index, &[category])?;
    emit_report(&result.reports, format, &a.report)?;
    if category == Category::Agb {
        write_text(&sibling(&a.report, "scatter.csv"), &result.agb_scatter_csv())?;
    } else {
        let mut lines = String::new();
        for p in &result.predictions {
            lines.push_str(&serde_json::to_string(p).map_err(|e| Error::json(&a.report, e))?);
            lines.push('\n');
        }
        write_text(&sibling(&a.report, "predictions.jsonl"), &lines)?;
    }
    for r in &result.reports {
        info!("{}", serde_json::to_string(r).map_err(|e| Error::json(&a.report, e))?);
    }
    Ok(())
}

fn ablate<F: Real>(a: AblateArgs) -> Result<()> {
    let format = report_format(a.format.as_deref(), &a.report)?;
    let base = stage_config(2, a.config.as_deref(), &a.overrides)?;
    let (stage1, from) = load_model::<F>(&a.ckpt)?;
    if from != 1 {
        return Err(Error::Config(format!("{} is a stage-{from} checkpoint; ablation starts from stage 1", a.ckpt.display())));
    }
    let manifest = a.ckpt.join(reo_core::datasetio::checkpoint::MANIFEST_FILE);
    let hash = crc32fast::hash(&std::fs::read(&manifest).map_err(|e| Error::io(&manifest, e))?);
    info!("shared stage-1 checkpoint {} manifest crc32 {hash:08x}", a.ckpt.display());
    let ds = load_data(&a.data)?;
    let index = DialogueIndex::new(&ds.dialogues);
    let train = split_scenes(&ds, Split::Train, None);
    let test = split_scenes(&ds, Split::Test, a.limit);
    let mut heads = Vec::with_capacity(TokenStrategy::ALL.len());
    for strategy in TokenStrategy::ALL {
        let cfg = StageConfig { token_strategy: strategy, ..base.clone() };
        info!("strategy {strategy}: stage config\n{}", cfg.to_text());
        let mut model = stage1.clone();
        let report = train_stage2(&mut model, &train, &index, &cfg)?;
        if let Some(out) = &a.out {
            let dir = out.join(strategy.as_str());
            save_model(&model, 2, &dir)?;
            write_text(&dir.join(LOSS_CURVE_FILE), &report.loss_curve_csv())?;
        }
        heads.push(model);
    }
    let (table, _) = ablate_tokens(&heads, &test, &index)?;
    emit_report(std::slice::from_ref(&table), format, &a.report)?;
    if let Report::Ablation { rows } = &table {
        for r in rows {
            info!("{}: {}", r.strategy.label(), serde_json::to_string(&r.report).map_err(|e| Error::json(&a.report, e))?);
        }
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let format = report_format(a.format.as_deref(), &a.out)?;
    let mut all = Vec::new();
    for p in &a.inputs {
        all.extend(read_json_reports(p)?);
    }
    emit_report(&all, format, &a.out)
}
