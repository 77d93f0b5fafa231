//! The train command: fine-tune on split files and write final weights,
//! best-validation weights, and the per-epoch log.

use std::fmt::Write as _;

use fatality_core::model::{init_params, ParameterSet};
use fatality_core::training;

use crate::error::CliError;
use crate::settings::Settings;
use crate::TrainArgs;

#[derive(serde::Serialize)]
struct EpochRecord {
    epoch: usize,
    train_loss: f64,
    val_accuracy: Option<f64>,
    val_precision: Option<f64>,
    val_recall: Option<f64>,
    val_f1: Option<f64>,
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let mut settings = Settings::load(args.config.as_deref())?;
    if let Some(v) = args.data {
        settings.data = Some(v);
    }
    if let Some(v) = args.vocab {
        settings.vocab = Some(v);
    }
    if let Some(v) = args.out {
        settings.out = v;
    }
    if let Some(v) = args.seed {
        settings.seed = v;
    }
    if let Some(v) = args.epochs {
        settings.epochs = v;
    }
    if let Some(v) = args.lr {
        settings.lr = v;
    }
    if let Some(v) = args.batch_size {
        settings.batch_size = v;
    }
    if let Some(v) = args.warmup_fraction {
        settings.warmup_fraction = v;
    }
    if let Some(v) = args.dropout {
        settings.dropout = v;
    }
    if args.freeze_encoder {
        settings.freeze_encoder = true;
    }

    let data_dir = settings
        .data
        .clone()
        .ok_or(CliError::MissingPath { flag: "data" })?;
    let vocab_path = settings
        .vocab
        .clone()
        .ok_or(CliError::MissingPath { flag: "vocab" })?;
    let vocab = crate::data::load_vocab(&vocab_path)?;
    let train_set = crate::data::load_labeled_csv(&data_dir.join("train.csv"))?;
    let validation_path = data_dir.join("validation.csv");
    let validation = if validation_path.exists() {
        crate::data::load_labeled_csv(&validation_path)?
    } else {
        eprintln!(
            "warning: {} not found, training without validation",
            validation_path.display()
        );
        Vec::new()
    };

    let model_config = settings.model_config(vocab.len());
    let train_config = settings.train_config();
    let initial: ParameterSet<f32> = init_params(&model_config, settings.seed);
    let outcome = training::train(
        initial,
        &train_set,
        &validation,
        &vocab,
        &model_config,
        &train_config,
    )?;

    crate::data::create_dir(&settings.out)?;
    crate::data::save_weights(
        &settings.out.join("weights_final.bcw"),
        &outcome.final_params,
        &model_config,
    )?;
    crate::data::save_weights(
        &settings.out.join("weights_best.bcw"),
        &outcome.best_params,
        &model_config,
    )?;

    let mut log_lines = String::new();
    for entry in &outcome.log {
        let metrics = entry.validation.as_ref();
        let record = EpochRecord {
            epoch: entry.epoch,
            train_loss: entry.train_loss,
            val_accuracy: metrics.and_then(|m| m.accuracy),
            val_precision: metrics.and_then(|m| m.precision),
            val_recall: metrics.and_then(|m| m.recall),
            val_f1: metrics.and_then(|m| m.f1),
        };
        let json = serde_json::to_string(&record).expect("epoch record serializes");
        let _ = writeln!(log_lines, "{json}");
        println!(
            "epoch={} train_loss={:.6} val_accuracy={} val_precision={} val_recall={} val_f1={}",
            record.epoch,
            record.train_loss,
            fmt_metric(record.val_accuracy),
            fmt_metric(record.val_precision),
            fmt_metric(record.val_recall),
            fmt_metric(record.val_f1),
        );
    }
    crate::data::write_file(&settings.out.join("training_log.jsonl"), &log_lines)?;
    settings.write_run_config()?;

    println!(
        "trained {} epochs over {} examples; best epoch {} written to weights_best.bcw",
        settings.epochs,
        train_set.len(),
        outcome.best_epoch
    );
    Ok(())
}

fn fmt_metric(value: Option<f64>) -> String {
    value.map_or_else(|| "none".into(), |v| format!("{v:.6}"))
}
