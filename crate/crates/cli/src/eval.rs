//! The eval command: classify a labeled CSV in inference mode and emit
//! the metrics report to stdout and metrics.json.

use fatality_core::metrics::{confusion, ConfusionCounts, MetricsReport};
use fatality_core::model::classify;
use fatality_core::tokenizer::{encode, EncodedInput};

use crate::error::CliError;
use crate::settings::Settings;
use crate::EvalArgs;

#[derive(serde::Serialize)]
struct MetricsJson {
    accuracy: Option<f64>,
    precision: Option<f64>,
    recall: Option<f64>,
    f1: Option<f64>,
    confusion: ConfusionJson,
}

#[derive(serde::Serialize)]
struct ConfusionJson {
    tp: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
    tn: u64,
}

fn to_json(report: &MetricsReport) -> MetricsJson {
    let ConfusionCounts {
        true_positives,
        false_positives,
        false_negatives,
        true_negatives,
    } = report.confusion;
    MetricsJson {
        accuracy: report.accuracy,
        precision: report.precision,
        recall: report.recall,
        f1: report.f1,
        confusion: ConfusionJson {
            tp: true_positives,
            fp: false_positives,
            fn_: false_negatives,
            tn: true_negatives,
        },
    }
}

pub fn run(args: EvalArgs) -> Result<(), CliError> {
    let mut settings = Settings::load(args.config.as_deref())?;
    if let Some(v) = args.data {
        settings.data = Some(v);
    }
    if let Some(v) = args.vocab {
        settings.vocab = Some(v);
    }
    if let Some(v) = args.weights {
        settings.weights = Some(v);
    }
    if let Some(v) = args.out {
        settings.out = v;
    }
    if let Some(v) = args.threshold {
        settings.threshold = v;
    }

    let data = settings
        .data
        .clone()
        .ok_or(CliError::MissingPath { flag: "data" })?;
    let weights = settings
        .weights
        .clone()
        .ok_or(CliError::MissingPath { flag: "weights" })?;
    let vocab_path = settings
        .vocab
        .clone()
        .ok_or(CliError::MissingPath { flag: "vocab" })?;

    let (params, model_config, vocab) = crate::data::load_model(&weights, &vocab_path)?;
    let examples = crate::data::load_labeled_csv(&data)?;
    let inputs: Vec<EncodedInput> = examples
        .iter()
        .map(|ex| encode(&ex.text, &vocab, model_config.max_seq))
        .collect();
    let labels: Vec<u8> = examples.iter().map(|ex| ex.label).collect();

    let predicted = classify(&params, &model_config, &inputs, settings.threshold)?;
    let counts = confusion(&predicted, &labels)?;
    let report = MetricsReport::from_counts(counts);

    let json =
        serde_json::to_string_pretty(&to_json(&report)).expect("metrics report serializes");
    println!("{json}");
    crate::data::create_dir(&settings.out)?;
    crate::data::write_file(&settings.out.join("metrics.json"), format!("{json}\n"))?;
    settings.write_run_config()?;
    Ok(())
}
