//! The predict command: one `probability<TAB>label` line per input text,
//! in input order.

use fatality_core::model::{forward, ForwardMode};
use fatality_core::tokenizer::{encode, EncodedInput};
use fatality_core::Scalar;

use crate::error::CliError;
use crate::settings::Settings;
use crate::PredictArgs;

pub fn run(args: PredictArgs) -> Result<(), CliError> {
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

    let texts: Vec<String> = match (&settings.data, args.texts.is_empty()) {
        (Some(_), false) => return Err(CliError::PredictInputConflict),
        (None, true) => return Err(CliError::PredictInputMissing),
        (Some(path), true) => crate::data::read_file(path)?
            .lines()
            .map(str::to_string)
            .collect(),
        (None, false) => args.texts,
    };

    let weights = settings
        .weights
        .clone()
        .ok_or(CliError::MissingPath { flag: "weights" })?;
    let vocab_path = settings
        .vocab
        .clone()
        .ok_or(CliError::MissingPath { flag: "vocab" })?;
    let (params, model_config, vocab) = crate::data::load_model(&weights, &vocab_path)?;

    if !texts.is_empty() {
        let inputs: Vec<EncodedInput> = texts
            .iter()
            .map(|text| encode(text, &vocab, model_config.max_seq))
            .collect();
        let output = forward(&params, &model_config, &inputs, ForwardMode::Inference)?;
        for p in output.probabilities {
            let probability = p.as_f64();
            let label = u8::from(probability >= settings.threshold);
            println!("{probability:.6}\t{label}");
        }
    }
    settings.write_run_config()?;
    Ok(())
}
