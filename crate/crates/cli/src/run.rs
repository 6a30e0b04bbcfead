//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use aspair::classifier::{
    export_scores_tsv, import_external_scores, predict_proba, reference_finetune_config,
    train_softmax, train_softmax_with_labels, ModelParams, ProbDist, TrainConfig,
};
use aspair::corpus::{
    grid_expand, parse_semeval, parse_sentihood, AspectSet, LabeledSentence, Task,
};
use aspair::decode::{decode_b_groups, decode_m_groups, write_predictions_tsv, DecodedGroup};
use aspair::error::{Error, Result};
use aspair::metrics::{
    evaluate_semeval, evaluate_sentihood, gold_grid, render_reports_table, EvaluationReport,
};
use aspair::pairs::{
    build_pairs, build_single_groups, read_pairs_tsv, write_pairs_tsv, Method, PairExample,
};

use crate::{Command, TrainOpts};

/// Environment variable naming the default data directory; input paths
/// that do not exist as given are retried relative to it.
pub const DATA_DIR_ENV: &str = "ASPAIR_DATA_DIR";

fn resolve_input(path: &Path) -> PathBuf {
    if path.exists() {
        return path.to_path_buf();
    }
    if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
        let joined = Path::new(&dir).join(path);
        if joined.exists() {
            return joined;
        }
    }
    path.to_path_buf()
}

fn read_input(path: &Path) -> Result<String> {
    let resolved = resolve_input(path);
    fs::read_to_string(&resolved).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", resolved.display()),
        ))
    })
}

fn read_input_bytes(path: &Path) -> Result<Vec<u8>> {
    let resolved = resolve_input(path);
    fs::read(&resolved).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", resolved.display()),
        ))
    })
}

fn write_output(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

/// Input and output paths of one run must not alias.
fn ensure_distinct(inputs: &[&Path], outputs: &[Option<&Path>]) -> Result<()> {
    for output in outputs.iter().flatten() {
        for input in inputs {
            if resolve_input(input) == **output {
                return Err(Error::Validation(format!(
                    "output path '{}' would overwrite an input",
                    output.display()
                )));
            }
        }
    }
    Ok(())
}

/// Dataset flavor selected by `--task`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dataset {
    Sentihood,
    Semeval,
}

impl Dataset {
    fn parse(s: &str) -> Result<Dataset> {
        match s.to_ascii_lowercase().as_str() {
            "sentihood" => Ok(Dataset::Sentihood),
            "semeval" => Ok(Dataset::Semeval),
            other => Err(Error::Validation(format!(
                "unknown task '{other}', expected sentihood or semeval"
            ))),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Dataset::Sentihood => "sentihood",
            Dataset::Semeval => "semeval",
        }
    }

    fn task(self) -> Task {
        match self {
            Dataset::Sentihood => Task::Tabsa,
            Dataset::Semeval => Task::Absa,
        }
    }

    fn default_aspects(self) -> AspectSet {
        match self {
            Dataset::Sentihood => AspectSet::sentihood(),
            Dataset::Semeval => AspectSet::semeval_restaurants(),
        }
    }

    fn polarity_labels(self) -> Vec<String> {
        self.task()
            .polarity_set()
            .iter()
            .map(|p| p.to_string())
            .collect()
    }

    fn parse_corpus(self, document: &str) -> Result<Vec<LabeledSentence>> {
        match self {
            Dataset::Sentihood => parse_sentihood(document),
            Dataset::Semeval => parse_semeval(document),
        }
    }
}

fn aspects_for(dataset: Dataset, override_csv: &Option<String>) -> Result<AspectSet> {
    match override_csv {
        Some(csv) => AspectSet::new(csv.split(',').map(|s| s.trim().to_string()).collect()),
        None => Ok(dataset.default_aspects()),
    }
}

fn load_expanded(
    dataset: Dataset,
    path: &Path,
    aspects: &AspectSet,
) -> Result<Vec<LabeledSentence>> {
    let document = read_input(path)?;
    let sentences = dataset.parse_corpus(&document)?;
    sentences.iter().map(|s| grid_expand(s, aspects)).collect()
}

/// Generates the method's examples over an expanded corpus; the single
/// framing is flattened in group order.
fn examples_for(
    sentences: &[LabeledSentence],
    method: Method,
    aspects: &AspectSet,
) -> Result<Vec<PairExample>> {
    if method == Method::Single {
        let groups = build_single_groups(sentences, aspects)?;
        Ok(groups.into_values().flatten().collect())
    } else {
        build_pairs(sentences, method, aspects)
    }
}

fn echo_config(entries: &[(&str, String)]) {
    let line: Vec<String> = entries.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("config: {}", line.join(" "));
}

fn train_config(opts: &TrainOpts) -> TrainConfig {
    TrainConfig {
        learning_rate: opts.learning_rate,
        epochs: opts.epochs,
        batch_size: opts.batch_size,
        seed: opts.seed,
        hash_bits: opts.hash_bits,
    }
}

fn echo_train_opts(entries: &mut Vec<(&str, String)>, opts: &TrainOpts) {
    entries.push(("learning_rate", opts.learning_rate.to_string()));
    entries.push(("epochs", opts.epochs.to_string()));
    entries.push(("batch_size", opts.batch_size.to_string()));
    entries.push(("seed", opts.seed.to_string()));
    entries.push(("hash_bits", opts.hash_bits.to_string()));
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Convert {
            task,
            method,
            input,
            output,
            aspects,
        } => convert(&task, &method, &input, &output, &aspects),
        Command::Train {
            pairs,
            model_out,
            label_set,
            train,
        } => cmd_train(&pairs, &model_out, &label_set, &train),
        Command::Predict {
            pairs,
            model,
            scores_out,
        } => predict(&pairs, &model, &scores_out),
        Command::Eval {
            task,
            method,
            gold,
            scores,
            report_out,
            predictions_out,
            name,
            aspects,
        } => eval(
            &task,
            &method,
            &gold,
            &scores,
            &report_out,
            &predictions_out,
            &name,
            &aspects,
        ),
        Command::Report { files } => report(&files),
        Command::ExportConfig { out } => {
            echo_config(&[
                ("subcommand", "export-config".into()),
                ("out", out.display().to_string()),
            ]);
            write_output(&out, reference_finetune_config())
        }
        Command::Compare {
            task,
            method,
            train,
            test,
            report_out,
            aspects,
            train_opts,
        } => compare(
            &task,
            &method,
            &train,
            &test,
            &report_out,
            &aspects,
            &train_opts,
        ),
    }
}

fn convert(
    task: &str,
    method: &str,
    input: &Path,
    output: &Path,
    aspects_csv: &Option<String>,
) -> Result<()> {
    let dataset = Dataset::parse(task)?;
    let method = Method::parse(method)?;
    let aspects = aspects_for(dataset, aspects_csv)?;
    ensure_distinct(&[input], &[Some(output)])?;
    echo_config(&[
        ("subcommand", "convert".into()),
        ("task", dataset.as_str().into()),
        ("method", method.to_string()),
        ("input", input.display().to_string()),
        ("output", output.display().to_string()),
        ("aspects", aspects.names().join(",")),
    ]);
    let sentences = load_expanded(dataset, input, &aspects)?;
    let examples = examples_for(&sentences, method, &aspects)?;
    write_output(output, write_pairs_tsv(&examples)?)?;
    println!(
        "wrote {} examples over {} sentences to {}",
        examples.len(),
        sentences.len(),
        output.display()
    );
    Ok(())
}

fn label_set_for(name: &str) -> Result<Option<Vec<String>>> {
    match name.to_ascii_lowercase().as_str() {
        "auto" => Ok(None),
        "binary" => Ok(Some(vec!["yes".into(), "no".into()])),
        "sentihood" => Ok(Some(Dataset::Sentihood.polarity_labels())),
        "semeval" => Ok(Some(Dataset::Semeval.polarity_labels())),
        other => Err(Error::Validation(format!(
            "unknown label set '{other}', expected auto, sentihood, semeval, or binary"
        ))),
    }
}

fn cmd_train(pairs: &Path, model_out: &Path, label_set: &str, opts: &TrainOpts) -> Result<()> {
    ensure_distinct(&[pairs], &[Some(model_out)])?;
    let mut entries = vec![
        ("subcommand", "train".to_string()),
        ("pairs", pairs.display().to_string()),
        ("model_out", model_out.display().to_string()),
        ("label_set", label_set.to_string()),
    ];
    echo_train_opts(&mut entries, opts);
    echo_config(&entries);
    let examples = read_pairs_tsv(&read_input(pairs)?)?;
    let config = train_config(opts);
    let model = match label_set_for(label_set)? {
        Some(labels) => train_softmax_with_labels(&examples, labels, &config)?,
        None => train_softmax(&examples, &config)?,
    };
    write_output(model_out, model.to_bytes())?;
    println!(
        "trained on {} examples; labels {:?}; model written to {}",
        examples.len(),
        model.label_names(),
        model_out.display()
    );
    Ok(())
}

fn predict(pairs: &Path, model_path: &Path, scores_out: &Path) -> Result<()> {
    ensure_distinct(&[pairs, model_path], &[Some(scores_out)])?;
    echo_config(&[
        ("subcommand", "predict".into()),
        ("pairs", pairs.display().to_string()),
        ("model", model_path.display().to_string()),
        ("scores_out", scores_out.display().to_string()),
    ]);
    let examples = read_pairs_tsv(&read_input(pairs)?)?;
    let model = ModelParams::from_bytes(&read_input_bytes(model_path)?)?;
    let dists: Vec<ProbDist> = examples.iter().map(|e| predict_proba(&model, e)).collect();
    let labels = model.label_names().to_vec();
    write_output(scores_out, export_scores_tsv(&dists, &labels)?)?;
    println!(
        "scored {} examples to {}",
        examples.len(),
        scores_out.display()
    );
    Ok(())
}

/// Decodes score rows for the method's examples into grid groups.
fn decode_groups(
    method: Method,
    examples: &[PairExample],
    dists: Vec<ProbDist>,
) -> Result<Vec<DecodedGroup>> {
    let by_uid: BTreeMap<String, ProbDist> =
        dists.into_iter().map(|d| (d.uid.clone(), d)).collect();
    if method.is_b_variant() {
        decode_b_groups(&by_uid, examples)
    } else {
        decode_m_groups(&by_uid, examples)
    }
}

fn evaluate(
    dataset: Dataset,
    gold: &[LabeledSentence],
    groups: &[DecodedGroup],
    aspects: &AspectSet,
) -> Result<EvaluationReport> {
    let grid = gold_grid(gold);
    match dataset {
        Dataset::Sentihood => evaluate_sentihood(&grid, groups, aspects),
        Dataset::Semeval => evaluate_semeval(&grid, groups),
    }
}

#[allow(clippy::too_many_arguments)]
fn eval(
    task: &str,
    method: &str,
    gold: &Path,
    scores: &Path,
    report_out: &Path,
    predictions_out: &Option<PathBuf>,
    name: &Option<String>,
    aspects_csv: &Option<String>,
) -> Result<()> {
    let dataset = Dataset::parse(task)?;
    let method = Method::parse(method)?;
    let aspects = aspects_for(dataset, aspects_csv)?;
    ensure_distinct(
        &[gold, scores],
        &[Some(report_out), predictions_out.as_deref()],
    )?;
    echo_config(&[
        ("subcommand", "eval".into()),
        ("task", dataset.as_str().into()),
        ("method", method.to_string()),
        ("gold", gold.display().to_string()),
        ("scores", scores.display().to_string()),
        ("report_out", report_out.display().to_string()),
        ("aspects", aspects.names().join(",")),
    ]);
    let sentences = load_expanded(dataset, gold, &aspects)?;
    let examples = examples_for(&sentences, method, &aspects)?;
    let expected_labels: Vec<String> = if method.is_b_variant() {
        vec!["yes".into(), "no".into()]
    } else {
        dataset.polarity_labels()
    };
    let dists = import_external_scores(&read_input(scores)?, &expected_labels)?;
    let groups = decode_groups(method, &examples, dists)?;
    if let Some(path) = predictions_out {
        let predictions: Vec<_> = groups.iter().map(DecodedGroup::to_prediction).collect();
        write_output(path, write_predictions_tsv(&predictions))?;
    }
    let report = evaluate(dataset, &sentences, &groups, &aspects)?;
    write_output(report_out, report.to_json())?;
    let name = name.clone().unwrap_or_else(|| {
        scores
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scores".to_string())
    });
    print!("{}", render_reports_table(&[(name, report)]));
    Ok(())
}

fn report(files: &[PathBuf]) -> Result<()> {
    if files.is_empty() {
        return Err(Error::Validation(
            "report needs at least one report file".into(),
        ));
    }
    let listed: Vec<String> = files.iter().map(|f| f.display().to_string()).collect();
    echo_config(&[("subcommand", "report".into()), ("files", listed.join(","))]);
    let mut named = Vec::new();
    for file in files {
        let text = read_input(file)?;
        // Comparison reports carry two nested reports; plain ones carry
        // the report at the top level.
        match serde_json::from_str::<serde_json::Value>(&text) {
            Ok(value) if value.get("single").is_some() && value.get("pair").is_some() => {
                let stem = file
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                for arm in ["single", "pair"] {
                    let report = EvaluationReport::from_json(&value[arm].to_string())
                        .map_err(|e| Error::Parse(format!("{}: {e}", file.display())))?;
                    named.push((format!("{stem}:{arm}"), report));
                }
            }
            _ => {
                let report = EvaluationReport::from_json(&text)
                    .map_err(|e| Error::Parse(format!("{}: {e}", file.display())))?;
                let stem = file
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                named.push((stem, report));
            }
        }
    }
    print!("{}", render_reports_table(&named));
    Ok(())
}

fn compare(
    task: &str,
    method: &str,
    train: &Path,
    test: &Path,
    report_out: &Path,
    aspects_csv: &Option<String>,
    opts: &TrainOpts,
) -> Result<()> {
    let dataset = Dataset::parse(task)?;
    let method = Method::parse(method)?;
    if method == Method::Single {
        return Err(Error::Validation(
            "compare pits the single framing against a pair method; pass a pair method".into(),
        ));
    }
    let aspects = aspects_for(dataset, aspects_csv)?;
    ensure_distinct(&[train, test], &[Some(report_out)])?;
    let mut entries = vec![
        ("subcommand", "compare".to_string()),
        ("task", dataset.as_str().to_string()),
        ("method", method.to_string()),
        ("train", train.display().to_string()),
        ("test", test.display().to_string()),
        ("report_out", report_out.display().to_string()),
        ("aspects", aspects.names().join(",")),
    ];
    echo_train_opts(&mut entries, opts);
    echo_config(&entries);

    let train_sentences = load_expanded(dataset, train, &aspects)?;
    let test_sentences = load_expanded(dataset, test, &aspects)?;
    let config = train_config(opts);
    let polarity_labels = dataset.polarity_labels();

    // Pair arm: one model over every generated pair.
    let pair_labels: Vec<String> = if method.is_b_variant() {
        vec!["yes".into(), "no".into()]
    } else {
        polarity_labels.clone()
    };
    let pair_train = build_pairs(&train_sentences, method, &aspects)?;
    let pair_model = train_softmax_with_labels(&pair_train, pair_labels, &config)?;
    let pair_test = build_pairs(&test_sentences, method, &aspects)?;
    let pair_dists: Vec<ProbDist> = pair_test
        .iter()
        .map(|e| predict_proba(&pair_model, e))
        .collect();
    let pair_groups = decode_groups(method, &pair_test, pair_dists)?;
    let pair_report = evaluate(dataset, &test_sentences, &pair_groups, &aspects)?;

    // Single arm: one model per (target, aspect) sub-dataset. Groups that
    // never occur in training fall back to the zero model (uniform
    // predictions).
    let single_train = build_single_groups(&train_sentences, &aspects)?;
    let single_test = build_single_groups(&test_sentences, &aspects)?;
    let mut models: BTreeMap<_, ModelParams> = BTreeMap::new();
    for (key, members) in &single_train {
        models.insert(
            key.clone(),
            train_softmax_with_labels(members, polarity_labels.clone(), &config)?,
        );
    }
    let fallback = ModelParams::zeros(polarity_labels.clone(), config.hash_dim())?;
    let mut single_examples = Vec::new();
    let mut single_dists = Vec::new();
    for (key, members) in &single_test {
        let model = models.get(key).unwrap_or(&fallback);
        for example in members {
            single_dists.push(predict_proba(model, example));
            single_examples.push(example.clone());
        }
    }
    let single_groups = decode_groups(Method::Single, &single_examples, single_dists)?;
    let single_report = evaluate(dataset, &test_sentences, &single_groups, &aspects)?;

    let comparison = serde_json::json!({
        "task": dataset.as_str(),
        "method": method.as_str(),
        "seed": opts.seed,
        "single": serde_json::to_value(&single_report)
            .expect("report serialization cannot fail"),
        "pair": serde_json::to_value(&pair_report)
            .expect("report serialization cannot fail"),
    });
    write_output(
        report_out,
        serde_json::to_string_pretty(&comparison).expect("json") + "\n",
    )?;
    print!(
        "{}",
        render_reports_table(&[
            ("single".to_string(), single_report),
            (format!("pair-{method}"), pair_report),
        ])
    );
    Ok(())
}
