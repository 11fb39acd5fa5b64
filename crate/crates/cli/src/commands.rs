use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ease_core::data::synthetic::{generate, SyntheticConfig};
use ease_core::eval::diagnostics::{rec_count_curve, tail_share, weight_histogram, write_rec_counts_csv};
use ease_core::eval::{published, EvalOptions};
use ease_core::ranking::write_ranked_lists;
use ease_core::solver::solve_with_diagnostics;
use ease_core::{
    build_gram, evaluate as run_eval, ingest as run_ingest, load_matrix, read_records, recommend_batch, save_matrix,
    split_strong, split_weak, CosineItemItem, EvalSplit, GramMatrix, IngestOptions, InteractionMatrix, Popularity,
    RankedList, Report, Scorer, SparseRow, SplitMode, Variant, Vocab, WeightModel,
};
use serde_json::json;

use crate::{
    Baseline, EvaluateArgs, GramArgs, IngestArgs, InspectArgs, RecommendArgs, SplitArgs, Subset, SynthArgs, TrainArgs,
};

const MATRIX_FILE: &str = "matrix.txt";

fn is_split_dir(path: &Path) -> bool {
    path.is_dir() && path.join("manifest.json").is_file()
}

/// A matrix file, a split directory (its training matrix) or a directory
/// holding `matrix.txt`.
fn resolve_matrix(path: &Path) -> PathBuf {
    if is_split_dir(path) {
        path.join("train.txt")
    } else if path.is_dir() {
        path.join(MATRIX_FILE)
    } else {
        path.to_path_buf()
    }
}

fn load_input_matrix(path: &Path) -> Result<InteractionMatrix> {
    let file = resolve_matrix(path);
    load_matrix(&file).with_context(|| format!("loading {}", file.display()))
}

fn summary(x: &InteractionMatrix) -> String {
    format!("users={} items={} nnz={}", x.n_users(), x.n_items(), x.nnz())
}

fn write_matrix_dir(x: &InteractionMatrix, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    save_matrix(x, &dir.join(MATRIX_FILE))?;
    Ok(())
}

fn output_writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p != Path::new("-") => {
            Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let opts = IngestOptions {
        min_user_activity: a.min_user_activity,
        min_item_activity: a.min_item_activity,
        binarize: a.binarize,
        value_threshold: a.value_threshold,
    };
    let x = run_ingest(read_records(BufReader::new(file), a.delimiter), &opts)
        .with_context(|| format!("reading {}", a.input.display()))?;
    write_matrix_dir(&x, &a.output)?;
    println!("{}", summary(&x));
    Ok(())
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        n_users: a.users,
        n_items: a.items,
        n_clusters: a.clusters,
        min_items_per_user: a.min_items,
        max_items_per_user: a.max_items,
        seed: a.seed,
        ..SyntheticConfig::default()
    };
    let x = generate(&cfg)?;
    write_matrix_dir(&x, &a.output)?;
    println!("{}", summary(&x));
    Ok(())
}

pub fn split(a: SplitArgs) -> Result<()> {
    let x = load_input_matrix(&a.input)?;
    let mode: SplitMode = a.mode.into();
    let (split, params) = match mode {
        SplitMode::Strong => (
            split_strong(&x, a.val_users, a.test_users, a.fold_in_frac, a.seed)?,
            json!({"val_users": a.val_users, "test_users": a.test_users, "fold_in_frac": a.fold_in_frac}),
        ),
        SplitMode::Weak => (split_weak(&x, a.train_frac, a.seed)?, json!({"train_frac": a.train_frac})),
    };
    let manifest = split.save(&a.output, params)?;
    println!(
        "train_users={} validation_users={} test_users={} items={} skipped={} users_disjoint={}",
        manifest.n_train_users,
        manifest.n_validation_users,
        manifest.n_test_users,
        manifest.n_items,
        manifest.skipped.len(),
        manifest.users_disjoint
    );
    Ok(())
}

pub fn gram(a: GramArgs) -> Result<()> {
    let x = load_input_matrix(&a.input)?;
    let g = build_gram(&x, a.gram_mode.into())?;
    g.save(&a.output)?;
    println!("items={} users={} mode={}", g.n_items(), g.n_users_used(), g.mode());
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let gram = match (&a.gram, &a.input) {
        (Some(path), _) => GramMatrix::load(path).with_context(|| format!("loading {}", path.display()))?,
        (None, Some(input)) => build_gram(&load_input_matrix(input)?, a.gram_mode.into())?,
        (None, None) => bail!("one of --input or --gram is required"),
    };
    let n = gram.n_items();
    let start = Instant::now();
    let (mut model, diag) = solve_with_diagnostics(gram, a.lambda)?;
    let secs = start.elapsed().as_secs_f64();
    if a.clamp_nonneg {
        model = model.clamp_nonneg();
    }
    model.save(&a.output)?;
    println!(
        "items={n} lambda={} variant={} negative_fraction={:.4} min_pivot={:.6e} solve_seconds={secs:.3}",
        a.lambda,
        model.variant().as_str(),
        diag.negative_fraction,
        diag.min_pivot
    );
    Ok(())
}

fn model_name(model: &WeightModel) -> &'static str {
    match model.variant() {
        Variant::Full => "ease",
        Variant::ClampedNonneg => "ease-nonneg",
    }
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let split = EvalSplit::load(&a.split).with_context(|| format!("loading split {}", a.split.display()))?;
    let (name, scorer): (&str, Box<dyn Scorer>) = match (&a.model, a.baseline) {
        (Some(path), _) => {
            let m = WeightModel::load(path).with_context(|| format!("loading {}", path.display()))?;
            (model_name(&m), Box::new(m))
        }
        (None, Some(Baseline::Popularity)) => ("popularity", Box::new(Popularity::fit(&split.train))),
        (None, Some(Baseline::Cosine)) => ("cosine", Box::new(CosineItemItem::fit(&split.train)?)),
        (None, None) => bail!("one of --model or --baseline is required"),
    };
    let users = match a.on {
        Subset::Test => &split.test,
        Subset::Validation => &split.validation,
    };
    let metrics = &a.metrics.0;
    let reports = run_eval(scorer.as_ref(), users, &split.item_vocab_hash(), metrics, EvalOptions::default())?;
    let mut report = Report::new(name, &a.dataset, &split, &reports);
    report.split.n_eval_users = users.len();
    if let Some(path) = &a.report {
        report.save(path)?;
    }
    if a.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.table());
    }
    if a.compare_paper {
        compare_paper(&report, name);
    }
    Ok(())
}

fn compare_paper(report: &Report, model: &str) {
    let dataset = report.dataset.to_ascii_lowercase();
    let mut printed = false;
    for m in &report.metrics {
        let spec: ease_core::MetricSpec = match format!("{}@{}", m.name, m.k).parse() {
            Ok(s) => s,
            Err(_) => continue,
        };
        let published = if dataset == "ml-10m" && spec == ease_core::MetricSpec::ndcg(10) {
            let key = if model == "cosine" { "item-item" } else { model };
            published::lookup_weak(key)
        } else {
            published::lookup(&dataset, model).and_then(|row| row.value(&spec))
        };
        if let Some(p) = published {
            println!("{spec:<10} ours {:.4} published {p:.4} delta {:+.4}", m.mean, m.mean - p);
            printed = true;
        }
    }
    if !printed {
        eprintln!("note: no published numbers for model `{model}` on dataset `{}`", report.dataset);
    }
}

/// Named histories: a split directory gives its test users' fold-ins,
/// anything else is read as a matrix with one history per row.
enum Histories {
    Split(EvalSplit),
    Matrix(InteractionMatrix),
}

impl Histories {
    fn load(path: &Path) -> Result<Self> {
        if is_split_dir(path) {
            Ok(Histories::Split(EvalSplit::load(path)?))
        } else {
            Ok(Histories::Matrix(load_input_matrix(path)?))
        }
    }

    fn items(&self) -> &Vocab {
        match self {
            Histories::Split(s) => s.train.items(),
            Histories::Matrix(x) => x.items(),
        }
    }

    fn rows(&self) -> Vec<(&str, SparseRow<'_>)> {
        match self {
            Histories::Split(s) => s.test.iter().map(|u| (u.user.as_str(), u.fold_in.as_row())).collect(),
            Histories::Matrix(x) => x.users().ids().iter().map(String::as_str).zip(x.rows()).collect(),
        }
    }

    fn recommend(&self, model: &WeightModel, k: usize, exclude: bool) -> Result<Vec<RankedList>> {
        model.vocab_hash().ensure_eq(&self.items().hash())?;
        Ok(recommend_batch(&self.rows(), model, k, exclude)?)
    }
}

pub fn recommend(a: RecommendArgs) -> Result<()> {
    let model = WeightModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let lists = Histories::load(&a.input)?.recommend(&model, a.k, !a.include_seen)?;
    let mut out = output_writer(a.output.as_deref())?;
    write_ranked_lists(&lists, model.items(), &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn inspect(a: InspectArgs) -> Result<()> {
    let model = WeightModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let hist = weight_histogram(&model, a.bins);
    println!(
        "items={} lambda={} gram_mode={} variant={} negative_fraction={:.4} mean_weight={:.6e}",
        model.n_items(),
        model.lambda(),
        model.gram_mode(),
        model.variant().as_str(),
        hist.negative_fraction,
        hist.mean
    );
    if let Some(path) = &a.weights_histogram {
        let mut out = output_writer(Some(path))?;
        hist.write_csv(&mut out)?;
        out.flush()?;
    }
    if let (Some(path), Some(input)) = (&a.rec_counts, &a.input) {
        let lists = Histories::load(input)?.recommend(&model, a.k, true)?;
        let curve = rec_count_curve(&lists, model.n_items());
        let distinct = curve.iter().filter(|c| c.count > 0).count();
        let mut out = output_writer(Some(path))?;
        write_rec_counts_csv(&curve, &mut out)?;
        out.flush()?;
        println!(
            "lists={} distinct_items={distinct} tail_share_beyond_top{}={:.4}",
            lists.len(),
            a.k,
            tail_share(&curve, a.k)
        );
    }
    Ok(())
}
