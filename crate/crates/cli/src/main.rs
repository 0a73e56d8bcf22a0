use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ellpart::dataset::{self, CsvOptions, LabelColumn, LabeledDataset};
use ellpart::{store, Classifier, Config, Label, PartitionModel};

#[derive(Parser)]
#[command(name = "ellpart", version, about = "Ellipsoidal partitioning classifier with trust scores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition a labelled CSV and write a model file.
    Train {
        csv: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        params: ParamArgs,
        /// Model file to write.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Label every row of a CSV with a trained model.
    Predict {
        model: PathBuf,
        csv: PathBuf,
        /// Column to ignore in the input (e.g. ground truth), by name or index.
        #[arg(long)]
        label_col: Option<String>,
        #[arg(long)]
        no_header: bool,
        /// Override the abstain band stored in the model.
        #[arg(long)]
        abstain_band: Option<f64>,
        /// Output CSV; stdout when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Train and score on held-out splits.
    Eval {
        csv: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        params: ParamArgs,
        /// Also write every held-out prediction to this CSV.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Overlap ratio between the ellipsoids of two classes.
    Ovr {
        csv: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Class names to compare; defaults to the first two.
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        classes: Option<Vec<String>>,
        #[arg(long, default_value_t = Config::default().tol_fit)]
        tol_fit: f64,
    },
    /// Write a synthetic dataset.
    Synth {
        kind: SynthKind,
        /// Total points (circles, moons) or points per class (gaussians).
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        /// Distance between Gaussian means.
        #[arg(long, default_value_t = 3.0)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Render a 2-D model and its data as SVG.
    Plot {
        model: PathBuf,
        csv: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Xor,
    Circles,
    Moons,
    Gaussians,
}

#[derive(Args)]
struct DataArgs {
    /// Label column by name or 0-based index; defaults to the last column.
    #[arg(long)]
    label_col: Option<String>,
    #[arg(long)]
    no_header: bool,
    /// Keep only rows where COLUMN equals VALUE; repeatable.
    #[arg(long, value_name = "COLUMN=VALUE")]
    filter: Vec<String>,
}

impl DataArgs {
    fn options(&self) -> Result<CsvOptions> {
        let label = match &self.label_col {
            None => LabelColumn::Last,
            Some(s) if !self.no_header => LabelColumn::Name(s.clone()),
            Some(s) => LabelColumn::Index(s.parse().with_context(|| format!("label column {s:?} is not an index"))?),
        };
        let filters = self
            .filter
            .iter()
            .map(|f| match f.split_once('=') {
                Some((c, v)) => Ok((c.to_string(), v.to_string())),
                None => bail!("filter {f:?} is not of the form COLUMN=VALUE"),
            })
            .collect::<Result<_>>()?;
        Ok(CsvOptions { label, has_header: !self.no_header, filters })
    }

    fn load(&self, path: &Path) -> Result<LabeledDataset> {
        dataset::load_csv(path, &self.options()?).with_context(|| format!("reading {}", path.display()))
    }
}

#[derive(Args)]
struct ParamArgs {
    /// Opposite-label points an ellipsoid may hold.
    #[arg(long, default_value_t = 0)]
    n_imp: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = Config::default().tol_fit)]
    tol_fit: f64,
    #[arg(long, default_value_t = Config::default().tol_qp)]
    tol_qp: f64,
    #[arg(long, default_value_t = Config::default().tol_membership)]
    tol_membership: f64,
    #[arg(long, default_value_t = Config::default().abstain_band)]
    abstain_band: f64,
    /// Constant-feature jitter half-width, relative to the feature magnitude.
    #[arg(long, default_value_t = Config::default().jitter_radius_frac)]
    jitter: f64,
    /// Cross-validation folds; below 2 uses one stratified split.
    #[arg(long, default_value_t = 0)]
    folds: usize,
    #[arg(long, default_value_t = Config::default().test_fraction)]
    test_fraction: f64,
}

impl ParamArgs {
    fn config(&self) -> Result<Config> {
        let config = Config {
            n_imp: self.n_imp,
            tol_fit: self.tol_fit,
            tol_qp: self.tol_qp,
            tol_membership: self.tol_membership,
            abstain_band: self.abstain_band,
            jitter_radius_frac: self.jitter,
            seed: self.seed,
            folds: self.folds,
            test_fraction: self.test_fraction,
        };
        config.validate()?;
        Ok(config)
    }
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

fn print_model(name: &str, model: &PartitionModel) {
    println!("model {name}: {} positive, {} negative training points", model.totals.positive, model.totals.negative);
    for log in &model.history {
        let created = |c: Option<usize>| c.map_or("-".to_string(), |i| format!("impurity {i}"));
        println!(
            "  iteration {}: {}positive {}, negative {}; removed {} + {}, isolated {}, refine steps {}",
            log.iteration,
            if log.disjoint { "disjoint; " } else { "" },
            created(log.created_positive),
            created(log.created_negative),
            log.removed_positive,
            log.removed_negative,
            log.isolated,
            log.refine_steps
        );
    }
    let uncovered = model
        .training_points()
        .filter(|(p, label)| {
            !model.partitions().any(|part| part.label == *label && part.ellipsoid.contains(p, model.config.tol_membership).unwrap_or(false))
        })
        .count();
    let main = model.positive.len() + model.negative.len();
    println!(
        "  {}, {} ({} positive, {} negative), {}, {} unpartitioned",
        plural(model.iterations, "iteration"),
        plural(main, "ellipsoid"),
        model.positive.len(),
        model.negative.len(),
        plural(model.leftovers.len(), "leftover point"),
        uncovered
    );
    for (id, part) in model.partitions().enumerate() {
        println!(
            "    E{id} {:?} n={} m={} {:?}",
            part.label, part.counts.positive, part.counts.negative, part.origin
        );
    }
}

fn model_name(classifier: &Classifier, index: usize) -> String {
    if classifier.models.len() == 1 {
        format!("{} vs {}", classifier.class_names[1], classifier.class_names[0])
    } else {
        format!("{} vs rest", classifier.class_names[index])
    }
}

fn train(csv: &Path, data: &DataArgs, params: &ParamArgs, out: &Path) -> Result<()> {
    let config = params.config()?;
    let d = data.load(csv)?;
    let classifier = Classifier::train(&d, &config)?;
    for (i, m) in classifier.models.iter().enumerate() {
        print_model(&model_name(&classifier, i), m);
    }
    store::save_classifier(&classifier, out).with_context(|| format!("writing {}", out.display()))?;
    let iterations: usize = classifier.models.iter().map(|m| m.iterations).sum();
    let ellipsoids: usize = classifier.models.iter().map(|m| m.positive.len() + m.negative.len()).sum();
    println!("{}, {}", plural(iterations, "iteration"), plural(ellipsoids, "ellipsoid"));
    Ok(())
}

fn predict(model: &Path, csv: &Path, label_col: Option<String>, no_header: bool, band: Option<f64>, out: Option<PathBuf>) -> Result<()> {
    let classifier = store::load_classifier(model).with_context(|| format!("reading {}", model.display()))?;
    let mut config = classifier.models[0].config.clone();
    if let Some(b) = band {
        config.abstain_band = b;
        config.validate()?;
    }
    let label = match label_col {
        None => None,
        Some(s) if no_header => Some(LabelColumn::Index(s.parse().with_context(|| format!("label column {s:?} is not an index"))?)),
        Some(s) => Some(LabelColumn::Name(s)),
    };
    let points = dataset::load_points(csv, !no_header, label.as_ref()).with_context(|| format!("reading {}", csv.display()))?;
    if let Some(p) = points.first() {
        if p.len() != classifier.dim() {
            bail!("dimension mismatch: model has {} features, data has {}", classifier.dim(), p.len());
        }
    }
    let mut writer: Box<dyn Write> = match &out {
        Some(path) => Box::new(std::fs::File::create(path).with_context(|| format!("writing {}", path.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(writer, "row,label,posterior,odds_ratio,rule,abstain")?;
    for (row, z) in points.iter().enumerate() {
        let p = classifier.predict(z, &config)?;
        let r = &p.report;
        writeln!(
            writer,
            "{row},{},{},{},{},{}",
            classifier.class_names[p.class],
            r.posterior,
            r.odds_ratio,
            r.rule_fired.as_str(),
            r.abstain
        )?;
    }
    writer.flush()?;
    Ok(())
}

fn eval(csv: &Path, data: &DataArgs, params: &ParamArgs, predictions: Option<PathBuf>) -> Result<()> {
    let config = params.config()?;
    let d = data.load(csv)?;
    let report = ellpart::evaluate(&d, &config)?;
    let n = report.predictions.len();
    println!("folds: {}", report.folds);
    println!("test predictions: {n}");
    println!("accuracy: {:.4}", report.accuracy);
    println!("abstained: {} ({:.1}%)", report.abstained, 100.0 * report.abstained as f64 / n.max(1) as f64);
    match report.answered_accuracy {
        Some(a) => println!("accuracy without abstentions: {a:.4}"),
        None => println!("accuracy without abstentions: n/a (every prediction abstained)"),
    }
    println!("regions:");
    println!("  fold model region rule n m trust hits misses");
    for r in &report.regions {
        println!(
            "  {} {} {} {} {} {} {:.4} {} {}",
            r.fold,
            r.model,
            r.region,
            r.rule.as_str(),
            r.counts.positive,
            r.counts.negative,
            r.trust,
            r.hits,
            r.misses
        );
    }
    if let Some(path) = predictions {
        let mut w = std::fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        writeln!(w, "fold,row,truth,predicted,posterior,rule,abstain")?;
        for p in &report.predictions {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                p.fold,
                p.index,
                d.class_names[p.truth],
                d.class_names[p.predicted],
                p.posterior,
                p.rule.as_str(),
                p.abstain
            )?;
        }
    }
    Ok(())
}

fn ovr(csv: &Path, data: &DataArgs, classes: Option<Vec<String>>, tol_fit: f64) -> Result<()> {
    let d = data.load(csv)?;
    if d.n_classes() < 2 {
        bail!("need at least two classes, found {}", d.n_classes());
    }
    let (a, b) = match classes {
        Some(names) => {
            let find = |name: &str| {
                d.class_names.iter().position(|c| c == name).with_context(|| format!("no class named {name:?}"))
            };
            (find(&names[0])?, find(&names[1])?)
        }
        None => (0, 1),
    };
    let config = Config { tol_fit, ..Config::default() };
    config.validate()?;
    let r = dataset::ovr_report(&d, a, b, &config).map_err(|e| match e {
        ellpart::Error::RankDeficient { .. } => anyhow::anyhow!("{e}; try jittering constant features"),
        other => other.into(),
    })?;
    match r.overlap_volume {
        Some(v) => println!("overlap volume: {v:.6e}"),
        None => println!("overlap volume: absent (fewer than {} points in both ellipsoids)", d.n + 1),
    }
    println!("class volume ovr inside outside");
    for i in 0..2 {
        println!(
            "{} {:.6e} {:.6} {} {}",
            d.class_names[r.classes[i]], r.class_volume[i], r.ovr[i], r.inside[i], r.outside[i]
        );
    }
    Ok(())
}

fn synth(kind: SynthKind, n: usize, noise: f64, separation: f64, seed: u64, out: &Path) -> Result<()> {
    let d = match kind {
        SynthKind::Xor => dataset::gen_xor(),
        SynthKind::Circles => dataset::gen_circles(n, noise, seed)?,
        SynthKind::Moons => dataset::gen_moons(n, noise, seed)?,
        SynthKind::Gaussians => dataset::gen_gaussians(n, separation, seed)?,
    };
    dataset::save_csv(&d, out).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} rows to {}", d.len(), out.display());
    Ok(())
}

fn plot(model: &Path, csv: &Path, data: &DataArgs, out: &Path) -> Result<()> {
    let classifier = store::load_classifier(model).with_context(|| format!("reading {}", model.display()))?;
    let d = data.load(csv)?;
    ellpart::plot::write_svg(&classifier, &d, out)?;
    let shapes: usize = classifier.models.iter().map(|m| m.partitions().filter(|p| classifier.models.len() == 1 || p.label == Label::Positive).count()).sum();
    println!("wrote {} points and {} ellipses to {}", d.len(), shapes, out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { csv, data, params, out } => train(&csv, &data, &params, &out),
        Command::Predict { model, csv, label_col, no_header, abstain_band, out } => {
            predict(&model, &csv, label_col, no_header, abstain_band, out)
        }
        Command::Eval { csv, data, params, predictions } => eval(&csv, &data, &params, predictions),
        Command::Ovr { csv, data, classes, tol_fit } => ovr(&csv, &data, classes, tol_fit),
        Command::Synth { kind, n, noise, separation, seed, out } => synth(kind, n, noise, separation, seed, &out),
        Command::Plot { model, csv, data, out } => plot(&model, &csv, &data, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
