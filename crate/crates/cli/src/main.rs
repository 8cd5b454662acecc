use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use askwell_core::corpus::{ingest, stratified_split, Corpus, FieldMap, IngestReport};
use askwell_core::features::{
    encode, extract_corpus, fit_encoder, Lexicons, NarrativeLexicons, Scheme, SentimentLexicons,
};
use askwell_core::scoring::{ModelArtifact, Scorer};
use askwell_core::similarity::{
    pairs_from_corpus, read_pair_records, resolve_pairs, run_similarity_study, Metric, NullModel,
};
use askwell_core::studies::{
    run_interpretation_curves, run_prediction_study, run_reciprocity_study, run_regression_study,
    run_topic_study, temporal_summary, train_artifact, ReciprocityDefinition, StudyConfig,
};
use askwell_server::{ModelSlot, ServerConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

/// Request-success analytics: ingest a corpus, run the studies, train and
/// serve a scoring model.
#[derive(Parser, Debug)]
#[command(name = "askwell", version)]
struct Cli {
    /// Seed for splits, factorizations and null samples.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML file with study settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving every report.
    #[arg(long, global = true, default_value = "askwell-out")]
    out: PathBuf,
    /// Directory with narratives/*.txt and sentiment/{positive,negative}.txt
    /// replacing the built-in word lists.
    #[arg(long, global = true)]
    lexicons: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Source {
    /// Requests file, or a directory holding requests.jsonl and optionally
    /// histories.jsonl.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    histories: Option<PathBuf>,
    /// Field names of the input: canonical, or the public single-request
    /// release.
    #[arg(long, value_enum, default_value_t = Format::Canonical)]
    format: Format,
    /// TOML field map overriding --format.
    #[arg(long)]
    fieldmap: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Canonical,
    Raop,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchemeArg {
    Regression,
    Prediction,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Regression => Scheme::Regression,
            SchemeArg::Prediction => Scheme::Prediction,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MetricArg {
    Intersection,
    Jaccard,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NullArg {
    Uniform,
    DegreePreserving,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate and normalize a corpus into canonical JSON lines.
    Ingest(Source),
    /// Stratified development/test split.
    Split {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        dev_fraction: Option<f64>,
    },
    /// Sparse topic factorization with per-topic success rates.
    Topics {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Raw and encoded feature tables.
    Featurize {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value_t = SchemeArg::Regression)]
        scheme: SchemeArg,
        /// Encode with this artifact's frozen encoder and scheme instead of
        /// fitting one on the corpus.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Fit a scoring model on the given (development) corpus.
    Train {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value_t = SchemeArg::Regression)]
        scheme: SchemeArg,
        /// Fixed penalty; chosen by cross-validation when absent.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Unpenalized regression with likelihood-ratio tests per factor.
    RegressionStudy(Source),
    /// Held-out AUC of nested feature sets.
    PredictionStudy(Source),
    /// Follow-through rates among successful requesters, for every
    /// definition of reciprocation.
    ReciprocityStudy {
        #[command(flatten)]
        source: Source,
        /// Extra giver/receiver pairs (JSON lines).
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        high_status_fraction: Option<f64>,
    },
    /// Interest similarity of actual giver/receiver pairs against a null.
    SimilarityStudy {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Both metrics when absent.
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
        #[arg(long)]
        n_null: Option<usize>,
        #[arg(long, value_enum)]
        null_model: Option<NullArg>,
        #[arg(long)]
        bandwidth: Option<f64>,
    },
    /// Success-probability curves over length and karma per narrative.
    Curves {
        /// Artifact to evaluate; the built-in reference model otherwise.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// HTTP scoring service.
    Serve {
        #[arg(long, env = "ASKWELL_MODEL")]
        model: Option<PathBuf>,
        /// Serve the built-in reference model when no artifact is given.
        #[arg(long)]
        reference: bool,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Allowed browser origin (repeatable); any origin when omitted.
        #[arg(long = "cors-origin")]
        cors_origins: Vec<String>,
        /// Poll the artifact file for changes every N seconds.
        #[arg(long)]
        reload_secs: Option<u64>,
    },
}

struct Ctx {
    out: PathBuf,
    cfg: StudyConfig,
    lexicons: Lexicons,
}

impl Ctx {
    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
        let path = self.out_dir()?.join(name);
        fs::write(&path, serde_json::to_string_pretty(value)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn load_lexicons(dir: Option<&Path>) -> Result<Lexicons> {
    let Some(dir) = dir else {
        return Ok(Lexicons::default());
    };
    let narratives = NarrativeLexicons::load(&dir.join("narratives"))
        .with_context(|| format!("narrative lexicons under {}", dir.display()))?;
    let sentiment_dir = dir.join("sentiment");
    let sentiment = if sentiment_dir.is_dir() {
        SentimentLexicons::load(&sentiment_dir.join("positive.txt"), &sentiment_dir.join("negative.txt"))?
    } else {
        SentimentLexicons::default()
    };
    Ok(Lexicons { narratives, sentiment })
}

impl Source {
    fn ingest(&self) -> Result<IngestReport> {
        let (requests, mut histories) = if self.corpus.is_dir() {
            let h = self.corpus.join("histories.jsonl");
            (self.corpus.join("requests.jsonl"), h.exists().then_some(h))
        } else {
            (self.corpus.clone(), None)
        };
        if self.histories.is_some() {
            histories.clone_from(&self.histories);
        }
        let map = match (&self.fieldmap, self.format) {
            (Some(p), _) => FieldMap::load(p)?,
            (None, Format::Raop) => FieldMap::raop_public(),
            (None, Format::Canonical) => FieldMap::default(),
        };
        let report = ingest(&requests, histories.as_deref(), &map)
            .with_context(|| format!("ingesting {}", requests.display()))?;
        if !report.rejected.is_empty() {
            log::warn!("{} malformed records skipped", report.rejected.len());
        }
        if report.corpus.is_empty() {
            bail!("{} contains no valid requests", requests.display());
        }
        Ok(report)
    }

    fn load(&self) -> Result<Corpus> {
        Ok(self.ingest()?.corpus)
    }
}

fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let histories = (!corpus.histories().is_empty()).then(|| dir.join("histories.jsonl"));
    corpus.write(&dir.join("requests.jsonl"), histories.as_deref())?;
    Ok(())
}

fn corpus_summary(corpus: &Corpus) -> Result<serde_json::Value> {
    Ok(json!({
        "n_requests": corpus.len(),
        "n_users_with_history": corpus.histories().len(),
        "success_rate": corpus.success_rate(),
        "epoch": corpus.epoch()?,
        "fingerprint": corpus.fingerprint(),
    }))
}

fn cmd_ingest(ctx: &Ctx, source: &Source) -> Result<()> {
    let report = source.ingest()?;
    let corpus = &report.corpus;
    write_corpus(corpus, ctx.out_dir()?)?;
    let mut w = csv::Writer::from_path(ctx.out.join("rejected.csv"))?;
    for r in &report.rejected {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut summary = corpus_summary(corpus)?;
    summary["n_rejected"] = json!(report.rejected.len());
    summary["temporal"] = serde_json::to_value(temporal_summary(corpus)?)?;
    ctx.write_json("ingest.json", &summary)?;
    println!(
        "ingested {} requests ({} rejected), success rate {:.4}",
        corpus.len(),
        report.rejected.len(),
        corpus.success_rate().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_split(ctx: &Ctx, source: &Source, dev_fraction: Option<f64>) -> Result<()> {
    let corpus = source.load()?;
    let fraction = dev_fraction.unwrap_or(ctx.cfg.dev_fraction);
    let (dev, test) = stratified_split(&corpus, fraction, ctx.cfg.seed)?;
    let out = ctx.out_dir()?;
    write_corpus(&dev, &out.join("dev"))?;
    write_corpus(&test, &out.join("test"))?;
    ctx.write_json(
        "split.json",
        &json!({
            "seed": ctx.cfg.seed,
            "dev_fraction": fraction,
            "dev": corpus_summary(&dev)?,
            "test": corpus_summary(&test)?,
        }),
    )?;
    println!("dev {} / test {}", dev.len(), test.len());
    Ok(())
}

fn cmd_topics(ctx: &Ctx, source: &Source, k: Option<usize>) -> Result<()> {
    let corpus = source.load()?;
    let mut cfg = ctx.cfg.topics.clone();
    if let Some(k) = k {
        cfg.k = k;
    }
    let (report, _) = run_topic_study(&corpus, &cfg, ctx.cfg.seed)?;
    report.write(ctx.out_dir()?)?;
    for row in &report.rows {
        println!("{:>3} {:>6} {:.3}  {}", row.topic, row.assigned, row.rate.unwrap_or(f64::NAN), row.terms);
    }
    Ok(())
}

fn cmd_featurize(ctx: &Ctx, source: &Source, scheme: Scheme, model: Option<&Path>) -> Result<()> {
    let corpus = source.load()?;
    let raw = extract_corpus(&corpus, &ctx.lexicons)?;
    let (meta, scheme) = match model {
        Some(p) => {
            let art = ModelArtifact::load(p)?;
            (art.encoder, art.scheme)
        }
        None => (fit_encoder(&raw, corpus.epoch()?)?, scheme),
    };
    let out = ctx.out_dir()?;

    let mut w = csv::Writer::from_path(out.join("features_raw.csv"))?;
    if let Some(first) = raw.first() {
        let mut header = vec!["request_id".to_string()];
        header.extend(first.fields().into_iter().map(|(n, _)| n));
        w.write_record(&header)?;
    }
    for r in &raw {
        let mut rec = vec![r.request_id.clone()];
        rec.extend(r.fields().into_iter().map(|(_, v)| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let path = out.join(format!("features_{}.csv", scheme.name()));
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["request_id".to_string(), "success".to_string()];
    header.extend(askwell_core::features::feature_names(scheme).iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for (r, req) in raw.iter().zip(corpus.requests()) {
        let x = encode(r, &meta, scheme)?;
        let mut rec = vec![r.request_id.clone(), u8::from(req.success).to_string()];
        rec.extend(x.values.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    ctx.write_json("encoder.json", &serde_json::to_value(&meta)?)?;
    println!("featurized {} requests into {}", raw.len(), path.display());
    Ok(())
}

fn cmd_train(ctx: &Ctx, source: &Source, scheme: Scheme, lambda: Option<f64>) -> Result<()> {
    let corpus = source.load()?;
    let art = train_artifact(&corpus, scheme, lambda, &ctx.cfg, &ctx.lexicons, None)?;
    let path = ctx.out_dir()?.join("model.json");
    art.save(&path)?;
    println!(
        "trained {} on {} requests, lambda {:.3e}; wrote {}",
        art.schema_id,
        corpus.len(),
        art.lambda,
        path.display()
    );
    Ok(())
}

fn cmd_regression(ctx: &Ctx, source: &Source) -> Result<()> {
    let corpus = source.load()?;
    let report = run_regression_study(&corpus, &ctx.lexicons)?;
    report.write(ctx.out_dir()?)?;
    for r in &report.rows {
        println!("{:<28} {:>8.3} {:<3} p={:.2e}", r.feature, r.estimate, r.stars, r.p);
    }
    Ok(())
}

fn cmd_prediction(ctx: &Ctx, source: &Source) -> Result<()> {
    let corpus = source.load()?;
    let (dev, test) = stratified_split(&corpus, ctx.cfg.dev_fraction, ctx.cfg.seed)?;
    let report = run_prediction_study(&dev, &test, &ctx.cfg, &ctx.lexicons, None)?;
    report.write(ctx.out_dir()?)?;
    for r in &report.rows {
        println!("{:<32} AUC {:.3} {}", r.name, r.test_auc, r.stars);
    }
    Ok(())
}

fn extra_pairs(corpus: &Corpus, path: Option<&Path>) -> Result<Vec<askwell_core::similarity::GiverReceiverPair>> {
    let Some(path) = path else {
        return Ok(Vec::new());
    };
    let records = read_pair_records(path)?;
    let (pairs, unresolved) = resolve_pairs(&records, corpus)?;
    if unresolved > 0 {
        log::warn!("{unresolved} pairs reference unknown requests");
    }
    Ok(pairs)
}

fn cmd_reciprocity(ctx: &Ctx, source: &Source, pairs: Option<&Path>, fraction: Option<f64>) -> Result<()> {
    let corpus = source.load()?;
    let extra = extra_pairs(&corpus, pairs)?;
    let fraction = fraction.unwrap_or(ctx.cfg.high_status_fraction);
    let out = ctx.out_dir()?;
    for def in ReciprocityDefinition::ALL {
        let r = run_reciprocity_study(&corpus, def, fraction, &extra)?;
        r.write(out)?;
        let marker = if def == ctx.cfg.reciprocity { "*" } else { " " };
        print!("{marker}{:<14}", def.name());
        for g in r.groups() {
            print!("  {} {:.3} (n={})", g.group, g.rate.unwrap_or(f64::NAN), g.n);
        }
        println!();
    }
    Ok(())
}

fn cmd_similarity(
    ctx: &Ctx,
    source: &Source,
    pairs: Option<&Path>,
    metric: Option<MetricArg>,
    n_null: Option<usize>,
    null_model: Option<NullArg>,
    bandwidth: Option<f64>,
) -> Result<()> {
    let corpus = source.load()?;
    let pairs = match pairs {
        Some(_) => extra_pairs(&corpus, pairs)?,
        None => pairs_from_corpus(&corpus),
    };
    let mut opts = ctx.cfg.similarity.clone();
    if let Some(n) = n_null {
        opts.n_null = n;
    }
    if let Some(m) = null_model {
        opts.null_model = match m {
            NullArg::Uniform => NullModel::Uniform,
            NullArg::DegreePreserving => NullModel::DegreePreserving,
        };
    }
    if bandwidth.is_some() {
        opts.bandwidth = bandwidth;
    }
    let metrics = match metric {
        Some(MetricArg::Intersection) => vec![Metric::Intersection],
        Some(MetricArg::Jaccard) => vec![Metric::Jaccard],
        None => Metric::ALL.to_vec(),
    };
    let out = ctx.out_dir()?;
    for m in metrics {
        opts.metric = m;
        let r = run_similarity_study(&corpus, &pairs, &opts)?;
        r.write(out)?;
        println!(
            "{:<12} actual {:.4} null {:.4} p={:.2e} ({} pairs)",
            m.name(),
            r.mean_actual,
            r.mean_null,
            r.test.p,
            r.actual.len()
        );
    }
    Ok(())
}

fn cmd_curves(ctx: &Ctx, model: Option<&Path>) -> Result<()> {
    let art = match model {
        Some(p) => ModelArtifact::load(p)?,
        None => ModelArtifact::reference(),
    };
    let curves = run_interpretation_curves(&art)?;
    curves.write(ctx.out_dir()?)?;
    println!("wrote {} length and {} karma points", curves.length.len(), curves.karma.len());
    Ok(())
}

fn cmd_serve(
    model: Option<PathBuf>,
    reference: bool,
    addr: SocketAddr,
    cors_origins: Vec<String>,
    reload_secs: Option<u64>,
) -> Result<()> {
    let slot = match (model, reference) {
        (Some(p), _) => ModelSlot::from_file(p)?,
        (None, true) => ModelSlot::with_scorer(Scorer::new(ModelArtifact::reference())?),
        (None, false) => {
            log::warn!("no model configured; scoring answers 503 until one is loaded");
            ModelSlot::empty()
        }
    };
    let config = ServerConfig {
        addr,
        cors_origins,
        reload_interval: reload_secs.map(Duration::from_secs),
    };
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(askwell_server::serve(Arc::new(slot), &config))?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => StudyConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => StudyConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.similarity.seed = seed;
    }
    let ctx = Ctx {
        out: cli.out.clone(),
        cfg,
        lexicons: load_lexicons(cli.lexicons.as_deref())?,
    };
    match cli.command {
        Command::Ingest(s) => cmd_ingest(&ctx, &s),
        Command::Split { source, dev_fraction } => cmd_split(&ctx, &source, dev_fraction),
        Command::Topics { source, k } => cmd_topics(&ctx, &source, k),
        Command::Featurize { source, scheme, model } => cmd_featurize(&ctx, &source, scheme.into(), model.as_deref()),
        Command::Train { source, scheme, lambda } => cmd_train(&ctx, &source, scheme.into(), lambda),
        Command::RegressionStudy(s) => cmd_regression(&ctx, &s),
        Command::PredictionStudy(s) => cmd_prediction(&ctx, &s),
        Command::ReciprocityStudy { source, pairs, high_status_fraction } => {
            cmd_reciprocity(&ctx, &source, pairs.as_deref(), high_status_fraction)
        }
        Command::SimilarityStudy { source, pairs, metric, n_null, null_model, bandwidth } => {
            cmd_similarity(&ctx, &source, pairs.as_deref(), metric, n_null, null_model, bandwidth)
        }
        Command::Curves { model } => cmd_curves(&ctx, model.as_deref()),
        Command::Serve { model, reference, port, host, cors_origins, reload_secs } => {
            cmd_serve(model, reference, SocketAddr::new(host, port), cors_origins, reload_secs)
        }
    }
}
