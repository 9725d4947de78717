use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ccrv::agreement::{load_stance, split_stance_data_with, train_agreement};
use ccrv::checkpoint::digest;
use ccrv::config::Settings;
use ccrv::corpus::{
    generate_synthetic_corpus, load_corpus, load_stats, published_stats, validate_against_stats, FeatureSource,
};
use ccrv::embedding::{build_vocabulary, eval_pair_retrieval, load_parallel, train_embedding};
use ccrv::eval::{
    load_models, read_feature_table, run_experiment, top_features_report, write_feature_table,
    extract_corpus_features, ExperimentConfig, Setting,
};
use ccrv::features::FEATURE_NAMES;
use ccrv::manifest::write_manifest;
use ccrv::verifier::{train_verifier, Veracity};
use ccrv::{Error, Result, RngState};

#[derive(Parser)]
#[command(name = "ccrv", version, about = "Cross-lingual cross-platform rumor verification")]
struct Cli {
    /// Master seed for every random choice
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// key = value settings file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Override one setting, e.g. --set embedding.epochs=2
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus, parallel corpus and stance data
    GenSynthetic,
    /// Train the bilingual sentence encoder on a parallel corpus
    TrainEmbedding {
        #[arg(long)]
        parallel: Option<PathBuf>,
    },
    /// Train the four-way agreement classifier
    TrainAgreement {
        #[arg(long)]
        stance: Option<PathBuf>,
        #[command(flatten)]
        models: EncoderArgs,
    },
    /// Compute the 10 features for every post of a source
    ExtractFeatures {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        source: Option<String>,
        #[command(flatten)]
        models: ModelArgs,
    },
    /// Train the real/fake verifier on a feature table
    TrainVerifier {
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Run the task, event or transfer evaluation
    Evaluate {
        #[arg(long)]
        setting: Option<String>,
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        verifier: Option<PathBuf>,
        #[command(flatten)]
        models: ModelArgs,
    },
    /// Rank features by correlation with the fake label
    AnalyzeFeatures {
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Check corpus files and compare counts with a stats table
    ValidateCorpus {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Tab-separated expected counts; the published table when omitted
        #[arg(long)]
        stats: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EncoderArgs {
    #[arg(long)]
    encoder: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    encoder: EncoderArgs,
    #[arg(long)]
    agreement: Option<PathBuf>,
}

struct Ctx {
    seed: u64,
    out_dir: PathBuf,
    settings: Settings,
}

impl Ctx {
    fn put(&mut self, key: &str, value: &Option<impl AsRef<std::ffi::OsStr>>) -> Result<()> {
        if let Some(v) = value {
            let v = Path::new(v.as_ref()).display().to_string();
            self.settings.set(key, &v)?;
        }
        Ok(())
    }

    fn put_models(&mut self, m: &ModelArgs) -> Result<()> {
        self.put_encoder(&m.encoder)?;
        self.put("agreement", &m.agreement)
    }

    fn put_encoder(&mut self, m: &EncoderArgs) -> Result<()> {
        self.put("encoder", &m.encoder)?;
        self.put("vocab", &m.vocab)
    }

    fn input(&self, key: &str) -> Result<PathBuf> {
        let p = self.settings.require_path(key)?;
        if !p.exists() {
            return Err(Error::Config(format!("{key} input {} not found", p.display())));
        }
        Ok(p)
    }

    fn prepare_out(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir)?;
        Ok(())
    }

    fn finish(&self, files: &[String], config: &str) -> Result<()> {
        write_manifest(&self.out_dir, files, config, self.seed)
    }

    fn source(&self) -> Result<FeatureSource> {
        self.settings.raw("eval.source").unwrap_or("TFG").parse()
    }
}

fn gen_synthetic(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.settings.synthetic()?;
    let m = generate_synthetic_corpus(&ctx.out_dir, &cfg, &RngState::new(ctx.seed))?;
    let files: Vec<String> = m
        .files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    ctx.finish(&files, &format!("{cfg:?}"))?;
    println!(
        "wrote {} twitter posts, {} baidu posts, {} evidence pages to {}",
        m.twitter_posts,
        m.baidu_posts,
        m.evidence_pages,
        ctx.out_dir.display()
    );
    Ok(())
}

fn train_embedding_cmd(ctx: &Ctx) -> Result<()> {
    let path = ctx.input("parallel")?;
    let cfg = ctx.settings.embedding()?;
    let min_count: usize = ctx.settings.get("embedding.min_count", 1)?;
    let holdout: usize = ctx.settings.get("embedding.holdout", 0)?;
    let mut pairs = load_parallel(&path)?;
    if holdout >= pairs.len() {
        return Err(Error::Config(format!("holdout {holdout} leaves no training pairs")));
    }
    let held = pairs.split_off(pairs.len() - holdout);
    let vocab = build_vocabulary(pairs.iter().flat_map(|p| [&p.source, &p.target]), min_count);
    let (enc, trace) = train_embedding(&pairs, &vocab, &cfg, &mut RngState::new(ctx.seed))?;
    let config = format!("{}\nmin_count={min_count}\nholdout={holdout}\nparallel={}", cfg.canonical(), path.display());
    ctx.prepare_out()?;
    enc.to_checkpoint(ctx.seed, digest(&config)).save(&ctx.out_dir.join("encoder.ckpt"))?;
    vocab.save(&ctx.out_dir.join("vocab.txt"))?;
    let mut t = String::from("epoch\tloss\n");
    for (i, l) in trace.epoch_loss.iter().enumerate() {
        t.push_str(&format!("{}\t{l}\n", i + 1));
    }
    fs::write(ctx.out_dir.join("embedding_trace.tsv"), t)?;
    let mut files = vec!["encoder.ckpt".to_string(), "vocab.txt".into(), "embedding_trace.tsv".into()];
    if holdout >= 2 {
        let acc = eval_pair_retrieval(&held, &enc, &vocab)?;
        fs::write(ctx.out_dir.join("retrieval.tsv"), format!("candidates\tretrieval_at_1\n{holdout}\t{acc}\n"))?;
        files.push("retrieval.tsv".into());
        println!("held-out retrieval@1 over {holdout} candidates: {acc:.3}");
    }
    ctx.finish(&files, &config)?;
    println!("trained encoder on {} pairs, vocabulary {} tokens", pairs.len(), vocab.len());
    Ok(())
}

fn train_agreement_cmd(ctx: &Ctx) -> Result<()> {
    let stance = ctx.input("stance")?;
    let (enc_path, vocab_path) = (ctx.input("encoder")?, ctx.input("vocab")?);
    let cfg = ctx.settings.agreement()?;
    let per_label: usize = ctx.settings.get("agreement.dev_per_label", 250)?;
    let enc = ccrv::embedding::EncoderParams::from_checkpoint(&ccrv::checkpoint::Checkpoint::load(&enc_path)?)?;
    let vocab = ccrv::embedding::Vocabulary::load(&vocab_path)?;
    let data = load_stance(&stance)?;
    let rng = RngState::new(ctx.seed);
    let (train, dev) = split_stance_data_with(&data, per_label, &mut rng.derive(0))?;
    let (params, trace) = train_agreement(&train, &dev, &enc, &vocab, &cfg, &mut rng.derive(1))?;
    let config = format!(
        "{}\ndev_per_label={per_label}\nstance={}\nencoder={}",
        cfg.canonical(),
        stance.display(),
        enc_path.display()
    );
    ctx.prepare_out()?;
    params.to_checkpoint(ctx.seed, digest(&config)).save(&ctx.out_dir.join("agreement.ckpt"))?;
    let mut t = String::from("epoch\tloss\tdev_macro_f1\n");
    for (i, (l, f)) in trace.epoch_loss.iter().zip(&trace.dev_macro_f1).enumerate() {
        t.push_str(&format!("{}\t{l}\t{f}\n", i + 1));
    }
    fs::write(ctx.out_dir.join("agreement_trace.tsv"), t)?;
    ctx.finish(&["agreement.ckpt".into(), "agreement_trace.tsv".into()], &config)?;
    match trace.best_epoch.checked_sub(1).and_then(|i| trace.dev_macro_f1.get(i)) {
        Some(f) => println!("agreement classifier: best dev macro-F1 {f:.3} at epoch {}", trace.best_epoch),
        None => println!("agreement classifier: no epoch beat the initial weights"),
    }
    Ok(())
}

fn extract_features_cmd(ctx: &Ctx) -> Result<()> {
    let corpus_dir = ctx.input("corpus")?;
    let (e, v, a) = (ctx.input("encoder")?, ctx.input("vocab")?, ctx.input("agreement")?);
    let source = ctx.source()?;
    let corpus = load_corpus(&corpus_dir)?;
    for w in &corpus.warnings {
        eprintln!("warning: {w}");
    }
    let (enc, vocab, agr) = load_models(&e, &v, &a)?;
    let rows = extract_corpus_features(&corpus, source, &enc, &vocab, &agr)?;
    ctx.prepare_out()?;
    let name = format!("features_{source}.tsv");
    write_feature_table(&ctx.out_dir.join(&name), &rows)?;
    let config = format!(
        "source={source}\ncorpus={}\nencoder={}\nvocab={}\nagreement={}",
        corpus_dir.display(),
        e.display(),
        v.display(),
        a.display()
    );
    ctx.finish(&[name.clone()], &config)?;
    let imputed = rows.iter().filter(|r| r.evidence == 0).count();
    println!("{} rows ({imputed} without evidence) -> {name}", rows.len());
    Ok(())
}

fn train_verifier_cmd(ctx: &Ctx) -> Result<()> {
    let path = ctx.input("features")?;
    let cfg = ctx.settings.verifier()?;
    let rows = read_feature_table(&path)?;
    let Some(source) = rows.first().map(|r| r.source) else {
        return Err(Error::Data(format!("{} has no rows", path.display())));
    };
    if rows.iter().any(|r| r.source != source) {
        return Err(Error::Data("feature table mixes sources".into()));
    }
    let train: Vec<_> = rows.iter().filter_map(|r| Some((r.features, r.veracity()?))).collect();
    let (params, trace) = train_verifier(&train, &cfg, &mut RngState::new(ctx.seed))?;
    let config = format!("{}\nfeatures={}", cfg.canonical(), path.display());
    ctx.prepare_out()?;
    params
        .to_checkpoint(ctx.seed, digest(&config), source.as_str())
        .save(&ctx.out_dir.join("verifier.ckpt"))?;
    let mut t = String::from("epoch\tloss\n");
    for (i, l) in trace.epoch_loss.iter().enumerate() {
        t.push_str(&format!("{}\t{l}\n", i + 1));
    }
    fs::write(ctx.out_dir.join("verifier_trace.tsv"), t)?;
    ctx.finish(&["verifier.ckpt".into(), "verifier_trace.tsv".into()], &config)?;
    println!("verifier trained on {} {source} rows", train.len());
    Ok(())
}

fn evaluate_cmd(ctx: &Ctx) -> Result<()> {
    let s = &ctx.settings;
    let setting: Setting = s.raw("eval.setting").unwrap_or("event").parse()?;
    let mut cfg = ExperimentConfig::new(setting, ctx.source()?, s.require_path("corpus")?, ctx.out_dir.clone());
    cfg.seed = ctx.seed;
    cfg.features = s.path("features");
    cfg.encoder = s.path("encoder");
    cfg.vocab = s.path("vocab");
    cfg.agreement = s.path("agreement");
    cfg.verifier = s.path("verifier");
    cfg.verifier_config = s.verifier()?;
    cfg.iterations = s.get("eval.iterations", cfg.iterations)?;
    cfg.show_baselines = s.get("eval.show_baselines", false)?;
    let out = run_experiment(&cfg)?;
    print!("{}", out.report.to_text());
    Ok(())
}

fn analyze_features_cmd(ctx: &Ctx) -> Result<()> {
    let path = ctx.input("features")?;
    let rows = read_feature_table(&path)?;
    let labeled: Vec<_> = rows.iter().filter_map(|r| Some((r, r.veracity()?))).collect();
    let labels: Vec<Veracity> = labeled.iter().map(|(_, v)| *v).collect();
    let columns: Vec<Vec<f64>> = (0..FEATURE_NAMES.len())
        .map(|k| labeled.iter().map(|(r, _)| r.features.0[k]).collect())
        .collect();
    let ranked = top_features_report(&FEATURE_NAMES, &columns, &labels)?;
    let cell = |r: Option<f64>| r.map(|x| format!("{x:.6}")).unwrap_or_else(|| "undefined".into());
    let mut tsv = String::from("rank\tfeature\tpcc\n");
    let mut txt = format!("Correlation with the fake label over {} rows\n\n", labels.len());
    for (i, (name, r)) in ranked.iter().enumerate() {
        tsv.push_str(&format!("{}\t{name}\t{}\n", i + 1, cell(*r)));
        txt.push_str(&format!("{:>2}  {name:<16}{:>10}\n", i + 1, r.map(|x| format!("{x:.3}")).unwrap_or("undefined".into())));
    }
    ctx.prepare_out()?;
    fs::write(ctx.out_dir.join("pcc.tsv"), tsv)?;
    fs::write(ctx.out_dir.join("pcc.txt"), &txt)?;
    ctx.finish(&["pcc.tsv".into(), "pcc.txt".into()], &format!("features={}", path.display()))?;
    print!("{txt}");
    Ok(())
}

fn validate_corpus_cmd(ctx: &Ctx) -> Result<()> {
    let dir = ctx.input("corpus")?;
    let expected = match ctx.settings.path("stats") {
        Some(p) if p.exists() => load_stats(&p)?,
        Some(p) => return Err(Error::Config(format!("stats input {} not found", p.display()))),
        None => published_stats(),
    };
    let corpus = load_corpus(&dir)?;
    for w in &corpus.warnings {
        eprintln!("warning: {w}");
    }
    let mismatches = validate_against_stats(&corpus, &expected);
    let mut tsv = String::from("event_id\tplatform\tlabel\texpected\tactual\n");
    for m in &mismatches {
        tsv.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            m.event_id,
            m.platform.as_str(),
            m.label.as_str(),
            m.expected,
            m.actual
        ));
    }
    ctx.prepare_out()?;
    fs::write(ctx.out_dir.join("validation.tsv"), tsv)?;
    let stats = ctx.settings.raw("stats").unwrap_or("published table");
    ctx.finish(&["validation.tsv".into()], &format!("corpus={}\nstats={stats}", dir.display()))?;
    println!(
        "{} events, {} posts, {} evidence pages; {} of {} count cells differ",
        corpus.events.len(),
        corpus.posts.len(),
        corpus.evidence.len(),
        mismatches.len(),
        expected.len()
    );
    for m in mismatches.iter().take(20) {
        println!("  {m}");
    }
    if mismatches.is_empty() {
        Ok(())
    } else {
        Err(Error::Data(format!("{} count mismatches", mismatches.len())))
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut settings = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    for o in &cli.overrides {
        settings.apply(o)?;
    }
    let mut ctx = Ctx {
        seed: cli.seed,
        out_dir: cli.out_dir,
        settings,
    };
    match &cli.command {
        Command::GenSynthetic => gen_synthetic(&ctx),
        Command::TrainEmbedding { parallel } => {
            ctx.put("parallel", parallel)?;
            train_embedding_cmd(&ctx)
        }
        Command::TrainAgreement { stance, models } => {
            ctx.put("stance", stance)?;
            ctx.put_encoder(models)?;
            train_agreement_cmd(&ctx)
        }
        Command::ExtractFeatures { corpus, source, models } => {
            ctx.put("corpus", corpus)?;
            ctx.put("eval.source", source)?;
            ctx.put_models(models)?;
            extract_features_cmd(&ctx)
        }
        Command::TrainVerifier { features } => {
            ctx.put("features", features)?;
            train_verifier_cmd(&ctx)
        }
        Command::Evaluate { setting, source, corpus, features, verifier, models } => {
            ctx.put("eval.setting", setting)?;
            ctx.put("eval.source", source)?;
            ctx.put("corpus", corpus)?;
            ctx.put("features", features)?;
            ctx.put("verifier", verifier)?;
            ctx.put_models(models)?;
            evaluate_cmd(&ctx)
        }
        Command::AnalyzeFeatures { features } => {
            ctx.put("features", features)?;
            analyze_features_cmd(&ctx)
        }
        Command::ValidateCorpus { corpus, stats } => {
            ctx.put("corpus", corpus)?;
            ctx.put("stats", stats)?;
            validate_corpus_cmd(&ctx)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Invariant(_) | Error::Determinism(_) | Error::Dimension { .. } => 3,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
