use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use corpuskit::align::{aligned_record, pair_from_record};
use corpuskit::corpus::{read_all, read_records, validate_record, ErrorMode, PartitionValidator, SourceId};
use corpuskit::dedup::{dedup_corpus, write_drop_report, DedupConfig, SignatureCache};
use corpuskit::filters::{DecisionRecord, RuleSummary};
use corpuskit::langid::LanguageIdentifier;
use corpuskit::mix::{
    annealing_mix, apply_epochs, layout, write_schedule, AnnealingMix, CompositionTable, EpochTable, LrSchedule,
    RampupConfig,
};
use corpuskit::niah::{self, NiahCase, NiahGrid, NiahResponse};
use corpuskit::pipeline::{self, PipelineConfig, StageConfig, CONFIG_VERSION};
use corpuskit::sft::{prepare_example, sft_filter, Conversation, MaskOptions, SEQUENCE_LENGTH};
use corpuskit::tokenizer::{audit_vocabulary, fertility, train_bpe, TokenizerModel, TrainConfig};
use corpuskit::web::{
    load_domain_list, roster_domains, write_verdicts, LiveProvider, RobotsProvider, SnapshotProvider, WebSelector,
};

#[derive(Parser)]
#[command(name = "corpuskit", version, about = "Corpus curation, tokenizer and training-data planning toolkit")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Master seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Stop at the first bad record (strict) or log and continue (skip).
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Never touch the network.
    #[arg(long, global = true)]
    offline: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Strict,
    Skip,
}

impl Global {
    fn mode(&self) -> ErrorMode {
        match self.mode {
            Some(Mode::Skip) => ErrorMode::Skip,
            _ => ErrorMode::Strict,
        }
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check records against the schema and report every violation.
    Validate {
        input: PathBuf,
        /// Write one decision line per invalid record.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run document filters in order and write the survivors.
    Filter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Filters to apply, in order.
        #[arg(long, value_delimiter = ',', default_value = "source_clean,c4,gopher,repetition,pii_redact")]
        filters: Vec<String>,
        /// Badword list for the c4 filter.
        #[arg(long)]
        badwords: Option<PathBuf>,
    },
    /// Keep or drop URLs by domain overlap, blacklist and robots.txt opt-out.
    Webselect {
        /// One URL per line.
        #[arg(long)]
        urls: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        blacklist: Option<PathBuf>,
        #[arg(long)]
        known_domains: Option<PathBuf>,
        /// Directory of cached robots.txt files named by host.
        #[arg(long)]
        robots_dir: Option<PathBuf>,
    },
    /// Near-duplicate removal with MinHash LSH.
    Dedup {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Drop report CSV.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Signature cache file, read and updated.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long, default_value_t = 0.75)]
        threshold: f64,
        #[arg(long, default_value_t = 14)]
        bands: usize,
        #[arg(long, default_value_t = 8)]
        rows: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Train a BPE tokenizer on text files.
    TokTrain {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 65_024)]
        vocab_size: usize,
        /// Plain BPE without normalization or class constraints.
        #[arg(long)]
        unconstrained: bool,
    },
    /// Encode text to token ids, or decode ids back.
    TokEncode {
        #[arg(long)]
        model: PathBuf,
        /// Text to encode; read from stdin when absent.
        #[arg(long)]
        text: Option<String>,
        /// Treat the input as comma-separated ids and decode.
        #[arg(long)]
        decode: bool,
        /// Honour special-token literals in the input.
        #[arg(long)]
        specials: bool,
    },
    /// Tokens per word of a tokenizer over text files.
    Fertility {
        #[arg(long)]
        model: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Render bilingual records as one training text each.
    Align {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Fixed template id instead of a seeded choice.
        #[arg(long)]
        template: Option<usize>,
    },
    /// Composition totals, epoch plan, annealing mix and parallel layout.
    PlanMix {
        /// Composition CSV; the bundled table when absent.
        #[arg(long)]
        composition: Option<PathBuf>,
        /// Effective-composition CSV output.
        #[arg(long)]
        output: Option<PathBuf>,
        /// `n_gpus,tp,pp`.
        #[arg(long, value_delimiter = ',')]
        layout: Option<Vec<u64>>,
    },
    /// Dump a learning-rate and batch-size schedule as CSV.
    Schedule {
        #[arg(long, value_enum, default_value = "pretraining")]
        phase: Phase,
        /// Horizon for the annealing phase.
        #[arg(long, default_value_t = 1_000_000)]
        total: u64,
        #[arg(long, default_value_t = 1_000_000)]
        stride: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Filter, render, mask and pad instruction conversations.
    SftPrep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = SEQUENCE_LENGTH)]
        length: usize,
        /// Match filter keywords ignoring case.
        #[arg(long)]
        case_insensitive: bool,
        /// Leave end-of-turn tokens out of the loss mask.
        #[arg(long)]
        no_eot_loss: bool,
    },
    /// Generate needle-in-a-haystack prompts.
    NiahGen {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Filler text; the bundled essays when absent.
        #[arg(long)]
        filler: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        lengths: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        depths: Option<Vec<f64>>,
    },
    /// Score responses and write the heatmap.
    NiahScore {
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        heatmap: PathBuf,
        #[arg(long, default_value_t = niah::DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Run a declarative pipeline config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Phase {
    Pretraining,
    Extension,
    Annealing,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_lines<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    niah::read_jsonl(r).with_context(|| format!("reading {}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(j) = cli.global.jobs {
        let _ = rayon_threads(j);
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn rayon_threads(n: usize) -> Result<()> {
    std::env::set_var("RAYON_NUM_THREADS", n.max(1).to_string());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::Validate { input, report } => validate(input, report.as_deref(), g),
        Command::Filter { input, out_dir, filters, badwords } => filter(input, out_dir, filters, badwords.as_deref(), g),
        Command::Webselect { urls, output, blacklist, known_domains, robots_dir } => {
            webselect(urls, output.as_deref(), blacklist.as_deref(), known_domains.as_deref(), robots_dir.as_deref(), g)
        }
        Command::Dedup { input, output, report, cache, threshold, bands, rows, k } => {
            let cfg = DedupConfig {
                k: *k,
                num_perm: bands * rows,
                bands: *bands,
                rows: *rows,
                threshold: *threshold,
                seed: g.seed.unwrap_or(DedupConfig::default().seed),
                exact_fast_path: true,
            };
            dedup(input, output, report.as_deref(), cache.as_deref(), &cfg, g)
        }
        Command::TokTrain { inputs, out, vocab_size, unconstrained } => {
            let texts = inputs.iter().map(fs::read_to_string).collect::<Result<Vec<_>, _>>()?;
            let cfg = if *unconstrained { TrainConfig::unconstrained(*vocab_size) } else { TrainConfig::new(*vocab_size) };
            let model = train_bpe(&texts, &cfg)?;
            model.save(out)?;
            let audit = audit_vocabulary(&model);
            info!("trained {} tokens, {} merges", model.vocab_size(), model.merges().len());
            if !*unconstrained && !audit.is_clean() {
                eprintln!("{audit}");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::TokEncode { model, text, decode, specials } => {
            let model = TokenizerModel::load(model)?;
            let input = match text {
                Some(t) => t.clone(),
                None => io::read_to_string(io::stdin())?,
            };
            if *decode {
                let ids = input
                    .split(',')
                    .map(|s| s.trim().parse::<u32>().with_context(|| format!("bad id {s:?}")))
                    .collect::<Result<Vec<_>>>()?;
                print!("{}", model.decode(&ids)?);
            } else {
                let ids = if *specials { model.encode_with_specials(&input) } else { model.encode(&input) };
                let s: Vec<String> = ids.iter().map(u32::to_string).collect();
                println!("{}", s.join(","));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Fertility { model, inputs } => {
            let model = TokenizerModel::load(model)?;
            let mut out = csv_stdout();
            out.write_record(["file", "tokens", "words", "fertility"])?;
            for p in inputs {
                let text = fs::read_to_string(p)?;
                let f = fertility(&model, text.lines())?;
                out.write_record([p.display().to_string(), f.tokens.to_string(), f.words.to_string(), format!("{:.4}", f.value())])?;
            }
            out.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Align { input, output, template } => align(input, output, *template, g),
        Command::PlanMix { composition, output, layout: lay } => plan_mix(composition.as_deref(), output.as_deref(), lay.as_deref()),
        Command::Schedule { phase, total, stride, output } => {
            let (sched, rampup) = match phase {
                Phase::Pretraining => (LrSchedule::pretraining(), Some(RampupConfig::default())),
                Phase::Extension => (LrSchedule::context_extension(), None),
                Phase::Annealing => (LrSchedule::annealing(*total), None),
            };
            write_schedule(&sched, rampup.as_ref(), *stride, sink(output.as_deref())?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::SftPrep { input, model, output, length, case_insensitive, no_eot_loss } => {
            sft_prep(input, model, output, *length, !*case_insensitive, MaskOptions { include_eot: !*no_eot_loss }, g)
        }
        Command::NiahGen { model, output, filler, lengths, depths } => {
            let model = TokenizerModel::load(model)?;
            let filler = match filler {
                Some(p) => fs::read_to_string(p)?,
                None => niah::DEFAULT_FILLER.to_string(),
            };
            let mut grid = NiahGrid::default();
            if let Some(l) = lengths {
                grid.lengths = l.clone();
            }
            if let Some(d) = depths {
                grid.depths = d.clone();
            }
            let cases = niah::generate_grid(&filler, &grid, &model, g.seed())?;
            write_lines(output, &cases)?;
            info!("{} cases written to {}", cases.len(), output.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::NiahScore { cases, responses, heatmap, threshold } => {
            let cases: Vec<NiahCase> = read_lines(cases)?;
            let responses: Vec<NiahResponse> = read_lines(responses)?;
            let results = niah::score_responses(&cases, &responses)?;
            let mut lengths: Vec<usize> = cases.iter().map(|c| c.length).collect();
            lengths.sort_unstable();
            lengths.dedup();
            let mut depths: Vec<f64> = cases.iter().map(|c| c.depth).collect();
            depths.sort_by(f64::total_cmp);
            depths.dedup();
            let map = niah::heatmap(&NiahGrid { lengths, depths }, &results)?;
            map.write_csv(create(heatmap)?)?;
            match map.effective_window(*threshold) {
                Some(w) => println!("effective window: {w} tokens"),
                None => println!("effective window: none"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config } => run(config, g),
    }
}

fn csv_stdout() -> csv::Writer<io::Stdout> {
    csv::Writer::from_writer(io::stdout())
}

fn validate(input: &Path, report: Option<&Path>, g: &Global) -> Result<ExitCode> {
    let mut reader = read_records(input, g.mode())?;
    let mut partition = PartitionValidator::new();
    let (mut ok, mut bad) = (0usize, Vec::new());
    for r in reader.by_ref() {
        let rec = r?;
        let mut d = validate_record(&rec.value);
        if d.is_keep() {
            d = partition.check(&rec.value);
        }
        if d.is_keep() {
            ok += 1;
        } else {
            eprintln!("line {}: {} ({})", rec.line, d.reason, d.rule_id);
            bad.push(DecisionRecord::new(&rec.value, &d));
        }
    }
    let unreadable = reader.skipped().len();
    println!("{ok} valid, {} invalid, {unreadable} unreadable", bad.len());
    if let Some(p) = report {
        write_lines(p, &bad)?;
    }
    Ok(if bad.is_empty() && unreadable == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn filter(input: &Path, out_dir: &Path, filters: &[String], badwords: Option<&Path>, g: &Global) -> Result<ExitCode> {
    let cwd = std::env::current_dir()?;
    let stages = filters
        .iter()
        .map(|f| {
            let mut params = toml::Table::new();
            if f == "c4" {
                if let Some(b) = badwords {
                    params.insert("badwords_file".into(), toml::Value::String(cwd.join(b).to_string_lossy().into_owned()));
                }
            }
            StageConfig { name: f.clone(), op: f.clone(), params }
        })
        .collect();
    let cfg = PipelineConfig {
        version: CONFIG_VERSION,
        seed: g.seed(),
        mode: g.mode(),
        input: cwd.join(input),
        output_dir: cwd.join(out_dir),
        offline: true,
        stages,
        base_dir: PathBuf::new(),
    };
    report_run(pipeline::run(&cfg, g.jobs)?)
}

fn report_run(m: pipeline::Manifest) -> Result<ExitCode> {
    for s in &m.stages {
        println!("{:<16} in {:>8}  out {:>8}  dropped {:>8}", s.name, s.input, s.output, s.dropped);
    }
    if m.succeeded() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("stage {} failed: {}", m.failed_stage.unwrap_or_default(), m.error.unwrap_or_default());
        Ok(ExitCode::from(2))
    }
}

fn run(config: &Path, g: &Global) -> Result<ExitCode> {
    let mut cfg = PipelineConfig::load(config)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if g.mode.is_some() {
        cfg.mode = g.mode();
    }
    if g.offline {
        cfg.offline = true;
    }
    report_run(pipeline::run(&cfg, g.jobs)?)
}

fn webselect(
    urls: &Path,
    output: Option<&Path>,
    blacklist: Option<&Path>,
    known: Option<&Path>,
    robots_dir: Option<&Path>,
    g: &Global,
) -> Result<ExitCode> {
    let mut known_domains = roster_domains();
    if let Some(p) = known {
        known_domains.extend(load_domain_list(p)?);
    }
    let robots: Box<dyn RobotsProvider> = match robots_dir {
        Some(d) => Box::new(SnapshotProvider::new(d)),
        None if g.offline => bail!("--offline needs --robots-dir"),
        None => Box::new(LiveProvider::new(std::time::Duration::from_secs(10), std::time::Duration::from_secs(1))?),
    };
    let sel = WebSelector {
        known_domains,
        blacklist: blacklist.map(load_domain_list).transpose()?.unwrap_or_default(),
        robots,
    };
    let mut verdicts = Vec::new();
    for line in BufReader::new(File::open(urls)?).lines() {
        let line = line?;
        let url = line.trim();
        if url.is_empty() {
            continue;
        }
        match sel.verdict(url) {
            Ok(v) => verdicts.push(v),
            Err(e) if g.mode() == ErrorMode::Skip => log::warn!("{e}"),
            Err(e) => return Err(e.into()),
        }
    }
    write_verdicts(&verdicts, sink(output)?)?;
    Ok(ExitCode::SUCCESS)
}

fn dedup(input: &Path, output: &Path, report: Option<&Path>, cache: Option<&Path>, cfg: &DedupConfig, g: &Global) -> Result<ExitCode> {
    let docs = read_all(input, g.mode())?;
    let mut sigs = match cache {
        Some(p) if p.exists() => Some(SignatureCache::load(p)?),
        Some(_) => Some(SignatureCache::default()),
        None => None,
    };
    let outcome = dedup_corpus(&docs, cfg, sigs.as_mut())?;
    let mut w = create(output)?;
    for (d, keep) in docs.iter().zip(&outcome.keep) {
        if *keep {
            writeln!(w, "{}", d.to_line())?;
        }
    }
    w.flush()?;
    if let Some(p) = report {
        write_drop_report(&outcome.drops, create(p)?)?;
    }
    if let (Some(p), Some(c)) = (cache, &sigs) {
        c.save(p)?;
    }
    println!("{} in, {} kept, {} dropped", docs.len(), outcome.kept_count(), docs.len() - outcome.kept_count());
    Ok(ExitCode::SUCCESS)
}

fn align(input: &Path, output: &Path, template: Option<usize>, g: &Global) -> Result<ExitCode> {
    let docs = read_all(input, g.mode())?;
    let classifier = LanguageIdentifier::bundled();
    let mut w = create(output)?;
    let mut failed = 0usize;
    for (i, d) in docs.iter().enumerate() {
        let source = d.source_id().unwrap_or(SourceId::CroissantAligned);
        let res = pair_from_record(d, classifier)
            .and_then(|p| aligned_record(&p, source, &d.id, template, g.seed() ^ i as u64));
        match res {
            Ok(r) => writeln!(w, "{}", r.to_line())?,
            Err(e) if g.mode() == ErrorMode::Skip => {
                log::warn!("{}: {e}", d.id);
                failed += 1;
            }
            Err(e) => bail!("{}: {e}", d.id),
        }
    }
    w.flush()?;
    println!("{} aligned, {failed} skipped", docs.len() - failed);
    Ok(ExitCode::SUCCESS)
}

fn plan_mix(composition: Option<&Path>, output: Option<&Path>, lay: Option<&[u64]>) -> Result<ExitCode> {
    let table = match composition {
        Some(p) => CompositionTable::from_reader(File::open(p)?)?,
        None => CompositionTable::bundled(),
    };
    let totals = table.aggregate();
    for (lang, t) in &totals.by_language {
        println!("{lang:<8} {} B tokens", t.rounded(3).b_tokens);
    }
    println!("{:<8} {} B tokens", "total", totals.total.rounded(3).b_tokens);
    let plan = apply_epochs(&table, &EpochTable::published())?;
    println!("effective total with epochs: {} B tokens", plan.effective_total.round_dp(3));
    if let Some(p) = output {
        plan.write_csv(create(p)?)?;
    }
    let mix = annealing_mix(&AnnealingMix::published())?;
    println!("annealing mix by language: {}", json!(mix.by_language));
    match lay {
        Some(&[n, tp, pp]) => println!("{}", layout(n, tp, pp)?),
        Some(_) => bail!("--layout takes n_gpus,tp,pp"),
        None => {}
    }
    Ok(ExitCode::SUCCESS)
}

fn sft_prep(
    input: &Path,
    model: &Path,
    output: &Path,
    length: usize,
    case_sensitive: bool,
    opts: MaskOptions,
    g: &Global,
) -> Result<ExitCode> {
    let model = TokenizerModel::load(model)?;
    let convs: Vec<Conversation> = read_lines(input)?;
    let mut summary = RuleSummary::default();
    let mut w = create(output)?;
    let (mut truncated, mut written) = (0usize, 0usize);
    for c in &convs {
        let decision = match sft_filter(c, case_sensitive) {
            Ok(d) => d,
            Err(e) if g.mode() == ErrorMode::Skip => {
                log::warn!("{e}");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        summary.add(&decision);
        if decision.is_drop() {
            continue;
        }
        let ex = match prepare_example(&model, c, opts, length) {
            Ok(ex) => ex,
            Err(e) if g.mode() == ErrorMode::Skip => {
                log::warn!("{:?}: {e}", c.id);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        truncated += usize::from(ex.truncated);
        written += 1;
        serde_json::to_writer(&mut w, &ex)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    println!("{} conversations, {written} examples ({truncated} truncated), {} dropped", convs.len(), summary.total_dropped());
    for (rule, n) in summary.drops_by_rule() {
        println!("  {rule}: {n}");
    }
    Ok(ExitCode::SUCCESS)
}
