//! Declarative pipeline runs over a record file, with a reproducibility
//! manifest whose hash chain covers every stage's output.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{read_records, validate_record, DocumentRecord, ErrorMode, FilterDecision, PartitionValidator};
use crate::dedup::{dedup_partition, partition_key, write_drop_report, DedupConfig, DropRow};
use crate::filters::{
    c4_rules, clean_source_specific, gopher_rules, ocr_score_gate_v12, redact_pii, repetition_filter, web_perplexity_band,
    C4Config, CleanContext, Cleaned, DecisionRecord, GateConfig, GopherConfig, RepetitionConfig,
};
use crate::web::{load_domain_list, roster_domains, write_verdicts, LiveProvider, SnapshotProvider, UrlDecision, WebSelector};

pub const CONFIG_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;
pub const STAGE_ERROR_RULE: &str = "stage_error";

/// Operation names accepted in `stages[].op`.
pub const OPERATIONS: [&str; 9] =
    ["validate", "source_clean", "c4", "gopher", "repetition", "pii_redact", "ocr_gate", "web_band", "webselect"];
pub const DEDUP_OPERATION: &str = "dedup";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("unsupported config version {found} (expected {CONFIG_VERSION})")]
    Version { found: u32 },
    #[error("stage {stage:?}: unknown operation {op:?}")]
    UnknownOperation { stage: String, op: String },
    #[error("stage {stage:?}: invalid parameters: {message}")]
    Params { stage: String, message: String },
    #[error("manifest check failed: {0}")]
    Tampered(String),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub name: String,
    pub op: String,
    #[serde(default)]
    pub params: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: ErrorMode,
    pub input: PathBuf,
    pub output_dir: PathBuf,
    /// Never touch the network.
    #[serde(default = "yes")]
    pub offline: bool,
    pub stages: Vec<StageConfig>,
    /// Directory relative paths are resolved against; not part of the hash.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceCleanParams {
    pub reference_year: Option<i32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct C4Params {
    pub badwords_file: Option<PathBuf>,
    pub min_words_per_line: Option<usize>,
    pub min_sentences: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WebselectParams {
    pub blacklist_file: Option<PathBuf>,
    /// Extra known-domain list merged with the built-in roster.
    pub known_domains_file: Option<PathBuf>,
    /// Snapshot of robots.txt files; required in offline mode.
    pub robots_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoParams {}

/// A stage with validated parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum StageOp {
    Validate,
    SourceClean(SourceCleanParams),
    C4(C4Params),
    Gopher(GopherConfig),
    Repetition(RepetitionConfig),
    PiiRedact,
    OcrGate(GateConfig),
    WebBand(GateConfig),
    Webselect(WebselectParams),
    Dedup(DedupConfig),
}

impl StageOp {
    pub fn parse(stage: &StageConfig) -> Result<StageOp, PipelineError> {
        fn p<T: for<'de> Deserialize<'de>>(stage: &StageConfig) -> Result<T, PipelineError> {
            toml::Value::Table(stage.params.clone())
                .try_into()
                .map_err(|e: toml::de::Error| PipelineError::Params { stage: stage.name.clone(), message: e.message().to_string() })
        }
        let op = match stage.op.as_str() {
            "validate" => p::<NoParams>(stage).map(|_| StageOp::Validate)?,
            "source_clean" => StageOp::SourceClean(p(stage)?),
            "c4" => StageOp::C4(p(stage)?),
            "gopher" => StageOp::Gopher(p(stage)?),
            "repetition" => StageOp::Repetition(p(stage)?),
            "pii_redact" => p::<NoParams>(stage).map(|_| StageOp::PiiRedact)?,
            "ocr_gate" => StageOp::OcrGate(p(stage)?),
            "web_band" => StageOp::WebBand(p(stage)?),
            "webselect" => StageOp::Webselect(p(stage)?),
            DEDUP_OPERATION => {
                if stage.params.contains_key("seed") {
                    return Err(PipelineError::Params {
                        stage: stage.name.clone(),
                        message: "seed comes from the pipeline seed".into(),
                    });
                }
                let cfg: DedupConfig = p(stage)?;
                cfg.validate().map_err(|e| PipelineError::Params { stage: stage.name.clone(), message: e.to_string() })?;
                StageOp::Dedup(cfg)
            }
            other => return Err(PipelineError::UnknownOperation { stage: stage.name.clone(), op: other.to_string() }),
        };
        if let StageOp::OcrGate(g) | StageOp::WebBand(g) = &op {
            g.validate().map_err(|e| PipelineError::Params { stage: stage.name.clone(), message: e.to_string() })?;
        }
        Ok(op)
    }
}

impl PipelineConfig {
    /// Parses a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<PipelineConfig, PipelineError> {
        let raw = fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&raw)?;
        cfg.base_dir = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn from_toml(raw: &str) -> Result<PipelineConfig, PipelineError> {
        let cfg: PipelineConfig = toml::from_str(raw)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that can be checked without touching files.
    pub fn validate(&self) -> Result<Vec<StageOp>, PipelineError> {
        if self.version != CONFIG_VERSION {
            return Err(PipelineError::Version { found: self.version });
        }
        if self.stages.is_empty() {
            return Err(PipelineError::Config("no stages".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.stages {
            if s.name.is_empty() || !seen.insert(s.name.as_str()) {
                return Err(PipelineError::Config(format!("stage names must be unique and non-empty ({:?})", s.name)));
            }
        }
        self.stages.iter().map(StageOp::parse).collect()
    }

    /// SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn sha256_records(docs: &[DocumentRecord]) -> String {
    let mut h = Sha256::new();
    for d in docs {
        h.update(d.to_line().as_bytes());
        h.update(b"\n");
    }
    hex(&h.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub op: String,
    pub input: usize,
    pub output: usize,
    pub dropped: usize,
    pub drops_by_rule: BTreeMap<String, usize>,
    pub output_sha256: String,
    /// Hash over the previous link and this stage's report.
    pub chain: String,
}

impl StageReport {
    fn link(&self, prev: &str) -> String {
        let body = format!(
            "{prev}|{}|{}|{}|{}|{}|{}|{}",
            self.name,
            self.op,
            self.input,
            self.output,
            self.dropped,
            serde_json::to_string(&self.drops_by_rule).expect("map serializes"),
            self.output_sha256
        );
        hex(&Sha256::digest(body.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub mode: ErrorMode,
    pub offline: bool,
    pub input_sha256: String,
    pub input_records: usize,
    pub input_skipped: usize,
    pub stages: Vec<StageReport>,
    pub output_records: usize,
    pub output_sha256: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Manifest {
    pub fn succeeded(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

pub const OUTPUT_FILE: &str = "output.jsonl";
pub const DECISIONS_FILE: &str = "decisions.jsonl";
pub const RULES_FILE: &str = "rules.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Serialize)]
struct StageDecision<'a> {
    stage: &'a str,
    #[serde(flatten)]
    record: DecisionRecord,
}

enum DocOutcome {
    Keep(DocumentRecord),
    Drop(FilterDecision),
}

type DocFn<'a> = dyn Fn(&DocumentRecord) -> Result<DocOutcome, String> + Sync + 'a;

struct StageResult {
    kept: Vec<DocumentRecord>,
    dropped: Vec<(DocumentRecord, FilterDecision)>,
    extra_files: Vec<(String, Vec<u8>)>,
}

fn per_document(docs: Vec<DocumentRecord>, mode: ErrorMode, f: &DocFn) -> Result<StageResult, String> {
    let results: Vec<Result<DocOutcome, String>> = docs.par_iter().map(f).collect();
    let mut out = StageResult { kept: Vec::new(), dropped: Vec::new(), extra_files: Vec::new() };
    for (doc, r) in docs.into_iter().zip(results) {
        match r {
            Ok(DocOutcome::Keep(d)) => out.kept.push(d),
            Ok(DocOutcome::Drop(dec)) => out.dropped.push((doc, dec)),
            Err(e) if mode == ErrorMode::Skip => {
                warn!("document {:?}: {e}", doc.id);
                out.dropped.push((doc, FilterDecision::drop(STAGE_ERROR_RULE, e)));
            }
            Err(e) => return Err(format!("document {:?}: {e}", doc.id)),
        }
    }
    Ok(out)
}

fn gate(doc: &DocumentRecord, d: FilterDecision) -> DocOutcome {
    if d.is_keep() {
        DocOutcome::Keep(doc.clone())
    } else {
        DocOutcome::Drop(d)
    }
}

fn run_stage(op: &StageOp, docs: Vec<DocumentRecord>, cfg: &PipelineConfig) -> Result<StageResult, String> {
    let mode = cfg.mode;
    match op {
        StageOp::Validate => {
            let mut partition = PartitionValidator::new();
            let mut out = StageResult { kept: Vec::new(), dropped: Vec::new(), extra_files: Vec::new() };
            for d in docs {
                let mut dec = validate_record(&d);
                if dec.is_keep() {
                    dec = partition.check(&d);
                }
                if dec.is_keep() {
                    out.kept.push(d);
                } else {
                    out.dropped.push((d, dec));
                }
            }
            Ok(out)
        }
        StageOp::SourceClean(p) => {
            let ctx = CleanContext { reference_year: p.reference_year.unwrap_or(CleanContext::default().reference_year), ..Default::default() };
            per_document(docs, mode, &|d| {
                Ok(match clean_source_specific(d, &ctx) {
                    Cleaned::Kept(d) => DocOutcome::Keep(d),
                    Cleaned::Dropped(dec) => DocOutcome::Drop(dec),
                })
            })
        }
        StageOp::C4(p) => {
            let mut c = C4Config::default();
            if let Some(path) = &p.badwords_file {
                c.load_badwords(&cfg.resolve(path)).map_err(|e| format!("badwords {}: {e}", path.display()))?;
            }
            if let Some(n) = p.min_words_per_line {
                c.min_words_per_line = n;
            }
            if let Some(n) = p.min_sentences {
                c.min_sentences = n;
            }
            per_document(docs, mode, &|d| {
                let o = c4_rules(d, &c);
                Ok(if o.decision.is_keep() {
                    let mut d = d.clone();
                    d.text = o.text;
                    DocOutcome::Keep(d)
                } else {
                    DocOutcome::Drop(o.decision)
                })
            })
        }
        StageOp::Gopher(g) => per_document(docs, mode, &|d| Ok(gate(d, gopher_rules(d, g)))),
        StageOp::Repetition(r) => per_document(docs, mode, &|d| Ok(gate(d, repetition_filter(d, r)))),
        StageOp::PiiRedact => per_document(docs, mode, &|d| Ok(DocOutcome::Keep(redact_pii(d, cfg.seed)))),
        StageOp::OcrGate(g) => per_document(docs, mode, &|d| ocr_score_gate_v12(d, g).map(|x| gate(d, x)).map_err(|e| e.to_string())),
        StageOp::WebBand(g) => {
            per_document(docs, mode, &|d| web_perplexity_band(d, None, g).map(|x| gate(d, x)).map_err(|e| e.to_string()))
        }
        StageOp::Webselect(p) => run_webselect(p, docs, cfg),
        StageOp::Dedup(c) => run_dedup(c, docs, cfg),
    }
}

fn run_webselect(p: &WebselectParams, docs: Vec<DocumentRecord>, cfg: &PipelineConfig) -> Result<StageResult, String> {
    let mut known = roster_domains();
    if let Some(path) = &p.known_domains_file {
        known.extend(load_domain_list(&cfg.resolve(path)).map_err(|e| e.to_string())?);
    }
    let blacklist = match &p.blacklist_file {
        Some(path) => load_domain_list(&cfg.resolve(path)).map_err(|e| e.to_string())?,
        None => Default::default(),
    };
    let robots: Box<dyn crate::web::RobotsProvider> = match (&p.robots_dir, cfg.offline) {
        (Some(dir), _) => Box::new(SnapshotProvider::new(cfg.resolve(dir))),
        (None, false) => Box::new(
            LiveProvider::new(std::time::Duration::from_secs(10), std::time::Duration::from_secs(1)).map_err(|e| e.to_string())?,
        ),
        (None, true) => return Err("offline webselect needs robots_dir".into()),
    };
    let sel = WebSelector { known_domains: known, blacklist, robots };
    let verdicts: Vec<Option<Result<crate::web::UrlVerdict, String>>> = docs
        .par_iter()
        .map(|d| d.url.as_deref().filter(|u| !u.is_empty()).map(|u| sel.verdict(u).map_err(|e| e.to_string())))
        .collect();
    let mut out = StageResult { kept: Vec::new(), dropped: Vec::new(), extra_files: Vec::new() };
    let mut report = Vec::new();
    for (d, v) in docs.into_iter().zip(verdicts) {
        match v {
            None => out.kept.push(d),
            Some(Ok(v)) => {
                let decision = match (v.verdict, v.rule) {
                    (UrlDecision::Keep, _) => None,
                    (UrlDecision::Drop, Some(rule)) => Some(FilterDecision::drop(rule.as_str(), format!("url {}", v.url))),
                    _ => Some(FilterDecision::drop("robots_unknown", format!("robots.txt lookup failed for {}", v.url))),
                };
                report.push(v);
                match decision {
                    None => out.kept.push(d),
                    Some(dec) => out.dropped.push((d, dec)),
                }
            }
            Some(Err(e)) if cfg.mode == ErrorMode::Skip => out.dropped.push((d, FilterDecision::drop(STAGE_ERROR_RULE, e))),
            Some(Err(e)) => return Err(format!("document {:?}: {e}", d.id)),
        }
    }
    let mut buf = Vec::new();
    write_verdicts(&report, &mut buf).map_err(|e| e.to_string())?;
    out.extra_files.push(("url_verdicts.csv".into(), buf));
    Ok(out)
}

/// Partitions by snapshot and language; documents without a snapshot are
/// grouped by source instead.
fn run_dedup(c: &DedupConfig, docs: Vec<DocumentRecord>, cfg: &PipelineConfig) -> Result<StageResult, String> {
    let c = DedupConfig { seed: cfg.seed, ..c.clone() };
    let mut parts: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, d) in docs.iter().enumerate() {
        let key = match partition_key(d) {
            Ok(k) => k.to_string(),
            Err(_) => format!("source:{}/{}", d.source, d.language),
        };
        parts.entry(key).or_default().push(i);
    }
    let results: Vec<_> = parts
        .par_iter()
        .map(|(key, members)| {
            let refs: Vec<&DocumentRecord> = members.iter().map(|&i| &docs[i]).collect();
            dedup_partition(key, &refs, &c, None).map(|(o, _)| (members, o))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut keep = vec![true; docs.len()];
    let mut rows: Vec<DropRow> = Vec::new();
    for (members, o) in results {
        for (local, k) in o.keep.iter().enumerate() {
            keep[members[local]] = *k;
        }
        rows.extend(o.drops);
    }
    let by_id: BTreeMap<&str, &DropRow> = rows.iter().map(|r| (r.dropped_id.as_str(), r)).collect();
    let mut out = StageResult { kept: Vec::new(), dropped: Vec::new(), extra_files: Vec::new() };
    let mut decisions = Vec::new();
    for (i, d) in docs.iter().enumerate() {
        if keep[i] {
            continue;
        }
        let dec = match by_id.get(d.id.as_str()) {
            Some(r) => FilterDecision::drop("near_duplicate", format!("duplicate of {}", r.kept_id))
                .with("verified_similarity", r.verified_similarity),
            None => FilterDecision::drop("near_duplicate", "duplicate"),
        };
        decisions.push((i, dec));
    }
    let mut dec_iter = decisions.into_iter().peekable();
    for (i, d) in docs.into_iter().enumerate() {
        match dec_iter.peek() {
            Some((j, _)) if *j == i => out.dropped.push((d, dec_iter.next().unwrap().1)),
            _ => out.kept.push(d),
        }
    }
    let mut buf = Vec::new();
    write_drop_report(&rows, &mut buf).map_err(|e| e.to_string())?;
    out.extra_files.push(("dedup_drops.csv".into(), buf));
    Ok(out)
}

/// Runs every stage in order and writes the output, decision log, rule
/// summary and manifest into `output_dir`. A strict-mode stage failure
/// still writes a manifest, marked failed.
pub fn run(cfg: &PipelineConfig, jobs: Option<usize>) -> Result<Manifest, PipelineError> {
    let ops = cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| PipelineError::Config(e.to_string()))?;
    pool.install(|| run_inner(cfg, &ops))
}

fn run_inner(cfg: &PipelineConfig, ops: &[StageOp]) -> Result<Manifest, PipelineError> {
    let input_path = cfg.resolve(&cfg.input);
    let out_dir = cfg.output_path();
    let input_bytes = fs::read(&input_path)?;
    let input_sha256 = hex(&Sha256::digest(&input_bytes));
    let mut reader = read_records(&input_path, cfg.mode)?;
    let mut docs = Vec::new();
    for r in reader.by_ref() {
        docs.push(r?.value);
    }
    let input_skipped = reader.skipped().len();
    fs::create_dir_all(&out_dir)?;

    let mut manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        mode: cfg.mode,
        offline: cfg.offline,
        input_sha256,
        input_records: docs.len(),
        input_skipped,
        stages: Vec::new(),
        output_records: 0,
        output_sha256: String::new(),
        status: RunStatus::Ok,
        failed_stage: None,
        error: None,
    };
    let mut decisions = BufWriter::new(File::create(out_dir.join(DECISIONS_FILE))?);
    let mut rules = csv::Writer::from_path(out_dir.join(RULES_FILE)).map_err(csv_io)?;
    rules.write_record(["stage", "rule_id", "dropped"]).map_err(csv_io)?;
    let mut prev = manifest.config_hash.clone();

    for (stage, op) in cfg.stages.iter().zip(ops) {
        let input = docs.len();
        info!("stage {} ({}): {input} documents", stage.name, stage.op);
        let result = match run_stage(op, std::mem::take(&mut docs), cfg) {
            Ok(r) => r,
            Err(e) => {
                manifest.status = RunStatus::Failed;
                manifest.failed_stage = Some(stage.name.clone());
                manifest.error = Some(e);
                break;
            }
        };
        let mut drops_by_rule: BTreeMap<String, usize> = BTreeMap::new();
        for (d, dec) in &result.dropped {
            *drops_by_rule.entry(dec.rule_id.clone()).or_default() += 1;
            let line = StageDecision { stage: &stage.name, record: DecisionRecord::new(d, dec) };
            serde_json::to_writer(&mut decisions, &line)?;
            decisions.write_all(b"\n")?;
        }
        for (rule, n) in &drops_by_rule {
            rules.write_record([stage.name.as_str(), rule, &n.to_string()]).map_err(csv_io)?;
        }
        for (name, bytes) in &result.extra_files {
            fs::write(out_dir.join(format!("{}.{name}", stage.name)), bytes)?;
        }
        let mut report = StageReport {
            name: stage.name.clone(),
            op: stage.op.clone(),
            input,
            output: result.kept.len(),
            dropped: result.dropped.len(),
            drops_by_rule,
            output_sha256: sha256_records(&result.kept),
            chain: String::new(),
        };
        report.chain = report.link(&prev);
        prev = report.chain.clone();
        manifest.stages.push(report);
        docs = result.kept;
    }
    decisions.flush()?;
    rules.flush()?;

    let mut out = BufWriter::new(File::create(out_dir.join(OUTPUT_FILE))?);
    for d in &docs {
        out.write_all(d.to_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    manifest.output_records = docs.len();
    manifest.output_sha256 = sha256_records(&docs);
    let mut f = File::create(out_dir.join(MANIFEST_FILE))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    Ok(manifest)
}

fn csv_io(e: csv::Error) -> PipelineError {
    PipelineError::Io(std::io::Error::other(e))
}

/// Recomputes the output hash and the stage hash chain of a finished run.
pub fn verify_run(output_dir: &Path) -> Result<Manifest, PipelineError> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(output_dir.join(MANIFEST_FILE))?)?;
    let out = fs::read(output_dir.join(OUTPUT_FILE))?;
    if hex(&Sha256::digest(&out)) != manifest.output_sha256 {
        return Err(PipelineError::Tampered(format!("{OUTPUT_FILE} does not match the manifest")));
    }
    let mut prev = manifest.config_hash.clone();
    for s in &manifest.stages {
        if s.input != s.output + s.dropped {
            return Err(PipelineError::Tampered(format!("stage {} counts do not reconcile", s.name)));
        }
        if s.link(&prev) != s.chain {
            return Err(PipelineError::Tampered(format!("hash chain broken at stage {}", s.name)));
        }
        prev = s.chain.clone();
    }
    if manifest.succeeded() && manifest.stages.last().is_some_and(|s| s.output_sha256 != manifest.output_sha256) {
        return Err(PipelineError::Tampered("last stage output differs from the written output".into()));
    }
    Ok(manifest)
}
