//! URL-level selection: domain overlap, blacklists and robots.txt opt-outs.

mod provider;
mod robots;

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use provider::{LiveProvider, RobotsLookup, RobotsProvider, SnapshotProvider, StaticProvider};
pub use robots::Robots;

/// User agent whose permissions are checked.
pub const CRAWLER_AGENT: &str = "CCBot";

#[derive(Debug, thiserror::Error)]
pub enum WebError {
    #[error("invalid URL {url:?}: {message}")]
    InvalidUrl { url: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UrlRule {
    DomainOverlap,
    Blacklist,
    RobotsMissing,
    RobotsDisallow,
}

impl UrlRule {
    pub fn as_str(self) -> &'static str {
        match self {
            UrlRule::DomainOverlap => "domain_overlap",
            UrlRule::Blacklist => "blacklist",
            UrlRule::RobotsMissing => "robots_missing",
            UrlRule::RobotsDisallow => "robots_disallow",
        }
    }
}

impl fmt::Display for UrlRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UrlDecision {
    Keep,
    Drop,
    /// The robots lookup could not be completed; never treated as keep.
    Unknown,
}

impl UrlDecision {
    pub fn as_str(self) -> &'static str {
        match self {
            UrlDecision::Keep => "keep",
            UrlDecision::Drop => "drop",
            UrlDecision::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UrlVerdict {
    pub url: String,
    pub verdict: UrlDecision,
    /// Set exactly when `verdict` is drop.
    pub rule: Option<UrlRule>,
    /// Host whose robots.txt decided the verdict (the host itself or its apex).
    pub matched_host: Option<String>,
}

impl UrlVerdict {
    fn keep(url: &str) -> Self {
        UrlVerdict { url: url.into(), verdict: UrlDecision::Keep, rule: None, matched_host: None }
    }

    fn drop(url: &str, rule: UrlRule) -> Self {
        UrlVerdict { url: url.into(), verdict: UrlDecision::Drop, rule: Some(rule), matched_host: None }
    }

    pub fn is_keep(&self) -> bool {
        self.verdict == UrlDecision::Keep
    }
}

fn parse_url(raw: &str) -> Result<url::Url, WebError> {
    let u = url::Url::parse(raw).map_err(|e| WebError::InvalidUrl { url: raw.into(), message: e.to_string() })?;
    if u.host_str().is_none_or(str::is_empty) {
        return Err(WebError::InvalidUrl { url: raw.into(), message: "no host".into() });
    }
    Ok(u)
}

/// Registrable domain of a host (public-suffix aware). IP addresses and hosts
/// without a registrable part are returned unchanged.
pub fn host_base_domain(host: &str) -> String {
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    if host.parse::<std::net::IpAddr>().is_ok() || host.starts_with('[') {
        return host;
    }
    psl::domain_str(&host).map_or(host.clone(), str::to_string)
}

pub fn base_domain(raw: &str) -> Result<String, WebError> {
    let u = parse_url(raw)?;
    Ok(host_base_domain(u.host_str().unwrap_or_default()))
}

/// Domains of the sources already in the corpus.
pub fn roster_domains() -> BTreeSet<String> {
    [
        "assemblee-nationale.fr",
        "senat.fr",
        "vie-publique.fr",
        "europa.eu",
        "bnf.fr",
        "gutenberg.org",
        "hal.science",
        "archives-ouvertes.fr",
        "legifrance.gouv.fr",
        "data.gouv.fr",
        "openedition.org",
        "semanticscholar.org",
        "philpapers.org",
        "arxiv.org",
        "theses.fr",
        "wikipedia.org",
        "wikisource.org",
        "wiktionary.org",
        "youtube.com",
        "loc.gov",
        "stackexchange.com",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

/// Reads one domain per line; `#` starts a comment.
pub fn load_domain_list(path: &Path) -> Result<BTreeSet<String>, WebError> {
    let raw = std::fs::read_to_string(path)?;
    Ok(raw
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim().trim_end_matches('.').to_ascii_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

pub fn overlap_filter(raw: &str, known: &BTreeSet<String>) -> Result<UrlVerdict, WebError> {
    let base = base_domain(raw)?;
    Ok(if known.contains(&base) { UrlVerdict::drop(raw, UrlRule::DomainOverlap) } else { UrlVerdict::keep(raw) })
}

pub fn blacklist_filter(raw: &str, blacklist: &BTreeSet<String>) -> Result<UrlVerdict, WebError> {
    let u = parse_url(raw)?;
    let host = u.host_str().unwrap_or_default().to_ascii_lowercase();
    let hit = blacklist.contains(&host) || blacklist.contains(&host_base_domain(&host));
    Ok(if hit { UrlVerdict::drop(raw, UrlRule::Blacklist) } else { UrlVerdict::keep(raw) })
}

/// Checks the host's robots.txt, falling back to the apex domain's when the
/// host has none.
pub fn optout_filter(raw: &str, robots: &dyn RobotsProvider) -> Result<UrlVerdict, WebError> {
    let u = parse_url(raw)?;
    let host = u.host_str().unwrap_or_default().to_ascii_lowercase();
    let apex = host_base_domain(&host);
    let mut lookup = robots.lookup(&host);
    let mut matched = host.clone();
    if lookup == RobotsLookup::Missing && apex != host {
        lookup = robots.lookup(&apex);
        matched = apex;
    }
    let mut v = match lookup {
        RobotsLookup::Missing => return Ok(UrlVerdict::drop(raw, UrlRule::RobotsMissing)),
        RobotsLookup::Unknown(_) => UrlVerdict { url: raw.into(), verdict: UrlDecision::Unknown, rule: None, matched_host: None },
        RobotsLookup::Found(body) => {
            let mut path = u.path().to_string();
            if let Some(q) = u.query() {
                path.push('?');
                path.push_str(q);
            }
            if Robots::parse(&body).is_allowed(CRAWLER_AGENT, &path) {
                UrlVerdict::keep(raw)
            } else {
                UrlVerdict::drop(raw, UrlRule::RobotsDisallow)
            }
        }
    };
    v.matched_host = Some(matched);
    Ok(v)
}

/// All three URL filters in fixed precedence: overlap, blacklist, robots.
pub struct WebSelector {
    pub known_domains: BTreeSet<String>,
    pub blacklist: BTreeSet<String>,
    pub robots: Box<dyn RobotsProvider>,
}

impl WebSelector {
    pub fn verdict(&self, raw: &str) -> Result<UrlVerdict, WebError> {
        let v = overlap_filter(raw, &self.known_domains)?;
        if !v.is_keep() {
            return Ok(v);
        }
        let v = blacklist_filter(raw, &self.blacklist)?;
        if !v.is_keep() {
            return Ok(v);
        }
        optout_filter(raw, self.robots.as_ref())
    }
}

/// CSV with columns `url,verdict,rule`.
pub fn write_verdicts<W: Write>(verdicts: &[UrlVerdict], w: W) -> Result<(), WebError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["url", "verdict", "rule"])?;
    for v in verdicts {
        out.write_record([v.url.as_str(), v.verdict.as_str(), v.rule.map_or("", UrlRule::as_str)])?;
    }
    out.flush()?;
    Ok(())
}
