use std::collections::{HashMap, HashSet};
use std::net::Ipv4Addr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use crate::corpus::DocumentRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PiiKind {
    Email,
    Ipv4,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiiMatch {
    pub kind: PiiKind,
    pub start: usize,
    pub end: usize,
}

fn email_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[A-Za-z0-9._%+\-]+@[A-Za-z0-9\-]+(?:\.[A-Za-z0-9\-]+)+").unwrap())
}

fn ipv4_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[0-9]{1,3}\.[0-9]{1,3}\.[0-9]{1,3}\.[0-9]{1,3}").unwrap())
}

/// Domains reserved for documentation; synthetic emails use them.
const RESERVED_DOMAINS: [&str; 3] = ["example.com", "example.net", "example.org"];

/// Documentation networks 192.0.2.0/24, 198.51.100.0/24, 203.0.113.0/24.
const RESERVED_NETS: [[u8; 3]; 3] = [[192, 0, 2], [198, 51, 100], [203, 0, 113]];

fn reserved_email(s: &str) -> bool {
    let domain = s.rsplit_once('@').map_or("", |(_, d)| d).to_ascii_lowercase();
    RESERVED_DOMAINS
        .iter()
        .any(|r| domain == *r || domain.ends_with(&format!(".{r}")))
}

fn reserved_ip(ip: Ipv4Addr) -> bool {
    let o = ip.octets();
    RESERVED_NETS.iter().any(|n| n[..] == o[..3])
}

/// Email-shaped and IPv4-shaped spans, non-overlapping and sorted. Addresses
/// in the reserved documentation ranges are not reported.
pub fn detect_pii(text: &str) -> Vec<PiiMatch> {
    let mut out: Vec<PiiMatch> = email_re()
        .find_iter(text)
        .filter(|m| !reserved_email(m.as_str()))
        .map(|m| PiiMatch { kind: PiiKind::Email, start: m.start(), end: m.end() })
        .collect();
    let bytes = text.as_bytes();
    let mut pos = 0;
    while let Some(m) = ipv4_re().find_at(text, pos) {
        let (s, e) = (m.start(), m.end());
        let digit_before = s > 0 && bytes[s - 1].is_ascii_digit();
        let dotted_before = s >= 2 && bytes[s - 1] == b'.' && bytes[s - 2].is_ascii_digit();
        let digit_after = e < bytes.len() && bytes[e].is_ascii_digit();
        let dotted_after = e + 1 < bytes.len() && bytes[e] == b'.' && bytes[e + 1].is_ascii_digit();
        let valid = !(digit_before || dotted_before || digit_after || dotted_after)
            && m.as_str().parse::<Ipv4Addr>().is_ok_and(|ip| !reserved_ip(ip))
            && m.as_str().split('.').all(|o| o == "0" || !o.starts_with('0'));
        if valid && !out.iter().any(|x| x.start < e && s < x.end) {
            out.push(PiiMatch { kind: PiiKind::Ipv4, start: s, end: e });
        }
        // Restart just after the first octet so shifted windows are tried.
        pos = s + text[s..].find('.').unwrap_or(1).max(1);
    }
    out.sort_by_key(|m| m.start);
    out
}

fn synthetic(kind: PiiKind, rng: &mut ChaCha8Rng) -> String {
    match kind {
        PiiKind::Email => {
            let d = RESERVED_DOMAINS[rng.gen_range(0..RESERVED_DOMAINS.len())];
            format!("user{}@{d}", rng.gen_range(0..1_000_000u32))
        }
        PiiKind::Ipv4 => {
            let n = RESERVED_NETS[rng.gen_range(0..RESERVED_NETS.len())];
            format!("{}.{}.{}.{}", n[0], n[1], n[2], rng.gen_range(1..255u8))
        }
    }
}

/// Replaces every detected span with a synthetic reserved address. The same
/// original maps to the same replacement throughout the text, distinct
/// originals get distinct replacements while the pool allows it, and the
/// result contains no detector match.
pub fn redact_text(text: &str, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map: HashMap<String, String> = HashMap::new();
    let mut used: HashSet<String> = HashSet::new();
    let mut cur = text.to_string();
    // Replacements can only create new matches by joining with neighbouring
    // characters, so a handful of passes always suffices.
    for _ in 0..16 {
        let matches = detect_pii(&cur);
        if matches.is_empty() {
            return cur;
        }
        let mut out = String::with_capacity(cur.len());
        let mut last = 0;
        for m in matches {
            out.push_str(&cur[last..m.start]);
            let original = &cur[m.start..m.end];
            let rep = map.entry(original.to_string()).or_insert_with(|| {
                let mut r = synthetic(m.kind, &mut rng);
                for _ in 0..64 {
                    if !used.contains(&r) {
                        break;
                    }
                    r = synthetic(m.kind, &mut rng);
                }
                used.insert(r.clone());
                r
            });
            out.push_str(rep);
            last = m.end;
        }
        out.push_str(&cur[last..]);
        cur = out;
    }
    // Unreachable in practice; strip anything left rather than leak it.
    let mut out = String::new();
    let mut last = 0;
    for m in detect_pii(&cur) {
        out.push_str(&cur[last..m.start]);
        last = m.end;
    }
    out.push_str(&cur[last..]);
    out
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

/// Redacts `text`. The generator is seeded from `seed` and the document id.
pub fn redact_pii(doc: &DocumentRecord, seed: u64) -> DocumentRecord {
    let mut out = doc.clone();
    out.text = redact_text(&doc.text, seed ^ fnv1a(&doc.id));
    out
}
