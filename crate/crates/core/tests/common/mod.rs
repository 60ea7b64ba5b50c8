#![allow(dead_code)]

use std::path::Path;

use corpuskit::corpus::{DocumentRecord, IsoCode};
use corpuskit::langid::bundled_sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

fn sentences(lang: IsoCode) -> Vec<&'static str> {
    bundled_sample(lang).lines().map(str::trim).filter(|l| l.split_whitespace().count() >= 6).collect()
}

/// Deterministic mixed-quality corpus: clean prose, boilerplate, exact and
/// near duplicates, short fragments, repeated lines, PII and invalid records.
pub fn fixture_corpus(n: usize, seed: u64) -> Vec<DocumentRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pools = [(IsoCode::En, "en", sentences(IsoCode::En)), (IsoCode::Fr, "fr", sentences(IsoCode::Fr))];
    let mut docs: Vec<DocumentRecord> = Vec::with_capacity(n);
    for i in 0..n {
        let (_, lang, pool) = &pools[i % 2];
        let k = rng.gen_range(6..12);
        let mut lines: Vec<String> = pool.choose_multiple(&mut rng, k).map(|s| s.to_string()).collect();
        let source = if i % 3 == 0 { "Wikipedia" } else { "RedPajama" };
        let mut d = DocumentRecord::new("", *lang, source, format!("doc-{i:04}"));
        match i % 20 {
            3 => lines.push("Lorem ipsum dolor sit amet, consectetur adipiscing elit.".into()),
            5 => lines.truncate(1),
            7 if i >= 20 => {
                let src = docs[i - 20].clone();
                d.text = src.text;
            }
            9 => {
                let l = lines[0].clone();
                lines = vec![l; 8];
            }
            11 => lines.push(format!("Write to person{i}@mailhost.fr or call the server at 10.1.{}.{}.", i % 250, i % 200)),
            13 if i >= 40 => {
                let src = &docs[i - 40];
                d.text = format!("{}\nThis sentence was appended to make a near duplicate copy.", src.text);
            }
            15 => {
                d.text = "The cat sat on the warm mat.\nThe dog ran to the old red gate.\nThe bird sang in the tall green tree.".into()
            }
            17 => d.source = "NotASource".into(),
            _ => {}
        }
        if d.text.is_empty() {
            d.text = lines.join("\n");
        }
        if source == "RedPajama" {
            d.set_extra(json!({"snapshot": "2023-14"}).as_object().unwrap());
            d.url = Some(format!("https://site{}.example-{}.net/page/{i}", i % 7, lang));
        }
        docs.push(d);
    }
    docs
}

pub fn write_fixture(path: &Path, docs: &[DocumentRecord]) {
    let body: String = docs.iter().map(|d| d.to_line() + "\n").collect();
    std::fs::write(path, body).unwrap();
}

pub const FIXTURE_CONFIG: &str = r#"
version = 1
seed = 1234
mode = "skip"
input = "input.jsonl"
output_dir = "out"

[[stages]]
name = "validate"
op = "validate"

[[stages]]
name = "clean"
op = "source_clean"

[[stages]]
name = "c4"
op = "c4"

[[stages]]
name = "gopher"
op = "gopher"

[[stages]]
name = "repetition"
op = "repetition"

[[stages]]
name = "pii"
op = "pii_redact"

[[stages]]
name = "dedup"
op = "dedup"
params = { k = 5, num_perm = 112, bands = 14, rows = 8, threshold = 0.75 }
"#;
