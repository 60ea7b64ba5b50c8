use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use log::warn;
use serde::{Deserialize, Serialize};

use super::{validate_record, CorpusError, DocumentRecord};

/// What a reader or writer does with a bad line or record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMode {
    /// Stop at the first error.
    #[default]
    Strict,
    /// Log the error, remember it, and continue.
    Skip,
}

impl std::str::FromStr for ErrorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(ErrorMode::Strict),
            "skip" => Ok(ErrorMode::Skip),
            other => Err(format!("unknown error mode {other:?} (expected strict or skip)")),
        }
    }
}

/// A record together with the 1-based line it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Located<T> {
    pub line: usize,
    pub offset: u64,
    pub value: T,
}

/// Single-pass reader over line-delimited records.
pub struct RecordReader<R> {
    inner: R,
    mode: ErrorMode,
    line_no: usize,
    offset: u64,
    buf: String,
    failed: bool,
    errors: Vec<CorpusError>,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(inner: R, mode: ErrorMode) -> Self {
        RecordReader {
            inner,
            mode,
            line_no: 0,
            offset: 0,
            buf: String::new(),
            failed: false,
            errors: Vec::new(),
        }
    }

    /// Errors skipped so far (skip mode only).
    pub fn skipped(&self) -> &[CorpusError] {
        &self.errors
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<Located<DocumentRecord>, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            self.buf.clear();
            let start = self.offset;
            let n = match self.inner.read_line(&mut self.buf) {
                Ok(n) => n,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(CorpusError::Io(e)));
                }
            };
            if n == 0 {
                return None;
            }
            self.line_no += 1;
            self.offset += n as u64;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                continue;
            }
            match DocumentRecord::from_line(line) {
                Ok(value) => {
                    return Some(Ok(Located {
                        line: self.line_no,
                        offset: start,
                        value,
                    }))
                }
                Err(e) => {
                    let err = CorpusError::Parse {
                        line: self.line_no,
                        offset: start,
                        message: e.to_string(),
                    };
                    match self.mode {
                        ErrorMode::Strict => {
                            self.failed = true;
                            return Some(Err(err));
                        }
                        ErrorMode::Skip => {
                            warn!("skipping unparseable record: {err}");
                            self.errors.push(err);
                        }
                    }
                }
            }
        }
    }
}

/// Opens a record file; gzip input is detected by its magic bytes.
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>, CorpusError> {
    let mut file = File::open(path).map_err(CorpusError::Io)?;
    let mut magic = [0u8; 2];
    let got = read_prefix(&mut file, &mut magic)?;
    let file = File::open(path).map_err(CorpusError::Io)?;
    if got == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

fn read_prefix(file: &mut File, buf: &mut [u8]) -> Result<usize, CorpusError> {
    let mut filled = 0;
    while filled < buf.len() {
        match file.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(CorpusError::Io(e)),
        }
    }
    Ok(filled)
}

pub fn read_records(
    path: &Path,
    mode: ErrorMode,
) -> Result<RecordReader<Box<dyn BufRead>>, CorpusError> {
    Ok(RecordReader::new(open_input(path)?, mode))
}

/// Reads a whole file into memory, failing or skipping per `mode`.
pub fn read_all(path: &Path, mode: ErrorMode) -> Result<Vec<DocumentRecord>, CorpusError> {
    read_records(path, mode)?
        .map(|r| r.map(|l| l.value))
        .collect()
}

/// Line-delimited record writer. In strict mode every record is validated
/// before it is written and the first invalid one stops the writer.
pub struct RecordWriter<W: Write> {
    out: W,
    mode: ErrorMode,
    written: usize,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(out: W, mode: ErrorMode) -> Self {
        RecordWriter {
            out,
            mode,
            written: 0,
        }
    }

    pub fn write(&mut self, record: &DocumentRecord) -> Result<(), CorpusError> {
        if self.mode == ErrorMode::Strict {
            let d = validate_record(record);
            if d.is_drop() {
                return Err(CorpusError::Write {
                    written: self.written,
                    message: format!("invalid record {:?}: {}", record.id, d.reason),
                });
            }
        }
        let io_err = |written, e: io::Error| CorpusError::Write {
            written,
            message: e.to_string(),
        };
        self.out
            .write_all(record.to_line().as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(|e| io_err(self.written, e))?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn finish(mut self) -> Result<usize, CorpusError> {
        let written = self.written;
        self.out.flush().map_err(|e| CorpusError::Write {
            written,
            message: e.to_string(),
        })?;
        Ok(written)
    }
}

/// Writes `records` to `path` and returns how many were written.
pub fn write_records<'a, I>(records: I, path: &Path, mode: ErrorMode) -> Result<usize, CorpusError>
where
    I: IntoIterator<Item = &'a DocumentRecord>,
{
    let file = File::create(path).map_err(|e| CorpusError::Write {
        written: 0,
        message: e.to_string(),
    })?;
    let mut writer = RecordWriter::new(BufWriter::new(file), mode);
    for r in records {
        writer.write(r)?;
    }
    writer.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn rec(i: usize) -> DocumentRecord {
        DocumentRecord::new(format!("text {i}"), "fr", "Wikipedia", i.to_string())
    }

    #[test]
    fn reads_in_order() {
        let data = (1..=3).map(|i| rec(i).to_line() + "\n").collect::<String>();
        let got: Vec<_> = RecordReader::new(Cursor::new(data), ErrorMode::Strict)
            .map(|r| r.unwrap())
            .collect();
        assert_eq!(got.len(), 3);
        assert_eq!(got.iter().map(|l| l.line).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(got[2].value.id, "3");
    }

    #[test]
    fn skip_mode_logs_and_continues() {
        let data = format!("{}\nnot json\n{}\n", rec(1).to_line(), rec(3).to_line());
        let mut reader = RecordReader::new(Cursor::new(data), ErrorMode::Skip);
        let ids: Vec<_> = reader.by_ref().map(|r| r.unwrap().value.id).collect();
        assert_eq!(ids, vec!["1", "3"]);
        assert_eq!(reader.skipped().len(), 1);
        match &reader.skipped()[0] {
            CorpusError::Parse { line, offset, .. } => {
                assert_eq!(*line, 2);
                assert_eq!(*offset, rec(1).to_line().len() as u64 + 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strict_mode_stops() {
        let data = format!("{}\nnot json\n{}\n", rec(1).to_line(), rec(3).to_line());
        let items: Vec<_> = RecordReader::new(Cursor::new(data), ErrorMode::Strict).collect();
        assert_eq!(items.len(), 2);
        assert!(items[1].is_err());
    }

    #[test]
    fn empty_input() {
        assert_eq!(RecordReader::new(Cursor::new(""), ErrorMode::Strict).count(), 0);
    }

    #[test]
    fn strict_writer_stops_at_invalid_record() {
        let mut bad = rec(2);
        bad.source = "FooCorpus".into();
        let records = vec![rec(1), bad, rec(3)];
        let mut out = Vec::new();
        let mut w = RecordWriter::new(&mut out, ErrorMode::Strict);
        let mut result = Ok(());
        for r in &records {
            result = w.write(r);
            if result.is_err() {
                break;
            }
        }
        match result {
            Err(CorpusError::Write { written, .. }) => assert_eq!(written, 1),
            other => panic!("{other:?}"),
        }
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn gzip_is_transparent() {
        use flate2::write::GzEncoder;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl.gz");
        let mut enc = GzEncoder::new(File::create(&path).unwrap(), flate2::Compression::default());
        writeln!(enc, "{}", rec(7).to_line()).unwrap();
        enc.finish().unwrap();
        let got = read_all(&path, ErrorMode::Strict).unwrap();
        assert_eq!(got, vec![rec(7)]);
    }

    #[test]
    fn empty_stream_gives_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        let n = write_records(std::iter::empty(), &path, ErrorMode::Strict).unwrap();
        assert_eq!(n, 0);
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 0);
    }

    fn record_strategy() -> impl Strategy<Value = DocumentRecord> {
        let opt = || proptest::option::of("\\PC{0,12}");
        (
            "[^\r\u{0}]{0,60}",
            prop::sample::select(vec!["fr", "en", "code:rust", "fr,en"]),
            prop::sample::select(vec!["Wikipedia", "HAL", "RedPajama"]),
            "[a-z0-9_]{1,12}",
            opt(),
            opt(),
            opt(),
            opt(),
            proptest::option::of((0u32..1000, -1.0e6f64..1.0e6)),
        )
            .prop_map(|(text, lang, src, id, url, title, author, date, qs)| {
                let mut r = DocumentRecord::new(text, lang, src, id);
                r.url = url;
                r.title = title;
                r.author = author;
                r.date = date;
                r.quality_signals = qs.map(|(a, b)| {
                    format!("{{\"char_count\": {a}, \"ccnet_perplexity\": {b}}}")
                });
                r
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn write_then_read_round_trips(records in prop::collection::vec(record_strategy(), 0..20)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("r.jsonl");
            let n = write_records(&records, &path, ErrorMode::Skip).unwrap();
            prop_assert_eq!(n, records.len());
            let back = read_all(&path, ErrorMode::Strict).unwrap();
            prop_assert_eq!(back, records);
        }
    }
}
