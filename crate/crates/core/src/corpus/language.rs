use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// The five natural languages the corpus targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsoCode {
    En,
    Fr,
    De,
    Es,
    It,
}

impl IsoCode {
    pub const ALL: [IsoCode; 5] = [IsoCode::En, IsoCode::Fr, IsoCode::De, IsoCode::Es, IsoCode::It];

    pub fn as_str(self) -> &'static str {
        match self {
            IsoCode::En => "en",
            IsoCode::Fr => "fr",
            IsoCode::De => "de",
            IsoCode::Es => "es",
            IsoCode::It => "it",
        }
    }

    /// English name of the language, used by name-style prefixes.
    pub fn english_name(self) -> &'static str {
        match self {
            IsoCode::En => "English",
            IsoCode::Fr => "French",
            IsoCode::De => "German",
            IsoCode::Es => "Spanish",
            IsoCode::It => "Italian",
        }
    }
}

impl fmt::Display for IsoCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IsoCode {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(IsoCode::En),
            "fr" => Ok(IsoCode::Fr),
            "de" => Ok(IsoCode::De),
            "es" => Ok(IsoCode::Es),
            "it" => Ok(IsoCode::It),
            other => Err(CorpusError::LanguageTag {
                fragment: other.to_string(),
                message: "not one of en, fr, de, es, it".into(),
            }),
        }
    }
}

/// Value of the `language` field of a record.
///
/// Textual forms: `fr`, `code:python`, `fr,en`. The pair form is ordered: the
/// first code is the language of the first passage.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LanguageTag {
    Natural(IsoCode),
    Programming(String),
    Pair(IsoCode, IsoCode),
}

const CODE_PREFIX: &str = "code:";

impl LanguageTag {
    pub fn parse(raw: &str) -> Result<Self, CorpusError> {
        if raw.is_empty() {
            return Err(CorpusError::LanguageTag {
                fragment: String::new(),
                message: "empty language tag".into(),
            });
        }
        if let Some(name) = raw.strip_prefix(CODE_PREFIX) {
            if name.is_empty() || name.chars().any(|c| c == ',' || c.is_whitespace()) {
                return Err(CorpusError::LanguageTag {
                    fragment: name.to_string(),
                    message: "programming language name must be non-empty without commas or whitespace".into(),
                });
            }
            return Ok(LanguageTag::Programming(name.to_string()));
        }
        if let Some((first, second)) = raw.split_once(',') {
            if second.contains(',') {
                return Err(CorpusError::LanguageTag {
                    fragment: raw.to_string(),
                    message: "a pair holds exactly two codes".into(),
                });
            }
            let a: IsoCode = first.parse()?;
            let b: IsoCode = second.parse()?;
            if a == b {
                return Err(CorpusError::LanguageTag {
                    fragment: raw.to_string(),
                    message: "pair languages must differ".into(),
                });
            }
            return Ok(LanguageTag::Pair(a, b));
        }
        Ok(LanguageTag::Natural(raw.parse()?))
    }

    /// The natural language when the tag is monolingual.
    pub fn natural(&self) -> Option<IsoCode> {
        match self {
            LanguageTag::Natural(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_code(&self) -> bool {
        matches!(self, LanguageTag::Programming(_))
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LanguageTag::Natural(c) => write!(f, "{c}"),
            LanguageTag::Programming(name) => write!(f, "{CODE_PREFIX}{name}"),
            LanguageTag::Pair(a, b) => write!(f, "{a},{b}"),
        }
    }
}

impl FromStr for LanguageTag {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageTag::parse(s)
    }
}
