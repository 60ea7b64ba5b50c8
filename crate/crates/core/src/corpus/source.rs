use std::fmt;
use std::str::FromStr;

use super::CorpusError;

macro_rules! sources {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// Closed set of corpus source identifiers.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum SourceId {
            $($variant),+
        }

        impl SourceId {
            pub const ALL: &'static [SourceId] = &[$(SourceId::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(SourceId::$variant => $name),+
                }
            }
        }

        impl FromStr for SourceId {
            type Err = CorpusError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(SourceId::$variant),)+
                    other => Err(CorpusError::UnknownSource(other.to_string())),
                }
            }
        }
    };
}

sources! {
    AmendementsParlement => "AmendementsParlement",
    AmericanStories => "AmericanStories",
    Claire => "Claire",
    CroissantAligned => "CroissantAligned",
    DiscoursPublics => "DiscoursPublics",
    Europarl => "Europarl",
    EuroparlAligned => "EuroparlAligned",
    Eurovoc => "Eurovoc",
    FineWebEdu => "FineWebEdu",
    GallicaMonographies => "GallicaMonographies",
    GallicaPress => "GallicaPress",
    Gutenberg => "Gutenberg",
    Hal => "HAL",
    InterventionsParlement => "InterventionsParlement",
    Legi => "LEGI",
    MathPile => "MathPile",
    OpenData => "OpenData",
    OpenEdition => "OpenEdition",
    PeS2o => "PeS2o",
    Pile => "Pile",
    QuestionsEcritesParlement => "QuestionsEcritesParlement",
    RedPajama => "RedPajama",
    Stac => "STAC",
    TheStack => "TheStack",
    Theses => "Theses",
    Wikipedia => "Wikipedia",
    Wikisource => "Wikisource",
    Wiktionary => "Wiktionary",
    YouTube => "YouTube",
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl serde::Serialize for SourceId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> serde::Deserialize<'de> for SourceId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
