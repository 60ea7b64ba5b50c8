use super::rules;
use crate::corpus::FilterDecision;
use crate::sft::{Conversation, Role};

/// Strings whose presence in an assistant response marks it as generated by
/// another model.
pub const FILTER_STRINGS: [&str; 29] = [
    "OpenAI",
    "Open AI",
    "ChatGPT",
    "Chat GPT",
    "GPT-3",
    "GPT3",
    "GPT 3",
    "GPT-4",
    "GPT4",
    "GPT 4",
    "GPT-3.5",
    "GPT3.5",
    "GPT 3.5",
    "BingChat",
    "Bing Chat",
    "LAION",
    "Open Assistant",
    "OpenAssistant",
    "BARD",
    "PaLM",
    "Gemini",
    "Gemma",
    "Google AI",
    "Anthropic",
    "Claude",
    "LLaMA",
    "Meta AI",
    "Mixtral",
    "Mistral",
];

/// Drops the example when any assistant turn contains a filter string.
/// Matching is substring-based and case-sensitive unless `case_sensitive`
/// is false.
pub fn synthetic_keyword_filter(example: &Conversation, case_sensitive: bool) -> FilterDecision {
    let hit = example
        .turns
        .iter()
        .filter(|t| t.role == Role::Assistant)
        .find_map(|t| {
            let hay = if case_sensitive { t.content.clone() } else { t.content.to_lowercase() };
            FILTER_STRINGS.iter().find(|k| {
                if case_sensitive {
                    hay.contains(*k)
                } else {
                    hay.contains(&k.to_lowercase())
                }
            })
        });
    match hit {
        Some(k) => FilterDecision::drop(rules::KEYWORD, format!("assistant response contains {k:?}")),
        None => FilterDecision::keep("keyword"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sft::Turn;

    fn conv(user: &str, assistant: &str) -> Conversation {
        Conversation::new(vec![Turn::new(Role::User, user), Turn::new(Role::Assistant, assistant)])
    }

    #[test]
    fn examples() {
        assert!(synthetic_keyword_filter(&conv("hi", "As ChatGPT, I cannot"), true).is_drop());
        assert!(synthetic_keyword_filter(&conv("compare with GPT-4", "Sure."), true).is_keep());
        assert!(synthetic_keyword_filter(&conv("who?", "I am Lucie."), true).is_keep());
    }

    #[test]
    fn every_string_fires() {
        for k in FILTER_STRINGS {
            let d = synthetic_keyword_filter(&conv("q", &format!("x {k} y")), true);
            assert!(d.is_drop(), "{k}");
        }
    }

    #[test]
    fn case_switch() {
        assert!(synthetic_keyword_filter(&conv("q", "chatgpt said"), true).is_keep());
        assert!(synthetic_keyword_filter(&conv("q", "chatgpt said"), false).is_drop());
    }
}
