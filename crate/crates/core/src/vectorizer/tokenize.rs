use alloc::string::String;
use alloc::vec::Vec;

use super::VectorizerConfig;

/// Characters emitted as standalone tokens when punctuation is kept.
pub const PUNCTUATION: [char; 8] = ['.', ',', ';', ':', '!', '?', '$', '%'];

/// Frequent English function words removed when the stoplist is enabled.
pub const STOPLIST: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been",
    "but", "by", "can", "could", "do", "for", "from", "had", "has", "have", "he", "her", "his",
    "i", "if", "in", "into", "is", "it", "its", "me", "my", "no", "not", "of", "on", "or", "our",
    "she", "so", "than", "that", "the", "their", "them", "then", "there", "these", "they",
    "this", "to", "up", "us", "was", "we", "were", "what", "when", "which", "who", "will",
    "with", "would", "you", "your",
];

fn is_stopword(word: &str) -> bool {
    let lower = word.to_lowercase();
    STOPLIST.binary_search(&lower.as_str()).is_ok()
}

/// Splits text into words (maximal alphanumeric runs) and punctuation tokens.
pub fn tokenize(text: &str, config: &VectorizerConfig) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();

    let flush = |word: &mut String, tokens: &mut Vec<String>| {
        if word.is_empty() {
            return;
        }
        let w = if config.lowercase {
            word.to_lowercase()
        } else {
            core::mem::take(word)
        };
        word.clear();
        if !(config.use_stoplist && is_stopword(&w)) {
            tokens.push(w);
        }
    };

    for c in text.chars() {
        if c.is_alphanumeric() {
            word.push(c);
            continue;
        }
        flush(&mut word, &mut tokens);
        if config.keep_punctuation_tokens && PUNCTUATION.contains(&c) {
            tokens.push(String::from(c));
        }
    }
    flush(&mut word, &mut tokens);
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(text: &str, cfg: &VectorizerConfig) -> Vec<String> {
        tokenize(text, cfg)
    }

    #[test]
    fn words_and_punctuation() {
        let cfg = VectorizerConfig::default();
        assert_eq!(
            toks("Buy now! Buy cheap.", &cfg),
            ["buy", "now", "!", "buy", "cheap", "."]
        );
        assert!(toks("", &cfg).is_empty());
        assert_eq!(toks("$5 off;50%", &cfg), ["$", "5", "off", ";", "50", "%"]);
    }

    #[test]
    fn stoplist() {
        let cfg = VectorizerConfig {
            use_stoplist: true,
            ..Default::default()
        };
        assert_eq!(toks("The cat", &cfg), ["cat"]);
        let no_lower = VectorizerConfig {
            lowercase: false,
            ..cfg
        };
        assert_eq!(toks("The Cat", &no_lower), ["Cat"]);
    }

    #[test]
    fn punctuation_off_and_case_kept() {
        let cfg = VectorizerConfig {
            keep_punctuation_tokens: false,
            lowercase: false,
            ..Default::default()
        };
        assert_eq!(toks("Hello, World!", &cfg), ["Hello", "World"]);
    }

    #[test]
    fn stoplist_is_sorted() {
        assert!(STOPLIST.windows(2).all(|w| w[0] < w[1]));
    }
}
