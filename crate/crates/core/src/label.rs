use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Class of a message. `Nonspam` is the positive class (+1) so that larger
/// decision values mean "more legitimate".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Spam,
    Nonspam,
}

impl Label {
    pub const BOTH: [Label; 2] = [Label::Spam, Label::Nonspam];

    /// +1.0 for nonspam, -1.0 for spam.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Nonspam => 1.0,
            Label::Spam => -1.0,
        }
    }

    /// Sign of a decision value. Zero maps to nonspam.
    #[inline]
    pub fn from_score(score: f64) -> Label {
        if score >= 0.0 {
            Label::Nonspam
        } else {
            Label::Spam
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Nonspam => Label::Spam,
            Label::Spam => Label::Nonspam,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Nonspam => "nonspam",
            Label::Spam => "spam",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label {0:?}, expected \"spam\" or \"nonspam\"")]
pub struct ParseLabelError(pub alloc::string::String);

impl FromStr for Label {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spam" | "-1" => Ok(Label::Spam),
            "nonspam" | "ham" | "+1" | "1" => Ok(Label::Nonspam),
            _ => Err(ParseLabelError(s.into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_score_is_nonspam() {
        assert_eq!(Label::from_score(2.3), Label::Nonspam);
        assert_eq!(Label::from_score(-0.1), Label::Spam);
        assert_eq!(Label::from_score(0.0), Label::Nonspam);
        assert_eq!(Label::from_score(-0.0), Label::Nonspam);
    }

    #[test]
    fn parse() {
        assert_eq!("ham".parse::<Label>().unwrap(), Label::Nonspam);
        assert_eq!("SPAM".parse::<Label>().unwrap(), Label::Spam);
        assert!("maybe".parse::<Label>().is_err());
    }
}
