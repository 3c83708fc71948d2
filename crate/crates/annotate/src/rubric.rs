use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Five-point ranking scale, best first.
pub const RANKING_SCALE: [(u8, &str); 5] = [
    (5, "excellent translation; no corrections needed"),
    (4, "good translation; minor improvement(s) need to be made"),
    (3, "medium translation; major improvement(s) need to be made"),
    (2, "poor translation; many improvements need to be made"),
    (1, "extremely poor translation"),
];

/// Highest effective score of a segment whose source is flagged.
pub const FLAGGED_SOURCE_CAP: u8 = 3;

/// Comment that marks a score of 1 as a judgment on the source alone.
pub const ILLOGICAL_SOURCE_COMMENT: &str = "source illogical";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Neutral,
    Minor,
    Major,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::Neutral, Severity::Minor, Severity::Major];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Neutral => "neutral",
            Severity::Minor => "minor",
            Severity::Major => "major",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Severity::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown severity {s:?}; expected neutral, minor or major"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFlag {
    Clean,
    IrrelevantChars,
}

impl SourceFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceFlag::Clean => "clean",
            SourceFlag::IrrelevantChars => "irrelevant_chars",
        }
    }
}

impl fmt::Display for SourceFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceFlag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clean" => Ok(SourceFlag::Clean),
            "irrelevant_chars" => Ok(SourceFlag::IrrelevantChars),
            other => Err(format!("unknown source flag {other:?}")),
        }
    }
}

/// `min(raw, 3)` for flagged sources, `raw` otherwise.
pub fn effective_score(raw: u8, flag: SourceFlag) -> u8 {
    match flag {
        SourceFlag::Clean => raw,
        SourceFlag::IrrelevantChars => raw.min(FLAGGED_SOURCE_CAP),
    }
}

const MOJIBAKE: [&str; 3] = ["\u{00c3}", "\u{00e2}\u{20ac}", "\u{00c2}"];

fn has_markup_tag(text: &str) -> bool {
    let b = text.as_bytes();
    b.iter().enumerate().any(|(i, &c)| {
        if c != b'<' {
            return false;
        }
        let rest = &b[i + 1..];
        let rest = rest.strip_prefix(b"/").unwrap_or(rest);
        let name_len = rest.iter().take_while(|c| c.is_ascii_alphabetic()).count();
        name_len > 0 && rest[name_len..].iter().take(64).any(|&c| c == b'>')
    })
}

fn has_entity(text: &str) -> bool {
    text.match_indices('&').any(|(i, _)| {
        let rest = &text[i + 1..];
        let body = rest.strip_prefix('#').unwrap_or(rest);
        let len = body.chars().take_while(|c| c.is_ascii_alphanumeric()).count();
        (1..=8).contains(&len) && body[len..].starts_with(';')
    })
}

/// A `$` is ordinary currency only when a digit follows and it occurs once.
fn has_math_dollar(text: &str) -> bool {
    let n = text.matches('$').count();
    n >= 2
        || text
            .match_indices('$')
            .any(|(i, _)| !text[i + 1..].starts_with(|c: char| c.is_ascii_digit()))
}

/// Flags control characters, replacement characters, mojibake, markup and
/// formula fragments.
pub fn lint_source(text: &str) -> SourceFlag {
    let bad_char = text
        .chars()
        .any(|c| c.is_control() || c == '\u{fffd}' || matches!(c, '\\' | '^' | '{' | '}'));
    if bad_char
        || MOJIBAKE.iter().any(|m| text.contains(m))
        || has_math_dollar(text)
        || has_markup_tag(text)
        || has_entity(text)
    {
        SourceFlag::IrrelevantChars
    } else {
        SourceFlag::Clean
    }
}

/// The reference page served at `/rubric`.
pub fn rubric_html() -> String {
    let mut scale = String::new();
    for (score, label) in RANKING_SCALE {
        scale.push_str(&format!("      <li><b>{score}</b> &ndash; {label}</li>\n"));
    }
    format!(
        r#"<!DOCTYPE html>
<html lang="en">
<head>
  <meta charset="utf-8">
  <title>Ranking rubric</title>
  <style>
    body {{ font-family: sans-serif; max-width: 46em; margin: 2em auto; line-height: 1.45; }}
    h2 {{ margin-top: 1.6em; }}
  </style>
</head>
<body>
  <h1>Ranking rubric</h1>
  <h2>Scale</h2>
  <ul>
{scale}  </ul>
  <h2>Severity marks</h2>
  <ul>
    <li><b>neutral</b> &ndash; a matter of style or taste; nothing is wrong.</li>
    <li><b>minor</b> &ndash; precision suffers but the meaning survives (small grammar slips, punctuation, slightly inconsistent terms).</li>
    <li><b>major</b> &ndash; meaning or interpretation is damaged (wrong key terms, broken grammar, literal renderings of figurative text).</li>
  </ul>
  <h2>What to check</h2>
  <ul>
    <li>Accuracy: the meaning and the terminology of the source are carried over.</li>
    <li>Linguistic quality: grammar, agreement, punctuation and spelling follow target-language norms.</li>
    <li>Style: register and tone match the source; repetitive wording counts against the translation.</li>
    <li>Readability: the text reads naturally rather than word for word.</li>
    <li>Completeness: nothing is dropped or added without reason.</li>
    <li>Function: instructions, legal and marketing text still do their job.</li>
  </ul>
  <p>Unnatural or word-for-word renderings usually land at 2 or 3; pick within that range by how badly the reader is misled.</p>
  <h2>Source checks</h2>
  <ul>
    <li>If the English sentence itself makes no sense, score 1, leave the translation unreviewed and write the comment <code>{ILLOGICAL_SOURCE_COMMENT}</code>.</li>
    <li>Sources containing stray symbols, markup or formula fragments are capped at {FLAGGED_SOURCE_CAP} whatever the translation looks like. The service detects these automatically and applies the cap on export.</li>
  </ul>
</body>
</html>
"#
    )
}
