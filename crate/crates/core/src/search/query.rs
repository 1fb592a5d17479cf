use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error("invalid regular expression: {0}")]
    InvalidRegex(String),
}

/// Searched text plus match options.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Query {
    pub text: String,
    pub match_case: bool,
    pub whole_word: bool,
    pub regex: bool,
    pub skip_repeated_site: bool,
}

impl Default for Query {
    fn default() -> Self {
        Query {
            text: String::new(),
            match_case: true,
            whole_word: false,
            regex: false,
            skip_repeated_site: false,
        }
    }
}

impl Query {
    pub fn new(text: impl Into<String>) -> Self {
        Query {
            text: text.into(),
            ..Query::default()
        }
    }

    pub fn ignore_case(mut self) -> Self {
        self.match_case = false;
        self
    }

    pub fn whole_word(mut self) -> Self {
        self.whole_word = true;
        self
    }

    pub fn regex(mut self) -> Self {
        self.regex = true;
        self
    }

    pub fn skip_repeats(mut self) -> Self {
        self.skip_repeated_site = true;
        self
    }

    pub fn compile(&self) -> Result<CompiledQuery, QueryError> {
        CompiledQuery::new(self.clone())
    }
}

#[derive(Debug, Clone)]
enum Matcher {
    Contains(String),
    /// Needle already lowercased; haystacks are lowercased per match.
    Folded(String),
    Regex(Regex),
}

/// A validated query, ready for matching.
#[derive(Debug, Clone)]
pub struct CompiledQuery {
    query: Query,
    matcher: Matcher,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Whether some occurrence of `needle` in `hay` is delimited on both sides by
/// a non-alphanumeric character or the string boundary.
fn contains_word(hay: &str, needle: &str) -> bool {
    let mut from = 0;
    while let Some(pos) = hay[from..].find(needle) {
        let start = from + pos;
        let end = start + needle.len();
        let before_ok = hay[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !is_word_char(c));
        let after_ok = hay[end..].chars().next().is_none_or(|c| !is_word_char(c));
        if before_ok && after_ok {
            return true;
        }
        from = start + hay[start..].chars().next().map_or(1, char::len_utf8);
    }
    false
}

impl CompiledQuery {
    pub fn new(query: Query) -> Result<Self, QueryError> {
        if query.text.is_empty() {
            return Err(QueryError::EmptyQuery);
        }
        let matcher = if query.regex {
            let mut pattern = String::new();
            if !query.match_case {
                pattern.push_str("(?i)");
            }
            if query.whole_word {
                pattern.push_str(&format!(
                    r"(?:^|[^\p{{Alphabetic}}\p{{N}}])(?:{})(?:$|[^\p{{Alphabetic}}\p{{N}}])",
                    query.text
                ));
            } else {
                pattern.push_str(&query.text);
            }
            // validate the user's text on its own so the error message refers to it
            Regex::new(&query.text).map_err(|e| QueryError::InvalidRegex(e.to_string()))?;
            Matcher::Regex(
                Regex::new(&pattern).map_err(|e| QueryError::InvalidRegex(e.to_string()))?,
            )
        } else if query.match_case {
            Matcher::Contains(query.text.clone())
        } else {
            Matcher::Folded(query.text.to_lowercase())
        };
        Ok(CompiledQuery { query, matcher })
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn matches(&self, value: &str) -> bool {
        match &self.matcher {
            Matcher::Regex(re) => re.is_match(value),
            Matcher::Contains(needle) if self.query.whole_word => contains_word(value, needle),
            Matcher::Contains(needle) => value.contains(needle.as_str()),
            Matcher::Folded(needle) => {
                let hay = value.to_lowercase();
                if self.query.whole_word {
                    contains_word(&hay, needle)
                } else {
                    hay.contains(needle.as_str())
                }
            }
        }
    }
}

/// Whether `value` matches the query.
pub fn matches(value: &str, query: &CompiledQuery) -> bool {
    query.matches(value)
}
