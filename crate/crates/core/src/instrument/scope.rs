use super::InstrumentError;

/// Glob over `unit.function` names. `*` matches any run of characters
/// (dots included); `,` separates alternatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopePattern {
    text: String,
    alternatives: Vec<String>,
}

impl ScopePattern {
    pub fn parse(text: &str) -> Result<Self, InstrumentError> {
        let alternatives: Vec<String> = text.split(',').map(|a| a.trim().to_string()).collect();
        if alternatives.iter().any(String::is_empty) {
            return Err(InstrumentError::EmptyScope);
        }
        Ok(ScopePattern {
            text: text.to_string(),
            alternatives,
        })
    }

    pub fn all() -> Self {
        ScopePattern::parse("*").expect("`*` is a valid pattern")
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn matches(&self, unit: &str, function: &str) -> bool {
        let name = format!("{unit}.{function}");
        self.alternatives
            .iter()
            .any(|alt| glob(alt.as_bytes(), name.as_bytes()))
    }
}

impl std::str::FromStr for ScopePattern {
    type Err = InstrumentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScopePattern::parse(s)
    }
}

/// Wildcard match with `*` only, using the usual backtrack-to-last-star scan.
fn glob(pattern: &[u8], text: &[u8]) -> bool {
    let (mut p, mut t) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while t < text.len() {
        if p < pattern.len() && pattern[p] == b'*' {
            star = Some((p, t));
            p += 1;
        } else if p < pattern.len() && pattern[p] == text[t] {
            p += 1;
            t += 1;
        } else if let Some((sp, st)) = star {
            p = sp + 1;
            t = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    pattern[p..].iter().all(|&c| c == b'*')
}
