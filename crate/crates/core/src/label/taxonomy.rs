use std::path::Path;

use crate::error::{Error, Result};

pub const OTHER: &str = "Other";

const BUNDLED: &str = include_str!("../../data/taxonomy.txt");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Category {
    pub name: String,
    pub aliases: Vec<String>,
}

/// Closed label set; `Other` is always a member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Taxonomy {
    pub categories: Vec<Category>,
}

fn normalize(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

impl Taxonomy {
    pub fn parse(text: &str) -> Result<Self> {
        let mut categories: Vec<Category> = Vec::new();
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let mut parts = line.split('|').map(str::trim);
            let name = parts.next().unwrap_or_default().to_string();
            if name.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "taxonomy line {line:?} has no name"
                )));
            }
            let aliases = parts.filter(|a| !a.is_empty()).map(String::from).collect();
            if normalize(&name) == normalize(OTHER) {
                continue;
            }
            categories.push(Category { name, aliases });
        }
        if categories.is_empty() {
            return Err(Error::InvalidParameter(
                "taxonomy lists no categories".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &categories {
            for key in std::iter::once(&c.name).chain(&c.aliases) {
                if !seen.insert(normalize(key)) {
                    return Err(Error::InvalidParameter(format!("taxonomy repeats {key:?}")));
                }
            }
        }
        Ok(Self { categories })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The twelve-category harm taxonomy shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled taxonomy parses")
    }

    /// Canonical names followed by `Other`.
    pub fn labels(&self) -> Vec<&str> {
        self.categories
            .iter()
            .map(|c| c.name.as_str())
            .chain(std::iter::once(OTHER))
            .collect()
    }

    /// Canonical name for `s` (case and spacing ignored, aliases accepted).
    pub fn canonical(&self, s: &str) -> Option<&str> {
        let key = normalize(s);
        if key == normalize(OTHER) {
            return Some(OTHER);
        }
        self.categories
            .iter()
            .find(|c| normalize(&c.name) == key || c.aliases.iter().any(|a| normalize(a) == key))
            .map(|c| c.name.as_str())
    }

    /// Reads a model response: the first non-empty line, with quotes, a
    /// leading `Label:` and trailing punctuation removed, must name a label.
    pub fn parse_response(&self, response: &str) -> Option<&str> {
        let line = response.lines().map(str::trim).find(|l| !l.is_empty())?;
        let mut s = line;
        if let Some((head, rest)) = s.split_once(':') {
            if head.trim().eq_ignore_ascii_case("label")
                || head.trim().eq_ignore_ascii_case("category")
            {
                s = rest;
            }
        }
        let s = s
            .trim()
            .trim_matches(|c: char| matches!(c, '"' | '\'' | '`' | '*' | '.' | ','))
            .trim();
        self.canonical(s)
    }
}
