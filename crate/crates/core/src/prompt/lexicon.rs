//! Keyword lexicon deciding whether a parameter describes how an object
//! looks or how it performs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::PromptError;
use crate::model::Alo;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParameterLabel {
    Visual,
    Performance,
    Other,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParameterClass {
    pub label: ParameterLabel,
    /// Empty for `Other`.
    #[serde(rename = "matchedKeyword")]
    pub matched_keyword: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lexicon {
    classes: Vec<(ParameterLabel, Vec<String>)>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::parse(include_str!("../../resources/lexicon/parameters.txt"))
            .expect("built-in lexicon parses")
    }
}

impl Lexicon {
    /// `<visual|performance>: word word ...` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let mut classes: Vec<(ParameterLabel, Vec<String>)> = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((label, words)) = line.split_once(':') else {
                return Err(PromptError::Io(format!("bad lexicon line `{line}`")));
            };
            let label = match label.trim() {
                "visual" => ParameterLabel::Visual,
                "performance" => ParameterLabel::Performance,
                other => return Err(PromptError::Io(format!("unknown lexicon class `{other}`"))),
            };
            let words = words.split_whitespace().map(str::to_ascii_lowercase);
            match classes.iter_mut().find(|(l, _)| *l == label) {
                Some((_, list)) => list.extend(words),
                None => classes.push((label, words.collect())),
            }
        }
        Ok(Self { classes })
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = fs::read_to_string(path).map_err(|e| PromptError::Io(e.to_string()))?;
        Self::parse(&text)
    }

    pub fn classify(&self, name: &str) -> ParameterClass {
        for word in words(name) {
            for (label, keywords) in &self.classes {
                if keywords.contains(&word) {
                    return ParameterClass {
                        label: *label,
                        matched_keyword: word,
                    };
                }
            }
        }
        ParameterClass {
            label: ParameterLabel::Other,
            matched_keyword: String::new(),
        }
    }
}

/// Lowercase words of an identifier: splits on separators and camelCase.
fn words(name: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut prev_lower = false;
    for c in name.chars() {
        if !c.is_alphanumeric() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            prev_lower = false;
            continue;
        }
        if c.is_uppercase() && prev_lower && !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        prev_lower = c.is_lowercase() || c.is_ascii_digit();
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    /// Keyed by `<sub-object>.<state>`.
    pub classes: BTreeMap<String, ParameterClass>,
    /// Share of states classified visual; absent when there are no states.
    #[serde(rename = "visualCoverage")]
    pub visual_coverage: Option<f64>,
}

impl Classification {
    pub fn count(&self, label: ParameterLabel) -> usize {
        self.classes.values().filter(|c| c.label == label).count()
    }
}

pub fn classify_parameters(alo: &Alo, lexicon: &Lexicon) -> Classification {
    let mut classes = BTreeMap::new();
    for sub in &alo.sub_objects {
        for name in sub.states.keys() {
            classes.insert(format!("{}.{name}", sub.name), lexicon.classify(name));
        }
    }
    let visual = classes
        .values()
        .filter(|c: &&ParameterClass| c.label == ParameterLabel::Visual)
        .count();
    let visual_coverage = (!classes.is_empty()).then(|| visual as f64 / classes.len() as f64);
    Classification {
        classes,
        visual_coverage,
    }
}
