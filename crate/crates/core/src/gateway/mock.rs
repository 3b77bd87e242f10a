//! Deterministic offline backend.
//!
//! Responses are chosen from the last user message:
//!
//! - `Create ALOs(a meets b)`: the pair ALO, in canonical markdown.
//! - `Create ALOs(x)`: an archetype (or generic) ALO, in canonical markdown.
//! - the brainstorm prompt: numbered prose steps.
//! - the table prompt: a pipe table of sub-object parameters.
//! - anything else: a few sentences of prose seeded by the message hash.
//!
//! At temperature `t > 0` the free-text lines (knowledge items and prose)
//! receive `round(t * PERTURBATION_RATE * words)` seeded edits: synonym
//! swaps, swaps of two items, or inserted filler words. Headings, keys,
//! skills, states, policies and table rows are never touched.

use std::time::Duration;

use fnv::FnvHasher;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::hash::Hasher;

use super::archetypes::{archetype, generic_alo, pair_alo};
use super::{
    check_texts, BackendKind, ChatBackend, ChatRequest, Completion, EmbeddingVector, GatewayError,
    DEFAULT_DIMENSION,
};
use crate::script::serialize;

/// Edits per word per unit of temperature.
pub const PERTURBATION_RATE: f64 = 0.12;

/// Hashed when a text has no tokens, so no vector is all zeros.
const FALLBACK_TOKEN: &str = "\u{0}empty";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MockBackend {
    pub dimension: usize,
}

impl Default for MockBackend {
    fn default() -> Self {
        Self { dimension: DEFAULT_DIMENSION }
    }
}

impl MockBackend {
    pub fn with_dimension(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }

    /// The response text before temperature noise.
    pub fn base_response(&self, req: &ChatRequest) -> String {
        let user = req.last_user();
        if let Some(target) = creation_target(user) {
            let alo = match target.split_once(" meets ") {
                Some((a, b)) => pair_alo(a.trim(), b.trim(), setting(user)),
                None => archetype(target).unwrap_or_else(|| generic_alo(target)),
            };
            return serialize(&alo);
        }
        if let Some(name) = brainstorm_target(user) {
            return brainstorm_text(name);
        }
        if let Some(name) = table_target(user) {
            return table_text(name);
        }
        prose_text(user, message_hash(req))
    }
}

impl ChatBackend for MockBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }

    fn complete(&self, req: &ChatRequest) -> Result<Completion, GatewayError> {
        req.validate()?;
        let base = self.base_response(req);
        let content = if req.temperature > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(message_hash(req) ^ req.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            perturb(&base, req.temperature, &mut rng)
        } else {
            base
        };
        Ok(Completion { content, backend: BackendKind::Mock, latency: Duration::ZERO, usage: None })
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        check_texts(texts)?;
        Ok(texts
            .iter()
            .map(|t| EmbeddingVector::new(feature_hash(t, self.dimension), t))
            .collect())
    }
}

fn fnv64(s: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(s.as_bytes());
    h.finish()
}

/// Signed bag-of-words feature hashing into `dimension` buckets, scaled to
/// unit length. Counts are integers, so the result is exact up to the final
/// division.
pub fn feature_hash(text: &str, dimension: usize) -> Vec<f64> {
    let mut counts = vec![0i64; dimension];
    let add = |counts: &mut Vec<i64>, token: &str| {
        let h = fnv64(token);
        let bucket = (h % dimension as u64) as usize;
        counts[bucket] += if h >> 63 == 1 { -1 } else { 1 };
    };
    for token in tokens(text) {
        add(&mut counts, &token);
    }
    if counts.iter().all(|&c| c == 0) {
        add(&mut counts, FALLBACK_TOKEN);
    }
    let norm = (counts.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt();
    counts.into_iter().map(|c| c as f64 / norm).collect()
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn message_hash(req: &ChatRequest) -> u64 {
    let mut h = Sha256::new();
    for m in &req.messages {
        h.update(format!("{:?}", m.role).as_bytes());
        h.update([0]);
        h.update(m.content.as_bytes());
        h.update([0]);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn paren_arg<'a>(text: &'a str, after: &str) -> Option<&'a str> {
    let start = text.find(after)? + after.len();
    let rest = &text[start..];
    let end = rest.find(')')?;
    let arg = rest[..end].trim();
    (!arg.is_empty()).then_some(arg)
}

fn creation_target(user: &str) -> Option<&str> {
    paren_arg(user, "Create ALOs(")
}

fn setting(user: &str) -> Option<&str> {
    paren_arg(user, " in ALOs(")
}

fn brainstorm_target(user: &str) -> Option<&str> {
    if user.contains("brainstorm all parameters") {
        paren_arg(user, "ALOs(")
    } else {
        None
    }
}

fn table_target(user: &str) -> Option<&str> {
    if user.contains("in table") {
        paren_arg(user, "get ALOs(")
    } else {
        None
    }
}

fn reference_alo(name: &str) -> crate::model::Alo {
    archetype(name).unwrap_or_else(|| generic_alo(name))
}

fn brainstorm_text(name: &str) -> String {
    let alo = reference_alo(name);
    let mut out = format!("Let us think about {name} step by step.\n");
    let mut step = 1;
    for sub in &alo.sub_objects {
        let names: Vec<&str> = sub.states.keys().map(String::as_str).collect();
        let listed = if names.is_empty() { "its behaviour".to_string() } else { names.join(", ") };
        out.push_str(&format!(
            "Step {step}: the {} of {name} can be described by {listed}.\n",
            sub.name
        ));
        step += 1;
    }
    out.push_str(&format!(
        "Step {step}: each parameter should be filled with a typical value for a common {name}.\n"
    ));
    out
}

fn table_text(name: &str) -> String {
    let alo = reference_alo(name);
    let mut out = format!("Here are the parameters of {name}.\n\n");
    out.push_str("| Subobject | Parameter | Value |\n|---|---|---|\n");
    for sub in &alo.sub_objects {
        for state in sub.states.values() {
            out.push_str(&format!("| {} | {} | {} |\n", sub.name, state.name, state.display_value()));
        }
    }
    out
}

const STOP_WORDS: &[&str] = &[
    "what", "is", "a", "an", "the", "of", "and", "or", "to", "in", "on", "for", "with", "me", "tell",
    "about", "please", "define", "describe", "explain", "give", "does", "do", "how", "why", "who",
    "are", "you", "your", "it", "its", "this", "that", "be", "can", "one", "sentence", "word",
];

const PROSE_TEMPLATES: &[&str] = &[
    "{T} is commonly described in terms of its {A} and its {B}.",
    "Many people first notice the {A} of {T}.",
    "In everyday life, {T} is important because it provides {B}.",
    "Experts often explain {T} by comparing its {A} with its {C}.",
    "The {C} of {T} changes over time, which helps people understand it.",
    "A simple definition of {T} focuses on its {B} and its typical {A}.",
    "{T} can be small or large, but its {C} usually stays the same.",
    "People use {T} in many different ways depending on its {B}.",
];

const ATTRIBUTES: &[&str] = &[
    "shape", "color", "purpose", "origin", "structure", "value", "function", "history", "texture",
    "size", "role", "meaning", "quality", "use",
];

fn prose_text(user: &str, hash: u64) -> String {
    let words: Vec<String> = tokens(user).filter(|w| !STOP_WORDS.contains(&w.as_str())).collect();
    let topic = if words.is_empty() { "this topic".to_string() } else { words.join(" ") };
    let mut rng = ChaCha8Rng::seed_from_u64(hash);
    let mut out = String::new();
    for template in PROSE_TEMPLATES {
        let pick = |rng: &mut ChaCha8Rng| *ATTRIBUTES.choose(rng).expect("non-empty");
        let (a, b, c) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let sentence = template
            .replace("{T}", &topic)
            .replace("{A}", a)
            .replace("{B}", b)
            .replace("{C}", c);
        let mut chars = sentence.chars();
        let first = chars.next().map(|c| c.to_uppercase().collect::<String>()).unwrap_or_default();
        out.push_str(&first);
        out.push_str(chars.as_str());
        out.push('\n');
    }
    out
}

const SYNONYMS: &[&[&str]] = &[
    &["commonly", "usually", "typically", "generally"],
    &["described", "characterized", "explained", "defined"],
    &["small", "little", "compact", "tiny"],
    &["large", "big", "sizable", "huge"],
    &["often", "frequently", "regularly"],
    &["important", "significant", "essential", "vital"],
    &["provides", "offers", "supplies", "gives"],
    &["people", "humans", "individuals", "folks"],
    &["notice", "observe", "see", "spot"],
    &["experts", "specialists", "scholars"],
    &["simple", "basic", "plain", "straightforward"],
    &["helps", "assists", "aids", "allows"],
    &["changes", "varies", "shifts", "evolves"],
    &["different", "various", "diverse", "distinct"],
    &["use", "employ", "utilize", "apply"],
    &["shape", "form", "outline"],
    &["color", "hue", "shade"],
    &["purpose", "aim", "goal"],
    &["value", "worth", "merit"],
    &["quality", "character", "nature"],
    &["pet", "companion", "animal"],
    &["moves", "travels", "roams", "drives"],
    &["room", "space", "area", "chamber"],
    &["wall", "barrier", "obstacle"],
    &["sleep", "rest", "nap", "doze"],
    &["learn", "study", "master"],
    &["lesson", "class", "lecture"],
    &["device", "gadget", "appliance", "machine"],
    &["connects", "links", "joins"],
    &["nearby", "close", "adjacent", "neighbouring"],
    &["whole", "entire", "full"],
    &["questions", "queries", "problems"],
    &["parts", "components", "pieces"],
    &["further", "additional", "more"],
    &["typical", "normal", "standard", "ordinary"],
    &["focuses", "concentrates", "centres"],
    &["first", "initially", "early"],
];

const FILLERS: &[&str] = &[
    "indeed", "notably", "perhaps", "quite", "really", "essentially", "arguably", "somewhat",
    "certainly", "clearly", "also", "basically",
];

#[derive(Clone, Copy, PartialEq, Eq)]
enum LineKind {
    Fixed,
    /// A knowledge item, `  - <text>`; the group id keeps swaps inside one list.
    ListItem(usize),
    Prose,
}

fn classify_lines(lines: &[&str]) -> Vec<LineKind> {
    let mut kinds = Vec::with_capacity(lines.len());
    let mut in_knowledge = false;
    let mut group = 0;
    for line in lines {
        let kind = if line.starts_with("- ") || line.starts_with('#') {
            in_knowledge = line.trim_end() == "- knowledge:";
            if in_knowledge {
                group += 1;
            }
            LineKind::Fixed
        } else if let Some(rest) = line.strip_prefix("  - ") {
            if in_knowledge && !rest.trim().is_empty() {
                LineKind::ListItem(group)
            } else {
                LineKind::Fixed
            }
        } else if line.trim().is_empty() || line.starts_with('|') || line.starts_with(' ') {
            LineKind::Fixed
        } else {
            LineKind::Prose
        };
        kinds.push(kind);
    }
    kinds
}

fn synonym_group(word: &str) -> Option<&'static [&'static str]> {
    let lower = word.to_lowercase();
    SYNONYMS.iter().copied().find(|g| g.contains(&lower.as_str()))
}

/// Splits a word into (leading, core, trailing) so punctuation survives.
fn split_word(word: &str) -> (&str, &str, &str) {
    let start = word.find(|c: char| c.is_alphanumeric()).unwrap_or(word.len());
    let end = word.rfind(|c: char| c.is_alphanumeric()).map(|i| i + word[i..].chars().next().map_or(1, char::len_utf8)).unwrap_or(start);
    (&word[..start], &word[start..end.max(start)], &word[end.max(start)..])
}

fn match_case(template: &str, word: &str) -> String {
    if template.chars().next().is_some_and(char::is_uppercase) {
        let mut c = word.chars();
        c.next()
            .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
            .unwrap_or_default()
    } else {
        word.to_string()
    }
}

fn perturb(text: &str, temperature: f64, rng: &mut ChaCha8Rng) -> String {
    let trailing_newline = text.ends_with('\n');
    let raw: Vec<&str> = text.lines().collect();
    let kinds = classify_lines(&raw);
    // Mutable lines: (line index, prefix, words).
    let mut editable: Vec<(usize, &str, Vec<String>)> = Vec::new();
    for (i, (line, kind)) in raw.iter().zip(&kinds).enumerate() {
        match kind {
            LineKind::ListItem(_) => editable.push((i, "  - ", line[4..].split_whitespace().map(String::from).collect())),
            LineKind::Prose => editable.push((i, "", line.split_whitespace().map(String::from).collect())),
            LineKind::Fixed => {}
        }
    }
    let total_words: usize = editable.iter().map(|(_, _, w)| w.len()).sum();
    let edits = (temperature * PERTURBATION_RATE * total_words as f64).round() as usize;
    if editable.is_empty() {
        return text.to_string();
    }
    for _ in 0..edits {
        match rng.random_range(0..3) {
            0 => {
                let candidates: Vec<(usize, usize)> = editable
                    .iter()
                    .enumerate()
                    .flat_map(|(li, (_, _, words))| {
                        words
                            .iter()
                            .enumerate()
                            .filter(|(_, w)| synonym_group(split_word(w).1).is_some())
                            .map(move |(wi, _)| (li, wi))
                    })
                    .collect();
                if let Some(&(li, wi)) = candidates.choose(rng) {
                    let word = editable[li].2[wi].clone();
                    let (pre, core, post) = split_word(&word);
                    let group = synonym_group(core).expect("candidate has a group");
                    let choices: Vec<&&str> = group.iter().filter(|s| **s != core.to_lowercase()).collect();
                    let pick = choices.choose(rng).expect("groups have two or more words");
                    editable[li].2[wi] = format!("{pre}{}{post}", match_case(core, pick));
                    continue;
                }
                insert_filler(&mut editable, rng);
            }
            1 => {
                let li = rng.random_range(0..editable.len());
                let kind = kinds[editable[li].0];
                let peers: Vec<usize> = (0..editable.len())
                    .filter(|&j| j != li && kinds[editable[j].0] == kind)
                    .collect();
                if let Some(&lj) = peers.choose(rng) {
                    let (a, b) = (editable[li].2.clone(), editable[lj].2.clone());
                    editable[li].2 = b;
                    editable[lj].2 = a;
                    continue;
                }
                insert_filler(&mut editable, rng);
            }
            _ => insert_filler(&mut editable, rng),
        }
    }
    let mut lines: Vec<String> = raw.iter().map(|l| l.to_string()).collect();
    for (i, prefix, words) in editable {
        lines[i] = format!("{prefix}{}", words.join(" "));
    }
    let mut out = lines.join("\n");
    if trailing_newline {
        out.push('\n');
    }
    out
}

fn insert_filler(editable: &mut [(usize, &str, Vec<String>)], rng: &mut ChaCha8Rng) {
    let li = rng.random_range(0..editable.len());
    let words = &mut editable[li].2;
    // Never in front of the first word, so capitalisation is kept.
    let at = rng.random_range(1..=words.len().max(1));
    let filler = FILLERS.choose(rng).expect("non-empty");
    words.insert(at.min(words.len()), filler.to_string());
}
