//! Repeated-completion similarity analysis.
//!
//! A trial set holds `n` completions of one prompt at one temperature and
//! their embeddings. The similarity matrix holds pairwise cosines; the
//! summary is the mean and sample standard deviation over the strict lower
//! triangle (each unordered pair once, diagonal excluded).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{complete_all, ChatBackend, ChatRequest, EmbeddingVector, GatewayError, MAX_TEMPERATURE};

pub const DEFAULT_TRIALS: usize = 20;
pub const DEFAULT_TEMPERATURES: [f64; 3] = [0.0, 0.7, 2.0];
/// Temperature used for single runs.
pub const DEFAULT_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Error, PartialEq)]
pub enum VariabilityError {
    #[error("vectors have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("need at least 2 trials, got {0}")]
    TooFewTrials(usize),
    #[error("temperature {0} outside [0, 2]")]
    TemperatureOutOfRange(f64),
    #[error("trials {0:?} failed after retries")]
    TrialFailed(Vec<usize>),
    #[error("backend error: {0}")]
    Backend(#[from] GatewayError),
    #[error("i/o failure: {0}")]
    IoFailure(String),
}

/// `a·b / (|a||b|)`, clamped to [-1, 1] against rounding.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, VariabilityError> {
    if a.len() != b.len() {
        return Err(VariabilityError::DimensionMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(VariabilityError::ZeroNorm);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub completion: String,
    pub embedding: EmbeddingVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub prompt: String,
    #[serde(rename = "systemPrompt")]
    pub system_prompt: Option<String>,
    pub temperature: f64,
    pub trials: Vec<Trial>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialOptions {
    /// Trial `i` uses seed `seed + i`.
    pub seed: u64,
    pub in_flight: usize,
    /// Extra rounds for failed trials.
    pub retries: u32,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self { seed: 0, in_flight: 4, retries: 2 }
    }
}

pub fn run_trials(
    backend: &dyn ChatBackend,
    system_prompt: Option<&str>,
    user_prompt: &str,
    n: usize,
    temperature: f64,
    options: TrialOptions,
) -> Result<TrialSet, VariabilityError> {
    if n < 2 {
        return Err(VariabilityError::TooFewTrials(n));
    }
    if !(0.0..=MAX_TEMPERATURE).contains(&temperature) {
        return Err(VariabilityError::TemperatureOutOfRange(temperature));
    }
    let request = |i: usize| {
        ChatRequest::new(system_prompt, user_prompt)
            .with_temperature(temperature)
            .with_seed(options.seed.wrapping_add(i as u64))
    };
    let mut texts: Vec<Option<String>> = vec![None; n];
    let mut pending: Vec<usize> = (0..n).collect();
    for _ in 0..=options.retries {
        if pending.is_empty() {
            break;
        }
        let requests: Vec<ChatRequest> = pending.iter().map(|&i| request(i)).collect();
        let results = complete_all(backend, &requests, options.in_flight);
        let mut still = Vec::new();
        for (i, result) in pending.into_iter().zip(results) {
            match result {
                Ok(c) => texts[i] = Some(c.content),
                // A bad request will not improve with retries.
                Err(e @ GatewayError::InvalidRequest(_)) => return Err(e.into()),
                Err(_) => still.push(i),
            }
        }
        pending = still;
    }
    if !pending.is_empty() {
        return Err(VariabilityError::TrialFailed(pending));
    }
    let texts: Vec<String> = texts.into_iter().map(|t| t.expect("all trials done")).collect();
    let embeddings = backend.embed(&texts)?;
    Ok(TrialSet {
        prompt: user_prompt.to_string(),
        system_prompt: system_prompt.map(str::to_string),
        temperature,
        trials: texts
            .into_iter()
            .zip(embeddings)
            .enumerate()
            .map(|(index, (completion, embedding))| Trial { index, completion, embedding })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub n: usize,
    /// Row-major, `n * n`.
    pub cells: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.n + j]
    }

    pub fn from_vectors(vectors: &[&[f64]]) -> Result<Self, VariabilityError> {
        let n = vectors.len();
        if n < 2 {
            return Err(VariabilityError::TooFewTrials(n));
        }
        let mut cells = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let c = if i == j {
                    // Still rejects zero vectors and mismatched sizes.
                    cosine(vectors[i], vectors[i])?;
                    1.0
                } else {
                    cosine(vectors[i], vectors[j])?
                };
                cells[i * n + j] = c;
                cells[j * n + i] = c;
            }
        }
        Ok(Self { n, cells })
    }

    /// Builds from raw cells; used for fixtures and re-reading exports.
    pub fn from_cells(n: usize, cells: Vec<f64>) -> Self {
        assert_eq!(cells.len(), n * n, "cells must be n×n");
        Self { n, cells }
    }

    pub fn lower_triangle(&self) -> impl Iterator<Item = f64> + '_ {
        (1..self.n).flat_map(move |i| (0..i).map(move |j| self.get(i, j)))
    }

    /// Full matrix, 9 decimals, comma-separated, one row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n)
                .map(|j| {
                    let v = self.get(i, j);
                    format!("{:.9}", if v == 0.0 { 0.0 } else { v })
                })
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Binary 8-bit graymap: lower triangle and diagonal map [0, 1] to
    /// [255, 0]; the upper triangle is white.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.n, self.n).into_bytes();
        for i in 0..self.n {
            for j in 0..self.n {
                let px = if j > i {
                    255
                } else {
                    (255.0 * (1.0 - self.get(i, j).clamp(0.0, 1.0))).round() as u8
                };
                out.push(px);
            }
        }
        out
    }
}

pub fn similarity_matrix(set: &TrialSet) -> Result<SimilarityMatrix, VariabilityError> {
    let vectors: Vec<&[f64]> = set.trials.iter().map(|t| t.embedding.values.as_slice()).collect();
    SimilarityMatrix::from_vectors(&vectors)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySummary {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single pair.
    pub sd: f64,
    pub count: usize,
}

pub fn summary(m: &SimilarityMatrix) -> SimilaritySummary {
    let values: Vec<f64> = m.lower_triangle().collect();
    let count = values.len();
    if count == 0 {
        return SimilaritySummary { mean: f64::NAN, sd: f64::NAN, count };
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    let sd = if count < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64).sqrt()
    };
    SimilaritySummary { mean, sd, count }
}

/// `"0.0"`, `"0.7"`, `"2.0"`: the file-name label for a temperature.
pub fn temperature_label(t: f64) -> String {
    format!("{t:.1}")
}

/// Writes the CSV and heatmap for one matrix into `dir`.
pub fn export_matrix(dir: &Path, temperature: f64, m: &SimilarityMatrix) -> Result<(), VariabilityError> {
    let io = |e: std::io::Error| VariabilityError::IoFailure(e.to_string());
    fs::create_dir_all(dir).map_err(io)?;
    let label = temperature_label(temperature);
    fs::write(dir.join(format!("matrix_{label}.csv")), m.to_csv()).map_err(io)?;
    fs::write(dir.join(format!("matrix_{label}.pgm")), m.to_pgm()).map_err(io)
}

/// Run configuration read by the `analyze` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyzeConfig {
    /// `markdown`, `codegen` or `none`.
    pub system_prompt_variant: String,
    pub user_prompt: String,
    pub n: usize,
    pub temperatures: Vec<f64>,
    pub backend: String,
    pub seed: u64,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            system_prompt_variant: "none".into(),
            user_prompt: "What is a banana?".into(),
            n: DEFAULT_TRIALS,
            temperatures: DEFAULT_TEMPERATURES.to_vec(),
            backend: "mock".into(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSummary {
    pub temperature: f64,
    #[serde(flatten)]
    pub summary: SimilaritySummary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub sets: Vec<TrialSet>,
    pub matrices: Vec<SimilarityMatrix>,
    pub summaries: Vec<TemperatureSummary>,
}

/// Trials, matrices and summaries for each temperature in order.
pub fn analyze(
    backend: &dyn ChatBackend,
    system_prompt: Option<&str>,
    user_prompt: &str,
    n: usize,
    temperatures: &[f64],
    options: TrialOptions,
) -> Result<Analysis, VariabilityError> {
    let mut analysis = Analysis { sets: Vec::new(), matrices: Vec::new(), summaries: Vec::new() };
    for &t in temperatures {
        let set = run_trials(backend, system_prompt, user_prompt, n, t, options)?;
        let m = similarity_matrix(&set)?;
        analysis.summaries.push(TemperatureSummary { temperature: t, summary: summary(&m) });
        analysis.sets.push(set);
        analysis.matrices.push(m);
    }
    Ok(analysis)
}

#[derive(Serialize)]
struct TrialRecord<'a> {
    temperature: f64,
    index: usize,
    completion: &'a str,
    #[serde(rename = "sourceTextHash")]
    source_text_hash: &'a str,
}

impl Analysis {
    /// `trials.jsonl`, `matrix_<t>.csv`, `matrix_<t>.pgm` and `summary.json`.
    pub fn write(&self, dir: &Path) -> Result<(), VariabilityError> {
        let io = |e: std::io::Error| VariabilityError::IoFailure(e.to_string());
        fs::create_dir_all(dir).map_err(io)?;
        let mut lines = String::new();
        for set in &self.sets {
            for t in &set.trials {
                let rec = TrialRecord {
                    temperature: set.temperature,
                    index: t.index,
                    completion: &t.completion,
                    source_text_hash: &t.embedding.source_text_hash,
                };
                lines.push_str(&serde_json::to_string(&rec).expect("records serialize"));
                lines.push('\n');
            }
        }
        fs::write(dir.join("trials.jsonl"), lines).map_err(io)?;
        for (set, m) in self.sets.iter().zip(&self.matrices) {
            export_matrix(dir, set.temperature, m)?;
        }
        let mut json = serde_json::to_string_pretty(&self.summaries).expect("summaries serialize");
        json.push('\n');
        fs::write(dir.join("summary.json"), json).map_err(io)
    }
}
