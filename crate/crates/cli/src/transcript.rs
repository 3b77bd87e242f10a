//! Every backend round trip is appended to `<out>/transcripts.jsonl`.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use alo_core::gateway::{ChatRequest, Message};
use serde::Serialize;

#[derive(Serialize)]
struct Entry<'a> {
    time: String,
    command: &'a str,
    backend: &'a str,
    temperature: f64,
    seed: u64,
    messages: &'a [Message],
    response: &'a str,
}

pub const FILE_NAME: &str = "transcripts.jsonl";

pub fn append(out: &Path, command: &str, backend: &str, req: &ChatRequest, response: &str) -> std::io::Result<()> {
    fs::create_dir_all(out)?;
    let entry = Entry {
        time: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        command,
        backend,
        temperature: req.temperature,
        seed: req.seed,
        messages: &req.messages,
        response,
    };
    let mut line = serde_json::to_string(&entry).expect("transcript entries serialize");
    line.push('\n');
    OpenOptions::new().create(true).append(true).open(out.join(FILE_NAME))?.write_all(line.as_bytes())
}
