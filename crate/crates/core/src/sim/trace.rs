use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::StepObject;

/// Entity state at the end of a tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    pub entity: String,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub heading: f64,
    pub skill: Option<String>,
    pub contact: bool,
    /// Where the entity fled from, when it ran a flee skill with a trigger.
    #[serde(rename = "fleeFrom")]
    pub flee_from: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    pub entity: String,
    pub event: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<StepObject>,
    pub snapshots: Vec<Snapshot>,
    pub events: Vec<Event>,
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("trace records serialize"));
        out.push('\n');
    }
    out
}

impl Trace {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty() && self.snapshots.is_empty() && self.events.is_empty()
    }

    /// One `StepObject` per line.
    pub fn steps_jsonl(&self) -> String {
        jsonl(&self.steps)
    }

    /// One `Snapshot` per line.
    pub fn snapshots_jsonl(&self) -> String {
        jsonl(&self.snapshots)
    }

    /// Writes `trace.jsonl` and `snapshots.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("trace.jsonl"), self.steps_jsonl())?;
        fs::write(dir.join("snapshots.jsonl"), self.snapshots_jsonl())
    }

    /// Parses the two files written by [`Trace::write`]. Events are
    /// recovered from step notes.
    pub fn read(dir: &Path) -> io::Result<Trace> {
        fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> io::Result<Vec<T>> {
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| serde_json::from_str(l).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)))
                .collect()
        }
        let steps: Vec<StepObject> = parse(&fs::read_to_string(dir.join("trace.jsonl"))?)?;
        let snapshots = parse(&fs::read_to_string(dir.join("snapshots.jsonl"))?)?;
        let events = steps
            .iter()
            .flat_map(|s| {
                s.note
                    .split("; ")
                    .filter_map(|part| part.strip_prefix("event "))
                    .map(|ev| Event { tick: s.tick, entity: s.actor.clone(), event: ev.to_string() })
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(Trace { steps, snapshots, events })
    }
}
