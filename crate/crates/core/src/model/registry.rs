//! Named ALO storage.
//!
//! Layout on disk: `<root>/<name>.alo.json` (exact mirror of the model, the
//! source of truth) next to `<root>/<name>.alo.md` (canonical markdown).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{validate, Alo, Condition, ValidationReport};
use crate::script;

const JSON_SUFFIX: &str = ".alo.json";
const MD_SUFFIX: &str = ".alo.md";

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("invalid ALO: {0}")]
    InvalidAlo(ValidationReport),
    #[error("`{referrer}` references {detail} on `{target}`, which is not available")]
    CrossReferenceBroken {
        referrer: String,
        target: String,
        detail: String,
    },
    #[error("no ALO named `{0}`")]
    NotFound(String),
    #[error("registry has no storage root")]
    NoStorageRoot,
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RegistryError + '_ {
    move |source| RegistryError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LoadIssueKind {
    /// The sidecar could not be read, parsed or validated; the entry was skipped.
    CorruptEntry(String),
    /// Markdown disagrees with (or is missing next to) the sidecar. The sidecar wins.
    Divergence(String),
    /// A loaded entry refers to an ALO or skill the registry doesn't have.
    BrokenReference(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadIssue {
    pub path: PathBuf,
    pub kind: LoadIssueKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub issues: Vec<LoadIssue>,
}

impl LoadReport {
    pub fn corrupt(&self) -> impl Iterator<Item = &LoadIssue> {
        self.issues
            .iter()
            .filter(|i| matches!(i.kind, LoadIssueKind::CorruptEntry(_)))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Registry {
    entries: BTreeMap<String, Alo>,
    dirty: BTreeSet<String>,
    root: Option<PathBuf>,
}

impl Registry {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// An empty registry that will save under `root`.
    pub fn with_root(root: impl Into<PathBuf>) -> Self {
        Self {
            root: Some(root.into()),
            ..Self::default()
        }
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Alo> {
        self.entries.values()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn is_dirty(&self, name: &str) -> bool {
        self.dirty.contains(name)
    }

    /// Stores `alo`, replacing any entry of the same name.
    ///
    /// Every entry is re-checked against the would-be registry before the
    /// insert is committed, so a replacement that strips a skill another
    /// ALO relies on is rejected and the registry is left untouched.
    pub fn put(&mut self, alo: Alo) -> Result<(), RegistryError> {
        let report = validate(&alo);
        if !report.is_empty() {
            return Err(RegistryError::InvalidAlo(report));
        }
        let name = alo.name.clone();
        let previous = self.entries.insert(name.clone(), alo);
        let check = self.check_all();
        if let Err(e) = check {
            match previous {
                Some(prev) => self.entries.insert(name, prev),
                None => self.entries.remove(&name),
            };
            return Err(e);
        }
        self.dirty.insert(name);
        Ok(())
    }

    /// Returns a copy of the named ALO.
    pub fn get(&self, name: &str) -> Result<Alo, RegistryError> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| RegistryError::NotFound(name.to_string()))
    }

    pub fn get_ref(&self, name: &str) -> Option<&Alo> {
        self.entries.get(name)
    }

    fn check_all(&self) -> Result<(), RegistryError> {
        for alo in self.entries.values() {
            let report = validate(alo);
            if !report.is_empty() {
                return Err(RegistryError::InvalidAlo(report));
            }
            self.check_references(alo)?;
        }
        Ok(())
    }

    /// Cross-ALO references held by `alo`, checked against this registry.
    pub fn check_references(&self, alo: &Alo) -> Result<(), RegistryError> {
        let resolve = |target: &str| -> Option<&Alo> {
            if target == alo.name {
                Some(alo)
            } else {
                self.entries.get(target)
            }
        };
        for rule in &alo.manager.policy {
            let target = rule.skill.target(&alo.name);
            let has_skill = resolve(target).is_some_and(|t| t.skill(&rule.skill.skill).is_some());
            if !has_skill {
                return Err(RegistryError::CrossReferenceBroken {
                    referrer: alo.name.clone(),
                    target: target.to_string(),
                    detail: format!("skill `{}`", rule.skill.skill),
                });
            }
            if let Condition::Near { a, b, .. } = &rule.when {
                for n in [a, b] {
                    if resolve(n).is_none() {
                        return Err(RegistryError::CrossReferenceBroken {
                            referrer: alo.name.clone(),
                            target: n.clone(),
                            detail: "the ALO itself".to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes every entry changed since the last save/load. Returns how many
    /// entries were written.
    pub fn save(&mut self) -> Result<usize, RegistryError> {
        let root = self.root.clone().ok_or(RegistryError::NoStorageRoot)?;
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        let mut written = 0;
        for name in std::mem::take(&mut self.dirty) {
            let Some(alo) = self.entries.get(&name) else {
                continue;
            };
            let json = serde_json::to_string_pretty(alo).expect("ALO serializes");
            let json_path = root.join(format!("{name}{JSON_SUFFIX}"));
            fs::write(&json_path, json + "\n").map_err(io_err(&json_path))?;
            let md_path = root.join(format!("{name}{MD_SUFFIX}"));
            fs::write(&md_path, script::serialize(alo)).map_err(io_err(&md_path))?;
            written += 1;
        }
        Ok(written)
    }

    /// Loads every `*.alo.json` under `root`. Bad entries are skipped and
    /// listed in the report, never dropped silently.
    pub fn load(root: impl AsRef<Path>) -> Result<(Registry, LoadReport), RegistryError> {
        let root = root.as_ref();
        let mut report = LoadReport::default();
        let mut files: Vec<PathBuf> = fs::read_dir(root)
            .map_err(io_err(root))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(JSON_SUFFIX)))
            .collect();
        files.sort();

        let mut entries = BTreeMap::new();
        for path in files {
            match load_entry(&path) {
                Ok(alo) => {
                    check_markdown(root, &alo, &mut report);
                    entries.insert(alo.name.clone(), alo);
                }
                Err(reason) => report.issues.push(LoadIssue {
                    path,
                    kind: LoadIssueKind::CorruptEntry(reason),
                }),
            }
        }

        let registry = Registry {
            entries,
            dirty: BTreeSet::new(),
            root: Some(root.to_path_buf()),
        };
        for alo in registry.entries.values() {
            if let Err(e) = registry.check_references(alo) {
                report.issues.push(LoadIssue {
                    path: root.join(format!("{}{JSON_SUFFIX}", alo.name)),
                    kind: LoadIssueKind::BrokenReference(e.to_string()),
                });
            }
        }
        Ok((registry, report))
    }
}

fn load_entry(path: &Path) -> Result<Alo, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let alo: Alo = serde_json::from_str(&text).map_err(|e| format!("parse: {e}"))?;
    let report = validate(&alo);
    if !report.is_empty() {
        return Err(format!("validate: {report}"));
    }
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    if file_name != format!("{}{JSON_SUFFIX}", alo.name) {
        return Err(format!("file holds ALO `{}`", alo.name));
    }
    Ok(alo)
}

fn check_markdown(root: &Path, alo: &Alo, report: &mut LoadReport) {
    let path = root.join(format!("{}{MD_SUFFIX}", alo.name));
    let reason = match fs::read_to_string(&path) {
        Err(e) => Some(format!("markdown unreadable: {e}")),
        Ok(text) => match script::parse_alo_markdown(&text) {
            Err(e) => Some(format!("markdown does not parse: {e}")),
            Ok(md) if &md != alo => Some("markdown differs from sidecar".to_string()),
            Ok(_) => None,
        },
    };
    if let Some(reason) = reason {
        report.issues.push(LoadIssue {
            path,
            kind: LoadIssueKind::Divergence(reason),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    fn simple(name: &str, skills: &[(&str, Primitive)]) -> Alo {
        let mut body = SubObject::new("body");
        for (n, p) in skills {
            let mut s = SkillSpec::new(*n, *p);
            match p {
                Primitive::Move => s = s.with_number("speed", 10.0),
                Primitive::Rotate => s = s.with_number("rate", 1.0),
                Primitive::Flee => s = s.with_number("radius", 10.0).with_number("speed", 10.0),
                _ => {}
            }
            body.skills.push(s);
        }
        Alo::new(name, vec![body], ManagerObject::idle("idle")).unwrap()
    }

    fn pair() -> Alo {
        let mut mgr = ManagerObject::idle("apart");
        mgr.policy.push(PolicyRule {
            when: "near \"cat\" \"roomba\" < 10".parse().unwrap(),
            skill: SkillRef::on("roomba", "rotate"),
            then: None,
        });
        Alo::new("cat meets roomba", vec![], mgr).unwrap()
    }

    #[test]
    fn put_and_get() {
        let mut reg = Registry::in_memory();
        let cat = simple("cat", &[("rest", Primitive::Idle)]);
        reg.put(cat.clone()).unwrap();
        assert_eq!(reg.len(), 1);
        assert_eq!(reg.get("cat").unwrap(), cat);
        assert!(matches!(reg.get("dog"), Err(RegistryError::NotFound(_))));
        reg.put(simple("roomba", &[("rotate", Primitive::Rotate)])).unwrap();
        assert_eq!(reg.len(), 2);
        assert!(reg.iter().all(|a| validate(a).is_empty()));
    }

    #[test]
    fn replacement_breaking_a_pair_rule_is_rejected_atomically() {
        let mut reg = Registry::in_memory();
        reg.put(simple("cat", &[])).unwrap();
        let roomba = simple("roomba", &[("rotate", Primitive::Rotate), ("go", Primitive::Move)]);
        reg.put(roomba.clone()).unwrap();
        reg.put(pair()).unwrap();

        let stripped = simple("roomba", &[("go", Primitive::Move)]);
        let err = reg.put(stripped).unwrap_err();
        assert!(matches!(err, RegistryError::CrossReferenceBroken { ref target, .. } if target == "roomba"));
        assert_eq!(reg.get("roomba").unwrap(), roomba);
    }

    #[test]
    fn pair_before_its_members_is_rejected() {
        let mut reg = Registry::in_memory();
        assert!(matches!(reg.put(pair()), Err(RegistryError::CrossReferenceBroken { .. })));
        assert!(reg.is_empty());
    }

    #[test]
    fn invalid_alo_rejected() {
        let mut reg = Registry::in_memory();
        let mut alo = simple("cat", &[]);
        alo.manager.current_state = "nope".into();
        assert!(matches!(reg.put(alo), Err(RegistryError::InvalidAlo(_))));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut reg = Registry::with_root(dir.path());
        reg.put(simple("cat", &[("rest", Primitive::Idle)])).unwrap();
        reg.put(simple("roomba", &[("rotate", Primitive::Rotate)])).unwrap();
        reg.put(pair()).unwrap();
        assert!(reg.is_dirty("cat"));
        assert_eq!(reg.save().unwrap(), 3);
        assert!(!reg.is_dirty("cat"));
        assert!(dir.path().join("cat meets roomba.alo.md").exists());

        let (loaded, report) = Registry::load(dir.path()).unwrap();
        assert!(report.issues.is_empty(), "{report:?}");
        assert_eq!(loaded, reg);
    }

    #[test]
    fn load_empty_dir() {
        let dir = tempfile::tempdir().unwrap();
        let (reg, report) = Registry::load(dir.path()).unwrap();
        assert!(reg.is_empty());
        assert!(report.issues.is_empty());
    }

    #[test]
    fn truncated_entry_is_reported_and_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let mut reg = Registry::with_root(dir.path());
        reg.put(simple("cat", &[])).unwrap();
        reg.put(simple("dog", &[])).unwrap();
        reg.save().unwrap();
        let path = dir.path().join("dog.alo.json");
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, &text[..text.len() / 2]).unwrap();

        let (loaded, report) = Registry::load(dir.path()).unwrap();
        assert_eq!(loaded.names().collect::<Vec<_>>(), ["cat"]);
        let corrupt: Vec<_> = report.corrupt().collect();
        assert_eq!(corrupt.len(), 1);
        assert_eq!(corrupt[0].path, path);
    }

    #[test]
    fn divergent_markdown_warns_and_sidecar_wins() {
        let dir = tempfile::tempdir().unwrap();
        let mut reg = Registry::with_root(dir.path());
        let cat = simple("cat", &[]);
        reg.put(cat.clone()).unwrap();
        reg.save().unwrap();
        let md = dir.path().join("cat.alo.md");
        let text = fs::read_to_string(&md).unwrap().replace("- knowledge:", "- knowledge:\n  - Cats nap a lot.");
        fs::write(&md, text).unwrap();

        let (loaded, report) = Registry::load(dir.path()).unwrap();
        assert_eq!(loaded.get("cat").unwrap(), cat);
        assert!(matches!(report.issues[0].kind, LoadIssueKind::Divergence(_)));
    }

    #[test]
    fn save_without_root_fails() {
        let mut reg = Registry::in_memory();
        assert!(matches!(reg.save(), Err(RegistryError::NoStorageRoot)));
    }
}
