//! Deterministic clean-up of model responses before parsing.
//!
//! | rule | effect |
//! |------|--------|
//! | R1 | close an unterminated code fence |
//! | R2 | normalize heading levels to the grammar depth |
//! | R3 | drop duplicate keys, keeping the first |
//! | R4 | coerce yes/no/true/false spellings to canonical booleans |
//! | R5 | strip prose lines outside the grammar |
//!
//! `repair` is idempotent: running it on its own output applies nothing.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{SECTION_MANAGER, SECTION_STEPS, SECTION_SUBOBJECTS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RepairRule {
    R1,
    R2,
    R3,
    R4,
    R5,
}

impl fmt::Display for RepairRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Repaired {
    pub text: String,
    /// Rules that changed something, in rule order.
    pub applied: Vec<RepairRule>,
}

pub fn repair(text: &str) -> Repaired {
    let mut applied = BTreeSet::new();
    let trailing_newline = text.ends_with('\n');
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();

    // R1
    let fences = lines.iter().filter(|l| is_fence(l)).count();
    if fences % 2 == 1 {
        lines.push("```".to_string());
        applied.insert(RepairRule::R1);
    }

    // R5
    let start = lines
        .iter()
        .position(|l| heading_text(l).is_some_and(|(_, t)| t.starts_with("ALO:")))
        .unwrap_or(0);
    let before = lines.len();
    let kept: Vec<String> = lines
        .into_iter()
        .enumerate()
        .filter(|(i, l)| *i >= start && is_grammar_line(l))
        .map(|(_, l)| l)
        .collect();
    if kept.len() != before {
        applied.insert(RepairRule::R5);
    }
    lines = kept;

    // R2
    for line in &mut lines {
        let Some((level, text)) = heading_text(line) else {
            continue;
        };
        let want = if text.starts_with("ALO:") {
            1
        } else if [SECTION_SUBOBJECTS, SECTION_MANAGER, SECTION_STEPS].contains(&text) {
            2
        } else {
            3
        };
        let canonical = format!("{} {text}", "#".repeat(want));
        if *line != canonical {
            debug_assert!(level > 0);
            *line = canonical;
            applied.insert(RepairRule::R2);
        }
    }

    // R3
    let mut out = Vec::with_capacity(lines.len());
    let mut top_keys: BTreeSet<String> = BTreeSet::new();
    let mut child_keys: BTreeSet<String> = BTreeSet::new();
    let mut keyed_block = false;
    let mut dropping = false;
    for line in lines {
        if line.starts_with('#') {
            top_keys.clear();
            keyed_block = false;
            dropping = false;
            out.push(line);
            continue;
        }
        if let Some(key) = top_key_name(&line) {
            dropping = !top_keys.insert(key.to_string());
            if dropping {
                applied.insert(RepairRule::R3);
                continue;
            }
            keyed_block = matches!(key, "skills" | "states");
            child_keys.clear();
            out.push(line);
            continue;
        }
        if line.starts_with("  ") && dropping {
            continue;
        }
        if !line.starts_with("  ") && !line.trim().is_empty() {
            dropping = false;
            keyed_block = false;
        }
        if keyed_block {
            if let Some(key) = child_key_name(&line) {
                if !child_keys.insert(key.to_string()) {
                    applied.insert(RepairRule::R3);
                    continue;
                }
            }
        }
        out.push(line);
    }
    lines = out;

    // R4
    let mut in_states = false;
    for line in &mut lines {
        if let Some(key) = top_key_name(line) {
            in_states = key == "states";
            continue;
        }
        if line.starts_with('#') {
            in_states = false;
            continue;
        }
        if !in_states {
            continue;
        }
        let Some(rest) = line.strip_prefix("  - ") else {
            continue;
        };
        let Some((name, value)) = rest.split_once(':') else {
            continue;
        };
        let value = value.trim();
        let token = value.strip_prefix("boolean ").map(str::trim).unwrap_or(value);
        let coerced = match token.to_ascii_lowercase().as_str() {
            "yes" | "true" => "true",
            "no" | "false" => "false",
            _ => continue,
        };
        let canonical = format!("  - {name}: boolean {coerced}");
        if *line != canonical {
            *line = canonical;
            applied.insert(RepairRule::R4);
        }
    }

    let mut text = lines.join("\n");
    if trailing_newline && !text.is_empty() {
        text.push('\n');
    }
    Repaired {
        text,
        applied: applied.into_iter().collect(),
    }
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn heading_text(line: &str) -> Option<(usize, &str)> {
    let level = line.chars().take_while(|&c| c == '#').count();
    if level == 0 {
        return None;
    }
    let text = line[level..].trim();
    (!text.is_empty()).then_some((level, text))
}

fn is_grammar_line(line: &str) -> bool {
    line.trim().is_empty()
        || heading_text(line).is_some()
        || line.starts_with("- ")
        || line.starts_with("  - ")
        || line == "  -"
}

fn top_key_name(line: &str) -> Option<&str> {
    let rest = line.strip_prefix("- ")?;
    let (key, _) = rest.split_once(':')?;
    (!key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')).then_some(key)
}

fn child_key_name(line: &str) -> Option<&str> {
    let rest = line.strip_prefix("  - ")?;
    let (key, _) = rest.split_once(':')?;
    let key = key.trim();
    (!key.is_empty()).then_some(key)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANONICAL: &str = "\
# ALO: cat
- mainObj: cat
- provenance: authored

## subObjList

### body
- skills:
  - jump: jump height=1.5
- knowledge:
  - Cats land on their feet.
- states:
  - awake: boolean true

## managerObj
- currentState: idle
- stateSet: idle
- policy:
- reward: 0

## stepObjList
";

    #[test]
    fn canonical_is_untouched() {
        let r = repair(CANONICAL);
        assert_eq!(r.text, CANONICAL);
        assert!(r.applied.is_empty());
    }

    #[test]
    fn duplicated_skills_key_dropped() {
        let text = CANONICAL.replace(
            "- knowledge:",
            "- skills:\n  - meow: emit event=meow\n- knowledge:",
        );
        let r = repair(&text);
        assert_eq!(r.applied, [RepairRule::R3]);
        assert_eq!(r.text, CANONICAL);
    }

    #[test]
    fn duplicated_child_key_dropped() {
        let text = CANONICAL.replace(
            "  - jump: jump height=1.5",
            "  - jump: jump height=1.5\n  - jump: jump height=9",
        );
        let r = repair(&text);
        assert_eq!(r.applied, [RepairRule::R3]);
        assert_eq!(r.text, CANONICAL);
    }

    #[test]
    fn prose_and_fences_are_stripped() {
        let text = format!("Sure! Here is your ALO.\n```markdown\n{CANONICAL}```\nLet me know if you need more.\n");
        let r = repair(&text);
        assert_eq!(r.applied, [RepairRule::R5]);
        assert_eq!(r.text, CANONICAL);
    }

    #[test]
    fn unterminated_fence_is_closed_then_stripped() {
        let text = format!("```markdown\n{CANONICAL}");
        let r = repair(&text);
        assert_eq!(r.applied, [RepairRule::R1, RepairRule::R5]);
        assert_eq!(r.text, CANONICAL);
    }

    #[test]
    fn heading_levels_normalized() {
        let text = CANONICAL
            .replace("# ALO: cat", "## ALO: cat")
            .replace("### body", "#### body")
            .replace("## managerObj", "### managerObj");
        let r = repair(&text);
        assert_eq!(r.applied, [RepairRule::R2]);
        assert_eq!(r.text, CANONICAL);
    }

    #[test]
    fn booleans_coerced() {
        let text = CANONICAL.replace("awake: boolean true", "awake: Yes");
        let r = repair(&text);
        assert_eq!(r.applied, [RepairRule::R4]);
        assert_eq!(r.text, CANONICAL);
        let text = CANONICAL.replace("awake: boolean true", "awake: boolean NO");
        assert!(repair(&text).text.contains("awake: boolean false"));
    }

    #[test]
    fn repair_is_a_fixed_point() {
        let messy = format!(
            "intro\n## ALO: cat\n- mainObj: cat\n- mainObj: dog\n#subObjList\n### body\n- states:\n  - a: yes\n  - a: no\n```js\nlet x = 1;\n{CANONICAL}"
        );
        let once = repair(&messy);
        let twice = repair(&once.text);
        assert_eq!(twice.text, once.text);
        assert!(twice.applied.is_empty());
    }
}
