//! `alo repl`: one command per line, sharing the session's settings.
//! Lines are split with shell quoting rules; `help` lists the commands and
//! `exit` or `quit` (or end of input) leaves.

use std::io::{BufRead, Write};

use clap::Parser;

use crate::{CliError, Command, Session};

#[derive(Debug, Parser)]
#[command(name = "", no_binary_name = true, disable_version_flag = true)]
struct Line {
    #[command(subcommand)]
    command: Command,
}

pub fn run(session: &mut Session, input: impl BufRead, mut out: impl Write) -> Result<(), CliError> {
    let mut failures = 0usize;
    write!(out, "alo> ")?;
    out.flush()?;
    for line in input.lines() {
        let line = line?;
        let trimmed = line.trim();
        match trimmed {
            "" => {}
            "exit" | "quit" => break,
            _ => match shlex::split(trimmed) {
                None => writeln!(out, "error: unbalanced quotes")?,
                Some(words) => match Line::try_parse_from(&words) {
                    Err(e) => write!(out, "{}", e.render())?,
                    Ok(Line { command: Command::Repl }) => writeln!(out, "error: already in the REPL")?,
                    Ok(Line { command }) => {
                        if let Err(e) = session.execute(command, &mut out) {
                            failures += 1;
                            writeln!(out, "error: {e}")?;
                        }
                    }
                },
            },
        }
        write!(out, "alo> ")?;
        out.flush()?;
    }
    writeln!(out)?;
    if failures > 0 {
        return Err(CliError::domain(format!("{failures} command(s) failed")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CliConfig, Overrides, Settings};

    fn session(dir: &std::path::Path) -> Session {
        let flags = Overrides {
            registry: Some(dir.join("registry")),
            out: Some(dir.join("runs")),
            ..Overrides::default()
        };
        Session::new(Settings::resolve(CliConfig::default(), flags).unwrap())
    }

    #[test]
    fn conversational_workflow() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = session(dir.path());
        let script = "create cat\ncreate roomba\ninteract cat roomba --context \"bounded 3D physical world\"\nsimulate 10\nquit\ncreate never\n";
        let mut out = Vec::new();
        run(&mut s, script.as_bytes(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("# ALO: cat meets roomba"), "{text}");
        assert!(text.contains("20 steps"), "{text}");
        assert!(!dir.path().join("registry/never.alo.json").exists());
    }

    #[test]
    fn bad_lines_are_reported_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = session(dir.path());
        let mut out = Vec::new();
        let r = run(&mut s, "frobnicate\nsimulate\ninteract x y\n\"open\n".as_bytes(), &mut out);
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("unrecognized subcommand"), "{text}");
        assert!(text.contains("no ALO named `x`"), "{text}");
        assert!(text.contains("unbalanced quotes"), "{text}");
        // Only executed commands count; parse errors are just shown.
        assert!(matches!(r, Err(CliError::Domain(m)) if m.starts_with("1 ")));
    }
}
