use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParameterTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParameterTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TableError {
    #[error("no pipe-delimited table found")]
    NoTableFound,
    #[error("line {0}: row has a different number of cells than the header")]
    RaggedRow(usize),
}

/// Parses the first pipe-delimited markdown table in `text`. Prose around
/// the table is ignored; only the first contiguous run of `|` lines counts.
pub fn parse_parameter_table(text: &str) -> Result<ParameterTable, TableError> {
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.starts_with('|') {
            rows.push((i + 1, split_row(t)));
        } else if !rows.is_empty() {
            break;
        }
    }
    let mut iter = rows.into_iter();
    let Some((_, header)) = iter.next() else {
        return Err(TableError::NoTableFound);
    };
    let mut body = Vec::new();
    for (n, (line, cells)) in iter.enumerate() {
        if n == 0 && is_separator(&cells) {
            if cells.len() != header.len() {
                return Err(TableError::RaggedRow(line));
            }
            continue;
        }
        if cells.len() != header.len() {
            return Err(TableError::RaggedRow(line));
        }
        body.push(cells);
    }
    Ok(ParameterTable { header, rows: body })
}

fn split_row(line: &str) -> Vec<String> {
    let inner = line.strip_prefix('|').unwrap_or(line);
    let inner = inner.strip_suffix('|').unwrap_or(inner);
    inner.split('|').map(|c| c.trim().to_string()).collect()
}

fn is_separator(cells: &[String]) -> bool {
    cells.iter().all(|c| {
        let c = c.trim_start_matches(':').trim_end_matches(':');
        !c.is_empty() && c.chars().all(|ch| ch == '-')
    })
}
