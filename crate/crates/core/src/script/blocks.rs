use std::ops::Range;

/// One triple-backtick fenced block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeBlock {
    /// Info string after the opening fence (`js`, `javascript`, ...). Informational.
    pub language: String,
    pub body: String,
    /// Bytes of the whole block, fences included.
    pub span: Range<usize>,
    /// Bytes of `body` within the source.
    pub body_span: Range<usize>,
    /// The block had no closing fence and runs to end of text (rule R1).
    pub unterminated: bool,
}

pub fn extract_code_blocks(text: &str) -> Vec<CodeBlock> {
    let mut blocks = Vec::new();
    let mut open: Option<(usize, usize, String)> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let trimmed = line.trim();
        if !trimmed.starts_with("```") {
            continue;
        }
        match open.take() {
            None => {
                let language = trimmed.trim_start_matches('`').trim().to_string();
                open = Some((start, offset, language));
            }
            Some((block_start, body_start, language)) => {
                blocks.push(CodeBlock {
                    language,
                    body: text[body_start..start].to_string(),
                    span: block_start..offset,
                    body_span: body_start..start,
                    unterminated: false,
                });
            }
        }
    }
    if let Some((block_start, body_start, language)) = open {
        blocks.push(CodeBlock {
            language,
            body: text[body_start..].to_string(),
            span: block_start..text.len(),
            body_span: body_start..text.len(),
            unterminated: true,
        });
    }
    blocks
}
