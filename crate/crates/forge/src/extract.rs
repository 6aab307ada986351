//! Pulls the heuristic source out of a model response.

use crate::error::ForgeError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extracted {
    pub code: String,
    pub warnings: Vec<String>,
}

/// Contents of the first fenced block. Additional blocks are ignored with
/// a warning.
pub fn extract_code(response_text: &str) -> Result<Extracted, ForgeError> {
    let mut blocks: Vec<String> = Vec::new();
    let mut current: Option<(String, Vec<&str>)> = None;
    for line in response_text.lines() {
        let trimmed = line.trim_start();
        match &mut current {
            None => {
                if let Some(rest) = trimmed.strip_prefix("```") {
                    let fence = "`".repeat(3 + rest.chars().take_while(|c| *c == '`').count());
                    current = Some((fence, Vec::new()));
                }
            }
            Some((fence, body)) => {
                if trimmed.trim_end() == fence.as_str() {
                    blocks.push(body.join("\n"));
                    current = None;
                } else {
                    body.push(line);
                }
            }
        }
    }
    let mut warnings = Vec::new();
    if let Some((_, body)) = current {
        // Unterminated final block: truncated responses still carry code.
        warnings.push("last code block is not closed".to_string());
        blocks.push(body.join("\n"));
    }
    if blocks.len() > 1 {
        warnings.push(format!("{} code blocks found; using the first", blocks.len()));
    }
    let mut code = blocks.into_iter().next().ok_or(ForgeError::NoCodeBlock)?;
    if !code.ends_with('\n') {
        code.push('\n');
    }
    Ok(Extracted { code, warnings })
}
