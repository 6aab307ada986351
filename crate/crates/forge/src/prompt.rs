//! Prompt texts sent to the chat endpoint.

use serde::{Deserialize, Serialize};

use crate::error::ForgeError;

pub const DOMAIN_PLACEHOLDER: &str = "[RUST_DOMAIN_DEFINITION]";

pub const SYSTEM_PROMPT: &str = "\
You are a senior Rust engineer specializing in heuristic design for forward-search planners.
- Always produce compiling, self-contained code.
- Never introduce types not present in the domain file.
- Prefer clarity, comments, and determinism over clever tricks.
- Heuristic values should decrease as we approach the goal (admissibility is optional).
- Helper functions must end with `_heuristic_helper` and live in the same block as the heuristic.
- When matching, include a default `_ =>` arm.
- Assume unit action costs unless the domain says otherwise.
- Output EXACTLY one Rust code block when asked for code.";

pub const USER_PROMPT_TEMPLATE: &str = "\
I have a Rust implementation of a forward-search problem. The main algorithm is complete; I need a strong heuristic.
Please invent an effective heuristic for this domain, then implement it in Rust.
In your heuristic, consider the patient's medical history, the effect and safety of treatments the patient already received, and potential future treatments and their effects.

Important tips/guidelines:
1) Comment your reasoning in code.
2) Be careful with numeric casts (e.g., `as f32`).
3) When using a match arm, add an emergency default arm `_ =>`.
4) If you create helper functions, end their name with `_heuristic_helper` and put them in the same code block.
5) Write the complete heuristic; do not leave placeholders. The code must be a finished product.
6) Assume action costs=1 for all actions

Write the code in the module scope (i.e. just start writing the function/helper functions, don't go into implementation scope)
The function signature must be precisely:

```rust
fn heuristic(problem: &ProblemType, state: &State) -> f64
```

(Replace `ProblemType` with the actual type from the domain.)

domain definition:
------------------
[RUST_DOMAIN_DEFINITION]";

/// The medical-history sentence every user prompt must carry.
pub const MEDICAL_HISTORY_LINE: &str = "In your heuristic, consider the patient's medical history, the effect and safety of treatments the patient already received, and potential future treatments and their effects.";

/// Domain definition shown to the model: the planner's own model and
/// dynamics sources.
pub fn default_domain_source() -> String {
    format!(
        "// ---- gmp_core::model ----\n{}\n// ---- gmp_core::pkpd ----\n{}",
        include_str!("../../core/src/model.rs"),
        include_str!("../../core/src/pkpd.rs"),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
}

pub fn build_prompt(domain_source: &str) -> Result<PromptBundle, ForgeError> {
    if domain_source.trim().is_empty() {
        return Err(ForgeError::EmptyDomain);
    }
    Ok(PromptBundle {
        system_text: SYSTEM_PROMPT.to_string(),
        user_text: USER_PROMPT_TEMPLATE.replace(DOMAIN_PLACEHOLDER, domain_source),
    })
}
