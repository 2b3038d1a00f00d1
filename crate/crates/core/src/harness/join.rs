use crate::backend::{ChatBackend, Conversation, Usage};
use crate::prompt::{assemble, join_prompt, JOIN_PREFIX};
use crate::table::Table;

use super::{
    check_join, parse_join_completion, HarnessError, JoinPrediction, PipelineConfig, Side, Task,
    Violation, ViolationKind,
};

#[derive(Debug, Clone, PartialEq)]
pub struct JoinOutcome {
    pub prediction: JoinPrediction,
    /// The answer that was accepted.
    pub raw_response: String,
    pub attempts: u32,
    pub usage: Usage,
    pub conversation: Conversation,
}

/// Feedback turn explaining why the previous merge arguments were rejected.
pub fn describe_violation(violation: &Violation, left: &Table, right: &Table) -> String {
    let problem = match violation.kind {
        ViolationKind::NonexistentColumn { side } => {
            let (name, table) = match side {
                Side::Left => ("df1", left),
                Side::Right => ("df2", right),
            };
            format!(
                "The column '{}' does not exist in {name}. Its columns are: {}.",
                violation.offending_text,
                table.headers().unwrap_or_default().join(", ")
            )
        }
        ViolationKind::ArityMismatch { .. } => {
            "left_on and right_on must name the same number of columns.".to_owned()
        }
        _ => "The answer could not be read as pd.merge arguments.".to_owned(),
    };
    format!("{problem} Try again.")
}

/// Join-column prediction in a fresh conversation. Rejected answers are explained in a
/// new user turn and the model is asked again, up to `max_anchor_attempts` answers.
pub fn run_join_task(
    left: &Table,
    right: &Table,
    backend: &dyn ChatBackend,
    config: &PipelineConfig,
    context_notes: Option<&str>,
) -> Result<JoinOutcome, HarnessError> {
    config.validate()?;
    for t in [left, right] {
        if t.headers().is_none() {
            return Err(HarnessError::MissingHeaders(t.name().to_owned()));
        }
    }
    let notes = context_notes.filter(|_| config.context_flow);
    let prompt = assemble(&join_prompt(left, right, &config.prompt_config, notes)?);
    let mut conversation = Conversation::new();
    let mut usage = Usage::default();
    conversation.push_user(prompt)?;
    let mut attempts = 1;
    loop {
        let c = backend.complete(&conversation, &config.params)?;
        usage.accumulate(&c.usage);
        conversation.push_assistant(c.text.clone())?;
        let violation = match parse_join_completion(&c.text).and_then(|p| check_join(&p, left, right)) {
            Ok(prediction) => {
                return Ok(JoinOutcome {
                    prediction,
                    raw_response: c.text,
                    attempts,
                    usage,
                    conversation,
                })
            }
            Err(v) => v,
        };
        if attempts >= config.max_anchor_attempts {
            return Err(HarnessError::TaskFailed {
                task: Task::Join,
                violation,
            });
        }
        attempts += 1;
        let mut feedback = describe_violation(&violation, left, right);
        if config.prompt_config.include_prefix {
            feedback = format!("{feedback}\n\n{JOIN_PREFIX}");
        }
        conversation.push_user(feedback)?;
    }
}
