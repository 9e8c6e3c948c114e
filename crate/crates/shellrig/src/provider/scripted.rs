//! Deterministic scripted provider: replays a fixed list of turns in order.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatMessage, ModelTurn, Provider, ProviderError, TokenUsage, ToolSchema};

/// Text of the synthetic final message emitted when a script runs out under
/// [`ExhaustionPolicy::FinalMessage`].
pub const SCRIPT_FINAL_MESSAGE: &str = "(scripted run complete)";

/// What a scripted provider does when asked for more turns than it has.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExhaustionPolicy {
    /// Further calls fail with [`ProviderError::ScriptExhausted`].
    Error,
    /// Further calls return a text-only turn with [`SCRIPT_FINAL_MESSAGE`].
    #[default]
    FinalMessage,
}

/// An ordered list of turns to replay, plus the exhaustion policy.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TurnScript {
    pub turns: Vec<ModelTurn>,
    #[serde(default)]
    pub exhaustion: ExhaustionPolicy,
}

impl TurnScript {
    pub fn new(turns: Vec<ModelTurn>, exhaustion: ExhaustionPolicy) -> Self {
        TurnScript { turns, exhaustion }
    }

    /// Parse a script from JSON, validating every turn.
    ///
    /// Accepts either a full `{"turns": […], "exhaustion": …}` object or a
    /// bare array of turns (exhaustion defaults to `final_message`).
    pub fn from_json(json: &str) -> Result<Self, ProviderError> {
        let script: TurnScript = match serde_json::from_str(json) {
            Ok(s) => s,
            Err(_) => {
                let turns: Vec<ModelTurn> = serde_json::from_str(json)
                    .map_err(|e| ProviderError::MalformedResponse(format!("script: {e}")))?;
                TurnScript {
                    turns,
                    exhaustion: ExhaustionPolicy::default(),
                }
            }
        };
        for turn in &script.turns {
            turn.validate()?;
        }
        Ok(script)
    }
}

/// Provider that replays a [`TurnScript`]; the cursor is its only mutable state.
pub struct ScriptedProvider {
    script: TurnScript,
    cursor: Mutex<usize>,
}

impl ScriptedProvider {
    pub fn new(script: TurnScript) -> Self {
        ScriptedProvider {
            script,
            cursor: Mutex::new(0),
        }
    }

    /// Number of scripted turns already served.
    pub fn served(&self) -> usize {
        *self.cursor.lock().unwrap()
    }
}

/// Construct a provider handle that replays `script` turn by turn.
pub fn make_scripted(script: TurnScript) -> ScriptedProvider {
    ScriptedProvider::new(script)
}

impl Provider for ScriptedProvider {
    fn complete(
        &self,
        _history: &[ChatMessage],
        _tool_schemas: &[ToolSchema],
        _model: &str,
    ) -> Result<ModelTurn, ProviderError> {
        let mut cursor = self.cursor.lock().unwrap();
        if let Some(turn) = self.script.turns.get(*cursor) {
            *cursor += 1;
            return Ok(turn.clone());
        }
        match self.script.exhaustion {
            ExhaustionPolicy::Error => Err(ProviderError::ScriptExhausted(self.script.turns.len())),
            ExhaustionPolicy::FinalMessage => Ok(ModelTurn::text(
                SCRIPT_FINAL_MESSAGE,
                TokenUsage::default(),
            )),
        }
    }
}
