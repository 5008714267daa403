use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::canon::fmt_num;

/// A conversation-variable value: string, number or list of strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Str(String),
    List(Vec<String>),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Num(_) => "number",
            Value::Str(_) => "string",
            Value::List(_) => "list",
        }
    }

    pub fn same_type(&self, other: &Value) -> bool {
        self.type_name() == other.type_name()
    }

    /// Text form used when a value is interpolated into a template or
    /// compared against branch cases. List items are joined by newlines.
    pub fn render(&self) -> String {
        match self {
            Value::Num(n) => fmt_num(*n),
            Value::Str(s) => s.clone(),
            Value::List(items) => items.join("\n"),
        }
    }

    /// The empty value of the same type.
    pub fn cleared(&self) -> Value {
        match self {
            Value::Num(_) => Value::Num(0.0),
            Value::Str(_) => Value::Str(String::new()),
            Value::List(_) => Value::List(Vec::new()),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Num(n)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StateError {
    #[error("unknown conversation variable '{0}'")]
    UnknownVariable(String),
    #[error("conversation variable '{name}' holds a {expected}, got a {got}")]
    TypeMismatch {
        name: String,
        expected: &'static str,
        got: &'static str,
    },
    #[error("conversation variable '{name}': {message}")]
    OutOfRange { name: String, message: String },
    #[error("invalid conversation state: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StageError {
    /// Raised when auto-progress would step past the final stage. The session
    /// pipeline treats this as the signal to finalize.
    #[error("session complete: no stage after '{last}'")]
    SessionComplete { last: String },
    #[error("unknown stage '{name}'; valid stages are {valid:?}")]
    UnknownStage { name: String, valid: Vec<String> },
}

/// Names of the built-in control variables, in declaration order.
pub const BUILTIN_VARS: [&str; 7] = [
    "stage",
    "dirty_bit",
    "enable_increment",
    "stage_num",
    "stages",
    "max_inspection_count",
    "remaining_inspection_count",
];

/// The variables that survive a turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationState {
    pub stage: String,
    pub dirty_bit: u8,
    pub enable_increment: u8,
    pub stage_num: usize,
    pub stages: Vec<String>,
    pub max_inspection_count: u32,
    pub remaining_inspection_count: u32,
    #[serde(default)]
    pub user_vars: BTreeMap<String, Value>,
}

impl ConversationState {
    /// A state at the first stage. `dirty_bit` starts at 1 so that the first
    /// turn's auto-progress lands on stage 0 instead of skipping it.
    pub fn new(stages: Vec<String>) -> Result<Self, StateError> {
        let first = stages
            .first()
            .cloned()
            .ok_or_else(|| StateError::Invariant("stages must not be empty".into()))?;
        Ok(Self {
            stage: first,
            dirty_bit: 1,
            enable_increment: 1,
            stage_num: 0,
            stages,
            max_inspection_count: 0,
            remaining_inspection_count: 0,
            user_vars: BTreeMap::new(),
        })
    }

    pub fn with_inspection_budget(mut self, max: u32) -> Self {
        self.max_inspection_count = max;
        self.remaining_inspection_count = max;
        self
    }

    /// Builds a state from declared initial values. Missing built-ins get
    /// defaults: `stage_num` 0, `stage` from `stages`, `dirty_bit` 1,
    /// `enable_increment` 1, `max_inspection_count` 0 and
    /// `remaining_inspection_count` equal to the maximum.
    pub fn from_vars(vars: &BTreeMap<String, Value>) -> Result<Self, StateError> {
        let stages = match vars.get("stages") {
            Some(Value::List(s)) => s.clone(),
            Some(other) => return Err(mismatch("stages", "list", other)),
            None => return Err(StateError::Invariant("conversation variable 'stages' is required".into())),
        };
        let mut state = Self::new(stages)?;
        // Order matters: stage follows stage_num unless given explicitly, and
        // remaining defaults to max.
        for name in ["stage_num", "dirty_bit", "enable_increment", "max_inspection_count"] {
            if let Some(v) = vars.get(name) {
                state.set_var(name, v.clone())?;
            }
        }
        state.stage = state
            .stages
            .get(state.stage_num)
            .cloned()
            .ok_or_else(|| StateError::OutOfRange {
                name: "stage_num".into(),
                message: format!("{} is outside the {} stages", state.stage_num, state.stages.len()),
            })?;
        state.remaining_inspection_count = state.max_inspection_count;
        for name in ["stage", "remaining_inspection_count"] {
            if let Some(v) = vars.get(name) {
                state.set_var(name, v.clone())?;
            }
        }
        for (name, v) in vars {
            if !BUILTIN_VARS.contains(&name.as_str()) {
                state.user_vars.insert(name.clone(), v.clone());
            }
        }
        state.validate()?;
        Ok(state)
    }

    pub fn var_names(&self) -> impl Iterator<Item = &str> {
        BUILTIN_VARS.iter().copied().chain(self.user_vars.keys().map(String::as_str))
    }

    pub fn get_var(&self, name: &str) -> Option<Value> {
        Some(match name {
            "stage" => Value::Str(self.stage.clone()),
            "dirty_bit" => Value::Num(self.dirty_bit.into()),
            "enable_increment" => Value::Num(self.enable_increment.into()),
            "stage_num" => Value::Num(self.stage_num as f64),
            "stages" => Value::List(self.stages.clone()),
            "max_inspection_count" => Value::Num(self.max_inspection_count.into()),
            "remaining_inspection_count" => Value::Num(self.remaining_inspection_count.into()),
            _ => return self.user_vars.get(name).cloned(),
        })
    }

    /// Writes one variable, checking its type and per-field range. Cross-field
    /// invariants are left to [`ConversationState::validate`], since an
    /// Assigner may pass through intermediate states while writing several
    /// related variables.
    pub fn set_var(&mut self, name: &str, value: Value) -> Result<(), StateError> {
        match name {
            "stage" => self.stage = expect_str(name, value)?,
            "stages" => {
                let Value::List(stages) = value else {
                    return Err(mismatch(name, "list", &value));
                };
                if stages.is_empty() {
                    return Err(out_of_range(name, "must not be empty"));
                }
                self.stages = stages;
            }
            "dirty_bit" | "enable_increment" => {
                let n = expect_count(name, &value)?;
                if n > 1 {
                    return Err(out_of_range(name, "must be 0 or 1"));
                }
                if name == "dirty_bit" {
                    self.dirty_bit = n as u8;
                } else {
                    self.enable_increment = n as u8;
                }
            }
            "stage_num" => self.stage_num = expect_count(name, &value)? as usize,
            "max_inspection_count" => self.max_inspection_count = to_u32(name, expect_count(name, &value)?)?,
            "remaining_inspection_count" => {
                self.remaining_inspection_count = to_u32(name, expect_count(name, &value)?)?
            }
            _ => {
                let slot = self
                    .user_vars
                    .get_mut(name)
                    .ok_or_else(|| StateError::UnknownVariable(name.to_string()))?;
                if !slot.same_type(&value) {
                    return Err(mismatch(name, slot.type_name(), &value));
                }
                *slot = value;
            }
        }
        Ok(())
    }

    /// Checks the turn-boundary invariants.
    pub fn validate(&self) -> Result<(), StateError> {
        if self.stages.is_empty() {
            return Err(StateError::Invariant("stages is empty".into()));
        }
        let Some(expected) = self.stages.get(self.stage_num) else {
            return Err(StateError::Invariant(format!(
                "stage_num {} is outside the {} stages",
                self.stage_num,
                self.stages.len()
            )));
        };
        if *expected != self.stage {
            return Err(StateError::Invariant(format!(
                "stage is '{}' but stages[{}] is '{expected}'",
                self.stage, self.stage_num
            )));
        }
        if self.dirty_bit > 1 || self.enable_increment > 1 {
            return Err(StateError::Invariant("dirty_bit and enable_increment must be 0 or 1".into()));
        }
        if self.remaining_inspection_count > self.max_inspection_count {
            return Err(StateError::Invariant(format!(
                "remaining_inspection_count {} exceeds max_inspection_count {}",
                self.remaining_inspection_count, self.max_inspection_count
            )));
        }
        Ok(())
    }

    /// Auto-progress. Increments `stage_num` only when `dirty_bit` is 0 and
    /// `enable_increment` is 1; always consumes `dirty_bit`.
    pub fn to_next_stage(&self) -> Result<Self, StageError> {
        let mut next = self.clone();
        if next.dirty_bit == 0 && next.enable_increment == 1 {
            if next.stage_num + 1 >= next.stages.len() {
                return Err(StageError::SessionComplete {
                    last: self.stage.clone(),
                });
            }
            next.stage_num += 1;
        }
        next.dirty_bit = 0;
        next.stage = next.stages[next.stage_num].clone();
        Ok(next)
    }

    /// Explicitly picks the next stage, suppressing one auto-increment.
    pub fn set_stage(&self, name: &str) -> Result<Self, StageError> {
        let idx = self
            .stages
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| StageError::UnknownStage {
                name: name.to_string(),
                valid: self.stages.clone(),
            })?;
        let mut next = self.clone();
        next.stage_num = idx;
        next.stage = name.to_string();
        next.dirty_bit = 1;
        Ok(next)
    }

    /// Returns the new state and whether the budget is now exhausted.
    /// Decrementing at zero is a no-op that still reports exhaustion.
    pub fn decrement_inspection(&self) -> (Self, bool) {
        let mut next = self.clone();
        next.remaining_inspection_count = next.remaining_inspection_count.saturating_sub(1);
        let at_budget = next.remaining_inspection_count == 0;
        (next, at_budget)
    }

    pub fn reset_inspection(&self) -> Self {
        let mut next = self.clone();
        next.remaining_inspection_count = next.max_inspection_count;
        next
    }
}

fn mismatch(name: &str, expected: &'static str, got: &Value) -> StateError {
    StateError::TypeMismatch {
        name: name.to_string(),
        expected,
        got: got.type_name(),
    }
}

fn out_of_range(name: &str, message: &str) -> StateError {
    StateError::OutOfRange {
        name: name.to_string(),
        message: message.to_string(),
    }
}

fn expect_str(name: &str, value: Value) -> Result<String, StateError> {
    match value {
        Value::Str(s) => Ok(s),
        other => Err(mismatch(name, "string", &other)),
    }
}

fn expect_count(name: &str, value: &Value) -> Result<u64, StateError> {
    match value {
        Value::Num(n) if *n >= 0.0 && n.fract() == 0.0 && *n <= u32::MAX as f64 => Ok(*n as u64),
        Value::Num(_) => Err(out_of_range(name, "must be a non-negative integer")),
        other => Err(mismatch(name, "number", other)),
    }
}

fn to_u32(name: &str, n: u64) -> Result<u32, StateError> {
    u32::try_from(n).map_err(|_| out_of_range(name, "too large"))
}
