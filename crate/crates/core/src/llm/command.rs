//! The `TARGET: <object> - <color> <category> FOR <user>` execution command.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{normalize_name, Category, Color};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TargetCommand {
    pub object_name: String,
    pub color: Color,
    pub category: Category,
    pub requesting_user: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InvalidCommand {
    #[error("object name is empty or spans lines")]
    ObjectName,
    #[error("user id {0:?} must be non-empty [A-Za-z0-9_-]")]
    UserId(String),
}

pub fn is_valid_user_id(user: &str) -> bool {
    !user.is_empty()
        && user
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl TargetCommand {
    /// Normalizes the object name (lowercase, single spaces) and validates the user id.
    pub fn new(
        object_name: &str,
        color: Color,
        category: Category,
        requesting_user: &str,
    ) -> Result<Self, InvalidCommand> {
        if object_name.contains(['\n', '\r']) {
            return Err(InvalidCommand::ObjectName);
        }
        let object_name = normalize_name(object_name);
        if object_name.is_empty() {
            return Err(InvalidCommand::ObjectName);
        }
        if !is_valid_user_id(requesting_user) {
            return Err(InvalidCommand::UserId(requesting_user.to_string()));
        }
        Ok(Self {
            object_name,
            color,
            category,
            requesting_user: requesting_user.to_string(),
        })
    }

    /// Same referent, ignoring the free-text object name.
    pub fn same_target(&self, other: &TargetCommand) -> bool {
        self.color == other.color
            && self.category == other.category
            && self.requesting_user == other.requesting_user
    }
}

impl fmt::Display for TargetCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_target_command(self))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseFailureReason {
    NoCommand,
    UnknownColor,
    UnknownCategory,
    Malformed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub reason: ParseFailureReason,
    /// The offending line, when one was found.
    pub line: Option<String>,
}

static COMMAND_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\bTARGET\s*:\s*(?P<object>.+)\s*-\s*(?P<color>\S+)\s+(?P<category>\S+)\s+FOR\s+(?P<user>[A-Za-z0-9_\-]+)[.!,;]*\s*$",
    )
    .expect("command regex compiles")
});

static COMMAND_KEYWORD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bTARGET\s*:").expect("keyword regex compiles"));

/// Emits the canonical single-line form.
pub fn format_target_command(cmd: &TargetCommand) -> String {
    format!(
        "TARGET: {} - {} {} FOR {}",
        cmd.object_name, cmd.color, cmd.category, cmd.requesting_user
    )
}

/// Extracts the last command line from an assistant reply. Never panics.
pub fn parse_target_command(text: &str) -> Result<TargetCommand, ParseFailure> {
    let last = text
        .lines()
        .rev()
        .find_map(|line| COMMAND_LINE.captures(line).map(|c| (line, c)));
    let Some((line, caps)) = last else {
        let reason = if text.lines().any(|l| COMMAND_KEYWORD.is_match(l)) {
            ParseFailureReason::Malformed
        } else {
            ParseFailureReason::NoCommand
        };
        let line = text
            .lines()
            .rev()
            .find(|l| COMMAND_KEYWORD.is_match(l))
            .map(str::to_string);
        return Err(ParseFailure { reason, line });
    };
    let fail = |reason| ParseFailure {
        reason,
        line: Some(line.to_string()),
    };
    let color = caps["color"]
        .parse::<Color>()
        .map_err(|_| fail(ParseFailureReason::UnknownColor))?;
    let category = caps["category"]
        .parse::<Category>()
        .map_err(|_| fail(ParseFailureReason::UnknownCategory))?;
    TargetCommand::new(caps["object"].trim(), color, category, &caps["user"])
        .map_err(|_| fail(ParseFailureReason::Malformed))
}
