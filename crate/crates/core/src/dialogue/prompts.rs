//! The five prompt parts, shipped as text templates with `{slot}` placeholders.

use std::path::Path;

use thiserror::Error;

use crate::llm::TargetCommand;
use crate::scene::{to_environment_dict, Category, Color, Scene};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template {template} lacks slot {{{slot}}}")]
    MissingSlot { template: &'static str, slot: &'static str },
    #[error("reading template {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub const PART_FILES: [&str; 6] = [
    "part1_role.txt",
    "part2_env_rules.txt",
    "part3_interaction.txt",
    "part4_confirmation.txt",
    "part5_feedback.txt",
    "task_rules.txt",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptBundle {
    pub part1_role: String,
    pub part2_env_rules: String,
    pub part3_interaction: String,
    pub part4_confirmation: String,
    pub part5_feedback: String,
    pub task_rules: String,
}

/// Replaces each `{name}` with its value. Unknown braces are left alone.
pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in slots {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

impl PromptBundle {
    pub fn bundled() -> Self {
        Self::from_parts([
            include_str!("../../prompts/part1_role.txt"),
            include_str!("../../prompts/part2_env_rules.txt"),
            include_str!("../../prompts/part3_interaction.txt"),
            include_str!("../../prompts/part4_confirmation.txt"),
            include_str!("../../prompts/part5_feedback.txt"),
            include_str!("../../prompts/task_rules.txt"),
        ])
        .expect("bundled templates carry every slot")
    }

    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let mut texts = Vec::with_capacity(PART_FILES.len());
        for name in PART_FILES {
            let path = dir.as_ref().join(name);
            let text = std::fs::read_to_string(&path).map_err(|source| PromptError::Io {
                path: path.display().to_string(),
                source,
            })?;
            texts.push(text);
        }
        let parts: [&str; 6] = std::array::from_fn(|i| texts[i].as_str());
        Self::from_parts(parts)
    }

    fn from_parts(parts: [&str; 6]) -> Result<Self, PromptError> {
        let [p1, p2, p3, p4, p5, rules] = parts.map(|s| s.trim_end().to_string());
        let required: [(&'static str, &str, &[&'static str]); 4] = [
            ("part2_env_rules", &p2, &["environment_dict", "task_rules", "output_format"]),
            ("part3_interaction", &p3, &["user", "text"]),
            ("part4_confirmation", &p4, &["user", "command"]),
            ("part5_feedback", &p5, &["outcome"]),
        ];
        for (template, text, slots) in required {
            for slot in slots {
                if !text.contains(&format!("{{{slot}}}")) {
                    return Err(PromptError::MissingSlot { template, slot });
                }
            }
        }
        Ok(Self {
            part1_role: p1,
            part2_env_rules: p2,
            part3_interaction: p3,
            part4_confirmation: p4,
            part5_feedback: p5,
            task_rules: rules,
        })
    }

    /// Part 2 for the current scene.
    pub fn environment_part(&self, scene: &Scene, rules: &str) -> String {
        fill(
            &self.part2_env_rules,
            &[
                ("environment_dict", &to_environment_dict(scene).to_json()),
                ("task_rules", rules),
                ("output_format", &output_format()),
            ],
        )
    }

    pub fn utterance(&self, user: &str, text: &str) -> String {
        fill(&self.part3_interaction, &[("user", user), ("text", text.trim())])
    }

    pub fn rejection(&self, user: &str, cmd: &TargetCommand) -> String {
        fill(
            &self.part4_confirmation,
            &[("user", user), ("command", &cmd.to_string())],
        )
    }

    pub fn feedback(&self, outcome: &str, cmd: &TargetCommand) -> String {
        fill(
            &self.part5_feedback,
            &[("outcome", outcome), ("command", &cmd.to_string())],
        )
    }
}

impl Default for PromptBundle {
    fn default() -> Self {
        Self::bundled()
    }
}

/// The command grammar and its closed vocabularies.
pub fn output_format() -> String {
    let colors: Vec<_> = Color::ALL.iter().map(|c| c.as_str()).collect();
    let categories: Vec<_> = Category::ALL.iter().map(|c| c.as_str()).collect();
    format!(
        "When a person has chosen, end your reply with one line of the form\n\
         TARGET: <object name> - <color> <category> FOR <user id>\n\
         <color> is one of: {}\n\
         <category> is one of: {}\n\
         Write nothing after the command line.",
        colors.join(", "),
        categories.join(", ")
    )
}

/// Parts 1 and 2: role, environment, rules and output grammar.
pub fn build_system_prompt(bundle: &PromptBundle, scene: &Scene, rules: &str) -> String {
    format!("{}\n\n{}", bundle.part1_role, bundle.environment_part(scene, rules))
}
