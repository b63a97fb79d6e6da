//! Offline stand-in for the hosted chat model.
//!
//! A small rule engine keyed on the prompt-part markers: it reads the most
//! recent environment block, answers inventory questions, synthesizes a
//! target from the speaker's preference, acknowledges confirmation and
//! feedback messages, and can inject the target-miss failure modes.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::command::{format_target_command, TargetCommand};
use super::{markers, ChatBackend, ChatError, ChatMessage, Role, Transcript};
use crate::scene::{Category, Color, EnvObject, EnvironmentDict};
use crate::seed::mix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    #[default]
    None,
    MemoryConfusion,
    UnderstandingConfusion,
    NoCommand,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FailureInjection {
    pub mode: FailureMode,
    /// Per-turn probability of injecting `mode` when a command would be emitted.
    pub probability: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueTarget {
    pub object: String,
    pub color: Color,
    pub category: Category,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptUser {
    pub id: String,
    #[serde(default)]
    pub utterances: Vec<String>,
    #[serde(default)]
    pub true_target: Option<TrueTarget>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    pub users: Vec<ScriptUser>,
    #[serde(default)]
    pub failure_injection: FailureInjection,
}

impl MockScript {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(std::io::Error::other)
    }

    /// Script with bare user ids and no failure injection.
    pub fn for_users<S: AsRef<str>>(ids: &[S]) -> Self {
        Self {
            users: ids
                .iter()
                .map(|id| ScriptUser {
                    id: id.as_ref().to_string(),
                    utterances: Vec::new(),
                    true_target: None,
                })
                .collect(),
            failure_injection: FailureInjection::default(),
        }
    }
}

/// One mock turn plus the failure mode it injected, if any.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MockTurn {
    pub reply: String,
    pub injected: Option<FailureMode>,
}

#[derive(Clone, Debug)]
pub struct ScriptedMock {
    script: MockScript,
}

const STOPWORDS: &[&str] = &[
    "a", "about", "also", "am", "an", "and", "any", "anything", "are", "be", "bring", "can",
    "could", "d", "do", "for", "from", "get", "give", "go", "hello", "hey", "hi", "i", "id", "im",
    "in", "is", "it", "just", "kind", "like", "ll", "love", "m", "maybe", "me", "my", "need",
    "now", "of", "on", "one", "or", "please", "prefer", "re", "really", "robot", "s", "some",
    "something", "t", "table", "thank", "thanks", "that", "the", "think", "this", "to", "today",
    "ve", "want", "wants", "will", "with", "would", "you",
];

/// Cues that the speaker wants what they asked for earlier.
const RECALL_WORDS: &[&str] = &["mine", "order", "ready", "serve", "usual"];

const INVENTORY_WORDS: &[&str] = &[
    "available", "have", "inventory", "list", "menu", "options", "what", "which",
];

fn stem(token: &str) -> String {
    if token.len() > 3 && token.ends_with('s') && !token.ends_with("ss") {
        token[..token.len() - 1].to_string()
    } else {
        token.to_string()
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(stem)
        .collect()
}

fn content_tokens(text: &str) -> BTreeSet<String> {
    tokens(text)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

fn padded(text: &str) -> String {
    format!(" {} ", tokens(text).join(" "))
}

/// Full-name mention first (longest wins), then a unique best keyword score.
fn select_object<'a>(env: &'a EnvironmentDict, utterance: &str) -> Option<&'a EnvObject> {
    let hay = padded(utterance);
    let by_name = env
        .objects
        .iter()
        .filter(|o| hay.contains(&padded(&o.name)))
        .fold(None::<&EnvObject>, |best, o| match best {
            Some(b) if b.name.len() >= o.name.len() => Some(b),
            _ => Some(o),
        });
    if by_name.is_some() {
        return by_name;
    }
    let wanted = content_tokens(utterance);
    let score = |o: &EnvObject| -> u32 {
        let name = content_tokens(&o.name);
        let semantic = content_tokens(&o.semantic);
        wanted
            .iter()
            .map(|t| {
                let mut s = 0;
                if name.contains(t) {
                    s += 3;
                }
                if t == o.color.as_str() {
                    s += 2;
                }
                if t == o.category.as_str() {
                    s += 2;
                }
                if semantic.contains(t) {
                    s += 1;
                }
                s
            })
            .sum()
    };
    let scored: Vec<(u32, &EnvObject)> = env.objects.iter().map(|o| (score(o), o)).collect();
    let best = scored.iter().map(|(s, _)| *s).max()?;
    if best == 0 {
        return None;
    }
    let mut top = scored.iter().filter(|(s, _)| *s == best);
    let first = top.next()?.1;
    top.next().is_none().then_some(first)
}

fn describe(o: &EnvObject) -> String {
    format!("{} ({} {})", o.name, o.color, o.category)
}

impl ScriptedMock {
    pub fn new(script: MockScript) -> Self {
        Self { script }
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    /// Pure function of (transcript, script, injection seed).
    pub fn respond(&self, transcript: &Transcript) -> MockTurn {
        let say = |reply: String| MockTurn {
            reply,
            injected: None,
        };
        let env = transcript
            .messages()
            .iter()
            .rev()
            .find_map(|m| markers::environment_block(&m.content))
            .and_then(|block| EnvironmentDict::parse(block).ok());
        let Some(last) = transcript.last().filter(|m| m.role == Role::User) else {
            return say("I am ready. Please tell me what you would like.".into());
        };
        let Some(env) = env else {
            return say("I have not been told what is on the table yet.".into());
        };
        let text = last.content.trim();

        if text.starts_with(markers::FEEDBACK) {
            let lower = text.to_lowercase();
            return if lower.contains("outcome: success") {
                say("Glad that worked out. I have updated my view of the table; who would like something next?".into())
            } else {
                say("Sorry the delivery did not succeed. I have backed off to the previous table state, so the item is still available. Shall we try again?".into())
            };
        }
        if text.starts_with(markers::CONFIRMATION) {
            return say("Understood, I will not send that command. What would you like instead?".into());
        }
        let Some((speaker, utterance)) = markers::speaker(text) else {
            return say("Please tell me who is speaking, for example \"[user1]: ...\".".into());
        };

        if let Some(target) = select_object(&env, utterance) {
            return self.propose(transcript, &env, speaker, target);
        }
        let words = tokens(utterance);
        if words.iter().any(|w| RECALL_WORDS.contains(&w.as_str())) {
            if let Some(target) = recall(transcript, &env, speaker) {
                return self.propose(transcript, &env, speaker, target);
            }
        }
        if words.iter().any(|w| INVENTORY_WORDS.contains(&w.as_str())) {
            let listing = if env.objects.is_empty() {
                "nothing left".to_string()
            } else {
                env.objects.iter().map(describe).collect::<Vec<_>>().join(", ")
            };
            return say(format!("{speaker}, on the table there is: {listing}."));
        }
        say(format!(
            "Hello {speaker}! I can bring you one of the items on the table. What would you like?"
        ))
    }

    fn propose(
        &self,
        transcript: &Transcript,
        env: &EnvironmentDict,
        speaker: &str,
        target: &EnvObject,
    ) -> MockTurn {
        let injection = self.script.failure_injection;
        let turn = transcript
            .messages()
            .iter()
            .filter(|m| m.role == Role::User)
            .count() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(injection.seed, turn));
        let draw: f64 = rng.random();
        let injected = (injection.mode != FailureMode::None && draw < injection.probability)
            .then_some(injection.mode);

        let (object, user) = match injected {
            Some(FailureMode::NoCommand) => {
                return MockTurn {
                    reply: format!(
                        "{speaker}, I think the {} would suit you well. Let me know what you think.",
                        describe(target)
                    ),
                    injected,
                };
            }
            Some(FailureMode::MemoryConfusion) => {
                (confused_object(env, target, &mut rng), speaker.to_string())
            }
            Some(FailureMode::UnderstandingConfusion) => {
                (target.clone(), self.other_user(transcript, speaker, &mut rng))
            }
            _ => (target.clone(), speaker.to_string()),
        };
        let cmd = TargetCommand::new(&object.name, object.color, object.category, &user)
            .unwrap_or_else(|_| {
                TargetCommand::new(&object.name, object.color, object.category, "guest")
                    .expect("catalog names are valid")
            });
        MockTurn {
            reply: format!(
                "{speaker}, based on what you told me I suggest the {}. Please confirm before I pass it to the robot.\n{}",
                describe(&object),
                format_target_command(&cmd)
            ),
            injected,
        }
    }

    fn other_user(&self, transcript: &Transcript, speaker: &str, rng: &mut ChaCha8Rng) -> String {
        let mut others: BTreeSet<String> = self
            .script
            .users
            .iter()
            .map(|u| u.id.clone())
            .collect();
        for m in transcript.messages().iter().filter(|m| m.role == Role::User) {
            if let Some((who, _)) = markers::speaker(&m.content) {
                others.insert(who.to_string());
            }
        }
        others.remove(speaker);
        let others: Vec<_> = others.into_iter().collect();
        if others.is_empty() {
            "guest".to_string()
        } else {
            others[rng.random_range(0..others.len())].clone()
        }
    }
}

/// The object the speaker most recently named that is still listed.
fn recall<'a>(transcript: &Transcript, env: &'a EnvironmentDict, speaker: &str) -> Option<&'a EnvObject> {
    let msgs = transcript.messages();
    msgs[..msgs.len().saturating_sub(1)]
        .iter()
        .rev()
        .filter(|m| m.role == Role::User)
        .filter_map(|m| markers::speaker(&m.content))
        .filter(|(who, _)| *who == speaker)
        .find_map(|(_, said)| select_object(env, said))
}

/// Another listed object with a different (color, category), or an invented one.
fn confused_object(env: &EnvironmentDict, target: &EnvObject, rng: &mut ChaCha8Rng) -> EnvObject {
    let candidates: Vec<&EnvObject> = env
        .objects
        .iter()
        .filter(|o| (o.color, o.category) != (target.color, target.category))
        .collect();
    if !candidates.is_empty() {
        return candidates[rng.random_range(0..candidates.len())].clone();
    }
    let pos = Color::ALL.iter().position(|c| *c == target.color).unwrap_or(0);
    let color = Color::ALL[(pos + 1) % Color::ALL.len()];
    EnvObject {
        category: target.category,
        color,
        name: format!("{} {}", color, target.category),
        semantic: String::new(),
    }
}

impl ChatBackend for ScriptedMock {
    fn complete(&self, transcript: &Transcript) -> Result<ChatMessage, ChatError> {
        ChatMessage::assistant(self.respond(transcript).reply)
    }

    fn kind(&self) -> &'static str {
        "mock"
    }
}
