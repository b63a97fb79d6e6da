//! Multi-user dialogue sessions: prompt protocol, state machine, target
//! confirmation and the execution feedback loop with scene backoff.

mod fsm;
mod prompts;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fsm::{next_kind, State, StateKind, Trigger, TRANSITIONS};
pub use prompts::{build_system_prompt, fill, output_format, PromptBundle, PromptError, PART_FILES};

use crate::grasp::ExecutionOutcome;
use crate::llm::{
    is_valid_user_id, parse_target_command, ChatBackend, ChatError, ChatMessage, TargetCommand,
    Transcript,
};
use crate::perception::resolve_target;
use crate::pipeline::{run_execution, ExecutionReport, PipelineConfig};
use crate::scene::{to_environment_dict, ObjectId, Scene, SceneError, SceneEvent};

pub const MAX_USERS: usize = 3;

#[derive(Debug, Error)]
pub enum DialogueError {
    #[error("a session needs 1 to {MAX_USERS} distinct valid users, got {0:?}")]
    InvalidUsers(Vec<String>),
    #[error("{0} is not a user of this session")]
    UnknownUser(String),
    #[error("trigger {trigger} is illegal in state {state}")]
    IllegalTransition { state: StateKind, trigger: Trigger },
    #[error("only {requester} may accept this target, not {user}")]
    NotRequester { user: String, requester: String },
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("environment after backoff differs from the saved pre-execution dictionary")]
    BackoffMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feedback {
    Success,
    Failure,
}

impl Feedback {
    pub fn as_str(&self) -> &'static str {
        match self {
            Feedback::Success => "success",
            Feedback::Failure => "failure",
        }
    }
}

/// One line of the session event log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRecord {
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub state_from: StateKind,
    pub state_to: StateKind,
    pub trigger: Trigger,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UtteranceReply {
    pub reply: ChatMessage,
    /// Present when the reply carried a parseable command.
    pub command: Option<TargetCommand>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissClass {
    Ok,
    MemoryConfusion,
    UnderstandingConfusion,
    NoCommand,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetMissReport {
    pub class: MissClass,
    pub expected: TargetCommand,
    pub produced: Option<TargetCommand>,
}

pub fn classify_target_miss(
    expected: &TargetCommand,
    produced: Option<&TargetCommand>,
) -> TargetMissReport {
    let class = match produced {
        None => MissClass::NoCommand,
        Some(p) if (p.color, p.category) != (expected.color, expected.category) => {
            MissClass::MemoryConfusion
        }
        Some(p) if p.requesting_user != expected.requesting_user => {
            MissClass::UnderstandingConfusion
        }
        Some(_) => MissClass::Ok,
    };
    TargetMissReport {
        class,
        expected: expected.clone(),
        produced: produced.cloned(),
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// One dialogue over one scene lineage. Operations either succeed and
/// commit, or fail and leave the session untouched.
pub struct Session {
    backend: Arc<dyn ChatBackend>,
    bundle: PromptBundle,
    rules: String,
    users: Vec<String>,
    scene: Scene,
    transcript: Option<Transcript>,
    state: State,
    saved_env: Option<String>,
    delivered: Option<ObjectId>,
    served: BTreeSet<String>,
    log: Vec<TransitionRecord>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("backend", &self.backend.kind())
            .field("users", &self.users)
            .field("state", &self.state)
            .finish_non_exhaustive()
    }
}

impl Session {
    /// An unbriefed session in `Init`.
    pub fn new(
        backend: Arc<dyn ChatBackend>,
        bundle: PromptBundle,
        scene: Scene,
        users: Vec<String>,
    ) -> Result<Self, DialogueError> {
        let distinct: BTreeSet<_> = users.iter().collect();
        if users.is_empty()
            || users.len() > MAX_USERS
            || distinct.len() != users.len()
            || !users.iter().all(|u| is_valid_user_id(u))
        {
            return Err(DialogueError::InvalidUsers(users));
        }
        let rules = bundle.task_rules.clone();
        Ok(Self {
            backend,
            bundle,
            rules,
            users,
            scene,
            transcript: None,
            state: State::Init,
            saved_env: None,
            delivered: None,
            served: BTreeSet::new(),
            log: Vec::new(),
        })
    }

    /// Seeds the transcript with parts 1 and 2.
    pub fn brief(&mut self) -> Result<(), DialogueError> {
        self.check(Trigger::Brief)?;
        let system = ChatMessage::system(build_system_prompt(&self.bundle, &self.scene, &self.rules))?;
        self.transcript = Some(Transcript::new(system)?);
        self.advance(Trigger::Brief, State::Briefed);
        Ok(())
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn served(&self) -> &BTreeSet<String> {
        &self.served
    }

    pub fn backend_kind(&self) -> &'static str {
        self.backend.kind()
    }

    pub fn transcript(&self) -> Option<&Transcript> {
        self.transcript.as_ref()
    }

    pub fn saved_env(&self) -> Option<&str> {
        self.saved_env.as_deref()
    }

    pub fn events(&self) -> &[TransitionRecord] {
        &self.log
    }

    pub fn events_json_lines(&self) -> String {
        self.log
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }

    pub fn environment_json(&self) -> String {
        to_environment_dict(&self.scene).to_json()
    }

    fn check(&self, trigger: Trigger) -> Result<StateKind, DialogueError> {
        next_kind(self.state.kind(), trigger).ok_or(DialogueError::IllegalTransition {
            state: self.state.kind(),
            trigger,
        })
    }

    fn advance(&mut self, trigger: Trigger, to: State) {
        let from = self.state.kind();
        debug_assert_eq!(next_kind(from, trigger), Some(to.kind()));
        self.log.push(TransitionRecord {
            timestamp: now_ms(),
            state_from: from,
            state_to: to.kind(),
            trigger,
        });
        self.state = to;
    }

    fn require_user(&self, user: &str) -> Result<(), DialogueError> {
        if self.users.iter().any(|u| u == user) {
            Ok(())
        } else {
            Err(DialogueError::UnknownUser(user.to_string()))
        }
    }

    /// Appends `messages` to a copy of the transcript and asks the backend.
    fn ask(&self, messages: Vec<ChatMessage>) -> Result<(Transcript, ChatMessage), DialogueError> {
        let mut t = self
            .transcript
            .clone()
            .expect("briefed sessions own a transcript");
        for m in messages {
            t.push(m);
        }
        let reply = crate::llm::complete(self.backend.as_ref(), &t)?;
        t.push(reply.clone());
        Ok((t, reply))
    }

    pub fn post_user_utterance(&mut self, user: &str, text: &str) -> Result<UtteranceReply, DialogueError> {
        self.check(Trigger::Utterance)?;
        self.require_user(user)?;
        if text.trim().is_empty() {
            return Err(DialogueError::EmptyUtterance);
        }
        let (t, reply) = self.ask(vec![ChatMessage::user(self.bundle.utterance(user, text))?])?;
        self.transcript = Some(t);
        self.advance(
            Trigger::Utterance,
            State::Interacting {
                user: user.to_string(),
            },
        );
        let command = parse_target_command(&reply.content).ok();
        if let Some(cmd) = &command {
            self.advance(
                Trigger::TargetParsed,
                State::TargetProposed {
                    command: cmd.clone(),
                },
            );
        }
        Ok(UtteranceReply { reply, command })
    }

    /// Accepting is reserved to the requesting user; any session user may
    /// reject. A rejection is reported to the backend, whose reply is returned.
    pub fn confirm_target(&mut self, user: &str, accept: bool) -> Result<Option<ChatMessage>, DialogueError> {
        let trigger = if accept { Trigger::Accept } else { Trigger::Reject };
        self.check(trigger)?;
        self.require_user(user)?;
        let command = self.state.command().expect("proposed state has a command").clone();
        if accept {
            if command.requesting_user != user {
                return Err(DialogueError::NotRequester {
                    user: user.to_string(),
                    requester: command.requesting_user,
                });
            }
            self.advance(Trigger::Accept, State::Confirmed { command });
            return Ok(None);
        }
        let (t, reply) = self.ask(vec![ChatMessage::user(self.bundle.rejection(user, &command))?])?;
        self.transcript = Some(t);
        self.advance(
            Trigger::Reject,
            State::Interacting {
                user: user.to_string(),
            },
        );
        Ok(Some(reply))
    }

    /// Enters `Executing`, saving the pre-execution environment dictionary.
    pub fn begin_execution(&mut self) -> Result<TargetCommand, DialogueError> {
        self.check(Trigger::BeginExecution)?;
        let command = self.state.command().expect("confirmed state has a command").clone();
        self.saved_env = Some(self.environment_json());
        self.delivered = None;
        self.advance(
            Trigger::BeginExecution,
            State::Executing {
                command: command.clone(),
            },
        );
        Ok(command)
    }

    /// Records the outcome. A grasped object leaves the table.
    pub fn complete_execution(&mut self, outcome: &ExecutionOutcome) -> Result<(), DialogueError> {
        self.check(Trigger::ExecutionDone)?;
        let command = self.state.command().expect("executing state has a command").clone();
        if let Some(id) = &outcome.grasped_id {
            self.scene = self.scene.apply_event(&SceneEvent::Delivered(id.clone()))?;
            self.delivered = Some(id.clone());
        }
        self.advance(Trigger::ExecutionDone, State::AwaitingFeedback { command });
        Ok(())
    }

    /// Runs the perception and grasp pipeline between begin and complete.
    pub fn step_execution<R: Rng + ?Sized>(
        &mut self,
        cfg: &PipelineConfig,
        rng: &mut R,
    ) -> Result<ExecutionReport, DialogueError> {
        let command = self.begin_execution()?;
        let slot = self
            .users
            .iter()
            .position(|u| *u == command.requesting_user)
            .unwrap_or(0);
        let report = run_execution(&self.scene, &command, cfg, slot, rng);
        self.complete_execution(&report.outcome)?;
        Ok(report)
    }

    pub fn report_feedback(&mut self, feedback: Feedback) -> Result<ChatMessage, DialogueError> {
        if self.state.kind() != StateKind::AwaitingFeedback {
            return Err(DialogueError::IllegalTransition {
                state: self.state.kind(),
                trigger: Trigger::FeedbackContinue,
            });
        }
        let command = self.state.command().expect("awaiting state has a command").clone();
        let feedback_msg = ChatMessage::user(self.bundle.feedback(feedback.as_str(), &command))?;
        match feedback {
            Feedback::Success => {
                let mut scene = self.scene.clone();
                if self.delivered.is_none() {
                    if let Some(id) = resolve_target(&scene, &command).map(|o| o.id.clone()) {
                        scene = scene.apply_event(&SceneEvent::Delivered(id))?;
                    }
                }
                let rebrief = ChatMessage::system(self.bundle.environment_part(&scene, &self.rules))?;
                let (t, reply) = self.ask(vec![rebrief, feedback_msg])?;
                let mut served = self.served.clone();
                served.insert(command.requesting_user.clone());
                let all_served = self.users.iter().all(|u| served.contains(u));
                self.scene = scene;
                self.transcript = Some(t);
                self.served = served;
                self.delivered = None;
                if all_served {
                    self.advance(Trigger::FeedbackClose, State::Closed);
                } else {
                    self.advance(
                        Trigger::FeedbackContinue,
                        State::Interacting {
                            user: command.requesting_user,
                        },
                    );
                }
                Ok(reply)
            }
            Feedback::Failure => {
                let scene = match &self.delivered {
                    Some(id) => self.scene.apply_event(&SceneEvent::Restored(id.clone()))?,
                    None => self.scene.clone(),
                };
                if Some(to_environment_dict(&scene).to_json()) != self.saved_env {
                    return Err(DialogueError::BackoffMismatch);
                }
                let (t, reply) = self.ask(vec![feedback_msg])?;
                self.scene = scene;
                self.transcript = Some(t);
                self.delivered = None;
                self.advance(
                    Trigger::FeedbackContinue,
                    State::Interacting {
                        user: command.requesting_user,
                    },
                );
                Ok(reply)
            }
        }
    }
}

/// Builds and briefs a session.
pub fn start_session(
    backend: Arc<dyn ChatBackend>,
    bundle: PromptBundle,
    scene: Scene,
    users: Vec<String>,
) -> Result<Session, DialogueError> {
    let mut s = Session::new(backend, bundle, scene, users)?;
    s.brief()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{markers, MockScript, Role, ScriptedMock};
    use crate::scene::{place_templates, Catalog, Category, Color, SceneParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Failing;
    impl ChatBackend for Failing {
        fn complete(&self, _: &Transcript) -> Result<ChatMessage, ChatError> {
            Err(ChatError::Transport("down".into()))
        }
        fn kind(&self) -> &'static str {
            "failing"
        }
    }

    fn drinks() -> Scene {
        let c = Catalog::bundled();
        let names = ["coca", "apple juice", "grape juice", "soda", "milk"];
        let t: Vec<_> = names.iter().map(|n| c.get(n).unwrap()).collect();
        let mut s = place_templates(&t, 11, &SceneParams::default()).unwrap();
        // keep everything inside the reachable band
        for (i, o) in s.objects.iter_mut().enumerate() {
            o.pose.translation.x = 0.45 + 0.1 * (i % 3) as f64;
            o.pose.translation.y = -0.25 + 0.125 * i as f64;
        }
        s
    }

    fn session(users: &[&str]) -> Session {
        let ids: Vec<String> = users.iter().map(|u| u.to_string()).collect();
        let backend = Arc::new(ScriptedMock::new(MockScript::for_users(&ids)));
        start_session(backend, PromptBundle::bundled(), drinks(), ids).unwrap()
    }

    fn grape(user: &str) -> TargetCommand {
        TargetCommand::new("grape juice", Color::Purple, Category::Bottle, user).unwrap()
    }

    #[test]
    fn user_count_bounds() {
        let backend: Arc<dyn ChatBackend> = Arc::new(Failing);
        for users in [vec![], vec!["a", "b", "c", "d"], vec!["a", "a"], vec!["a b"]] {
            let ids = users.iter().map(|u| u.to_string()).collect();
            assert!(matches!(
                start_session(backend.clone(), PromptBundle::bundled(), drinks(), ids),
                Err(DialogueError::InvalidUsers(_))
            ));
        }
    }

    #[test]
    fn grape_flavored_request_proposes_grape_juice() {
        let mut s = session(&["user1"]);
        assert_eq!(s.state(), &State::Briefed);
        let r = s.post_user_utterance("user1", "I'd like something grape-flavored").unwrap();
        assert_eq!(r.command, Some(grape("user1")));
        assert_eq!(s.state(), &State::TargetProposed { command: grape("user1") });
        let last_user = &s.transcript().unwrap().messages()[1];
        assert_eq!(last_user.role, Role::User);
        assert!(last_user.content.starts_with("[user1]: "));
    }

    #[test]
    fn small_talk_stays_interacting() {
        let mut s = session(&["user1"]);
        let r = s.post_user_utterance("user1", "hello there").unwrap();
        assert_eq!(r.command, None);
        assert_eq!(s.state().kind(), StateKind::Interacting);
    }

    #[test]
    fn backend_error_leaves_session_untouched() {
        let backend = Arc::new(Failing);
        let mut s = start_session(backend, PromptBundle::bundled(), drinks(), vec!["user1".into()]).unwrap();
        let before = s.transcript().unwrap().clone();
        assert!(matches!(s.post_user_utterance("user1", "hi"), Err(DialogueError::Chat(_))));
        assert_eq!(s.state(), &State::Briefed);
        assert_eq!(s.transcript().unwrap(), &before);
        assert!(s.events().len() == 1);
    }

    #[test]
    fn only_requester_accepts_but_anyone_rejects() {
        let mut s = session(&["user1", "user2"]);
        s.post_user_utterance("user1", "grape juice please").unwrap();
        assert!(matches!(s.confirm_target("user2", true), Err(DialogueError::NotRequester { .. })));
        assert!(matches!(s.confirm_target("user9", false), Err(DialogueError::UnknownUser(_))));
        let reply = s.confirm_target("user2", false).unwrap().unwrap();
        assert!(!reply.content.is_empty());
        assert_eq!(s.state(), &State::Interacting { user: "user2".into() });
        let msgs = s.transcript().unwrap().messages();
        assert!(msgs[msgs.len() - 2].content.starts_with(markers::CONFIRMATION));
    }

    fn to_awaiting(s: &mut Session, user: &str) -> ExecutionReport {
        s.post_user_utterance(user, "grape juice please").unwrap();
        s.confirm_target(user, true).unwrap();
        s.step_execution(&PipelineConfig::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
    }

    #[test]
    fn success_feedback_removes_object_and_rebriefs() {
        let mut s = session(&["user1", "user2"]);
        let report = to_awaiting(&mut s, "user1");
        assert!(report.outcome.is_success(), "{:?}", report.outcome);
        s.report_feedback(Feedback::Success).unwrap();
        assert_eq!(s.state(), &State::Interacting { user: "user1".into() });
        let msgs = s.transcript().unwrap().messages();
        let rebrief = msgs.iter().rev().find(|m| m.role == Role::System).unwrap();
        let env = markers::environment_block(&rebrief.content).unwrap();
        assert!(!env.contains("grape juice"));
        assert!(!s.environment_json().contains("grape juice"));
        assert!(msgs[msgs.len() - 2].content.starts_with(markers::FEEDBACK));
    }

    #[test]
    fn failure_feedback_restores_environment() {
        let mut s = session(&["user1"]);
        let before = s.environment_json();
        to_awaiting(&mut s, "user1");
        assert_ne!(s.environment_json(), before);
        s.report_feedback(Feedback::Failure).unwrap();
        assert_eq!(s.environment_json(), before);
        assert_eq!(s.saved_env(), Some(before.as_str()));
        assert_eq!(s.state().kind(), StateKind::Interacting);
    }

    #[test]
    fn serving_every_user_closes() {
        let mut s = session(&["user1"]);
        to_awaiting(&mut s, "user1");
        s.report_feedback(Feedback::Success).unwrap();
        assert_eq!(s.state(), &State::Closed);
        assert!(matches!(
            s.post_user_utterance("user1", "more?"),
            Err(DialogueError::IllegalTransition { state: StateKind::Closed, .. })
        ));
    }

    #[test]
    fn feedback_in_wrong_state_rejected() {
        let mut s = session(&["user1"]);
        s.post_user_utterance("user1", "hi").unwrap();
        assert!(matches!(
            s.report_feedback(Feedback::Failure),
            Err(DialogueError::IllegalTransition { state: StateKind::Interacting, .. })
        ));
    }

    #[test]
    fn event_log_is_json_lines() {
        let mut s = session(&["user1"]);
        to_awaiting(&mut s, "user1");
        let lines: Vec<_> = s.events_json_lines().lines().map(str::to_string).collect();
        let triggers: Vec<String> = lines
            .iter()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["trigger"].as_str().unwrap().to_string())
            .collect();
        assert_eq!(
            triggers,
            ["brief", "utterance", "target_parsed", "accept", "begin_execution", "execution_done"]
        );
        let v: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
        assert!(v["timestamp"].is_u64());
        assert_eq!(v["state_from"], "init");
        assert_eq!(v["state_to"], "briefed");
    }

    #[test]
    fn transcript_only_grows() {
        let mut s = session(&["user1", "user2"]);
        let mut prev = s.transcript().unwrap().messages().to_vec();
        type Step = Box<dyn Fn(&mut Session)>;
        let steps: Vec<Step> = vec![
            Box::new(|s| { s.post_user_utterance("user1", "what do you have?").unwrap(); }),
            Box::new(|s| { s.post_user_utterance("user1", "grape juice please").unwrap(); }),
            Box::new(|s| { s.confirm_target("user1", true).unwrap(); }),
            Box::new(|s| { s.step_execution(&PipelineConfig::default(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap(); }),
            Box::new(|s| { s.report_feedback(Feedback::Failure).unwrap(); }),
        ];
        for step in steps {
            step(&mut s);
            let now = s.transcript().unwrap().messages();
            assert!(now.len() >= prev.len());
            assert_eq!(&now[..prev.len()], &prev[..]);
            prev = now.to_vec();
        }
    }

    #[test]
    fn classifier_rules() {
        let expected = grape("user1");
        assert_eq!(classify_target_miss(&expected, None).class, MissClass::NoCommand);
        let red = TargetCommand::new("coca", Color::Red, Category::Bottle, "user1").unwrap();
        assert_eq!(classify_target_miss(&expected, Some(&red)).class, MissClass::MemoryConfusion);
        assert_eq!(
            classify_target_miss(&expected, Some(&grape("user2"))).class,
            MissClass::UnderstandingConfusion
        );
        let renamed = TargetCommand::new("purple drink", Color::Purple, Category::Bottle, "user1").unwrap();
        assert_eq!(classify_target_miss(&expected, Some(&renamed)).class, MissClass::Ok);
    }
}
