//! Session state machine.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::llm::TargetCommand;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum State {
    Init,
    Briefed,
    Interacting { user: String },
    TargetProposed { command: TargetCommand },
    Confirmed { command: TargetCommand },
    Executing { command: TargetCommand },
    AwaitingFeedback { command: TargetCommand },
    Closed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Init,
    Briefed,
    Interacting,
    TargetProposed,
    Confirmed,
    Executing,
    AwaitingFeedback,
    Closed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Brief,
    Utterance,
    TargetParsed,
    Accept,
    Reject,
    BeginExecution,
    ExecutionDone,
    FeedbackContinue,
    FeedbackClose,
}

impl StateKind {
    pub const ALL: [StateKind; 8] = [
        StateKind::Init,
        StateKind::Briefed,
        StateKind::Interacting,
        StateKind::TargetProposed,
        StateKind::Confirmed,
        StateKind::Executing,
        StateKind::AwaitingFeedback,
        StateKind::Closed,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StateKind::Init => "init",
            StateKind::Briefed => "briefed",
            StateKind::Interacting => "interacting",
            StateKind::TargetProposed => "target_proposed",
            StateKind::Confirmed => "confirmed",
            StateKind::Executing => "executing",
            StateKind::AwaitingFeedback => "awaiting_feedback",
            StateKind::Closed => "closed",
        }
    }
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Trigger {
    pub const ALL: [Trigger; 9] = [
        Trigger::Brief,
        Trigger::Utterance,
        Trigger::TargetParsed,
        Trigger::Accept,
        Trigger::Reject,
        Trigger::BeginExecution,
        Trigger::ExecutionDone,
        Trigger::FeedbackContinue,
        Trigger::FeedbackClose,
    ];
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("trigger serializes");
        f.write_str(s.as_str().unwrap_or_default())
    }
}

/// The declared transition relation.
pub const TRANSITIONS: [(StateKind, Trigger, StateKind); 11] = [
    (StateKind::Init, Trigger::Brief, StateKind::Briefed),
    (StateKind::Briefed, Trigger::Utterance, StateKind::Interacting),
    (StateKind::Interacting, Trigger::Utterance, StateKind::Interacting),
    (StateKind::Interacting, Trigger::TargetParsed, StateKind::TargetProposed),
    (StateKind::TargetProposed, Trigger::Accept, StateKind::Confirmed),
    (StateKind::TargetProposed, Trigger::Reject, StateKind::Interacting),
    (StateKind::TargetProposed, Trigger::Utterance, StateKind::Interacting),
    (StateKind::Confirmed, Trigger::BeginExecution, StateKind::Executing),
    (StateKind::Executing, Trigger::ExecutionDone, StateKind::AwaitingFeedback),
    (StateKind::AwaitingFeedback, Trigger::FeedbackContinue, StateKind::Interacting),
    (StateKind::AwaitingFeedback, Trigger::FeedbackClose, StateKind::Closed),
];

pub fn next_kind(from: StateKind, trigger: Trigger) -> Option<StateKind> {
    TRANSITIONS
        .iter()
        .find(|(f, t, _)| *f == from && *t == trigger)
        .map(|(_, _, to)| *to)
}

impl State {
    pub fn kind(&self) -> StateKind {
        match self {
            State::Init => StateKind::Init,
            State::Briefed => StateKind::Briefed,
            State::Interacting { .. } => StateKind::Interacting,
            State::TargetProposed { .. } => StateKind::TargetProposed,
            State::Confirmed { .. } => StateKind::Confirmed,
            State::Executing { .. } => StateKind::Executing,
            State::AwaitingFeedback { .. } => StateKind::AwaitingFeedback,
            State::Closed => StateKind::Closed,
        }
    }

    pub fn command(&self) -> Option<&TargetCommand> {
        match self {
            State::TargetProposed { command }
            | State::Confirmed { command }
            | State::Executing { command }
            | State::AwaitingFeedback { command } => Some(command),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn relation_is_a_function() {
        let keys: BTreeSet<_> = TRANSITIONS.iter().map(|(f, t, _)| (*f, *t)).collect();
        assert_eq!(keys.len(), TRANSITIONS.len());
    }

    #[test]
    fn closed_is_terminal_and_init_only_briefs() {
        for t in Trigger::ALL {
            assert_eq!(next_kind(StateKind::Closed, t), None);
            let expect = (t == Trigger::Brief).then_some(StateKind::Briefed);
            assert_eq!(next_kind(StateKind::Init, t), expect);
        }
    }

    #[test]
    fn every_state_reachable_from_init() {
        let mut seen = BTreeSet::from([StateKind::Init]);
        loop {
            let before = seen.len();
            for (f, _, to) in TRANSITIONS {
                if seen.contains(&f) {
                    seen.insert(to);
                }
            }
            if seen.len() == before {
                break;
            }
        }
        assert_eq!(seen.len(), StateKind::ALL.len());
    }

    #[test]
    fn state_json_is_tagged() {
        let v = serde_json::to_value(State::Interacting { user: "user1".into() }).unwrap();
        assert_eq!(v["state"], "interacting");
        assert_eq!(Trigger::TargetParsed.to_string(), "target_parsed");
    }
}
