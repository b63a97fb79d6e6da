//! In-memory session registry and per-session event log.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::broadcast;
use walle_core::dialogue::Session;
use walle_core::llm::Role;
use walle_core::pipeline::PipelineConfig;

const CHANNEL_CAPACITY: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    AssistantMessage,
    StateChange,
    SceneUpdate,
    PlanWaypoint,
    Outcome,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::AssistantMessage => "assistant_message",
            EventKind::StateChange => "state_change",
            EventKind::SceneUpdate => "scene_update",
            EventKind::PlanWaypoint => "plan_waypoint",
            EventKind::Outcome => "outcome",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    /// 1-based, gap-free within a session.
    pub seq: u64,
    pub kind: EventKind,
    pub payload: Value,
}

/// Positions in the session's logs before an operation.
#[derive(Clone, Debug)]
pub struct Mark {
    pub messages: usize,
    pub transitions: usize,
    pub environment: String,
}

/// A dialogue session plus its execution randomness and event log.
pub struct SessionCore {
    pub session: Session,
    pub rng: ChaCha8Rng,
    pub pipeline: PipelineConfig,
    log: Vec<SessionEvent>,
    tx: broadcast::Sender<SessionEvent>,
}

impl SessionCore {
    pub fn new(session: Session, rng: ChaCha8Rng, pipeline: PipelineConfig) -> Self {
        let (tx, _) = broadcast::channel(CHANNEL_CAPACITY);
        Self {
            session,
            rng,
            pipeline,
            log: Vec::new(),
            tx,
        }
    }

    pub fn log(&self) -> &[SessionEvent] {
        &self.log
    }

    pub fn emit(&mut self, kind: EventKind, payload: Value) {
        let ev = SessionEvent {
            seq: self.log.len() as u64 + 1,
            kind,
            payload,
        };
        self.log.push(ev.clone());
        // no subscribers is fine
        let _ = self.tx.send(ev);
    }

    /// Backlog with `seq > since` and a receiver for everything after it.
    /// Taken under the session lock, so the two never overlap or leave a gap.
    pub fn subscribe(&self, since: u64) -> (Vec<SessionEvent>, broadcast::Receiver<SessionEvent>) {
        let backlog = self.log.iter().filter(|e| e.seq > since).cloned().collect();
        (backlog, self.tx.subscribe())
    }

    pub fn mark(&self) -> Mark {
        Mark {
            messages: self.session.transcript().map_or(0, |t| t.len()),
            transitions: self.session.events().len(),
            environment: self.session.environment_json(),
        }
    }

    pub fn scene_snapshot(&self) -> Value {
        let scene = self.session.scene();
        json!({ "table": scene.table, "objects": scene.objects })
    }

    pub fn emit_transitions(&mut self, from: usize, to: usize) {
        let records: Vec<_> = self.session.events()[from..to].to_vec();
        for r in records {
            self.emit(EventKind::StateChange, serde_json::to_value(r).expect("record serializes"));
        }
    }

    pub fn emit_assistant_messages(&mut self, from: usize) {
        let replies: Vec<String> = self
            .session
            .transcript()
            .map(|t| {
                t.messages()
                    .iter()
                    .skip(from)
                    .filter(|m| m.role == Role::Assistant)
                    .map(|m| m.content.clone())
                    .collect()
            })
            .unwrap_or_default();
        for content in replies {
            self.emit(EventKind::AssistantMessage, json!({ "role": "assistant", "content": content }));
        }
    }

    pub fn emit_scene_if_changed(&mut self, before: &str) {
        if self.session.environment_json() != before {
            let snap = self.scene_snapshot();
            self.emit(EventKind::SceneUpdate, snap);
        }
    }

    /// Messages, then transitions, then the scene, for everything after `mark`.
    pub fn emit_since(&mut self, mark: &Mark) {
        self.emit_assistant_messages(mark.messages);
        self.emit_transitions(mark.transitions, self.session.events().len());
        self.emit_scene_if_changed(&mark.environment);
    }
}

pub struct SessionSlot {
    pub id: String,
    pub created_at: u64,
    pub seed: u64,
    pub backend: &'static str,
    pub core: Arc<tokio::sync::Mutex<SessionCore>>,
    last_active: Mutex<Instant>,
}

impl SessionSlot {
    pub fn touch(&self) {
        *self.last_active.lock().expect("poisoned") = Instant::now();
    }

    pub fn idle_since(&self) -> Instant {
        *self.last_active.lock().expect("poisoned")
    }
}

#[derive(Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    counter: AtomicU64,
}

impl SessionStore {
    pub fn insert(&self, core: SessionCore, seed: u64, created_at: u64) -> Arc<SessionSlot> {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let id = format!("s{n:05}-{:08x}", rand::random::<u32>());
        let slot = Arc::new(SessionSlot {
            id: id.clone(),
            created_at,
            seed,
            backend: core.session.backend_kind(),
            core: Arc::new(tokio::sync::Mutex::new(core)),
            last_active: Mutex::new(Instant::now()),
        });
        self.sessions.write().expect("poisoned").insert(id, slot.clone());
        slot
    }

    pub fn get(&self, id: &str) -> Option<Arc<SessionSlot>> {
        self.sessions.read().expect("poisoned").get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops sessions idle for longer than `max_idle` as of `now`.
    pub fn evict_idle(&self, max_idle: Duration, now: Instant) -> usize {
        let mut map = self.sessions.write().expect("poisoned");
        let before = map.len();
        map.retain(|_, s| now.saturating_duration_since(s.idle_since()) <= max_idle);
        before - map.len()
    }
}
