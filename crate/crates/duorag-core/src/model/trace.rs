use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ModelError;

/// Phases a session moves through, in the order the moderator runs them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PreCheck,
    Dissect,
    ResolvePreliminary,
    Retrieve,
    Integrate,
    PostCheck,
    FinalAnswer,
}

/// Gate outcome recorded alongside a check phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Retrieve,
    Skip,
    Continue,
    Stop,
}

/// Serde for optional scores that may be infinite. JSON numbers cannot carry
/// infinities, so they are written as the strings `"-inf"` / `"inf"`.
mod opt_score {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, ser: S) -> Result<S::Ok, S::Error> {
        match v {
            None => ser.serialize_none(),
            Some(x) if x.is_finite() => ser.serialize_some(x),
            Some(x) if *x == f64::NEG_INFINITY => ser.serialize_some("-inf"),
            Some(x) if *x == f64::INFINITY => ser.serialize_some("inf"),
            Some(_) => Err(serde::ser::Error::custom("NaN score in trace")),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Option::<Raw>::deserialize(de)? {
            None => Ok(None),
            Some(Raw::Num(x)) => Ok(Some(x)),
            Some(Raw::Str(s)) => match s.as_str() {
                "-inf" => Ok(Some(f64::NEG_INFINITY)),
                "inf" => Ok(Some(f64::INFINITY)),
                other => Err(D::Error::custom(format!("bad score literal {other:?}"))),
            },
        }
    }
}

/// One recorded phase transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub phase: Phase,
    /// 0 for pre-check; the retrieval round otherwise. The final answer
    /// carries the number of completed rounds.
    pub iteration: u32,
    #[serde(default, with = "opt_score", skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, with = "opt_score", skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    /// Digest of the phase payload; see [`payload_digest`].
    pub payload_digest: String,
}

/// Machine-readable record of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub task_id: String,
    pub events: Vec<TraceEvent>,
}

/// Event line as written to trace JSONL files: the event object plus the
/// owning task id, one object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceLine {
    pub task_id: String,
    #[serde(flatten)]
    pub event: TraceEvent,
}

impl SessionTrace {
    pub fn new(task_id: &str) -> Self {
        Self { task_id: task_id.to_string(), events: Vec::new() }
    }

    pub fn push(&mut self, event: TraceEvent) {
        self.events.push(event);
    }

    pub fn retrieve_count(&self) -> usize {
        self.events.iter().filter(|e| e.phase == Phase::Retrieve).count()
    }

    /// One JSON object per event, newline-terminated lines.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            let line = TraceLine { task_id: self.task_id.clone(), event: event.clone() };
            out.push_str(&serde_json::to_string(&line).expect("trace event serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses the JSONL form back into per-task traces, preserving first-seen
    /// task order.
    pub fn from_jsonl(text: &str) -> Result<Vec<SessionTrace>, ModelError> {
        let mut traces: Vec<SessionTrace> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TraceLine = serde_json::from_str(line).map_err(|e| {
                ModelError::InvalidTrace(format!("line {}: {e}", lineno + 1))
            })?;
            match traces.iter_mut().find(|t| t.task_id == parsed.task_id) {
                Some(t) => t.events.push(parsed.event),
                None => traces.push(SessionTrace {
                    task_id: parsed.task_id,
                    events: vec![parsed.event],
                }),
            }
        }
        Ok(traces)
    }

    /// Checks the structural invariants of a complete trace: starts with
    /// pre-check, exactly one final answer at the end, and at most
    /// `max_retrievals` retrieve events.
    pub fn validate(&self, max_retrievals: usize) -> Result<(), ModelError> {
        let first = self
            .events
            .first()
            .ok_or_else(|| ModelError::InvalidTrace("empty trace".into()))?;
        if first.phase != Phase::PreCheck {
            return Err(ModelError::InvalidTrace("first event is not pre_check".into()));
        }
        let finals = self.events.iter().filter(|e| e.phase == Phase::FinalAnswer).count();
        if finals != 1 || self.events.last().map(|e| e.phase) != Some(Phase::FinalAnswer) {
            return Err(ModelError::InvalidTrace(
                "trace must end with exactly one final_answer".into(),
            ));
        }
        if self.retrieve_count() > max_retrievals {
            return Err(ModelError::InvalidTrace(format!(
                "{} retrieve events exceed the cap of {max_retrievals}",
                self.retrieve_count()
            )));
        }
        Ok(())
    }
}

/// Digest used in trace events: first 16 hex chars of SHA-256 over the
/// phase payload (completion text, extracted term, retrieved chunk ids
/// joined by newlines, summary, or final raw answer).
pub fn payload_digest(payload: &str) -> String {
    let digest = Sha256::digest(payload.as_bytes());
    hex::encode(&digest[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(phase: Phase, iteration: u32) -> TraceEvent {
        TraceEvent {
            phase,
            iteration,
            score: None,
            threshold: None,
            decision: None,
            payload_digest: payload_digest(""),
        }
    }

    #[test]
    fn digest_is_stable_and_short() {
        assert_eq!(payload_digest("yes"), payload_digest("yes"));
        assert_eq!(payload_digest("yes").len(), 16);
        assert_ne!(payload_digest("yes"), payload_digest("no"));
    }

    #[test]
    fn jsonl_round_trip_preserves_infinite_scores() {
        let mut t = SessionTrace::new("t1");
        t.push(TraceEvent {
            phase: Phase::PreCheck,
            iteration: 0,
            score: Some(f64::NEG_INFINITY),
            threshold: Some(-2.0),
            decision: Some(Decision::Skip),
            payload_digest: payload_digest("yes"),
        });
        t.push(ev(Phase::FinalAnswer, 0));
        let text = t.to_jsonl();
        assert!(text.contains("\"-inf\""));
        let back = SessionTrace::from_jsonl(&text).unwrap();
        assert_eq!(back, vec![t]);
    }

    #[test]
    fn validate_requires_pre_check_first_and_final_last() {
        let mut t = SessionTrace::new("t1");
        t.push(ev(Phase::Dissect, 1));
        t.push(ev(Phase::FinalAnswer, 1));
        assert!(t.validate(3).is_err());

        let mut t = SessionTrace::new("t1");
        t.push(ev(Phase::PreCheck, 0));
        assert!(t.validate(3).is_err());

        let mut t = SessionTrace::new("t1");
        t.push(ev(Phase::PreCheck, 0));
        t.push(ev(Phase::FinalAnswer, 0));
        t.validate(3).unwrap();
    }

    #[test]
    fn validate_enforces_retrieve_cap() {
        let mut t = SessionTrace::new("t1");
        t.push(ev(Phase::PreCheck, 0));
        for k in 1..=4 {
            t.push(ev(Phase::Retrieve, k));
        }
        t.push(ev(Phase::FinalAnswer, 4));
        assert!(t.validate(3).is_err());
        t.validate(4).unwrap();
    }
}
