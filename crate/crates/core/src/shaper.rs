//! Token-stream shaping: tokenization, emission schedules and playback.
//!
//! A schedule emits token `i` at `i * v` seconds, shifted by the pause
//! duration for every token at or after index `floor(pause_pos * N)`.
//! With `pause_pos = 0` the pause is a start-up delay before the first token.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{Language, QosConfig};

/// True for code points rendered one-per-token in CJK text.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3000..=0x303F   // CJK symbols and punctuation
        | 0x3040..=0x30FF // kana
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xAC00..=0xD7AF // hangul
        | 0xF900..=0xFAFF
        | 0xFF00..=0xFFEF // full-width forms
        | 0x20000..=0x2FA1F)
}

/// Splits `text` into display tokens. Concatenating the tokens reproduces
/// `text` exactly.
///
/// Latin-script words carry their leading whitespace (`"hello world"` gives
/// `["hello", " world"]`). In Chinese text every CJK character is its own
/// token; embedded Latin words still group. Trailing whitespace becomes a
/// final whitespace-only token.
pub fn tokenize(text: &str, language: Language) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    // true once `cur` holds a non-whitespace char
    let mut has_word = false;
    let split_cjk = language == Language::Zh;

    for c in text.chars() {
        if c.is_whitespace() {
            if has_word {
                tokens.push(core::mem::take(&mut cur));
                has_word = false;
            }
            cur.push(c);
        } else if split_cjk && is_cjk(c) {
            if has_word {
                tokens.push(core::mem::take(&mut cur));
            }
            cur.push(c);
            tokens.push(core::mem::take(&mut cur));
            has_word = false;
        } else {
            cur.push(c);
            has_word = true;
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

/// Picks zh when the text contains any CJK character.
pub fn detect_language(text: &str) -> Language {
    if text.chars().any(is_cjk) {
        Language::Zh
    } else {
        Language::En
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledToken {
    pub token: String,
    pub emit_at_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EmissionSchedule {
    pub items: Vec<ScheduledToken>,
    pub total_duration_s: f64,
}

impl EmissionSchedule {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn text(&self) -> String {
        self.items.iter().map(|t| t.token.as_str()).collect()
    }
}

/// Index of the first token delayed by the pause.
pub fn pause_index(n_tokens: usize, pause_pos: f64) -> usize {
    // pause_pos in [0, 1) keeps this strictly below n_tokens for n_tokens > 0
    (pause_pos * n_tokens as f64) as usize
}

/// Emission time of token `i` of a stream whose pause index is `k`.
#[inline]
pub fn emit_time(i: usize, k: usize, qos: &QosConfig) -> f64 {
    let base = i as f64 * qos.speed_s_per_token;
    if i < k {
        base
    } else {
        base + qos.pause_dur_s
    }
}

pub fn schedule_emission(tokens: &[String], qos: &QosConfig) -> EmissionSchedule {
    let k = pause_index(tokens.len(), qos.pause_pos);
    let items: Vec<ScheduledToken> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| ScheduledToken { token: t.clone(), emit_at_s: emit_time(i, k, qos) })
        .collect();
    let total_duration_s = items.last().map_or(0.0, |t| t.emit_at_s);
    EmissionSchedule { items, total_duration_s }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockKind {
    Virtual,
    Wall,
}

/// Source of per-stream timers. Shared read-only between streams.
pub trait Clock: Sync {
    type Timer: Timer;

    fn kind(&self) -> ClockKind;

    /// Starts a timer anchored at the current instant.
    fn start(&self) -> Self::Timer;
}

pub trait Timer {
    /// Blocks until `offset_s` after the anchor and returns the observed
    /// offset.
    fn wait_until(&mut self, offset_s: f64) -> f64;
}

/// Clock that never sleeps: every token is observed at its scheduled time.
#[derive(Debug, Clone, Copy, Default)]
pub struct VirtualClock;

#[derive(Debug, Clone, Copy, Default)]
pub struct VirtualTimer;

impl Clock for VirtualClock {
    type Timer = VirtualTimer;

    fn kind(&self) -> ClockKind {
        ClockKind::Virtual
    }

    fn start(&self) -> VirtualTimer {
        VirtualTimer
    }
}

impl Timer for VirtualTimer {
    fn wait_until(&mut self, offset_s: f64) -> f64 {
        offset_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceItem {
    pub token: String,
    pub scheduled_at_s: f64,
    pub actual_at_s: f64,
}

impl TraceItem {
    pub fn lateness_s(&self) -> f64 {
        self.actual_at_s - self.scheduled_at_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamTrace {
    pub items: Vec<TraceItem>,
    pub clock_kind: ClockKind,
}

impl StreamTrace {
    pub fn new(clock_kind: ClockKind) -> Self {
        Self { items: Vec::new(), clock_kind }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Per-token lateness, in emission order.
    pub fn lateness(&self) -> Vec<f64> {
        self.items.iter().map(TraceItem::lateness_s).collect()
    }
}

/// Consumer disconnected before the stream finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("sink-closed")]
pub struct SinkClosed;

/// Receives tokens in emission order.
pub trait TokenSink {
    fn accept(&mut self, index: usize, token: &str) -> Result<(), SinkClosed>;
}

impl<F> TokenSink for F
where
    F: FnMut(usize, &str) -> Result<(), SinkClosed>,
{
    fn accept(&mut self, index: usize, token: &str) -> Result<(), SinkClosed> {
        self(index, token)
    }
}

impl TokenSink for Vec<String> {
    fn accept(&mut self, _index: usize, token: &str) -> Result<(), SinkClosed> {
        self.push(token.into());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlayError {
    #[error("sink-closed after {} tokens", .trace.len())]
    SinkClosed { trace: StreamTrace },
    #[error("upstream-failed after {} tokens: {message}", .trace.len())]
    UpstreamFailed { message: String, trace: StreamTrace },
}

impl PlayError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::SinkClosed { .. } => "sink-closed",
            Self::UpstreamFailed { .. } => "upstream-failed",
        }
    }

    /// Tokens delivered before the failure.
    pub fn trace(&self) -> &StreamTrace {
        match self {
            Self::SinkClosed { trace } | Self::UpstreamFailed { trace, .. } => trace,
        }
    }
}

/// Delivers `schedule` to `sink`, waiting on `clock` before each token.
pub fn play<C: Clock, S: TokenSink>(schedule: &EmissionSchedule, clock: &C, sink: &mut S) -> Result<StreamTrace, PlayError> {
    let mut trace = StreamTrace::new(clock.kind());
    let mut timer = clock.start();
    for (i, item) in schedule.items.iter().enumerate() {
        let actual = timer.wait_until(item.emit_at_s);
        if sink.accept(i, &item.token).is_err() {
            return Err(PlayError::SinkClosed { trace });
        }
        trace.items.push(TraceItem {
            token: item.token.clone(),
            scheduled_at_s: item.emit_at_s,
            actual_at_s: actual,
        });
    }
    Ok(trace)
}

/// Re-times a finite upstream token source under `qos`.
///
/// The upstream is drained completely before playback, since the pause
/// position is a fraction of the final token count. An upstream error
/// aborts with the (empty) trace of what was played.
pub fn shape_upstream<I, E, C, S>(upstream: I, qos: &QosConfig, clock: &C, sink: &mut S) -> Result<StreamTrace, PlayError>
where
    I: IntoIterator<Item = Result<String, E>>,
    E: core::fmt::Display,
    C: Clock,
    S: TokenSink,
{
    let mut tokens = Vec::new();
    for next in upstream {
        match next {
            Ok(t) => tokens.push(t),
            Err(e) => {
                return Err(PlayError::UpstreamFailed {
                    message: alloc::format!("{e}"),
                    trace: StreamTrace::new(clock.kind()),
                })
            }
        }
    }
    play(&schedule_emission(&tokens, qos), clock, sink)
}

/// One line of the line-delimited streaming wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StreamEvent {
    Token { index: usize, token: String },
    Done { done: bool, count: usize },
}

impl StreamEvent {
    pub fn done(count: usize) -> Self {
        Self::Done { done: true, count }
    }
}
