use std::fmt;
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use super::envelope::Envelope;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceOp {
    Send,
    Recv,
    Drop,
}

impl fmt::Display for TraceOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceOp::Send => "send",
            TraceOp::Recv => "recv",
            TraceOp::Drop => "drop",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub event: u64,
    pub op: TraceOp,
    pub from: usize,
    pub to: usize,
    pub kind: &'static str,
    pub interval: Option<usize>,
    pub iteration: Option<u32>,
    pub tick: u64,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn opt<T: fmt::Display>(v: Option<T>) -> String {
            v.map_or_else(|| "-".to_string(), |x| x.to_string())
        }
        write!(
            f,
            "{},{},{},{},{},{},{},{}",
            self.event,
            self.op,
            self.from,
            self.to,
            self.kind,
            opt(self.interval),
            opt(self.iteration),
            self.tick
        )
    }
}

/// Logical time shared by all ranks of one run.
#[derive(Debug, Default)]
pub struct LogicalClock(AtomicU64);

impl LogicalClock {
    pub fn now(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }

    pub fn set(&self, tick: u64) {
        self.0.store(tick, Ordering::SeqCst);
    }

    pub fn advance(&self) -> u64 {
        self.0.fetch_add(1, Ordering::SeqCst) + 1
    }
}

/// Append-only event log written by the channels.
#[derive(Debug, Default)]
pub struct TraceLog {
    events: Mutex<Vec<TraceEvent>>,
    clock: Arc<LogicalClock>,
}

impl TraceLog {
    pub fn new(clock: Arc<LogicalClock>) -> Self {
        TraceLog {
            events: Mutex::new(Vec::new()),
            clock,
        }
    }

    pub fn clock(&self) -> &Arc<LogicalClock> {
        &self.clock
    }

    pub(crate) fn record(&self, op: TraceOp, from: usize, to: usize, env: &Envelope) {
        let mut events = self.events.lock().expect("trace lock poisoned");
        let event = events.len() as u64;
        events.push(TraceEvent {
            event,
            op,
            from,
            to,
            kind: env.kind_tag(),
            interval: env.interval(),
            iteration: env.iteration(),
            tick: self.clock.now(),
        });
    }

    pub fn events(&self) -> Vec<TraceEvent> {
        self.events.lock().expect("trace lock poisoned").clone()
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        for e in self.events.lock().expect("trace lock poisoned").iter() {
            writeln!(out, "{e}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("trace is ASCII")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::RankState;

    #[test]
    fn line_format() {
        let log = TraceLog::new(Arc::new(LogicalClock::default()));
        log.clock().set(17);
        log.record(TraceOp::Drop, 2, 3, &Envelope::exit(RankState::Idle));
        assert_eq!(log.to_text(), "0,drop,2,3,exit,-,-,17\n");
    }
}
