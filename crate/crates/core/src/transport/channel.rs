//! Ordered, reliable, unbounded point-to-point channels.
//!
//! Each channel connects a rank to its ring successor. Sends never block;
//! receivers either poll (`try_*`) or block until an envelope or the
//! end-of-stream arrives.

use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::Duration;

use thiserror::Error;

use super::envelope::{Envelope, EnvelopeKind};
use super::trace::{TraceLog, TraceOp};
use crate::error::Error;

/// The channel is closed and no envelope is left to deliver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("end of stream")]
pub struct EndOfStream;

/// Counters kept per channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ChannelStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub max_depth: usize,
}

/// An envelope retained by [`Receiver::drain_to_latest`].
#[derive(Clone, Debug, PartialEq)]
pub struct Drained {
    pub envelope: Envelope,
    /// Superseded envelopes discarded on the way.
    pub dropped: usize,
}

struct Inner {
    queue: VecDeque<Envelope>,
    closed: bool,
    stats: ChannelStats,
}

struct Channel {
    from: usize,
    to: usize,
    inner: Mutex<Inner>,
    ready: Condvar,
    trace: Option<Arc<TraceLog>>,
}

impl Channel {
    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().expect("channel lock poisoned")
    }

    fn record(&self, op: TraceOp, env: &Envelope) {
        if let Some(trace) = &self.trace {
            trace.record(op, self.from, self.to, env);
        }
    }

    fn pop(&self, inner: &mut Inner) -> Option<Envelope> {
        let env = inner.queue.pop_front()?;
        inner.stats.delivered += 1;
        self.record(TraceOp::Recv, &env);
        Some(env)
    }

    fn drain(&self, inner: &mut Inner) -> Option<Drained> {
        let mut held = inner.queue.pop_front()?;
        let mut dropped = 0;
        while let EnvelopeKind::SimulationData { interval, .. } = held.kind {
            let supersedes = matches!(
                inner.queue.front(),
                Some(Envelope { kind: EnvelopeKind::SimulationData { interval: next, .. }, .. })
                    if *next == interval
            );
            if !supersedes {
                break;
            }
            inner.stats.dropped += 1;
            self.record(TraceOp::Drop, &held);
            dropped += 1;
            held = inner.queue.pop_front().expect("front checked above");
        }
        inner.stats.delivered += 1;
        self.record(TraceOp::Recv, &held);
        Some(Drained {
            envelope: held,
            dropped,
        })
    }
}

/// Creates the channel `from → to`.
pub fn channel(from: usize, to: usize, trace: Option<Arc<TraceLog>>) -> (Sender, Receiver) {
    let ch = Arc::new(Channel {
        from,
        to,
        inner: Mutex::new(Inner {
            queue: VecDeque::new(),
            closed: false,
            stats: ChannelStats::default(),
        }),
        ready: Condvar::new(),
        trace,
    });
    (Sender(ch.clone()), Receiver(ch))
}

#[derive(Clone)]
pub struct Sender(Arc<Channel>);

impl Sender {
    pub fn from_rank(&self) -> usize {
        self.0.from
    }

    pub fn to_rank(&self) -> usize {
        self.0.to
    }

    /// Enqueues `env`; never waits for the receiver.
    pub fn send(&self, env: Envelope) -> Result<(), Error> {
        let mut inner = self.0.lock();
        if inner.closed {
            return Err(Error::Transport(format!(
                "send on closed channel {} -> {}",
                self.0.from, self.0.to
            )));
        }
        self.0.record(TraceOp::Send, &env);
        inner.queue.push_back(env);
        inner.stats.sent += 1;
        inner.stats.max_depth = inner.stats.max_depth.max(inner.queue.len());
        drop(inner);
        self.0.ready.notify_all();
        Ok(())
    }

    pub fn close(&self) {
        self.0.lock().closed = true;
        self.0.ready.notify_all();
    }

    pub fn stats(&self) -> ChannelStats {
        self.0.lock().stats
    }
}

#[derive(Clone)]
pub struct Receiver(Arc<Channel>);

impl Receiver {
    pub fn from_rank(&self) -> usize {
        self.0.from
    }

    pub fn to_rank(&self) -> usize {
        self.0.to
    }

    /// Oldest undelivered envelope, `Ok(None)` if the queue is empty but the
    /// channel is still open.
    pub fn try_receive(&self) -> Result<Option<Envelope>, EndOfStream> {
        let mut inner = self.0.lock();
        match self.0.pop(&mut inner) {
            Some(env) => Ok(Some(env)),
            None if inner.closed => Err(EndOfStream),
            None => Ok(None),
        }
    }

    pub fn receive_blocking(&self) -> Result<Envelope, EndOfStream> {
        let mut inner = self.0.lock();
        loop {
            if let Some(env) = self.0.pop(&mut inner) {
                return Ok(env);
            }
            if inner.closed {
                return Err(EndOfStream);
            }
            inner = self.0.ready.wait(inner).expect("channel lock poisoned");
        }
    }

    /// Takes the first envelope, then keeps replacing it with queued
    /// simulation data for the same interval. Exit envelopes are never
    /// skipped.
    pub fn try_drain_to_latest(&self) -> Result<Option<Drained>, EndOfStream> {
        let mut inner = self.0.lock();
        match self.0.drain(&mut inner) {
            Some(d) => Ok(Some(d)),
            None if inner.closed => Err(EndOfStream),
            None => Ok(None),
        }
    }

    pub fn drain_to_latest(&self) -> Result<Drained, EndOfStream> {
        let mut inner = self.0.lock();
        loop {
            if let Some(d) = self.0.drain(&mut inner) {
                return Ok(d);
            }
            if inner.closed {
                return Err(EndOfStream);
            }
            inner = self.0.ready.wait(inner).expect("channel lock poisoned");
        }
    }

    /// Waits until an envelope is queued or the channel is closed, at most
    /// `timeout`.
    pub fn wait_ready(&self, timeout: Duration) {
        let inner = self.0.lock();
        if inner.queue.is_empty() && !inner.closed {
            let _ = self
                .0
                .ready
                .wait_timeout(inner, timeout)
                .expect("channel lock poisoned");
        }
    }

    pub fn close(&self) {
        self.0.lock().closed = true;
        self.0.ready.notify_all();
    }

    pub fn queued(&self) -> usize {
        self.0.lock().queue.len()
    }

    pub fn stats(&self) -> ChannelStats {
        self.0.lock().stats
    }

    /// `sent = delivered + dropped + queued`.
    pub fn conserves_envelopes(&self) -> bool {
        let inner = self.0.lock();
        inner.stats.sent == inner.stats.delivered + inner.stats.dropped + inner.queue.len() as u64
    }
}
