//! Neighbor-only messaging between ranks arranged in a ring, standing in for
//! MPI point-to-point communication.

mod channel;
mod envelope;
mod scheduler;
mod trace;

pub use channel::{channel, ChannelStats, Drained, EndOfStream, Receiver, Sender};
pub use envelope::{Envelope, EnvelopeKind};
pub use scheduler::{
    run_concurrent, run_deterministic, shared_clock, Process, SchedulerStats, StepOutcome,
};
pub use trace::{LogicalClock, TraceEvent, TraceLog, TraceOp};

use std::sync::Arc;

/// The two endpoints a rank owns.
#[derive(Clone)]
pub struct RankLink {
    pub inbound: Receiver,
    pub outbound: Sender,
}

/// Channels `r → (r+1) mod ranks` for every rank; entry `r` holds rank `r`'s
/// inbound (from its predecessor) and outbound (to its successor) endpoints.
pub fn ring(ranks: usize, trace: Option<Arc<TraceLog>>) -> Vec<RankLink> {
    let mut inbound: Vec<Option<Receiver>> = vec![None; ranks];
    let mut outbound = Vec::with_capacity(ranks);
    for r in 0..ranks {
        let (tx, rx) = channel(r, (r + 1) % ranks, trace.clone());
        inbound[(r + 1) % ranks] = Some(rx);
        outbound.push(tx);
    }
    outbound
        .into_iter()
        .zip(inbound)
        .map(|(outbound, inbound)| RankLink {
            inbound: inbound.expect("every rank has a predecessor"),
            outbound,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_links_neighbors_only() {
        for p in [1, 2, 5] {
            let links = ring(p, None);
            for (r, l) in links.iter().enumerate() {
                assert_eq!(l.outbound.from_rank(), r);
                assert_eq!(l.outbound.to_rank(), (r + 1) % p);
                assert_eq!(l.inbound.to_rank(), r);
                assert_eq!(l.inbound.from_rank(), (r + p - 1) % p);
            }
        }
    }
}
