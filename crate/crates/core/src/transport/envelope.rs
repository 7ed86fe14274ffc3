use crate::controller::RankState;
use crate::error::{Error, Result};
use crate::parareal::StateVector;

#[derive(Clone, Debug, PartialEq)]
pub enum EnvelopeKind {
    SimulationData {
        /// Interval the receiver is to work on.
        interval: usize,
        /// Sender's iteration label for the payload (0 = coarse predictor).
        iteration: u32,
        payload: StateVector,
    },
    Exit,
}

/// A message between neighboring ranks.
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub sender_state: RankState,
    /// The sender's interval is final: no further data for it will follow.
    pub sender_converged: bool,
    /// Sender's modeled cost clock at send time.
    pub cost_stamp: f64,
}

impl Envelope {
    pub fn data(
        interval: usize,
        iteration: u32,
        payload: StateVector,
        sender_state: RankState,
        sender_converged: bool,
    ) -> Result<Self> {
        if !sender_state.may_send_data() {
            return Err(Error::Protocol(format!(
                "state {sender_state} may not originate simulation data"
            )));
        }
        Ok(Envelope {
            kind: EnvelopeKind::SimulationData {
                interval,
                iteration,
                payload,
            },
            sender_state,
            sender_converged,
            cost_stamp: 0.0,
        })
    }

    pub fn exit(sender_state: RankState) -> Self {
        Envelope {
            kind: EnvelopeKind::Exit,
            sender_state,
            sender_converged: true,
            cost_stamp: 0.0,
        }
    }

    pub fn with_cost_stamp(mut self, stamp: f64) -> Self {
        self.cost_stamp = stamp;
        self
    }

    pub fn is_exit(&self) -> bool {
        matches!(self.kind, EnvelopeKind::Exit)
    }

    pub fn interval(&self) -> Option<usize> {
        match self.kind {
            EnvelopeKind::SimulationData { interval, .. } => Some(interval),
            EnvelopeKind::Exit => None,
        }
    }

    pub fn iteration(&self) -> Option<u32> {
        match self.kind {
            EnvelopeKind::SimulationData { iteration, .. } => Some(iteration),
            EnvelopeKind::Exit => None,
        }
    }

    pub fn kind_tag(&self) -> &'static str {
        match self.kind {
            EnvelopeKind::SimulationData { .. } => "data",
            EnvelopeKind::Exit => "exit",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parareal::LayoutTag;

    #[test]
    fn idle_cannot_send_data() {
        let p = StateVector::new(vec![1.0], LayoutTag::new("t"));
        assert!(Envelope::data(1, 0, p.clone(), RankState::Idle, false).is_err());
        assert!(Envelope::data(1, 0, p, RankState::Exit, false).is_err());
    }

    #[test]
    fn exit_has_no_payload() {
        let e = Envelope::exit(RankState::LastConverged);
        assert!(e.is_exit());
        assert_eq!(e.interval(), None);
        assert_eq!(e.iteration(), None);
    }
}
