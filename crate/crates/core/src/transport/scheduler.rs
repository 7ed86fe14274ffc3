//! Execution of a set of ranks: a seeded single-context scheduler and a
//! thread-per-rank runner with the same channel semantics.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::channel::Receiver;
use super::trace::LogicalClock;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    /// The process did some work and may be stepped again.
    Progressed,
    /// The process needs an inbound envelope before it can continue.
    Blocked,
    Exited,
}

/// A rank as seen by a runner: it can be stepped without ever blocking.
pub trait Process: Send {
    fn step(&mut self) -> Result<StepOutcome>;
    fn inbound(&self) -> &Receiver;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SchedulerStats {
    /// Step attempts, including blocked ones.
    pub ticks: u64,
    pub rounds: u64,
}

fn check_deadline(started: Instant, timeout: Option<Duration>) -> Result<()> {
    match timeout {
        Some(limit) if started.elapsed() > limit => Err(Error::Timeout(limit.as_secs_f64())),
        _ => Ok(()),
    }
}

/// Runs all processes in one context. Every round visits the live processes
/// in a seed-determined permutation; a round in which nobody progresses is a
/// deadlock.
pub fn run_deterministic<P: Process>(
    processes: &mut [P],
    seed: u64,
    clock: &LogicalClock,
    timeout: Option<Duration>,
) -> Result<SchedulerStats> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exited = vec![false; processes.len()];
    let mut order: Vec<usize> = (0..processes.len()).collect();
    let mut stats = SchedulerStats::default();
    while exited.iter().any(|e| !e) {
        order.shuffle(&mut rng);
        let mut progressed = false;
        for &i in &order {
            if exited[i] {
                continue;
            }
            stats.ticks += 1;
            clock.set(stats.ticks);
            match processes[i].step()? {
                StepOutcome::Progressed => progressed = true,
                StepOutcome::Exited => {
                    exited[i] = true;
                    progressed = true;
                }
                StepOutcome::Blocked => {}
            }
        }
        stats.rounds += 1;
        if !progressed {
            let waiting: Vec<usize> = (0..processes.len()).filter(|&i| !exited[i]).collect();
            return Err(Error::Deadlock(format!(
                "no runnable rank; still waiting: {waiting:?}"
            )));
        }
        check_deadline(started, timeout)?;
    }
    Ok(stats)
}

/// Runs every process on its own thread. The first error aborts all ranks.
pub fn run_concurrent<P: Process>(
    processes: &mut [P],
    clock: &LogicalClock,
    timeout: Option<Duration>,
) -> Result<SchedulerStats> {
    let started = Instant::now();
    let abort = AtomicBool::new(false);
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    let ticks = std::sync::atomic::AtomicU64::new(0);
    let fail = |e: Error| {
        let mut slot = first_error.lock().expect("error lock poisoned");
        if slot.is_none() {
            *slot = Some(e);
        }
        abort.store(true, Ordering::SeqCst);
    };
    std::thread::scope(|scope| {
        for p in processes.iter_mut() {
            let (abort, fail, ticks) = (&abort, &fail, &ticks);
            scope.spawn(move || loop {
                if abort.load(Ordering::SeqCst) {
                    return;
                }
                if let Err(e) = check_deadline(started, timeout) {
                    fail(e);
                    return;
                }
                ticks.fetch_add(1, Ordering::Relaxed);
                clock.advance();
                match p.step() {
                    Ok(StepOutcome::Progressed) => {}
                    Ok(StepOutcome::Blocked) => p.inbound().wait_ready(Duration::from_millis(20)),
                    Ok(StepOutcome::Exited) => return,
                    Err(e) => {
                        fail(e);
                        return;
                    }
                }
            });
        }
    });
    match first_error.into_inner().expect("error lock poisoned") {
        Some(e) => Err(e),
        None => Ok(SchedulerStats {
            ticks: ticks.into_inner(),
            rounds: 0,
        }),
    }
}

/// Convenience wrapper so callers can share a clock with a trace log.
pub fn shared_clock() -> Arc<LogicalClock> {
    Arc::new(LogicalClock::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::RankState;
    use crate::parareal::{LayoutTag, StateVector};
    use crate::transport::{channel, Envelope, Sender};

    /// Passes a token around the ring `laps` times, then exits.
    struct TokenRank {
        rank: usize,
        inbound: Receiver,
        outbound: Sender,
        laps_left: u32,
        started: bool,
        seen: Vec<u32>,
    }

    impl Process for TokenRank {
        fn step(&mut self) -> Result<StepOutcome> {
            if self.rank == 0 && !self.started {
                self.started = true;
                let p = StateVector::new(vec![0.0], LayoutTag::new("t"));
                self.outbound
                    .send(Envelope::data(0, 0, p, RankState::Setup, false)?)?;
                return Ok(StepOutcome::Progressed);
            }
            match self.inbound.try_receive() {
                Ok(None) => Ok(StepOutcome::Blocked),
                Err(_) => Ok(StepOutcome::Exited),
                Ok(Some(env)) if env.is_exit() => {
                    if self.rank != 0 {
                        self.outbound.send(env)?;
                    }
                    self.outbound.close();
                    Ok(StepOutcome::Exited)
                }
                Ok(Some(env)) => {
                    let it = env.iteration().unwrap();
                    self.seen.push(it);
                    if self.rank == 0 {
                        self.laps_left -= 1;
                        if self.laps_left == 0 {
                            self.outbound
                                .send(Envelope::exit(RankState::LastConverged))?;
                            return Ok(StepOutcome::Progressed);
                        }
                    }
                    let p = StateVector::new(vec![0.0], LayoutTag::new("t"));
                    self.outbound.send(Envelope::data(
                        0,
                        it + 1,
                        p,
                        RankState::FollowerInSlidingWindow,
                        false,
                    )?)?;
                    Ok(StepOutcome::Progressed)
                }
            }
        }

        fn inbound(&self) -> &Receiver {
            &self.inbound
        }
    }

    fn ring(p: usize, laps: u32) -> Vec<TokenRank> {
        let links: Vec<_> = (0..p).map(|r| channel(r, (r + 1) % p, None)).collect();
        let mut receivers: Vec<Option<Receiver>> = vec![None; p];
        let mut senders = Vec::new();
        for (r, (tx, rx)) in links.into_iter().enumerate() {
            receivers[(r + 1) % p] = Some(rx);
            senders.push(tx);
        }
        senders
            .into_iter()
            .zip(receivers)
            .enumerate()
            .map(|(rank, (outbound, inbound))| TokenRank {
                rank,
                inbound: inbound.unwrap(),
                outbound,
                laps_left: laps,
                started: false,
                seen: Vec::new(),
            })
            .collect()
    }

    #[test]
    fn deterministic_token_ring_terminates() {
        for p in [1, 2, 5] {
            let mut ranks = ring(p, 3);
            let clock = LogicalClock::default();
            run_deterministic(&mut ranks, 7, &clock, None).unwrap();
            assert_eq!(ranks[0].seen.len(), 3);
        }
    }

    #[test]
    fn concurrent_token_ring_terminates() {
        let mut ranks = ring(4, 5);
        let clock = LogicalClock::default();
        run_concurrent(&mut ranks, &clock, Some(Duration::from_secs(10))).unwrap();
        assert_eq!(ranks[0].seen, vec![3, 7, 11, 15, 19]);
    }

    #[test]
    fn stuck_ranks_report_deadlock() {
        // Nobody starts the token.
        let mut ranks = ring(3, 1);
        for r in &mut ranks {
            r.started = true;
        }
        let clock = LogicalClock::default();
        let err = run_deterministic(&mut ranks, 1, &clock, None).unwrap_err();
        assert!(matches!(err, Error::Deadlock(_)));
    }
}
