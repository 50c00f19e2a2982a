//! In-process classical-channel simulator.
//!
//! Every node owns a mailbox; sends are asynchronous and enqueue after the
//! configured latency elapses. The channel is the only cross-context
//! communication mechanism between node threads. Latency can run against
//! the real clock (sleep-free: receivers wait out delivery deadlines) or a
//! virtual microsecond clock for deterministic CI runs.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::protocol::Envelope;
use qkdn_core::NodeId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("no mailbox registered for {0}")]
    UnknownRecipient(NodeId),
    #[error("mailbox for {0} is full")]
    Backpressure(NodeId),
    #[error("timed out waiting for a message")]
    Timeout,
    #[error("barrier timed out waiting for stragglers")]
    BarrierTimeout,
}

/// How long an envelope is in flight before it becomes receivable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatencyModel {
    Zero,
    /// Fixed delay per send.
    FixedMicros(u64),
    /// Delay proportional to the number of links traversed; every send in
    /// this simulator crosses exactly one link, so this behaves like
    /// `FixedMicros` per hop.
    PerHopMicros(u64),
}

impl LatencyModel {
    fn micros_for(&self, hops: u64) -> u64 {
        match self {
            LatencyModel::Zero => 0,
            LatencyModel::FixedMicros(us) => *us,
            LatencyModel::PerHopMicros(us) => us * hops,
        }
    }
}

/// Clock driving latency accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClockMode {
    /// Deadlines on the monotonic wall clock; receivers wait them out.
    #[default]
    Real,
    /// Deadlines on a shared virtual microsecond counter that advances when
    /// a receiver claims a pending envelope. No real waiting.
    Virtual,
}

#[derive(Debug, Clone, Copy)]
pub struct ChannelConfig {
    pub latency: LatencyModel,
    pub capacity: usize,
    pub clock: ClockMode,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            latency: LatencyModel::Zero,
            capacity: 1024,
            clock: ClockMode::Real,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Deadline {
    Ready,
    Real(Instant),
    Virtual(u64),
}

struct Queued {
    deadline: Deadline,
    envelope: Envelope,
}

#[derive(Default)]
struct MailboxState {
    queue: std::collections::VecDeque<Queued>,
}

#[derive(Default)]
struct Mailbox {
    state: Mutex<MailboxState>,
    available: Condvar,
}

struct ChannelInner {
    config: ChannelConfig,
    mailboxes: RwLock<HashMap<NodeId, Arc<Mailbox>>>,
    virtual_now_us: AtomicU64,
    capture: Mutex<Option<Vec<Envelope>>>,
}

/// Shared handle to the channel; clones address the same mailboxes.
#[derive(Clone)]
pub struct Channel {
    inner: Arc<ChannelInner>,
}

impl Channel {
    pub fn new(config: ChannelConfig) -> Self {
        Channel {
            inner: Arc::new(ChannelInner {
                config,
                mailboxes: RwLock::new(HashMap::new()),
                virtual_now_us: AtomicU64::new(0),
                capture: Mutex::new(None),
            }),
        }
    }

    pub fn config(&self) -> ChannelConfig {
        self.inner.config
    }

    /// Create a mailbox for `node`. Registering twice is a no-op.
    pub fn register(&self, node: &NodeId) {
        self.inner
            .mailboxes
            .write()
            .unwrap()
            .entry(node.clone())
            .or_default();
    }

    /// Start recording every envelope that passes through the channel.
    pub fn enable_capture(&self) {
        *self.inner.capture.lock().unwrap() = Some(Vec::new());
    }

    /// Drain the capture log (empties it for the next trial).
    pub fn take_captured(&self) -> Vec<Envelope> {
        match self.inner.capture.lock().unwrap().as_mut() {
            Some(log) => std::mem::take(log),
            None => Vec::new(),
        }
    }

    /// Asynchronous send: enqueues toward the recipient and returns
    /// immediately. The envelope becomes receivable once the configured
    /// latency has elapsed.
    pub fn send(&self, envelope: Envelope) -> Result<(), NetError> {
        let mailbox = self
            .inner
            .mailboxes
            .read()
            .unwrap()
            .get(&envelope.to)
            .cloned()
            .ok_or_else(|| NetError::UnknownRecipient(envelope.to.clone()))?;

        let lat_us = self.inner.config.latency.micros_for(1);
        let deadline = if lat_us == 0 {
            Deadline::Ready
        } else {
            match self.inner.config.clock {
                ClockMode::Real => Deadline::Real(Instant::now() + Duration::from_micros(lat_us)),
                ClockMode::Virtual => {
                    Deadline::Virtual(self.inner.virtual_now_us.load(Ordering::SeqCst) + lat_us)
                }
            }
        };

        let mut state = mailbox.state.lock().unwrap();
        if state.queue.len() >= self.inner.config.capacity {
            return Err(NetError::Backpressure(envelope.to.clone()));
        }
        if let Some(log) = self.inner.capture.lock().unwrap().as_mut() {
            log.push(envelope.clone());
        }
        state.queue.push_back(Queued { deadline, envelope });
        drop(state);
        mailbox.available.notify_one();
        Ok(())
    }

    /// Blocking receive with timeout. Returns the oldest deliverable
    /// envelope; per-sender FIFO order is preserved.
    pub fn recv(&self, node: &NodeId, timeout: Duration) -> Result<Envelope, NetError> {
        let mailbox = self
            .inner
            .mailboxes
            .read()
            .unwrap()
            .get(node)
            .cloned()
            .ok_or_else(|| NetError::UnknownRecipient(node.clone()))?;

        let overall_deadline = Instant::now() + timeout;
        let mut state = mailbox.state.lock().unwrap();
        loop {
            if let Some(front) = state.queue.front() {
                match front.deadline {
                    Deadline::Ready => {
                        return Ok(state.queue.pop_front().unwrap().envelope);
                    }
                    Deadline::Virtual(at_us) => {
                        // Claiming the envelope advances the virtual clock to
                        // its delivery time.
                        self.inner.virtual_now_us.fetch_max(at_us, Ordering::SeqCst);
                        return Ok(state.queue.pop_front().unwrap().envelope);
                    }
                    Deadline::Real(at) => {
                        let now = Instant::now();
                        if at <= now {
                            return Ok(state.queue.pop_front().unwrap().envelope);
                        }
                        if overall_deadline <= now {
                            return Err(NetError::Timeout);
                        }
                        let wait = at.min(overall_deadline) - now;
                        let (next, _) = mailbox.available.wait_timeout(state, wait).unwrap();
                        state = next;
                        continue;
                    }
                }
            }
            let now = Instant::now();
            if overall_deadline <= now {
                return Err(NetError::Timeout);
            }
            let (next, _) = mailbox
                .available
                .wait_timeout(state, overall_deadline - now)
                .unwrap();
            state = next;
        }
    }

    /// Discard everything queued everywhere. Used between trials after a
    /// failed run so stale envelopes cannot leak into the next one.
    pub fn drain_all(&self) {
        for mailbox in self.inner.mailboxes.read().unwrap().values() {
            mailbox.state.lock().unwrap().queue.clear();
        }
    }

    /// Current virtual time in microseconds (virtual clock mode only).
    pub fn virtual_now_us(&self) -> u64 {
        self.inner.virtual_now_us.load(Ordering::SeqCst)
    }
}

struct BarrierState {
    arrived: usize,
    generation: u64,
}

/// Reusable barrier with timeout, aligning the start of each trial across
/// node threads.
pub struct SimBarrier {
    parties: usize,
    state: Mutex<BarrierState>,
    released: Condvar,
}

impl SimBarrier {
    pub fn new(parties: usize) -> Self {
        assert!(parties >= 1);
        SimBarrier {
            parties,
            state: Mutex::new(BarrierState {
                arrived: 0,
                generation: 0,
            }),
            released: Condvar::new(),
        }
    }

    /// Block until all parties arrive or the timeout elapses.
    pub fn wait(&self, timeout: Duration) -> Result<(), NetError> {
        let deadline = Instant::now() + timeout;
        let mut state = self.state.lock().unwrap();
        let generation = state.generation;
        state.arrived += 1;
        if state.arrived == self.parties {
            state.arrived = 0;
            state.generation += 1;
            self.released.notify_all();
            return Ok(());
        }
        while state.generation == generation {
            let now = Instant::now();
            if deadline <= now {
                // Give up our slot so a later round is not corrupted.
                state.arrived -= 1;
                return Err(NetError::BarrierTimeout);
            }
            let (next, _) = self.released.wait_timeout(state, deadline - now).unwrap();
            state = next;
        }
        Ok(())
    }
}
