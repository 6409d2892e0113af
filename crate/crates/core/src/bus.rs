//! In-process publish/subscribe bus with a single dispatcher.
//!
//! Events and timers share one priority queue ordered by `(ts, seq)`, so a
//! virtual clock (advanced explicitly) and a wall clock (advanced by
//! [`Bus::pump`]) drive exactly the same delivery path. Handlers run one at a
//! time and never re-enter the bus; anything they publish is queued and
//! delivered after the current event.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};
use std::fmt;
use std::sync::mpsc;
use std::time::Instant;

use thiserror::Error;

use crate::types::Timestamp;

pub type Topic = &'static str;

/// A delivered event. `(ts, seq)` is unique and totally orders a session.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<P> {
    pub topic: Topic,
    pub ts: Timestamp,
    pub seq: u64,
    pub payload: P,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BusError {
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),
    #[error("clock regression: event at {ts} after {last}")]
    ClockRegression { ts: Timestamp, last: Timestamp },
    #[error("operation requires the virtual clock")]
    WallClockMode,
    #[error("clock advance must be positive")]
    ZeroAdvance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    Virtual,
    Wall,
}

/// Handle of a scheduled timer; cancel it with [`Context::cancel`] or
/// [`Bus::cancel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimerId(u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subscription(u64);

struct Pending<P> {
    ts: Timestamp,
    seq: u64,
    topic: Topic,
    payload: P,
    period: Option<u64>,
    timer: Option<TimerId>,
}

impl<P> PartialEq for Pending<P> {
    fn eq(&self, other: &Self) -> bool {
        self.ts == other.ts && self.seq == other.seq
    }
}

impl<P> Eq for Pending<P> {}

impl<P> PartialOrd for Pending<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Pending<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.ts, self.seq).cmp(&(other.ts, other.seq))
    }
}

struct Scheduler<P> {
    now: Timestamp,
    next_seq: u64,
    queue: BinaryHeap<Reverse<Pending<P>>>,
    cancelled: HashSet<TimerId>,
    topics: BTreeSet<Topic>,
}

impl<P> Scheduler<P> {
    fn resolve(&self, topic: &str) -> Result<Topic, BusError> {
        self.topics
            .get(topic)
            .copied()
            .ok_or_else(|| BusError::UnknownTopic(topic.to_owned()))
    }

    fn push(&mut self, ts: Timestamp, topic: Topic, payload: P, period: Option<u64>, is_timer: bool) -> u64 {
        self.next_seq += 1;
        let seq = self.next_seq;
        self.queue.push(Reverse(Pending {
            ts,
            seq,
            topic,
            payload,
            period,
            timer: is_timer.then_some(TimerId(seq)),
        }));
        seq
    }

    fn peek_live(&mut self) -> Option<Timestamp> {
        while let Some(Reverse(head)) = self.queue.peek() {
            match head.timer {
                Some(id) if self.cancelled.contains(&id) => {
                    self.queue.pop();
                    self.cancelled.remove(&id);
                }
                _ => return Some(head.ts),
            }
        }
        None
    }
}

/// Handler-side view of the bus: read the clock, publish, manage timers.
pub struct Context<'a, P> {
    sched: &'a mut Scheduler<P>,
}

impl<P> Context<'_, P> {
    pub fn now(&self) -> Timestamp {
        self.sched.now
    }

    /// Publishes at the current time. Causal by construction, so no
    /// regression check applies.
    pub fn publish(&mut self, topic: &str, payload: P) -> Result<u64, BusError> {
        let topic = self.sched.resolve(topic)?;
        let now = self.sched.now;
        Ok(self.sched.push(now, topic, payload, None, false))
    }

    /// Arms a one-shot timer. Deadlines in the past fire at the current time.
    pub fn schedule_at(&mut self, deadline: Timestamp, topic: &str, payload: P) -> Result<TimerId, BusError> {
        let topic = self.sched.resolve(topic)?;
        let ts = deadline.max(self.sched.now);
        Ok(TimerId(self.sched.push(ts, topic, payload, None, true)))
    }

    pub fn schedule_in(&mut self, delay_ms: u64, topic: &str, payload: P) -> Result<TimerId, BusError> {
        let deadline = self.sched.now + delay_ms;
        self.schedule_at(deadline, topic, payload)
    }

    pub fn cancel(&mut self, timer: TimerId) {
        self.sched.cancelled.insert(timer);
    }
}

type Handler<P> = Box<dyn FnMut(&Event<P>, &mut Context<'_, P>)>;
type Tap<P> = Box<dyn FnMut(&Event<P>)>;

/// Thread-safe entry point for producers outside the dispatcher (gateway
/// sockets, live backends). Items are stamped with the dispatcher's clock
/// when drained.
pub struct Ingress<P> {
    tx: mpsc::Sender<(String, P)>,
}

impl<P> Clone for Ingress<P> {
    fn clone(&self) -> Self {
        Self { tx: self.tx.clone() }
    }
}

impl<P> Ingress<P> {
    /// Returns false once the bus has been dropped.
    pub fn send(&self, topic: &str, payload: P) -> bool {
        self.tx.send((topic.to_owned(), payload)).is_ok()
    }
}

impl<P> fmt::Debug for Ingress<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Ingress")
    }
}

enum Clock {
    Virtual,
    Wall(Instant),
}

pub struct Bus<P> {
    clock: Clock,
    sched: Scheduler<P>,
    /// Highest timestamp passed to [`Bus::publish`].
    last_external: Timestamp,
    subscribers: BTreeMap<Topic, Vec<(Subscription, Handler<P>)>>,
    taps: Vec<(Subscription, Tap<P>)>,
    next_sub: u64,
    ingress_tx: mpsc::Sender<(String, P)>,
    ingress_rx: mpsc::Receiver<(String, P)>,
}

impl<P: Clone> Bus<P> {
    pub fn new(mode: ClockMode) -> Self {
        let (ingress_tx, ingress_rx) = mpsc::channel();
        Self {
            clock: match mode {
                ClockMode::Virtual => Clock::Virtual,
                ClockMode::Wall => Clock::Wall(Instant::now()),
            },
            sched: Scheduler {
                now: Timestamp::ZERO,
                next_seq: 0,
                queue: BinaryHeap::new(),
                cancelled: HashSet::new(),
                topics: BTreeSet::new(),
            },
            last_external: Timestamp::ZERO,
            subscribers: BTreeMap::new(),
            taps: Vec::new(),
            next_sub: 0,
            ingress_tx,
            ingress_rx,
        }
    }

    pub fn virtual_clock() -> Self {
        Self::new(ClockMode::Virtual)
    }

    pub fn wall_clock() -> Self {
        Self::new(ClockMode::Wall)
    }

    pub fn mode(&self) -> ClockMode {
        match self.clock {
            Clock::Virtual => ClockMode::Virtual,
            Clock::Wall(_) => ClockMode::Wall,
        }
    }

    pub fn now(&self) -> Timestamp {
        self.sched.now
    }

    pub fn register(&mut self, topic: Topic) {
        self.sched.topics.insert(topic);
    }

    pub fn register_all(&mut self, topics: impl IntoIterator<Item = Topic>) {
        for t in topics {
            self.register(t);
        }
    }

    pub fn is_registered(&self, topic: &str) -> bool {
        self.sched.topics.contains(topic)
    }

    pub fn subscribe<F>(&mut self, topic: &str, handler: F) -> Result<Subscription, BusError>
    where
        F: FnMut(&Event<P>, &mut Context<'_, P>) + 'static,
    {
        let topic = self.sched.resolve(topic)?;
        let sub = self.next_subscription();
        self.subscribers
            .entry(topic)
            .or_default()
            .push((sub, Box::new(handler)));
        Ok(sub)
    }

    /// Observes every delivered event, before topic handlers run.
    pub fn tap<F>(&mut self, observer: F) -> Subscription
    where
        F: FnMut(&Event<P>) + 'static,
    {
        let sub = self.next_subscription();
        self.taps.push((sub, Box::new(observer)));
        sub
    }

    pub fn unsubscribe(&mut self, sub: Subscription) -> bool {
        let before = self.taps.len();
        self.taps.retain(|(s, _)| *s != sub);
        if self.taps.len() != before {
            return true;
        }
        for handlers in self.subscribers.values_mut() {
            let before = handlers.len();
            handlers.retain(|(s, _)| *s != sub);
            if handlers.len() != before {
                return true;
            }
        }
        false
    }

    fn next_subscription(&mut self) -> Subscription {
        self.next_sub += 1;
        Subscription(self.next_sub)
    }

    /// Enqueues an event. In virtual mode `ts` must not precede the clock nor
    /// any earlier external publish; in wall mode it is clamped to now.
    pub fn publish(&mut self, topic: &str, payload: P, ts: Timestamp) -> Result<u64, BusError> {
        let topic = self.sched.resolve(topic)?;
        let ts = match self.clock {
            Clock::Virtual => {
                let floor = self.last_external.max(self.sched.now);
                if ts < floor {
                    return Err(BusError::ClockRegression { ts, last: floor });
                }
                self.last_external = ts;
                ts
            }
            Clock::Wall(_) => ts.max(self.sched.now),
        };
        Ok(self.sched.push(ts, topic, payload, None, false))
    }

    pub fn schedule_at(&mut self, deadline: Timestamp, topic: &str, payload: P) -> Result<TimerId, BusError> {
        self.context().schedule_at(deadline, topic, payload)
    }

    /// Arms a periodic timer whose first firing is at `first`.
    pub fn schedule_every(
        &mut self,
        first: Timestamp,
        period_ms: u64,
        topic: &str,
        payload: P,
    ) -> Result<TimerId, BusError> {
        assert!(period_ms > 0, "timer period must be positive");
        let topic = self.sched.resolve(topic)?;
        let ts = first.max(self.sched.now);
        Ok(TimerId(self.sched.push(ts, topic, payload, Some(period_ms), true)))
    }

    pub fn cancel(&mut self, timer: TimerId) {
        self.sched.cancelled.insert(timer);
    }

    pub fn ingress(&self) -> Ingress<P> {
        Ingress {
            tx: self.ingress_tx.clone(),
        }
    }

    /// Deadline of the next live event or timer, if any.
    pub fn next_deadline(&mut self) -> Option<Timestamp> {
        self.sched.peek_live()
    }

    /// Earliest pending item that is not a periodic timer. `None` means only
    /// periodic ticks remain, so the session has nothing left to settle.
    pub fn next_oneshot_deadline(&self) -> Option<Timestamp> {
        self.sched
            .queue
            .iter()
            .filter(|Reverse(p)| p.period.is_none())
            .filter(|Reverse(p)| p.timer.is_none_or(|id| !self.sched.cancelled.contains(&id)))
            .map(|Reverse(p)| p.ts)
            .min()
    }

    pub fn is_idle(&mut self) -> bool {
        self.next_deadline().is_none()
    }

    fn context(&mut self) -> Context<'_, P> {
        Context { sched: &mut self.sched }
    }

    /// Advances the virtual clock by `delta_ms`, delivering every event and
    /// timer due on the way. Returns the number of deliveries.
    pub fn advance_clock(&mut self, delta_ms: u64) -> Result<usize, BusError> {
        if matches!(self.clock, Clock::Wall(_)) {
            return Err(BusError::WallClockMode);
        }
        if delta_ms == 0 {
            return Err(BusError::ZeroAdvance);
        }
        let target = self.sched.now + delta_ms;
        Ok(self.deliver_until(target))
    }

    /// Advances the virtual clock to `target` (which may equal now).
    pub fn run_until(&mut self, target: Timestamp) -> Result<usize, BusError> {
        if matches!(self.clock, Clock::Wall(_)) {
            return Err(BusError::WallClockMode);
        }
        if target < self.sched.now {
            return Err(BusError::ClockRegression {
                ts: target,
                last: self.sched.now,
            });
        }
        Ok(self.deliver_until(target))
    }

    /// Delivers everything already due without moving the clock.
    pub fn flush(&mut self) -> usize {
        let now = self.sched.now;
        self.deliver_until(now)
    }

    /// Wall-clock step: reads the clock, then delivers everything due.
    pub fn pump(&mut self) -> usize {
        if let Clock::Wall(origin) = self.clock {
            let elapsed = origin.elapsed().as_millis() as u64;
            self.sched.now = self.sched.now.max(Timestamp(elapsed));
        }
        self.flush()
    }

    /// Virtual mode: run until no events or timers remain, or until `limit`
    /// is reached (periodic timers never drain on their own).
    pub fn drain(&mut self, limit: Timestamp) -> Result<usize, BusError> {
        self.run_until(limit.max(self.sched.now))
    }

    fn drain_ingress(&mut self) {
        while let Ok((topic, payload)) = self.ingress_rx.try_recv() {
            match self.sched.resolve(&topic) {
                Ok(topic) => {
                    let now = self.sched.now;
                    self.sched.push(now, topic, payload, None, false);
                }
                Err(err) => tracing::warn!(%err, "dropping ingress item"),
            }
        }
    }

    fn deliver_until(&mut self, target: Timestamp) -> usize {
        let mut delivered = 0;
        loop {
            self.drain_ingress();
            match self.sched.peek_live() {
                Some(ts) if ts <= target => {}
                _ => break,
            }
            let Reverse(pending) = self.sched.queue.pop().expect("peeked");
            self.sched.now = self.sched.now.max(pending.ts);
            if let (Some(period), Some(id)) = (pending.period, pending.timer) {
                // Re-arm periodic timers under the same id.
                let next = pending.ts + period;
                self.sched.next_seq += 1;
                let seq = self.sched.next_seq;
                self.sched.queue.push(Reverse(Pending {
                    ts: next,
                    seq,
                    topic: pending.topic,
                    payload: pending.payload.clone(),
                    period: Some(period),
                    timer: Some(id),
                }));
            }
            let event = Event {
                topic: pending.topic,
                ts: pending.ts,
                seq: pending.seq,
                payload: pending.payload,
            };
            self.dispatch(&event);
            delivered += 1;
        }
        self.sched.now = self.sched.now.max(target);
        delivered
    }

    fn dispatch(&mut self, event: &Event<P>) {
        for (_, tap) in &mut self.taps {
            tap(event);
        }
        if let Some(handlers) = self.subscribers.get_mut(event.topic) {
            let mut ctx = Context { sched: &mut self.sched };
            for (_, handler) in handlers.iter_mut() {
                handler(event, &mut ctx);
            }
        }
    }
}
