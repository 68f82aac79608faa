//! Deterministic discrete-event queue.
//!
//! Events execute in strict `(fire_at, seq)` order, where `seq` is the
//! insertion sequence number. Equal timestamps therefore resolve in
//! first-scheduled-first-fired order, which keeps runs reproducible without
//! any floating-point tie-break tricks.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use thiserror::Error;

use crate::time::SimTime;

/// Token returned by [`EventQueue::schedule`]; permits cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("cannot schedule at {at} in the past (clock is at {now})")]
    InPast { at: SimTime, now: SimTime },
}

#[derive(Debug)]
struct Entry<E> {
    fire_at: SimTime,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}
impl<E> Eq for Entry<E> {}
impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.fire_at, self.seq).cmp(&(other.fire_at, other.seq))
    }
}

/// Time-ordered event queue with a monotone clock.
#[derive(Debug)]
pub struct EventQueue<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Reverse<Entry<E>>>,
    live: HashSet<u64>,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            live: HashSet::new(),
        }
    }

    /// Current simulated clock. Never decreases.
    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of scheduled events that have neither fired nor been cancelled.
    pub fn pending(&self) -> usize {
        self.live.len()
    }

    /// Schedules `payload` to fire at `at`. Scheduling in the past is an error.
    pub fn schedule(&mut self, at: SimTime, payload: E) -> Result<EventHandle, ScheduleError> {
        if at < self.now {
            return Err(ScheduleError::InPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.live.insert(seq);
        self.heap.push(Reverse(Entry { fire_at: at, seq, payload }));
        Ok(EventHandle(seq))
    }

    /// Schedules `payload` to fire `delay_us` microseconds from now.
    pub fn schedule_in(&mut self, delay_us: u64, payload: E) -> EventHandle {
        self.schedule(self.now + delay_us, payload)
            .expect("now + delay is never in the past")
    }

    /// Returns true iff the event had not fired and is now guaranteed never
    /// to fire. Cancelling twice, or after the event ran, returns false.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.live.remove(&handle.0)
    }

    /// Pops the next live event if it fires at or before `t_end`, advancing
    /// the clock to its fire time. Returns `None` once the queue holds no
    /// event due by `t_end`; the clock is then left where the last event ran
    /// (use [`advance_to`](Self::advance_to) to finish the window).
    pub fn pop_due(&mut self, t_end: SimTime) -> Option<(SimTime, E)> {
        while let Some(Reverse(head)) = self.heap.peek() {
            if head.fire_at > t_end {
                return None;
            }
            let Reverse(entry) = self.heap.pop().expect("peeked entry exists");
            if !self.live.remove(&entry.seq) {
                continue; // cancelled
            }
            debug_assert!(entry.fire_at >= self.now, "clock would move backwards");
            self.now = entry.fire_at;
            return Some((entry.fire_at, entry.payload));
        }
        None
    }

    /// Moves the clock forward to `t` without executing anything.
    pub fn advance_to(&mut self, t: SimTime) {
        assert!(t >= self.now, "clock never decreases");
        self.now = t;
    }

    /// Runs every event with `fire_at <= t_end` in `(fire_at, seq)` order,
    /// handing each to `handler` together with the queue so the handler can
    /// schedule follow-ups. Leaves the clock at exactly `t_end` and returns
    /// the number of events executed.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Self, SimTime, E),
    {
        assert!(t_end >= self.now, "t_end must not precede the clock");
        let mut executed = 0;
        while let Some((at, payload)) = self.pop_due(t_end) {
            handler(self, at, payload);
            executed += 1;
        }
        self.advance_to(t_end);
        executed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(us: u64) -> SimTime {
        SimTime::from_micros(us)
    }

    #[test]
    fn fires_exactly_at_scheduled_time() {
        let mut q = EventQueue::new();
        q.schedule(t(5), "a").unwrap();
        let mut fired = Vec::new();
        q.run_until(t(10), |q, at, ev| fired.push((at, ev, q.now())));
        assert_eq!(fired, vec![(t(5), "a", t(5))]);
        assert_eq!(q.now(), t(10));
    }

    #[test]
    fn equal_times_fire_in_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(t(5), "A").unwrap();
        q.schedule(t(5), "B").unwrap();
        let mut order = Vec::new();
        q.run_until(t(5), |_, _, ev| order.push(ev));
        assert_eq!(order, vec!["A", "B"]);
    }

    #[test]
    fn scheduling_in_the_past_is_rejected() {
        let mut q = EventQueue::new();
        q.schedule(t(2), ()).unwrap();
        q.run_until(t(2), |_, _, _| {});
        let err = q.schedule(t(1), ()).unwrap_err();
        assert_eq!(err, ScheduleError::InPast { at: t(1), now: t(2) });
    }

    #[test]
    fn cancel_semantics() {
        let mut q = EventQueue::new();
        let h = q.schedule(t(5), ()).unwrap();
        assert!(q.cancel(h));
        assert!(!q.cancel(h), "second cancel returns false");
        let ran = q.run_until(t(10), |_, _, _| {});
        assert_eq!(ran, 0, "cancelled action never runs");

        let h2 = q.schedule(t(12), ()).unwrap();
        q.run_until(t(12), |_, _, _| {});
        assert!(!q.cancel(h2), "cancelling a fired event returns false");
    }

    #[test]
    fn empty_queue_still_advances_clock() {
        let mut q: EventQueue<()> = EventQueue::new();
        let ran = q.run_until(t(10), |_, _, _| {});
        assert_eq!(ran, 0);
        assert_eq!(q.now(), t(10));
    }

    #[test]
    fn events_beyond_window_stay_pending() {
        let mut q = EventQueue::new();
        for us in [3, 7, 12] {
            q.schedule(t(us), us).unwrap();
        }
        let ran = q.run_until(t(10), |_, _, _| {});
        assert_eq!(ran, 2);
        assert_eq!(q.pending(), 1);
        let mut last = Vec::new();
        q.run_until(t(20), |_, _, ev| last.push(ev));
        assert_eq!(last, vec![12]);
    }

    #[test]
    fn handler_may_schedule_earlier_but_future_events() {
        let mut q = EventQueue::new();
        q.schedule(t(4), "first").unwrap();
        let mut order = Vec::new();
        q.run_until(t(10), |q, at, ev| {
            if ev == "first" {
                // earlier than other pending work, but still in the future
                q.schedule(at + 1, "inserted").unwrap();
                q.schedule(at + 4, "later").unwrap();
            }
            order.push((q.now(), ev));
        });
        assert_eq!(
            order,
            vec![(t(4), "first"), (t(5), "inserted"), (t(8), "later")]
        );
    }

    // Property check: random schedule/cancel interleavings always execute in
    // (fire_at, seq) order and the clock never observes a decrease.
    #[test]
    fn random_workloads_fire_in_order() {
        use crate::rng::RngStream;
        for seed in 0..20 {
            let mut rng = RngStream::new(seed, "event-test");
            let mut q = EventQueue::new();
            let mut handles = Vec::new();
            for _ in 0..300 {
                let at = rng.below(10_000);
                if let Ok(h) = q.schedule(t(at), at) {
                    handles.push(h);
                }
            }
            for h in handles.iter().step_by(3) {
                q.cancel(*h);
            }
            let mut log: Vec<SimTime> = Vec::new();
            q.run_until(t(10_000), |q, at, _| {
                if let Some(prev) = log.last() {
                    assert!(at >= *prev, "out-of-order execution");
                }
                assert_eq!(q.now(), at);
                log.push(at);
            });
            assert_eq!(q.pending(), 0);
        }
    }
}
