use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::protocol::Packet;
use crate::topology::HierAddress;

use super::{SimError, SimTime};

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// `pkt` finished crossing the link `from -> node`.
    PacketArrival {
        node: HierAddress,
        from: HierAddress,
        pkt: Packet,
    },
    /// Lifetime bookkeeping for the tables held at `node`.
    TimerFire {
        node: HierAddress,
    },
    Detach {
        mobile: HierAddress,
    },
    Attach {
        mobile: HierAddress,
        agent: HierAddress,
    },
    TrafficTick {
        source: usize,
    },
    /// `periodic` ticks reschedule themselves; on-attach ticks do not.
    AdvertisementTick {
        agent: HierAddress,
        periodic: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl Event {
    /// Node the event is addressed to (the source's origin for traffic ticks).
    pub fn target(&self) -> Option<HierAddress> {
        match &self.kind {
            EventKind::PacketArrival { node, .. } => Some(*node),
            EventKind::TimerFire { node } => Some(*node),
            EventKind::Detach { mobile } | EventKind::Attach { mobile, .. } => Some(*mobile),
            EventKind::AdvertisementTick { agent, .. } => Some(*agent),
            EventKind::TrafficTick { .. } => None,
        }
    }
}

struct Entry(Event);

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        (self.0.time, self.0.seq) == (other.0.time, other.0.seq)
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.0.time, self.0.seq).cmp(&(other.0.time, other.0.seq))
    }
}

/// Min-queue on `(time, insertion seq)`: equal-time events run in the
/// order they were scheduled.
#[derive(Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Entry>>,
    next_seq: u64,
    now: SimTime,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn schedule(&mut self, time: SimTime, kind: EventKind) -> Result<u64, SimError> {
        if time < self.now {
            return Err(SimError::ScheduledInPast {
                now: self.now,
                requested: time,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry(Event { time, seq, kind })));
        Ok(seq)
    }

    /// Pops the next event if it is due at or before `horizon`, advancing
    /// the clock to its time.
    pub fn pop_until(&mut self, horizon: SimTime) -> Option<Event> {
        match self.heap.peek() {
            Some(Reverse(Entry(ev))) if ev.time <= horizon => {}
            _ => return None,
        }
        let Reverse(Entry(ev)) = self.heap.pop().expect("peeked");
        debug_assert!(ev.time >= self.now);
        self.now = ev.time;
        Some(ev)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn pending(&self) -> impl Iterator<Item = &Event> {
        self.heap.iter().map(|Reverse(Entry(e))| e)
    }
}
