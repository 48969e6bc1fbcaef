//! Minimal discrete-event core: a clock in seconds and an event queue ordered
//! by `(time, insertion sequence)`. The insertion-order tie break makes every
//! simulated day a pure function of its inputs.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Arrival,
    RegistrationDone,
    ConsultStart,
    ConsultEnd,
    PrepStart,
    PrepDone,
    BatchDispatch,
    DeliveryArrive,
    CourierReturn,
    TreatmentStart,
    TreatmentEnd,
    /// A nurse finished the setup of a patient and may pick up the next one.
    SetupComplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    /// Seconds from day open.
    pub time: u64,
    /// Monotone insertion counter, unique per day.
    pub seq: u64,
    pub kind: EventKind,
    /// Patient, courier or resource identifier, depending on `kind`.
    pub subject: u32,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    pending: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
    clock: u64,
    scheduled: u64,
    popped: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Current clock: the time of the last popped event.
    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn scheduled_count(&self) -> u64 {
        self.scheduled
    }

    pub fn popped_count(&self) -> u64 {
        self.popped
    }

    /// Schedules an event; scheduling in the past signals a model bug.
    pub fn schedule(&mut self, time: u64, kind: EventKind, subject: u32) -> Result<(), Error> {
        if time < self.clock {
            return Err(Error::Internal(format!(
                "event {kind:?} scheduled at {time} before clock {}",
                self.clock
            )));
        }
        let e = Event {
            time,
            seq: self.next_seq,
            kind,
            subject,
        };
        self.next_seq += 1;
        self.scheduled += 1;
        self.pending.push(Reverse(e));
        Ok(())
    }

    /// Removes and returns the minimum-key event; `None` signals end of day.
    pub fn pop_next(&mut self) -> Option<Event> {
        let Reverse(e) = self.pending.pop()?;
        self.clock = e.time;
        self.popped += 1;
        Some(e)
    }
}
