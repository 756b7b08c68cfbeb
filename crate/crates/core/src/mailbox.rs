use std::sync::Mutex;

/// Single-slot, latest-wins hand-off between a producer thread and the control loop.
///
/// Each value carries the sequence number of the request that produced it. A
/// value older than the newest one already posted is dropped.
#[derive(Debug, Default)]
pub struct Mailbox<T> {
    slot: Mutex<Slot<T>>,
}

#[derive(Debug)]
struct Slot<T> {
    value: Option<T>,
    newest: Option<u64>,
}

impl<T> Default for Slot<T> {
    fn default() -> Self {
        Self { value: None, newest: None }
    }
}

impl<T> Mailbox<T> {
    pub fn new() -> Self {
        Self { slot: Mutex::new(Slot::default()) }
    }

    /// Returns whether the value was accepted.
    pub fn post(&self, seq: u64, value: T) -> bool {
        let mut slot = self.slot.lock().unwrap_or_else(|e| e.into_inner());
        if slot.newest.is_some_and(|n| seq < n) {
            return false;
        }
        slot.newest = Some(seq);
        slot.value = Some(value);
        true
    }

    pub fn take(&self) -> Option<T> {
        self.slot.lock().unwrap_or_else(|e| e.into_inner()).value.take()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latest_wins_and_stale_dropped() {
        let m = Mailbox::new();
        assert!(m.post(1, "a"));
        assert!(m.post(3, "c"));
        assert!(!m.post(2, "b"));
        assert_eq!(m.take(), Some("c"));
        assert_eq!(m.take(), None);
        assert!(!m.post(2, "b"));
        assert!(m.post(3, "c2"));
    }
}
