use std::sync::Mutex;

use chrono::{Duration, Utc};

use crate::time::{self, Timestamp};

/// Source of "now" for the service.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        time::truncate(Utc::now())
    }
}

/// Manually driven clock for simulations and tests. Never moves backwards.
#[derive(Debug)]
pub struct VirtualClock {
    now: Mutex<Timestamp>,
}

impl VirtualClock {
    pub fn new(start: Timestamp) -> Self {
        VirtualClock {
            now: Mutex::new(time::truncate(start)),
        }
    }

    /// Moves to `t`; earlier instants are ignored.
    pub fn set(&self, t: Timestamp) {
        let mut now = self.now.lock().expect("clock lock");
        if t > *now {
            *now = time::truncate(t);
        }
    }

    pub fn advance(&self, by: Duration) {
        let mut now = self.now.lock().expect("clock lock");
        *now = time::truncate(*now + by);
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Timestamp {
        *self.now.lock().expect("clock lock")
    }
}
