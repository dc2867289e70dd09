use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use woz_core::SimTime;

/// Millisecond timestamp of 2020-01-01T00:00:00Z, where virtual clocks start.
pub const VIRTUAL_EPOCH_MS: u64 = 1_577_836_800_000;

#[derive(Debug)]
pub enum Clock {
    Wall,
    Virtual(AtomicU64),
}

impl Clock {
    pub fn virtual_at(ms: u64) -> Clock {
        Clock::Virtual(AtomicU64::new(ms))
    }

    pub fn is_virtual(&self) -> bool {
        matches!(self, Clock::Virtual(_))
    }

    pub fn now(&self) -> SimTime {
        match self {
            Clock::Wall => {
                let ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
                SimTime(ms)
            }
            Clock::Virtual(ms) => SimTime(ms.load(Ordering::SeqCst)),
        }
    }

    /// Moves a virtual clock forward. Never goes backwards.
    pub fn set(&self, to: SimTime) {
        if let Clock::Virtual(ms) = self {
            ms.fetch_max(to.millis(), Ordering::SeqCst);
        }
    }
}
