use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

/// Monotonic run clock. Timestamps are milliseconds since the run started,
/// kept to whole microseconds.
#[derive(Debug, Clone, Copy)]
pub struct RunClock {
    origin: Instant,
    wall_origin_ms: u128,
}

impl RunClock {
    pub const RESOLUTION_US: u32 = 1;

    pub fn start() -> Self {
        RunClock {
            origin: Instant::now(),
            wall_origin_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
        }
    }

    pub fn ms_at(&self, at: Instant) -> f64 {
        duration_ms(at.saturating_duration_since(self.origin))
    }

    pub fn now_ms(&self) -> f64 {
        self.ms_at(Instant::now())
    }

    /// Wall-clock time of the origin, ms since the Unix epoch.
    pub fn wall_origin_ms(&self) -> u128 {
        self.wall_origin_ms
    }
}

/// Duration in milliseconds, truncated to whole microseconds.
pub fn duration_ms(d: Duration) -> f64 {
    d.as_micros() as f64 / 1000.0
}
