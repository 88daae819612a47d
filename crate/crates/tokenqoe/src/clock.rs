use std::thread;
use std::time::{Duration, Instant};

use tokenqoe_core::shaper::{Clock, ClockKind, Timer};

/// Real-time clock backed by [`Instant`] and thread sleeps.
#[derive(Debug, Clone, Copy, Default)]
pub struct WallClock;

#[derive(Debug, Clone, Copy)]
pub struct WallTimer {
    start: Instant,
}

impl Clock for WallClock {
    type Timer = WallTimer;

    fn kind(&self) -> ClockKind {
        ClockKind::Wall
    }

    fn start(&self) -> WallTimer {
        WallTimer { start: Instant::now() }
    }
}

impl Timer for WallTimer {
    fn wait_until(&mut self, offset_s: f64) -> f64 {
        let target = self.start + Duration::from_secs_f64(offset_s.max(0.0));
        let now = Instant::now();
        if target > now {
            thread::sleep(target - now);
        }
        self.start.elapsed().as_secs_f64()
    }
}

/// 95th percentile by nearest rank; 0 for an empty slice.
pub fn p95(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    tokenqoe_core::stats::nearest_rank(&v, 0.95)
}
