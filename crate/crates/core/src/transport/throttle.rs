//! Slow-worker emulation: after each kernel call, wait `(factor - 1)` times
//! the kernel's measured duration.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("throttle factor must be finite and >= 1, got {0}")]
pub struct ThrottleError(pub f64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Throttle {
    factor: f64,
}

impl Default for Throttle {
    fn default() -> Self {
        Throttle { factor: 1.0 }
    }
}

impl Throttle {
    pub fn new(factor: f64) -> Result<Self, ThrottleError> {
        if !(factor.is_finite() && factor >= 1.0) {
            return Err(ThrottleError(factor));
        }
        Ok(Throttle { factor })
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    /// Delay owed for a kernel that took `elapsed`.
    pub fn delay_for(&self, elapsed: Duration) -> Duration {
        if self.factor <= 1.0 {
            Duration::ZERO
        } else {
            elapsed.mul_f64(self.factor - 1.0)
        }
    }

    /// Runs `kernel`, then sleeps the owed delay. The kernel's result is untouched.
    pub fn run<R>(&self, kernel: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = kernel();
        let delay = self.delay_for(start.elapsed());
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
        out
    }
}
