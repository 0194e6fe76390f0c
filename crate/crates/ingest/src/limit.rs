//! Request pacing: a token bucket per provider and exponential-backoff retry.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::warn;

use crate::error::Result;

pub const DEFAULT_REQUESTS_PER_MINUTE: u32 = 50;

#[derive(Debug)]
struct Bucket {
    tokens: f64,
    updated: Instant,
}

#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    per_second: f64,
    state: Mutex<Bucket>,
}

impl TokenBucket {
    /// Starts full, holding `per_minute` tokens.
    pub fn per_minute(per_minute: u32) -> Self {
        Self::new(per_minute.max(1) as f64, per_minute.max(1) as f64 / 60.0, Instant::now())
    }

    pub fn new(capacity: f64, per_second: f64, now: Instant) -> Self {
        TokenBucket { capacity, per_second, state: Mutex::new(Bucket { tokens: capacity, updated: now }) }
    }

    /// Takes a token if one is available at `now`; otherwise returns how long
    /// to wait for the next one.
    pub fn try_acquire_at(&self, now: Instant) -> std::result::Result<(), Duration> {
        let mut b = self.state.lock().expect("token bucket lock poisoned");
        let elapsed = now.saturating_duration_since(b.updated).as_secs_f64();
        b.tokens = (b.tokens + elapsed * self.per_second).min(self.capacity);
        b.updated = b.updated.max(now);
        if b.tokens >= 1.0 {
            b.tokens -= 1.0;
            Ok(())
        } else {
            Err(Duration::from_secs_f64((1.0 - b.tokens) / self.per_second))
        }
    }

    pub fn acquire(&self) {
        while let Err(wait) = self.try_acquire_at(Instant::now()) {
            std::thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 4, base_delay: Duration::from_millis(500), factor: 2.0 }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_attempts: u32) -> Self {
        RetryPolicy { max_attempts, base_delay: Duration::ZERO, factor: 2.0 }
    }

    /// Delay before retry number `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.mul_f64(self.factor.powi(attempt as i32 - 1))
    }

    /// Runs `op` until it succeeds, fails permanently, or attempts run out.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T>) -> Result<T> {
        let mut attempt = 1;
        loop {
            match op() {
                Err(e) if e.is_transient() && attempt < self.max_attempts => {
                    let wait = self.delay(attempt);
                    warn!("{e}; retrying in {wait:?}");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::IngestError;

    #[test]
    fn bucket_drains_and_refills() {
        let t0 = Instant::now();
        let b = TokenBucket::new(2.0, 1.0, t0);
        assert!(b.try_acquire_at(t0).is_ok());
        assert!(b.try_acquire_at(t0).is_ok());
        let wait = b.try_acquire_at(t0).unwrap_err();
        assert!((wait.as_secs_f64() - 1.0).abs() < 1e-9);
        assert!(b.try_acquire_at(t0 + Duration::from_millis(1000)).is_ok());
        assert!(b.try_acquire_at(t0 + Duration::from_secs(100)).is_ok());
        assert!(b.try_acquire_at(t0 + Duration::from_secs(100)).is_ok());
        assert!(b.try_acquire_at(t0 + Duration::from_secs(100)).is_err());
    }

    #[test]
    fn fifty_per_minute() {
        let t0 = Instant::now();
        let b = TokenBucket::new(50.0, 50.0 / 60.0, t0);
        for _ in 0..50 {
            b.try_acquire_at(t0).unwrap();
        }
        let wait = b.try_acquire_at(t0).unwrap_err();
        assert!((wait.as_secs_f64() - 1.2).abs() < 1e-9);
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(1), Duration::from_millis(500));
        assert_eq!(p.delay(3), Duration::from_millis(2000));
    }

    #[test]
    fn retries_only_transient() {
        let p = RetryPolicy::no_delay(3);
        let mut calls = 0;
        let r: Result<()> = p.run(|| {
            calls += 1;
            Err(IngestError::Http { provider: "x", status: 503 })
        });
        assert!(r.is_err());
        assert_eq!(calls, 3);

        let mut calls = 0;
        let r: Result<()> = p.run(|| {
            calls += 1;
            Err(IngestError::Auth { provider: "x", status: 401 })
        });
        assert!(matches!(r, Err(IngestError::Auth { .. })));
        assert_eq!(calls, 1);

        let mut calls = 0;
        let r = p.run(|| {
            calls += 1;
            if calls < 2 { Err(IngestError::Transport { provider: "x", message: "reset".into() }) } else { Ok(7) }
        });
        assert_eq!(r.unwrap(), 7);
    }
}
