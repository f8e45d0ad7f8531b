use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-negative, strictly increasing sample times. `main` marks the times that
/// carry results; the others are companions `t +- eps` used for time differencing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    times: Vec<f64>,
    main: Vec<usize>,
}

impl Schedule {
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidInput("schedule times must be finite and >= 0".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("schedule times must increase strictly".into()));
        }
        let main = (0..times.len()).collect();
        Ok(Schedule { times, main })
    }

    /// `0, t0/4, t0/2, 3 t0/4` then `t0 2^(m/q)` up to `t_end` (appended if missed).
    ///
    /// Octave points `t0 2^k` are exact in floating point.
    pub fn geometric(t0: f64, t_end: f64, per_octave: usize) -> Result<Self> {
        if !(t0 > 0.0 && t_end >= t0 && per_octave >= 1) {
            return Err(Error::InvalidInput(format!(
                "geometric schedule needs 0 < t0 <= T (got t0 = {t0}, T = {t_end})"
            )));
        }
        let mut times: Vec<f64> = (0..4).map(|i| t0 * i as f64 / 4.0).collect();
        let q = per_octave as i32;
        let mut m = 0i32;
        loop {
            let t = t0 * 2f64.powi(m / q) * 2f64.powf((m % q) as f64 / q as f64);
            if t > t_end * (1.0 + 1e-12) {
                break;
            }
            times.push(t);
            m += 1;
        }
        if (times.last().unwrap() - t_end).abs() > 1e-9 * t_end {
            times.push(t_end);
        }
        Self::from_times(times)
    }

    /// Add `t +- rel * max(t, 1)` around every positive main time.
    pub fn with_companions(&self, rel: f64) -> Result<Self> {
        if !(rel > 0.0 && rel < 1e-2) {
            return Err(Error::InvalidInput(format!("companion offset {rel} outside (0, 1e-2)")));
        }
        let mut times = Vec::new();
        let mut main = Vec::new();
        for &i in &self.main {
            let t = self.times[i];
            if t > 0.0 {
                let e = rel * t.max(1.0);
                times.push(t - e);
                main.push(times.len());
                times.push(t);
                times.push(t + e);
            } else {
                main.push(times.len());
                times.push(t);
            }
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("companion offsets overlap neighbouring times".into()));
        }
        Ok(Schedule { times, main })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn main_indices(&self) -> &[usize] {
        &self.main
    }

    pub fn main_times(&self) -> Vec<f64> {
        self.main.iter().map(|&i| self.times[i]).collect()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of an exact schedule time (tolerant to 1e-12 relative).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = self.times.partition_point(|s| *s < t * (1.0 - 1e-12) - 1e-300);
        (i < self.times.len() && (self.times[i] - t).abs() <= 1e-12 * t.abs().max(1.0)).then_some(i)
    }

    /// Main index with companions on both sides.
    pub fn has_companions(&self, main_pos: usize) -> bool {
        let i = self.main[main_pos];
        i > 0 && i + 1 < self.times.len() && !self.main.contains(&(i - 1)) && !self.main.contains(&(i + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_hits_octaves_exactly() {
        let s = Schedule::geometric(25.0 / 16.0, 200.0, 4).unwrap();
        for t in [25.0, 50.0, 100.0, 200.0] {
            assert!(s.times().contains(&t), "{t}");
        }
        assert_eq!(s.start(), 0.0);
        assert_eq!(s.end(), 200.0);
        let c = s.with_companions(1e-4).unwrap();
        assert_eq!(c.main_times(), s.main_times());
        assert!(c.index_of(100.0).is_some());
        let k = c.main_times().iter().position(|t| *t == 100.0).unwrap();
        assert!(c.has_companions(k));
        assert!(!c.has_companions(0));
    }
}
