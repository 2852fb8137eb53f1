//! Forced-sampling schedules.
//!
//! With a known horizon `T`, frames `round(n * T^mu)` for `n = 1, 2, ...`
//! (up to `T`) are forced to try an offloading partition. With an unknown
//! horizon the frame stream is split into phases of `floor(2^i * T0)`
//! frames and each phase runs its own known-horizon schedule on the
//! phase-local frame index.

/// The set `F` of forced frames for one horizon.
///
/// The spacing `T^mu` is at least 1, so `n -> round(n * spacing)` is
/// strictly increasing and membership can be answered without storing the
/// set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcedSchedule {
    horizon: u64,
    spacing: f64,
}

pub fn forced_schedule(horizon: u64, mu: f64) -> ForcedSchedule {
    assert!(horizon >= 1, "horizon must be at least one frame");
    assert!((0.0..1.0).contains(&mu), "mu must lie in [0, 1), got {mu}");
    ForcedSchedule {
        horizon,
        spacing: (horizon as f64).powf(mu),
    }
}

impl ForcedSchedule {
    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Nominal distance between forced frames, `T^mu`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    fn nth(&self, n: u64) -> u64 {
        (n as f64 * self.spacing).round() as u64
    }

    pub fn contains(&self, t: u64) -> bool {
        if t == 0 || t > self.horizon {
            return false;
        }
        let guess = (t as f64 / self.spacing).round() as u64;
        (guess.saturating_sub(1)..=guess + 1).any(|n| n >= 1 && self.nth(n) == t)
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (1..).map(|n| self.nth(n)).take_while(|&t| t <= self.horizon)
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Position of a frame inside the doubling-trick phase structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhasePosition {
    /// Phase index, starting at 1.
    pub phase: u32,
    /// 1-based frame index within the phase.
    pub local: u64,
    /// Length of the phase, `floor(2^phase * t0)`.
    pub length: u64,
}

pub fn phase_position(t: u64, t0: u64) -> PhasePosition {
    assert!(t >= 1 && t0 >= 1);
    let mut start = 0u64;
    let mut phase = 1u32;
    loop {
        let length = t0 << phase;
        if t <= start + length {
            return PhasePosition {
                phase,
                local: t - start,
                length,
            };
        }
        start += length;
        phase += 1;
    }
}
