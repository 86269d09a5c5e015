//! Phase-space states shared by the simulators and couplings.

use serde::{Deserialize, Serialize};

/// Velocity of the particle, always ±1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Velocity {
    #[serde(rename = "-1")]
    Minus,
    #[serde(rename = "+1")]
    Plus,
}

impl Velocity {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Velocity::Minus => -1.0,
            Velocity::Plus => 1.0,
        }
    }

    #[inline]
    pub fn flip(self) -> Self {
        match self {
            Velocity::Minus => Velocity::Plus,
            Velocity::Plus => Velocity::Minus,
        }
    }

    /// `Plus` for non-negative input, `Minus` otherwise.
    #[inline]
    pub fn from_sign(s: f64) -> Self {
        if s >= 0.0 {
            Velocity::Plus
        } else {
            Velocity::Minus
        }
    }

    #[inline]
    pub fn times(self, other: Velocity) -> Velocity {
        if self == other {
            Velocity::Plus
        } else {
            Velocity::Minus
        }
    }
}

/// `sgn(y) = 1_{y >= 0} - 1_{y < 0}`; zero counts as positive.
#[inline]
pub fn sgn(y: f64) -> f64 {
    if y >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Which process a state or trajectory belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// `(X, V)` on `[0, ∞) × {±1}`, velocity flipped to `+1` at the origin.
    Reflected,
    /// `(Y, W)` on `ℝ × {±1}`.
    Unreflected,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub position: f64,
    pub velocity: Velocity,
    #[serde(default)]
    pub clock: f64,
}

impl State {
    pub fn new(position: f64, velocity: Velocity) -> Self {
        State {
            position,
            velocity,
            clock: 0.0,
        }
    }

    pub fn at(position: f64, velocity: Velocity, clock: f64) -> Self {
        State {
            position,
            velocity,
            clock,
        }
    }

    /// Maps an unreflected state to the reflected frame, `(|y|, w·sgn(y))`.
    pub fn folded(&self) -> State {
        State {
            position: self.position.abs(),
            velocity: self.velocity.times(Velocity::from_sign(sgn(self.position))),
            clock: self.clock,
        }
    }

    /// Same position and velocity, ignoring the clock.
    pub fn same_phase(&self, other: &State) -> bool {
        self.position == other.position && self.velocity == other.velocity
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding_uses_positive_sign_at_zero() {
        let s = State::new(0.0, Velocity::Minus).folded();
        assert_eq!(s.position, 0.0);
        assert_eq!(s.velocity, Velocity::Minus);
        let s = State::new(-2.0, Velocity::Minus).folded();
        assert_eq!((s.position, s.velocity), (2.0, Velocity::Plus));
        let s = State::new(-2.0, Velocity::Plus).folded();
        assert_eq!((s.position, s.velocity), (2.0, Velocity::Minus));
    }
}
