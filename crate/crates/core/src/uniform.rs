//! Injected randomness for the randomized procedures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Whether one uniform is shared by every hypothesis or drawn afresh per hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawMode {
    Shared,
    #[default]
    Independent,
}

/// Position of a [`UniformSource`], enough to rebuild it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngCursor {
    pub seed: u64,
    pub mode: DrawMode,
    pub draws: u64,
}

/// Seeded stream of uniforms on `(0, 1]`.
#[derive(Debug, Clone)]
pub struct UniformSource {
    seed: u64,
    mode: DrawMode,
    rng: ChaCha8Rng,
    shared: Option<f64>,
    draws: u64,
}

impl UniformSource {
    pub fn new(seed: u64, mode: DrawMode) -> Self {
        UniformSource {
            seed,
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            shared: None,
            draws: 0,
        }
    }

    pub fn from_cursor(cursor: RngCursor) -> Self {
        let mut src = UniformSource::new(cursor.seed, cursor.mode);
        for _ in 0..cursor.draws {
            src.next_uniform();
        }
        src
    }

    pub fn cursor(&self) -> RngCursor {
        RngCursor {
            seed: self.seed,
            mode: self.mode,
            draws: self.draws,
        }
    }

    pub fn next_uniform(&mut self) -> f64 {
        self.draws += 1;
        match self.mode {
            DrawMode::Independent => open_closed_unit(&mut self.rng),
            DrawMode::Shared => *self.shared.get_or_insert_with(|| open_closed_unit(&mut self.rng)),
        }
    }
}

/// A draw from `(0, 1]`.
pub fn open_closed_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_mode_repeats() {
        let mut s = UniformSource::new(1, DrawMode::Shared);
        let a = s.next_uniform();
        assert!(a > 0.0 && a <= 1.0);
        assert_eq!(s.next_uniform(), a);
        let mut i = UniformSource::new(1, DrawMode::Independent);
        let b = i.next_uniform();
        assert_ne!(i.next_uniform(), b);
    }

    #[test]
    fn cursor_restores_stream() {
        let mut s = UniformSource::new(42, DrawMode::Independent);
        for _ in 0..17 {
            s.next_uniform();
        }
        let mut r = UniformSource::from_cursor(s.cursor());
        for _ in 0..10 {
            assert_eq!(s.next_uniform(), r.next_uniform());
        }
    }
}
