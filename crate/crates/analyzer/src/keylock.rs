//! Key-lock grid worlds.
//!
//! An `n x n` grid, four deterministic moves with walls that clamp, a key
//! picked up automatically when its cell is entered, and a lock that opens
//! (reward 1, episode ends) when entered while holding the key. Every other
//! transition pays 0. States carry the attributes `x`, `y` and `has_key`.

use crate::error::{AnalyzerError, Result};
use crate::mdp::{MdpParts, TabularMdp};
use crate::scalar::Scalar;

/// Moves in action-index order; `y` grows southwards.
pub const MOVES: [(&str, i64, i64); 4] = [("N", 0, -1), ("E", 1, 0), ("S", 0, 1), ("W", -1, 0)];

pub type Cell = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyLockLayout {
    pub size: usize,
    pub key: Cell,
    pub lock: Cell,
    pub start: Cell,
}

impl KeyLockLayout {
    /// 3x3, key in the far corner, lock on the start cell.
    pub fn layout_a() -> Self {
        Self { size: 3, key: (2, 2), lock: (0, 0), start: (0, 0) }
    }

    /// 3x3, key at (0, 2), lock at (2, 2), start at (0, 0).
    pub fn layout_b() -> Self {
        Self { size: 3, key: (0, 2), lock: (2, 2), start: (0, 0) }
    }

    fn check(&self) -> Result<()> {
        let inside = |(x, y): Cell| x < self.size && y < self.size;
        if self.size == 0 {
            return Err(AnalyzerError::InvalidMdp("grid size must be positive".into()));
        }
        if !inside(self.key) || !inside(self.lock) || !inside(self.start) {
            return Err(AnalyzerError::InvalidMdp("key, lock and start must lie on the grid".into()));
        }
        if self.key == self.lock {
            return Err(AnalyzerError::InvalidMdp("key and lock must be different cells".into()));
        }
        Ok(())
    }

    fn state_index(&self, (x, y): Cell, has_key: bool) -> usize {
        (usize::from(has_key) * self.size + y) * self.size + x
    }

    /// Length of the shortest successful episode (number of moves).
    pub fn shortest_solution(&self) -> usize {
        let dist = |(ax, ay): Cell, (bx, by): Cell| ax.abs_diff(bx) + ay.abs_diff(by);
        if self.start == self.key {
            dist(self.key, self.lock)
        } else {
            dist(self.start, self.key) + dist(self.key, self.lock)
        }
    }

    pub fn build<T: Scalar>(&self, gamma: f64, horizon: usize) -> Result<TabularMdp<T>> {
        self.check()?;
        let n = self.size;
        let n_states = 2 * n * n;
        let mut states = vec![String::new(); n_states];
        let mut attribute_values = vec![Vec::new(); n_states];
        let mut terminal = vec![false; n_states];
        let mut transitions = vec![Vec::new(); n_states * MOVES.len()];
        let mut rewards = vec![T::zero(); n_states * MOVES.len()];

        for has_key in [false, true] {
            for y in 0..n {
                for x in 0..n {
                    let s = self.state_index((x, y), has_key);
                    states[s] = format!("x{x}y{y}k{}", u8::from(has_key));
                    attribute_values[s] = vec![x as i64, y as i64, i64::from(has_key)];
                    let done = has_key && (x, y) == self.lock;
                    terminal[s] = done;
                    for (a, &(_, dx, dy)) in MOVES.iter().enumerate() {
                        let idx = s * MOVES.len() + a;
                        if done {
                            transitions[idx] = vec![(s, T::one())];
                            continue;
                        }
                        let clamp = |v: usize, d: i64| (v as i64 + d).clamp(0, n as i64 - 1) as usize;
                        let cell = (clamp(x, dx), clamp(y, dy));
                        let holding = has_key || cell == self.key;
                        transitions[idx] = vec![(self.state_index(cell, holding), T::one())];
                        if holding && cell == self.lock {
                            rewards[idx] = T::one();
                        }
                    }
                }
            }
        }

        let mut start = vec![T::zero(); n_states];
        start[self.state_index(self.start, self.start == self.key)] = T::one();

        TabularMdp::new(MdpParts {
            states,
            actions: MOVES.iter().map(|(name, _, _)| name.to_string()).collect(),
            attributes: vec!["x".into(), "y".into(), "has_key".into()],
            attribute_values,
            transitions,
            rewards,
            start,
            terminal,
            gamma: T::lit(gamma),
            horizon,
        })
    }
}
