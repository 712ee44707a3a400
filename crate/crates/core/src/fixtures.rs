//! Shared test systems.

use std::sync::Arc;

use crate::sft::TransitionSystem;

pub(crate) fn golden_mean() -> Arc<TransitionSystem> {
    TransitionSystem::new(&[vec![1, 1], vec![1, 0]]).unwrap()
}

pub(crate) fn full_shift(l: usize) -> Arc<TransitionSystem> {
    TransitionSystem::new(&vec![vec![1; l]; l]).unwrap()
}

/// Banded 4-symbol system: nearest-neighbour moves on a path with
/// self-loops. Symmetric, primitive, 10 allowed transitions.
pub(crate) fn banded4() -> Arc<TransitionSystem> {
    TransitionSystem::new(&[
        vec![1, 1, 0, 0],
        vec![1, 1, 1, 0],
        vec![0, 1, 1, 1],
        vec![0, 0, 1, 1],
    ])
    .unwrap()
}
