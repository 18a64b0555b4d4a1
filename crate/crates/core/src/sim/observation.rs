//! Local and global observation vectors.
//!
//! ```text
//! thrower  [ q_throw(4) | target(2) | f_t(8) ]                         14
//! catcher  [ q_catch(4) | target(2) | f_t, f_t-1, .., f_t-5 (48) ]      54
//! global   [ thrower(14) | catcher(54) | qd_throw(4) | qd_catch(4)
//!            | p_obj(2) | v_obj(2) ]                                   80
//! ```
//!
//! Joint readings carry the episode's sensor noise and bias; object state in
//! the global vector is exact.

use std::ops::Range;

use crate::sim::world::{WorldState, CATCHER, THROWER};

pub const FEATURE_DIM: usize = 8;
pub const HISTORY_LEN: usize = 6;
pub const THROW_OBS_DIM: usize = 4 + 2 + FEATURE_DIM;
pub const CATCH_OBS_DIM: usize = 4 + 2 + FEATURE_DIM * HISTORY_LEN;
pub const GLOBAL_DIM: usize = THROW_OBS_DIM + CATCH_OBS_DIM + 4 + 4 + 2 + 2;

pub mod layout {
    use super::*;

    pub const THROW: Range<usize> = 0..THROW_OBS_DIM;
    pub const CATCH: Range<usize> = THROW_OBS_DIM..THROW_OBS_DIM + CATCH_OBS_DIM;
    pub const THROW_QD: Range<usize> = CATCH.end..CATCH.end + 4;
    pub const CATCH_QD: Range<usize> = THROW_QD.end..THROW_QD.end + 4;
    pub const OBJECT_POSITION: Range<usize> = CATCH_QD.end..CATCH_QD.end + 2;
    pub const OBJECT_VELOCITY: Range<usize> = OBJECT_POSITION.end..OBJECT_POSITION.end + 2;
    /// Thrower joint reading inside the global vector.
    pub const THROW_Q: Range<usize> = 0..4;
    pub const TARGET: Range<usize> = 4..6;
}

/// Input width of the behavior-cloned thrower: joints, target, object position.
pub const HUMAN_INPUT_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub throw: Vec<f64>,
    pub catch: Vec<f64>,
    pub global: Vec<f64>,
}

/// Assembles all three vectors. `history` is newest-first and flattened; its
/// first block is the current frame feature used by the thrower.
pub fn build_observations(state: &WorldState, history: &[f64]) -> Observations {
    assert_eq!(history.len(), FEATURE_DIM * HISTORY_LEN, "feature history width");
    let mut throw = Vec::with_capacity(THROW_OBS_DIM);
    throw.extend_from_slice(&state.reading.q[THROWER]);
    throw.extend_from_slice(&state.target);
    throw.extend_from_slice(&history[..FEATURE_DIM]);
    let mut catch = Vec::with_capacity(CATCH_OBS_DIM);
    catch.extend_from_slice(&state.reading.q[CATCHER]);
    catch.extend_from_slice(&state.target);
    catch.extend_from_slice(history);
    let mut global = Vec::with_capacity(GLOBAL_DIM);
    global.extend_from_slice(&throw);
    global.extend_from_slice(&catch);
    global.extend_from_slice(&state.reading.qd[THROWER]);
    global.extend_from_slice(&state.reading.qd[CATCHER]);
    global.extend_from_slice(&state.object.position);
    global.extend_from_slice(&state.object.velocity);
    Observations { throw, catch, global }
}

/// Human-policy input `(q_throw, target, p_obj)` sliced out of a global state.
pub fn human_input(global: &[f64]) -> [f64; HUMAN_INPUT_DIM] {
    let mut o = [0.0; HUMAN_INPUT_DIM];
    o[..4].copy_from_slice(&global[layout::THROW_Q]);
    o[4..6].copy_from_slice(&global[layout::TARGET]);
    o[6..].copy_from_slice(&global[layout::OBJECT_POSITION]);
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(THROW_OBS_DIM, 14);
        assert_eq!(CATCH_OBS_DIM, 54);
        assert_eq!(GLOBAL_DIM, 80);
        assert_eq!(layout::OBJECT_VELOCITY.end, GLOBAL_DIM);
        assert_eq!(layout::OBJECT_POSITION, 76..78);
    }
}
