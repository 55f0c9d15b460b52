//! The two-state off-policy task: two states, actions left/right leading
//! deterministically to state 1/state 2, a single +1 reward on (2, right),
//! γ = 0.9, one-dimensional features x(1,·) = 1 and x(2,·) = 2. The behavior
//! policy oscillates (right from 1, left from 2, each with 0.9) while the
//! target prefers right everywhere, so the importance sampling ratio on
//! (2, right) is 9.

use nalgebra::DMatrix;

use super::MdpTask;
use crate::mdp::{FeatureMap, Mdp, Policy};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

pub fn two_state() -> MdpTask {
    // Rows in canonical pair order (s=1 left, s=1 right, s=2 left, s=2 right);
    // action left always enters state 1, right always enters state 2.
    let transition = DMatrix::from_row_slice(
        4,
        2,
        &[
            1.0, 0.0, //
            0.0, 1.0, //
            1.0, 0.0, //
            0.0, 1.0,
        ],
    );
    let reward = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
    let mdp = Mdp::new(2, 2, transition, reward, 0.9).expect("two-state constants");

    let target = Policy::new(DMatrix::from_row_slice(2, 2, &[0.1, 0.9, 0.1, 0.9]))
        .expect("target policy");
    let behavior = Policy::new(DMatrix::from_row_slice(2, 2, &[0.1, 0.9, 0.9, 0.1]))
        .expect("behavior policy");

    let features = FeatureMap::new(2, 2, DMatrix::from_column_slice(4, 1, &[1.0, 1.0, 2.0, 2.0]))
        .expect("feature map");

    MdpTask {
        mdp,
        target,
        behavior,
        features,
        initial_weights: None,
    }
}
