//! Minimal reverse-mode differentiation over dense real arrays (rank <= 3).
//!
//! Enough to express the recurrent and attention generators, the three
//! discriminators and all loss terms. Single-threaded graph construction;
//! independent tapes may live on separate threads.

mod grad_check;
mod params;
mod tape;
mod tensor;

pub use grad_check::grad_check;
pub use params::{GradMap, ParamSet};
pub use tape::{Primitive, Tape, Var, LAYER_NORM_EPS};
pub use tensor::{matmul, transpose, Tensor};
