//! Arithmetic abstraction for the forward kernels.
//!
//! The production path instantiates the kernels with `f64`. [`Counted`]
//! instantiates the very same kernels while tallying every floating add and
//! multiply, which is how operation counts are measured rather than assumed.

use std::cell::Cell;
use std::ops::{Add, Mul};

pub trait Scalar: Copy + Add<Output = Self> + Mul<Output = Self> {}

impl Scalar for f64 {}

thread_local! {
    static ADDS: Cell<u64> = const { Cell::new(0) };
    static MULS: Cell<u64> = const { Cell::new(0) };
}

/// An `f64` wrapper that counts the operations performed on it (per thread).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Counted(pub f64);

impl Add for Counted {
    type Output = Counted;
    fn add(self, rhs: Counted) -> Counted {
        ADDS.with(|c| c.set(c.get() + 1));
        Counted(self.0 + rhs.0)
    }
}

impl Mul for Counted {
    type Output = Counted;
    fn mul(self, rhs: Counted) -> Counted {
        MULS.with(|c| c.set(c.get() + 1));
        Counted(self.0 * rhs.0)
    }
}

impl Scalar for Counted {}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpTally {
    pub adds: u64,
    pub muls: u64,
}

impl OpTally {
    pub fn total(&self) -> u64 {
        self.adds + self.muls
    }
}

/// Runs `f` and returns the operations performed on [`Counted`] values inside it.
pub fn count_ops<R>(f: impl FnOnce() -> R) -> (R, OpTally) {
    let before = snapshot();
    let out = f();
    let after = snapshot();
    (
        out,
        OpTally {
            adds: after.adds - before.adds,
            muls: after.muls - before.muls,
        },
    )
}

fn snapshot() -> OpTally {
    OpTally {
        adds: ADDS.with(Cell::get),
        muls: MULS.with(Cell::get),
    }
}
