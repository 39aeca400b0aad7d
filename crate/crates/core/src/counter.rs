//! Operation counting for the group and hash layer.
//!
//! Counting is scoped: [`measure`] opens a fresh counter on the current
//! thread, runs a closure, and returns what the closure performed. Scopes nest;
//! a closed scope's totals are folded into the enclosing one. Work done outside
//! any scope is not recorded.

use std::cell::RefCell;
use std::ops::{Add, AddAssign};

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OpCounter {
    pub scalar_mults: u64,
    pub hashes_h1: u64,
    pub hashes_h2: u64,
    pub point_adds: u64,
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.scalar_mults += rhs.scalar_mults;
        self.hashes_h1 += rhs.hashes_h1;
        self.hashes_h2 += rhs.hashes_h2;
        self.point_adds += rhs.point_adds;
    }
}

impl Add for OpCounter {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

thread_local! {
    static SCOPES: RefCell<Vec<OpCounter>> = const { RefCell::new(Vec::new()) };
}

pub(crate) fn record(f: impl FnOnce(&mut OpCounter)) {
    SCOPES.with(|s| {
        if let Some(top) = s.borrow_mut().last_mut() {
            f(top);
        }
    });
}

struct ScopeGuard;

impl Drop for ScopeGuard {
    fn drop(&mut self) {
        SCOPES.with(|s| {
            let mut scopes = s.borrow_mut();
            if let Some(done) = scopes.pop() {
                if let Some(parent) = scopes.last_mut() {
                    *parent += done;
                }
            }
        });
    }
}

/// Runs `f` inside a fresh counting scope and returns its result together
/// with the operations it performed on this thread.
pub fn measure<R>(f: impl FnOnce() -> R) -> (R, OpCounter) {
    SCOPES.with(|s| s.borrow_mut().push(OpCounter::default()));
    let guard = ScopeGuard;
    let out = f();
    let counted = SCOPES.with(|s| *s.borrow().last().expect("scope pushed above"));
    drop(guard);
    (out, counted)
}
