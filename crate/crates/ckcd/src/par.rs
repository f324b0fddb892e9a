//! Data-parallel helpers. Without the `parallel` feature every entry point
//! runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::icp::{check_icp, CombinatorialProof, IcpFailure};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Parallel,
    Sequential,
}

impl Mode {
    /// `Parallel` when the crate was built with rayon.
    pub fn best() -> Mode {
        if cfg!(feature = "parallel") {
            Mode::Parallel
        } else {
            Mode::Sequential
        }
    }
}

pub fn map<T, R, F>(mode: Mode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Mode::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// The result of the first item (in order) for which `f` returns `Some`.
pub fn find_first<T, R, F>(mode: Mode, items: &[T], f: F) -> Option<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Option<R> + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Mode::Parallel => items.par_iter().find_map_first(f),
        _ => items.iter().find_map(f),
    }
}

pub fn check_icp_batch(mode: Mode, items: &[CombinatorialProof]) -> Vec<Result<(), IcpFailure>> {
    map(mode, items, check_icp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let sq = |x: &u64| x * x;
        assert_eq!(map(Mode::Parallel, &xs, sq), map(Mode::Sequential, &xs, sq));
        let hit = |x: &u64| (x % 97 == 96).then_some(*x);
        assert_eq!(find_first(Mode::Parallel, &xs, hit), Some(96));
        assert_eq!(find_first(Mode::Sequential, &xs, hit), Some(96));
    }
}
