//! Data-parallel helpers. With the `parallel` feature the batch loops run
//! on rayon; without it every mode runs sequentially.

use std::collections::HashMap;
use std::hash::Hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

pub fn map<T, R, F>(mode: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Counts the keys produced by `f` across all items.
pub fn count<T, K, I, F>(mode: Execution, items: &[T], f: F) -> HashMap<K, usize>
where
    T: Sync,
    K: Eq + Hash + Send,
    I: IntoIterator<Item = K>,
    F: Fn(&T) -> I + Sync + Send,
{
    let tally = |mut acc: HashMap<K, usize>, item: &T| {
        for key in f(item) {
            *acc.entry(key).or_insert(0) += 1;
        }
        acc
    };
    match mode {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().fold(HashMap::new, tally).reduce(HashMap::new, |mut a, b| {
                for (k, v) in b {
                    *a.entry(k).or_insert(0) += v;
                }
                a
            })
        }
        _ => items.iter().fold(HashMap::new(), tally),
    }
}
