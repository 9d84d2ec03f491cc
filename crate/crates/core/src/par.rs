//! Data-parallel execution switch. With the `parallel` feature disabled every
//! strategy runs sequentially.

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Exec {
    #[default]
    Sequential,
    Parallel,
}

impl Exec {
    /// Parallel when compiled with rayon support, otherwise sequential.
    pub fn auto() -> Exec {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    /// Maps then folds with an associative `combine`, starting from `init()`.
    pub fn map_reduce<T, R, F, I, C>(self, items: &[T], f: F, init: I, combine: C) -> R
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
        I: Fn() -> R + Sync + Send,
        C: Fn(R, R) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).reduce(init, combine)
            }
            _ => items.iter().map(f).fold(init(), combine),
        }
    }

    /// True when every item satisfies `pred`; the parallel path may stop early.
    pub fn all<T, F>(self, items: &[T], pred: F) -> bool
    where
        T: Sync,
        F: Fn(&T) -> bool + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.par_iter().all(pred)
            }
            _ => items.iter().all(pred),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        for e in [Exec::Sequential, Exec::Parallel] {
            assert_eq!(e.map(&xs, |x| x * 2)[999], 1998);
            assert_eq!(e.map_reduce(&xs, |x| *x, || 0, |a, b| a + b), 499_500);
            assert!(!e.all(&xs, |x| *x < 999));
        }
    }
}
