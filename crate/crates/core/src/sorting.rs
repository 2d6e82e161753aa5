//! Particle reordering by cell key.
//!
//! The device path uses a recursion-free LSD radix sort (8-bit digits,
//! per-group histograms, exclusive prefix sum, stable scatter). Host paths
//! use a stable comparison sort. Both produce the same permutation.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::slice::ParallelSliceMut;

use crate::execution::{ExecutionPolicy, Executor};
use crate::real::Real;
use crate::variables::{VariableError, VariableRegistry};

pub const RADIX_BITS: u32 = 8;
const BUCKETS: usize = 1 << RADIX_BITS;

/// Number of 8-bit passes needed to cover `max_key`.
pub fn radix_passes(max_key: usize) -> u32 {
    (usize::BITS - max_key.leading_zeros()).div_ceil(RADIX_BITS)
}

/// Stable permutation `π` with `keys[π[k]]` non-decreasing, by LSD radix sort.
pub fn radix_sort_permutation(exec: &Executor, keys: &[usize]) -> Vec<usize> {
    let n = keys.len();
    let mut order: Vec<usize> = (0..n).collect();
    let Some(&max_key) = keys.iter().max() else {
        return order;
    };

    let chunk = exec.chunk_size(n);
    let groups = n.div_ceil(chunk);
    let histograms: Vec<AtomicUsize> = (0..groups * BUCKETS).map(|_| AtomicUsize::new(0)).collect();
    let scattered: Vec<AtomicUsize> = (0..n).map(|_| AtomicUsize::new(0)).collect();
    let mut starts = vec![0usize; groups * BUCKETS];

    for pass in 0..radix_passes(max_key) {
        let shift = pass * RADIX_BITS;
        let digit = move |key: usize| (key >> shift) & (BUCKETS - 1);

        {
            let (src, hist) = (&order[..], &histograms[..]);
            exec.group_for(groups, move |g: usize| {
                let mut local = [0usize; BUCKETS];
                for &p in &src[g * chunk..((g + 1) * chunk).min(n)] {
                    local[digit(keys[p])] += 1;
                }
                for (d, count) in local.into_iter().enumerate() {
                    hist[g * BUCKETS + d].store(count, Ordering::Relaxed);
                }
            });
        }

        // Digit-major, group-minor exclusive scan keeps the scatter stable.
        let mut running = 0;
        for d in 0..BUCKETS {
            for g in 0..groups {
                starts[g * BUCKETS + d] = running;
                running += histograms[g * BUCKETS + d].load(Ordering::Relaxed);
            }
        }

        {
            let (src, dst, starts) = (&order[..], &scattered[..], &starts[..]);
            exec.group_for(groups, move |g: usize| {
                let mut cursor = [0usize; BUCKETS];
                cursor.copy_from_slice(&starts[g * BUCKETS..(g + 1) * BUCKETS]);
                for &p in &src[g * chunk..((g + 1) * chunk).min(n)] {
                    let d = digit(keys[p]);
                    dst[cursor[d]].store(p, Ordering::Relaxed);
                    cursor[d] += 1;
                }
            });
        }

        for (slot, value) in order.iter_mut().zip(&scattered) {
            *slot = value.load(Ordering::Relaxed);
        }
    }
    order
}

/// Stable comparison-sort permutation; the host path and the radix oracle.
pub fn comparison_sort_permutation(keys: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by_key(|&p| keys[p]);
    order
}

/// Comparison sort run on the executor's pool when it has one.
pub fn host_sort_permutation(exec: &Executor, keys: &[usize]) -> Vec<usize> {
    match exec.policy() {
        ExecutionPolicy::Sequenced => comparison_sort_permutation(keys),
        _ => exec.install(|| {
            let mut order: Vec<usize> = (0..keys.len()).collect();
            order.par_sort_by_key(|&p| keys[p]);
            order
        }),
    }
}

/// Reorders all non-exempt particle data by `cell_keys` and returns the
/// permutation that was applied.
pub fn sort_particles<R: Real>(
    exec: &Executor,
    registry: &mut VariableRegistry<R>,
    cell_keys: &[usize],
    exempt_names: &[&str],
) -> Result<Vec<usize>, VariableError> {
    let permutation = if exec.policy().is_device() {
        radix_sort_permutation(exec, cell_keys)
    } else {
        host_sort_permutation(exec, cell_keys)
    };
    registry.apply_permutation(exec, &permutation, exempt_names)?;
    Ok(permutation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn execs() -> Vec<Executor> {
        vec![
            Executor::sequenced(),
            Executor::new(ExecutionPolicy::Parallel { workers: 3 }).unwrap(),
            Executor::new(ExecutionPolicy::ParallelDevice { workers: 4 }).unwrap(),
        ]
    }

    #[test]
    fn hand_sorted_example() {
        for exec in execs() {
            assert_eq!(radix_sort_permutation(&exec, &[3, 1, 2, 1]), vec![1, 3, 2, 0]);
            assert!(radix_sort_permutation(&exec, &[]).is_empty());
        }
        assert_eq!(comparison_sort_permutation(&[3, 1, 2, 1]), vec![1, 3, 2, 0]);
        assert_eq!(comparison_sort_permutation(&[0, 4, 4, 9]), vec![0, 1, 2, 3]);
    }

    #[test]
    fn pass_count() {
        assert_eq!(radix_passes(0), 0);
        assert_eq!(radix_passes(255), 1);
        assert_eq!(radix_passes(256), 2);
        assert_eq!(radix_passes(u32::MAX as usize), 4);
    }

    #[test]
    fn all_equal_keys_keep_order() {
        let keys = vec![42usize; 5000];
        for exec in execs() {
            assert_eq!(radix_sort_permutation(&exec, &keys), (0..5000).collect::<Vec<_>>());
        }
    }

    #[test]
    fn sorting_registry_is_idempotent() {
        let mut reg = VariableRegistry::<f64>::new(6);
        let k = reg.add_index("key", 0).unwrap();
        reg.set_index_values(k, &[5, 1, 4, 1, 0, 3]).unwrap();
        for exec in execs() {
            let keys = reg.index_values(k);
            sort_particles(&exec, &mut reg, &keys, &[]).unwrap();
            let sorted = reg.index_values(k);
            assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
            let again = sort_particles(&exec, &mut reg, &sorted, &[]).unwrap();
            assert_eq!(again, (0..6).collect::<Vec<_>>());
        }
    }

    proptest! {
        #[test]
        fn radix_matches_comparison(keys in prop::collection::vec(0usize..70_000, 0..5000)) {
            let expected = comparison_sort_permutation(&keys);
            for exec in execs() {
                let got = radix_sort_permutation(&exec, &keys);
                prop_assert_eq!(&got, &expected);
            }
        }
    }
}
