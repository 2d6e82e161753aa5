//! Execution policies and the two execution algorithms, `particle_for` and
//! `particle_reduce`.
//!
//! A compute kernel is written once as a [`ComputeKernel`] (or
//! [`ReduceKernel`]) and handed to an [`Executor`]. The executor decides
//! whether work items run in index order on the calling thread or in
//! contiguous chunks on a worker pool. Kernels must be `Copy`: their bound
//! state is limited to flat array views and plain values, which is the
//! device-side restriction that every policy shares.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::real::Real;
use crate::variables::VariableRegistry;

/// Smallest chunk of contiguous indices handed to one worker.
pub const MIN_CHUNK: usize = 1024;

#[derive(Debug, Error)]
pub enum ExecutionError {
    #[error("worker count must be positive")]
    NoWorkers,
    #[error("failed to build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("host closures cannot be dispatched under the parallel device policy")]
    HostKernelOnDevice,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExecutionPolicy {
    /// Ascending index order on the calling thread.
    Sequenced,
    /// Host worker pool.
    Parallel { workers: usize },
    /// Worker pool restricted to device-compatible kernels.
    ParallelDevice { workers: usize },
}

impl ExecutionPolicy {
    pub fn workers(&self) -> usize {
        match *self {
            ExecutionPolicy::Sequenced => 1,
            ExecutionPolicy::Parallel { workers } | ExecutionPolicy::ParallelDevice { workers } => {
                workers
            }
        }
    }

    pub fn is_device(&self) -> bool {
        matches!(self, ExecutionPolicy::ParallelDevice { .. })
    }

    /// Short CLI name: `seq`, `par` or `device`.
    pub fn name(&self) -> &'static str {
        match self {
            ExecutionPolicy::Sequenced => "seq",
            ExecutionPolicy::Parallel { .. } => "par",
            ExecutionPolicy::ParallelDevice { .. } => "device",
        }
    }

    /// Builds a policy from its CLI name and a worker count (ignored for `seq`).
    pub fn from_name(name: &str, workers: usize) -> Option<Self> {
        match name {
            "seq" | "sequenced" => Some(ExecutionPolicy::Sequenced),
            "par" | "parallel" => Some(ExecutionPolicy::Parallel { workers }),
            "device" | "parallel_device" => Some(ExecutionPolicy::ParallelDevice { workers }),
            _ => None,
        }
    }
}

impl fmt::Display for ExecutionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecutionPolicy::Sequenced => write!(f, "seq"),
            ExecutionPolicy::Parallel { workers } => write!(f, "par({workers})"),
            ExecutionPolicy::ParallelDevice { workers } => write!(f, "device({workers})"),
        }
    }
}

impl FromStr for ExecutionPolicy {
    type Err = String;

    /// Accepts `seq`, `par`, `device`, optionally with a worker count as in `par(4)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, workers) = match s.find('(') {
            Some(open) if s.ends_with(')') => {
                let count = s[open + 1..s.len() - 1]
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| format!("bad worker count in `{s}`: {e}"))?;
                (&s[..open], count)
            }
            _ => (s, default_workers()),
        };
        ExecutionPolicy::from_name(name, workers).ok_or_else(|| format!("unknown policy `{s}`"))
    }
}

/// Number of hardware threads reported by the OS.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// A per-particle procedure. Implementors hold only array views and plain
/// values, so a kernel can be copied into every worker.
pub trait ComputeKernel: Copy + Send + Sync {
    fn compute(&self, index: usize);
}

impl<F> ComputeKernel for F
where
    F: Fn(usize) + Copy + Send + Sync,
{
    #[inline(always)]
    fn compute(&self, index: usize) {
        self(index)
    }
}

/// A reduction over particle indices. `combine` must be associative and
/// commutative with `identity` as its neutral element.
pub trait ReduceKernel: Copy + Send + Sync {
    type Value: Copy + Send + Sync;

    fn identity(&self) -> Self::Value;
    fn transform(&self, index: usize) -> Self::Value;
    fn combine(&self, a: Self::Value, b: Self::Value) -> Self::Value;
}

/// Closure-based [`ReduceKernel`].
#[derive(Clone, Copy)]
pub struct ReduceSpec<T, F, C> {
    pub identity: T,
    pub transform: F,
    pub combine: C,
}

impl<T, F, C> ReduceSpec<T, F, C> {
    pub fn new(identity: T, transform: F, combine: C) -> Self {
        Self {
            identity,
            transform,
            combine,
        }
    }
}

impl<T, F, C> ReduceKernel for ReduceSpec<T, F, C>
where
    T: Copy + Send + Sync,
    F: Fn(usize) -> T + Copy + Send + Sync,
    C: Fn(T, T) -> T + Copy + Send + Sync,
{
    type Value = T;

    #[inline(always)]
    fn identity(&self) -> T {
        self.identity
    }
    #[inline(always)]
    fn transform(&self, index: usize) -> T {
        (self.transform)(index)
    }
    #[inline(always)]
    fn combine(&self, a: T, b: T) -> T {
        (self.combine)(a, b)
    }
}

/// Kernel-shell layer: binds registry data into a kernel on the host, once
/// per dispatch.
pub trait LocalDynamics<R: Real> {
    type Kernel<'a>: ComputeKernel
    where
        Self: 'a,
        R: 'a;

    fn setup<'a>(&'a self, registry: &'a VariableRegistry<R>) -> Self::Kernel<'a>;
}

/// Kernel-shell layer for reductions.
pub trait ReduceDynamics<R: Real> {
    type Kernel<'a>: ReduceKernel
    where
        Self: 'a,
        R: 'a;

    fn setup<'a>(&'a self, registry: &'a VariableRegistry<R>) -> Self::Kernel<'a>;
}

/// Dispatches kernels under one [`ExecutionPolicy`].
#[derive(Clone)]
pub struct Executor {
    policy: ExecutionPolicy,
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl fmt::Debug for Executor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Executor").field("policy", &self.policy).finish()
    }
}

impl Executor {
    pub fn new(policy: ExecutionPolicy) -> Result<Self, ExecutionError> {
        let pool = match policy {
            ExecutionPolicy::Sequenced => None,
            ExecutionPolicy::Parallel { workers } | ExecutionPolicy::ParallelDevice { workers } => {
                if workers == 0 {
                    return Err(ExecutionError::NoWorkers);
                }
                let prefix = if policy.is_device() { "device" } else { "host" };
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .thread_name(move |i| format!("{prefix}-worker-{i}"))
                    .build()?;
                Some(Arc::new(pool))
            }
        };
        Ok(Self { policy, pool })
    }

    pub fn sequenced() -> Self {
        Self {
            policy: ExecutionPolicy::Sequenced,
            pool: None,
        }
    }

    pub fn policy(&self) -> ExecutionPolicy {
        self.policy
    }

    pub fn workers(&self) -> usize {
        self.policy.workers()
    }

    /// Contiguous chunk length used to partition `n` work items.
    pub fn chunk_size(&self, n: usize) -> usize {
        MIN_CHUNK.max(n / (4 * self.workers()))
    }

    /// Invokes `kernel` exactly once for every index in `0..n`.
    pub fn particle_for<K: ComputeKernel>(&self, n: usize, kernel: K) {
        match &self.pool {
            None => {
                for i in 0..n {
                    kernel.compute(i);
                }
            }
            Some(pool) => {
                let chunk = self.chunk_size(n);
                let chunks = n.div_ceil(chunk);
                pool.install(|| {
                    (0..chunks).into_par_iter().for_each(|c| {
                        let end = ((c + 1) * chunk).min(n);
                        for i in c * chunk..end {
                            kernel.compute(i);
                        }
                    })
                });
            }
        }
    }

    /// Invokes `kernel` once per work group in `0..groups`, one group per
    /// task. Used by algorithms whose work items are whole chunks.
    pub fn group_for<K: ComputeKernel>(&self, groups: usize, kernel: K) {
        match &self.pool {
            None => (0..groups).for_each(|g| kernel.compute(g)),
            Some(pool) => pool.install(|| (0..groups).into_par_iter().for_each(|g| kernel.compute(g))),
        }
    }

    /// Runs `op` inside this executor's worker pool (or inline when sequenced).
    pub fn install<T: Send>(&self, op: impl FnOnce() -> T + Send) -> T {
        match &self.pool {
            None => op(),
            Some(pool) => pool.install(op),
        }
    }

    /// Like [`Executor::particle_for`] but accepts arbitrary host closures.
    /// Refused under the device policy.
    pub fn host_for<F>(&self, n: usize, f: F) -> Result<(), ExecutionError>
    where
        F: Fn(usize) + Send + Sync,
    {
        if self.policy.is_device() {
            return Err(ExecutionError::HostKernelOnDevice);
        }
        let f = &f;
        self.particle_for(n, f);
        Ok(())
    }

    /// Folds `transform` over `0..n` with `combine`.
    ///
    /// Sequenced is a left fold in index order. The pooled policies fold each
    /// chunk left to right and then merge the chunk partials in a fixed
    /// pairwise tree, so repeated runs with the same worker count agree
    /// bit for bit.
    pub fn particle_reduce<K: ReduceKernel>(&self, n: usize, kernel: K) -> K::Value {
        match &self.pool {
            None => {
                let mut acc = kernel.identity();
                for i in 0..n {
                    acc = kernel.combine(acc, kernel.transform(i));
                }
                acc
            }
            Some(pool) => {
                let chunk = self.chunk_size(n);
                let chunks = n.div_ceil(chunk);
                let partials: Vec<K::Value> = pool.install(|| {
                    (0..chunks)
                        .into_par_iter()
                        .map(|c| {
                            let end = ((c + 1) * chunk).min(n);
                            let mut acc = kernel.identity();
                            for i in c * chunk..end {
                                acc = kernel.combine(acc, kernel.transform(i));
                            }
                            acc
                        })
                        .collect()
                });
                tree_combine(&kernel, partials)
            }
        }
    }

    /// Runs the host-side setup of `dynamics` and dispatches its kernel over
    /// every particle.
    pub fn dispatch<R: Real, D: LocalDynamics<R>>(&self, dynamics: &D, registry: &VariableRegistry<R>) {
        let kernel = dynamics.setup(registry);
        self.particle_for(registry.particle_count(), kernel);
    }

    pub fn dispatch_reduce<'a, R: Real, D: ReduceDynamics<R>>(
        &self,
        dynamics: &'a D,
        registry: &'a VariableRegistry<R>,
    ) -> <D::Kernel<'a> as ReduceKernel>::Value {
        let kernel = dynamics.setup(registry);
        self.particle_reduce(registry.particle_count(), kernel)
    }
}

fn tree_combine<K: ReduceKernel>(kernel: &K, mut level: Vec<K::Value>) -> K::Value {
    if level.is_empty() {
        return kernel.identity();
    }
    while level.len() > 1 {
        let next = level
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => kernel.combine(*a, *b),
                [a] => *a,
                _ => unreachable!(),
            })
            .collect();
        level = next;
    }
    level[0]
}
