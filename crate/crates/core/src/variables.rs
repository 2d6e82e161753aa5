//! Named simulation state: per-particle (discrete) and global (singular)
//! variables.
//!
//! Discrete variables are flat structure-of-arrays buffers of length `N`
//! (vectors are interleaved with a fixed stride `d`). Kernels never see the
//! registry itself, only the `Copy` views handed out by it.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

use crate::execution::Executor;
use crate::real::{Real, RealCell};

/// Name of the auto-registered original-index variable.
pub const ID: &str = "id";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VariableError {
    #[error("variable `{0}` is already registered")]
    Duplicate(String),
    #[error("no variable named `{0}`")]
    Unknown(String),
    #[error("variable `{name}` is {actual:?}, expected {expected:?}")]
    KindMismatch {
        name: String,
        expected: VariableKind,
        actual: VariableKind,
    },
    #[error("fill value does not match the kind of `{0}`")]
    FillMismatch(String),
    #[error("got {got} values, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("permutation is not a bijection on 0..{0}")]
    NotBijective(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariableKind {
    Scalar,
    Vector(usize),
    Index,
}

impl VariableKind {
    fn stride(self) -> usize {
        match self {
            VariableKind::Vector(d) => d,
            _ => 1,
        }
    }
}

/// Initial value for a new discrete variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fill<R> {
    Real(R),
    Index(usize),
}

#[derive(Debug)]
enum Buffer<R: Real> {
    Real(Box<[R::Cell]>),
    Index(Box<[AtomicUsize]>),
}

#[derive(Debug)]
pub struct DiscreteVariable<R: Real> {
    name: String,
    kind: VariableKind,
    buffer: Buffer<R>,
}

impl<R: Real> DiscreteVariable<R> {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> VariableKind {
        self.kind
    }

    /// Number of particles covered (not the number of stored components).
    pub fn len(&self) -> usize {
        let raw = match &self.buffer {
            Buffer::Real(cells) => cells.len(),
            Buffer::Index(cells) => cells.len(),
        };
        raw / self.kind.stride()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SingularValue<R> {
    Real(R),
    Tuple(Vec<R>),
}

#[derive(Clone, Debug)]
pub struct SingularVariable<R> {
    pub name: String,
    pub value: SingularValue<R>,
}

/// Untyped handle to a discrete variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DiscreteId(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ScalarVar(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VectorVar<const D: usize>(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IndexVar(usize);

macro_rules! handle_id {
    ($($t:ty),*) => {$(
        impl From<$t> for DiscreteId {
            fn from(v: $t) -> Self {
                DiscreteId(v.0)
            }
        }
    )*};
}
handle_id!(ScalarVar, IndexVar);

impl<const D: usize> From<VectorVar<D>> for DiscreteId {
    fn from(v: VectorVar<D>) -> Self {
        DiscreteId(v.0)
    }
}

// Views hold only shared slices; derive would demand `R::Cell: Clone`.
macro_rules! copy_view {
    (impl<$($g:tt)*) => { copy_view!(@split [] $($g)*); };
    (@split [$($gen:tt)*] > $name:ident $($rest:tt)*) => {
        impl<$($gen)*> Clone for $name $($rest)* {
            fn clone(&self) -> Self {
                *self
            }
        }
        impl<$($gen)*> Copy for $name $($rest)* {}
    };
    (@split [$($gen:tt)*] $t:tt $($rest:tt)*) => { copy_view!(@split [$($gen)* $t] $($rest)*); };
}

copy_view!(impl<'a, R: Real> ScalarView<'a, R>);

/// Flat view of a scalar variable.
#[derive(Debug)]
pub struct ScalarView<'a, R: Real> {
    cells: &'a [R::Cell],
}

impl<'a, R: Real> ScalarView<'a, R> {
    #[inline(always)]
    pub fn get(&self, i: usize) -> R {
        self.cells[i].load()
    }

    #[inline(always)]
    pub fn set(&self, i: usize, value: R) {
        self.cells[i].store(value)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

copy_view!(impl<'a, R: Real, const D: usize> VectorView<'a, R, D>);

/// Flat view of a `D`-component vector variable, indexed by particle.
#[derive(Debug)]
pub struct VectorView<'a, R: Real, const D: usize> {
    cells: &'a [R::Cell],
}

impl<'a, R: Real, const D: usize> VectorView<'a, R, D> {
    #[inline(always)]
    pub fn get(&self, i: usize) -> [R; D] {
        let base = i * D;
        std::array::from_fn(|k| self.cells[base + k].load())
    }

    #[inline(always)]
    pub fn set(&self, i: usize, value: [R; D]) {
        let base = i * D;
        for (k, v) in value.into_iter().enumerate() {
            self.cells[base + k].store(v);
        }
    }

    #[inline(always)]
    pub fn component(&self, i: usize, k: usize) -> R {
        debug_assert!(k < D);
        self.cells[i * D + k].load()
    }

    #[inline(always)]
    pub fn set_component(&self, i: usize, k: usize, value: R) {
        debug_assert!(k < D);
        self.cells[i * D + k].store(value)
    }

    pub fn len(&self) -> usize {
        self.cells.len() / D
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IndexView<'a> {
    cells: &'a [AtomicUsize],
}

impl<'a> IndexView<'a> {
    #[inline(always)]
    pub fn get(&self, i: usize) -> usize {
        self.cells[i].load(Ordering::Relaxed)
    }

    #[inline(always)]
    pub fn set(&self, i: usize, value: usize) {
        self.cells[i].store(value, Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

copy_view!(impl<'a, R: Real> RealArrayView<'a, R>);

/// Kind-erased view of a real-valued variable, addressed by
/// `(particle, component)`.
#[derive(Debug)]
pub struct RealArrayView<'a, R: Real> {
    cells: &'a [R::Cell],
    stride: usize,
}

impl<'a, R: Real> RealArrayView<'a, R> {
    #[inline(always)]
    pub fn get(&self, i: usize, k: usize) -> R {
        debug_assert!(k < self.stride);
        self.cells[i * self.stride + k].load()
    }

    #[inline(always)]
    pub fn set(&self, i: usize, k: usize, value: R) {
        debug_assert!(k < self.stride);
        self.cells[i * self.stride + k].store(value)
    }

    pub fn components(&self) -> usize {
        self.stride
    }

    pub fn len(&self) -> usize {
        self.cells.len() / self.stride
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

copy_view!(impl<'a, R: Real> KernelView<'a, R>);

/// Either kind of kernel view, as returned by [`VariableRegistry::kernel_view`].
#[derive(Debug)]
pub enum KernelView<'a, R: Real> {
    Real(RealArrayView<'a, R>),
    Index(IndexView<'a>),
}

/// All discrete and singular variables of one simulation.
#[derive(Debug)]
pub struct VariableRegistry<R: Real> {
    particle_count: usize,
    discrete: Vec<DiscreteVariable<R>>,
    discrete_names: HashMap<String, usize>,
    singular: Vec<SingularVariable<R>>,
    singular_names: HashMap<String, usize>,
}

fn real_cells<R: Real>(len: usize, fill: R) -> Box<[R::Cell]> {
    (0..len).map(|_| R::Cell::new(fill)).collect()
}

impl<R: Real> VariableRegistry<R> {
    /// Creates a registry for `particle_count` particles with the `id`
    /// variable already registered as `0..N`.
    pub fn new(particle_count: usize) -> Self {
        let mut registry = Self {
            particle_count,
            discrete: Vec::new(),
            discrete_names: HashMap::new(),
            singular: Vec::new(),
            singular_names: HashMap::new(),
        };
        let id = registry
            .add_index(ID, 0)
            .expect("fresh registry has no variables");
        let view = registry.index_view(id);
        for i in 0..particle_count {
            view.set(i, i);
        }
        registry
    }

    pub fn particle_count(&self) -> usize {
        self.particle_count
    }

    pub fn id(&self) -> IndexVar {
        IndexVar(self.discrete_names[ID])
    }

    pub fn register_discrete(
        &mut self,
        name: &str,
        kind: VariableKind,
        initial_fill: Fill<R>,
    ) -> Result<DiscreteId, VariableError> {
        if self.discrete_names.contains_key(name) {
            return Err(VariableError::Duplicate(name.to_string()));
        }
        let n = self.particle_count;
        let buffer = match (kind, initial_fill) {
            (VariableKind::Index, Fill::Index(v)) => {
                Buffer::Index((0..n).map(|_| AtomicUsize::new(v)).collect())
            }
            (VariableKind::Scalar, Fill::Real(v)) => Buffer::Real(real_cells(n, v)),
            (VariableKind::Vector(d), Fill::Real(v)) => Buffer::Real(real_cells(n * d, v)),
            _ => return Err(VariableError::FillMismatch(name.to_string())),
        };
        let slot = self.discrete.len();
        self.discrete.push(DiscreteVariable {
            name: name.to_string(),
            kind,
            buffer,
        });
        self.discrete_names.insert(name.to_string(), slot);
        Ok(DiscreteId(slot))
    }

    pub fn add_scalar(&mut self, name: &str, fill: R) -> Result<ScalarVar, VariableError> {
        self.register_discrete(name, VariableKind::Scalar, Fill::Real(fill))
            .map(|id| ScalarVar(id.0))
    }

    pub fn add_vector<const D: usize>(
        &mut self,
        name: &str,
        fill: [R; D],
    ) -> Result<VectorVar<D>, VariableError> {
        let id = self.register_discrete(name, VariableKind::Vector(D), Fill::Real(R::zero()))?;
        let var = VectorVar(id.0);
        let view = self.vector_view(var);
        for i in 0..self.particle_count {
            view.set(i, fill);
        }
        Ok(var)
    }

    pub fn add_index(&mut self, name: &str, fill: usize) -> Result<IndexVar, VariableError> {
        self.register_discrete(name, VariableKind::Index, Fill::Index(fill))
            .map(|id| IndexVar(id.0))
    }

    pub fn register_singular(
        &mut self,
        name: &str,
        value: SingularValue<R>,
    ) -> Result<(), VariableError> {
        if self.singular_names.contains_key(name) {
            return Err(VariableError::Duplicate(name.to_string()));
        }
        self.singular_names.insert(name.to_string(), self.singular.len());
        self.singular.push(SingularVariable {
            name: name.to_string(),
            value,
        });
        Ok(())
    }

    pub fn singular(&self, name: &str) -> Result<&SingularValue<R>, VariableError> {
        self.singular_names
            .get(name)
            .map(|&slot| &self.singular[slot].value)
            .ok_or_else(|| VariableError::Unknown(name.to_string()))
    }

    pub fn singular_real(&self, name: &str) -> Result<R, VariableError> {
        match self.singular(name)? {
            SingularValue::Real(v) => Ok(*v),
            SingularValue::Tuple(_) => Err(VariableError::FillMismatch(name.to_string())),
        }
    }

    pub fn singular_vector<const D: usize>(&self, name: &str) -> Result<[R; D], VariableError> {
        match self.singular(name)? {
            SingularValue::Tuple(v) if v.len() == D => Ok(std::array::from_fn(|k| v[k])),
            SingularValue::Tuple(v) => Err(VariableError::LengthMismatch {
                got: v.len(),
                expected: D,
            }),
            SingularValue::Real(_) => Err(VariableError::FillMismatch(name.to_string())),
        }
    }

    pub fn singulars(&self) -> &[SingularVariable<R>] {
        &self.singular
    }

    pub fn discrete(&self) -> &[DiscreteVariable<R>] {
        &self.discrete
    }

    pub fn lookup(&self, name: &str) -> Result<DiscreteId, VariableError> {
        self.discrete_names
            .get(name)
            .map(|&slot| DiscreteId(slot))
            .ok_or_else(|| VariableError::Unknown(name.to_string()))
    }

    fn lookup_kind(&self, name: &str, expected: VariableKind) -> Result<usize, VariableError> {
        let slot = self.lookup(name)?.0;
        let actual = self.discrete[slot].kind;
        if actual != expected {
            return Err(VariableError::KindMismatch {
                name: name.to_string(),
                expected,
                actual,
            });
        }
        Ok(slot)
    }

    pub fn scalar(&self, name: &str) -> Result<ScalarVar, VariableError> {
        self.lookup_kind(name, VariableKind::Scalar).map(ScalarVar)
    }

    pub fn vector<const D: usize>(&self, name: &str) -> Result<VectorVar<D>, VariableError> {
        self.lookup_kind(name, VariableKind::Vector(D)).map(VectorVar)
    }

    pub fn index(&self, name: &str) -> Result<IndexVar, VariableError> {
        self.lookup_kind(name, VariableKind::Index).map(IndexVar)
    }

    fn real_cells_of(&self, slot: usize) -> &[R::Cell] {
        match &self.discrete[slot].buffer {
            Buffer::Real(cells) => cells,
            Buffer::Index(_) => unreachable!("typed handle refers to a real variable"),
        }
    }

    fn index_cells_of(&self, slot: usize) -> &[AtomicUsize] {
        match &self.discrete[slot].buffer {
            Buffer::Index(cells) => cells,
            Buffer::Real(_) => unreachable!("typed handle refers to an index variable"),
        }
    }

    pub fn scalar_view(&self, var: ScalarVar) -> ScalarView<'_, R> {
        ScalarView {
            cells: self.real_cells_of(var.0),
        }
    }

    pub fn vector_view<const D: usize>(&self, var: VectorVar<D>) -> VectorView<'_, R, D> {
        VectorView {
            cells: self.real_cells_of(var.0),
        }
    }

    pub fn index_view(&self, var: IndexVar) -> IndexView<'_> {
        IndexView {
            cells: self.index_cells_of(var.0),
        }
    }

    pub fn kernel_view(&self, id: impl Into<DiscreteId>) -> KernelView<'_, R> {
        let slot = id.into().0;
        let var = &self.discrete[slot];
        match &var.buffer {
            Buffer::Real(cells) => KernelView::Real(RealArrayView {
                cells,
                stride: var.kind.stride(),
            }),
            Buffer::Index(cells) => KernelView::Index(IndexView { cells }),
        }
    }

    pub fn scalar_values(&self, var: ScalarVar) -> Vec<R> {
        let view = self.scalar_view(var);
        (0..view.len()).map(|i| view.get(i)).collect()
    }

    pub fn vector_values<const D: usize>(&self, var: VectorVar<D>) -> Vec<[R; D]> {
        let view = self.vector_view(var);
        (0..view.len()).map(|i| view.get(i)).collect()
    }

    pub fn index_values(&self, var: IndexVar) -> Vec<usize> {
        let view = self.index_view(var);
        (0..view.len()).map(|i| view.get(i)).collect()
    }

    fn check_len(&self, got: usize) -> Result<(), VariableError> {
        if got != self.particle_count {
            return Err(VariableError::LengthMismatch {
                got,
                expected: self.particle_count,
            });
        }
        Ok(())
    }

    pub fn set_scalar_values(&self, var: ScalarVar, values: &[R]) -> Result<(), VariableError> {
        self.check_len(values.len())?;
        let view = self.scalar_view(var);
        values.iter().enumerate().for_each(|(i, &v)| view.set(i, v));
        Ok(())
    }

    pub fn set_vector_values<const D: usize>(
        &self,
        var: VectorVar<D>,
        values: &[[R; D]],
    ) -> Result<(), VariableError> {
        self.check_len(values.len())?;
        let view = self.vector_view(var);
        values.iter().enumerate().for_each(|(i, &v)| view.set(i, v));
        Ok(())
    }

    pub fn set_index_values(&self, var: IndexVar, values: &[usize]) -> Result<(), VariableError> {
        self.check_len(values.len())?;
        let view = self.index_view(var);
        values.iter().enumerate().for_each(|(i, &v)| view.set(i, v));
        Ok(())
    }

    /// Reorders every non-exempt discrete variable so that
    /// `new[k] = old[permutation[k]]`.
    pub fn apply_permutation(
        &mut self,
        exec: &Executor,
        permutation: &[usize],
        exempt_names: &[&str],
    ) -> Result<(), VariableError> {
        let n = self.particle_count;
        self.check_len(permutation.len())?;
        let mut seen = vec![false; n];
        for &p in permutation {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(VariableError::NotBijective(n));
            }
        }

        for var in self.discrete.iter_mut() {
            if exempt_names.contains(&var.name.as_str()) {
                continue;
            }
            let stride = var.kind.stride();
            match &mut var.buffer {
                Buffer::Real(old) => {
                    let fresh = real_cells::<R>(old.len(), R::zero());
                    let (src, dst) = (&old[..], &fresh[..]);
                    exec.particle_for(n, move |k: usize| {
                        let from = permutation[k] * stride;
                        for c in 0..stride {
                            dst[k * stride + c].store(src[from + c].load());
                        }
                    });
                    *old = fresh;
                }
                Buffer::Index(old) => {
                    let fresh: Box<[AtomicUsize]> = (0..n).map(|_| AtomicUsize::new(0)).collect();
                    let (src, dst) = (&old[..], &fresh[..]);
                    exec.particle_for(n, move |k: usize| {
                        dst[k].store(src[permutation[k]].load(Ordering::Relaxed), Ordering::Relaxed);
                    });
                    *old = fresh;
                }
            }
        }
        Ok(())
    }

    /// Bit patterns of every discrete variable, keyed by name.
    pub fn state_bits(&self) -> BTreeMap<String, Vec<u64>> {
        self.discrete
            .iter()
            .map(|var| {
                let bits = match &var.buffer {
                    Buffer::Real(cells) => cells.iter().map(|c| c.load().bits()).collect(),
                    Buffer::Index(cells) => cells
                        .iter()
                        .map(|c| c.load(Ordering::Relaxed) as u64)
                        .collect(),
                };
                (var.name.clone(), bits)
            })
            .collect()
    }
}
