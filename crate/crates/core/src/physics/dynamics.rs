//! Per-particle compute kernels of the WCSPH scheme.
//!
//! Each scheme step is a shell type implementing [`LocalDynamics`] (or
//! [`ReduceDynamics`]) whose `setup` binds registry views into a `Copy`
//! kernel. Kernels write only their own particle's slots. Neighbor loops
//! visit in ascending `id` order, so results do not depend on the policy or
//! on the current storage order.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::execution::{ComputeKernel, LocalDynamics, ReduceDynamics, ReduceKernel};
use crate::neighborhood::{CellLinkedList, NeighborSearch};
use crate::physics::eos::{eos_density, eos_pressure};
use crate::physics::fluid::{Constants, FluidVariables};
use crate::physics::kernel::WendlandC2;
use crate::real::{vecn, Real};
use crate::variables::{IndexView, ScalarView, VariableRegistry, VectorView};

const NONE: usize = usize::MAX;

/// Failure flags raised from inside kernels. The lowest offending index
/// wins, so the report is the same under every policy.
#[derive(Debug)]
pub struct Diagnostics {
    overflow: AtomicUsize,
    bad_density: AtomicUsize,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self {
            overflow: AtomicUsize::new(NONE),
            bad_density: AtomicUsize::new(NONE),
        }
    }
}

impl Diagnostics {
    pub fn record_overflow(&self, i: usize) {
        self.overflow.fetch_min(i, Ordering::Relaxed);
    }

    pub fn record_bad_density(&self, i: usize) {
        self.bad_density.fetch_min(i, Ordering::Relaxed);
    }

    pub fn overflow(&self) -> Option<usize> {
        Some(self.overflow.load(Ordering::Relaxed)).filter(|&i| i != NONE)
    }

    pub fn bad_density(&self) -> Option<usize> {
        Some(self.bad_density.load(Ordering::Relaxed)).filter(|&i| i != NONE)
    }

    pub fn clear(&self) {
        self.overflow.store(NONE, Ordering::Relaxed);
        self.bad_density.store(NONE, Ordering::Relaxed);
    }
}

/// Host-side inputs shared by every neighbor-loop shell.
#[derive(Clone, Copy)]
pub struct InteractionContext<'c, R: Real, const D: usize> {
    pub vars: FluidVariables<D>,
    pub consts: Constants<R, D>,
    pub cll: &'c CellLinkedList<R, D>,
    pub diagnostics: &'c Diagnostics,
}

/// Kernel-side neighbor access.
#[derive(Clone, Copy)]
struct Neighbors<'a, R: Real, const D: usize> {
    search: NeighborSearch<'a, R, D>,
    wall: IndexView<'a>,
    diagnostics: &'a Diagnostics,
}

impl<'a, R: Real, const D: usize> Neighbors<'a, R, D> {
    fn bind(ctx: &InteractionContext<'a, R, D>, registry: &'a VariableRegistry<R>) -> Self {
        let search = NeighborSearch::new(ctx.cll, registry.vector_view(ctx.vars.x), ctx.consts.kernel.cutoff())
            .with_order(registry.index_view(ctx.vars.id));
        Self {
            search,
            wall: registry.index_view(ctx.vars.wall),
            diagnostics: ctx.diagnostics,
        }
    }

    #[inline(always)]
    fn is_wall(&self, i: usize) -> bool {
        self.wall.get(i) != 0
    }

    #[inline(always)]
    fn each(&self, i: usize, visit: impl FnMut(usize, R, [R; D])) -> usize {
        match self.search.for_each_neighbor(i, visit) {
            Ok(count) => count,
            Err(_) => {
                self.diagnostics.record_overflow(i);
                0
            }
        }
    }
}

macro_rules! shell {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy)]
        pub struct $name<'c, R: Real, const D: usize>(pub InteractionContext<'c, R, D>);
    };
}

shell!(
    /// `dρ_i/dt = ρ_i Σ_j Vol_j (v_i − v_j)·∇W_ij` over fluid particles.
    /// Adds the visit count of particle `i` to its `visits` slot.
    Continuity
);

#[derive(Clone, Copy)]
pub struct ContinuityKernel<'a, R: Real, const D: usize> {
    nb: Neighbors<'a, R, D>,
    kernel: WendlandC2<R>,
    v: VectorView<'a, R, D>,
    rho: ScalarView<'a, R>,
    vol: ScalarView<'a, R>,
    drho_dt: ScalarView<'a, R>,
    visits: IndexView<'a>,
}

impl<'c, R: Real, const D: usize> LocalDynamics<R> for Continuity<'c, R, D> {
    type Kernel<'a>
        = ContinuityKernel<'a, R, D>
    where
        Self: 'a,
        R: 'a;

    fn setup<'a>(&'a self, registry: &'a VariableRegistry<R>) -> Self::Kernel<'a> {
        let vars = self.0.vars;
        ContinuityKernel {
            nb: Neighbors::bind(&self.0, registry),
            kernel: self.0.consts.kernel,
            v: registry.vector_view(vars.v),
            rho: registry.scalar_view(vars.rho),
            vol: registry.scalar_view(vars.vol),
            drho_dt: registry.scalar_view(vars.drho_dt),
            visits: registry.index_view(vars.visits),
        }
    }
}

impl<R: Real, const D: usize> ComputeKernel for ContinuityKernel<'_, R, D> {
    #[inline]
    fn compute(&self, i: usize) {
        if self.nb.is_wall(i) {
            return;
        }
        let vi = self.v.get(i);
        let mut acc = R::zero();
        let count = self.nb.each(i, |j, r, e| {
            let dv = vecn::sub(vi, self.v.get(j));
            acc += self.vol.get(j) * vecn::dot(dv, e) * self.kernel.dw(r);
        });
        self.drho_dt.set(i, self.rho.get(i) * acc);
        self.visits.set(i, self.visits.get(i) + count);
    }
}

shell!(
    /// Shepard-averaged fluid pressure on wall particles, with wall density
    /// from the inverse equation of state. No fluid in range gives `p = 0`.
    WallPressure
);

#[derive(Clone, Copy)]
pub struct WallPressureKernel<'a, R: Real, const D: usize> {
    nb: Neighbors<'a, R, D>,
    consts: Constants<R, D>,
    p: ScalarView<'a, R>,
    rho: ScalarView<'a, R>,
    m: ScalarView<'a, R>,
    vol: ScalarView<'a, R>,
}

impl<'c, R: Real, const D: usize> LocalDynamics<R> for WallPressure<'c, R, D> {
    type Kernel<'a>
        = WallPressureKernel<'a, R, D>
    where
        Self: 'a,
        R: 'a;

    fn setup<'a>(&'a self, registry: &'a VariableRegistry<R>) -> Self::Kernel<'a> {
        let vars = self.0.vars;
        WallPressureKernel {
            nb: Neighbors::bind(&self.0, registry),
            consts: self.0.consts,
            p: registry.scalar_view(vars.p),
            rho: registry.scalar_view(vars.rho),
            m: registry.scalar_view(vars.m),
            vol: registry.scalar_view(vars.vol),
        }
    }
}

impl<R: Real, const D: usize> ComputeKernel for WallPressureKernel<'_, R, D> {
    #[inline]
    fn compute(&self, i: usize) {
        if !self.nb.is_wall(i) {
            return;
        }
        let mut weighted = R::zero();
        let mut weights = R::zero();
        self.nb.each(i, |j, r, _| {
            if !self.nb.is_wall(j) {
                let w = self.consts.kernel.w(r);
                weighted += self.p.get(j) * w;
                weights += w;
            }
        });
        let p = if weights > R::zero() { weighted / weights } else { R::zero() };
        let rho = eos_density(p, self.consts.rho0, self.consts.c0);
        self.p.set(i, p);
        self.rho.set(i, rho);
        self.vol.set(i, self.m.get(i) / rho);
    }
}

shell!(
    /// `dv_i/dt = −Σ_j m_j (p_i/ρ_i² + p_j/ρ_j² + Π_ij) ∇W_ij + g` over fluid
    /// particles, with Monaghan viscosity on approaching pairs.
    Momentum
);

#[derive(Clone, Copy)]
pub struct MomentumKernel<'a, R: Real, const D: usize> {
    nb: Neighbors<'a, R, D>,
    consts: Constants<R, D>,
    v: VectorView<'a, R, D>,
    rho: ScalarView<'a, R>,
    p: ScalarView<'a, R>,
    m: ScalarView<'a, R>,
    dv_dt: VectorView<'a, R, D>,
}

impl<'c, R: Real, const D: usize> LocalDynamics<R> for Momentum<'c, R, D> {
    type Kernel<'a>
        = MomentumKernel<'a, R, D>
    where
        Self: 'a,
        R: 'a;

    fn setup<'a>(&'a self, registry: &'a VariableRegistry<R>) -> Self::Kernel<'a> {
        let vars = self.0.vars;
        MomentumKernel {
            nb: Neighbors::bind(&self.0, registry),
            consts: self.0.consts,
            v: registry.vector_view(vars.v),
            rho: registry.scalar_view(vars.rho),
            p: registry.scalar_view(vars.p),
            m: registry.scalar_view(vars.m),
            dv_dt: registry.vector_view(vars.dv_dt),
        }
    }
}

/// Monaghan artificial viscosity term `Π_ij`, zero for separating pairs.
#[inline(always)]
pub fn artificial_viscosity<R: Real, const D: usize>(
    consts: &Constants<R, D>,
    vij: [R; D],
    r: R,
    e: [R; D],
    rho_i: R,
    rho_j: R,
) -> R {
    let vx = vecn::dot(vij, e) * r;
    if vx >= R::zero() {
        return R::zero();
    }
    let h = consts.h;
    let mu = h * vx / (r * r + R::lit(0.01) * h * h);
    let rho_bar = R::lit(0.5) * (rho_i + rho_j);
    -consts.alpha * consts.c0 * mu / rho_bar
}

impl<R: Real, const D: usize> ComputeKernel for MomentumKernel<'_, R, D> {
    #[inline]
    fn compute(&self, i: usize) {
        if self.nb.is_wall(i) {
            return;
        }
        let vi = self.v.get(i);
        let rho_i = self.rho.get(i);
        let pi_term = self.p.get(i) / (rho_i * rho_i);
        let mut acc = vecn::zero::<R, D>();
        self.nb.each(i, |j, r, e| {
            let rho_j = self.rho.get(j);
            let pj_term = self.p.get(j) / (rho_j * rho_j);
            let visc = artificial_viscosity(&self.consts, vecn::sub(vi, self.v.get(j)), r, e, rho_i, rho_j);
            let f = -self.m.get(j) * (pi_term + pj_term + visc) * self.consts.kernel.dw(r);
            acc = vecn::add_scaled(acc, e, f);
        });
        self.dv_dt.set(i, vecn::add(acc, self.consts.gravity));
    }
}

shell!(
    /// Shepard-filtered fluid density written to the scratch variable.
    ShepardDensity
);

#[derive(Clone, Copy)]
pub struct ShepardDensityKernel<'a, R: Real, const D: usize> {
    nb: Neighbors<'a, R, D>,
    kernel: WendlandC2<R>,
    rho: ScalarView<'a, R>,
    vol: ScalarView<'a, R>,
    scratch: ScalarView<'a, R>,
}

impl<'c, R: Real, const D: usize> LocalDynamics<R> for ShepardDensity<'c, R, D> {
    type Kernel<'a>
        = ShepardDensityKernel<'a, R, D>
    where
        Self: 'a,
        R: 'a;

    fn setup<'a>(&'a self, registry: &'a VariableRegistry<R>) -> Self::Kernel<'a> {
        let vars = self.0.vars;
        ShepardDensityKernel {
            nb: Neighbors::bind(&self.0, registry),
            kernel: self.0.consts.kernel,
            rho: registry.scalar_view(vars.rho),
            vol: registry.scalar_view(vars.vol),
            scratch: registry.scalar_view(vars.rho_scratch),
        }
    }
}

impl<R: Real, const D: usize> ComputeKernel for ShepardDensityKernel<'_, R, D> {
    #[inline]
    fn compute(&self, i: usize) {
        if self.nb.is_wall(i) {
            return;
        }
        // Σ Vol_j ρ_j W / Σ Vol_j W, written as a correction to ρ_i so that a
        // uniform field is reproduced exactly.
        let rho_i = self.rho.get(i);
        let mut weights = self.vol.get(i) * self.kernel.w(R::zero());
        let mut excess = R::zero();
        self.nb.each(i, |j, r, _| {
            let w = self.vol.get(j) * self.kernel.w(r);
            weights += w;
            excess += w * (self.rho.get(j) - rho_i);
        });
        self.scratch.set(i, rho_i + excess / weights);
    }
}

/// Fluid-only state update without neighbor access.
#[derive(Clone, Copy)]
pub struct Update<R, const D: usize> {
    pub vars: FluidVariables<D>,
    pub consts: Constants<R, D>,
    pub step: UpdateStep<R>,
}

#[derive(Clone, Copy, Debug)]
pub enum UpdateStep<R> {
    /// `v += dt · dv/dt`
    Kick(R),
    /// `x += dt · v`
    Drift(R),
    /// `ρ += dt · dρ/dt`, then pressure and volume.
    Density(R),
    /// `ρ = ρ_scratch`, then pressure and volume.
    AdoptScratch,
}

#[derive(Clone, Copy)]
pub struct UpdateKernel<'a, R: Real, const D: usize> {
    step: UpdateStep<R>,
    consts: Constants<R, D>,
    wall: IndexView<'a>,
    x: VectorView<'a, R, D>,
    v: VectorView<'a, R, D>,
    dv_dt: VectorView<'a, R, D>,
    rho: ScalarView<'a, R>,
    drho_dt: ScalarView<'a, R>,
    scratch: ScalarView<'a, R>,
    p: ScalarView<'a, R>,
    m: ScalarView<'a, R>,
    vol: ScalarView<'a, R>,
    diagnostics: Option<&'a Diagnostics>,
}

/// [`Update`] with a diagnostics sink for density checks.
#[derive(Clone, Copy)]
pub struct CheckedUpdate<'c, R, const D: usize> {
    pub update: Update<R, D>,
    pub diagnostics: &'c Diagnostics,
}

impl<R: Real, const D: usize> Update<R, D> {
    fn bind<'a>(&self, registry: &'a VariableRegistry<R>, diagnostics: Option<&'a Diagnostics>) -> UpdateKernel<'a, R, D> {
        let vars = self.vars;
        UpdateKernel {
            step: self.step,
            consts: self.consts,
            wall: registry.index_view(vars.wall),
            x: registry.vector_view(vars.x),
            v: registry.vector_view(vars.v),
            dv_dt: registry.vector_view(vars.dv_dt),
            rho: registry.scalar_view(vars.rho),
            drho_dt: registry.scalar_view(vars.drho_dt),
            scratch: registry.scalar_view(vars.rho_scratch),
            p: registry.scalar_view(vars.p),
            m: registry.scalar_view(vars.m),
            vol: registry.scalar_view(vars.vol),
            diagnostics,
        }
    }
}

impl<R: Real, const D: usize> LocalDynamics<R> for Update<R, D> {
    type Kernel<'a>
        = UpdateKernel<'a, R, D>
    where
        Self: 'a,
        R: 'a;

    fn setup<'a>(&'a self, registry: &'a VariableRegistry<R>) -> Self::Kernel<'a> {
        self.bind(registry, None)
    }
}

impl<'c, R: Real, const D: usize> LocalDynamics<R> for CheckedUpdate<'c, R, D> {
    type Kernel<'a>
        = UpdateKernel<'a, R, D>
    where
        Self: 'a,
        R: 'a;

    fn setup<'a>(&'a self, registry: &'a VariableRegistry<R>) -> Self::Kernel<'a> {
        self.update.bind(registry, Some(self.diagnostics))
    }
}

impl<R: Real, const D: usize> UpdateKernel<'_, R, D> {
    #[inline(always)]
    fn set_density(&self, i: usize, rho: R) {
        if !(rho > R::zero()) {
            if let Some(d) = self.diagnostics {
                d.record_bad_density(i);
            }
        }
        self.rho.set(i, rho);
        self.p.set(i, eos_pressure(rho, self.consts.rho0, self.consts.c0));
        self.vol.set(i, self.m.get(i) / rho);
    }
}

impl<R: Real, const D: usize> ComputeKernel for UpdateKernel<'_, R, D> {
    #[inline]
    fn compute(&self, i: usize) {
        if self.wall.get(i) != 0 {
            return;
        }
        match self.step {
            UpdateStep::Kick(dt) => self.v.set(i, vecn::add_scaled(self.v.get(i), self.dv_dt.get(i), dt)),
            UpdateStep::Drift(dt) => self.x.set(i, vecn::add_scaled(self.x.get(i), self.v.get(i), dt)),
            UpdateStep::Density(dt) => self.set_density(i, self.rho.get(i) + dt * self.drho_dt.get(i)),
            UpdateStep::AdoptScratch => self.set_density(i, self.scratch.get(i)),
        }
    }
}

/// Which fluid vector field a [`MaxNorm`] reduction scans.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    Velocity,
    Acceleration,
}

/// Exact maximum of `|v|` or `|dv/dt|` over fluid particles.
#[derive(Clone, Copy)]
pub struct MaxNorm<const D: usize> {
    pub vars: FluidVariables<D>,
    pub field: Field,
}

#[derive(Clone, Copy)]
pub struct MaxNormKernel<'a, R: Real, const D: usize> {
    wall: IndexView<'a>,
    values: VectorView<'a, R, D>,
}

impl<R: Real, const D: usize> ReduceDynamics<R> for MaxNorm<D> {
    type Kernel<'a>
        = MaxNormKernel<'a, R, D>
    where
        Self: 'a,
        R: 'a;

    fn setup<'a>(&'a self, registry: &'a VariableRegistry<R>) -> Self::Kernel<'a> {
        let field = match self.field {
            Field::Velocity => self.vars.v,
            Field::Acceleration => self.vars.dv_dt,
        };
        MaxNormKernel {
            wall: registry.index_view(self.vars.wall),
            values: registry.vector_view(field),
        }
    }
}

impl<R: Real, const D: usize> ReduceKernel for MaxNormKernel<'_, R, D> {
    type Value = R;

    fn identity(&self) -> R {
        R::zero()
    }

    #[inline]
    fn transform(&self, i: usize) -> R {
        if self.wall.get(i) != 0 {
            R::zero()
        } else {
            vecn::norm(self.values.get(i))
        }
    }

    // NaN propagates so that a blown-up state is never mistaken for rest.
    fn combine(&self, a: R, b: R) -> R {
        if a.is_nan() || b.is_nan() {
            R::nan()
        } else {
            a.max(b)
        }
    }
}

/// Sum of an index variable (used for the visit counter).
#[derive(Clone, Copy)]
pub struct IndexSum(pub crate::variables::IndexVar);

#[derive(Clone, Copy)]
pub struct IndexSumKernel<'a>(IndexView<'a>);

impl<R: Real> ReduceDynamics<R> for IndexSum {
    type Kernel<'a>
        = IndexSumKernel<'a>
    where
        Self: 'a,
        R: 'a;

    fn setup<'a>(&'a self, registry: &'a VariableRegistry<R>) -> Self::Kernel<'a> {
        IndexSumKernel(registry.index_view(self.0))
    }
}

impl ReduceKernel for IndexSumKernel<'_> {
    type Value = u64;

    fn identity(&self) -> u64 {
        0
    }

    fn transform(&self, i: usize) -> u64 {
        self.0.get(i) as u64
    }

    fn combine(&self, a: u64, b: u64) -> u64 {
        a + b
    }
}
