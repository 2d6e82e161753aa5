//! Time integration: dual-criteria step selection and the kick-drift-kick
//! acoustic substep loop.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::execution::Executor;
use crate::neighborhood::{build_cell_linked_list, CellLinkedList, NeighborSearch, UniformGrid, MAX_BLOCK_NEIGHBORS};
use crate::physics::dynamics::{
    CheckedUpdate, Continuity, Diagnostics, Field, IndexSum, InteractionContext, MaxNorm, Momentum, ShepardDensity,
    Update, UpdateStep, WallPressure,
};
use crate::physics::eos::{compressive_energy, eos_pressure};
use crate::physics::fluid::{Constants, FluidVariables, ParticleSet, PhysicsParams, SORT_EXEMPT};
use crate::real::Real;
use crate::sorting::sort_particles;
use crate::variables::{VariableError, VariableRegistry};

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error("invalid physics parameters: {0}")]
    Config(String),
    #[error(transparent)]
    Variable(#[from] VariableError),
    #[error("particle id {id} has more than {capacity} neighbors inside the cutoff")]
    Overflow { id: usize, capacity: usize },
    #[error("non-positive density at particle id {id} (step {step}, t = {time:.6} s)")]
    NonPositiveDensity { id: usize, step: u64, time: f64 },
    #[error("maximum speed {speed:.4e} m/s exceeds 10 c0 (step {step}, t = {time:.6} s)")]
    Runaway { speed: f64, step: u64, time: f64 },
}

/// Acoustic and advective limits for the next step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeStep<R> {
    pub acoustic: R,
    pub advective: R,
    pub max_speed: R,
    pub max_acceleration: R,
}

/// `dt_ac = C_ac h / (c0 + |v|max)` and
/// `dt_adv = min(C_adv min(h/|v|max, sqrt(h/|a|max)), dt_max)`, with the
/// maxima taken over fluid particles by exact reductions.
pub fn compute_timestep<R: Real, const D: usize>(
    exec: &Executor,
    registry: &VariableRegistry<R>,
    vars: FluidVariables<D>,
    params: &PhysicsParams<D>,
) -> TimeStep<R> {
    let max_speed = exec.dispatch_reduce(&MaxNorm { vars, field: Field::Velocity }, registry);
    let max_acceleration = exec.dispatch_reduce(&MaxNorm { vars, field: Field::Acceleration }, registry);
    let h = R::lit(params.h);
    let acoustic = R::lit(params.acoustic_cfl) * h / (R::lit(params.c0) + max_speed);
    let by_speed = if max_speed > R::zero() { h / max_speed } else { R::infinity() };
    let by_force = if max_acceleration > R::zero() {
        (h / max_acceleration).sqrt()
    } else {
        R::infinity()
    };
    let advective = (R::lit(params.advective_cfl) * by_speed.min(by_force)).min(R::lit(params.dt_max));
    TimeStep {
        acoustic,
        advective,
        max_speed,
        max_acceleration,
    }
}

/// Wall-clock time spent in each solver phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimes {
    pub cell_list: Duration,
    pub interactions: Duration,
    pub integration: Duration,
    pub sorting: Duration,
}

impl PhaseTimes {
    pub fn total(&self) -> Duration {
        self.cell_list + self.interactions + self.integration + self.sorting
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    pub substeps: usize,
    pub interactions: u64,
    pub sorted: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Energy {
    pub kinetic: f64,
    pub potential: f64,
    pub compressive: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential + self.compressive
    }
}

/// One particle's output row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotRow<R, const D: usize> {
    pub id: usize,
    pub x: [R; D],
    pub v: [R; D],
    pub rho: R,
    pub p: R,
    pub wall: bool,
}

pub struct Solver<R: Real, const D: usize> {
    exec: Executor,
    registry: VariableRegistry<R>,
    vars: FluidVariables<D>,
    params: PhysicsParams<D>,
    consts: Constants<R, D>,
    cll: CellLinkedList<R, D>,
    diagnostics: Diagnostics,
    time: f64,
    steps: u64,
    substeps: u64,
    interactions: u64,
    phases: PhaseTimes,
}

impl<R: Real, const D: usize> Solver<R, D> {
    pub fn new(
        exec: Executor,
        params: PhysicsParams<D>,
        particles: &ParticleSet<D>,
        grid: UniformGrid<R, D>,
    ) -> Result<Self, PhysicsError> {
        params.validate().map_err(PhysicsError::Config)?;
        if grid.cell_size < R::lit(params.cutoff()) {
            return Err(PhysicsError::Config(format!(
                "cell size {} is smaller than the cutoff {}",
                grid.cell_size,
                params.cutoff()
            )));
        }
        let n = particles.len();
        let columns = [
            particles.velocities.len(),
            particles.densities.len(),
            particles.masses.len(),
            particles.wall.len(),
        ];
        if columns.iter().any(|&len| len != n) {
            return Err(PhysicsError::Config("particle columns differ in length".into()));
        }
        if let Some(rho) = particles.densities.iter().find(|rho| !(**rho > 0.0)) {
            return Err(PhysicsError::Config(format!("initial density must be positive, got {rho}")));
        }

        let consts = Constants::<R, D>::new(&params);
        let mut registry = VariableRegistry::new(n);
        let vars = FluidVariables::register(&mut registry, consts.rho0)?;
        params.register_singulars(&mut registry)?;

        let to_vec = |v: &[[f64; D]]| v.iter().map(|a| a.map(R::lit)).collect::<Vec<_>>();
        let rho: Vec<R> = particles.densities.iter().map(|&r| R::lit(r)).collect();
        let m: Vec<R> = particles.masses.iter().map(|&r| R::lit(r)).collect();
        registry.set_vector_values(vars.x, &to_vec(&particles.positions))?;
        registry.set_vector_values(vars.v, &to_vec(&particles.velocities))?;
        registry.set_scalar_values(vars.rho, &rho)?;
        registry.set_scalar_values(vars.m, &m)?;
        let p: Vec<R> = rho.iter().map(|&r| eos_pressure(r, consts.rho0, consts.c0)).collect();
        registry.set_scalar_values(vars.p, &p)?;
        let vol: Vec<R> = m.iter().zip(&rho).map(|(&m, &r)| m / r).collect();
        registry.set_scalar_values(vars.vol, &vol)?;
        let wall: Vec<usize> = particles.wall.iter().map(|&w| w as usize).collect();
        registry.set_index_values(vars.wall, &wall)?;

        let cll = build_cell_linked_list(&exec, registry.vector_view(vars.x), grid);
        let mut solver = Self {
            exec,
            registry,
            vars,
            params,
            consts,
            cll,
            diagnostics: Diagnostics::default(),
            time: 0.0,
            steps: 0,
            substeps: 0,
            interactions: 0,
            phases: PhaseTimes::default(),
        };
        solver.refresh_forces()?;
        solver.phases = PhaseTimes::default();
        Ok(solver)
    }

    fn context(&self) -> InteractionContext<'_, R, D> {
        InteractionContext {
            vars: self.vars,
            consts: self.consts,
            cll: &self.cll,
            diagnostics: &self.diagnostics,
        }
    }

    fn update(&self, step: UpdateStep<R>) -> Update<R, D> {
        Update {
            vars: self.vars,
            consts: self.consts,
            step,
        }
    }

    fn id_of(&self, index: usize) -> usize {
        self.registry.index_view(self.vars.id).get(index)
    }

    fn check_diagnostics(&self) -> Result<(), PhysicsError> {
        if let Some(i) = self.diagnostics.overflow() {
            return Err(PhysicsError::Overflow {
                id: self.id_of(i),
                capacity: MAX_BLOCK_NEIGHBORS,
            });
        }
        if let Some(i) = self.diagnostics.bad_density() {
            return Err(PhysicsError::NonPositiveDensity {
                id: self.id_of(i),
                step: self.steps,
                time: self.time,
            });
        }
        Ok(())
    }

    /// Recomputes wall pressure and accelerations from the current state.
    pub fn refresh_forces(&mut self) -> Result<(), PhysicsError> {
        let start = Instant::now();
        let ctx = self.context();
        self.exec.dispatch(&WallPressure(ctx), &self.registry);
        self.exec.dispatch(&Momentum(ctx), &self.registry);
        self.phases.interactions += start.elapsed();
        self.check_diagnostics()
    }

    fn rebuild_cell_list(&mut self) {
        let start = Instant::now();
        self.cll = build_cell_linked_list(&self.exec, self.registry.vector_view(self.vars.x), *self.cll.grid());
        self.phases.cell_list += start.elapsed();
    }

    /// Reorders particle storage by cell and rebuilds the cell list.
    pub fn sort(&mut self) -> Result<(), PhysicsError> {
        let start = Instant::now();
        let keys = self.cll.cell_keys().to_vec();
        sort_particles(&self.exec, &mut self.registry, &keys, &SORT_EXEMPT)?;
        self.phases.sorting += start.elapsed();
        self.rebuild_cell_list();
        Ok(())
    }

    pub fn timestep(&self) -> TimeStep<R> {
        compute_timestep(&self.exec, &self.registry, self.vars, &self.params)
    }

    fn substep(&mut self, dt: R) -> Result<(), PhysicsError> {
        let half = dt * R::lit(0.5);

        let start = Instant::now();
        self.exec.dispatch(&self.update(UpdateStep::Kick(half)), &self.registry);
        self.exec.dispatch(&self.update(UpdateStep::Drift(dt)), &self.registry);
        self.phases.integration += start.elapsed();

        self.rebuild_cell_list();

        let start = Instant::now();
        self.exec.dispatch(&Continuity(self.context()), &self.registry);
        self.phases.interactions += start.elapsed();

        let start = Instant::now();
        let density = CheckedUpdate {
            update: self.update(UpdateStep::Density(dt)),
            diagnostics: &self.diagnostics,
        };
        self.exec.dispatch(&density, &self.registry);
        self.phases.integration += start.elapsed();
        self.check_diagnostics()?;

        self.refresh_forces()?;

        let start = Instant::now();
        self.exec.dispatch(&self.update(UpdateStep::Kick(half)), &self.registry);
        self.phases.integration += start.elapsed();
        self.substeps += 1;
        Ok(())
    }

    /// Shepard density reinitialization followed by a force refresh.
    pub fn reinitialize_density(&mut self) -> Result<(), PhysicsError> {
        let start = Instant::now();
        self.exec.dispatch(&ShepardDensity(self.context()), &self.registry);
        let adopt = CheckedUpdate {
            update: self.update(UpdateStep::AdoptScratch),
            diagnostics: &self.diagnostics,
        };
        self.exec.dispatch(&adopt, &self.registry);
        self.phases.interactions += start.elapsed();
        self.check_diagnostics()?;
        self.refresh_forces()
    }

    /// Advances one advective step, never beyond `max_dt` when given.
    pub fn step(&mut self, max_dt: Option<f64>) -> Result<StepInfo, PhysicsError> {
        let every = self.params.sort_every;
        let sorted = every > 0 && self.steps > 0 && self.steps.is_multiple_of(every);
        if sorted {
            self.sort()?;
        }

        let start = Instant::now();
        let limits = self.timestep();
        self.check_speed(limits.max_speed)?;
        let (mut big_dt, mut count) = match self.params.fixed_dt {
            Some(dt) => (R::lit(dt), 1),
            None => (limits.advective, 0),
        };
        if let Some(cap) = max_dt {
            big_dt = big_dt.min(R::lit(cap));
        }
        if count == 0 {
            count = (big_dt / limits.acoustic).ceil().to_usize().unwrap_or(1).max(1);
        }
        let dt = big_dt / R::lit(count as f64);
        self.phases.integration += start.elapsed();

        for _ in 0..count {
            self.substep(dt)?;
        }

        let start = Instant::now();
        let visits = IndexSum(self.vars.visits);
        let interactions = self.exec.dispatch_reduce(&visits, &self.registry);
        let counter = self.registry.index_view(self.vars.visits);
        self.exec.particle_for(self.registry.particle_count(), move |i: usize| counter.set(i, 0));
        self.interactions += interactions;
        self.time += big_dt.as_f64();
        self.steps += 1;
        self.phases.integration += start.elapsed();

        let reinit = self.params.reinit_every;
        if reinit > 0 && self.steps.is_multiple_of(reinit) {
            self.reinitialize_density()?;
        }
        let speed = self.exec.dispatch_reduce(&MaxNorm { vars: self.vars, field: Field::Velocity }, &self.registry);
        self.check_speed(speed)?;

        Ok(StepInfo {
            dt: big_dt.as_f64(),
            substeps: count,
            interactions,
            sorted,
        })
    }

    fn check_speed(&self, speed: R) -> Result<(), PhysicsError> {
        if speed.is_nan() || speed > R::lit(10.0 * self.params.c0) {
            return Err(PhysicsError::Runaway {
                speed: speed.as_f64(),
                step: self.steps,
                time: self.time,
            });
        }
        Ok(())
    }

    pub fn executor(&self) -> &Executor {
        &self.exec
    }

    pub fn registry(&self) -> &VariableRegistry<R> {
        &self.registry
    }

    pub fn vars(&self) -> FluidVariables<D> {
        self.vars
    }

    pub fn params(&self) -> &PhysicsParams<D> {
        &self.params
    }

    pub fn cell_list(&self) -> &CellLinkedList<R, D> {
        &self.cll
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn substeps(&self) -> u64 {
        self.substeps
    }

    /// Directed neighbor visits made by the continuity pass so far.
    pub fn interactions(&self) -> u64 {
        self.interactions
    }

    pub fn phases(&self) -> PhaseTimes {
        self.phases
    }

    pub fn particle_count(&self) -> usize {
        self.registry.particle_count()
    }

    fn fluid_rows(&self) -> impl Iterator<Item = usize> + '_ {
        let wall = self.registry.index_view(self.vars.wall);
        (0..self.particle_count()).filter(move |&i| wall.get(i) == 0)
    }

    pub fn fluid_count(&self) -> usize {
        self.fluid_rows().count()
    }

    pub fn total_mass(&self) -> f64 {
        let m = self.registry.scalar_view(self.vars.m);
        self.fluid_rows().map(|i| m.get(i).as_f64()).sum()
    }

    /// `Σ m v` over fluid particles and the matching scale `Σ m |v|`.
    pub fn momentum(&self) -> ([f64; D], f64) {
        let m = self.registry.scalar_view(self.vars.m);
        let v = self.registry.vector_view(self.vars.v);
        let mut total = [0.0; D];
        let mut scale = 0.0;
        for i in self.fluid_rows() {
            let (mi, vi) = (m.get(i).as_f64(), v.get(i));
            let mut speed = 0.0;
            for k in 0..D {
                let c = vi[k].as_f64();
                total[k] += mi * c;
                speed += c * c;
            }
            scale += mi * speed.sqrt();
        }
        (total, scale)
    }

    /// Kinetic, gravitational and compressive energy of the fluid.
    pub fn energy(&self) -> Energy {
        let reg = &self.registry;
        let (m, v, x, rho) = (
            reg.scalar_view(self.vars.m),
            reg.vector_view(self.vars.v),
            reg.vector_view(self.vars.x),
            reg.scalar_view(self.vars.rho),
        );
        let mut e = Energy::default();
        for i in self.fluid_rows() {
            let mi = m.get(i).as_f64();
            let (vi, xi) = (v.get(i), x.get(i));
            for k in 0..D {
                let c = vi[k].as_f64();
                e.kinetic += 0.5 * mi * c * c;
                e.potential -= mi * self.params.gravity[k] * xi[k].as_f64();
            }
            e.compressive += mi * compressive_energy(rho.get(i).as_f64(), self.params.rho0, self.params.c0);
        }
        e
    }

    /// Kernel-weighted average of fluid pressure around `point`; zero when
    /// no fluid particle is in range.
    pub fn probe_pressure(&self, point: [f64; D]) -> Result<f64, PhysicsError> {
        let reg = &self.registry;
        let search = NeighborSearch::new(&self.cll, reg.vector_view(self.vars.x), self.consts.kernel.cutoff())
            .with_order(reg.index_view(self.vars.id));
        let (wall, p) = (reg.index_view(self.vars.wall), reg.scalar_view(self.vars.p));
        let (mut weighted, mut weights) = (0.0, 0.0);
        search
            .for_each_within(point.map(R::lit), |j, r, _| {
                if wall.get(j) == 0 {
                    let w = self.consts.kernel.w(r).as_f64();
                    weighted += p.get(j).as_f64() * w;
                    weights += w;
                }
            })
            .map_err(|_| PhysicsError::Overflow {
                id: usize::MAX,
                capacity: MAX_BLOCK_NEIGHBORS,
            })?;
        Ok(if weights > 0.0 { weighted / weights } else { 0.0 })
    }

    /// Every particle's state, ordered by id.
    pub fn snapshot(&self) -> Vec<SnapshotRow<R, D>> {
        let reg = &self.registry;
        let (id, x, v, rho, p, wall) = (
            reg.index_view(self.vars.id),
            reg.vector_view(self.vars.x),
            reg.vector_view(self.vars.v),
            reg.scalar_view(self.vars.rho),
            reg.scalar_view(self.vars.p),
            reg.index_view(self.vars.wall),
        );
        let mut rows: Vec<_> = (0..self.particle_count())
            .map(|i| SnapshotRow {
                id: id.get(i),
                x: x.get(i),
                v: v.get(i),
                rho: rho.get(i),
                p: p.get(i),
                wall: wall.get(i) != 0,
            })
            .collect();
        rows.sort_unstable_by_key(|r| r.id);
        rows
    }
}
