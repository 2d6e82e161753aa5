//! Fluid state registration and run constants.

use crate::physics::kernel::WendlandC2;
use crate::real::Real;
use crate::variables::{IndexVar, ScalarVar, SingularValue, VariableError, VariableRegistry, VectorVar};

pub const POSITION: &str = "x";
pub const VELOCITY: &str = "v";
pub const DENSITY: &str = "rho";
pub const PRESSURE: &str = "p";
pub const MASS: &str = "m";
pub const VOLUME: &str = "vol";
pub const DENSITY_RATE: &str = "drho_dt";
pub const ACCELERATION: &str = "dv_dt";
pub const WALL: &str = "wall";
pub const DENSITY_SCRATCH: &str = "rho_shepard";
pub const VISITS: &str = "visits";

/// Variables that never carry state across a step boundary and are
/// therefore skipped when particles are reordered.
pub const SORT_EXEMPT: [&str; 3] = [DENSITY_RATE, DENSITY_SCRATCH, VISITS];

/// Handles to every per-particle field used by the solver.
#[derive(Clone, Copy, Debug)]
pub struct FluidVariables<const D: usize> {
    pub x: VectorVar<D>,
    pub v: VectorVar<D>,
    pub rho: ScalarVar,
    pub p: ScalarVar,
    pub m: ScalarVar,
    pub vol: ScalarVar,
    pub drho_dt: ScalarVar,
    pub dv_dt: VectorVar<D>,
    /// 1 for wall particles, 0 for fluid.
    pub wall: IndexVar,
    pub id: IndexVar,
    pub rho_scratch: ScalarVar,
    /// Per-particle neighbor visits since the last reset.
    pub visits: IndexVar,
}

impl<const D: usize> FluidVariables<D> {
    pub fn register<R: Real>(registry: &mut VariableRegistry<R>, rho0: R) -> Result<Self, VariableError> {
        Ok(Self {
            x: registry.add_vector(POSITION, [R::zero(); D])?,
            v: registry.add_vector(VELOCITY, [R::zero(); D])?,
            rho: registry.add_scalar(DENSITY, rho0)?,
            p: registry.add_scalar(PRESSURE, R::zero())?,
            m: registry.add_scalar(MASS, R::zero())?,
            vol: registry.add_scalar(VOLUME, R::zero())?,
            drho_dt: registry.add_scalar(DENSITY_RATE, R::zero())?,
            dv_dt: registry.add_vector(ACCELERATION, [R::zero(); D])?,
            wall: registry.add_index(WALL, 0)?,
            id: registry.id(),
            rho_scratch: registry.add_scalar(DENSITY_SCRATCH, rho0)?,
            visits: registry.add_index(VISITS, 0)?,
        })
    }
}

/// Physical and numerical parameters of one run, in SI units.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicsParams<const D: usize> {
    pub rho0: f64,
    pub c0: f64,
    pub h: f64,
    pub dp: f64,
    pub gravity: [f64; D],
    /// Artificial viscosity coefficient.
    pub alpha: f64,
    pub acoustic_cfl: f64,
    pub advective_cfl: f64,
    pub dt_max: f64,
    /// Replaces both time-step criteria with one substep of this size.
    pub fixed_dt: Option<f64>,
    /// Shepard density reinitialization cadence in steps; 0 disables.
    pub reinit_every: u64,
    /// Particle reordering cadence in steps; 0 disables.
    pub sort_every: u64,
}

impl<const D: usize> PhysicsParams<D> {
    /// Water defaults for a given spacing, smoothing ratio and sound speed.
    pub fn water(dp: f64, h_ratio: f64, c0: f64, gravity: [f64; D]) -> Self {
        Self {
            rho0: 1000.0,
            c0,
            h: h_ratio * dp,
            dp,
            gravity,
            alpha: 0.02,
            acoustic_cfl: 0.6,
            advective_cfl: 0.25,
            dt_max: 0.01,
            fixed_dt: None,
            reinit_every: 200,
            sort_every: 100,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("rho0", self.rho0),
            ("c0", self.c0),
            ("h", self.h),
            ("dp", self.dp),
            ("acoustic_cfl", self.acoustic_cfl),
            ("advective_cfl", self.advective_cfl),
            ("dt_max", self.dt_max),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(format!("{name} must be positive and finite, got {value}"));
            }
        }
        if !(self.alpha >= 0.0) {
            return Err(format!("alpha must be non-negative, got {}", self.alpha));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(format!("fixed_dt must be positive, got {dt}"));
            }
        }
        Ok(())
    }

    pub fn cutoff(&self) -> f64 {
        2.0 * self.h
    }

    /// Registers the global symbols on `registry`.
    pub fn register_singulars<R: Real>(&self, registry: &mut VariableRegistry<R>) -> Result<(), VariableError> {
        registry.register_singular("rho0", SingularValue::Real(R::lit(self.rho0)))?;
        registry.register_singular("c0", SingularValue::Real(R::lit(self.c0)))?;
        registry.register_singular("h", SingularValue::Real(R::lit(self.h)))?;
        registry.register_singular("dp", SingularValue::Real(R::lit(self.dp)))?;
        registry.register_singular(
            "g",
            SingularValue::Tuple(self.gravity.iter().map(|&g| R::lit(g)).collect()),
        )?;
        Ok(())
    }
}

/// Run constants converted to the working precision, captured by value in
/// kernels.
#[derive(Clone, Copy, Debug)]
pub struct Constants<R, const D: usize> {
    pub rho0: R,
    pub c0: R,
    pub h: R,
    pub alpha: R,
    pub gravity: [R; D],
    pub kernel: WendlandC2<R>,
}

impl<R: Real, const D: usize> Constants<R, D> {
    pub fn new(params: &PhysicsParams<D>) -> Self {
        Self {
            rho0: R::lit(params.rho0),
            c0: R::lit(params.c0),
            h: R::lit(params.h),
            alpha: R::lit(params.alpha),
            gravity: params.gravity.map(R::lit),
            kernel: WendlandC2::new(R::lit(params.h), D),
        }
    }
}

/// Initial particle data handed to the solver.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParticleSet<const D: usize> {
    pub positions: Vec<[f64; D]>,
    pub velocities: Vec<[f64; D]>,
    pub densities: Vec<f64>,
    pub masses: Vec<f64>,
    pub wall: Vec<bool>,
}

impl<const D: usize> ParticleSet<D> {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn push(&mut self, position: [f64; D], density: f64, mass: f64, wall: bool) {
        self.positions.push(position);
        self.velocities.push([0.0; D]);
        self.densities.push(density);
        self.masses.push(mass);
        self.wall.push(wall);
    }

    pub fn fluid_count(&self) -> usize {
        self.wall.iter().filter(|w| !**w).count()
    }

    pub fn wall_count(&self) -> usize {
        self.len() - self.fluid_count()
    }
}
