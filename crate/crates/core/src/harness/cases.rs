//! Lattice particle placement for the benchmark cases.

use crate::harness::config::{CaseConfig, ConfigError};
use crate::physics::{ParticleSet, PhysicsParams};

/// A case ready to hand to the solver.
#[derive(Clone, Debug)]
pub struct BuiltCase<const D: usize> {
    pub particles: ParticleSet<D>,
    pub params: PhysicsParams<D>,
    /// Bounding box of every particle, walls included.
    pub lower: [f64; D],
    pub upper: [f64; D],
    pub probes: Vec<[f64; D]>,
}

/// `start + (i + ½) dp` for every `i` that stays below `start + extent`.
pub fn axis_points(start: f64, extent: f64, dp: f64) -> Vec<f64> {
    let count = (extent / dp - 0.5 - 1e-9).ceil().max(0.0) as usize;
    (0..count).map(|i| start + (i as f64 + 0.5) * dp).collect()
}

fn for_each_point<const D: usize>(axes: &[Vec<f64>; D], mut f: impl FnMut([f64; D])) {
    if axes.iter().any(Vec::is_empty) {
        return;
    }
    let mut idx = [0usize; D];
    loop {
        f(std::array::from_fn(|k| axes[k][idx[k]]));
        let mut k = D;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn inside(point: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    point.iter().zip(lo.iter().zip(hi)).all(|(&p, (&l, &h))| p > l && p < h)
}

/// Builds any case whose dimension is `D`.
pub fn build_case<const D: usize>(cfg: &CaseConfig) -> Result<BuiltCase<D>, ConfigError> {
    cfg.validate()?;
    if cfg.dimension() != D {
        return Err(ConfigError::Invalid(format!(
            "case `{}` is {}-dimensional, expected {D}",
            cfg.case,
            cfg.dimension()
        )));
    }
    let dp = cfg.dp;
    let cell_volume = dp.powi(D as i32);
    let layers = cfg.layers();
    let c0 = cfg.sound_speed();
    let vertical = D - 1;
    let water_top = cfg.water_max[vertical];
    let mut particles = ParticleSet::default();

    let fluid_axes: [Vec<f64>; D] =
        std::array::from_fn(|k| axis_points(cfg.water_min[k], cfg.water_max[k] - cfg.water_min[k], dp));
    for_each_point(&fluid_axes, |x| {
        if let Some((lo, hi)) = &cfg.obstacle {
            if inside(&x, lo, hi) {
                return;
            }
        }
        let rho = if cfg.hydrostatic_init {
            cfg.rho0 + cfg.rho0 * cfg.gravity * (water_top - x[vertical]) / (c0 * c0)
        } else {
            cfg.rho0
        };
        particles.push(x, rho, rho * cell_volume, false);
    });

    let wall_mass = cfg.rho0 * cell_volume;
    let tank_axes: [Vec<f64>; D] = std::array::from_fn(|k| {
        let mut axis: Vec<f64> = (0..layers).rev().map(|l| -(l as f64 + 0.5) * dp).collect();
        axis.extend(axis_points(0.0, cfg.domain[k], dp));
        axis.extend((0..layers).map(|l| cfg.domain[k] + (l as f64 + 0.5) * dp));
        axis
    });
    for_each_point(&tank_axes, |x| {
        if (0..D).any(|k| x[k] < 0.0 || x[k] > cfg.domain[k]) {
            particles.push(x, cfg.rho0, wall_mass, true);
        }
    });

    if let Some((lo, hi)) = &cfg.obstacle {
        let axes: [Vec<f64>; D] = std::array::from_fn(|k| axis_points(lo[k], hi[k] - lo[k], dp));
        for_each_point(&axes, |x| particles.push(x, cfg.rho0, wall_mass, true));
    }

    let mut gravity = [0.0; D];
    gravity[vertical] = -cfg.gravity;
    let mut params = PhysicsParams::water(dp, cfg.h_ratio, c0, gravity);
    params.rho0 = cfg.rho0;
    params.alpha = cfg.alpha;
    params.acoustic_cfl = cfg.acoustic_cfl;
    params.advective_cfl = cfg.advective_cfl;
    params.dt_max = cfg.dt_max;
    params.fixed_dt = cfg.fixed_dt;
    params.reinit_every = cfg.reinit_every;
    params.sort_every = cfg.sort_every;
    params.validate().map_err(ConfigError::Invalid)?;

    let pad = layers as f64 * dp;
    Ok(BuiltCase {
        particles,
        params,
        lower: [-pad; D],
        upper: std::array::from_fn(|k| cfg.domain[k] + pad),
        probes: cfg.probes.iter().map(|p| std::array::from_fn(|k| p[k])).collect(),
    })
}

pub fn build_case_dambreak_2d(cfg: &CaseConfig) -> Result<BuiltCase<2>, ConfigError> {
    build_case::<2>(cfg)
}

pub fn build_case_dambreak_3d_obstacle(cfg: &CaseConfig) -> Result<BuiltCase<3>, ConfigError> {
    if cfg.obstacle.is_none() {
        return Err(ConfigError::Invalid(format!("case `{}` defines no obstacle", cfg.case)));
    }
    build_case::<3>(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_axis_counts() {
        assert_eq!(axis_points(0.0, 2.0, 0.025).len(), 80);
        assert_eq!(axis_points(0.0, 0.55, 0.02).len(), 27);
        assert_eq!(axis_points(1.992, 1.228, 0.02).len(), 61);
        assert_eq!(axis_points(0.0, 0.01, 0.025).len(), 0);
        assert_eq!(axis_points(1.0, 1.0, 0.5), vec![1.25, 1.75]);
    }

    #[test]
    fn dambreak_2d_fluid_count_and_placement() {
        let cfg = CaseConfig::resolve("dambreak2d").unwrap();
        let case = build_case_dambreak_2d(&cfg).unwrap();
        let set = &case.particles;
        assert_eq!(set.fluid_count(), 3200);
        assert!(set.velocities.iter().all(|v| *v == [0.0, 0.0]));
        for (x, wall) in set.positions.iter().zip(&set.wall) {
            if !wall {
                assert!(x[0] > 0.0 && x[0] < 5.366 && x[1] > 0.0 && x[1] < 5.366);
            } else {
                assert!(x[0] < 0.0 || x[0] > 5.366 || x[1] < 0.0 || x[1] > 5.366);
            }
        }
        // three closed layers around the tank
        let side = axis_points(0.0, 5.366, 0.025).len() + 6;
        assert_eq!(set.wall_count(), side * side - (side - 6) * (side - 6));
    }

    #[test]
    fn obstacle_case_excludes_fluid_from_obstacle() {
        let cfg = CaseConfig::resolve("dambreak3d-obstacle").unwrap();
        let case = build_case_dambreak_3d_obstacle(&cfg).unwrap();
        let (lo, hi) = cfg.obstacle.clone().unwrap();
        let fluid_inside = case
            .particles
            .positions
            .iter()
            .zip(&case.particles.wall)
            .filter(|(x, w)| !**w && inside(&x[..], &lo, &hi))
            .count();
        assert_eq!(fluid_inside, 0);
        assert_eq!(case.probes.len(), cfg.probes.len());
        assert_eq!(case.particles.fluid_count(), 31 * 25 * 14);
    }

    #[test]
    fn fine_3d_lattice_is_enumerated_exactly() {
        let mut cfg = CaseConfig::resolve("dambreak3d-obstacle").unwrap();
        cfg.dp = 0.02;
        let case = build_case_dambreak_3d_obstacle(&cfg).unwrap();
        assert_eq!(case.particles.fluid_count(), 61 * 50 * 27);
        let volume_estimate = 1.228 * 1.0 * 0.55 / 0.02f64.powi(3);
        assert!((case.particles.fluid_count() as f64 / volume_estimate - 1.0).abs() < 0.05);
    }

    #[test]
    fn hydrostatic_start_is_denser_at_depth() {
        let cfg = CaseConfig::resolve("hydrostatic").unwrap();
        let case = build_case::<2>(&cfg).unwrap();
        let set = &case.particles;
        let (mut top, mut bottom) = (0.0, 0.0);
        for i in 0..set.len() {
            if !set.wall[i] {
                let z = set.positions[i][1];
                if z > 0.98 {
                    top = set.densities[i];
                }
                if z < 0.02 {
                    bottom = set.densities[i];
                }
                assert_eq!(set.masses[i], set.densities[i] * 0.02f64.powi(2));
            }
        }
        assert!(bottom > top && top > 1000.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let cfg = CaseConfig::resolve("dambreak2d").unwrap();
        assert!(build_case::<3>(&cfg).is_err());
        assert!(build_case_dambreak_3d_obstacle(&cfg).is_err());
    }
}
