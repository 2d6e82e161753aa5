//! Oracles and fixtures shared by the integration tests and the acceptance
//! runner.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wcsph::execution::{ExecutionPolicy, Executor};
use wcsph::harness::{build_solver, write_snapshot, CaseConfig, PolicyKind};
use wcsph::neighborhood::{brute_force_neighbors, build_cell_linked_list, NeighborSearch, UniformGrid};
use wcsph::physics::dynamics::{Continuity, InteractionContext, Momentum};
use wcsph::physics::{Constants, Diagnostics, ParticleSet, PhysicsParams, Solver};
use wcsph::variables::VariableRegistry;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn policies() -> Vec<ExecutionPolicy> {
    vec![
        ExecutionPolicy::Sequenced,
        ExecutionPolicy::Parallel { workers: 4 },
        ExecutionPolicy::Parallel { workers: 16 },
        ExecutionPolicy::ParallelDevice { workers: 8 },
    ]
}

pub fn random_cloud<const D: usize>(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<[f64; D]> {
    (0..n)
        .map(|_| std::array::from_fn(|_| rng.gen_range(0.0..extent)))
        .collect()
}

/// Checks every particle's visit set against the O(N) reference and that
/// visits arrive in ascending index order.
pub fn check_neighbor_sets<const D: usize>(
    exec: &Executor,
    positions: &[[f64; D]],
    extent: f64,
    cutoff: f64,
) -> Result<(), String> {
    let n = positions.len();
    let mut registry = VariableRegistry::<f64>::new(n);
    let x = registry.add_vector("x", [0.0; D]).unwrap();
    registry.set_vector_values(x, positions).unwrap();
    let grid = UniformGrid::covering([0.0; D], [extent; D], cutoff);
    let cll = build_cell_linked_list(exec, registry.vector_view(x), grid);
    let search = NeighborSearch::new(&cll, registry.vector_view(x), cutoff);
    for i in 0..n {
        let mut seen = Vec::new();
        search
            .for_each_neighbor(i, |j, _, _| seen.push(j))
            .map_err(|e| format!("particle {i}: {e}"))?;
        if seen.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("particle {i}: visits not strictly ascending"));
        }
        let got: BTreeSet<usize> = seen.into_iter().collect();
        let want = brute_force_neighbors(i, positions, cutoff);
        if got != want {
            let missing: Vec<_> = want.difference(&got).collect();
            let extra: Vec<_> = got.difference(&want).collect();
            return Err(format!("particle {i}: missing {missing:?}, extra {extra:?}"));
        }
    }
    Ok(())
}

/// Stable comparison-based reference permutation.
pub fn reference_permutation(keys: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]).then(a.cmp(&b)));
    order
}

// ---------------------------------------------------------------------------
// Physics oracle
// ---------------------------------------------------------------------------

pub const ORACLE_H: f64 = 0.013;

/// `n` particles scattered over a small box, a fifth of them walls, with
/// random density and velocity.
pub fn random_particles(seed: u64, n: usize) -> ParticleSet<2> {
    let mut rng = rng(seed);
    let mut set = ParticleSet::default();
    let extent = 0.14;
    for k in 0..n {
        let x = [rng.gen_range(0.0..extent), rng.gen_range(0.0..extent)];
        let rho = rng.gen_range(990.0..1010.0);
        let mass = rho * 0.01 * 0.01 * rng.gen_range(0.9..1.1);
        set.push(x, rho, mass, k % 5 == 0);
    }
    for (v, &wall) in set.velocities.iter_mut().zip(&set.wall) {
        if !wall {
            *v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        }
    }
    set
}

pub fn oracle_params() -> PhysicsParams<2> {
    let mut p = PhysicsParams::water(ORACLE_H / 1.3, 1.3, 20.0, [0.0, -9.81]);
    p.alpha = 0.1;
    p.sort_every = 0;
    p.reinit_every = 0;
    p
}

pub fn oracle_solver(exec: Executor, set: &ParticleSet<2>) -> Solver<f64, 2> {
    let params = oracle_params();
    let grid = UniformGrid::covering([-0.05, -0.05], [0.2, 0.2], params.cutoff());
    Solver::new(exec, params, set, grid).unwrap()
}

/// State gathered by particle id.
pub struct Gathered {
    pub x: Vec<[f64; 2]>,
    pub v: Vec<[f64; 2]>,
    pub rho: Vec<f64>,
    pub p: Vec<f64>,
    pub m: Vec<f64>,
    pub vol: Vec<f64>,
    pub wall: Vec<bool>,
    pub drho_dt: Vec<f64>,
    pub dv_dt: Vec<[f64; 2]>,
}

pub fn gather(solver: &Solver<f64, 2>) -> Gathered {
    let reg = solver.registry();
    let vars = solver.vars();
    let ids = reg.index_values(vars.id);
    let by_id = |values: Vec<f64>| -> Vec<f64> {
        let mut out = vec![0.0; values.len()];
        ids.iter().zip(values).for_each(|(&id, v)| out[id] = v);
        out
    };
    let by_id_vec = |values: Vec<[f64; 2]>| -> Vec<[f64; 2]> {
        let mut out = vec![[0.0; 2]; values.len()];
        ids.iter().zip(values).for_each(|(&id, v)| out[id] = v);
        out
    };
    let mut wall = vec![false; ids.len()];
    ids.iter()
        .zip(reg.index_values(vars.wall))
        .for_each(|(&id, w)| wall[id] = w != 0);
    Gathered {
        x: by_id_vec(reg.vector_values(vars.x)),
        v: by_id_vec(reg.vector_values(vars.v)),
        rho: by_id(reg.scalar_values(vars.rho)),
        p: by_id(reg.scalar_values(vars.p)),
        m: by_id(reg.scalar_values(vars.m)),
        vol: by_id(reg.scalar_values(vars.vol)),
        wall,
        drho_dt: by_id(reg.scalar_values(vars.drho_dt)),
        dv_dt: by_id_vec(reg.vector_values(vars.dv_dt)),
    }
}

/// Runs the continuity and momentum kernels once under the solver's policy.
pub fn evaluate_rates(solver: &Solver<f64, 2>) {
    let diagnostics = Diagnostics::default();
    let ctx = InteractionContext {
        vars: solver.vars(),
        consts: Constants::new(solver.params()),
        cll: solver.cell_list(),
        diagnostics: &diagnostics,
    };
    solver.executor().dispatch(&Continuity(ctx), solver.registry());
    solver.executor().dispatch(&Momentum(ctx), solver.registry());
    assert_eq!(diagnostics.overflow(), None);
}

struct Pair {
    j: usize,
    r: f64,
    e: [f64; 2],
}

/// O(N²) scan in ascending id, with the same floating-point expression
/// order as the solver's kernels.
fn pairs(s: &Gathered, i: usize, h: f64) -> Vec<Pair> {
    let cutoff = h + h;
    let mut out = Vec::new();
    for j in 0..s.x.len() {
        if j == i {
            continue;
        }
        let d = [s.x[i][0] - s.x[j][0], s.x[i][1] - s.x[j][1]];
        let r_sq = d[0] * d[0] + d[1] * d[1];
        if r_sq < cutoff * cutoff {
            let r = r_sq.sqrt();
            let e = if r > 0.0 {
                let inv = 1.0 / r;
                [d[0] * inv, d[1] * inv]
            } else {
                [0.0, 0.0]
            };
            out.push(Pair { j, r, e });
        }
    }
    out
}

fn wendland_dw(r: f64, h: f64) -> f64 {
    let alpha = 7.0 / (4.0 * PI * h * h);
    let inv_h = 1.0 / h;
    let q = r * inv_h;
    if q >= 2.0 {
        return 0.0;
    }
    let t = 1.0 - q * 0.5;
    -5.0 * alpha * q * t * t * t * inv_h
}

pub struct OracleRates {
    pub drho_dt: Vec<f64>,
    pub dv_dt: Vec<[f64; 2]>,
    pub visits: u64,
}

pub fn oracle_rates(s: &Gathered, params: &PhysicsParams<2>) -> OracleRates {
    let h = params.h;
    let n = s.x.len();
    let mut drho_dt = vec![0.0; n];
    let mut dv_dt = vec![[0.0; 2]; n];
    let mut visits = 0;
    for i in 0..n {
        if s.wall[i] {
            continue;
        }
        let nb = pairs(s, i, h);
        visits += nb.len() as u64;

        let mut acc = 0.0;
        for pr in &nb {
            let dv = [s.v[i][0] - s.v[pr.j][0], s.v[i][1] - s.v[pr.j][1]];
            let dot = dv[0] * pr.e[0] + dv[1] * pr.e[1];
            acc += s.vol[pr.j] * dot * wendland_dw(pr.r, h);
        }
        drho_dt[i] = s.rho[i] * acc;

        let pi_term = s.p[i] / (s.rho[i] * s.rho[i]);
        let mut a = [0.0; 2];
        for pr in &nb {
            let j = pr.j;
            let pj_term = s.p[j] / (s.rho[j] * s.rho[j]);
            let vij = [s.v[i][0] - s.v[j][0], s.v[i][1] - s.v[j][1]];
            let vx = (vij[0] * pr.e[0] + vij[1] * pr.e[1]) * pr.r;
            let visc = if vx < 0.0 {
                let mu = h * vx / (pr.r * pr.r + 0.01 * h * h);
                -params.alpha * params.c0 * mu / (0.5 * (s.rho[i] + s.rho[j]))
            } else {
                0.0
            };
            let f = -s.m[j] * (pi_term + pj_term + visc) * wendland_dw(pr.r, h);
            a = [a[0] + pr.e[0] * f, a[1] + pr.e[1] * f];
        }
        dv_dt[i] = [a[0] + params.gravity[0], a[1] + params.gravity[1]];
    }
    OracleRates { drho_dt, dv_dt, visits }
}

/// Compares the solver's rates with the oracle bit for bit; returns the
/// number of fluid particles checked.
pub fn check_physics_oracle(exec: Executor, seed: u64) -> Result<usize, String> {
    let set = random_particles(seed, 200);
    let mut solver = oracle_solver(exec, &set);
    // Move storage away from id order so the id-ordered visit is exercised.
    solver.sort().map_err(|e| e.to_string())?;
    evaluate_rates(&solver);
    let state = gather(&solver);
    let want = oracle_rates(&state, solver.params());
    let mut checked = 0;
    for i in 0..state.x.len() {
        if state.wall[i] {
            continue;
        }
        checked += 1;
        if state.drho_dt[i].to_bits() != want.drho_dt[i].to_bits() {
            return Err(format!("drho/dt of {i}: {} vs oracle {}", state.drho_dt[i], want.drho_dt[i]));
        }
        let (got, exp) = (state.dv_dt[i], want.dv_dt[i]);
        if got[0].to_bits() != exp[0].to_bits() || got[1].to_bits() != exp[1].to_bits() {
            return Err(format!("dv/dt of {i}: {got:?} vs oracle {exp:?}"));
        }
    }
    Ok(checked)
}

// ---------------------------------------------------------------------------
// Dam-break fixtures
// ---------------------------------------------------------------------------

pub fn dambreak_config(policy: ExecutionPolicy) -> CaseConfig {
    let mut cfg = CaseConfig::resolve("dambreak2d").unwrap();
    let (kind, workers) = match policy {
        ExecutionPolicy::Sequenced => (PolicyKind::Seq, 1),
        ExecutionPolicy::Parallel { workers } => (PolicyKind::Par, workers),
        ExecutionPolicy::ParallelDevice { workers } => (PolicyKind::Device, workers),
    };
    cfg.policy = kind;
    cfg.workers = workers;
    cfg
}

pub struct StepResult {
    pub state: std::collections::BTreeMap<String, Vec<u64>>,
    pub snapshot: Vec<u8>,
    pub interactions: u64,
}

/// Builds the dam-break under `cfg` and advances it `steps` steps.
pub fn run_steps(cfg: &CaseConfig, steps: usize) -> StepResult {
    let (mut solver, _) = build_solver::<f64, 2>(cfg).unwrap();
    for _ in 0..steps {
        solver.step(None).unwrap();
    }
    let mut snapshot = Vec::new();
    write_snapshot(&mut snapshot, &solver.snapshot()).unwrap();
    StepResult {
        state: solver.registry().state_bits(),
        snapshot,
        interactions: solver.interactions(),
    }
}

/// First difference between two runs, if any.
pub fn first_difference(a: &StepResult, b: &StepResult) -> Option<String> {
    for (name, bits) in &a.state {
        match b.state.get(name) {
            Some(other) if other == bits => {}
            Some(other) => {
                let k = bits.iter().zip(other).position(|(x, y)| x != y).unwrap_or(0);
                return Some(format!("variable `{name}` differs at slot {k}"));
            }
            None => return Some(format!("variable `{name}` missing")),
        }
    }
    if a.snapshot != b.snapshot {
        return Some("snapshot bytes differ".into());
    }
    if a.interactions != b.interactions {
        return Some(format!("interaction counts {} vs {}", a.interactions, b.interactions));
    }
    None
}

// ---------------------------------------------------------------------------
// Conservation fixtures
// ---------------------------------------------------------------------------

/// A free square blob of fluid with random velocities, no walls, no gravity.
pub fn isolated_cloud(seed: u64) -> (ParticleSet<2>, PhysicsParams<2>) {
    let mut rng = rng(seed);
    let dp = 0.01;
    let mut set = ParticleSet::default();
    for i in 0..20 {
        for j in 0..20 {
            let jitter = [rng.gen_range(-0.1..0.1) * dp, rng.gen_range(-0.1..0.1) * dp];
            set.push([i as f64 * dp + jitter[0], j as f64 * dp + jitter[1]], 1000.0, 1000.0 * dp * dp, false);
        }
    }
    for v in set.velocities.iter_mut() {
        *v = [rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)];
    }
    let mut params = PhysicsParams::water(dp, 1.3, 20.0, [0.0, 0.0]);
    params.sort_every = 50;
    params.reinit_every = 0;
    (set, params)
}

pub struct Conservation {
    /// Largest `|ΔP| / Σ m|v|` over single steps.
    pub worst_momentum_drift: f64,
    pub mass_exact: bool,
}

pub fn track_conservation(exec: Executor, steps: usize) -> Conservation {
    let (set, params) = isolated_cloud(31);
    let grid = UniformGrid::covering([-1.0, -1.0], [1.2, 1.2], params.cutoff());
    let mut solver: Solver<f64, 2> = Solver::new(exec, params, &set, grid).unwrap();
    let mass = solver.total_mass();
    let mut mass_exact = true;
    let mut worst: f64 = 0.0;
    let (mut before, _) = solver.momentum();
    for _ in 0..steps {
        solver.step(None).unwrap();
        let (after, scale) = solver.momentum();
        let drift = ((after[0] - before[0]).powi(2) + (after[1] - before[1]).powi(2)).sqrt();
        worst = worst.max(drift / scale);
        before = after;
        mass_exact &= solver.total_mass().to_bits() == mass.to_bits();
    }
    Conservation {
        worst_momentum_drift: worst,
        mass_exact,
    }
}
