//! Uniform-grid cell linked list and direct neighbor search.
//!
//! The list is stored in counting-sort form: `offsets[c]..offsets[c + 1]`
//! indexes the particles of cell `c` inside `particle_ids`. It is built in
//! three phases (atomic per-cell counting, exclusive prefix sum, atomic
//! scatter), so the within-cell order is unspecified under pooled policies.
//! Neighbor queries hide that order: candidates inside the cutoff are
//! buffered and visited in ascending order of a caller-chosen key.
//!
//! The list also keeps a slot-ordered copy of the positions, one contiguous
//! array per axis. Cells adjacent along the last axis are adjacent in slot
//! order, so a query scans `3^(D-1)` contiguous runs and the distance test
//! vectorizes.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use arrayvec::ArrayVec;
use thiserror::Error;

use crate::execution::Executor;
use crate::real::{vecn, Real};
use crate::variables::{IndexView, VectorView};

/// Capacity of the per-query neighbor buffer.
pub const MAX_BLOCK_NEIGHBORS: usize = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NeighborhoodError {
    #[error("particle {particle} has more than {capacity} neighbors inside the cutoff")]
    Overflow { particle: usize, capacity: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformGrid<R, const D: usize> {
    pub origin: [R; D],
    pub cell_size: R,
    pub cells_per_axis: [usize; D],
}

/// Result of binning one position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellLocation<const D: usize> {
    pub coords: [usize; D],
    pub clamped: bool,
}

impl<R: Real, const D: usize> UniformGrid<R, D> {
    pub fn new(origin: [R; D], cell_size: R, cells_per_axis: [usize; D]) -> Self {
        assert!(cell_size > R::zero(), "cell size must be positive");
        assert!(cells_per_axis.iter().all(|&n| n > 0), "empty grid axis");
        Self {
            origin,
            cell_size,
            cells_per_axis,
        }
    }

    /// Grid over the box `[lo, hi]` plus one cell of padding on every side.
    pub fn covering(lo: [R; D], hi: [R; D], cell_size: R) -> Self {
        let origin = std::array::from_fn(|k| lo[k] - cell_size);
        let cells = std::array::from_fn(|k| {
            let span = ((hi[k] - lo[k]) / cell_size).ceil().to_usize().unwrap_or(0);
            span.max(1) + 2
        });
        Self::new(origin, cell_size, cells)
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_axis.iter().product()
    }

    /// Upper corner of the covered region.
    pub fn upper(&self) -> [R; D] {
        std::array::from_fn(|k| {
            self.origin[k] + self.cell_size * R::from_usize(self.cells_per_axis[k]).unwrap()
        })
    }

    /// Half-open, lower-inclusive binning. Positions outside the grid (or
    /// non-finite ones) are clamped to the nearest boundary cell.
    #[inline]
    pub fn locate(&self, position: [R; D]) -> CellLocation<D> {
        let mut clamped = false;
        let coords = std::array::from_fn(|k| {
            let t = ((position[k] - self.origin[k]) / self.cell_size).floor();
            let last = self.cells_per_axis[k] - 1;
            match t.to_i64() {
                Some(c) if c < 0 => {
                    clamped = true;
                    0
                }
                Some(c) if c as u64 > last as u64 => {
                    clamped = true;
                    last
                }
                Some(c) => c as usize,
                None => {
                    clamped = true;
                    if t > R::zero() {
                        last
                    } else {
                        0
                    }
                }
            }
        });
        CellLocation { coords, clamped }
    }

    /// Row-major linearization (last axis fastest).
    #[inline]
    pub fn linear_index(&self, coords: [usize; D]) -> usize {
        let mut index = 0;
        for (&cells, &c) in self.cells_per_axis.iter().zip(&coords) {
            index = index * cells + c;
        }
        index
    }

    /// Linear cell index of `position`; clamps are counted in `clamps`.
    #[inline]
    pub fn cell_index_of(&self, position: [R; D], clamps: &AtomicUsize) -> usize {
        let loc = self.locate(position);
        if loc.clamped {
            clamps.fetch_add(1, Ordering::Relaxed);
        }
        self.linear_index(loc.coords)
    }
}

#[derive(Clone, Debug)]
pub struct CellLinkedList<R, const D: usize> {
    grid: UniformGrid<R, D>,
    offsets: Vec<usize>,
    particle_ids: Vec<usize>,
    // axis-major: coordinate k of slot s is at k * n + s
    slot_coords: Vec<R>,
    cell_of: Vec<usize>,
    clamped: usize,
}

impl<R: Real, const D: usize> CellLinkedList<R, D> {
    pub fn grid(&self) -> &UniformGrid<R, D> {
        &self.grid
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn particle_ids(&self) -> &[usize] {
        &self.particle_ids
    }

    /// Linear cell index of every particle at build time; the sort keys.
    pub fn cell_keys(&self) -> &[usize] {
        &self.cell_of
    }

    /// Particles that fell outside the grid during the build.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn particle_count(&self) -> usize {
        self.particle_ids.len()
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.particle_ids[self.offsets[c]..self.offsets[c + 1]]
    }
}

/// Builds the cell linked list for `positions` under `exec`.
pub fn build_cell_linked_list<R: Real, const D: usize>(
    exec: &Executor,
    positions: VectorView<'_, R, D>,
    grid: UniformGrid<R, D>,
) -> CellLinkedList<R, D> {
    let n = positions.len();
    assert!(n <= u32::MAX as usize, "at most 2^32 - 1 particles are supported");
    let cells = grid.num_cells();
    let atomics = |len: usize| -> Vec<AtomicUsize> { (0..len).map(|_| AtomicUsize::new(0)).collect() };

    // counting
    let counts = atomics(cells);
    let cell_of = atomics(n);
    let clamps = AtomicUsize::new(0);
    {
        let (counts, cell_of, clamps, grid) = (&counts[..], &cell_of[..], &clamps, &grid);
        exec.particle_for(n, move |i: usize| {
            let c = grid.cell_index_of(positions.get(i), clamps);
            cell_of[i].store(c, Ordering::Relaxed);
            counts[c].fetch_add(1, Ordering::Relaxed);
        });
    }

    // exclusive prefix sum
    let mut offsets = Vec::with_capacity(cells + 1);
    let mut running = 0;
    offsets.push(0);
    for count in &counts {
        running += count.load(Ordering::Relaxed);
        offsets.push(running);
    }
    debug_assert_eq!(running, n);

    // scatter
    let cursors: Vec<AtomicUsize> = offsets[..cells].iter().map(|&o| AtomicUsize::new(o)).collect();
    let slots = atomics(n);
    {
        let (cursors, cell_of, slots) = (&cursors[..], &cell_of[..], &slots[..]);
        exec.particle_for(n, move |i: usize| {
            let c = cell_of[i].load(Ordering::Relaxed);
            let slot = cursors[c].fetch_add(1, Ordering::Relaxed);
            slots[slot].store(i, Ordering::Relaxed);
        });
    }

    let particle_ids: Vec<usize> = slots.into_iter().map(AtomicUsize::into_inner).collect();
    let mut slot_coords = vec![R::zero(); D * n];
    for (s, &i) in particle_ids.iter().enumerate() {
        let x = positions.get(i);
        for k in 0..D {
            slot_coords[k * n + s] = x[k];
        }
    }

    CellLinkedList {
        grid,
        offsets,
        particle_ids,
        slot_coords,
        cell_of: cell_of.into_iter().map(AtomicUsize::into_inner).collect(),
        clamped: clamps.into_inner(),
    }
}

const SCAN_CHUNK: usize = 64;

#[derive(Clone, Copy)]
struct Candidate<R> {
    slot: u32,
    r_sq: R,
}

/// Direct neighbor search over a built [`CellLinkedList`].
///
/// Kernel values are never cached; callers recompute them inside `visit`.
/// The list must have been built from the current `positions`.
pub struct NeighborSearch<'a, R: Real, const D: usize> {
    cll: &'a CellLinkedList<R, D>,
    positions: VectorView<'a, R, D>,
    order: Option<IndexView<'a>>,
    cutoff: R,
}

impl<R: Real, const D: usize> Clone for NeighborSearch<'_, R, D> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<R: Real, const D: usize> Copy for NeighborSearch<'_, R, D> {}

impl<'a, R: Real, const D: usize> NeighborSearch<'a, R, D> {
    pub fn new(cll: &'a CellLinkedList<R, D>, positions: VectorView<'a, R, D>, cutoff: R) -> Self {
        debug_assert!(cutoff <= cll.grid.cell_size);
        Self {
            cll,
            positions,
            order: None,
            cutoff,
        }
    }

    /// Visit neighbors in ascending `order[j]` instead of ascending `j`.
    pub fn with_order(mut self, order: IndexView<'a>) -> Self {
        self.order = Some(order);
        self
    }

    pub fn cutoff(&self) -> R {
        self.cutoff
    }

    /// Calls `visit(j, r_ij, e_ij)` once for every `j != i` with
    /// `|x_i - x_j| < cutoff`, where `e_ij = (x_i - x_j) / r_ij` (zero when
    /// the particles coincide). Returns the number of visits.
    #[inline]
    pub fn for_each_neighbor<F>(&self, i: usize, visit: F) -> Result<usize, NeighborhoodError>
    where
        F: FnMut(usize, R, [R; D]),
    {
        self.search(self.positions.get(i), Some(i), i, visit)
    }

    /// Same as [`NeighborSearch::for_each_neighbor`] around an arbitrary
    /// point; no particle is skipped. Overflow is reported as particle
    /// `usize::MAX`.
    pub fn for_each_within<F>(&self, point: [R; D], visit: F) -> Result<usize, NeighborhoodError>
    where
        F: FnMut(usize, R, [R; D]),
    {
        self.search(point, None, usize::MAX, visit)
    }

    #[inline]
    fn search<F>(&self, xi: [R; D], skip: Option<usize>, particle: usize, mut visit: F) -> Result<usize, NeighborhoodError>
    where
        F: FnMut(usize, R, [R; D]),
    {
        let grid = &self.cll.grid;
        let home = grid.locate(xi).coords;
        let cutoff_sq = self.cutoff * self.cutoff;
        let mut found: ArrayVec<Candidate<R>, MAX_BLOCK_NEIGHBORS> = ArrayVec::new();
        let mut keys: ArrayVec<u64, MAX_BLOCK_NEIGHBORS> = ArrayVec::new();
        let cll = self.cll;
        let n = cll.particle_ids.len();
        let last = D - 1;

        let rows = 3usize.pow(last as u32);
        'rows: for combo in 0..rows {
            let mut lo = [0usize; D];
            let mut rest = combo;
            for k in 0..last {
                let c = home[k] as isize + (rest % 3) as isize - 1;
                rest /= 3;
                if c < 0 || c as usize >= grid.cells_per_axis[k] {
                    continue 'rows;
                }
                lo[k] = c as usize;
            }
            let mut hi = lo;
            lo[last] = home[last].saturating_sub(1);
            hi[last] = (home[last] + 1).min(grid.cells_per_axis[last] - 1);
            let end = cll.offsets[grid.linear_index(hi) + 1];
            let mut start = cll.offsets[grid.linear_index(lo)];

            while start < end {
                let len = (end - start).min(SCAN_CHUNK);
                let mut sq = [R::zero(); SCAN_CHUNK];
                let sq = &mut sq[..len];
                for (k, &xk) in xi.iter().enumerate() {
                    let xs = &cll.slot_coords[k * n + start..k * n + start + len];
                    for (acc, &x) in sq.iter_mut().zip(xs) {
                        let d = xk - x;
                        *acc += d * d;
                    }
                }
                for (offset, &r_sq) in sq.iter().enumerate() {
                    if !(r_sq < cutoff_sq) {
                        continue;
                    }
                    let slot = start + offset;
                    let j = cll.particle_ids[slot];
                    if skip == Some(j) {
                        continue;
                    }
                    let key = self.order.map_or(j, |o| o.get(j));
                    debug_assert!(key < 1 << 56);
                    keys.try_push(((key as u64) << 8) | found.len() as u64)
                        .map_err(|_| NeighborhoodError::Overflow {
                            particle,
                            capacity: MAX_BLOCK_NEIGHBORS,
                        })?;
                    found.push(Candidate { slot: slot as u32, r_sq });
                }
                start += len;
            }
        }

        // Sorting packed (key, slot) words is much cheaper than moving the
        // candidates themselves.
        keys.sort_unstable();
        for packed in &keys {
            let c = found[(packed & 0xff) as usize];
            let slot = c.slot as usize;
            let disp: [R; D] = std::array::from_fn(|k| xi[k] - cll.slot_coords[k * n + slot]);
            let r = c.r_sq.sqrt();
            let e = if r > R::zero() {
                vecn::scale(disp, r.recip())
            } else {
                vecn::zero()
            };
            visit(cll.particle_ids[slot], r, e);
        }
        Ok(found.len())
    }
}

/// Neighbor visits of particle `i` in ascending index order.
pub fn for_each_neighbor<R: Real, const D: usize, F>(
    i: usize,
    positions: VectorView<'_, R, D>,
    cll: &CellLinkedList<R, D>,
    cutoff: R,
    visit: F,
) -> Result<usize, NeighborhoodError>
where
    F: FnMut(usize, R, [R; D]),
{
    NeighborSearch::new(cll, positions, cutoff).for_each_neighbor(i, visit)
}

/// O(N) reference: `{ j != i : |x_i - x_j| < cutoff }`.
pub fn brute_force_neighbors<R: Real, const D: usize>(
    i: usize,
    positions: &[[R; D]],
    cutoff: R,
) -> BTreeSet<usize> {
    let xi = positions[i];
    positions
        .iter()
        .enumerate()
        .filter(|&(j, xj)| {
            if j == i {
                return false;
            }
            let mut sq = R::zero();
            for k in 0..D {
                let d = xi[k] - xj[k];
                sq += d * d;
            }
            sq < cutoff * cutoff
        })
        .map(|(j, _)| j)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::execution::ExecutionPolicy;
    use crate::variables::VariableRegistry;

    fn registry_with<const D: usize>(points: &[[f64; D]]) -> (VariableRegistry<f64>, crate::variables::VectorVar<D>) {
        let mut reg = VariableRegistry::new(points.len());
        let x = reg.add_vector::<D>("x", [0.0; D]).unwrap();
        reg.set_vector_values(x, points).unwrap();
        (reg, x)
    }

    #[test]
    fn binning_is_lower_inclusive() {
        let grid = UniformGrid::new([0.0f64, 0.0], 1.0, [4, 4]);
        let clamps = AtomicUsize::new(0);
        assert_eq!(grid.locate([0.5, 0.5]).coords, [0, 0]);
        assert_eq!(grid.locate([1.0, 0.0]).coords, [1, 0]);
        assert_eq!(grid.cell_index_of([1.0, 0.0], &clamps), 4);
        assert_eq!(grid.cell_index_of([0.0, 3.5], &clamps), 3);
        assert_eq!(clamps.load(Ordering::Relaxed), 0);
    }

    #[test]
    fn out_of_bounds_clamps_and_counts() {
        let grid = UniformGrid::new([0.0f64, 0.0], 1.0, [4, 4]);
        let clamps = AtomicUsize::new(0);
        assert_eq!(grid.cell_index_of([-0.1, 0.0], &clamps), 0);
        assert_eq!(clamps.load(Ordering::Relaxed), 1);
        assert_eq!(grid.locate([9.0, 2.5]).coords, [3, 2]);
        assert!(grid.locate([f64::NAN, 0.0]).clamped);
    }

    #[test]
    fn covering_pads_each_side() {
        let grid = UniformGrid::covering([0.0f64, 0.0, 0.0], [1.0, 2.0, 0.5], 0.5);
        assert_eq!(grid.origin, [-0.5, -0.5, -0.5]);
        assert_eq!(grid.cells_per_axis, [4, 6, 3]);
    }

    #[test]
    fn counts_and_offsets() {
        let pts = [[0.1, 0.1], [0.2, 0.3], [0.9, 0.9], [1.5, 0.5]];
        let (reg, x) = registry_with::<2>(&pts);
        let grid = UniformGrid::new([0.0, 0.0], 1.0, [2, 2]);
        let cll = build_cell_linked_list(&Executor::sequenced(), reg.vector_view(x), grid);
        assert_eq!(cll.offsets(), &[0, 3, 3, 4, 4]);
        assert_eq!(cll.cell(0), &[0, 1, 2]);
        assert_eq!(cll.cell(2), &[3]);
        assert_eq!(cll.clamped(), 0);
        assert_eq!(cll.cell_keys(), &[0, 0, 0, 2]);
    }

    #[test]
    fn empty_build() {
        let (reg, x) = registry_with::<2>(&[]);
        let grid = UniformGrid::new([0.0, 0.0], 1.0, [3, 3]);
        let exec = Executor::new(ExecutionPolicy::Parallel { workers: 2 }).unwrap();
        let cll = build_cell_linked_list(&exec, reg.vector_view(x), grid);
        assert!(cll.offsets().iter().all(|&o| o == 0));
        assert_eq!(cll.offsets().len(), 10);
        assert!(cll.particle_ids().is_empty());
    }

    #[test]
    fn pair_and_isolated() {
        let pts = [[1.0, 1.0], [1.5, 1.0], [3.5, 3.5]];
        let (reg, x) = registry_with::<2>(&pts);
        let grid = UniformGrid::covering([0.0, 0.0], [4.0, 4.0], 1.0);
        let cll = build_cell_linked_list(&Executor::sequenced(), reg.vector_view(x), grid);
        let view = reg.vector_view(x);
        let mut seen = Vec::new();
        let n0 = for_each_neighbor(0, view, &cll, 1.0, |j, r, e| seen.push((j, r, e))).unwrap();
        assert_eq!(n0, 1);
        assert_eq!(seen, vec![(1, 0.5, [-1.0, 0.0])]);
        let n1 = for_each_neighbor(1, view, &cll, 1.0, |j, _, _| assert_eq!(j, 0)).unwrap();
        assert_eq!(n1, 1);
        let n2 = for_each_neighbor(2, view, &cll, 1.0, |_, _, _| panic!("isolated")).unwrap();
        assert_eq!(n2, 0);
    }

    #[test]
    fn point_queries_include_every_particle() {
        let pts = [[1.0, 1.0], [1.5, 1.0], [3.5, 3.5]];
        let (reg, x) = registry_with::<2>(&pts);
        let grid = UniformGrid::covering([0.0, 0.0], [4.0, 4.0], 1.0);
        let cll = build_cell_linked_list(&Executor::sequenced(), reg.vector_view(x), grid);
        let search = NeighborSearch::new(&cll, reg.vector_view(x), 1.0);
        let mut seen = Vec::new();
        search.for_each_within([1.0, 1.0], |j, r, _| seen.push((j, r))).unwrap();
        assert_eq!(seen, vec![(0, 0.0), (1, 0.5)]);
    }

    #[test]
    fn visits_follow_order_key() {
        let pts = [[0.5, 0.5], [0.6, 0.5], [0.7, 0.5], [0.8, 0.5]];
        let (mut reg, x) = registry_with::<2>(&pts);
        let key = reg.add_index("key", 0).unwrap();
        reg.set_index_values(key, &[0, 30, 10, 20]).unwrap();
        let grid = UniformGrid::covering([0.0, 0.0], [1.0, 1.0], 1.0);
        let cll = build_cell_linked_list(&Executor::sequenced(), reg.vector_view(x), grid);
        let search = NeighborSearch::new(&cll, reg.vector_view(x), 1.0).with_order(reg.index_view(key));
        let mut order = Vec::new();
        search.for_each_neighbor(0, |j, _, _| order.push(j)).unwrap();
        assert_eq!(order, vec![2, 3, 1]);
    }

    #[test]
    fn overflow_reported() {
        let pts: Vec<[f64; 2]> = (0..MAX_BLOCK_NEIGHBORS + 2).map(|k| [0.5 + k as f64 * 1e-4, 0.5]).collect();
        let (reg, x) = registry_with::<2>(&pts);
        let grid = UniformGrid::covering([0.0, 0.0], [1.0, 1.0], 1.0);
        let cll = build_cell_linked_list(&Executor::sequenced(), reg.vector_view(x), grid);
        let err = for_each_neighbor(0, reg.vector_view(x), &cll, 1.0, |_, _, _| {}).unwrap_err();
        assert_eq!(err, NeighborhoodError::Overflow { particle: 0, capacity: MAX_BLOCK_NEIGHBORS });
    }

    #[test]
    fn brute_force_triangle_and_isolated() {
        let h = 3f64.sqrt() / 2.0;
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.5, h]];
        for i in 0..3 {
            assert_eq!(brute_force_neighbors(i, &tri, 1.5).len(), 2);
        }
        let far = [[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]];
        for i in 0..3 {
            assert!(brute_force_neighbors(i, &far, 1.0).is_empty());
        }
    }
}
