//! D* Lite incremental search over the 8-connected cost grid: plans dense
//! cell-resolution paths and repairs them under cell-cost changes without
//! replanning from scratch.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use thiserror::Error;

use crate::costmap::CostField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("({0}, {1}) and ({2}, {3}) are not distinct 8-neighbors")]
    NotNeighbors(usize, usize, usize, usize),
    #[error("no traversable path from start to goal")]
    NoPath,
    #[error("endpoint ({0}, {1}) is lethal or out of bounds")]
    LethalEndpoint(usize, usize),
    #[error("greedy descent failed to reach the goal; planner state does not match the field")]
    InconsistentState,
}

/// Cell coordinate on the planning grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridVertex {
    pub row: usize,
    pub col: usize,
}

impl GridVertex {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Start-to-goal vertex sequence with its summed edge cost.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub vertices: Vec<GridVertex>,
    pub total_cost: f64,
}

/// One cell mutation handed to `update_cells`: the new lethal flag and the
/// new penalty (ignored when the cell turns lethal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellChange {
    pub vertex: GridVertex,
    pub lethal: bool,
    pub penalty: f64,
}

/// Neighbor scan order used for every neighborhood walk and for greedy
/// tie-breaking: N, NE, E, SE, S, SW, W, NW (north = smaller row).
const SCAN_ORDER: [(isize, isize); 8] = [
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
];

/// Octile distance in cells: exact 8-connected length on an empty grid and
/// an admissible, consistent heuristic whenever edge costs are at least the
/// step length.
pub fn octile_distance(a: &GridVertex, b: &GridVertex) -> f64 {
    let dr = a.row.abs_diff(b.row) as f64;
    let dc = a.col.abs_diff(b.col) as f64;
    dr.max(dc) + (SQRT_2 - 1.0) * dr.min(dc)
}

/// Traversal cost of one 8-neighbor move: infinite into, out of, or
/// diagonally past a lethal cell, otherwise step length times one plus the
/// mean endpoint penalty.
pub fn edge_cost(field: &CostField, u: &GridVertex, v: &GridVertex) -> Result<f64, PlannerError> {
    let dr = u.row.abs_diff(v.row);
    let dc = u.col.abs_diff(v.col);
    if dr > 1 || dc > 1 || (dr == 0 && dc == 0) {
        return Err(PlannerError::NotNeighbors(u.row, u.col, v.row, v.col));
    }
    Ok(cost_unchecked(field, u, v))
}

fn cost_unchecked(field: &CostField, u: &GridVertex, v: &GridVertex) -> f64 {
    if field.is_lethal(u.row, u.col) || field.is_lethal(v.row, v.col) {
        return f64::INFINITY;
    }
    let diagonal = u.row != v.row && u.col != v.col;
    // a diagonal move must not cut the corner of a lethal cell
    if diagonal && (field.is_lethal(u.row, v.col) || field.is_lethal(v.row, u.col)) {
        return f64::INFINITY;
    }
    let length = if diagonal { SQRT_2 } else { 1.0 };
    length * (1.0 + (field.penalty(u.row, u.col) + field.penalty(v.row, v.col)) / 2.0)
}

/// Lexicographic D* Lite priority. Never NaN: both components live in
/// [0, +inf].
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, f64);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.total_cmp(&other.1))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-heap entry; `BinaryHeap` is a max-heap, so the ordering is reversed.
/// Vertex index breaks exact key ties deterministically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct HeapEntry {
    key: Key,
    vertex: u32,
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .cmp(&self.key)
            .then(other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// D* Lite planning session bound to one grid geometry. The queue uses lazy
/// deletion: `queued` holds the authoritative key per vertex and stale heap
/// entries are skipped on pop.
#[derive(Debug, Clone)]
pub struct DstarLite {
    width: usize,
    height: usize,
    start: usize,
    goal: usize,
    km: f64,
    g: Vec<f64>,
    rhs: Vec<f64>,
    queued: Vec<Option<Key>>,
    heap: BinaryHeap<HeapEntry>,
}

impl DstarLite {
    /// From-scratch plan: initializes the backward search at `goal`, runs
    /// ComputeShortestPath, and extracts the greedy path.
    pub fn plan(
        field: &CostField,
        start: &GridVertex,
        goal: &GridVertex,
    ) -> Result<(GridPath, DstarLite), PlannerError> {
        check_endpoint(field, start)?;
        check_endpoint(field, goal)?;
        let cells = field.width() * field.height();
        let mut state = DstarLite {
            width: field.width(),
            height: field.height(),
            start: start.row * field.width() + start.col,
            goal: goal.row * field.width() + goal.col,
            km: 0.0,
            g: vec![f64::INFINITY; cells],
            rhs: vec![f64::INFINITY; cells],
            queued: vec![None; cells],
            heap: BinaryHeap::new(),
        };
        state.rhs[state.goal] = 0.0;
        let key = state.calculate_key(state.goal);
        state.push(state.goal, key);
        state.compute_shortest_path(field);
        let path = state.extract_path(field)?;
        Ok((path, state))
    }

    /// Applies the cell changes to the field, repairs the search, and
    /// extracts the new path. The repaired path costs the same as a
    /// from-scratch plan on the modified field.
    pub fn update_cells(
        &mut self,
        field: &mut CostField,
        changes: &[CellChange],
    ) -> Result<GridPath, PlannerError> {
        self.check_geometry(field);
        for change in changes {
            let v = &change.vertex;
            assert!(
                v.row < self.height && v.col < self.width,
                "change out of bounds"
            );
            field.set_lethal(v.row, v.col, change.lethal);
            if !change.lethal {
                field.set_penalty(v.row, v.col, change.penalty);
            }
        }
        // every edge touched by a change (including diagonal corner gating)
        // has both endpoints in the changed cells' closed neighborhoods
        for change in changes {
            let idx = change.vertex.row * self.width + change.vertex.col;
            self.update_vertex(idx, field);
            for n in neighbor_ids(idx, self.width, self.height) {
                self.update_vertex(n, field);
            }
        }
        self.compute_shortest_path(field);
        self.extract_path(field)
    }

    /// Moves the replanning start (the platform advanced along the path),
    /// growing the key modifier by the heuristic distance travelled, and
    /// re-settles the queue.
    pub fn move_start(
        &mut self,
        field: &CostField,
        new_start: &GridVertex,
    ) -> Result<(), PlannerError> {
        self.check_geometry(field);
        check_endpoint(field, new_start)?;
        let old = self.start_vertex();
        self.km += octile_distance(&old, new_start);
        self.start = new_start.row * self.width + new_start.col;
        self.compute_shortest_path(field);
        Ok(())
    }

    /// Greedy descent from start: repeatedly takes the successor minimizing
    /// edge cost plus g, ties broken by scan order. Bounded by the cell
    /// count; exceeding the bound means the state does not describe `field`.
    pub fn extract_path(&self, field: &CostField) -> Result<GridPath, PlannerError> {
        self.check_geometry(field);
        check_endpoint(field, &self.start_vertex())?;
        check_endpoint(field, &self.goal_vertex())?;
        if !self.g[self.start].is_finite() {
            return Err(PlannerError::NoPath);
        }
        let mut vertices = vec![self.start_vertex()];
        let mut total_cost = 0.0;
        let mut current = self.start;
        for _ in 0..self.width * self.height {
            if current == self.goal {
                return Ok(GridPath {
                    vertices,
                    total_cost,
                });
            }
            let u = vertex_of(current, self.width);
            let mut best: Option<(f64, usize, f64)> = None;
            for n in neighbor_ids(current, self.width, self.height) {
                let cost = cost_unchecked(field, &u, &vertex_of(n, self.width));
                let score = cost + self.g[n];
                if score.is_finite() && best.as_ref().is_none_or(|&(s, _, _)| score < s) {
                    best = Some((score, n, cost));
                }
            }
            let Some((_, next, cost)) = best else {
                return Err(PlannerError::InconsistentState);
            };
            total_cost += cost;
            vertices.push(vertex_of(next, self.width));
            current = next;
        }
        Err(PlannerError::InconsistentState)
    }

    pub fn start_vertex(&self) -> GridVertex {
        vertex_of(self.start, self.width)
    }

    pub fn goal_vertex(&self) -> GridVertex {
        vertex_of(self.goal, self.width)
    }

    pub fn key_modifier(&self) -> f64 {
        self.km
    }

    /// Estimated cost-to-goal of a vertex after the last repair.
    pub fn cost_to_goal(&self, v: &GridVertex) -> f64 {
        assert!(
            v.row < self.height && v.col < self.width,
            "vertex out of bounds"
        );
        self.g[v.row * self.width + v.col]
    }

    /// Termination condition of ComputeShortestPath, checkable from tests:
    /// the start is consistent and no queued inconsistency has a key below
    /// the start's.
    pub fn queue_is_settled(&self) -> bool {
        if self.g[self.start] != self.rhs[self.start] {
            return false;
        }
        let start_key = self.calculate_key(self.start);
        (0..self.g.len()).all(|idx| {
            let consistent = self.g[idx] == self.rhs[idx];
            match self.queued[idx] {
                Some(key) => !consistent && key >= start_key,
                None => consistent,
            }
        })
    }

    fn check_geometry(&self, field: &CostField) {
        assert!(
            field.width() == self.width && field.height() == self.height,
            "field geometry changed under the planner"
        );
    }

    fn calculate_key(&self, idx: usize) -> Key {
        let best = self.g[idx].min(self.rhs[idx]);
        let h = octile_distance(&self.start_vertex(), &vertex_of(idx, self.width));
        Key(best + h + self.km, best)
    }

    fn push(&mut self, idx: usize, key: Key) {
        self.queued[idx] = Some(key);
        self.heap.push(HeapEntry {
            key,
            vertex: idx as u32,
        });
    }

    /// Skips lazily deleted entries and returns the live top of the queue.
    fn peek_valid(&mut self) -> Option<(Key, usize)> {
        while let Some(top) = self.heap.peek() {
            let idx = top.vertex as usize;
            if self.queued[idx] == Some(top.key) {
                return Some((top.key, idx));
            }
            self.heap.pop();
        }
        None
    }

    /// Recomputes rhs from the successors and requeues the vertex iff it is
    /// locally inconsistent.
    fn update_vertex(&mut self, idx: usize, field: &CostField) {
        if idx != self.goal {
            let u = vertex_of(idx, self.width);
            let mut best = f64::INFINITY;
            for n in neighbor_ids(idx, self.width, self.height) {
                let cost = cost_unchecked(field, &u, &vertex_of(n, self.width));
                if cost.is_finite() && self.g[n].is_finite() {
                    best = best.min(cost + self.g[n]);
                }
            }
            self.rhs[idx] = best;
        }
        if self.g[idx] != self.rhs[idx] {
            let key = self.calculate_key(idx);
            self.push(idx, key);
        } else {
            self.queued[idx] = None;
        }
    }

    fn compute_shortest_path(&mut self, field: &CostField) {
        while let Some((key, u)) = self.peek_valid() {
            let start_key = self.calculate_key(self.start);
            if key >= start_key && self.rhs[self.start] == self.g[self.start] {
                break;
            }
            self.heap.pop();
            self.queued[u] = None;
            let fresh = self.calculate_key(u);
            if key < fresh {
                // key went stale (km grew or costs moved); reorder and retry
                self.push(u, fresh);
            } else if self.g[u] > self.rhs[u] {
                self.g[u] = self.rhs[u];
                for n in neighbor_ids(u, self.width, self.height) {
                    self.update_vertex(n, field);
                }
            } else {
                self.g[u] = f64::INFINITY;
                self.update_vertex(u, field);
                for n in neighbor_ids(u, self.width, self.height) {
                    self.update_vertex(n, field);
                }
            }
        }
    }
}

fn check_endpoint(field: &CostField, v: &GridVertex) -> Result<(), PlannerError> {
    if v.row >= field.height() || v.col >= field.width() || field.is_lethal(v.row, v.col) {
        return Err(PlannerError::LethalEndpoint(v.row, v.col));
    }
    Ok(())
}

fn vertex_of(idx: usize, width: usize) -> GridVertex {
    GridVertex::new(idx / width, idx % width)
}

/// In-bounds 8-neighbors of a cell in scan order.
fn neighbor_ids(idx: usize, width: usize, height: usize) -> impl Iterator<Item = usize> {
    let (row, col) = (idx / width, idx % width);
    SCAN_ORDER.iter().filter_map(move |&(dr, dc)| {
        let r = row.checked_add_signed(dr).filter(|&r| r < height)?;
        let c = col.checked_add_signed(dc).filter(|&c| c < width)?;
        Some(r * width + c)
    })
}
