//! A* on an occupancy grid, used to pick a coarse heading for action
//! sampling.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::SQRT_2;

use thiserror::Error;

use crate::sim::Arena;

/// Distance along the path used as the steering lookahead.
pub const LOOKAHEAD: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("no path from cell {start:?} to cell {goal:?}")]
    NoPath { start: Cell, goal: Cell },
}

pub type Cell = (usize, usize);

/// Occupancy grid; a cell is blocked when its square intersects an obstacle
/// inflated by the robot radius.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    cell_size: f64,
    cols: usize,
    rows: usize,
    blocked: Vec<bool>,
}

impl GridMap {
    pub fn from_arena(arena: &Arena, cell_size: f64) -> Self {
        let cols = (arena.width / cell_size).ceil().max(1.0) as usize;
        let rows = (arena.height / cell_size).ceil().max(1.0) as usize;
        let mut blocked = vec![false; cols * rows];
        for r in 0..rows {
            for c in 0..cols {
                let (x0, y0) = (c as f64 * cell_size, r as f64 * cell_size);
                let (x1, y1) = (x0 + cell_size, y0 + cell_size);
                blocked[r * cols + c] = arena.obstacles.iter().any(|o| {
                    let nx = o.x.clamp(x0, x1);
                    let ny = o.y.clamp(y0, y1);
                    (nx - o.x).hypot(ny - o.y) < o.radius + arena.robot_radius
                });
            }
        }
        Self {
            cell_size,
            cols,
            rows,
            blocked,
        }
    }

    /// Grid from an explicit blocked mask, row-major.
    pub fn from_mask(cols: usize, rows: usize, cell_size: f64, blocked: Vec<bool>) -> Self {
        assert_eq!(blocked.len(), cols * rows);
        Self {
            cell_size,
            cols,
            rows,
            blocked,
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn is_blocked(&self, cell: Cell) -> bool {
        self.blocked[cell.1 * self.cols + cell.0]
    }

    pub fn cell_of(&self, p: (f64, f64)) -> Cell {
        let c = ((p.0 / self.cell_size).floor().max(0.0) as usize).min(self.cols - 1);
        let r = ((p.1 / self.cell_size).floor().max(0.0) as usize).min(self.rows - 1);
        (c, r)
    }

    pub fn center(&self, cell: Cell) -> (f64, f64) {
        (
            (cell.0 as f64 + 0.5) * self.cell_size,
            (cell.1 as f64 + 0.5) * self.cell_size,
        )
    }

    fn neighbors(&self, cell: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
        const STEPS: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        STEPS.iter().filter_map(move |&(dc, dr)| {
            let c = cell.0 as isize + dc;
            let r = cell.1 as isize + dr;
            if c < 0 || r < 0 || c >= self.cols as isize || r >= self.rows as isize {
                return None;
            }
            let n = (c as usize, r as usize);
            if self.is_blocked(n) {
                return None;
            }
            Some((n, if dc != 0 && dr != 0 { SQRT_2 } else { 1.0 }))
        })
    }
}

fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    dx.max(dy) - dx.min(dy) + SQRT_2 * dx.min(dy)
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    cell: Cell,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on f, ties broken toward larger g then cell order
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest 8-connected path in cell units. The returned path excludes the
/// start cell and ends at the goal cell. The start cell is never treated as
/// blocked.
pub fn astar(grid: &GridMap, start: Cell, goal: Cell) -> Result<(Vec<Cell>, f64), PathError> {
    if start == goal {
        return Ok((Vec::new(), 0.0));
    }
    if grid.is_blocked(goal) {
        return Err(PathError::NoPath { start, goal });
    }
    let idx = |c: Cell| c.1 * grid.cols + c.0;
    let mut g = vec![f64::INFINITY; grid.cols * grid.rows];
    let mut parent: Vec<Option<Cell>> = vec![None; grid.cols * grid.rows];
    let mut closed = vec![false; grid.cols * grid.rows];
    let mut open = BinaryHeap::new();
    g[idx(start)] = 0.0;
    open.push(Open {
        f: octile(start, goal),
        g: 0.0,
        cell: start,
    });
    while let Some(Open { g: gc, cell, .. }) = open.pop() {
        if closed[idx(cell)] {
            continue;
        }
        closed[idx(cell)] = true;
        if cell == goal {
            let mut path = vec![cell];
            let mut cur = cell;
            while let Some(p) = parent[idx(cur)] {
                if p == start {
                    break;
                }
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Ok((path, gc));
        }
        for (n, step) in grid.neighbors(cell) {
            let cand = gc + step;
            if cand < g[idx(n)] {
                g[idx(n)] = cand;
                parent[idx(n)] = Some(cell);
                open.push(Open {
                    f: cand + octile(n, goal),
                    g: cand,
                    cell: n,
                });
            }
        }
    }
    Err(PathError::NoPath { start, goal })
}

fn bearing(from: (f64, f64), to: (f64, f64)) -> f64 {
    (to.1 - from.1).atan2(to.0 - from.0)
}

/// Heading from `start` toward the first path cell at least
/// [`LOOKAHEAD`] away, or toward `goal` when the path is shorter than that.
fn steer(grid: &GridMap, path: &[Cell], start: (f64, f64), goal: (f64, f64)) -> f64 {
    path.iter()
        .map(|&c| grid.center(c))
        .find(|&p| (p.0 - start.0).hypot(p.1 - start.1) >= LOOKAHEAD)
        .map(|p| bearing(start, p))
        .unwrap_or_else(|| bearing(start, goal))
}

/// Desired heading from `start` toward `goal` around the arena's obstacles.
pub fn astar_plan(arena: &Arena, start: (f64, f64), goal: (f64, f64), cell_size: f64) -> Result<f64, PathError> {
    let grid = GridMap::from_arena(arena, cell_size);
    let (path, _) = astar(&grid, grid.cell_of(start), grid.cell_of(goal))?;
    Ok(steer(&grid, &path, start, goal))
}

/// Memoized [`astar_plan`] for a fixed goal, keyed by start cell. Falls back
/// to the straight-line bearing when no path exists.
#[derive(Debug, Clone)]
pub struct DirectionGuide {
    grid: GridMap,
    goal: (f64, f64),
    paths: HashMap<Cell, Option<Vec<Cell>>>,
}

impl DirectionGuide {
    pub fn new(arena: &Arena, goal: (f64, f64), cell_size: f64) -> Self {
        Self {
            grid: GridMap::from_arena(arena, cell_size),
            goal,
            paths: HashMap::new(),
        }
    }

    pub fn direction(&mut self, from: (f64, f64)) -> f64 {
        let start = self.grid.cell_of(from);
        let goal_cell = self.grid.cell_of(self.goal);
        let grid = &self.grid;
        let path = self
            .paths
            .entry(start)
            .or_insert_with(|| astar(grid, start, goal_cell).ok().map(|(p, _)| p));
        match path {
            Some(p) => steer(&self.grid, p, from, self.goal),
            None => bearing(from, self.goal),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Obstacle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Plain Dijkstra over the same move set, O(V²) scan without a heap.
    fn dijkstra(grid: &GridMap, start: Cell, goal: Cell) -> Option<f64> {
        let (w, h) = (grid.cols(), grid.rows());
        let mut dist = vec![f64::INFINITY; w * h];
        let mut done = vec![false; w * h];
        dist[start.1 * w + start.0] = 0.0;
        loop {
            let mut best = None;
            for i in 0..w * h {
                if !done[i] && dist[i].is_finite() && best.is_none_or(|b: usize| dist[i] < dist[b]) {
                    best = Some(i);
                }
            }
            let Some(u) = best else { break };
            done[u] = true;
            let (ux, uy) = ((u % w) as i64, (u / w) as i64);
            for dx in -1..=1i64 {
                for dy in -1..=1i64 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (vx, vy) = (ux + dx, uy + dy);
                    if vx < 0 || vy < 0 || vx >= w as i64 || vy >= h as i64 {
                        continue;
                    }
                    let v = vy as usize * w + vx as usize;
                    if grid.is_blocked((vx as usize, vy as usize)) {
                        continue;
                    }
                    let c = if dx != 0 && dy != 0 { 2f64.sqrt() } else { 1.0 };
                    if dist[u] + c < dist[v] {
                        dist[v] = dist[u] + c;
                    }
                }
            }
        }
        let d = dist[goal.1 * w + goal.0];
        d.is_finite().then_some(d)
    }

    #[test]
    fn empty_arena_due_east() {
        let arena = Arena::empty(800.0, 800.0, 20.0);
        let d = astar_plan(&arena, (100.0, 410.0), (500.0, 410.0), 20.0).unwrap();
        assert!(d.abs() < 1e-12, "{d}");
    }

    #[test]
    fn same_cell_points_at_goal() {
        let arena = Arena::empty(800.0, 800.0, 20.0);
        let d = astar_plan(&arena, (105.0, 105.0), (105.0, 115.0), 20.0).unwrap();
        assert!((d - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let grid = GridMap::from_arena(&arena, 20.0);
        let (path, cost) = astar(&grid, (5, 5), (5, 5)).unwrap();
        assert!(path.is_empty() && cost == 0.0);
    }

    #[test]
    fn detours_around_central_obstacle() {
        let mut arena = Arena::standard();
        arena.obstacles[0].radius = 60.0;
        let (s, g) = ((200.0, 410.0), (600.0, 410.0));
        let d = astar_plan(&arena, s, g, 20.0).unwrap();
        assert!(d.abs() > 0.05, "{d}");
        let grid = GridMap::from_arena(&arena, 20.0);
        let (_, cost) = astar(&grid, grid.cell_of(s), grid.cell_of(g)).unwrap();
        let oracle = dijkstra(&grid, grid.cell_of(s), grid.cell_of(g)).unwrap();
        assert!((cost - oracle).abs() < 1e-9);
        assert!(cost > 20.0);
    }

    #[test]
    fn unreachable_goal_is_an_error() {
        let mut arena = Arena::empty(800.0, 800.0, 20.0);
        arena.obstacles.push(Obstacle {
            x: 600.0,
            y: 600.0,
            radius: 5.0,
        });
        assert!(matches!(
            astar_plan(&arena, (100.0, 100.0), (600.0, 600.0), 20.0),
            Err(PathError::NoPath { .. })
        ));
        let mut guide = DirectionGuide::new(&arena, (600.0, 600.0), 20.0);
        let d = guide.direction((100.0, 100.0));
        assert!((d - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn path_cells_are_free_and_adjacent() {
        let arena = Arena::standard();
        let grid = GridMap::from_arena(&arena, 20.0);
        let start = grid.cell_of((300.0, 400.0));
        let (path, _) = astar(&grid, start, grid.cell_of((500.0, 400.0))).unwrap();
        let mut prev = start;
        for &c in &path {
            assert!(!grid.is_blocked(c));
            assert!(c.0.abs_diff(prev.0) <= 1 && c.1.abs_diff(prev.1) <= 1);
            prev = c;
        }
    }

    #[test]
    fn matches_dijkstra_on_random_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let mask: Vec<bool> = (0..1600).map(|_| rng.random_bool(0.3)).collect();
            let grid = GridMap::from_mask(40, 40, 20.0, mask);
            let s = (rng.random_range(0..40), rng.random_range(0..40));
            let g = (rng.random_range(0..40), rng.random_range(0..40));
            let a = astar(&grid, s, g).ok().map(|(_, c)| c);
            let d = if grid.is_blocked(g) && s != g { None } else { dijkstra(&grid, s, g) };
            match (a, d) {
                (Some(x), Some(y)) => assert!((x - y).abs() < 1e-9),
                (None, None) => {}
                other => panic!("mismatch {other:?}"),
            }
        }
    }
}
