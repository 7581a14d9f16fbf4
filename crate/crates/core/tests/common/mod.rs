//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use rte::gp::{se_kernel, GpInput, KernelConfig};
use rte::planner::GridMap;

/// GP mean and variance by explicit inversion of `K + σ_w² I`.
pub fn dense_gp_predict(
    kernel: &KernelConfig,
    noise_sq: f64,
    prior: impl Fn(&GpInput) -> f64,
    xs: &[GpInput],
    ys: &[f64],
    x: &GpInput,
) -> (f64, f64) {
    let n = xs.len();
    let mut k = DMatrix::from_fn(n, n, |i, j| se_kernel(&xs[i], &xs[j], kernel));
    for i in 0..n {
        k[(i, i)] += noise_sq;
    }
    let kinv = k.try_inverse().expect("kernel matrix invertible");
    let kx = DVector::from_fn(n, |i, _| se_kernel(&xs[i], x, kernel));
    let resid = DVector::from_fn(n, |i, _| ys[i] - prior(&xs[i]));
    let mean = prior(x) + (kx.transpose() * &kinv * resid)[(0, 0)];
    let var = se_kernel(x, x, kernel) - (kx.transpose() * &kinv * &kx)[(0, 0)];
    (mean, var)
}

/// Plain Dijkstra with an O(V²) scan; no heap, no heuristic.
pub fn dijkstra(grid: &GridMap, start: (usize, usize), goal: (usize, usize)) -> Option<f64> {
    let (cols, rows) = (grid.cols(), grid.rows());
    let idx = |c: (usize, usize)| c.1 * cols + c.0;
    let mut dist = vec![f64::INFINITY; cols * rows];
    let mut done = vec![false; cols * rows];
    dist[idx(start)] = 0.0;
    loop {
        let mut best = None;
        for i in 0..cols * rows {
            if !done[i] && dist[i].is_finite() && best.is_none_or(|b: usize| dist[i] < dist[b]) {
                best = Some(i);
            }
        }
        let u = best?;
        if u == idx(goal) {
            return Some(dist[u]);
        }
        done[u] = true;
        let (ux, uy) = ((u % cols) as i64, (u / cols) as i64);
        for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (vx, vy) = (ux + dx, uy + dy);
                if vx < 0 || vy < 0 || vx >= cols as i64 || vy >= rows as i64 {
                    continue;
                }
                let v = (vx as usize, vy as usize);
                if grid.is_blocked(v) {
                    continue;
                }
                let w = if dx != 0 && dy != 0 { 2f64.sqrt() } else { 1.0 };
                let alt = dist[u] + w;
                if alt < dist[idx(v)] {
                    dist[idx(v)] = alt;
                }
            }
        }
    }
}

/// U of the first sample by direct pair counting (ties count one half).
pub fn pair_u(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for x in a {
        for y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// Two-sided p from every assignment of the pooled values to the groups.
pub fn enumerate_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (m, n) = (a.len(), b.len());
    let u_obs = pair_u(a, b);
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << (m + n)) {
        if mask.count_ones() as usize != m {
            continue;
        }
        let (mut ga, mut gb) = (Vec::with_capacity(m), Vec::with_capacity(n));
        for (i, v) in pooled.iter().enumerate() {
            if mask & (1 << i) != 0 {
                ga.push(*v);
            } else {
                gb.push(*v);
            }
        }
        let u = pair_u(&ga, &gb);
        total += 1;
        if u <= u_obs {
            le += 1;
        }
        if u >= u_obs {
            ge += 1;
        }
    }
    (2.0 * le.min(ge) as f64 / total as f64).min(1.0)
}

/// Monte Carlo two-sided p: fraction of random relabelings whose U is at
/// least as far from its mean as the observed one.
pub fn permutation_p<R: Rng>(a: &[f64], b: &[f64], perms: usize, rng: &mut R) -> f64 {
    let (m, n) = (a.len(), b.len());
    let center = (m * n) as f64 / 2.0;
    let obs = (pair_u(a, b) - center).abs();
    // shuffling midranks relabels the groups; U is then a rank sum
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut ranks: Vec<f64> = pooled
        .iter()
        .map(|x| {
            let below = pooled.iter().filter(|y| *y < x).count() as f64;
            let equal = pooled.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let offset = (m * (m + 1)) as f64 / 2.0;
    let mut extreme = 0usize;
    for _ in 0..perms {
        ranks.shuffle(rng);
        let u = ranks[..m].iter().sum::<f64>() - offset;
        if (u - center).abs() >= obs - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / perms as f64
}
