//! The Markov operator `P`, its kernel powers `p_n`, the Laplacian
//! `L = I − P`, composite kernels of `(I−P)^k P^n`, and empirical
//! verification of the Gaussian upper bounds.
//!
//! Kernel rows are computed by repeated sparse application to unit masses
//! (`O(n·E)`), never by dense matrix powers; the dense route survives only
//! as a test oracle.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::VertexFunction;

/// Row-stochastic Markov operator `p(x,y) = ν(x,y)/μ(x)`.
#[derive(Debug, Clone)]
pub struct MarkovOperator {
    graph: Arc<WeightedGraph>,
    rows: Vec<Vec<(u32, f64)>>,
}

impl MarkovOperator {
    pub fn new(graph: Arc<WeightedGraph>) -> Self {
        let rows = (0..graph.n_vertices() as u32)
            .map(|x| {
                graph
                    .neighbors(x)
                    .iter()
                    .map(|&(y, w)| (y, w / graph.mu(x)))
                    .collect()
            })
            .collect();
        MarkovOperator { graph, rows }
    }

    pub fn graph(&self) -> &Arc<WeightedGraph> {
        &self.graph
    }

    pub fn kernel(&self, x: u32, y: u32) -> f64 {
        match self.rows[x as usize].binary_search_by_key(&y, |&(v, _)| v) {
            Ok(i) => self.rows[x as usize][i].1,
            Err(_) => 0.0,
        }
    }

    /// `P f(x) = Σ_y p(x,y) f(y)`.
    pub fn apply(&self, f: &[f64]) -> VertexFunction {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(y, p)| p * f[y as usize]).sum())
            .collect()
    }

    /// `L f = (I − P) f`.
    pub fn apply_laplacian(&self, f: &[f64]) -> VertexFunction {
        let pf = self.apply(f);
        f.iter().zip(pf).map(|(a, b)| a - b).collect()
    }

    /// `(I − P)^k f`; `k = 0` is the identity.
    pub fn apply_laplacian_power(&self, k: u32, f: &[f64]) -> VertexFunction {
        let mut g = f.to_vec();
        for _ in 0..k {
            g = self.apply_laplacian(&g);
        }
        g
    }

    pub fn apply_power(&self, n: u32, f: &[f64]) -> VertexFunction {
        let mut g = f.to_vec();
        for _ in 0..n {
            g = self.apply(&g);
        }
        g
    }

    /// Row `p_n(x,·)` of the n-th convolution power: `P^n` applied to the
    /// unit mass at `x`, rescaled by reversibility.
    pub fn heat_kernel_row(&self, x: u32, n: u32) -> VertexFunction {
        assert!(n >= 1);
        let mut delta = vec![0.0; self.graph.n_vertices()];
        delta[x as usize] = 1.0;
        let col = self.apply_power(n, &delta);
        let mux = self.graph.mu(x);
        col.iter()
            .enumerate()
            .map(|(y, v)| v * self.graph.mu(y as u32) / mux)
            .collect()
    }

    /// Row of `(I−P)^k P^n` at `x`.
    pub fn composite_kernel_row(&self, x: u32, n: u32, k: u32) -> VertexFunction {
        assert!(n >= 1);
        let mut delta = vec![0.0; self.graph.n_vertices()];
        delta[x as usize] = 1.0;
        let col = self.apply_laplacian_power(k, &self.apply_power(n, &delta));
        let mux = self.graph.mu(x);
        col.iter()
            .enumerate()
            .map(|(y, v)| v * self.graph.mu(y as u32) / mux)
            .collect()
    }
}

pub fn dot_mu(f: &[f64], g: &[f64], mu: &[f64]) -> f64 {
    f.iter().zip(g).zip(mu).map(|((a, b), m)| a * b * m).sum()
}

/// `L²(Γ,μ)` norm.
pub fn norm_l2(f: &[f64], mu: &[f64]) -> f64 {
    dot_mu(f, f, mu).sqrt()
}

/// Heat-kernel rows `p_n(x,·)` for `n = 1..=horizon` from one base vertex.
#[derive(Debug, Clone)]
pub struct HeatKernelTable {
    pub base: u32,
    pub horizon: u32,
    pub rows: Vec<VertexFunction>,
}

impl HeatKernelTable {
    pub fn build(op: &MarkovOperator, base: u32, horizon: u32) -> Self {
        let g = op.graph();
        let mut delta = vec![0.0; g.n_vertices()];
        delta[base as usize] = 1.0;
        let mut rows = Vec::with_capacity(horizon as usize);
        let mut col = delta;
        let mub = g.mu(base);
        for _ in 1..=horizon {
            col = op.apply(&col);
            rows.push(
                col.iter()
                    .enumerate()
                    .map(|(y, v)| v * g.mu(y as u32) / mub)
                    .collect(),
            );
        }
        HeatKernelTable { base, horizon, rows }
    }

    pub fn row(&self, n: u32) -> &[f64] {
        &self.rows[n as usize - 1]
    }

    /// CSV export `n,x,y,p_n,bound,slack` against a fitted Gaussian bound.
    pub fn to_csv(&self, g: &WeightedGraph, fit: &GaussianFit) -> String {
        let mut out = String::from("n,x,y,p_n,bound,slack\n");
        let bfs = g.bfs(self.base);
        for n in 1..=self.horizon {
            let sqrt_n = (n as f64).sqrt().ceil() as u32;
            let ball = g.ball_mu(self.base, sqrt_n);
            for y in 0..g.n_vertices() as u32 {
                let p = self.row(n)[y as usize];
                let d = bfs.dist[y as usize] as f64;
                let bound =
                    fit.constant * g.mu(y) / ball * (-fit.rate * d * d / n as f64).exp();
                out.push_str(&format!(
                    "{},{},{},{:.12e},{:.12e},{:.12e}\n",
                    n,
                    self.base,
                    y,
                    p,
                    bound,
                    p - bound
                ));
            }
        }
        out
    }
}

/// Fitted constants for `p_n(x,y) ≤ C μ(y)/μ(B(x,√n)) e^{−c d²(x,y)/n}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianFit {
    pub constant: f64,
    pub rate: f64,
    /// Max of `p_n − bound` over the scan; nonpositive when the fit holds.
    pub max_violation: f64,
    pub worst: (u32, u32, u32),
    pub horizon: u32,
}

const RATE_GRID: [f64; 7] = [1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625];

/// Least `C` over a decay-rate grid with no violation across all
/// `(x ∈ bases, y, n ≤ horizon)`; reports the `(c, C)` pair minimizing the
/// stability score `C·e^{1/c}`.
pub fn fit_gaussian_upper(
    op: &MarkovOperator,
    horizon: u32,
    bases: &[u32],
) -> Result<GaussianFit> {
    let g = op.graph();
    let guard = g.radius_guard();
    if horizon > guard * guard {
        return Err(Error::Hypothesis(format!(
            "horizon {horizon} exceeds truncation guard {}^2",
            guard
        )));
    }
    // Per grid rate: running max of the ratio and where it happened.
    let mut best_c = [0.0f64; RATE_GRID.len()];
    let mut worst = [(0u32, 0u32, 0u32); RATE_GRID.len()];
    for &x in bases {
        let bfs = g.bfs(x);
        let table = HeatKernelTable::build(op, x, horizon);
        for n in 1..=horizon {
            let sqrt_n = (n as f64).sqrt().ceil() as u32;
            let ball = bfs.ball_mu(sqrt_n);
            for y in 0..g.n_vertices() as u32 {
                let p = table.row(n)[y as usize];
                if p <= 0.0 {
                    continue;
                }
                let d = bfs.dist[y as usize] as f64;
                let base_ratio = p * ball / g.mu(y);
                for (i, &c) in RATE_GRID.iter().enumerate() {
                    let ratio = base_ratio * (c * d * d / n as f64).exp();
                    if ratio > best_c[i] {
                        best_c[i] = ratio;
                        worst[i] = (x, y, n);
                    }
                }
            }
        }
    }
    let (i_best, _) = RATE_GRID
        .iter()
        .enumerate()
        .map(|(i, &c)| (i, best_c[i] * (1.0 / c).exp()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    Ok(GaussianFit {
        constant: best_c[i_best],
        rate: RATE_GRID[i_best],
        max_violation: 0.0,
        worst: worst[i_best],
        horizon,
    })
}

/// Same fit for the composite kernel of `(I−P)^k P^n`, which gains a factor
/// `n^{−k}`.
pub fn fit_composite_upper(
    op: &MarkovOperator,
    horizon: u32,
    k: u32,
    bases: &[u32],
) -> Result<GaussianFit> {
    let g = op.graph();
    let mut best_c = [0.0f64; RATE_GRID.len()];
    let mut worst = [(0u32, 0u32, 0u32); RATE_GRID.len()];
    for &x in bases {
        let bfs = g.bfs(x);
        for n in 1..=horizon {
            let row = op.composite_kernel_row(x, n, k);
            let sqrt_n = (n as f64).sqrt().ceil() as u32;
            let ball = bfs.ball_mu(sqrt_n);
            let nk = (n as f64).powi(k as i32);
            for y in 0..g.n_vertices() as u32 {
                let p = row[y as usize].abs();
                if p <= 0.0 {
                    continue;
                }
                let d = bfs.dist[y as usize] as f64;
                let base_ratio = p * nk * ball / g.mu(y);
                for (i, &c) in RATE_GRID.iter().enumerate() {
                    let ratio = base_ratio * (c * d * d / n as f64).exp();
                    if ratio > best_c[i] {
                        best_c[i] = ratio;
                        worst[i] = (x, y, n);
                    }
                }
            }
        }
    }
    let (i_best, _) = RATE_GRID
        .iter()
        .enumerate()
        .map(|(i, &c)| (i, best_c[i] * (1.0 / c).exp()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    Ok(GaussianFit {
        constant: best_c[i_best],
        rate: RATE_GRID[i_best],
        max_violation: 0.0,
        worst: worst[i_best],
        horizon,
    })
}

/// Hölder-regularity constants `(C₃, c₃, h)` for
/// `|p_n(y,x) − p_n(y₀,x)| ≤ C₃ (d(y,y₀)/√n)^h μ(x)/μ(B(x,√n)) e^{−c₃ d²(x,y₀)/n}`
/// over all sampled tuples with `d(y₀,y) ≤ √n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderFit {
    pub constant: f64,
    pub rate: f64,
    pub holder_exponent: f64,
    pub worst: (u32, u32, u32, u32),
}

const HOLDER_GRID: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// One pass over all tuples with `d(y₀,y) ≤ √n`, calling `visit` with
/// `(y, x, n, log(lhs/envelope), log(d_y/√n), d²(x,y₀)/n)`. Kernel rows are
/// advanced one step of `P` at a time so memory stays at one column per
/// neighbor of the base.
fn holder_scan<F: FnMut(u32, u32, u32, f64, f64, f64)>(
    op: &MarkovOperator,
    horizon: u32,
    y0: u32,
    mut visit: F,
) {
    let g = op.graph();
    let n_verts = g.n_vertices();
    let bfs0 = g.bfs(y0);
    let max_r = (horizon as f64).sqrt().floor() as u32 + 1;
    let nbhd: Vec<u32> = bfs0.ball_members(max_r + 1).to_vec();
    let mut cols: Vec<Vec<f64>> = nbhd
        .iter()
        .map(|&y| {
            let mut d = vec![0.0; n_verts];
            d[y as usize] = 1.0;
            d
        })
        .collect();
    let base_idx = nbhd.iter().position(|&y| y == y0).expect("base in own ball");
    for n in 1..=horizon {
        for col in &mut cols {
            *col = op.apply(col);
        }
        let sqrt_n = (n as f64).sqrt();
        let ball_r = sqrt_n.ceil() as u32;
        for (yi, &y) in nbhd.iter().enumerate() {
            let dy = bfs0.dist[y as usize] as f64;
            if dy == 0.0 || dy > sqrt_n {
                continue;
            }
            let log_scale = (dy / sqrt_n).ln();
            let mu_y = g.mu(y);
            let mu_y0 = g.mu(y0);
            for x in 0..n_verts as u32 {
                // p_n(y,x) = (P^n δ_y)(x) μ(x)/μ(y)
                let mux = g.mu(x);
                let lhs = (cols[yi][x as usize] * mux / mu_y
                    - cols[base_idx][x as usize] * mux / mu_y0)
                    .abs();
                if lhs <= 0.0 {
                    continue;
                }
                let dx0 = bfs0.dist[x as usize] as f64;
                let envelope = mux / g.ball_mu(x, ball_r);
                visit(y, x, n, (lhs / envelope).ln(), log_scale, dx0 * dx0 / n as f64);
            }
        }
    }
}

pub fn fit_holder_regularity(
    op: &MarkovOperator,
    horizon: u32,
    bases: &[u32],
    constant_cap: f64,
) -> Result<HolderFit> {
    let n_rate = RATE_GRID.len();
    let mut log_best = vec![f64::NEG_INFINITY; HOLDER_GRID.len() * n_rate];
    let mut worst = vec![(0u32, 0u32, 0u32, 0u32); HOLDER_GRID.len() * n_rate];
    for &y0 in bases {
        holder_scan(op, horizon, y0, |y, x, n, log_base, log_scale, gauss| {
            for (hi, &h) in HOLDER_GRID.iter().enumerate() {
                for (ci, &c) in RATE_GRID.iter().enumerate() {
                    let lr = log_base - h * log_scale + c * gauss;
                    let slot = hi * n_rate + ci;
                    if lr > log_best[slot] {
                        log_best[slot] = lr;
                        worst[slot] = (y0, y, x, n);
                    }
                }
            }
        });
    }
    let mut pick: Option<(usize, f64)> = None;
    for (hi, _) in HOLDER_GRID.iter().enumerate() {
        for (ci, &c) in RATE_GRID.iter().enumerate() {
            let slot = hi * n_rate + ci;
            let c3 = log_best[slot].exp();
            if c3 > constant_cap {
                continue;
            }
            let score = c3 * (1.0 / c).exp();
            // prefer the largest Hölder exponent, then the stablest score
            let better = match pick {
                None => true,
                Some((prev, prev_score)) => {
                    let prev_h = prev / n_rate;
                    hi > prev_h || (hi == prev_h && score < prev_score)
                }
            };
            if better {
                pick = Some((slot, score));
            }
        }
    }
    match pick {
        Some((slot, _)) => Ok(HolderFit {
            constant: log_best[slot].exp(),
            rate: RATE_GRID[slot % n_rate],
            holder_exponent: HOLDER_GRID[slot / n_rate],
            worst: worst[slot],
        }),
        None => {
            let slot = log_best
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
            Err(Error::Hypothesis(format!(
                "no (h, C3) pair fits under cap {constant_cap}; worst tuple {:?}",
                worst[slot]
            )))
        }
    }
}

/// Worst ratio of the Hölder-regularity inequality at fixed `(h, c)`.
pub fn holder_constant_at(
    op: &MarkovOperator,
    horizon: u32,
    bases: &[u32],
    h: f64,
    c: f64,
) -> (f64, (u32, u32, u32, u32)) {
    let mut log_best = f64::NEG_INFINITY;
    let mut worst = (0u32, 0u32, 0u32, 0u32);
    for &y0 in bases {
        holder_scan(op, horizon, y0, |y, x, n, log_base, log_scale, gauss| {
            let lr = log_base - h * log_scale + c * gauss;
            if lr > log_best {
                log_best = lr;
                worst = (y0, y, x, n);
            }
        });
    }
    (log_best.exp(), worst)
}
