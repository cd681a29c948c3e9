//! The weighted graph `(Γ, μ, d)`: balls, doubling constants, Δ(α), and the
//! Poincaré property.
//!
//! Conductances ν are symmetric and nonnegative, `μ(x) = Σ_{y~x} ν(x,y)`
//! (a loop counts once), and `d` is the shortest-path metric. Balls are
//! strict: `B(x,r) = {y : d(x,y) < r}`, so `B(x,r) = B(x,⌈r⌉)` and
//! `B(x,1) = {x}`. The graph is immutable after construction; per-vertex
//! BFS data is memoized behind `OnceLock` and safe to query from many
//! threads.

use std::sync::{Arc, OnceLock};


use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryMode {
    Torus,
    Reflecting,
}

/// Ball descriptor. Radii are positive integers; fractional radii are
/// ceiled before a `Ball` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ball {
    pub center: u32,
    pub radius: u32,
}

impl Ball {
    pub fn new(center: u32, radius: u32) -> Self {
        assert!(radius >= 1, "ball radius must be >= 1");
        Ball { center, radius }
    }

    /// Ball with a real radius, ceiled to the equivalent integer one.
    pub fn with_real_radius(center: u32, radius: f64) -> Self {
        assert!(radius > 0.0);
        Ball::new(center, radius.ceil().max(1.0) as u32)
    }
}

/// BFS view from one source: vertices in distance order, per-distance
/// cumulative counts and measures.
#[derive(Debug)]
pub struct BfsData {
    pub dist: Vec<u32>,
    /// Vertices sorted by distance from the source (ties by id).
    pub order: Vec<u32>,
    /// cum_count[d] = number of vertices with dist <= d.
    pub cum_count: Vec<usize>,
    /// cum_mu[d] = μ of vertices with dist <= d.
    pub cum_mu: Vec<f64>,
    pub eccentricity: u32,
}

impl BfsData {
    fn clamp(&self, r: u32) -> usize {
        debug_assert!(r >= 1);
        (r - 1).min(self.eccentricity) as usize
    }

    /// Members of the strict ball of radius `r` around the source.
    pub fn ball_members(&self, r: u32) -> &[u32] {
        &self.order[..self.cum_count[self.clamp(r)]]
    }

    pub fn ball_mu(&self, r: u32) -> f64 {
        self.cum_mu[self.clamp(r)]
    }

    pub fn ball_size(&self, r: u32) -> usize {
        self.cum_count[self.clamp(r)]
    }
}

#[derive(Debug)]
pub struct WeightedGraph {
    /// Per-vertex adjacency `(neighbor, ν)`, sorted by neighbor id.
    adjacency: Vec<Vec<(u32, f64)>>,
    mu: Vec<f64>,
    mu_total: f64,
    boundary_mode: BoundaryMode,
    /// Torus truncations keep doubling honest only up to `side/4`.
    radius_guard: u32,
    bfs_cache: Vec<OnceLock<Arc<BfsData>>>,
    diameter: OnceLock<u32>,
}

impl WeightedGraph {
    /// Build from an undirected edge list. Repeated pairs accumulate.
    pub fn from_edges(
        n_vertices: usize,
        edges: &[(u32, u32, f64)],
        boundary_mode: BoundaryMode,
    ) -> Result<Self> {
        if n_vertices == 0 {
            return Err(Error::Graph("empty vertex set".into()));
        }
        if n_vertices > u32::MAX as usize {
            return Err(Error::Graph("vertex count exceeds u32 range".into()));
        }
        let n = n_vertices;
        let mut weight = vec![std::collections::BTreeMap::<u32, f64>::new(); n];
        for &(u, v, w) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::Graph(format!("edge ({u},{v}) out of range")));
            }
            if w < 0.0 || !w.is_finite() {
                return Err(Error::Graph(format!("edge ({u},{v}) has weight {w}")));
            }
            if w == 0.0 {
                continue;
            }
            *weight[u as usize].entry(v).or_insert(0.0) += w;
            if u != v {
                *weight[v as usize].entry(u).or_insert(0.0) += w;
            }
        }
        let adjacency: Vec<Vec<(u32, f64)>> = weight
            .into_iter()
            .map(|m| m.into_iter().collect())
            .collect();
        let mu: Vec<f64> = adjacency
            .iter()
            .map(|row| row.iter().map(|&(_, w)| w).sum())
            .collect();
        for (x, &m) in mu.iter().enumerate() {
            if m <= 0.0 {
                return Err(Error::Graph(format!("vertex {x} has measure 0 (no edges)")));
            }
        }
        let mu_total = mu.iter().sum();
        let g = WeightedGraph {
            adjacency,
            mu,
            mu_total,
            boundary_mode,
            radius_guard: u32::MAX,
            bfs_cache: (0..n).map(|_| OnceLock::new()).collect(),
            diameter: OnceLock::new(),
        };
        if let Some(v) = g.first_unreachable(0) {
            return Err(Error::Disconnected(v));
        }
        Ok(g)
    }

    /// Parse the edge-list format: one `u v weight` line per edge,
    /// whitespace-separated, `#` starts a comment.
    pub fn from_edge_list_text(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_v = 0u32;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>, what: &str| -> Result<String> {
                tok.map(str::to_owned).ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    msg: format!("missing {what}"),
                })
            };
            let u: u32 = parse(it.next(), "source vertex")?
                .parse()
                .map_err(|e| Error::Parse { line: lineno + 1, msg: format!("{e}") })?;
            let v: u32 = parse(it.next(), "target vertex")?
                .parse()
                .map_err(|e| Error::Parse { line: lineno + 1, msg: format!("{e}") })?;
            let w: f64 = parse(it.next(), "weight")?
                .parse()
                .map_err(|e| Error::Parse { line: lineno + 1, msg: format!("{e}") })?;
            max_v = max_v.max(u).max(v);
            edges.push((u, v, w));
        }
        if edges.is_empty() {
            return Err(Error::Graph("edge list is empty".into()));
        }
        WeightedGraph::from_edges(max_v as usize + 1, &edges, BoundaryMode::Reflecting)
    }

    pub fn n_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn mu(&self, x: u32) -> f64 {
        self.mu[x as usize]
    }

    pub fn mu_slice(&self) -> &[f64] {
        &self.mu
    }

    pub fn mu_total(&self) -> f64 {
        self.mu_total
    }

    pub fn neighbors(&self, x: u32) -> &[(u32, f64)] {
        &self.adjacency[x as usize]
    }

    pub fn conductance(&self, x: u32, y: u32) -> f64 {
        match self.adjacency[x as usize].binary_search_by_key(&y, |&(v, _)| v) {
            Ok(i) => self.adjacency[x as usize][i].1,
            Err(_) => 0.0,
        }
    }

    pub fn boundary_mode(&self) -> BoundaryMode {
        self.boundary_mode
    }

    /// Largest radius at which radius-dependent estimates are trusted
    /// (side/4 on torus truncations, otherwise the diameter).
    pub fn radius_guard(&self) -> u32 {
        if self.radius_guard == u32::MAX {
            self.diameter().max(1)
        } else {
            self.radius_guard
        }
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn first_unreachable(&self, start: u32) -> Option<u32> {
        let dist = self.bfs_dist_transient(start);
        dist.iter()
            .position(|&d| d == u32::MAX)
            .map(|i| i as u32)
    }

    fn bfs_dist_transient(&self, x: u32) -> Vec<u32> {
        let n = self.n_vertices();
        let mut dist = vec![u32::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        dist[x as usize] = 0;
        queue.push_back(x);
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize];
            for &(v, _) in &self.adjacency[u as usize] {
                if dist[v as usize] == u32::MAX {
                    dist[v as usize] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Memoized BFS view from `x`.
    pub fn bfs(&self, x: u32) -> Arc<BfsData> {
        self.bfs_cache[x as usize]
            .get_or_init(|| {
                let dist = self.bfs_dist_transient(x);
                let n = dist.len();
                let ecc = *dist.iter().max().unwrap();
                debug_assert!(ecc != u32::MAX, "graph verified connected at construction");
                let mut order: Vec<u32> = (0..n as u32).collect();
                order.sort_by_key(|&v| (dist[v as usize], v));
                let mut cum_count = vec![0usize; ecc as usize + 1];
                let mut cum_mu = vec![0.0f64; ecc as usize + 1];
                for &v in &order {
                    let d = dist[v as usize] as usize;
                    cum_count[d] += 1;
                    cum_mu[d] += self.mu[v as usize];
                }
                for d in 1..=ecc as usize {
                    cum_count[d] += cum_count[d - 1];
                    cum_mu[d] += cum_mu[d - 1];
                }
                Arc::new(BfsData { dist, order, cum_count, cum_mu, eccentricity: ecc })
            })
            .clone()
    }

    pub fn dist(&self, x: u32, y: u32) -> u32 {
        self.bfs(x).dist[y as usize]
    }

    /// Members of `B(x,r) = {y : d(x,y) < r}`.
    pub fn ball_members(&self, x: u32, r: u32) -> Vec<u32> {
        self.bfs(x).ball_members(r).to_vec()
    }

    pub fn ball_mu(&self, x: u32, r: u32) -> f64 {
        self.bfs(x).ball_mu(r)
    }

    /// μ(B(x,r)) for a real radius (balls only change at integers).
    pub fn ball_mu_real(&self, x: u32, r: f64) -> f64 {
        self.bfs(x).ball_mu(r.ceil().max(1.0) as u32)
    }

    pub fn diameter(&self) -> u32 {
        *self.diameter.get_or_init(|| {
            (0..self.n_vertices() as u32)
                .map(|x| *self.bfs_dist_transient(x).iter().max().unwrap())
                .max()
                .unwrap_or(0)
        })
    }

    /// Distance from every vertex to the given set (multi-source BFS).
    pub fn dist_to_set(&self, set: &[u32]) -> Vec<u32> {
        let n = self.n_vertices();
        let mut dist = vec![u32::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        for &s in set {
            if dist[s as usize] == u32::MAX {
                dist[s as usize] = 0;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize];
            for &(v, _) in &self.adjacency[u as usize] {
                if dist[v as usize] == u32::MAX {
                    dist[v as usize] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Largest α with `x ~ x` everywhere and `ν(x,y) ≥ α μ(x)` on edges.
    pub fn check_delta_alpha(&self) -> Result<f64> {
        let mut alpha = f64::INFINITY;
        for x in 0..self.n_vertices() as u32 {
            if self.conductance(x, x) <= 0.0 {
                return Err(Error::MissingLoop(x));
            }
            for &(_, w) in self.neighbors(x) {
                alpha = alpha.min(w / self.mu(x));
            }
        }
        Ok(alpha)
    }
}

/// Lazy random-walk lattice `ℤ^dim mod side` (torus) or the reflecting box.
/// Every vertex carries a loop of weight `laziness`; lattice edges have
/// weight 1.
pub fn build_lattice(
    dim: u32,
    side: u32,
    laziness: f64,
    boundary_mode: BoundaryMode,
) -> Result<WeightedGraph> {
    if !(1..=3).contains(&dim) {
        return Err(Error::Graph(format!("lattice dimension {dim} not in 1..3")));
    }
    if side < 2 {
        return Err(Error::Graph(format!(
            "side {side} too small to define radius-2 balls"
        )));
    }
    if laziness <= 0.0 {
        return Err(Error::Graph(
            "laziness must be positive: loops are required for Delta(alpha)".into(),
        ));
    }
    let n = (side as usize).pow(dim);
    let coord = |v: usize| -> [u32; 3] {
        let mut c = [0u32; 3];
        let mut rem = v;
        for item in c.iter_mut().take(dim as usize) {
            *item = (rem % side as usize) as u32;
            rem /= side as usize;
        }
        c
    };
    let index = |c: &[u32; 3]| -> usize {
        let mut v = 0usize;
        for a in (0..dim as usize).rev() {
            v = v * side as usize + c[a] as usize;
        }
        v
    };
    let mut edges: Vec<(u32, u32, f64)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for v in 0..n {
        edges.push((v as u32, v as u32, laziness));
        let c = coord(v);
        for axis in 0..dim as usize {
            for step in [-1i64, 1i64] {
                let mut c2 = c;
                let moved = c[axis] as i64 + step;
                match boundary_mode {
                    BoundaryMode::Torus => {
                        c2[axis] = moved.rem_euclid(side as i64) as u32;
                    }
                    BoundaryMode::Reflecting => {
                        if moved < 0 || moved >= side as i64 {
                            continue;
                        }
                        c2[axis] = moved as u32;
                    }
                }
                let u = index(&c2);
                if u == v {
                    continue;
                }
                let key = (v.min(u), v.max(u));
                if seen.insert(key) {
                    edges.push((key.0 as u32, key.1 as u32, 1.0));
                }
            }
        }
    }
    let mut g = WeightedGraph::from_edges(n, &edges, boundary_mode)?;
    if boundary_mode == BoundaryMode::Torus {
        g.radius_guard = (side / 4).max(1);
    }
    Ok(g)
}

/// Two torus lattices joined by a single unit edge between their origins.
/// The classical regime where the Poincaré property degenerates.
pub fn build_two_lattices_bridged(dim: u32, side: u32, laziness: f64) -> Result<WeightedGraph> {
    let copy = build_lattice(dim, side, laziness, BoundaryMode::Torus)?;
    let n = copy.n_vertices();
    let mut edges = Vec::new();
    for x in 0..n as u32 {
        for &(y, w) in copy.neighbors(x) {
            if y >= x {
                edges.push((x, y, w));
                edges.push((x + n as u32, y + n as u32, w));
            }
        }
    }
    edges.push((0, n as u32, 1.0));
    let mut g = WeightedGraph::from_edges(2 * n, &edges, BoundaryMode::Torus)?;
    g.radius_guard = side.max(1);
    Ok(g)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoublingReport {
    pub c_doubling: f64,
    /// Exponent the constant was fitted against.
    pub d_candidate: f64,
    /// Log-log regression slope over the sampled (r, s) grid.
    pub d_exponent: f64,
    /// (x, r, s) achieving the worst ratio against the candidate exponent.
    pub worst_pair: (u32, u32, u32),
    pub max_degree: usize,
}

/// Minimal `C` with `μ(B(x,r))/μ(B(x,s)) ≤ C (r/s)^D` over all sampled
/// vertices and `s ≤ r` in range, plus a regression estimate of `D`.
pub fn fit_doubling(
    g: &WeightedGraph,
    radii: std::ops::RangeInclusive<u32>,
    d_candidate: f64,
    sample: Option<&[u32]>,
) -> DoublingReport {
    let default_sample: Vec<u32> = if g.n_vertices() <= 1024 {
        (0..g.n_vertices() as u32).collect()
    } else {
        let stride = g.n_vertices() / 64;
        (0..64).map(|i| (i * stride) as u32).collect()
    };
    let xs: &[u32] = sample.unwrap_or(&default_sample);
    let lo = *radii.start();
    let hi = *radii.end().min(&g.radius_guard());
    let mut c_best = 1.0f64;
    let mut worst = (xs[0], lo, lo);
    // Regress ln μ(B) against ln r on the top half of the range, where the
    // singleton-ball discreteness no longer biases the slope.
    let reg_lo = lo.max(hi / 2).max(2);
    let mut reg = (0usize, 0.0f64, 0.0f64, 0.0f64, 0.0f64); // (n, Σx, Σy, Σxx, Σxy)
    for &x in xs {
        let bfs = g.bfs(x);
        for s in lo..=hi {
            let mu_s = bfs.ball_mu(s);
            for r in s..=hi {
                let ratio = bfs.ball_mu(r) / mu_s;
                let scale = (r as f64 / s as f64).powf(d_candidate);
                if ratio / scale > c_best {
                    c_best = ratio / scale;
                    worst = (x, r, s);
                }
            }
        }
        for r in reg_lo..=hi {
            let lx = (r as f64).ln();
            let ly = bfs.ball_mu(r).ln();
            reg.0 += 1;
            reg.1 += lx;
            reg.2 += ly;
            reg.3 += lx * lx;
            reg.4 += lx * ly;
        }
    }
    let n = reg.0 as f64;
    let denom = n * reg.3 - reg.1 * reg.1;
    let d_exponent = if denom.abs() > 1e-12 {
        (n * reg.4 - reg.1 * reg.2) / denom
    } else {
        0.0
    };
    DoublingReport {
        c_doubling: c_best,
        d_candidate,
        d_exponent,
        worst_pair: worst,
        max_degree: g.max_degree(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoincareReport {
    pub constant: f64,
    pub worst_ball: (u32, u32),
    pub trials: usize,
}

/// Minimal `C` with
/// `Σ_{x∈B} |f−f_B|² μ ≤ C r₀² Σ_{x,y∈2B} |f(x)−f(y)|² ν(x,y)`
/// over sampled balls and a randomized family of `f` (plus caller probes).
pub fn check_poincare(
    g: &WeightedGraph,
    radii: std::ops::RangeInclusive<u32>,
    trials: usize,
    seed: u64,
    extra_probes: &[Vec<f64>],
) -> PoincareReport {
    let n = g.n_vertices();
    let centers: Vec<u32> = if n <= 64 {
        (0..n as u32).collect()
    } else {
        let stride = n / 16;
        (0..16).map(|i| (i * stride) as u32).collect()
    };
    let mut probes: Vec<Vec<f64>> = Vec::new();
    for t in 0..trials {
        let mut r = rng::trial_rng(seed, t as u64);
        probes.push(rng::gaussian_vector(&mut r, n));
    }
    // Distance to a fixed vertex is the canonical slowly-varying probe.
    probes.push(g.bfs(0).dist.iter().map(|&d| d as f64).collect());
    probes.extend_from_slice(extra_probes);

    let lo = *radii.start();
    let hi = *radii.end().min(&g.radius_guard());
    let mut c_best = 0.0f64;
    let mut worst = (centers[0], lo);
    for &x0 in &centers {
        let bfs = g.bfs(x0);
        for r0 in lo..=hi {
            let inner = bfs.ball_members(r0);
            let outer = bfs.ball_members(2 * r0);
            let mu_b: f64 = bfs.ball_mu(r0);
            let in_outer: std::collections::HashSet<u32> = outer.iter().copied().collect();
            for f in &probes {
                let f_b: f64 = inner.iter().map(|&v| f[v as usize] * g.mu(v)).sum::<f64>() / mu_b;
                let lhs: f64 = inner
                    .iter()
                    .map(|&v| {
                        let d = f[v as usize] - f_b;
                        d * d * g.mu(v)
                    })
                    .sum();
                let mut rhs = 0.0;
                for &x in outer {
                    for &(y, w) in g.neighbors(x) {
                        if in_outer.contains(&y) {
                            let d = f[x as usize] - f[y as usize];
                            rhs += d * d * w;
                        }
                    }
                }
                rhs *= (r0 as f64) * (r0 as f64);
                if rhs > 0.0 && lhs / rhs > c_best {
                    c_best = lhs / rhs;
                    worst = (x0, r0);
                }
            }
        }
    }
    PoincareReport { constant: c_best, worst_ball: worst, trials }
}
