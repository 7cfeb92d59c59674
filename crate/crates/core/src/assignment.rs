//! Three-dimensional axial assignment over the cost tensor Q: pick
//! triples (cluster, UE, block) so each index on each axis is used at
//! most once, maximizing total cost. An exact solver covers small
//! instances; a Lagrangian-relaxation heuristic covers full scale.

use crate::{Error, Result};

/// Maximum axis length accepted by [`solve_exact`].
pub const EXACT_SIZE_LIMIT: usize = 8;

/// Cost used to mask cells that must never be selected. Kept finite so
/// the matching arithmetic stays well conditioned.
pub const MASKED: f64 = -1e18;

/// Cost tensor Q (R x A x B) plus the alignment-index tensor iota
/// recording the best alignment target behind each cost entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTensor {
    pub dims: (usize, usize, usize),
    q: Vec<f64>,
    iota: Vec<usize>,
}

impl CostTensor {
    pub fn zeros(r: usize, a: usize, b: usize) -> Self {
        Self {
            dims: (r, a, b),
            q: vec![0.0; r * a * b],
            iota: vec![0; r * a * b],
        }
    }

    fn idx(&self, r: usize, u: usize, b: usize) -> usize {
        let (_, a, nb) = self.dims;
        (r * a + u) * nb + b
    }

    pub fn cost(&self, r: usize, u: usize, b: usize) -> f64 {
        self.q[self.idx(r, u, b)]
    }

    pub fn iota(&self, r: usize, u: usize, b: usize) -> usize {
        self.iota[self.idx(r, u, b)]
    }

    pub fn set(&mut self, r: usize, u: usize, b: usize, cost: f64, iota: usize) {
        let i = self.idx(r, u, b);
        self.q[i] = cost;
        self.iota[i] = iota;
    }

    /// Largest axis length.
    pub fn max_dim(&self) -> usize {
        self.dims.0.max(self.dims.1).max(self.dims.2)
    }

    /// Writes the instance in a plain text format: a `dims` line then
    /// one `r u b cost` line per entry.
    pub fn dump<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let (r, a, b) = self.dims;
        writeln!(out, "dims {r} {a} {b}")?;
        for ri in 0..r {
            for ui in 0..a {
                for bi in 0..b {
                    writeln!(out, "{ri} {ui} {bi} {}", self.cost(ri, ui, bi))?;
                }
            }
        }
        Ok(())
    }

    /// Parses the text format written by [`CostTensor::dump`].
    pub fn load(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty instance".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "dims" {
            return Err(Error::Parse(format!("bad header line: {header}")));
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad dimension {s}: {e}")))
        };
        let (r, a, b) = (parse_dim(parts[1])?, parse_dim(parts[2])?, parse_dim(parts[3])?);
        let mut t = CostTensor::zeros(r, a, b);
        for line in lines {
            let p: Vec<&str> = line.split_whitespace().collect();
            if p.len() != 4 {
                return Err(Error::Parse(format!("bad entry line: {line}")));
            }
            let ri = parse_dim(p[0])?;
            let ui = parse_dim(p[1])?;
            let bi = parse_dim(p[2])?;
            let c: f64 = p[3]
                .parse()
                .map_err(|e| Error::Parse(format!("bad cost {}: {e}", p[3])))?;
            if ri >= r || ui >= a || bi >= b {
                return Err(Error::Parse(format!("index out of range: {line}")));
            }
            t.set(ri, ui, bi, c, 0);
        }
        Ok(t)
    }
}

/// A feasible axial assignment: real (cluster, UE, block) triples and
/// the total cost over them.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment3D {
    pub triples: Vec<(usize, usize, usize)>,
    pub value: f64,
}

/// Pads all axes to V = max(R, A, B) with zero-cost dummy entries.
pub fn pad_tensor(t: &CostTensor) -> CostTensor {
    let v = t.max_dim();
    let (r, a, b) = t.dims;
    if r == v && a == v && b == v {
        return t.clone();
    }
    let mut out = CostTensor::zeros(v, v, v);
    for ri in 0..r {
        for ui in 0..a {
            for bi in 0..b {
                out.set(ri, ui, bi, t.cost(ri, ui, bi), t.iota(ri, ui, bi));
            }
        }
    }
    out
}

/// O(n^3) Hungarian algorithm for square min-cost assignment.
/// Returns (row -> column, total cost).
pub fn hungarian_min(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    assert!(cost.iter().all(|row| row.len() == n), "matrix must be square");
    // 1-indexed potentials; column 0 is the virtual start column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[col] = row matched to col
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    let total = (0..n).map(|i| cost[i][row_to_col[i]]).sum();
    (row_to_col, total)
}

/// Max-assignment wrapper around [`hungarian_min`].
pub fn hungarian_max(profit: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let neg: Vec<Vec<f64>> = profit
        .iter()
        .map(|row| row.iter().map(|c| -c).collect())
        .collect();
    let (m, total) = hungarian_min(&neg);
    (m, -total)
}

fn strip_dummies(
    t: &CostTensor,
    perm_u: &[usize],
    perm_b: &[usize],
) -> Assignment3D {
    let (r0, a0, b0) = t.dims;
    let mut triples = Vec::new();
    let mut value = 0.0;
    for (r, (&u, &b)) in perm_u.iter().zip(perm_b).enumerate() {
        if r < r0 && u < a0 && b < b0 {
            triples.push((r, u, b));
            value += t.cost(r, u, b);
        }
    }
    Assignment3D { triples, value }
}

/// Exact maximization by enumerating the UE-axis permutation and
/// solving the remaining cluster-block matching optimally. Bounded to
/// V <= 8 (factorial search).
pub fn solve_exact(t: &CostTensor) -> Result<Assignment3D> {
    let v = t.max_dim();
    if v > EXACT_SIZE_LIMIT {
        return Err(Error::ExactSolverSize(v, EXACT_SIZE_LIMIT));
    }
    let padded = pad_tensor(t);
    let mut perm: Vec<usize> = (0..v).collect();
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    permute(&mut perm, 0, &mut |sigma| {
        let profit: Vec<Vec<f64>> = (0..v)
            .map(|r| (0..v).map(|b| padded.cost(r, sigma[r], b)).collect())
            .collect();
        let (blocks, total) = hungarian_max(&profit);
        if best.as_ref().map_or(true, |(bv, _, _)| total > *bv) {
            best = Some((total, sigma.to_vec(), blocks));
        }
    });
    let (_, sigma, blocks) = best.unwrap();
    Ok(strip_dummies(t, &sigma, &blocks))
}

fn permute<F: FnMut(&[usize])>(items: &mut Vec<usize>, k: usize, visit: &mut F) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Number of Lagrangian relaxation rounds in [`solve_heuristic`].
pub const HEURISTIC_ROUNDS: usize = 20;

/// Lagrangian-relaxation heuristic: relax the block axis with
/// multipliers, solve the cluster-UE matching exactly each round,
/// update multipliers by subgradient steps, repair block conflicts
/// greedily, then improve by 2-swap local search. Keeps the best
/// feasible solution seen.
pub fn solve_heuristic(t: &CostTensor) -> Assignment3D {
    let padded = pad_tensor(t);
    let v = padded.max_dim();
    if v == 0 {
        return Assignment3D {
            triples: Vec::new(),
            value: 0.0,
        };
    }
    let mut mu = vec![0.0f64; v];
    // subgradient step scale tied to the cost magnitude
    let scale = {
        let mut s = 0.0;
        let mut cnt = 0usize;
        for r in 0..v {
            for u in 0..v {
                for b in 0..v {
                    let c = padded.cost(r, u, b);
                    if c > MASKED / 2.0 {
                        s += c.abs();
                        cnt += 1;
                    }
                }
            }
        }
        (s / cnt.max(1) as f64).max(1e-12)
    };

    // greedy construction as a guaranteed candidate: take the best
    // remaining cell until all axes are exhausted, then polish
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = {
        let mut cells: Vec<(f64, usize, usize, usize)> = Vec::with_capacity(v * v * v);
        for r in 0..v {
            for u in 0..v {
                for b in 0..v {
                    cells.push((padded.cost(r, u, b), r, u, b));
                }
            }
        }
        cells.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
        let mut sigma = vec![usize::MAX; v];
        let mut blocks = vec![usize::MAX; v];
        let mut u_used = vec![false; v];
        let mut b_used = vec![false; v];
        for (_, r, u, b) in cells {
            if sigma[r] == usize::MAX && !u_used[u] && !b_used[b] {
                sigma[r] = u;
                blocks[r] = b;
                u_used[u] = true;
                b_used[b] = true;
            }
        }
        local_search(&padded, &mut sigma, &mut blocks);
        let value: f64 = (0..v).map(|r| padded.cost(r, sigma[r], blocks[r])).sum();
        Some((value, sigma, blocks))
    };

    for round in 1..=HEURISTIC_ROUNDS {
        // reduced 2D profit: each (r, u) picks its best block under mu
        let mut argb = vec![vec![0usize; v]; v];
        let profit: Vec<Vec<f64>> = (0..v)
            .map(|r| {
                (0..v)
                    .map(|u| {
                        let mut best_b = 0usize;
                        let mut best_c = f64::NEG_INFINITY;
                        for b in 0..v {
                            let c = padded.cost(r, u, b) - mu[b];
                            if c > best_c {
                                best_c = c;
                                best_b = b;
                            }
                        }
                        argb[r][u] = best_b;
                        best_c
                    })
                    .collect()
            })
            .collect();
        let (sigma, _) = hungarian_max(&profit);

        // block usage counts drive the subgradient
        let mut counts = vec![0usize; v];
        for r in 0..v {
            counts[argb[r][sigma[r]]] += 1;
        }

        // greedy repair: keep the highest-cost claim on each block,
        // reassign the rest to their best free block
        let mut blocks = vec![usize::MAX; v];
        let mut used = vec![false; v];
        let mut order: Vec<usize> = (0..v).collect();
        order.sort_by(|&x, &y| {
            let cx = padded.cost(x, sigma[x], argb[x][sigma[x]]);
            let cy = padded.cost(y, sigma[y], argb[y][sigma[y]]);
            cy.partial_cmp(&cx).unwrap().then(x.cmp(&y))
        });
        for &r in &order {
            let want = argb[r][sigma[r]];
            if !used[want] {
                used[want] = true;
                blocks[r] = want;
            }
        }
        for r in 0..v {
            if blocks[r] == usize::MAX {
                let mut best_b = usize::MAX;
                let mut best_c = f64::NEG_INFINITY;
                for b in 0..v {
                    if !used[b] {
                        let c = padded.cost(r, sigma[r], b);
                        if c > best_c {
                            best_c = c;
                            best_b = b;
                        }
                    }
                }
                used[best_b] = true;
                blocks[r] = best_b;
            }
        }

        let mut sigma = sigma;
        local_search(&padded, &mut sigma, &mut blocks);
        let value: f64 = (0..v).map(|r| padded.cost(r, sigma[r], blocks[r])).sum();
        if best.as_ref().map_or(true, |(bv, _, _)| value > *bv) {
            best = Some((value, sigma, blocks));
        }

        let step = scale / (round as f64).sqrt();
        for b in 0..v {
            mu[b] += step * (counts[b] as f64 - 1.0);
        }
    }
    let (_, sigma, blocks) = best.unwrap();
    strip_dummies(t, &sigma, &blocks)
}

/// 2-swap local search over block pairs and UE pairs; value is monotone
/// non-decreasing across iterations.
fn local_search(padded: &CostTensor, sigma: &mut [usize], blocks: &mut [usize]) {
    let v = sigma.len();
    loop {
        let mut improved = false;
        for i in 0..v {
            for j in (i + 1)..v {
                let cur =
                    padded.cost(i, sigma[i], blocks[i]) + padded.cost(j, sigma[j], blocks[j]);
                let swap_b =
                    padded.cost(i, sigma[i], blocks[j]) + padded.cost(j, sigma[j], blocks[i]);
                let swap_u =
                    padded.cost(i, sigma[j], blocks[i]) + padded.cost(j, sigma[i], blocks[j]);
                if swap_b > cur + 1e-12 && swap_b >= swap_u {
                    blocks.swap(i, j);
                    improved = true;
                } else if swap_u > cur + 1e-12 {
                    sigma.swap(i, j);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Solves with the exact solver when the instance fits its size bound,
/// the heuristic otherwise.
pub fn solve(t: &CostTensor) -> Assignment3D {
    if t.max_dim() <= EXACT_SIZE_LIMIT {
        solve_exact(t).expect("size checked")
    } else {
        solve_heuristic(t)
    }
}
