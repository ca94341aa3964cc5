//! Per-class spectral data: radius, period with its periodic layers, and
//! positive left/right eigenvector pairs for irreducible blocks.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::WeightedDigraph;
use crate::matrix::Matrix;

/// Iteration cap for the power method.
pub const ITERATION_CAP: usize = 10_000;

// eigen-residual targets, relative to the shifted eigenvalue: the power
// stage stops at POWER_TOL, inverse-iteration polish then sharpens the
// vector, and anything still above ACCEPT_TOL is a failure
const POWER_TOL: f64 = 1e-12;
const REFINE_ROUNDS: usize = 4;
const ACCEPT_TOL: f64 = 1e-10;

/// Spectral computation failures.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralError {
    /// Power iteration missed the tolerance within the cap.
    NoConvergence { residual: f64 },
    /// The block has spectral radius zero.
    ZeroRadius,
    /// Period data does not describe the class (bad partition or residue
    /// steps, or a vector of the wrong length).
    InconsistentPeriod,
    /// The class is not strongly connected.
    NotStronglyConnected,
}

impl fmt::Display for SpectralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralError::NoConvergence { residual } => {
                write!(f, "power iteration did not converge (residual {residual:e})")
            }
            SpectralError::ZeroRadius => write!(f, "block has spectral radius zero"),
            SpectralError::InconsistentPeriod => {
                write!(f, "period data does not describe the class")
            }
            SpectralError::NotStronglyConnected => {
                write!(f, "vertex set is not strongly connected")
            }
        }
    }
}

impl core::error::Error for SpectralError {}

/// Positive left/right eigenvector pair for an irreducible block, with
/// `left·right = 1` and `right` at unit max-entry for base pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronPair {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub rho: f64,
}

/// Period of a class with its periodic layers: every edge inside the class
/// steps from layer `j` to layer `j+1 mod d`. A class without edges has
/// period 0 and no layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodData {
    pub period: usize,
    /// Layers as original vertex indices, ascending inside each layer; the
    /// breadth-first root sits in layer 0.
    pub periodic_classes: Vec<Vec<usize>>,
}

/// Largest eigenvalue modulus of the class block by power iteration on the
/// shifted block `F_D + c·Id` (`c` = max row sum, killing periodicity);
/// a singleton without a self-loop yields 0.
pub fn spectral_radius_class(g: &WeightedDigraph, class: &[usize]) -> Result<f64, SpectralError> {
    let block = g.adjacency().submatrix(class, class);
    leading_pair(&block).map(|(rho, _)| rho)
}

/// Power iteration on the shifted block, sharpened by inverse iteration;
/// returns the unshifted radius and the (max-normalized) dominant
/// eigenvector.
fn leading_pair(block: &Matrix) -> Result<(f64, Vec<f64>), SpectralError> {
    let n = block.rows();
    if n == 1 {
        // a 1x1 block is exact
        return Ok((block.get(0, 0), vec![1.0]));
    }
    let c = block.op_inf_norm();
    if c == 0.0 {
        // zero block: radius 0
        return Ok((0.0, vec![1.0; n]));
    }
    let shifted = block
        .add(&Matrix::identity(n).scale(c))
        .expect("shift has matching dimension");
    // power stage: positive, max-normalized iterates; track the pair with
    // the smallest eigen-residual seen
    let mut v = vec![1.0; n];
    let mut best_res = f64::INFINITY;
    let mut best = (c, v.clone());
    for _ in 0..ITERATION_CAP {
        let w = shifted.mul_vec(&v).expect("iterate has matching dimension");
        let vw: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let vv: f64 = v.iter().map(|a| a * a).sum();
        let lam = vw / vv;
        let res = eigen_residual(&w, &v, lam);
        if res < best_res {
            best_res = res;
            best = (lam, v.clone());
        }
        if best_res <= POWER_TOL * lam {
            break;
        }
        let max = w.iter().fold(0.0f64, |acc, &x| if x > acc { x } else { acc });
        // positive diagonal keeps positive vectors positive
        v = w.iter().map(|&x| x / max).collect();
    }
    // polish stage: one inverse-iteration solve per round contracts the
    // off-eigenvector error by |lam1-sigma|/|lam2-sigma|; keep a polished
    // candidate only when strictly positive and strictly more accurate
    for _ in 0..REFINE_ROUNDS {
        let (lam, ref vec) = best;
        let mut solved = None;
        for attempt in 0..3 {
            // nudge sigma off an exactly singular shift when a solve fails
            let sigma = lam * (1.0 + 1e-9 * attempt as f64);
            let mut m = shifted.clone();
            for i in 0..n {
                m.set(i, i, m.get(i, i) - sigma);
            }
            let mut rhs = Matrix::zeros(n, 1);
            for (i, &x) in vec.iter().enumerate() {
                rhs.set(i, 0, x);
            }
            if let Ok(sol) = m.solve(&rhs) {
                solved = Some(sol);
                break;
            }
        }
        let Some(sol) = solved else { break };
        let w: Vec<f64> = (0..n).map(|i| sol.get(i, 0)).collect();
        let mut dominant = 0.0f64;
        for &x in &w {
            if libm::fabs(x) > libm::fabs(dominant) {
                dominant = x;
            }
        }
        if dominant == 0.0 {
            break;
        }
        // dividing by the dominant entry orients the candidate positively
        let cand: Vec<f64> = w.iter().map(|&x| x / dominant).collect();
        let bw = shifted.mul_vec(&cand).expect("iterate has matching dimension");
        let cw: f64 = cand.iter().zip(&bw).map(|(a, b)| a * b).sum();
        let cc: f64 = cand.iter().map(|a| a * a).sum();
        let clam = cw / cc;
        let res = eigen_residual(&bw, &cand, clam);
        if res < best_res && cand.iter().all(|&x| x > 0.0) {
            best_res = res;
            best = (clam, cand);
        } else {
            break;
        }
    }
    let (lam, v) = best;
    if best_res > ACCEPT_TOL * lam {
        return Err(SpectralError::NoConvergence { residual: best_res });
    }
    Ok((lam - c, v))
}

// max-norm residual of the pair (lam, v) given w = B·v
fn eigen_residual(w: &[f64], v: &[f64], lam: f64) -> f64 {
    w.iter()
        .zip(v)
        .map(|(&a, &b)| libm::fabs(a - lam * b))
        .fold(0.0, f64::max)
}

/// Period and periodic layers by breadth-first leveling: `d` is the gcd
/// over within-class edges `(u,v)` of `level(u)+1-level(v)`, and the
/// layers are the level residues mod `d`.
pub fn period_class(g: &WeightedDigraph, class: &[usize]) -> Result<PeriodData, SpectralError> {
    let n = g.vertex_count();
    let mut local = vec![usize::MAX; n];
    for (i, &v) in class.iter().enumerate() {
        local[v] = i;
    }
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for &u in class {
        for (y, _) in g.out_edges(u) {
            if local[y] != usize::MAX {
                edges.push((local[u], local[y]));
            }
        }
    }
    if edges.is_empty() {
        return Ok(PeriodData { period: 0, periodic_classes: Vec::new() });
    }
    // breadth-first levels from the first class vertex
    let m = class.len();
    let mut level = vec![usize::MAX; m];
    level[0] = 0;
    let mut queue = vec![0usize];
    let mut head = 0;
    while head < queue.len() {
        let u = queue[head];
        head += 1;
        for &(a, b) in &edges {
            if a == u && level[b] == usize::MAX {
                level[b] = level[u] + 1;
                queue.push(b);
            }
        }
    }
    if level.contains(&usize::MAX) {
        return Err(SpectralError::NotStronglyConnected);
    }
    let mut d: i64 = 0;
    for &(a, b) in &edges {
        let step = level[a] as i64 + 1 - level[b] as i64;
        d = gcd(d, step.unsigned_abs() as i64);
    }
    if d == 0 {
        // edges all advance the leveling forever, impossible in a finite
        // strongly connected class
        return Err(SpectralError::NotStronglyConnected);
    }
    let d = d as usize;
    let mut layers: Vec<Vec<usize>> = vec![Vec::new(); d];
    for (i, &v) in class.iter().enumerate() {
        layers[level[i] % d].push(v);
    }
    for layer in &mut layers {
        layer.sort_unstable();
    }
    // residue-step property must hold exactly for every edge
    for &(a, b) in &edges {
        if (level[a] + 1) % d != level[b] % d {
            return Err(SpectralError::InconsistentPeriod);
        }
    }
    Ok(PeriodData { period: d, periodic_classes: layers })
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Positive left/right eigenvector pair of an irreducible class block,
/// normalized so the right vector has unit max-entry and `left·right = 1`.
pub fn perron_pair(g: &WeightedDigraph, class: &[usize]) -> Result<PerronPair, SpectralError> {
    let block = g.adjacency().submatrix(class, class);
    let (rho, right_raw) = leading_pair(&block)?;
    if rho <= 0.0 {
        return Err(SpectralError::ZeroRadius);
    }
    let (_, left_raw) = leading_pair(&block.transpose())?;
    let max = right_raw.iter().fold(0.0f64, |acc, &x| if x > acc { x } else { acc });
    let right: Vec<f64> = right_raw.iter().map(|&x| x / max).collect();
    let dot: f64 = left_raw.iter().zip(&right).map(|(a, b)| a * b).sum();
    let left: Vec<f64> = left_raw.iter().map(|&x| x / dot).collect();
    // one rayleigh refinement with both vectors: left·F·right at left·right=1
    let fr = block.mul_vec(&right).expect("block is square");
    let rho = left.iter().zip(&fr).map(|(a, b)| a * b).sum();
    Ok(PerronPair { left, right, rho })
}

/// Transports a Perron pair of the layer-0 aggregated block of the d-th
/// power to every periodic layer: `ℓ_i = ρ^-i·ℓ_0·Q_0⋯Q_{i-1}` and
/// `r_i = ρ^(i-d)·Q_i⋯Q_{d-1}·r_0` with `Q_i` the layer-step blocks of F.
/// Each returned pair is positive with `left·right = 1` and carries the
/// power-block radius `ρ^d`.
pub fn transported_pairs(
    g: &WeightedDigraph,
    class: &[usize],
    period_data: &PeriodData,
    base_pair: &PerronPair,
) -> Result<Vec<PerronPair>, SpectralError> {
    let d = period_data.period;
    if d == 0 {
        return Err(SpectralError::InconsistentPeriod);
    }
    let layers = &period_data.periodic_classes;
    // the layers must partition the class and carry the base pair's size
    let mut seen: Vec<usize> = layers.iter().flatten().copied().collect();
    seen.sort_unstable();
    let mut sorted_class = class.to_vec();
    sorted_class.sort_unstable();
    if seen != sorted_class
        || base_pair.right.len() != layers[0].len()
        || base_pair.left.len() != layers[0].len()
    {
        return Err(SpectralError::InconsistentPeriod);
    }
    // every class edge must step one layer forward
    let mut layer_of = vec![usize::MAX; g.vertex_count()];
    for (j, layer) in layers.iter().enumerate() {
        for &v in layer {
            layer_of[v] = j;
        }
    }
    for &u in class {
        for (y, _) in g.out_edges(u) {
            if layer_of[y] != usize::MAX && layer_of[y] != (layer_of[u] + 1) % d {
                return Err(SpectralError::InconsistentPeriod);
            }
        }
    }
    if base_pair.rho <= 0.0 {
        return Err(SpectralError::ZeroRadius);
    }
    let rho = libm::pow(base_pair.rho, 1.0 / d as f64);
    let adj = g.adjacency();
    let q = |i: usize| adj.submatrix(&layers[i], &layers[(i + 1) % d]);
    // lefts run forward from layer 0
    let mut lefts: Vec<Vec<f64>> = Vec::with_capacity(d);
    lefts.push(base_pair.left.clone());
    for i in 1..d {
        let prev = &lefts[i - 1];
        let step = q(i - 1)
            .vec_mul(prev)
            .expect("layer blocks chain by construction");
        lefts.push(step.iter().map(|&x| x / rho).collect());
    }
    // rights run backward to layer 0's vector
    let mut rights: Vec<Vec<f64>> = vec![Vec::new(); d];
    rights[0] = base_pair.right.clone();
    for i in (1..d).rev() {
        let next = if i == d - 1 { &rights[0] } else { &rights[i + 1] };
        let step = q(i).mul_vec(next).expect("layer blocks chain by construction");
        rights[i] = step.iter().map(|&x| x / rho).collect();
    }
    let mut pairs = Vec::with_capacity(d);
    for i in 0..d {
        if i == 0 {
            pairs.push(base_pair.clone());
            continue;
        }
        let dot: f64 = lefts[i].iter().zip(&rights[i]).map(|(a, b)| a * b).sum();
        if dot <= 0.0 {
            return Err(SpectralError::InconsistentPeriod);
        }
        let left: Vec<f64> = lefts[i].iter().map(|&x| x / dot).collect();
        pairs.push(PerronPair { left, right: rights[i].clone(), rho: base_pair.rho });
    }
    Ok(pairs)
}
