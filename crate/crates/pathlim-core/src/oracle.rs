//! Independent brute-force and numeric cross-checks for the test suites and
//! the `verify` command: exhaustive path enumeration, a numeric limit for
//! the residual matrix, the kernel-stabilization dimension attached to the
//! leading eigenvalue, and a reproducible random digraph corpus.
//!
//! These deliberately share no numeric routines with the implementations
//! they check: inversion here is Gauss–Jordan with full pivoting, ranks come
//! from Jacobi singular values, reachability is a plain breadth-first
//! search, and the spectral radius is the norm limit of repeated squarings.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::{Path, WeightedDigraph};
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Default cap on the number of enumerated paths.
pub const PATH_CAP: usize = 1_000_000;

/// Default evaluation schedule for [`numeric_residual`]: exponents `j` in
/// `s = (1 - 10^-j)/rho`. The last point sits close enough to the pole
/// that truncation clears 1e-4 even for narrow spectral gaps, yet far
/// enough that the inversion's conditioning keeps roundoff below it.
pub const DEFAULT_SCHEDULE: [u32; 4] = [2, 4, 6, 8];

/// Size bound for [`generalized_eigenspace_dim`].
pub const EIG_SIZE_BOUND: usize = 8;

/// Corpus generation parameters: vertex bound and weight bound.
pub const CORPUS_MAX_V: usize = 6;
pub const CORPUS_MAX_W: u64 = 3;

/// Oracle failure modes.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    /// Enumeration would exceed the configured path cap.
    CapExceeded { cap: usize },
    /// The spectral radius is zero, so the evaluation schedule is undefined.
    DegenerateRadius,
    /// No point of the schedule evaluated to a finite matrix.
    NoStableIterate,
    /// Matrix too large for the dense rank sweep.
    SizeBound { size: usize, bound: usize },
    /// Singular values fail to separate cleanly at the rank threshold.
    IllConditionedRank { gap: f64 },
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::CapExceeded { cap } => {
                write!(f, "path enumeration exceeds cap of {cap}")
            }
            OracleError::DegenerateRadius => {
                write!(f, "spectral radius is zero; no evaluation points exist")
            }
            OracleError::NoStableIterate => {
                write!(f, "no schedule point evaluated to a finite matrix")
            }
            OracleError::SizeBound { size, bound } => {
                write!(f, "matrix size {size} exceeds rank-sweep bound {bound}")
            }
            OracleError::IllConditionedRank { gap } => {
                write!(f, "singular-value gap {gap:e} too small for a rank decision")
            }
        }
    }
}

impl core::error::Error for OracleError {}

/// All paths from `x` of length exactly `k`, with their weights, in
/// depth-first order by vertex index. Fails once more than `PATH_CAP`
/// paths would be produced.
pub fn enumerate_paths(
    g: &WeightedDigraph,
    x: usize,
    k: usize,
) -> Result<Vec<(Path, f64)>, OracleError> {
    enumerate_paths_with_cap(g, x, k, PATH_CAP)
}

/// [`enumerate_paths`] with an explicit cap.
pub fn enumerate_paths_with_cap(
    g: &WeightedDigraph,
    x: usize,
    k: usize,
    cap: usize,
) -> Result<Vec<(Path, f64)>, OracleError> {
    let mut out = Vec::new();
    let mut stack = vec![x];
    dfs_paths(g, k, &mut stack, 1.0, cap, &mut out)?;
    Ok(out)
}

fn dfs_paths(
    g: &WeightedDigraph,
    remaining: usize,
    stack: &mut Vec<usize>,
    weight: f64,
    cap: usize,
    out: &mut Vec<(Path, f64)>,
) -> Result<(), OracleError> {
    if remaining == 0 {
        if out.len() >= cap {
            return Err(OracleError::CapExceeded { cap });
        }
        let path = Path::new(stack.clone()).expect("stack is nonempty");
        out.push((path, weight));
        return Ok(());
    }
    let v = *stack.last().expect("stack is nonempty");
    for (y, w) in g.out_edges(v) {
        stack.push(y);
        dfs_paths(g, remaining - 1, stack, weight * w, cap, out)?;
        stack.pop();
    }
    Ok(())
}

/// True when the digraph contains a cycle (equivalently, its spectral
/// radius is positive). Exact structural test by depth-first coloring.
pub fn has_cycle(g: &WeightedDigraph) -> bool {
    // 0 = white, 1 = on stack, 2 = done
    let n = g.vertex_count();
    let mut color = vec![0u8; n];
    for start in 0..n {
        if color[start] != 0 {
            continue;
        }
        // iterative dfs keeping an explicit edge iterator per frame
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        color[start] = 1;
        while let Some(&(v, mut next)) = stack.last() {
            let mut advanced = false;
            while next < n {
                if g.has_edge(v, next) {
                    if color[next] == 1 {
                        return true;
                    }
                    if color[next] == 0 {
                        stack.last_mut().expect("stack nonempty").1 = next + 1;
                        color[next] = 1;
                        stack.push((next, 0));
                        advanced = true;
                        break;
                    }
                }
                next += 1;
            }
            if !advanced {
                // the child scan ran off the end: retire the frame
                color[v] = 2;
                stack.pop();
            }
        }
    }
    false
}

/// Vertices reachable from `x` by paths of any length (including `x`),
/// by breadth-first search.
pub fn bfs_reachable(g: &WeightedDigraph, x: usize) -> Vec<bool> {
    let n = g.vertex_count();
    let mut seen = vec![false; n];
    seen[x] = true;
    let mut queue = vec![x];
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        for (y, _) in g.out_edges(v) {
            if !seen[y] {
                seen[y] = true;
                queue.push(y);
            }
        }
    }
    seen
}

/// Spectral radius as the norm limit of repeated squarings,
/// `lim ‖F^(2^k)‖^(1/2^k)`, with log-scale accumulation. 50 squarings put
/// the residual polynomial factor at machine precision.
pub fn gelfand_radius(g: &WeightedDigraph) -> f64 {
    let mut cur = grid_from(g.adjacency());
    let mut log_scale = 0.0f64;
    for _ in 0..50 {
        let norm = grid_row_norm(&cur);
        if norm == 0.0 {
            return 0.0;
        }
        grid_scale(&mut cur, 1.0 / norm);
        log_scale = 2.0 * (log_scale + libm::log(norm));
        cur = grid_mul(&cur, &cur);
    }
    let norm = grid_row_norm(&cur);
    if norm == 0.0 {
        return 0.0;
    }
    let k = 50u32;
    libm::exp((log_scale + libm::log(norm)) / libm::pow(2.0, k as f64))
}

/// Trend of the residual evaluation along the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Converging,
    Diverging,
}

/// Result of [`numeric_residual`]: the stable iterates `(s, (1-ρs)^h·H(s))`
/// in schedule order, the last stable iterate, and the trend.
#[derive(Debug, Clone)]
pub struct NumericResidual {
    pub rho: f64,
    pub iterates: Vec<(f64, Matrix)>,
    pub estimate: Matrix,
    pub trend: Trend,
}

/// Evaluates `(1-ρs)^h · (Id - sF)^{-1}` along `s = (1-10^-j)/ρ` for the
/// exponents in `schedule`, via this module's own full-pivot inversion.
/// Blowup points are dropped; the last stable iterate is the estimate.
pub fn numeric_residual(
    g: &WeightedDigraph,
    h: usize,
    schedule: &[u32],
) -> Result<NumericResidual, OracleError> {
    let rho = gelfand_radius(g);
    if rho <= 0.0 {
        return Err(OracleError::DegenerateRadius);
    }
    let n = g.vertex_count();
    let f = grid_from(g.adjacency());
    let mut iterates: Vec<(f64, Matrix)> = Vec::new();
    for &j in schedule {
        let eps = libm::pow(10.0, -(j as f64));
        let s = (1.0 - eps) / rho;
        // id - s f
        let mut a = vec![vec![0.0; n]; n];
        for (r, row) in a.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                let idv = if r == c { 1.0 } else { 0.0 };
                *entry = idv - s * f[r][c];
            }
        }
        let inv = match gj_invert(&a) {
            Some(inv) => inv,
            None => continue,
        };
        let factor = libm::pow(eps, h as f64);
        let mut m = Matrix::zeros(n, n);
        let mut finite = true;
        for (r, row) in inv.iter().enumerate() {
            for (c, &entry) in row.iter().enumerate() {
                let v = factor * entry;
                if !v.is_finite() {
                    finite = false;
                }
                m.set(r, c, v);
            }
        }
        if finite {
            iterates.push((s, m));
        }
    }
    let Some((_, last)) = iterates.last() else {
        return Err(OracleError::NoStableIterate);
    };
    let trend = classify_trend(&iterates);
    Ok(NumericResidual { rho, iterates: iterates.clone(), estimate: last.clone(), trend })
}

fn classify_trend(iterates: &[(f64, Matrix)]) -> Trend {
    if iterates.len() < 2 {
        return Trend::Converging;
    }
    let first_norm = iterates[0].1.max_abs();
    let last_norm = iterates[iterates.len() - 1].1.max_abs();
    // a too-small exponent leaves a pole, growing magnitudes ~10x per
    // schedule step; a correct exponent keeps the ratio near 1. entry
    // diffs are not usable here: conditioning near the pole amplifies
    // roundoff by 1/(1-rho*s), so even a constant sequence drifts.
    if last_norm > 3.0 * first_norm + 1e-300 {
        Trend::Diverging
    } else {
        Trend::Converging
    }
}

/// Dimension attached to `rho` through kernel stabilization: the smallest
/// `k` with `ker((F - ρId)^k) = ker((F - ρId)^(k+1))`, i.e. the
/// multiplicity of `rho` in the minimal polynomial, computed through
/// numeric ranks of the powers.
pub fn generalized_eigenspace_dim(f: &Matrix, rho: f64) -> Result<usize, OracleError> {
    let n = f.rows();
    if n > EIG_SIZE_BOUND {
        return Err(OracleError::SizeBound { size: n, bound: EIG_SIZE_BOUND });
    }
    // m = (f - rho id), normalized so powers stay well scaled
    let mut m = grid_from(f);
    for (r, row) in m.iter_mut().enumerate() {
        row[r] -= rho;
    }
    let scale = grid_max_abs(&m);
    if scale > 0.0 {
        grid_scale(&mut m, 1.0 / scale);
    }
    let mut power = grid_identity(n);
    let mut prev_rank = n;
    for k in 1..=n + 1 {
        power = grid_mul(&power, &m);
        let mag = grid_max_abs(&power);
        if mag > 0.0 {
            grid_scale(&mut power, 1.0 / mag);
        }
        let rank = numeric_rank(&power)?;
        if rank == prev_rank {
            return Ok(k - 1);
        }
        prev_rank = rank;
    }
    // kernels of powers always stabilize by the matrix size
    Ok(n)
}

/// Reproducible random digraph: `1 + seed-draw % maxV` vertices named
/// `v0..`, each ordered pair an edge with probability 0.4 carrying an
/// integer weight in `1..=maxW` (so `maxW = 0` yields no edges).
pub fn random_digraph(seed: u64, max_v: usize, max_w: u64) -> WeightedDigraph {
    assert!(max_v >= 1, "vertex bound must be at least 1");
    let mut rng = Rng::new(seed);
    let n = 1 + rng.next_below(max_v as u64) as usize;
    let tokens: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut weights = Matrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let present = rng.next_f64() < 0.4;
            if present && max_w > 0 {
                let w = 1 + rng.next_below(max_w);
                weights.set(r, c, w as f64);
            }
        }
    }
    WeightedDigraph::new(tokens, weights).expect("generated digraph is well formed")
}

/// Frozen corpus seeds: the first 200 seeds from 1 upward whose
/// [`random_digraph`] at the corpus parameters contains a cycle (positive
/// spectral radius).
pub const CORPUS_SEEDS: [u64; 200] = [
    1, 2, 4, 6, 7, 8, 9, 10, 11, 12, 13, 14, 16, 17, 19, 21, 22, 23, 24, 25, 26, 27, 28, 29, 30,
    32, 33, 34, 35, 36, 38, 39, 40, 41, 42, 45, 46, 47, 48, 50, 51, 52, 53, 54, 55, 57, 58, 59,
    60, 62, 63, 64, 65, 67, 68, 69, 70, 71, 72, 73, 74, 75, 76, 77, 78, 79, 80, 81, 83, 85, 86,
    87, 88, 89, 90, 91, 92, 93, 94, 95, 96, 97, 98, 100, 101, 103, 105, 107, 108, 109, 110, 111,
    112, 113, 116, 118, 119, 121, 122, 124, 125, 126, 127, 128, 129, 130, 131, 132, 134, 135,
    136, 138, 139, 141, 142, 143, 145, 146, 147, 148, 149, 150, 151, 152, 153, 154, 155, 156,
    157, 158, 159, 160, 161, 162, 163, 164, 165, 166, 168, 170, 171, 172, 173, 174, 175, 176,
    177, 178, 179, 181, 182, 183, 184, 185, 186, 187, 188, 190, 191, 192, 193, 194, 195, 196,
    197, 198, 199, 200, 201, 202, 203, 204, 205, 206, 208, 209, 210, 211, 212, 213, 214, 215,
    216, 217, 218, 219, 220, 222, 223, 225, 226, 227, 228, 229, 230, 231, 232, 233, 234, 235,
];

/// The frozen corpus itself, in seed order.
pub fn corpus() -> Vec<WeightedDigraph> {
    CORPUS_SEEDS
        .iter()
        .map(|&s| random_digraph(s, CORPUS_MAX_V, CORPUS_MAX_W))
        .collect()
}

// ---- internal dense helpers (independent of the matrix module) ----

type Grid = Vec<Vec<f64>>;

fn grid_from(m: &Matrix) -> Grid {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn grid_identity(n: usize) -> Grid {
    let mut g = vec![vec![0.0; n]; n];
    for (i, row) in g.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    g
}

fn grid_mul(a: &Grid, b: &Grid) -> Grid {
    let n = a.len();
    let m = b[0].len();
    let inner = b.len();
    let mut out = vec![vec![0.0; m]; n];
    for r in 0..n {
        for k in 0..inner {
            let v = a[r][k];
            if v == 0.0 {
                continue;
            }
            for c in 0..m {
                out[r][c] += v * b[k][c];
            }
        }
    }
    out
}

fn grid_scale(a: &mut Grid, s: f64) {
    for row in a {
        for v in row {
            *v *= s;
        }
    }
}

fn grid_max_abs(a: &Grid) -> f64 {
    let mut best = 0.0f64;
    for row in a {
        for &v in row {
            let av = libm::fabs(v);
            if av > best {
                best = av;
            }
        }
    }
    best
}

fn grid_row_norm(a: &Grid) -> f64 {
    let mut best = 0.0f64;
    for row in a {
        let mut sum = 0.0;
        for &v in row {
            sum += libm::fabs(v);
        }
        if sum > best {
            best = sum;
        }
    }
    best
}

/// Gauss–Jordan inversion with full pivoting; `None` when a pivot
/// degenerates.
fn gj_invert(a: &Grid) -> Option<Grid> {
    let n = a.len();
    let mut left: Grid = a.clone();
    let mut right = grid_identity(n);
    // colp[k] = original column index currently at position k
    let mut colp: Vec<usize> = (0..n).collect();
    for k in 0..n {
        // full pivot search over the remaining block
        let mut best = 0.0;
        let (mut pr, mut pc) = (k, k);
        for (r, row) in left.iter().enumerate().skip(k) {
            for (c, &x) in row.iter().enumerate().skip(k) {
                let v = libm::fabs(x);
                if v > best {
                    best = v;
                    pr = r;
                    pc = c;
                }
            }
        }
        if best < 1e-300 {
            return None;
        }
        left.swap(k, pr);
        right.swap(k, pr);
        if pc != k {
            for row in left.iter_mut() {
                row.swap(k, pc);
            }
            colp.swap(k, pc);
        }
        let pivot = left[k][k];
        for c in 0..n {
            left[k][c] /= pivot;
            right[k][c] /= pivot;
        }
        for r in 0..n {
            if r == k {
                continue;
            }
            let factor = left[r][k];
            if factor == 0.0 {
                continue;
            }
            for c in 0..n {
                left[r][c] -= factor * left[k][c];
                right[r][c] -= factor * right[k][c];
            }
        }
    }
    // column swaps on A permute rows of the inverse back
    let mut out = vec![vec![0.0; n]; n];
    for k in 0..n {
        out[colp[k]] = right[k].clone();
    }
    Some(out)
}

/// Singular values, largest first, by one-sided Jacobi column
/// orthogonalization. Working on the columns directly (never forming the
/// Gram matrix) keeps the error in small values near machine epsilon
/// instead of its square root, so rank thresholds stay trustworthy.
fn singular_values(a: &Grid) -> Vec<f64> {
    let rows = a.len();
    let cols = a[0].len();
    let scale = grid_max_abs(a);
    if scale == 0.0 {
        return vec![0.0; rows.min(cols)];
    }
    // columns stored contiguously; rotations orthogonalize them in place
    let mut b = vec![vec![0.0; rows]; cols];
    for (r, row) in a.iter().enumerate() {
        for (c, &x) in row.iter().enumerate() {
            b[c][r] = x / scale;
        }
    }
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let app: f64 = b[p].iter().map(|x| x * x).sum();
                let aqq: f64 = b[q].iter().map(|x| x * x).sum();
                let apq: f64 = b[p].iter().zip(&b[q]).map(|(x, y)| x * y).sum();
                // zero columns satisfy this bound and are left alone
                if libm::fabs(apq) <= 1e-15 * libm::sqrt(app * aqq) {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                let (head, tail) = b.split_at_mut(q);
                for (xp, xq) in head[p].iter_mut().zip(tail[0].iter_mut()) {
                    let rotated_p = c * *xp - s * *xq;
                    *xq = s * *xp + c * *xq;
                    *xp = rotated_p;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = b
        .iter()
        .map(|col| scale * libm::sqrt(col.iter().map(|x| x * x).sum::<f64>()))
        .collect();
    sv.sort_by(|x, y| y.partial_cmp(x).expect("singular values are finite"));
    sv.truncate(rows.min(cols));
    sv
}

/// Numeric rank at relative threshold 1e-8, with a guard on the
/// singular-value gap around the cut.
fn numeric_rank(a: &Grid) -> Result<usize, OracleError> {
    let sv = singular_values(a);
    let largest = sv[0];
    if largest == 0.0 {
        return Ok(0);
    }
    let threshold = 1e-8 * largest;
    let above: Vec<f64> = sv.iter().copied().filter(|&s| s > threshold).collect();
    let below: Vec<f64> = sv.iter().copied().filter(|&s| s <= threshold).collect();
    if !above.is_empty() && !below.is_empty() {
        let min_above = above.iter().copied().fold(f64::INFINITY, f64::min);
        let max_below = below.iter().copied().fold(0.0f64, f64::max);
        if max_below > 0.0 {
            let gap = min_above / max_below;
            if gap < 100.0 {
                return Err(OracleError::IllConditionedRank { gap });
            }
        }
    }
    Ok(above.len())
}
