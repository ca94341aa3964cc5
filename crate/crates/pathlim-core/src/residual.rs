//! Residual matrices: the limits Θ = lim (1-ρs)^h · H(s) of renormalized
//! growth series at the boundary of their disc of convergence, where
//! H(s) = (Id - sF)^{-1} and h is the height. Height one is handled by
//! rank-one spectral decompositions (aggregated over one period when the
//! basic classes are periodic); larger heights by a recursion over the
//! class order that peels one class at a time.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::{GraphError, WeightedDigraph};
use crate::matrix::{Matrix, MatrixError};
use crate::spectral::{self, SpectralError};
use crate::structure::{self, ClassDecomposition, HeightReport, StructureError, BASIC_TOL};

/// Support threshold, relative to the largest entry of Θ.
pub const SUPPORT_TOL_FACTOR: f64 = 1e-8;

// squarings used to bound the remainder's spectral radius from above
const REMAINDER_SQUARINGS: usize = 40;

// relative slack for the identities a constructed decomposition must satisfy
const IDENTITY_TOL: f64 = 1e-8;

/// Residual-level failures.
#[derive(Debug, Clone, PartialEq)]
pub enum ResidualError {
    /// The digraph has no cycle, so the radius is zero and no limit exists.
    Degenerate,
    /// Evaluation point outside `[0, 1/rho)`.
    OutOfDisc { s: f64 },
    /// A basic class has access to a distinct basic class, so the rank-one
    /// construction does not apply.
    NotUmbrella,
    /// A basic class is periodic; aggregate by a common multiple of the
    /// periods first.
    PeriodicBasicClass { period: usize },
    /// The aggregation step is not a common multiple of the basic periods.
    BadAggregation { d: usize, period: usize },
    /// The operation needs a strongly connected digraph.
    NotStronglyConnected,
    /// A constructed matrix missed an identity it must satisfy.
    VerificationFailed { identity: &'static str, residual: f64 },
    Structure(StructureError),
    Spectral(SpectralError),
    Matrix(MatrixError),
    Graph(GraphError),
}

impl fmt::Display for ResidualError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResidualError::Degenerate => {
                write!(f, "the digraph has no cycle, so the residual limit degenerates")
            }
            ResidualError::OutOfDisc { s } => {
                write!(f, "evaluation point {s} lies outside [0, 1/rho)")
            }
            ResidualError::NotUmbrella => {
                write!(f, "a basic class has access to a distinct basic class")
            }
            ResidualError::PeriodicBasicClass { period } => {
                write!(f, "a basic class has period {period}; aggregate by a common multiple")
            }
            ResidualError::BadAggregation { d, period } => {
                write!(f, "aggregation step {d} is not a multiple of the basic period {period}")
            }
            ResidualError::NotStronglyConnected => {
                write!(f, "the digraph is not strongly connected")
            }
            ResidualError::VerificationFailed { identity, residual } => {
                write!(f, "constructed decomposition broke the {identity} identity by {residual:e}")
            }
            ResidualError::Structure(e) => write!(f, "{e}"),
            ResidualError::Spectral(e) => write!(f, "{e}"),
            ResidualError::Matrix(e) => write!(f, "{e}"),
            ResidualError::Graph(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ResidualError {}

impl From<StructureError> for ResidualError {
    fn from(e: StructureError) -> Self {
        match e {
            StructureError::Degenerate => ResidualError::Degenerate,
            other => ResidualError::Structure(other),
        }
    }
}

impl From<SpectralError> for ResidualError {
    fn from(e: SpectralError) -> Self {
        ResidualError::Spectral(e)
    }
}

impl From<MatrixError> for ResidualError {
    fn from(e: MatrixError) -> Self {
        ResidualError::Matrix(e)
    }
}

impl From<GraphError> for ResidualError {
    fn from(e: GraphError) -> Self {
        ResidualError::Graph(e)
    }
}

/// The growth series evaluated inside its disc of convergence.
#[derive(Debug, Clone)]
pub struct GrowthEval {
    pub s: f64,
    /// `H(s) = (Id - sF)^{-1}`; entry (x, y) is the weight of all paths
    /// from x to y, each scaled by `s^length`.
    pub h: Matrix,
}

impl GrowthEval {
    /// Weight of all paths out of each vertex: the row sums of H(s).
    pub fn totals(&self) -> Vec<f64> {
        (0..self.h.rows())
            .map(|r| (0..self.h.cols()).map(|c| self.h.get(r, c)).sum())
            .collect()
    }
}

/// Scalar factor applied to a bridged product of growth blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockMode {
    /// Plain evaluation at `s` inside the disc.
    Evaluation { s: f64 },
    /// Boundary limit: the factor is `1/rho`.
    Residual { rho_inv: f64 },
}

/// Rank-p spectral part of `F^d` at the radius: `F^d = rho^d (P + R)` with
/// `P` the projector onto the leading eigenspace and `rho(R) < 1`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Radius of the underlying digraph (not of its power).
    pub rho: f64,
    /// Aggregation step: the construction ran on the power digraph `W^(d)`.
    pub d: usize,
    pub projector: Matrix,
    pub remainder: Matrix,
    /// Left eigenvectors of `F^d` at `rho^d`, full length, biorthogonal to
    /// `right_basis`.
    pub left_basis: Vec<Vec<f64>>,
    pub right_basis: Vec<Vec<f64>>,
    /// Vertex sets carrying the basis pairs: the basic classes of `W^(d)`.
    pub basic_classes: Vec<Vec<usize>>,
}

/// Residual limit: the height, Θ itself, and its support pattern.
#[derive(Debug, Clone)]
pub struct ResidualResult {
    pub height: usize,
    pub theta: Matrix,
    /// `support[x][y]` iff Θ(x, y) clears [`SUPPORT_TOL_FACTOR`] relative to
    /// the largest entry.
    pub support: Vec<Vec<bool>>,
}

/// Evaluates `H(s) = (Id - sF)^{-1}` for `0 <= s < 1/rho`.
pub fn growth_eval(g: &WeightedDigraph, s: f64) -> Result<GrowthEval, ResidualError> {
    let dec = structure::analyze(g)?;
    if s < 0.0 || !s.is_finite() {
        return Err(ResidualError::OutOfDisc { s });
    }
    if dec.rho > 0.0 && s * dec.rho >= 1.0 {
        return Err(ResidualError::OutOfDisc { s });
    }
    let n = g.vertex_count();
    let m = Matrix::identity(n).sub(&g.adjacency().scale(s))?;
    let h = m.inverse()?;
    Ok(GrowthEval { s, h })
}

/// Weight of the paths that start in a source block, cross one bridge edge,
/// and continue in a target block: `factor * H_S * X * H_T`.
pub fn block_extension(
    h_source: &Matrix,
    h_target: &Matrix,
    x: &Matrix,
    mode: BlockMode,
) -> Result<Matrix, ResidualError> {
    let factor = match mode {
        BlockMode::Evaluation { s } => s,
        BlockMode::Residual { rho_inv } => rho_inv,
    };
    Ok(h_source.mul(x)?.mul(h_target)?.scale(factor))
}

/// Rank-one-per-class decomposition `F = rho (P + R)` for digraphs whose
/// basic classes are mutually inaccessible and aperiodic.
pub fn umbrella_decomposition(g: &WeightedDigraph) -> Result<SpectralDecomposition, ResidualError> {
    let dec = structure::analyze(g)?;
    umbrella_decomposition_impl(g, &dec)
}

/// Same decomposition after aggregating `d` steps: `F^d = rho^d (P_d + R_d)`
/// on the power digraph `W^(d)`, whose basic classes are the periodic layers.
/// `d` must be a common multiple of the basic periods.
pub fn periodic_decomposition(
    g: &WeightedDigraph,
    d: usize,
) -> Result<SpectralDecomposition, ResidualError> {
    let dec = structure::analyze(g)?;
    periodic_decomposition_impl(g, &dec, d)
}

/// Θ for height one, via the aggregated decomposition with `d` the least
/// common multiple of the basic periods:
/// `Θ = (1/d) (Σ_{i<d} rho^{-i} F^i) P_d`.
pub fn residual_umbrella(g: &WeightedDigraph) -> Result<ResidualResult, ResidualError> {
    let dec = structure::analyze(g)?;
    residual_umbrella_impl(g, &dec)
}

/// Θ for a strongly connected digraph: the outer product of the Perron pair,
/// strictly positive.
pub fn residual_strongly_connected(g: &WeightedDigraph) -> Result<ResidualResult, ResidualError> {
    let dec = structure::analyze(g)?;
    if dec.class_count() != 1 {
        return Err(ResidualError::NotStronglyConnected);
    }
    if dec.is_degenerate() {
        return Err(ResidualError::Degenerate);
    }
    let class: Vec<usize> = (0..g.vertex_count()).collect();
    let pair = spectral::perron_pair(g, &class)?;
    let theta = clamp_nonneg(Matrix::outer(&pair.right, &pair.left))?;
    let support = support_from(&theta);
    Ok(ResidualResult { height: 1, theta, support })
}

/// Θ and the height for an arbitrary digraph with positive radius, by
/// peeling classes in reverse topological order. Prefixes of height one go
/// through [`residual_umbrella`]; afterwards each new class contributes a
/// bridged block, and side restrictions are resolved recursively (memoized
/// by vertex set).
pub fn residual_matrix(g: &WeightedDigraph) -> Result<ResidualResult, ResidualError> {
    let dec = structure::analyze(g)?;
    if dec.is_degenerate() {
        return Err(ResidualError::Degenerate);
    }
    let mut memo: BTreeMap<Vec<usize>, (usize, Matrix)> = BTreeMap::new();
    let all: Vec<usize> = (0..g.vertex_count()).collect();
    let (height, theta) = residual_of(g, &all, &mut memo)?;
    let theta = clamp_nonneg(theta)?;
    let support = support_from(&theta);
    Ok(ResidualResult { height, theta, support })
}

/// Support pattern predicted from the class structure alone: (x, y) is
/// supported iff some dominant chain starts below x and ends above y.
pub fn theta_support_predicate(dec: &ClassDecomposition, hr: &HeightReport) -> Vec<Vec<bool>> {
    let n = dec.class_of.len();
    let mut sup = vec![vec![false; n]; n];
    for chain in &hr.dominant_chains {
        let head = chain[0];
        let tail = *chain.last().expect("chains are nonempty");
        for (x, row) in sup.iter_mut().enumerate() {
            if !dec.accessible[dec.class_of[x]][head] {
                continue;
            }
            for (y, cell) in row.iter_mut().enumerate() {
                if dec.accessible[tail][dec.class_of[y]] {
                    *cell = true;
                }
            }
        }
    }
    sup
}

fn umbrella_decomposition_impl(
    g: &WeightedDigraph,
    dec: &ClassDecomposition,
) -> Result<SpectralDecomposition, ResidualError> {
    if dec.is_degenerate() {
        return Err(ResidualError::Degenerate);
    }
    if !structure::is_augmented_umbrella(dec)? {
        return Err(ResidualError::NotUmbrella);
    }
    let basics = dec.basic_classes();
    for &b in &basics {
        let period = dec.per_class[b].period;
        if period != 1 {
            return Err(ResidualError::PeriodicBasicClass { period });
        }
    }
    let n = g.vertex_count();
    let f = g.adjacency();
    let rho = dec.rho;
    // t1 feeds the basic classes from above, t0 hangs below them
    let mut t1: Vec<usize> = Vec::new();
    let mut t0: Vec<usize> = Vec::new();
    for v in 0..n {
        let c = dec.class_of[v];
        if dec.per_class[c].is_basic {
            continue;
        }
        if basics.iter().any(|&b| dec.accessible[c][b]) {
            t1.push(v);
        } else {
            t0.push(v);
        }
    }
    // both companion blocks sit strictly below the radius, so the shifted
    // systems are invertible
    let shift_above = shifted_block(f, &t1, rho);
    let shift_below = shifted_block(f, &t0, rho).transpose();
    let mut left_basis: Vec<Vec<f64>> = Vec::new();
    let mut right_basis: Vec<Vec<f64>> = Vec::new();
    let mut class_sets: Vec<Vec<usize>> = Vec::new();
    let mut projector = Matrix::zeros(n, n);
    for &b in &basics {
        let class = &dec.classes[b];
        let pair = spectral::perron_pair(g, class)?;
        // right vector: the perron vector on the class, extended above by
        // (rho Id - A) u = X r
        let xr = f.submatrix(&t1, class).mul_vec(&pair.right)?;
        let u = shift_above.solve(&col_vec(&xr))?;
        let mut right = vec![0.0; n];
        for (i, &v) in t1.iter().enumerate() {
            right[v] = u.get(i, 0);
        }
        for (i, &v) in class.iter().enumerate() {
            right[v] = pair.right[i];
        }
        // left vector: the perron covector on the class, extended below by
        // w (rho Id - K) = l Y
        let ly = f.submatrix(class, &t0).vec_mul(&pair.left)?;
        let w = shift_below.solve(&col_vec(&ly))?;
        let mut left = vec![0.0; n];
        for (i, &v) in t0.iter().enumerate() {
            left[v] = w.get(i, 0);
        }
        for (i, &v) in class.iter().enumerate() {
            left[v] = pair.left[i];
        }
        projector = projector.add(&Matrix::outer(&right, &left))?;
        left_basis.push(left);
        right_basis.push(right);
        class_sets.push(class.clone());
    }
    let remainder = f.scale(1.0 / rho).sub(&projector)?;
    let sd = SpectralDecomposition {
        rho,
        d: 1,
        projector,
        remainder,
        left_basis,
        right_basis,
        basic_classes: class_sets,
    };
    verify_decomposition(&sd)?;
    Ok(sd)
}

fn periodic_decomposition_impl(
    g: &WeightedDigraph,
    dec: &ClassDecomposition,
    d: usize,
) -> Result<SpectralDecomposition, ResidualError> {
    if dec.is_degenerate() {
        return Err(ResidualError::Degenerate);
    }
    if !structure::is_augmented_umbrella(dec)? {
        return Err(ResidualError::NotUmbrella);
    }
    for &b in &dec.basic_classes() {
        let period = dec.per_class[b].period;
        if d == 0 || !d.is_multiple_of(period) {
            return Err(ResidualError::BadAggregation { d, period });
        }
    }
    // the power digraph keeps the tokens and raises the adjacency; its basic
    // classes are the periodic layers, all aperiodic
    let power = WeightedDigraph::new(g.vertex_tokens().to_vec(), g.adjacency().pow(d)?)?;
    let pdec = structure::analyze(&power)?;
    let mut sd = umbrella_decomposition_impl(&power, &pdec)?;
    sd.rho = dec.rho;
    sd.d = d;
    Ok(sd)
}

fn residual_umbrella_impl(
    g: &WeightedDigraph,
    dec: &ClassDecomposition,
) -> Result<ResidualResult, ResidualError> {
    if dec.is_degenerate() {
        return Err(ResidualError::Degenerate);
    }
    let d = dec
        .basic_classes()
        .iter()
        .fold(1usize, |acc, &b| lcm(acc, dec.per_class[b].period));
    let sd = periodic_decomposition_impl(g, dec, d)?;
    let rho = dec.rho;
    let f = g.adjacency();
    let n = g.vertex_count();
    // Θ = (1/d) (Id + F/rho + ... + (F/rho)^{d-1}) P_d
    let mut sum = Matrix::identity(n);
    let mut pw = Matrix::identity(n);
    let mut coef = 1.0;
    for _ in 1..d {
        pw = pw.mul(f)?;
        coef /= rho;
        sum = sum.add(&pw.scale(coef))?;
    }
    let theta = clamp_nonneg(sum.mul(&sd.projector)?.scale(1.0 / d as f64))?;
    let support = support_from(&theta);
    Ok(ResidualResult { height: 1, theta, support })
}

fn residual_of(
    g: &WeightedDigraph,
    verts: &[usize],
    memo: &mut BTreeMap<Vec<usize>, (usize, Matrix)>,
) -> Result<(usize, Matrix), ResidualError> {
    if let Some(hit) = memo.get(verts) {
        return Ok(hit.clone());
    }
    let gv = g.induced(verts);
    let dec = structure::analyze(&gv)?;
    // callers only recurse into restrictions that carry the full radius
    debug_assert!(dec.rho > 0.0);
    let hr = structure::height(&dec)?;
    let result = if hr.height == 1 {
        let rr = residual_umbrella_impl(&gv, &dec)?;
        (1, rr.theta)
    } else {
        residual_by_classes(g, verts, &gv, &dec, memo)?
    };
    memo.insert(verts.to_vec(), result.clone());
    Ok(result)
}

// peels the classes of gv in reverse topological order, so every prefix is
// closed under successors; ids are gv-local throughout, and the ascending
// local order of the full prefix coincides with the order of `verts`
fn residual_by_classes(
    g: &WeightedDigraph,
    verts: &[usize],
    gv: &WeightedDigraph,
    dec: &ClassDecomposition,
    memo: &mut BTreeMap<Vec<usize>, (usize, Matrix)>,
) -> Result<(usize, Matrix), ResidualError> {
    let f = gv.adjacency();
    let mut prefix: Vec<usize> = Vec::new();
    let mut theta_prev = Matrix::zeros(0, 0);
    let mut h_prev = 0usize;
    for class in dec.classes.iter().rev() {
        let vnew = merge_sorted(&prefix, class);
        let gnew = gv.induced(&vnew);
        let dnew = structure::analyze(&gnew)?;
        let rho = dnew.rho;
        let (h, theta);
        if rho <= 0.0 {
            // no cycle yet: the limit from the top of the chain is trivial
            h = 0;
            theta = Matrix::zeros(vnew.len(), vnew.len());
        } else {
            let hnew = structure::height(&dnew)?.height;
            if hnew == 1 {
                h = 1;
                theta = residual_umbrella_impl(&gnew, &dnew)?.theta;
            } else {
                // height at least two never starts at a fresh radius: a
                // strict radius jump resets the height to one
                let dpos = positions(&vnew, class);
                let ppos = positions(&vnew, &prefix);
                let rho_class = spectral::spectral_radius_class(gv, class)?;
                let mut t = Matrix::zeros(vnew.len(), vnew.len());
                if rho_class < rho * (1.0 - BASIC_TOL) {
                    // non-basic class on top: its local growth factor stays
                    // finite at the boundary
                    debug_assert_eq!(hnew, h_prev);
                    let fd = f.submatrix(class, class).scale(1.0 / rho);
                    let hd = Matrix::identity(class.len()).sub(&fd)?.inverse()?;
                    let x = f.submatrix(class, &prefix);
                    let a = block_extension(
                        &hd,
                        &theta_prev,
                        &x,
                        BlockMode::Residual { rho_inv: 1.0 / rho },
                    )?;
                    t.set_block(&dpos, &ppos, &a);
                    t.set_block(&ppos, &ppos, &theta_prev);
                    h = h_prev;
                } else {
                    // basic class on top: its own residual is the rank-one
                    // perron outer product
                    let pid = residual_strongly_connected(&gv.induced(class))?.theta;
                    if hnew == h_prev + 1 {
                        // the class extends every dominant chain; the old
                        // residual loses a renormalization degree and vanishes
                        let x = f.submatrix(class, &prefix);
                        let y = block_extension(
                            &pid,
                            &theta_prev,
                            &x,
                            BlockMode::Residual { rho_inv: 1.0 / rho },
                        )?;
                        t.set_block(&dpos, &ppos, &y);
                        h = hnew;
                    } else {
                        debug_assert_eq!(hnew, h_prev);
                        // the class joins mid-chain: only the part of the
                        // prefix it reaches matters, and it contributes only
                        // when that part keeps the radius at height one less
                        let wt = reach_below(&gnew, &dpos)
                            .into_iter()
                            .map(|p| vnew[p])
                            .collect::<Vec<usize>>();
                        if !wt.is_empty() {
                            let gw = gv.induced(&wt);
                            let dw = structure::analyze(&gw)?;
                            if dw.rho >= rho * (1.0 - BASIC_TOL)
                                && structure::height(&dw)?.height == hnew - 1
                            {
                                let worig: Vec<usize> = wt.iter().map(|&i| verts[i]).collect();
                                let (_, theta_w) = residual_of(g, &worig, memo)?;
                                let xw = f.submatrix(class, &wt);
                                let y = block_extension(
                                    &pid,
                                    &theta_w,
                                    &xw,
                                    BlockMode::Residual { rho_inv: 1.0 / rho },
                                )?;
                                t.set_block(&dpos, &positions(&vnew, &wt), &y);
                            }
                        }
                        t.set_block(&ppos, &ppos, &theta_prev);
                        h = h_prev;
                    }
                }
                theta = t;
            }
        }
        prefix = vnew;
        theta_prev = theta;
        h_prev = h;
    }
    Ok((h_prev, theta_prev))
}

// rho Id - F restricted to verts
fn shifted_block(f: &Matrix, verts: &[usize], rho: f64) -> Matrix {
    let mut m = f.submatrix(verts, verts).scale(-1.0);
    for i in 0..verts.len() {
        let v = m.get(i, i);
        m.set(i, i, v + rho);
    }
    m
}

fn col_vec(v: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(v.len(), 1);
    for (i, &x) in v.iter().enumerate() {
        m.set(i, 0, x);
    }
    m
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] < b[j]) {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out
}

// positions of the sorted subset inside the sorted host list
fn positions(host: &[usize], subset: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(subset.len());
    let mut i = 0;
    for (pos, &v) in host.iter().enumerate() {
        if i < subset.len() && subset[i] == v {
            out.push(pos);
            i += 1;
        }
    }
    debug_assert_eq!(out.len(), subset.len());
    out
}

// forward closure of `starts`, the starts themselves excluded
fn reach_below(g: &WeightedDigraph, starts: &[usize]) -> Vec<usize> {
    let n = g.vertex_count();
    let mut seen = vec![false; n];
    let mut queue: Vec<usize> = starts.to_vec();
    for &s in starts {
        seen[s] = true;
    }
    while let Some(v) = queue.pop() {
        for (y, _) in g.out_edges(v) {
            if !seen[y] {
                seen[y] = true;
                queue.push(y);
            }
        }
    }
    (0..n).filter(|&v| seen[v] && !starts.contains(&v)).collect()
}

fn support_from(theta: &Matrix) -> Vec<Vec<bool>> {
    let tol = SUPPORT_TOL_FACTOR * theta.max_abs();
    (0..theta.rows())
        .map(|r| (0..theta.cols()).map(|c| theta.get(r, c) > tol).collect())
        .collect()
}

// zero out negative rounding noise; anything beyond noise is a real failure
fn clamp_nonneg(m: Matrix) -> Result<Matrix, ResidualError> {
    let scale = if m.max_abs() > 1.0 { m.max_abs() } else { 1.0 };
    let tol = IDENTITY_TOL * scale;
    let mut out = m;
    for r in 0..out.rows() {
        for c in 0..out.cols() {
            let v = out.get(r, c);
            if v < 0.0 {
                if v < -tol {
                    return Err(ResidualError::VerificationFailed {
                        identity: "nonnegative residual",
                        residual: -v,
                    });
                }
                out.set(r, c, 0.0);
            }
        }
    }
    Ok(out)
}

fn verify_decomposition(sd: &SpectralDecomposition) -> Result<(), ResidualError> {
    let p = &sd.projector;
    let r = &sd.remainder;
    let mut scale = 1.0;
    for m in [p.max_abs(), r.max_abs()] {
        if m > scale {
            scale = m;
        }
    }
    let tol = IDENTITY_TOL * scale * scale;
    let idem = p.mul(p)?.sub(p)?.max_abs();
    if idem > tol {
        return Err(ResidualError::VerificationFailed {
            identity: "projector idempotent",
            residual: idem,
        });
    }
    let pr = p.mul(r)?.max_abs();
    if pr > tol {
        return Err(ResidualError::VerificationFailed {
            identity: "projector annihilates remainder",
            residual: pr,
        });
    }
    let rp = r.mul(p)?.max_abs();
    if rp > tol {
        return Err(ResidualError::VerificationFailed {
            identity: "remainder annihilates projector",
            residual: rp,
        });
    }
    let mut biorth = 0.0f64;
    for (i, l) in sd.left_basis.iter().enumerate() {
        for (j, rv) in sd.right_basis.iter().enumerate() {
            let dot: f64 = l.iter().zip(rv.iter()).map(|(a, b)| a * b).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            let dev = libm::fabs(dot - want);
            if dev > biorth {
                biorth = dev;
            }
        }
    }
    if biorth > tol {
        return Err(ResidualError::VerificationFailed {
            identity: "biorthogonal bases",
            residual: biorth,
        });
    }
    let rad = r.spectral_radius_estimate(REMAINDER_SQUARINGS)?;
    if rad >= 1.0 {
        return Err(ResidualError::VerificationFailed {
            identity: "contracting remainder",
            residual: rad,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::oracle;

    const SQRT_2: f64 = core::f64::consts::SQRT_2;

    fn assert_entries(m: &Matrix, want: &[f64], tol: f64) {
        assert_eq!(m.data().len(), want.len());
        for (i, (got, want)) in m.data().iter().zip(want.iter()).enumerate() {
            assert!(
                (got - want).abs() <= tol,
                "entry {i}: got {got}, want {want}"
            );
        }
    }

    // acyclic feeder s over the chained loops a => b
    fn feeder() -> WeightedDigraph {
        WeightedDigraph::from_edges(&[
            ("s", "a", 1.0),
            ("a", "a", 1.0),
            ("a", "b", 1.0),
            ("b", "b", 1.0),
        ])
        .unwrap()
    }

    // two independent unit loops flowing into a shared third one
    fn merged() -> WeightedDigraph {
        WeightedDigraph::from_edges(&[
            ("a", "a", 1.0),
            ("b", "b", 1.0),
            ("c", "c", 1.0),
            ("a", "c", 1.0),
            ("b", "c", 1.0),
        ])
        .unwrap()
    }

    // a unit loop whose only outlet dies out, next to the chain a => b
    fn side_branch() -> WeightedDigraph {
        WeightedDigraph::from_edges(&[
            ("c", "c", 1.0),
            ("c", "d", 1.0),
            ("a", "a", 1.0),
            ("a", "b", 1.0),
            ("b", "b", 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn growth_eval_matches_geometric_series_on_single_loop() {
        let e = growth_eval(&fixtures::g1(), 0.25).unwrap();
        assert_entries(&e.h, &[2.0], 1e-12);
        assert!((e.totals()[0] - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn growth_eval_pins_fixture_values() {
        let e2 = growth_eval(&fixtures::g2(), 0.25).unwrap();
        assert_entries(&e2.h, &[4.0 / 3.0, 2.0 / 3.0, 0.0, 2.0], 1e-12);
        let totals = e2.totals();
        assert!((totals[0] - 2.0).abs() <= 1e-12);
        assert!((totals[1] - 2.0).abs() <= 1e-12);
        let e5 = growth_eval(&fixtures::g5(), 0.5).unwrap();
        assert_entries(&e5.h, &[4.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 4.0 / 3.0], 1e-12);
        let e3 = growth_eval(&fixtures::g3(), 0.5).unwrap();
        assert_entries(&e3.h, &[2.0, 2.0, 0.0, 2.0], 1e-12);
    }

    #[test]
    fn growth_eval_solves_the_defining_identity() {
        for (g, s) in [
            (fixtures::g2(), 0.49),
            (fixtures::g4(), 0.7),
            (fixtures::g5(), 0.99),
        ] {
            let e = growth_eval(&g, s).unwrap();
            let n = g.vertex_count();
            let m = Matrix::identity(n).sub(&g.adjacency().scale(s)).unwrap();
            let res = m.mul(&e.h).unwrap().sub(&Matrix::identity(n)).unwrap();
            assert!(res.max_abs() <= 1e-10);
        }
    }

    #[test]
    fn growth_eval_rejects_points_outside_the_disc() {
        assert!(matches!(
            growth_eval(&fixtures::g2(), 0.5),
            Err(ResidualError::OutOfDisc { .. })
        ));
        assert!(matches!(
            growth_eval(&fixtures::g1(), 0.5),
            Err(ResidualError::OutOfDisc { .. })
        ));
        assert!(matches!(
            growth_eval(&fixtures::g2(), -0.1),
            Err(ResidualError::OutOfDisc { .. })
        ));
        // acyclic digraphs have no pole at all
        let chain = WeightedDigraph::from_edges(&[("a", "b", 3.0)]).unwrap();
        let e = growth_eval(&chain, 2.0).unwrap();
        assert_entries(&e.h, &[1.0, 6.0, 0.0, 1.0], 1e-12);
    }

    #[test]
    fn block_extension_weights_paths_through_the_bridge() {
        // feeder loop into the heavy loop of g2 at s = 1/4
        let hs = Matrix::from_rows(1, 1, vec![4.0 / 3.0]).unwrap();
        let ht = Matrix::from_rows(1, 1, vec![2.0]).unwrap();
        let x = Matrix::from_rows(1, 1, vec![1.0]).unwrap();
        let b = block_extension(&hs, &ht, &x, BlockMode::Evaluation { s: 0.25 }).unwrap();
        assert_entries(&b, &[2.0 / 3.0], 1e-12);
        // chained unit loops of g3 at s = 1/2
        let two = Matrix::from_rows(1, 1, vec![2.0]).unwrap();
        let b3 = block_extension(&two, &two, &x, BlockMode::Evaluation { s: 0.5 }).unwrap();
        assert_entries(&b3, &[2.0], 1e-12);
        // a zero bridge contributes nothing
        let z = Matrix::zeros(1, 1);
        let bz = block_extension(&hs, &ht, &z, BlockMode::Residual { rho_inv: 1.0 }).unwrap();
        assert_entries(&bz, &[0.0], 0.0);
        // shapes must chain
        let wide = Matrix::zeros(1, 2);
        assert!(matches!(
            block_extension(&wide, &ht, &x, BlockMode::Evaluation { s: 0.1 }),
            Err(ResidualError::Matrix(MatrixError::DimensionMismatch))
        ));
    }

    #[test]
    fn umbrella_decomposition_single_loop_is_rank_one() {
        let sd = umbrella_decomposition(&fixtures::g1()).unwrap();
        assert!((sd.rho - 2.0).abs() <= 1e-12);
        assert_eq!(sd.d, 1);
        assert_entries(&sd.projector, &[1.0], 1e-12);
        assert_entries(&sd.remainder, &[0.0], 1e-12);
        assert_eq!(sd.basic_classes, vec![vec![0]]);
    }

    #[test]
    fn umbrella_decomposition_feeder_loop_pins_vectors() {
        let sd = umbrella_decomposition(&fixtures::g2()).unwrap();
        assert_entries(&sd.projector, &[0.0, 1.0, 0.0, 1.0], 1e-10);
        assert_entries(&sd.remainder, &[0.5, -0.5, 0.0, 0.0], 1e-10);
        assert_eq!(sd.right_basis.len(), 1);
        assert!((sd.right_basis[0][0] - 1.0).abs() <= 1e-10);
        assert!((sd.right_basis[0][1] - 1.0).abs() <= 1e-10);
        assert!(sd.left_basis[0][0].abs() <= 1e-10);
        assert!((sd.left_basis[0][1] - 1.0).abs() <= 1e-10);
        let rad = sd.remainder.spectral_radius_estimate(40).unwrap();
        assert!((rad - 0.5).abs() <= 1e-6, "remainder radius {rad}");
    }

    #[test]
    fn umbrella_decomposition_rejects_chained_basic_classes() {
        assert!(matches!(
            umbrella_decomposition(&fixtures::g3()),
            Err(ResidualError::NotUmbrella)
        ));
    }

    #[test]
    fn umbrella_decomposition_rejects_periodic_basic_classes() {
        assert!(matches!(
            umbrella_decomposition(&fixtures::g5()),
            Err(ResidualError::PeriodicBasicClass { period: 2 })
        ));
    }

    #[test]
    fn umbrella_decomposition_extends_left_vectors_below_the_basic_class() {
        let g = WeightedDigraph::from_edges(&[
            ("a", "a", 2.0),
            ("a", "b", 1.0),
            ("b", "b", 1.0),
        ])
        .unwrap();
        let sd = umbrella_decomposition(&g).unwrap();
        assert_entries(&sd.projector, &[1.0, 1.0, 0.0, 0.0], 1e-10);
        assert_entries(&sd.remainder, &[0.0, -0.5, 0.0, 0.5], 1e-10);
        assert!((sd.left_basis[0][1] - 1.0).abs() <= 1e-10);
        assert!((sd.right_basis[0][0] - 1.0).abs() <= 1e-10);
        assert!(sd.right_basis[0][1].abs() <= 1e-10);
    }

    #[test]
    fn periodic_decomposition_splits_the_two_cycle() {
        let sd = periodic_decomposition(&fixtures::g5(), 2).unwrap();
        assert!((sd.rho - 1.0).abs() <= 1e-12);
        assert_eq!(sd.d, 2);
        assert_entries(&sd.projector, &[1.0, 0.0, 0.0, 1.0], 1e-10);
        assert_entries(&sd.remainder, &[0.0, 0.0, 0.0, 0.0], 1e-10);
        assert_eq!(sd.basic_classes.len(), 2);
        let sd4 = periodic_decomposition(&fixtures::g5(), 4).unwrap();
        assert_entries(&sd4.projector, &[1.0, 0.0, 0.0, 1.0], 1e-10);
        assert!(matches!(
            periodic_decomposition(&fixtures::g5(), 1),
            Err(ResidualError::BadAggregation { d: 1, period: 2 })
        ));
        assert!(matches!(
            periodic_decomposition(&fixtures::g5(), 0),
            Err(ResidualError::BadAggregation { .. })
        ));
    }

    #[test]
    fn periodic_decomposition_is_stable_across_valid_steps() {
        let base = umbrella_decomposition(&fixtures::g2()).unwrap();
        for d in [1, 3] {
            let sd = periodic_decomposition(&fixtures::g2(), d).unwrap();
            let diff = sd.projector.sub(&base.projector).unwrap().max_abs();
            assert!(diff <= 1e-10, "step {d} drifted by {diff}");
        }
    }

    #[test]
    fn periodic_decomposition_pins_branching_fixture() {
        let sd = periodic_decomposition(&fixtures::g4(), 2).unwrap();
        assert_entries(
            &sd.projector,
            &[0.0, 0.5, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            1e-10,
        );
        assert!(matches!(
            periodic_decomposition(&fixtures::g4(), 1),
            Err(ResidualError::BadAggregation { d: 1, period: 2 })
        ));
    }

    #[test]
    fn residual_umbrella_pins_fixture_values() {
        let r5 = residual_umbrella(&fixtures::g5()).unwrap();
        assert_eq!(r5.height, 1);
        assert_entries(&r5.theta, &[0.5, 0.5, 0.5, 0.5], 1e-12);
        let r2 = residual_umbrella(&fixtures::g2()).unwrap();
        assert_entries(&r2.theta, &[0.0, 1.0, 0.0, 1.0], 1e-12);
        let r4 = residual_umbrella(&fixtures::g4()).unwrap();
        assert_entries(
            &r4.theta,
            &[
                0.0,
                0.25 + SQRT_2 / 4.0,
                0.5 + SQRT_2 / 4.0,
                0.0,
                0.5,
                SQRT_2 / 2.0,
                0.0,
                SQRT_2 / 4.0,
                0.5,
            ],
            1e-12,
        );
        for row in &r4.support {
            assert!(!row[0] && row[1] && row[2]);
        }
    }

    #[test]
    fn residual_strongly_connected_is_the_perron_outer_product() {
        let r1 = residual_strongly_connected(&fixtures::g1()).unwrap();
        assert_entries(&r1.theta, &[1.0], 1e-12);
        let r5 = residual_strongly_connected(&fixtures::g5()).unwrap();
        assert_entries(&r5.theta, &[0.5, 0.5, 0.5, 0.5], 1e-9);
        let bc = fixtures::g4().induced(&[1, 2]);
        let rbc = residual_strongly_connected(&bc).unwrap();
        assert_entries(
            &rbc.theta,
            &[0.5, SQRT_2 / 2.0, SQRT_2 / 4.0, 0.5],
            1e-9,
        );
        assert!(rbc.support.iter().flatten().all(|&b| b));
        assert!(matches!(
            residual_strongly_connected(&fixtures::g2()),
            Err(ResidualError::NotStronglyConnected)
        ));
    }

    #[test]
    fn residual_matrix_agrees_with_umbrella_route_at_height_one() {
        for g in [fixtures::g1(), fixtures::g2(), fixtures::g4(), fixtures::g5()] {
            let direct = residual_umbrella(&g).unwrap();
            let general = residual_matrix(&g).unwrap();
            assert_eq!(general.height, 1);
            let diff = general.theta.sub(&direct.theta).unwrap().max_abs();
            assert!(diff <= 1e-9, "routes disagree by {diff}");
            assert_eq!(general.support, direct.support);
        }
    }

    #[test]
    fn residual_matrix_resolves_chained_loops() {
        let rr = residual_matrix(&fixtures::g3()).unwrap();
        assert_eq!(rr.height, 2);
        assert_entries(&rr.theta, &[0.0, 1.0, 0.0, 0.0], 1e-12);
        assert_eq!(
            rr.support,
            vec![vec![false, true], vec![false, false]]
        );
    }

    #[test]
    fn residual_matrix_keeps_height_under_an_acyclic_feeder() {
        let rr = residual_matrix(&feeder()).unwrap();
        assert_eq!(rr.height, 2);
        // order s, a, b: both s and a reach the end of the chain
        assert_entries(
            &rr.theta,
            &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            1e-10,
        );
    }

    #[test]
    fn residual_matrix_merges_two_chains_into_a_shared_sink() {
        let rr = residual_matrix(&merged()).unwrap();
        assert_eq!(rr.height, 2);
        // order a, b, c: both two-link chains end at c
        assert_entries(
            &rr.theta,
            &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            1e-10,
        );
    }

    #[test]
    fn residual_matrix_drops_branches_that_lose_the_radius() {
        let rr = residual_matrix(&side_branch()).unwrap();
        assert_eq!(rr.height, 2);
        // order c, d, a, b: the branch through d dies out, only a => b carries
        let mut want = vec![0.0; 16];
        want[2 * 4 + 3] = 1.0;
        assert_entries(&rr.theta, &want, 1e-10);
    }

    #[test]
    fn residual_matrix_recursion_tracks_numeric_limits() {
        for g in [fixtures::g3(), feeder(), merged(), side_branch()] {
            let rr = residual_matrix(&g).unwrap();
            let nr = oracle::numeric_residual(&g, rr.height, &oracle::DEFAULT_SCHEDULE).unwrap();
            assert!(matches!(nr.trend, oracle::Trend::Converging));
            let diff = rr.theta.sub(&nr.estimate).unwrap().max_abs();
            assert!(diff <= 1e-3, "numeric limit off by {diff}");
        }
    }

    #[test]
    fn residual_matrix_rejects_acyclic_digraphs() {
        let chain = WeightedDigraph::from_edges(&[("a", "b", 1.0)]).unwrap();
        assert!(matches!(
            residual_matrix(&chain),
            Err(ResidualError::Degenerate)
        ));
    }

    #[test]
    fn support_matches_the_dominant_chain_predicate() {
        let graphs = [
            fixtures::g1(),
            fixtures::g2(),
            fixtures::g3(),
            fixtures::g4(),
            fixtures::g5(),
            feeder(),
            merged(),
            side_branch(),
        ];
        for g in graphs {
            let dec = structure::analyze(&g).unwrap();
            let hr = structure::height(&dec).unwrap();
            let predicted = theta_support_predicate(&dec, &hr);
            let rr = residual_matrix(&g).unwrap();
            assert_eq!(predicted, rr.support, "{:?}", g.vertex_tokens());
        }
    }
}
