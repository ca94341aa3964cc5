//! Finite-path distributions and their limits. The Boltzmann family weights
//! a path u from x by w(u)·s^|u|·G_{last u}(s)/G_x(s); the uniform family
//! conditions on an exact length k. As s reaches the boundary (resp. k grows),
//! both concentrate on a cocycle measure supported by the spanned umbrella
//! U(x₀), described by a row-stochastic kernel q(x, y) = w(x, y)·Γ(x, y)/ρ.
//! Uniform limits exist only under a residue condition when the basic classes
//! are periodic; the convergence report carries the evidence either way.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::{self, Path, PathError, WeightedDigraph};
use crate::matrix::{Matrix, MatrixError};
use crate::residual::{self, ResidualError};
use crate::spectral;
use crate::structure::{self, StructureError};

/// Absolute tolerance for residue-limit agreement.
pub const RESIDUE_TOL: f64 = 1e-10;

/// Cap on the number of cylinders inspected by a convergence analysis.
pub const CYLINDER_CAP: usize = 20_000;

// tolerances mirrored by the validation report
const STOCHASTIC_TOL: f64 = 1e-12;
const COCYCLE_TOL: f64 = 1e-10;

/// Limit-level failures.
#[derive(Debug, Clone, PartialEq)]
pub enum LimitsError {
    /// The cylinder base does not start at the source vertex.
    PathNotFromSource,
    /// Boltzmann parameter outside `(0, 1/γ(x))`.
    OutOfRange { s: f64 },
    /// Cylinder longer than the uniform horizon.
    LengthExceedsHorizon { len: usize, horizon: usize },
    /// No path of the requested length leaves the source.
    NoPaths { k: usize },
    /// The operation needs the basic classes to be exactly the final ones.
    NotUmbrella,
    /// One simplex coordinate per basic class is required.
    AlphaCount { got: usize, want: usize },
    /// Simplex coordinates must be strictly positive.
    NonPositiveAlpha { index: usize },
    Structure(StructureError),
    Residual(ResidualError),
    Matrix(MatrixError),
    Path(PathError),
}

impl fmt::Display for LimitsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LimitsError::PathNotFromSource => {
                write!(f, "the cylinder base does not start at the source vertex")
            }
            LimitsError::OutOfRange { s } => {
                write!(f, "parameter {s} lies outside (0, 1/gamma)")
            }
            LimitsError::LengthExceedsHorizon { len, horizon } => {
                write!(f, "cylinder length {len} exceeds the horizon {horizon}")
            }
            LimitsError::NoPaths { k } => {
                write!(f, "no path of length {k} leaves the source")
            }
            LimitsError::NotUmbrella => {
                write!(f, "the basic classes are not exactly the final classes")
            }
            LimitsError::AlphaCount { got, want } => {
                write!(f, "got {got} simplex coordinates for {want} basic classes")
            }
            LimitsError::NonPositiveAlpha { index } => {
                write!(f, "simplex coordinate {index} is not strictly positive")
            }
            LimitsError::Structure(e) => write!(f, "{e}"),
            LimitsError::Residual(e) => write!(f, "{e}"),
            LimitsError::Matrix(e) => write!(f, "{e}"),
            LimitsError::Path(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for LimitsError {}

impl From<StructureError> for LimitsError {
    fn from(e: StructureError) -> Self {
        LimitsError::Structure(e)
    }
}

impl From<ResidualError> for LimitsError {
    fn from(e: ResidualError) -> Self {
        LimitsError::Residual(e)
    }
}

impl From<MatrixError> for LimitsError {
    fn from(e: MatrixError) -> Self {
        LimitsError::Matrix(e)
    }
}

impl From<spectral::SpectralError> for LimitsError {
    fn from(e: spectral::SpectralError) -> Self {
        LimitsError::Structure(StructureError::Spectral(e))
    }
}

impl From<PathError> for LimitsError {
    fn from(e: PathError) -> Self {
        LimitsError::Path(e)
    }
}

/// Row-stochastic limit kernel together with its multiplicative cocycle Γ.
#[derive(Debug, Clone)]
pub struct CocycleKernel {
    /// Original vertex indices carrying the kernel, ascending.
    pub support: Vec<usize>,
    pub rho: f64,
    /// `Γ(x, y)` on accessible pairs of the support (local indices), else 0.
    pub gamma: Matrix,
    /// `q(x, y) = w(x, y)·Γ(x, y)/ρ`; rows sum to one.
    pub q: Matrix,
}

/// Outcome of a convergence analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converges,
    Diverges,
}

/// Residue limits of one cylinder: entry i is the limit of the cylinder's
/// probability along lengths congruent to i modulo d.
#[derive(Debug, Clone)]
pub struct CylinderLimits {
    pub cylinder: Path,
    pub limits: Vec<f64>,
}

/// Evidence for or against weak convergence of the uniform distributions.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    /// Aggregation period: least common multiple of the basic periods of U(x₀).
    pub d: usize,
    /// Original vertex indices of U(x₀), indexing the rows of `betas`.
    pub support: Vec<usize>,
    /// `betas.get(x, i) = ρ^{-i}·[Fⁱ·P_d·1]_x` for residues i < d.
    pub betas: Matrix,
    /// Per inspected cylinder, its limit along each residue class; empty when
    /// the aperiodic shortcut applies.
    pub residue_limits: Vec<CylinderLimits>,
    pub verdict: Verdict,
    /// First cylinder whose residue limits disagree, when divergent.
    pub witness: Option<Path>,
    /// True when [`CYLINDER_CAP`] clipped the enumeration.
    pub truncated: bool,
}

/// Violations found in a proposed cocycle kernel; vertices are original
/// indices.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    /// Rows of q whose sum strays from one, with the sum.
    pub stochastic_violations: Vec<(usize, f64)>,
    /// Accessible triples x ⇒ y ⇒ z with Γ(x,z) ≠ Γ(x,y)·Γ(y,z), with the gap.
    pub cocycle_violations: Vec<(usize, usize, usize, f64)>,
    /// Accessible pairs where Γ vanishes.
    pub completeness_violations: Vec<(usize, usize)>,
}

impl ValidationReport {
    /// No stochasticity or multiplicativity violations.
    pub fn is_valid(&self) -> bool {
        self.stochastic_violations.is_empty() && self.cocycle_violations.is_empty()
    }

    /// Γ positive on every accessible pair.
    pub fn is_complete(&self) -> bool {
        self.completeness_violations.is_empty()
    }
}

/// Boltzmann probability of the cylinder over `u` from `x` at parameter `s`:
/// `w(u)·s^|u|·G_{last u}(s)/G_x(s)`.
pub fn boltzmann_cylinder(
    g: &WeightedDigraph,
    x: usize,
    s: f64,
    u: &Path,
) -> Result<f64, LimitsError> {
    if u.first() != x {
        return Err(LimitsError::PathNotFromSource);
    }
    let r = structure::reachable(g, x)?;
    // the disc is governed by the part reachable from x, not the whole digraph
    if s <= 0.0 || !s.is_finite() || (r.gamma > 0.0 && s * r.gamma >= 1.0) {
        return Err(LimitsError::OutOfRange { s });
    }
    let w = match cylinder_weight(g, u)? {
        Some(w) => w,
        None => return Ok(0.0),
    };
    let totals = residual::growth_eval(&r.digraph, s)?.totals();
    let lx = local_index(&r.vertices, x).expect("x generates its own restriction");
    let lf = local_index(&r.vertices, u.last()).expect("paths from x stay reachable");
    Ok(w * power(s, u.len()) * totals[lf] / totals[lx])
}

/// Uniform probability of the cylinder over `u` among length-`k` paths from
/// `x`: `w(u)·Z_{last u}(k−|u|)/Z_x(k)`.
pub fn uniform_cylinder(
    g: &WeightedDigraph,
    x: usize,
    k: usize,
    u: &Path,
) -> Result<f64, LimitsError> {
    if u.first() != x {
        return Err(LimitsError::PathNotFromSource);
    }
    if u.len() > k {
        return Err(LimitsError::LengthExceedsHorizon { len: u.len(), horizon: k });
    }
    let zt = graph::z_table(g, k);
    let zx = zt.z(x, k);
    if zx <= 0.0 {
        return Err(LimitsError::NoPaths { k });
    }
    let w = match cylinder_weight(g, u)? {
        Some(w) => w,
        None => return Ok(0.0),
    };
    Ok(w * zt.z(u.last(), k - u.len()) / zx)
}

/// Limit of the Boltzmann cylinder probabilities as `s` reaches the boundary:
/// `ρ^{-|u|}·w(u)·[Θ·1]_{last u}/[Θ·1]_x`, with Θ the residual matrix of the
/// restriction V(x₀). Zero when the cylinder leaves the spanned umbrella.
pub fn boltzmann_limit_cylinder(
    g: &WeightedDigraph,
    x0: usize,
    u: &Path,
) -> Result<f64, LimitsError> {
    if u.first() != x0 {
        return Err(LimitsError::PathNotFromSource);
    }
    let span = structure::umbrella_spanned(g, x0)?;
    let w = match cylinder_weight(g, u)? {
        Some(w) => w,
        None => return Ok(0.0),
    };
    if local_index(&span.vertices, u.last()).is_none() {
        // the mass of paths ending outside the umbrella vanishes in the limit
        return Ok(0.0);
    }
    let r = structure::reachable(g, x0)?;
    let rr = residual::residual_matrix(&r.digraph)?;
    let t1 = row_sums(&rr.theta);
    let lx = local_index(&r.vertices, x0).expect("x generates its own restriction");
    let lf = local_index(&r.vertices, u.last()).expect("paths from x stay reachable");
    Ok(w * power(1.0 / r.gamma, u.len()) * t1[lf] / t1[lx])
}

/// The limit kernel on U(x₀): `Γ(x, y) = [Θ·1]_y/[Θ·1]_x` with Θ the residual
/// matrix of U(x₀) itself, and `q = w·Γ/ρ`.
pub fn limit_kernel(g: &WeightedDigraph, x0: usize) -> Result<CocycleKernel, LimitsError> {
    let span = structure::umbrella_spanned(g, x0)?;
    let t1 = row_sums(&residual::residual_umbrella(&span.digraph)?.theta);
    kernel_from_weights(&span.digraph, span.vertices, span.gamma, &t1)
}

/// Decides weak convergence of the uniform distributions from `x₀`. Aperiodic
/// basic classes give convergence outright; otherwise every cylinder of
/// length at most `max_cylinder_len` (default 2d) is tested for agreement of
/// its residue limits.
pub fn uniform_convergence(
    g: &WeightedDigraph,
    x0: usize,
    max_cylinder_len: Option<usize>,
) -> Result<ConvergenceReport, LimitsError> {
    let span = structure::umbrella_spanned(g, x0)?;
    let gu = &span.digraph;
    let dec = structure::analyze(gu)?;
    let rho = dec.rho;
    let d = dec
        .basic_classes()
        .iter()
        .fold(1usize, |acc, &b| lcm(acc, dec.per_class[b].period));
    let sd = residual::periodic_decomposition(gu, d)?;
    // betas.get(x, i) = rho^-i [F^i P_d 1]_x, the per-residue growth profile
    let m = span.vertices.len();
    let ones = vec![1.0; m];
    let mut v = sd.projector.mul_vec(&ones)?;
    let mut betas = Matrix::zeros(m, d);
    let mut coef = 1.0;
    for i in 0..d {
        if i > 0 {
            v = gu.adjacency().mul_vec(&v)?;
            coef /= rho;
        }
        for (x, &vx) in v.iter().enumerate() {
            betas.set(x, i, coef * vx);
        }
    }
    if d == 1 {
        // aperiodic basic classes: the uniform family always converges
        return Ok(ConvergenceReport {
            d,
            support: span.vertices,
            betas,
            residue_limits: Vec::new(),
            verdict: Verdict::Converges,
            witness: None,
            truncated: false,
        });
    }
    // periodic case: compare the limits along each residue class of lengths,
    // cylinder by cylinder over the reachable part (paths may leave U)
    let max_len = max_cylinder_len.unwrap_or(2 * d);
    let r = structure::reachable(g, x0)?;
    let x0u = local_index(&span.vertices, x0).expect("x belongs to its own umbrella");
    let mut residue_limits: Vec<CylinderLimits> = Vec::new();
    let mut verdict = Verdict::Converges;
    let mut witness: Option<Path> = None;
    let mut truncated = false;
    // breadth-first over cylinder bases: lengths ascending, successors in
    // vertex order
    let x0r = local_index(&r.vertices, x0).expect("x generates its own restriction");
    let mut queue: Vec<(Vec<usize>, f64)> = vec![(vec![x0r], 1.0)];
    let mut head = 0;
    while head < queue.len() {
        if residue_limits.len() == CYLINDER_CAP {
            truncated = true;
            break;
        }
        let (verts, weight) = queue[head].clone();
        head += 1;
        let len = verts.len() - 1;
        let last = *verts.last().expect("cylinder bases are nonempty");
        let original: Vec<usize> = verts.iter().map(|&v| r.vertices[v]).collect();
        let cylinder = Path::new(original).expect("cylinder bases are nonempty");
        let limits: Vec<f64> = match local_index(&span.vertices, r.vertices[last]) {
            // ends outside the umbrella: the limit vanishes along every residue
            None => vec![0.0; d],
            Some(lu) => (0..d)
                .map(|i| {
                    let shifted = (i + d - len % d) % d;
                    power(1.0 / rho, len) * weight * betas.get(lu, shifted) / betas.get(x0u, i)
                })
                .collect(),
        };
        let agree = limits.iter().all(|&l| (l - limits[0]).abs() <= RESIDUE_TOL);
        if !agree && witness.is_none() {
            verdict = Verdict::Diverges;
            witness = Some(cylinder.clone());
        }
        residue_limits.push(CylinderLimits { cylinder, limits });
        if len < max_len {
            for (y, w) in r.digraph.out_edges(last) {
                let mut next = verts.clone();
                next.push(y);
                queue.push((next, weight * w));
            }
        }
    }
    Ok(ConvergenceReport {
        d,
        support: span.vertices,
        betas,
        residue_limits,
        verdict,
        witness,
        truncated,
    })
}

/// Checks a proposed kernel for row-stochasticity, multiplicativity of Γ on
/// accessible triples, and completeness (Γ positive on accessible pairs).
pub fn validate_cocycle_measure(
    g: &WeightedDigraph,
    kernel: &CocycleKernel,
) -> Result<ValidationReport, LimitsError> {
    let m = kernel.support.len();
    for &v in &kernel.support {
        if v >= g.vertex_count() {
            return Err(LimitsError::Structure(StructureError::UnknownVertex));
        }
    }
    if kernel.q.rows() != m || kernel.q.cols() != m || kernel.gamma.rows() != m {
        return Err(LimitsError::Matrix(MatrixError::DimensionMismatch));
    }
    let dec = structure::analyze(&g.induced(&kernel.support))?;
    let mut report = ValidationReport::default();
    for x in 0..m {
        let sum: f64 = (0..m).map(|y| kernel.q.get(x, y)).sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            report.stochastic_violations.push((kernel.support[x], sum));
        }
    }
    for x in 0..m {
        for y in 0..m {
            if !dec.vertex_accessible(x, y) {
                continue;
            }
            if kernel.gamma.get(x, y) <= 0.0 {
                report
                    .completeness_violations
                    .push((kernel.support[x], kernel.support[y]));
            }
            for z in 0..m {
                if !dec.vertex_accessible(y, z) {
                    continue;
                }
                let gap = kernel.gamma.get(x, z)
                    - kernel.gamma.get(x, y) * kernel.gamma.get(y, z);
                if gap.abs() > COCYCLE_TOL {
                    report.cocycle_violations.push((
                        kernel.support[x],
                        kernel.support[y],
                        kernel.support[z],
                        gap,
                    ));
                }
            }
        }
    }
    Ok(report)
}

/// The complete cocycle measure with simplex coordinates `alphas` (one per
/// basic class, in class order): `Γ(x, y) = r_y/r_x` for the positive
/// eigenvector `r = Σ αᵢ rᵢ`. Requires the basic classes to be exactly the
/// final ones; coordinates are normalized to sum to one.
pub fn cocycle_from_alpha(
    g: &WeightedDigraph,
    alphas: &[f64],
) -> Result<CocycleKernel, LimitsError> {
    let dec = structure::analyze(g)?;
    if !structure::is_umbrella(&dec)? {
        return Err(LimitsError::NotUmbrella);
    }
    let basics = dec.basic_classes();
    if alphas.len() != basics.len() {
        return Err(LimitsError::AlphaCount { got: alphas.len(), want: basics.len() });
    }
    for (i, &a) in alphas.iter().enumerate() {
        // nan fails is_finite, so it cannot sneak past the positivity gate
        if a <= 0.0 || !a.is_finite() {
            return Err(LimitsError::NonPositiveAlpha { index: i });
        }
    }
    let total: f64 = alphas.iter().sum();
    let n = g.vertex_count();
    let f = g.adjacency();
    let rho = dec.rho;
    // r starts as the blended perron vectors of the basic classes...
    let mut r = vec![0.0; n];
    for (i, &b) in basics.iter().enumerate() {
        let class = &dec.classes[b];
        let pair = spectral::perron_pair(g, class)?;
        for (j, &v) in class.iter().enumerate() {
            r[v] += alphas[i] / total * pair.right[j];
        }
    }
    // ...extended over the non-basic part by (rho Id - A) u = [F r]|_T
    let t: Vec<usize> = (0..n)
        .filter(|&v| !dec.per_class[dec.class_of[v]].is_basic)
        .collect();
    let fr = f.mul_vec(&r)?;
    let rhs: Vec<f64> = t.iter().map(|&v| fr[v]).collect();
    let mut shift = f.submatrix(&t, &t).scale(-1.0);
    for i in 0..t.len() {
        let v = shift.get(i, i);
        shift.set(i, i, v + rho);
    }
    let u = shift.solve(&col_vec(&rhs))?;
    for (i, &v) in t.iter().enumerate() {
        r[v] = u.get(i, 0);
    }
    if let Some(&bad) = r.iter().find(|&&x| x <= 0.0 || x.is_nan()) {
        // positive coordinates on every basic class force a positive vector
        return Err(LimitsError::Residual(ResidualError::VerificationFailed {
            identity: "positive eigenvector",
            residual: bad,
        }));
    }
    let support: Vec<usize> = (0..n).collect();
    kernel_from_weights(g, support, rho, &r)
}

// assembles Γ(x, y) = weights[y]/weights[x] on accessible pairs and the edge
// kernel q = w Γ / rho; `weights` must be positive on `support`
fn kernel_from_weights(
    g: &WeightedDigraph,
    support: Vec<usize>,
    rho: f64,
    weights: &[f64],
) -> Result<CocycleKernel, LimitsError> {
    let dec = structure::analyze(g)?;
    let m = g.vertex_count();
    let mut gamma = Matrix::zeros(m, m);
    let mut q = Matrix::zeros(m, m);
    for x in 0..m {
        for y in 0..m {
            if !dec.vertex_accessible(x, y) {
                continue;
            }
            let ratio = weights[y] / weights[x];
            gamma.set(x, y, ratio);
            let w = g.weight(x, y);
            if w > 0.0 {
                q.set(x, y, w * ratio / rho);
            }
        }
    }
    Ok(CocycleKernel { support, rho, gamma, q })
}

// weight of the cylinder base; an impossible step empties the cylinder
fn cylinder_weight(g: &WeightedDigraph, u: &Path) -> Result<Option<f64>, LimitsError> {
    match graph::path_weight(g, u) {
        Ok(w) => Ok(Some(w)),
        Err(PathError::NotAnEdge { .. }) => Ok(None),
        Err(e) => Err(LimitsError::Path(e)),
    }
}

fn local_index(sorted: &[usize], v: usize) -> Option<usize> {
    sorted.binary_search(&v).ok()
}

fn row_sums(m: &Matrix) -> Vec<f64> {
    (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| m.get(r, c)).sum())
        .collect()
}

fn power(base: f64, exp: usize) -> f64 {
    let mut out = 1.0;
    for _ in 0..exp {
        out *= base;
    }
    out
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    const SQRT_2: f64 = core::f64::consts::SQRT_2;

    fn path(g: &WeightedDigraph, tokens: &[&str]) -> Path {
        Path::from_tokens(g, tokens).unwrap()
    }

    #[test]
    fn boltzmann_cylinder_matches_hand_values() {
        let g2 = fixtures::g2();
        let ab = path(&g2, &["a", "b"]);
        assert!((boltzmann_cylinder(&g2, 0, 0.25, &ab).unwrap() - 0.25).abs() <= 1e-12);
        let trivial = path(&g2, &["a"]);
        assert!((boltzmann_cylinder(&g2, 0, 0.25, &trivial).unwrap() - 1.0).abs() <= 1e-12);
        let g1 = fixtures::g1();
        let aa = path(&g1, &["a", "a"]);
        assert!((boltzmann_cylinder(&g1, 0, 0.25, &aa).unwrap() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn boltzmann_cylinder_uses_the_local_disc() {
        // the heavy loop only constrains sources that reach it
        let g = WeightedDigraph::from_edges(&[("a", "a", 2.0), ("b", "b", 1.0)]).unwrap();
        let bb = path(&g, &["b", "b"]);
        assert!((boltzmann_cylinder(&g, 1, 0.7, &bb).unwrap() - 0.7).abs() <= 1e-12);
        let aa = path(&g, &["a", "a"]);
        assert!(matches!(
            boltzmann_cylinder(&g, 0, 0.7, &aa),
            Err(LimitsError::OutOfRange { .. })
        ));
    }

    #[test]
    fn boltzmann_cylinder_rejects_bad_parameters() {
        let g2 = fixtures::g2();
        let ab = path(&g2, &["a", "b"]);
        assert!(matches!(
            boltzmann_cylinder(&g2, 0, 0.5, &ab),
            Err(LimitsError::OutOfRange { .. })
        ));
        assert!(matches!(
            boltzmann_cylinder(&g2, 0, 0.0, &ab),
            Err(LimitsError::OutOfRange { .. })
        ));
        let bb = path(&g2, &["b", "b"]);
        assert!(matches!(
            boltzmann_cylinder(&g2, 0, 0.25, &bb),
            Err(LimitsError::PathNotFromSource)
        ));
    }

    #[test]
    fn uniform_cylinder_matches_hand_values() {
        let g2 = fixtures::g2();
        let aa = path(&g2, &["a", "a"]);
        for k in [1, 3, 5, 8] {
            assert!((uniform_cylinder(&g2, 0, k, &aa).unwrap() - 0.5).abs() <= 1e-12);
        }
        let g4 = fixtures::g4();
        let ab = path(&g4, &["a", "b"]);
        assert!((uniform_cylinder(&g4, 0, 2, &ab).unwrap() - 2.0 / 3.0).abs() <= 1e-12);
        assert!((uniform_cylinder(&g4, 0, 3, &ab).unwrap() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn uniform_cylinder_rejects_degenerate_requests() {
        let g2 = fixtures::g2();
        let aab = path(&g2, &["a", "a", "b"]);
        assert!(matches!(
            uniform_cylinder(&g2, 0, 1, &aab),
            Err(LimitsError::LengthExceedsHorizon { len: 2, horizon: 1 })
        ));
        let chain = WeightedDigraph::from_edges(&[("a", "b", 1.0)]).unwrap();
        let a = path(&chain, &["a"]);
        assert!(matches!(
            uniform_cylinder(&chain, 0, 3, &a),
            Err(LimitsError::NoPaths { k: 3 })
        ));
    }

    #[test]
    fn boltzmann_limit_cylinder_matches_residual_values() {
        let g3 = fixtures::g3();
        let aa = path(&g3, &["a", "a"]);
        assert!((boltzmann_limit_cylinder(&g3, 0, &aa).unwrap() - 1.0).abs() <= 1e-12);
        let ab = path(&g3, &["a", "b"]);
        assert_eq!(boltzmann_limit_cylinder(&g3, 0, &ab).unwrap(), 0.0);
        let g2 = fixtures::g2();
        let ab2 = path(&g2, &["a", "b"]);
        assert!((boltzmann_limit_cylinder(&g2, 0, &ab2).unwrap() - 0.5).abs() <= 1e-12);
        let g5 = fixtures::g5();
        let ab5 = path(&g5, &["a", "b"]);
        assert!((boltzmann_limit_cylinder(&g5, 0, &ab5).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn boltzmann_cylinders_approach_their_limit() {
        for g in fixtures::all() {
            let r = structure::reachable(&g, 0).unwrap();
            let u = {
                // a length-2 cylinder following smallest successors
                let mut verts = vec![0usize];
                for _ in 0..2 {
                    let last = *verts.last().unwrap();
                    let next = g.out_edges(last).next().unwrap().0;
                    verts.push(next);
                }
                Path::new(verts).unwrap()
            };
            let limit = boltzmann_limit_cylinder(&g, 0, &u).unwrap();
            let mut last_gap = f64::INFINITY;
            for j in 2..=5 {
                let s = (1.0 - power(0.1, j)) / r.gamma;
                let gap = (boltzmann_cylinder(&g, 0, s, &u).unwrap() - limit).abs();
                assert!(gap <= last_gap + 1e-12, "gap grew at j={j}: {gap} > {last_gap}");
                last_gap = gap;
            }
            assert!(last_gap <= 1e-3, "gap still {last_gap}");
        }
    }

    // all cylinder bases of up to three edges from the first vertex
    fn short_cylinders(g: &WeightedDigraph) -> Vec<Path> {
        let mut bases = vec![vec![0usize]];
        let mut head = 0;
        while head < bases.len() {
            let verts = bases[head].clone();
            head += 1;
            if verts.len() <= 3 {
                let last = *verts.last().unwrap();
                for (y, _) in g.out_edges(last) {
                    let mut next = verts.clone();
                    next.push(y);
                    bases.push(next);
                }
            }
        }
        bases.into_iter().map(|v| Path::new(v).unwrap()).collect()
    }

    #[test]
    fn uniform_cylinders_approach_the_boltzmann_limit_when_aperiodic() {
        for g in [fixtures::g1(), fixtures::g2()] {
            for u in short_cylinders(&g) {
                let limit = boltzmann_limit_cylinder(&g, 0, &u).unwrap();
                let mut last_gap = f64::INFINITY;
                for k in [8, 12, 16] {
                    let gap = (uniform_cylinder(&g, 0, k, &u).unwrap() - limit).abs();
                    assert!(gap <= last_gap + 1e-12, "{}: gap grew", u.render(&g));
                    last_gap = gap;
                }
                assert!(last_gap <= 0.02, "{}: gap still {last_gap}", u.render(&g));
            }
        }
    }

    #[test]
    fn uniform_gap_decays_like_the_inverse_horizon_at_height_two() {
        // with two stacked loops the correction is polynomial, not geometric:
        // Z_a(k) = k+1, so a cylinder ending at a misses its limit by exactly
        // |u|/(k+1) and one ending at b carries the whole 1/(k+1) tail
        let g = fixtures::g3();
        for u in short_cylinders(&g) {
            let limit = boltzmann_limit_cylinder(&g, 0, &u).unwrap();
            let c = if u.last() == 0 { u.len() as f64 } else { 1.0 };
            let mut last_gap = f64::INFINITY;
            for k in [8, 12, 16] {
                let gap = (uniform_cylinder(&g, 0, k, &u).unwrap() - limit).abs();
                assert!((gap - c / (k as f64 + 1.0)).abs() <= 1e-12, "{}", u.render(&g));
                assert!(gap <= last_gap + 1e-12);
                last_gap = gap;
            }
        }
    }

    #[test]
    fn limit_kernel_matches_hand_kernels() {
        let g2 = fixtures::g2();
        let k2 = limit_kernel(&g2, 0).unwrap();
        assert_eq!(k2.support, vec![0, 1]);
        assert!((k2.q.get(0, 0) - 0.5).abs() <= 1e-12);
        assert!((k2.q.get(0, 1) - 0.5).abs() <= 1e-12);
        assert!((k2.q.get(1, 1) - 1.0).abs() <= 1e-12);
        assert!((k2.gamma.get(0, 1) - 1.0).abs() <= 1e-12);
        let g5 = fixtures::g5();
        let k5 = limit_kernel(&g5, 0).unwrap();
        assert!((k5.q.get(0, 1) - 1.0).abs() <= 1e-12);
        assert!((k5.q.get(1, 0) - 1.0).abs() <= 1e-12);
        let g3 = fixtures::g3();
        let k3 = limit_kernel(&g3, 0).unwrap();
        assert_eq!(k3.support, vec![0]);
        assert!((k3.q.get(0, 0) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn limit_kernel_pins_the_branching_fixture() {
        let k = limit_kernel(&fixtures::g4(), 0).unwrap();
        assert_eq!(k.support, vec![0, 1, 2]);
        assert!((k.q.get(0, 1) - (2.0 - SQRT_2)).abs() <= 1e-12);
        assert!((k.q.get(0, 2) - (SQRT_2 - 1.0)).abs() <= 1e-12);
        assert!((k.q.get(1, 2) - 1.0).abs() <= 1e-12);
        assert!((k.q.get(2, 1) - 1.0).abs() <= 1e-12);
        for x in 0..3 {
            let sum: f64 = (0..3).map(|y| k.q.get(x, y)).sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn limit_kernels_validate_as_complete_cocycle_measures() {
        for g in [fixtures::g1(), fixtures::g2(), fixtures::g4(), fixtures::g5()] {
            let k = limit_kernel(&g, 0).unwrap();
            let report = validate_cocycle_measure(&g, &k).unwrap();
            assert!(report.is_valid(), "{:?}", report);
            assert!(report.is_complete(), "{:?}", report);
        }
    }

    #[test]
    fn validation_flags_constructed_violations() {
        let g2 = fixtures::g2();
        let mut broken = limit_kernel(&g2, 0).unwrap();
        broken.gamma.set(0, 1, 0.0);
        let report = validate_cocycle_measure(&g2, &broken).unwrap();
        assert_eq!(report.completeness_violations, vec![(0, 1)]);
        assert!(report.is_valid(), "zeroing gamma alone keeps q stochastic");
        let mut skewed = limit_kernel(&g2, 0).unwrap();
        let v = skewed.q.get(0, 0);
        skewed.q.set(0, 0, v * 1.5);
        let report = validate_cocycle_measure(&g2, &skewed).unwrap();
        assert_eq!(report.stochastic_violations.len(), 1);
        assert_eq!(report.stochastic_violations[0].0, 0);
    }

    #[test]
    fn uniform_convergence_shortcuts_aperiodic_classes() {
        let report = uniform_convergence(&fixtures::g2(), 0, None).unwrap();
        assert_eq!(report.d, 1);
        assert_eq!(report.verdict, Verdict::Converges);
        assert!(report.residue_limits.is_empty());
        assert!(report.witness.is_none());
        assert!(!report.truncated);
    }

    #[test]
    fn uniform_convergence_accepts_the_plain_cycle() {
        let report = uniform_convergence(&fixtures::g5(), 0, None).unwrap();
        assert_eq!(report.d, 2);
        assert_eq!(report.verdict, Verdict::Converges);
        let ab = report
            .residue_limits
            .iter()
            .find(|c| c.cylinder.vertices() == [0, 1])
            .expect("cylinder (a, b) inspected");
        for &l in &ab.limits {
            assert!((l - 1.0).abs() <= 1e-12);
        }
        for x in 0..2 {
            for i in 0..2 {
                assert!((report.betas.get(x, i) - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn uniform_convergence_detects_the_branching_oscillation() {
        let g4 = fixtures::g4();
        let report = uniform_convergence(&g4, 0, None).unwrap();
        assert_eq!(report.d, 2);
        assert_eq!(report.verdict, Verdict::Diverges);
        let witness = report.witness.as_ref().expect("a witness is reported");
        assert_eq!(witness.vertices(), [0, 1]);
        let ab = report
            .residue_limits
            .iter()
            .find(|c| c.cylinder.vertices() == [0, 1])
            .unwrap();
        assert!((ab.limits[0] - 2.0 / 3.0).abs() <= 1e-12);
        assert!((ab.limits[1] - 0.5).abs() <= 1e-12);
        // the betas behind the limits
        assert!((report.betas.get(0, 0) - 1.5).abs() <= 1e-12);
        assert!((report.betas.get(0, 1) - SQRT_2).abs() <= 1e-12);
        assert!((report.betas.get(1, 0) - 1.0).abs() <= 1e-12);
        assert!((report.betas.get(1, 1) - SQRT_2).abs() <= 1e-12);
        assert!((report.betas.get(2, 0) - 1.0).abs() <= 1e-12);
        assert!((report.betas.get(2, 1) - SQRT_2 / 2.0).abs() <= 1e-12);
        // the oscillation is exact at finite horizons already
        let ab_path = path(&g4, &["a", "b"]);
        for k in [6, 8] {
            let exact = uniform_cylinder(&g4, 0, k, &ab_path).unwrap();
            assert!((exact - 2.0 / 3.0).abs() <= 1e-12);
        }
        for k in [5, 7] {
            let exact = uniform_cylinder(&g4, 0, k, &ab_path).unwrap();
            assert!((exact - 0.5).abs() <= 1e-12);
        }
    }

    #[test]
    fn uniform_convergence_zeroes_cylinders_leaving_the_umbrella() {
        // periodic core with a decaying side branch
        let g = WeightedDigraph::from_edges(&[
            ("a", "b", 1.0),
            ("b", "a", 1.0),
            ("b", "t", 1.0),
            ("t", "t", 0.5),
        ])
        .unwrap();
        let report = uniform_convergence(&g, 0, None).unwrap();
        assert_eq!(report.d, 2);
        assert_eq!(report.verdict, Verdict::Converges);
        assert_eq!(report.support, vec![0, 1]);
        let abt = report
            .residue_limits
            .iter()
            .find(|c| c.cylinder.vertices() == [0, 1, 2])
            .expect("the escaping cylinder is inspected");
        assert!(abt.limits.iter().all(|&l| l == 0.0));
        let aba = report
            .residue_limits
            .iter()
            .find(|c| c.cylinder.vertices() == [0, 1, 0])
            .unwrap();
        for &l in &aba.limits {
            assert!((l - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn cocycle_from_alpha_recovers_the_limit_kernel() {
        let g2 = fixtures::g2();
        let from_alpha = cocycle_from_alpha(&g2, &[1.0]).unwrap();
        let from_limit = limit_kernel(&g2, 0).unwrap();
        let diff = from_alpha.q.sub(&from_limit.q).unwrap().max_abs();
        assert!(diff <= 1e-12, "kernels differ by {diff}");
        let g5 = fixtures::g5();
        let k5 = cocycle_from_alpha(&g5, &[1.0]).unwrap();
        assert!((k5.q.get(0, 1) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cocycle_from_alpha_steers_the_branch_choice() {
        // two final loops fed by a common source: the coordinates become the
        // branching probabilities
        let g = WeightedDigraph::from_edges(&[
            ("t", "a", 1.0),
            ("t", "b", 1.0),
            ("a", "a", 2.0),
            ("b", "b", 2.0),
        ])
        .unwrap();
        let k = cocycle_from_alpha(&g, &[0.3, 0.7]).unwrap();
        assert!((k.q.get(0, 1) - 0.3).abs() <= 1e-12);
        assert!((k.q.get(0, 2) - 0.7).abs() <= 1e-12);
        let report = validate_cocycle_measure(&g, &k).unwrap();
        assert!(report.is_valid() && report.is_complete());
    }

    #[test]
    fn cocycle_from_alpha_rejects_bad_inputs() {
        assert!(matches!(
            cocycle_from_alpha(&fixtures::g3(), &[0.5, 0.5]),
            Err(LimitsError::NotUmbrella)
        ));
        // basic class above a non-basic final one: augmented but not strict
        let augmented = WeightedDigraph::from_edges(&[
            ("a", "a", 2.0),
            ("a", "b", 1.0),
            ("b", "b", 1.0),
        ])
        .unwrap();
        assert!(matches!(
            cocycle_from_alpha(&augmented, &[1.0]),
            Err(LimitsError::NotUmbrella)
        ));
        assert!(matches!(
            cocycle_from_alpha(&fixtures::g2(), &[1.0, 1.0]),
            Err(LimitsError::AlphaCount { got: 2, want: 1 })
        ));
        assert!(matches!(
            cocycle_from_alpha(&fixtures::g2(), &[0.0]),
            Err(LimitsError::NonPositiveAlpha { index: 0 })
        ));
    }
}
