//! Exact samplers for the three path distributions. The uniform sampler
//! walks k steps with step law w(v,y)·Z_y(m−1)/Z_v(m); the Boltzmann sampler
//! halts at v with probability 1/G_v(s) and otherwise moves with probability
//! s·w(v,y)·G_y(s)/G_v(s); the limit walk follows a cocycle kernel. All three
//! draw from an explicit [`Rng`], so a seed fully determines the stream.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::{self, Path, WeightedDigraph, ZTable};
use crate::limits::{self, CocycleKernel, LimitsError};
use crate::residual::{self, ResidualError};
use crate::rng::Rng;
use crate::structure::{self, StructureError};

/// Sampler-level failures.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingError {
    /// No path of the requested length leaves the source.
    NoPaths { k: usize },
    /// Boltzmann parameter outside `(0, 1/γ(x))`.
    OutOfRange { s: f64 },
    /// The start vertex is not in the kernel support.
    OutsideSupport,
    /// A kernel row offers no positive transition to follow.
    DeadEnd,
    Structure(StructureError),
    Residual(ResidualError),
    Limits(LimitsError),
}

impl fmt::Display for SamplingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingError::NoPaths { k } => {
                write!(f, "no path of length {k} leaves the source")
            }
            SamplingError::OutOfRange { s } => {
                write!(f, "parameter {s} lies outside (0, 1/gamma)")
            }
            SamplingError::OutsideSupport => {
                write!(f, "the start vertex is outside the kernel support")
            }
            SamplingError::DeadEnd => {
                write!(f, "a kernel row offers no positive transition")
            }
            SamplingError::Structure(e) => write!(f, "{e}"),
            SamplingError::Residual(e) => write!(f, "{e}"),
            SamplingError::Limits(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for SamplingError {}

impl From<StructureError> for SamplingError {
    fn from(e: StructureError) -> Self {
        SamplingError::Structure(e)
    }
}

impl From<ResidualError> for SamplingError {
    fn from(e: ResidualError) -> Self {
        SamplingError::Residual(e)
    }
}

impl From<LimitsError> for SamplingError {
    fn from(e: LimitsError) -> Self {
        SamplingError::Limits(e)
    }
}

/// What to sample: fixed-length uniform, Boltzmann at parameter s, or an
/// n-step walk under the limit kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleMode {
    Uniform { k: usize },
    Boltzmann { s: f64 },
    LimitWalk { n: usize },
}

/// A reproducible sampling run: the seed fully determines the stream for a
/// fixed digraph, source, and mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub seed: u64,
    pub mode: SampleMode,
    pub count: usize,
}

/// Draws `config.count` paths from `x` under `config.mode`.
pub fn run(
    g: &WeightedDigraph,
    x: usize,
    config: &SamplerConfig,
) -> Result<Vec<Path>, SamplingError> {
    let mut rng = Rng::new(config.seed);
    let mut out = Vec::with_capacity(config.count);
    match config.mode {
        SampleMode::Uniform { k } => {
            let sampler = UniformSampler::new(g, x, k)?;
            for _ in 0..config.count {
                out.push(sampler.sample(&mut rng));
            }
        }
        SampleMode::Boltzmann { s } => {
            let sampler = BoltzmannSampler::new(g, x, s)?;
            for _ in 0..config.count {
                out.push(sampler.sample(&mut rng));
            }
        }
        SampleMode::LimitWalk { n } => {
            let kernel = limits::limit_kernel(g, x)?;
            for _ in 0..config.count {
                out.push(sample_limit_walk(g, &kernel, x, n, &mut rng)?);
            }
        }
    }
    Ok(out)
}

/// Exact sampler for the uniform distribution on length-k paths from x;
/// precomputes the Z table once, then each step costs one out-edge scan.
#[derive(Debug)]
pub struct UniformSampler<'a> {
    g: &'a WeightedDigraph,
    x: usize,
    k: usize,
    zt: ZTable,
}

impl<'a> UniformSampler<'a> {
    pub fn new(g: &'a WeightedDigraph, x: usize, k: usize) -> Result<Self, SamplingError> {
        let zt = graph::z_table(g, k);
        if zt.z(x, k) <= 0.0 {
            return Err(SamplingError::NoPaths { k });
        }
        Ok(UniformSampler { g, x, k, zt })
    }

    /// One path of length k, distributed as the uniform distribution μ_{x,k}.
    pub fn sample(&self, rng: &mut Rng) -> Path {
        let mut verts = Vec::with_capacity(self.k + 1);
        verts.push(self.x);
        let mut v = self.x;
        for m in (1..=self.k).rev() {
            // P(y) = w(v,y)·Z_y(m−1)/Z_v(m); the masses sum to Z_v(m) exactly
            let budget = rng.next_f64() * self.zt.z(v, m);
            v = pick(
                self.g.out_edges(v).map(|(y, w)| (y, w * self.zt.z(y, m - 1))),
                budget,
            )
            .expect("positive z guarantees a continuation");
            verts.push(v);
        }
        Path::new(verts).expect("walks are nonempty")
    }
}

/// Exact sampler for the Boltzmann distribution at parameter s from x;
/// precomputes the growth values G_v(s) once (a single linear solve).
#[derive(Debug)]
pub struct BoltzmannSampler {
    restriction: WeightedDigraph,
    originals: Vec<usize>,
    start: usize,
    s: f64,
    totals: Vec<f64>,
}

impl BoltzmannSampler {
    pub fn new(g: &WeightedDigraph, x: usize, s: f64) -> Result<Self, SamplingError> {
        let r = structure::reachable(g, x)?;
        // the walk never leaves V(x), whose own radius bounds the disc
        if s <= 0.0 || !s.is_finite() || (r.gamma > 0.0 && s * r.gamma >= 1.0) {
            return Err(SamplingError::OutOfRange { s });
        }
        let totals = residual::growth_eval(&r.digraph, s)?.totals();
        let start = r
            .vertices
            .binary_search(&x)
            .expect("x generates its own restriction");
        Ok(BoltzmannSampler {
            restriction: r.digraph,
            originals: r.vertices,
            start,
            s,
            totals,
        })
    }

    /// One finite path, hit with probability w(u)·s^|u|/G_x(s); halts with
    /// probability one because every halt chance is at least 1/max G.
    pub fn sample(&self, rng: &mut Rng) -> Path {
        let mut verts = vec![self.originals[self.start]];
        let mut v = self.start;
        loop {
            // G_v = 1 + Σ_y s·w(v,y)·G_y splits the unit mass exactly
            let budget = rng.next_f64() * self.totals[v];
            if budget < 1.0 {
                break;
            }
            let moves = self
                .restriction
                .out_edges(v)
                .map(|(y, w)| (y, self.s * w * self.totals[y]));
            v = pick(moves, budget - 1.0).expect("excess growth implies an out-edge");
            verts.push(self.originals[v]);
        }
        Path::new(verts).expect("walks are nonempty")
    }
}

/// One path of length k from x under the uniform distribution.
pub fn sample_uniform(
    g: &WeightedDigraph,
    x: usize,
    k: usize,
    rng: &mut Rng,
) -> Result<Path, SamplingError> {
    Ok(UniformSampler::new(g, x, k)?.sample(rng))
}

/// One finite path from x under the Boltzmann distribution at parameter s.
pub fn sample_boltzmann(
    g: &WeightedDigraph,
    x: usize,
    s: f64,
    rng: &mut Rng,
) -> Result<Path, SamplingError> {
    Ok(BoltzmannSampler::new(g, x, s)?.sample(rng))
}

/// An n-step prefix of the infinite walk driven by the kernel: the prefix u
/// is hit with probability ρ^{−|u|}·w(u)·Γ(x, last u).
pub fn sample_limit_walk(
    g: &WeightedDigraph,
    kernel: &CocycleKernel,
    x: usize,
    n: usize,
    rng: &mut Rng,
) -> Result<Path, SamplingError> {
    if kernel.support.iter().any(|&v| v >= g.vertex_count()) {
        return Err(SamplingError::Structure(StructureError::UnknownVertex));
    }
    let mut v = kernel
        .support
        .binary_search(&x)
        .map_err(|_| SamplingError::OutsideSupport)?;
    let m = kernel.support.len();
    let mut verts = Vec::with_capacity(n + 1);
    verts.push(x);
    for _ in 0..n {
        // kernel rows are stochastic, so the unit budget lands in some bucket
        let budget = rng.next_f64();
        let row = (0..m).map(|y| (y, kernel.q.get(v, y)));
        v = pick(row, budget).ok_or(SamplingError::DeadEnd)?;
        verts.push(kernel.support[v]);
    }
    Ok(Path::new(verts).expect("walks are nonempty"))
}

/// Fraction of samples whose prefix is `u` (a sample extends the cylinder
/// over u exactly when u is one of its prefixes); 0 for an empty list.
pub fn empirical_cylinder(samples: &[Path], u: &Path) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples.iter().filter(|s| u.is_prefix_of(s)).count();
    hits as f64 / samples.len() as f64
}

// cumulative scan over weighted buckets: first bucket carrying the budget
// wins, and rounding shortfalls are absorbed by the last positive bucket
fn pick<I: Iterator<Item = (usize, f64)>>(buckets: I, budget: f64) -> Option<usize> {
    let mut acc = 0.0;
    let mut last_positive = None;
    for (y, mass) in buckets {
        if mass <= 0.0 {
            continue;
        }
        acc += mass;
        last_positive = Some(y);
        if budget < acc {
            return Some(y);
        }
    }
    last_positive
}
