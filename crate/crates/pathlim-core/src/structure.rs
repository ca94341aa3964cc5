//! Access-class structure: strongly connected classes in a block-triangular
//! order, basic/final flags, height with its dominant chains, umbrella
//! predicates, and the reachable restriction V(x) with its spanned
//! umbrella part U(x).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::WeightedDigraph;
use crate::spectral::{self, SpectralError};

/// Relative tolerance for declaring a class basic (its radius equal to the
/// global one). Adversarial near-ties may misclassify.
pub const BASIC_TOL: f64 = 1e-9;

/// Structure-level failures.
#[derive(Debug, Clone, PartialEq)]
pub enum StructureError {
    /// Vertex index out of range.
    UnknownVertex,
    /// The digraph has spectral radius zero (no cycles), so spectral
    /// structure is undefined.
    Degenerate,
    /// No infinite paths start at the vertex (its reachable part is
    /// cycle-free).
    NoInfinitePaths,
    /// A supplied table does not match the class count.
    ShapeMismatch,
    /// A per-class spectral computation failed.
    Spectral(SpectralError),
}

impl fmt::Display for StructureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureError::UnknownVertex => write!(f, "unknown vertex"),
            StructureError::Degenerate => write!(f, "digraph has spectral radius zero"),
            StructureError::NoInfinitePaths => write!(f, "no infinite paths from this vertex"),
            StructureError::ShapeMismatch => write!(f, "table does not match the class count"),
            StructureError::Spectral(e) => write!(f, "spectral computation failed: {e}"),
        }
    }
}

impl core::error::Error for StructureError {}

impl From<SpectralError> for StructureError {
    fn from(e: SpectralError) -> Self {
        StructureError::Spectral(e)
    }
}

/// Per-class data; radius, period and the basic flag are filled by
/// [`classify`] and zeroed before that.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassInfo {
    pub rho: f64,
    pub period: usize,
    pub is_basic: bool,
    pub is_final: bool,
}

/// Access classes in an order where every edge goes to an equal or larger
/// class index and final classes occupy the largest indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDecomposition {
    /// Class index → member vertices, ascending.
    pub classes: Vec<Vec<usize>>,
    /// Vertex → class index.
    pub class_of: Vec<usize>,
    /// Direct edges between distinct classes.
    pub class_edges: Vec<Vec<bool>>,
    /// Reflexive-transitive closure of `class_edges`.
    pub accessible: Vec<Vec<bool>>,
    pub per_class: Vec<ClassInfo>,
    /// Global spectral radius (max over classes); 0 until [`classify`].
    pub rho: f64,
}

impl ClassDecomposition {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Vertex-level accessibility x ⇒ y (reflexive).
    pub fn vertex_accessible(&self, x: usize, y: usize) -> bool {
        self.accessible[self.class_of[x]][self.class_of[y]]
    }

    /// True when no class carries a positive radius.
    pub fn is_degenerate(&self) -> bool {
        self.rho <= 0.0
    }

    /// Class indices flagged basic, ascending.
    pub fn basic_classes(&self) -> Vec<usize> {
        (0..self.class_count()).filter(|&i| self.per_class[i].is_basic).collect()
    }

    /// Class indices flagged final, ascending.
    pub fn final_classes(&self) -> Vec<usize> {
        (0..self.class_count()).filter(|&i| self.per_class[i].is_final).collect()
    }
}

/// Height of the digraph with every dominant chain (maximal ⇒-chains of
/// basic classes), chains listed lexicographically as class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeightReport {
    pub height: usize,
    pub dominant_chains: Vec<Vec<usize>>,
}

/// Reachable restriction: the vertices of V(x), the induced digraph, and
/// its spectral radius γ(x).
#[derive(Debug, Clone)]
pub struct Reachable {
    /// Original vertex indices, ascending; contains x.
    pub vertices: Vec<usize>,
    pub digraph: WeightedDigraph,
    pub gamma: f64,
}

/// Umbrella part spanned by a vertex: the vertices of U(x), the induced
/// digraph, and γ(x).
#[derive(Debug, Clone)]
pub struct UmbrellaSpan {
    /// Original vertex indices, ascending; contains x.
    pub vertices: Vec<usize>,
    pub digraph: WeightedDigraph,
    pub gamma: f64,
}

/// Strongly connected classes with the block-triangular order: topological
/// (every edge keeps or increases the class index), final classes last,
/// ties broken by smallest member vertex. Radii and flags other than
/// `is_final` are left for [`classify`].
pub fn access_classes(g: &WeightedDigraph) -> ClassDecomposition {
    let n = g.vertex_count();
    let comps = tarjan_components(g);
    let c = comps.len();
    // provisional ids, then a deterministic topological reorder
    let mut prov_of = vec![0usize; n];
    for (i, comp) in comps.iter().enumerate() {
        for &v in comp {
            prov_of[v] = i;
        }
    }
    let mut direct = vec![vec![false; c]; c];
    for x in 0..n {
        for (y, _) in g.out_edges(x) {
            let (a, b) = (prov_of[x], prov_of[y]);
            if a != b {
                direct[a][b] = true;
            }
        }
    }
    let order = topological_order(&comps, &direct);
    // finals move to the back, keeping relative order
    let is_final_prov: Vec<bool> =
        (0..c).map(|i| (0..c).all(|j| !direct[i][j])).collect();
    let mut arranged: Vec<usize> = Vec::with_capacity(c);
    arranged.extend(order.iter().copied().filter(|&i| !is_final_prov[i]));
    arranged.extend(order.iter().copied().filter(|&i| is_final_prov[i]));
    // re-index everything by the arranged order
    let mut classes: Vec<Vec<usize>> = Vec::with_capacity(c);
    let mut class_of = vec![0usize; n];
    for (new_id, &prov) in arranged.iter().enumerate() {
        let members = comps[prov].clone();
        for &v in &members {
            class_of[v] = new_id;
        }
        classes.push(members);
    }
    let mut class_edges = vec![vec![false; c]; c];
    for (new_a, &prov_a) in arranged.iter().enumerate() {
        for (new_b, &prov_b) in arranged.iter().enumerate() {
            class_edges[new_a][new_b] = direct[prov_a][prov_b];
        }
    }
    // closure over a forward-only DAG: sweep classes backward
    let mut accessible = vec![vec![false; c]; c];
    for i in (0..c).rev() {
        accessible[i][i] = true;
        for k in (i + 1)..c {
            if class_edges[i][k] {
                let row_k = accessible[k].clone();
                for (j, reach) in row_k.iter().enumerate() {
                    if *reach {
                        accessible[i][j] = true;
                    }
                }
            }
        }
    }
    let per_class = (0..c)
        .map(|i| ClassInfo {
            rho: 0.0,
            period: 0,
            is_basic: false,
            is_final: (0..c).all(|j| !class_edges[i][j]),
        })
        .collect();
    ClassDecomposition { classes, class_of, class_edges, accessible, per_class, rho: 0.0 }
}

/// Iterative Tarjan; components come out sorted internally.
fn tarjan_components(g: &WeightedDigraph) -> Vec<Vec<usize>> {
    let n = g.vertex_count();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        // frames carry the next successor to inspect
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&(v, ci)) = call.last() {
            let mut w = ci;
            while w < n && !g.has_edge(v, w) {
                w += 1;
            }
            if w < n {
                call.last_mut().expect("frame exists").1 = w + 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] && index[w] < low[v] {
                    low[v] = index[w];
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    if low[v] < low[p] {
                        low[p] = low[v];
                    }
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("component members are on the stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

/// Kahn's algorithm over provisional class ids, always releasing the ready
/// class with the smallest member vertex.
fn topological_order(comps: &[Vec<usize>], direct: &[Vec<bool>]) -> Vec<usize> {
    let c = comps.len();
    let mut indegree = vec![0usize; c];
    for row in direct.iter() {
        for (b, &e) in row.iter().enumerate() {
            if e {
                indegree[b] += 1;
            }
        }
    }
    let mut done = vec![false; c];
    let mut order = Vec::with_capacity(c);
    for _ in 0..c {
        let next = (0..c)
            .filter(|&i| !done[i] && indegree[i] == 0)
            .min_by_key(|&i| comps[i][0])
            .expect("a directed acyclic condensation always has a ready class");
        done[next] = true;
        order.push(next);
        for (b, &e) in direct[next].iter().enumerate() {
            if e {
                indegree[b] -= 1;
            }
        }
    }
    order
}

/// Fills radii, periods and the basic flags from per-class spectral radii
/// (in class order). A result with `rho == 0` is degenerate and rejected
/// by the operations that need spectral structure.
pub fn classify(
    g: &WeightedDigraph,
    mut dec: ClassDecomposition,
    spectral_radii: &[f64],
) -> Result<ClassDecomposition, StructureError> {
    if spectral_radii.len() != dec.class_count() {
        return Err(StructureError::ShapeMismatch);
    }
    let rho = spectral_radii.iter().copied().fold(0.0f64, f64::max);
    for (i, info) in dec.per_class.iter_mut().enumerate() {
        info.rho = spectral_radii[i];
        info.is_basic = rho > 0.0 && spectral_radii[i] >= rho * (1.0 - BASIC_TOL);
        info.period = spectral::period_class(g, &dec.classes[i])?.period;
    }
    dec.rho = rho;
    Ok(dec)
}

/// Full analysis: classes, per-class radii by power iteration, flags and
/// periods.
pub fn analyze(g: &WeightedDigraph) -> Result<ClassDecomposition, StructureError> {
    let dec = access_classes(g);
    let radii = dec
        .classes
        .iter()
        .map(|class| spectral::spectral_radius_class(g, class))
        .collect::<Result<Vec<_>, _>>()?;
    classify(g, dec, &radii)
}

/// Longest ⇒-chains of basic classes, with every chain of maximal length.
pub fn height(dec: &ClassDecomposition) -> Result<HeightReport, StructureError> {
    if dec.is_degenerate() {
        return Err(StructureError::Degenerate);
    }
    let c = dec.class_count();
    let basic: Vec<usize> = dec.basic_classes();
    // longest chain of basic classes ending at each class; the order is
    // topological so predecessors have smaller indices
    let mut len = vec![0usize; c];
    for &i in &basic {
        let mut best = 0;
        for &j in &basic {
            if j != i && dec.accessible[j][i] && len[j] > best {
                best = len[j];
            }
        }
        len[i] = best + 1;
    }
    let h = len.iter().copied().max().unwrap_or(0);
    // walk every maximal chain backward; members of a maximal chain sit at
    // exactly their prefix length
    let mut chains: Vec<Vec<usize>> = Vec::new();
    let mut suffix: Vec<usize> = Vec::new();
    for &end in &basic {
        if len[end] == h {
            collect_chains(dec, &basic, &len, end, &mut suffix, &mut chains);
        }
    }
    chains.sort();
    Ok(HeightReport { height: h, dominant_chains: chains })
}

fn collect_chains(
    dec: &ClassDecomposition,
    basic: &[usize],
    len: &[usize],
    at: usize,
    suffix: &mut Vec<usize>,
    chains: &mut Vec<Vec<usize>>,
) {
    suffix.push(at);
    if len[at] == 1 {
        let mut chain: Vec<usize> = suffix.clone();
        chain.reverse();
        chains.push(chain);
    } else {
        for &j in basic {
            if j != at && dec.accessible[j][at] && len[j] == len[at] - 1 {
                collect_chains(dec, basic, len, j, suffix, chains);
            }
        }
    }
    suffix.pop();
}

/// True when the basic classes are exactly the final classes.
pub fn is_umbrella(dec: &ClassDecomposition) -> Result<bool, StructureError> {
    if dec.is_degenerate() {
        return Err(StructureError::Degenerate);
    }
    Ok(dec
        .per_class
        .iter()
        .all(|info| info.is_basic == info.is_final))
}

/// True when no basic class has access to a distinct basic class
/// (equivalently, the height is 1).
pub fn is_augmented_umbrella(dec: &ClassDecomposition) -> Result<bool, StructureError> {
    if dec.is_degenerate() {
        return Err(StructureError::Degenerate);
    }
    let basic = dec.basic_classes();
    for &i in &basic {
        for &j in &basic {
            if i != j && dec.accessible[i][j] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The restriction V(x): all vertices accessible from `x`, the induced
/// digraph, and its radius γ(x).
pub fn reachable(g: &WeightedDigraph, x: usize) -> Result<Reachable, StructureError> {
    let n = g.vertex_count();
    if x >= n {
        return Err(StructureError::UnknownVertex);
    }
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
    let vertices: Vec<usize> = (0..n).filter(|&v| seen[v]).collect();
    let digraph = g.induced(&vertices);
    let dec = analyze(&digraph)?;
    Ok(Reachable { vertices, digraph, gamma: dec.rho })
}

/// The umbrella part U(x) spanned by `x`: vertices of V(x) with access to
/// the first class of some dominant chain of V(x).
pub fn umbrella_spanned(g: &WeightedDigraph, x: usize) -> Result<UmbrellaSpan, StructureError> {
    let r = reachable(g, x)?;
    if r.gamma <= 0.0 {
        return Err(StructureError::NoInfinitePaths);
    }
    let dec = analyze(&r.digraph)?;
    let hr = height(&dec)?;
    let mut is_head = vec![false; dec.class_count()];
    for chain in &hr.dominant_chains {
        is_head[chain[0]] = true;
    }
    let m = r.digraph.vertex_count();
    let mut keep: Vec<usize> = Vec::new();
    for local in 0..m {
        let cls = dec.class_of[local];
        if (0..dec.class_count()).any(|h| is_head[h] && dec.accessible[cls][h]) {
            keep.push(r.vertices[local]);
        }
    }
    let digraph = g.induced(&keep);
    Ok(UmbrellaSpan { vertices: keep, digraph, gamma: r.gamma })
}
