//! Weighted digraphs, paths and weighted path counts.
//!
//! A digraph is a finite vertex list plus a dense nonnegative weight table;
//! the edges are the pairs of positive weight and the table doubles as the
//! adjacency matrix. Path weights multiply edge weights, and the tables
//! `Z_x(k)` / `Z_{x,y}(k)` count paths by weight through powers of the
//! adjacency matrix.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::matrix::Matrix;

/// Finite weighted digraph: ordered vertex tokens and a dense weight table.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    vertices: Vec<String>,
    weights: Matrix,
}

/// Construction error for [`WeightedDigraph`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphError {
    /// Weight table shape does not match the vertex list.
    ShapeMismatch,
    /// A weight is negative or not finite.
    InvalidWeight,
    /// Two vertices carry the same token.
    DuplicateVertex,
    /// The vertex list is empty.
    Empty,
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::ShapeMismatch => write!(f, "weight table shape does not match vertices"),
            GraphError::InvalidWeight => write!(f, "weights must be finite and nonnegative"),
            GraphError::DuplicateVertex => write!(f, "duplicate vertex token"),
            GraphError::Empty => write!(f, "digraph has no vertices"),
        }
    }
}

impl core::error::Error for GraphError {}

/// Parse error for the edge-list text format, with 1-based line numbers.
#[derive(Debug, Clone, PartialEq)]
pub enum ParseError {
    /// Line does not have exactly `src dst weight`.
    BadArity { line: usize },
    /// Weight field is not a finite nonnegative decimal.
    BadWeight { line: usize },
    /// The same ordered vertex pair appears on two lines.
    DuplicateEdge { line: usize },
    /// No vertex declarations at all.
    Empty,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::BadArity { line } => {
                write!(f, "line {line}: expected `src dst weight`")
            }
            ParseError::BadWeight { line } => {
                write!(f, "line {line}: weight must be a finite nonnegative decimal")
            }
            ParseError::DuplicateEdge { line } => {
                write!(f, "line {line}: duplicate edge line for this vertex pair")
            }
            ParseError::Empty => write!(f, "input declares no vertices"),
        }
    }
}

impl core::error::Error for ParseError {}

/// Errors for path-valued operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathError {
    /// Paths must contain at least one vertex.
    Empty,
    /// A vertex index is out of range, or a token is unknown.
    UnknownVertex,
    /// Two consecutive vertices are not joined by an edge.
    NotAnEdge { position: usize },
    /// Vector length does not match the vertex count.
    DimensionMismatch,
}

impl fmt::Display for PathError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathError::Empty => write!(f, "path must contain at least one vertex"),
            PathError::UnknownVertex => write!(f, "unknown vertex"),
            PathError::NotAnEdge { position } => {
                write!(f, "consecutive pair at step {position} is not an edge")
            }
            PathError::DimensionMismatch => write!(f, "vector length does not match vertex count"),
        }
    }
}

impl core::error::Error for PathError {}

impl WeightedDigraph {
    /// Builds a digraph from tokens and a square weight table.
    pub fn new(vertices: Vec<String>, weights: Matrix) -> Result<Self, GraphError> {
        if vertices.is_empty() {
            return Err(GraphError::Empty);
        }
        if !weights.is_square() || weights.rows() != vertices.len() {
            return Err(GraphError::ShapeMismatch);
        }
        for &w in weights.data() {
            if !(w.is_finite() && w >= 0.0) {
                return Err(GraphError::InvalidWeight);
            }
        }
        for (i, v) in vertices.iter().enumerate() {
            if vertices[..i].contains(v) {
                return Err(GraphError::DuplicateVertex);
            }
        }
        Ok(WeightedDigraph { vertices, weights })
    }

    /// Builds from `(src, dst, weight)` triples; vertices appear in
    /// first-appearance order and zero weights only declare vertices.
    pub fn from_edges(edges: &[(&str, &str, f64)]) -> Result<Self, GraphError> {
        let mut tokens: Vec<String> = Vec::new();
        let intern = |tokens: &mut Vec<String>, t: &str| -> usize {
            match tokens.iter().position(|s| s == t) {
                Some(i) => i,
                None => {
                    tokens.push(t.to_string());
                    tokens.len() - 1
                }
            }
        };
        let mut triples = Vec::new();
        for &(src, dst, w) in edges {
            let s = intern(&mut tokens, src);
            let d = intern(&mut tokens, dst);
            triples.push((s, d, w));
        }
        if tokens.is_empty() {
            return Err(GraphError::Empty);
        }
        let n = tokens.len();
        let mut weights = Matrix::zeros(n, n);
        for (s, d, w) in triples {
            if !(w.is_finite() && w >= 0.0) {
                return Err(GraphError::InvalidWeight);
            }
            weights.set(s, d, w);
        }
        WeightedDigraph::new(tokens, weights)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_token(&self, i: usize) -> &str {
        &self.vertices[i]
    }

    pub fn vertex_tokens(&self) -> &[String] {
        &self.vertices
    }

    pub fn vertex_index(&self, token: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == token)
    }

    pub fn weight(&self, x: usize, y: usize) -> f64 {
        self.weights.get(x, y)
    }

    /// The adjacency matrix (the weight table itself).
    pub fn adjacency(&self) -> &Matrix {
        &self.weights
    }

    pub fn has_edge(&self, x: usize, y: usize) -> bool {
        self.weights.get(x, y) > 0.0
    }

    /// Positive-weight successors of `x` with their weights.
    pub fn out_edges(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let row = self.weights.row(x);
        row.iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(y, &w)| (y, w))
    }

    /// Induced sub-digraph on `verts` (indices into this digraph, kept in
    /// the given order). Tokens are preserved.
    pub fn induced(&self, verts: &[usize]) -> WeightedDigraph {
        let tokens: Vec<String> = verts.iter().map(|&v| self.vertices[v].clone()).collect();
        let weights = self.weights.submatrix(verts, verts);
        WeightedDigraph { vertices: tokens, weights }
    }
}

/// Nonempty vertex sequence; the sequence of length `n` describes a path of
/// `n - 1` edges, and a single vertex is the length-0 path.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    verts: Vec<usize>,
}

impl Path {
    /// Wraps a nonempty index sequence; edge validity is checked by the
    /// operations that need it.
    pub fn new(verts: Vec<usize>) -> Result<Self, PathError> {
        if verts.is_empty() {
            return Err(PathError::Empty);
        }
        Ok(Path { verts })
    }

    /// Resolves tokens against a digraph.
    pub fn from_tokens(g: &WeightedDigraph, tokens: &[&str]) -> Result<Self, PathError> {
        let verts = tokens
            .iter()
            .map(|t| g.vertex_index(t).ok_or(PathError::UnknownVertex))
            .collect::<Result<Vec<_>, _>>()?;
        Path::new(verts)
    }

    pub fn vertices(&self) -> &[usize] {
        &self.verts
    }

    /// Number of edges (vertices minus one).
    pub fn len(&self) -> usize {
        self.verts.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn first(&self) -> usize {
        self.verts[0]
    }

    pub fn last(&self) -> usize {
        *self.verts.last().expect("paths are nonempty")
    }

    /// True when `other` begins with this path's vertex sequence.
    pub fn is_prefix_of(&self, other: &Path) -> bool {
        other.verts.len() >= self.verts.len() && other.verts[..self.verts.len()] == self.verts[..]
    }

    /// Vertex tokens in `g`, space-joined.
    pub fn render(&self, g: &WeightedDigraph) -> String {
        let mut out = String::new();
        for (i, &v) in self.verts.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(g.vertex_token(v));
        }
        out
    }
}

/// Weighted path counts: `per_vertex[k][x] = Z_x(k)` and optionally the
/// per-pair tables `Z_{x,y}(k)`, the entries of the k-th adjacency power.
#[derive(Debug, Clone)]
pub struct ZTable {
    per_vertex: Vec<Vec<f64>>,
    per_pair: Option<Vec<Matrix>>,
}

impl ZTable {
    pub fn k_max(&self) -> usize {
        self.per_vertex.len() - 1
    }

    pub fn z(&self, x: usize, k: usize) -> f64 {
        self.per_vertex[k][x]
    }

    /// Full vector `Z_.(k)`.
    pub fn z_vector(&self, k: usize) -> &[f64] {
        &self.per_vertex[k]
    }

    pub fn z_pair(&self, x: usize, y: usize, k: usize) -> Option<f64> {
        self.per_pair.as_ref().map(|t| t[k].get(x, y))
    }
}

/// Parses the edge-list text format: one `src dst weight` per line, `#`
/// starting a comment line, vertices declared by first appearance,
/// zero-weight lines declaring vertices without adding an edge.
pub fn parse_digraph(text: &str) -> Result<WeightedDigraph, ParseError> {
    let mut tokens: Vec<String> = Vec::new();
    let intern = |tokens: &mut Vec<String>, t: &str| -> usize {
        match tokens.iter().position(|s| s == t) {
            Some(i) => i,
            None => {
                tokens.push(t.to_string());
                tokens.len() - 1
            }
        }
    };
    let mut triples: Vec<(usize, usize, f64)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(ParseError::BadArity { line });
        }
        let w: f64 = fields[2].parse().map_err(|_| ParseError::BadWeight { line })?;
        if !(w.is_finite() && w >= 0.0) {
            return Err(ParseError::BadWeight { line });
        }
        let s = intern(&mut tokens, fields[0]);
        let d = intern(&mut tokens, fields[1]);
        if triples.iter().any(|&(a, b, _)| (a, b) == (s, d)) {
            return Err(ParseError::DuplicateEdge { line });
        }
        triples.push((s, d, w));
    }
    if tokens.is_empty() {
        return Err(ParseError::Empty);
    }
    let n = tokens.len();
    let mut weights = Matrix::zeros(n, n);
    for (s, d, w) in triples {
        weights.set(s, d, w);
    }
    Ok(WeightedDigraph { vertices: tokens, weights })
}

/// Serializes to the edge-list format so that parsing the output restores
/// the vertex order and the weight table exactly: one diagonal line per
/// vertex in order (declaring it even at weight zero), then the positive
/// off-diagonal entries row-major.
pub fn serialize_digraph(g: &WeightedDigraph) -> String {
    let mut out = String::new();
    let n = g.vertex_count();
    for v in 0..n {
        let t = g.vertex_token(v);
        out.push_str(t);
        out.push(' ');
        out.push_str(t);
        out.push(' ');
        out.push_str(&format_weight(g.weight(v, v)));
        out.push('\n');
    }
    for x in 0..n {
        for y in 0..n {
            if x != y && g.weight(x, y) > 0.0 {
                out.push_str(g.vertex_token(x));
                out.push(' ');
                out.push_str(g.vertex_token(y));
                out.push(' ');
                out.push_str(&format_weight(g.weight(x, y)));
                out.push('\n');
            }
        }
    }
    out
}

fn format_weight(w: f64) -> String {
    // Display for f64 is the shortest representation that round-trips
    alloc::format!("{w}")
}

/// Product of edge weights along `u`; 1 for a length-0 path.
pub fn path_weight(g: &WeightedDigraph, u: &Path) -> Result<f64, PathError> {
    let verts = u.vertices();
    for &v in verts {
        if v >= g.vertex_count() {
            return Err(PathError::UnknownVertex);
        }
    }
    let mut w = 1.0;
    for (i, pair) in verts.windows(2).enumerate() {
        let e = g.weight(pair[0], pair[1]);
        if e <= 0.0 {
            return Err(PathError::NotAnEdge { position: i });
        }
        w *= e;
    }
    Ok(w)
}

/// Weighted path counts for all `k <= k_max`, per vertex only.
pub fn z_table(g: &WeightedDigraph, k_max: usize) -> ZTable {
    build_z_table(g, k_max, false)
}

/// Weighted path counts including the per-pair tables `Z_{x,y}(k)`.
pub fn z_table_with_pairs(g: &WeightedDigraph, k_max: usize) -> ZTable {
    build_z_table(g, k_max, true)
}

fn build_z_table(g: &WeightedDigraph, k_max: usize, pairs: bool) -> ZTable {
    let n = g.vertex_count();
    let f = g.adjacency();
    let mut per_vertex = Vec::with_capacity(k_max + 1);
    per_vertex.push(vec![1.0; n]);
    for k in 1..=k_max {
        let prev = &per_vertex[k - 1];
        let next = f.mul_vec(prev).expect("table vector has matching dimension");
        per_vertex.push(next);
    }
    let per_pair = if pairs {
        let mut tables = Vec::with_capacity(k_max + 1);
        tables.push(Matrix::identity(n));
        for k in 1..=k_max {
            let next = tables[k - 1].mul(f).expect("powers have matching dimension");
            tables.push(next);
        }
        Some(tables)
    } else {
        None
    };
    ZTable { per_vertex, per_pair }
}

/// Applies the k-th adjacency power to a vector by k successive products.
pub fn matrix_power_apply(g: &WeightedDigraph, k: usize, v: &[f64]) -> Result<Vec<f64>, PathError> {
    if v.len() != g.vertex_count() {
        return Err(PathError::DimensionMismatch);
    }
    let mut out = v.to_vec();
    for _ in 0..k {
        out = g
            .adjacency()
            .mul_vec(&out)
            .expect("dimension checked above");
    }
    Ok(out)
}
