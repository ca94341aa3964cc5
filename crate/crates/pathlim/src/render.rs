//! Text rendering: 9-significant-digit numbers, CSV matrices with token
//! headers, and the DOT condensation.

use pathlim_core::graph::WeightedDigraph;
use pathlim_core::matrix::Matrix;
use pathlim_core::structure::ClassDecomposition;

/// Formats with 9 significant digits in plain decimal notation; exact
/// zero stays `0`.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return String::from("0");
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    // fixed notation cannot drop digits left of the point, so very large
    // values keep their full integer part
    let decimals = (8 - magnitude).max(0) as usize;
    format!("{:.*}", decimals, x)
}

/// CSV rendering of a matrix: header row of column tokens, each data row
/// led by its own token.
pub fn csv_matrix(m: &Matrix, row_tokens: &[&str], col_tokens: &[&str]) -> String {
    assert_eq!(m.rows(), row_tokens.len(), "row labels must match");
    assert_eq!(m.cols(), col_tokens.len(), "column labels must match");
    let mut out = String::new();
    out.push(',');
    out.push_str(&col_tokens.join(","));
    out.push('\n');
    for (r, token) in row_tokens.iter().enumerate() {
        out.push_str(token);
        for c in 0..m.cols() {
            out.push(',');
            out.push_str(&sig9(m.get(r, c)));
        }
        out.push('\n');
    }
    out
}

/// DOT rendering of the condensation: one node per access class labeled
/// with members, radius, period and flags; one arc per direct class edge.
pub fn condensation_dot(g: &WeightedDigraph, dec: &ClassDecomposition) -> String {
    let mut out = String::from("digraph condensation {\n  rankdir=LR;\n");
    for (i, class) in dec.classes.iter().enumerate() {
        let members: Vec<&str> = class.iter().map(|&v| g.vertex_token(v)).collect();
        let info = &dec.per_class[i];
        let mut flags = String::new();
        if info.is_basic {
            flags.push_str(" basic");
        }
        if info.is_final {
            flags.push_str(" final");
        }
        out.push_str(&format!(
            "  c{i} [label=\"{{{}}} rho={} period={}{}\"];\n",
            members.join(" "),
            sig9(info.rho),
            info.period,
            flags
        ));
    }
    for (i, row) in dec.class_edges.iter().enumerate() {
        for (j, &edge) in row.iter().enumerate() {
            if edge {
                out.push_str(&format!("  c{i} -> c{j};\n"));
            }
        }
    }
    out.push_str("}\n");
    out
}
