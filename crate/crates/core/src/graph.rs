//! Graphviz DOT export of the three structural pictures of a model.

use std::fmt::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::spectral::{to_spectral, EIGEN_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphView {
    /// Latent parents pointing at every item.
    CommonCause,
    /// Undirected couplings between items.
    Network,
    /// Every item pointing at each effect.
    Collider,
}

impl FromStr for GraphView {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "common-cause" => Ok(GraphView::CommonCause),
            "network" => Ok(GraphView::Network),
            "collider" => Ok(GraphView::Collider),
            other => Err(Error::invalid("view", format!("unknown view {other:?}"))),
        }
    }
}

fn items(out: &mut String, n: usize) {
    for i in 1..=n {
        let _ = writeln!(out, "  x{i} [shape=circle];");
    }
}

/// Renders `spec` as DOT. The latent and effect nodes come from the
/// eigenvalue representation with diagonal shift `extra_shift` on top of the
/// minimal one: one node per strictly positive eigenvalue.
pub fn export_dot(spec: &ModelSpec, view: GraphView, extra_shift: f64) -> Result<String> {
    let n = spec.n();
    let mut out = String::new();
    match view {
        GraphView::Network => {
            out.push_str("graph network {\n");
            items(&mut out, n);
            for i in 0..n {
                for j in i + 1..n {
                    let w = spec.sigma(i, j);
                    if w != 0.0 {
                        let _ = writeln!(out, "  x{} -- x{} [label=\"{w}\"];", i + 1, j + 1);
                    }
                }
            }
        }
        GraphView::CommonCause | GraphView::Collider => {
            let sf = to_spectral(spec, extra_shift)?;
            let positive: Vec<usize> = (0..n).filter(|&r| sf.lambdas()[r] > EIGEN_TOLERANCE).collect();
            let common_cause = view == GraphView::CommonCause;
            out.push_str(if common_cause {
                "digraph common_cause {\n"
            } else {
                "digraph collider {\n"
            });
            items(&mut out, n);
            for (k, &r) in positive.iter().enumerate() {
                let lambda = sf.lambdas()[r];
                if common_cause {
                    let _ = writeln!(out, "  theta{} [shape=ellipse, style=dashed, label=\"theta{} (lambda={lambda})\"];", k + 1, k + 1);
                } else {
                    let _ = writeln!(out, "  e{} [shape=box, label=\"e{} (lambda={lambda})\"];", k + 1, k + 1);
                }
                for i in 0..n {
                    let a = sf.loadings()[(i, r)];
                    if common_cause {
                        let _ = writeln!(out, "  theta{} -> x{} [label=\"{a}\"];", k + 1, i + 1);
                    } else {
                        let _ = writeln!(out, "  x{} -> e{} [label=\"{}\"];", i + 1, k + 1, sf.q()[(i, r)]);
                    }
                }
            }
        }
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(s: &str, pat: &str) -> usize {
        s.matches(pat).count()
    }

    #[test]
    fn pair_views() {
        let spec = ModelSpec::from_upper(vec![0.0, 0.0], &[1.0]).unwrap();
        let net = export_dot(&spec, GraphView::Network, 0.0).unwrap();
        assert!(net.starts_with("graph network {"));
        assert_eq!(count(&net, "[shape=circle]"), 2);
        assert_eq!(count(&net, " -- "), 1);
        assert!(net.contains("x1 -- x2 [label=\"1\"]"));

        let cc = export_dot(&spec, GraphView::CommonCause, 0.0).unwrap();
        assert_eq!(count(&cc, "shape=ellipse"), 1);
        assert_eq!(count(&cc, " -> "), 2);
        assert!(cc.contains("theta1 -> x1"));

        let col = export_dot(&spec, GraphView::Collider, 0.0).unwrap();
        assert_eq!(count(&col, "shape=box"), 1);
        assert!(col.contains("x2 -> e1"));
    }

    #[test]
    fn independent_collider_has_no_effects() {
        let spec = ModelSpec::independent(vec![0.0, 0.0]);
        let col = export_dot(&spec, GraphView::Collider, 0.0).unwrap();
        assert_eq!(count(&col, "[shape=circle]"), 2);
        assert_eq!(count(&col, "shape=box"), 0);
        assert_eq!(count(&col, "->"), 0);
    }

    #[test]
    fn view_names() {
        assert_eq!("network".parse::<GraphView>().unwrap(), GraphView::Network);
        assert!("tree".parse::<GraphView>().is_err());
    }
}
