//! Labeled face lattices of 3-polytopes.
//!
//! A lattice records three label sets (vertices, edges, facets) and the two
//! incidence maps `phi1: vertex -> edges containing it` and
//! `phi2: edge -> facets containing it`. Vertex-facet incidence (`phi0`) is
//! derived from those two. Two lattices are equal exactly when the labels and
//! both maps coincide, which is what "preserving the face lattice" means along
//! a deformation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub type Incidence = BTreeMap<usize, BTreeSet<usize>>;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FaceLattice {
    pub vertex_labels: Vec<usize>,
    pub edge_labels: Vec<usize>,
    pub facet_labels: Vec<usize>,
    pub phi1: Incidence,
    pub phi2: Incidence,
}

impl FaceLattice {
    pub fn counts(&self) -> (usize, usize, usize) {
        (
            self.vertex_labels.len(),
            self.edge_labels.len(),
            self.facet_labels.len(),
        )
    }

    /// Facet label -> labels of the vertices on that facet. Every facet label
    /// is present, possibly with an empty set.
    pub fn phi0(&self) -> Incidence {
        let mut out: Incidence = self.facet_labels.iter().map(|&k| (k, BTreeSet::new())).collect();
        for (&i, edges) in &self.phi1 {
            for j in edges {
                for k in self.phi2.get(j).into_iter().flatten() {
                    out.entry(*k).or_default().insert(i);
                }
            }
        }
        out
    }

    /// Edge label -> its endpoint labels (inverse of `phi1`).
    pub fn edge_endpoints(&self) -> Incidence {
        let mut out: Incidence = self.edge_labels.iter().map(|&j| (j, BTreeSet::new())).collect();
        for (&i, edges) in &self.phi1 {
            for &j in edges {
                out.entry(j).or_default().insert(i);
            }
        }
        out
    }

    /// Vertex label -> facets incident to it.
    pub fn vertex_facets(&self) -> Incidence {
        let mut out: Incidence = self.vertex_labels.iter().map(|&i| (i, BTreeSet::new())).collect();
        for (k, verts) in self.phi0() {
            for i in verts {
                out.entry(i).or_default().insert(k);
            }
        }
        out
    }

    /// Purely combinatorial checks. Geometry is checked by `Polytope::validate`.
    pub fn structural_issues(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        let vset: BTreeSet<_> = self.vertex_labels.iter().copied().collect();
        let eset: BTreeSet<_> = self.edge_labels.iter().copied().collect();
        let fset: BTreeSet<_> = self.facet_labels.iter().copied().collect();

        for (&i, edges) in &self.phi1 {
            if !vset.contains(&i) {
                issues.push(Issue::UnknownLabel {
                    kind: "vertex",
                    label: i,
                });
            }
            for j in edges.difference(&eset) {
                issues.push(Issue::UnknownLabel {
                    kind: "edge",
                    label: *j,
                });
            }
        }
        for (&j, facets) in &self.phi2 {
            if !eset.contains(&j) {
                issues.push(Issue::UnknownLabel { kind: "edge", label: j });
            }
            for k in facets.difference(&fset) {
                issues.push(Issue::UnknownLabel {
                    kind: "facet",
                    label: *k,
                });
            }
        }

        for (j, ends) in self.edge_endpoints() {
            if ends.len() != 2 {
                issues.push(Issue::EdgeEndpoints {
                    edge: j,
                    count: ends.len(),
                });
            }
        }
        for &j in &self.edge_labels {
            let n = self.phi2.get(&j).map_or(0, |s| s.intersection(&fset).count());
            if n != 2 {
                issues.push(Issue::EdgeFacets { edge: j, count: n });
            }
        }

        let (v, e, f) = self.counts();
        if v as i64 - e as i64 + f as i64 != 2 {
            issues.push(Issue::Euler { v, e, f });
        }

        for (k, verts) in self.phi0() {
            if verts.len() < 3 {
                issues.push(Issue::SmallFacet {
                    facet: k,
                    count: verts.len(),
                });
            }
        }
        for (i, facets) in self.vertex_facets() {
            if facets.len() < 3 {
                issues.push(Issue::LowVertexDegree {
                    vertex: i,
                    count: facets.len(),
                });
            }
        }
        issues
    }
}

/// One violated invariant, naming the offending labels.
#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    TooFewVertices { count: usize },
    NonFiniteCoordinate { vertex: usize },
    NotFullDimensional,
    UnknownLabel { kind: &'static str, label: usize },
    EdgeEndpoints { edge: usize, count: usize },
    EdgeFacets { edge: usize, count: usize },
    Euler { v: usize, e: usize, f: usize },
    SmallFacet { facet: usize, count: usize },
    LowVertexDegree { vertex: usize, count: usize },
    MissingPlane { facet: usize },
    RingMismatch { facet: usize },
    OffPlane { facet: usize, vertex: usize, distance: f64 },
    NotStrictlyInside { facet: usize, vertex: usize, distance: f64 },
    NonExtreme { vertex: usize },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::TooFewVertices { count } => write!(f, "only {count} vertices"),
            Issue::NonFiniteCoordinate { vertex } => {
                write!(f, "vertex {vertex} has a non-finite coordinate")
            }
            Issue::NotFullDimensional => write!(f, "vertices do not affinely span 3-space"),
            Issue::UnknownLabel { kind, label } => write!(f, "unknown {kind} label {label}"),
            Issue::EdgeEndpoints { edge, count } => {
                write!(f, "edge {edge} has {count} endpoints (expected 2)")
            }
            Issue::EdgeFacets { edge, count } => {
                write!(f, "edge {edge} lies in {count} facets (expected 2)")
            }
            Issue::Euler { v, e, f: nf } => {
                write!(f, "Euler relation violated: {v} - {e} + {nf} != 2")
            }
            Issue::SmallFacet { facet, count } => {
                write!(f, "facet {facet} has only {count} vertices")
            }
            Issue::LowVertexDegree { vertex, count } => {
                write!(f, "vertex {vertex} lies in only {count} facets")
            }
            Issue::MissingPlane { facet } => write!(f, "facet {facet} has no plane"),
            Issue::RingMismatch { facet } => {
                write!(f, "facet {facet} boundary ring disagrees with the lattice")
            }
            Issue::OffPlane {
                facet,
                vertex,
                distance,
            } => {
                write!(f, "vertex {vertex} is {distance:.3e} off the plane of facet {facet}")
            }
            Issue::NotStrictlyInside {
                facet,
                vertex,
                distance,
            } => write!(
                f,
                "vertex {vertex} is not strictly inside facet {facet} (margin {distance:.3e})"
            ),
            Issue::NonExtreme { vertex } => write!(f, "vertex {vertex} is not extreme"),
        }
    }
}

/// Result of `Polytope::validate`: empty iff the polytope is valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub issues: Vec<Issue>,
}

impl Diagnostics {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "valid");
        }
        for (n, issue) in self.issues.iter().enumerate() {
            if n > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}
