//! Convex 3-polytopes with an explicit labeled face lattice.
//!
//! Vertices are stored in ascending label order; a vertex's *position* is its
//! index in that order. Facet rings hold positions, are counterclockwise seen
//! from outside and start at the lowest-labeled vertex of the facet, so the
//! fan triangulation used for volumes is fixed by the labels alone.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{barycenter, det3, diameter, newell_normal, Point3, INTERIOR_MARGIN_REL_TOL, PLANE_REL_TOL};
use crate::lattice::{Diagnostics, FaceLattice, Incidence, Issue};

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub label: usize,
    /// Vertex positions in boundary order.
    pub ring: Vec<usize>,
    /// Outer unit normal.
    pub normal: Point3,
    /// Support value: `x . normal == offset` for every vertex on the facet.
    pub offset: f64,
}

#[derive(Debug, Clone)]
pub struct Polytope {
    labels: Vec<usize>,
    points: Vec<Point3>,
    facets: Vec<Facet>,
    lattice: FaceLattice,
}

pub type EdgeMap = BTreeMap<(usize, usize), usize>;

impl Polytope {
    /// Builds a polytope from vertex labels, coordinates and facet rings
    /// (given as positions into `points`). Rings are reoriented to face
    /// outward and rotated to start at their lowest label; edge labels come
    /// from `edge_labels` (keyed by sorted endpoint labels) when present,
    /// otherwise they are assigned in sorted endpoint order.
    ///
    /// No validity checks are made here.
    pub fn assemble(
        labels: Vec<usize>,
        points: Vec<Point3>,
        facets: Vec<(usize, Vec<usize>)>,
        edge_labels: Option<&EdgeMap>,
    ) -> Polytope {
        assert_eq!(labels.len(), points.len());
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.sort_by_key(|&p| labels[p]);
        let mut rank = vec![0; labels.len()];
        for (r, &p) in order.iter().enumerate() {
            rank[p] = r;
        }
        let labels: Vec<usize> = order.iter().map(|&p| labels[p]).collect();
        let points: Vec<Point3> = order.iter().map(|&p| points[p]).collect();
        let center = barycenter(&points);

        let mut out_facets: Vec<Facet> = facets
            .into_iter()
            .map(|(label, ring)| {
                let mut ring: Vec<usize> = ring.into_iter().map(|p| rank[p]).collect();
                let pts: Vec<Point3> = ring.iter().map(|&p| points[p]).collect();
                let mut normal = newell_normal(&pts);
                if normal.dot(&(barycenter(&pts) - center)) < 0.0 {
                    ring.reverse();
                    normal = -normal;
                }
                let normal = normal.normalize();
                let offset = pts.iter().map(|p| p.dot(&normal)).sum::<f64>() / pts.len() as f64;
                let start = (0..ring.len()).min_by_key(|&s| ring[s]).unwrap_or(0);
                ring.rotate_left(start);
                Facet {
                    label,
                    ring,
                    normal,
                    offset,
                }
            })
            .collect();
        out_facets.sort_by_key(|f| f.label);

        let mut keys = BTreeSet::new();
        for f in &out_facets {
            for (a, b) in ring_edges(&f.ring) {
                keys.insert(sorted_pair(labels[a], labels[b]));
            }
        }
        let mut next_fresh = edge_labels.and_then(|m| m.values().max().map(|m| m + 1)).unwrap_or(0);
        let mut edge_of: HashMap<(usize, usize), usize> = HashMap::new();
        for key in &keys {
            let label = match edge_labels.and_then(|m| m.get(key)) {
                Some(&l) => l,
                None => {
                    next_fresh += 1;
                    next_fresh - 1
                }
            };
            edge_of.insert(*key, label);
        }

        let mut phi1: Incidence = labels.iter().map(|&i| (i, BTreeSet::new())).collect();
        let mut phi2: Incidence = BTreeMap::new();
        for (key, &j) in &edge_of {
            phi1.entry(key.0).or_default().insert(j);
            phi1.entry(key.1).or_default().insert(j);
            phi2.entry(j).or_default();
        }
        for f in &out_facets {
            for (a, b) in ring_edges(&f.ring) {
                let j = edge_of[&sorted_pair(labels[a], labels[b])];
                phi2.entry(j).or_default().insert(f.label);
            }
        }
        let mut edge_labels: Vec<usize> = edge_of.values().copied().collect();
        edge_labels.sort_unstable();

        let lattice = FaceLattice {
            vertex_labels: labels.clone(),
            edge_labels,
            facet_labels: out_facets.iter().map(|f| f.label).collect(),
            phi1,
            phi2,
        };
        Polytope {
            labels,
            points,
            facets: out_facets,
            lattice,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn lattice(&self) -> &FaceLattice {
        &self.lattice
    }

    pub fn num_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn num_edges(&self) -> usize {
        self.lattice.edge_labels.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn position_of(&self, label: usize) -> Option<usize> {
        self.labels.binary_search(&label).ok()
    }

    pub fn facet(&self, label: usize) -> Option<&Facet> {
        self.facets
            .binary_search_by_key(&label, |f| f.label)
            .ok()
            .map(|i| &self.facets[i])
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.points)
    }

    pub fn vertex_barycenter(&self) -> Point3 {
        barycenter(&self.points)
    }

    /// Edges as `(label, position_a, position_b)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize, usize)> {
        self.lattice
            .edge_endpoints()
            .into_iter()
            .filter_map(|(j, ends)| {
                let mut it = ends.iter();
                let a = self.position_of(*it.next()?)?;
                let b = self.position_of(*it.next()?)?;
                Some((j, a.min(b), a.max(b)))
            })
            .collect()
    }

    /// Edge labels keyed by sorted endpoint labels.
    pub fn edge_map(&self) -> EdgeMap {
        self.lattice
            .edge_endpoints()
            .into_iter()
            .filter(|(_, ends)| ends.len() == 2)
            .map(|(j, ends)| {
                let v: Vec<usize> = ends.into_iter().collect();
                ((v[0], v[1]), j)
            })
            .collect()
    }

    pub(crate) fn set_plane(&mut self, label: usize, normal: Point3, offset: f64) {
        if let Ok(i) = self.facets.binary_search_by_key(&label, |f| f.label) {
            self.facets[i].normal = normal;
            self.facets[i].offset = offset;
        }
    }

    /// Returns a copy carrying `lattice` in place of the computed one. Used to
    /// exercise the validator on corrupted structures.
    pub fn with_lattice(&self, lattice: FaceLattice) -> Polytope {
        Polytope {
            lattice,
            ..self.clone()
        }
    }

    /// Applies `f` to every vertex, keeping labels and combinatorics.
    pub fn map_points(&self, f: impl Fn(&Point3) -> Point3) -> Polytope {
        let points = self.points.iter().map(f).collect();
        let facets = self.facets.iter().map(|k| (k.label, k.ring.clone())).collect();
        Polytope::assemble(self.labels.clone(), points, facets, Some(&self.edge_map()))
    }

    /// Copy of `self` whose edge and facet labels follow `reference` wherever
    /// the same vertex-label sets occur. Unmatched faces get fresh labels.
    pub fn relabel_like(&self, reference: &Polytope) -> Polytope {
        let by_vertices: HashMap<Vec<usize>, usize> = reference
            .facets
            .iter()
            .map(|f| (reference.facet_key(f), f.label))
            .collect();
        let mut fresh = reference.facets.iter().map(|f| f.label + 1).max().unwrap_or(0);
        let facets = self
            .facets
            .iter()
            .map(|f| {
                let label = by_vertices.get(&self.facet_key(f)).copied().unwrap_or_else(|| {
                    fresh += 1;
                    fresh - 1
                });
                (label, f.ring.clone())
            })
            .collect();
        Polytope::assemble(
            self.labels.clone(),
            self.points.clone(),
            facets,
            Some(&reference.edge_map()),
        )
    }

    fn facet_key(&self, f: &Facet) -> Vec<usize> {
        let mut key: Vec<usize> = f.ring.iter().map(|&p| self.labels[p]).collect();
        key.sort_unstable();
        key
    }

    /// Lists every violated invariant; empty iff the polytope is valid.
    pub fn validate(&self) -> Diagnostics {
        let mut issues = Vec::new();
        if self.points.len() < 4 {
            issues.push(Issue::TooFewVertices {
                count: self.points.len(),
            });
        }
        for (p, x) in self.points.iter().enumerate() {
            if !(x.x.is_finite() && x.y.is_finite() && x.z.is_finite()) {
                issues.push(Issue::NonFiniteCoordinate { vertex: self.labels[p] });
            }
        }
        if !issues.is_empty() {
            return Diagnostics { issues };
        }
        if !self.full_dimensional() {
            issues.push(Issue::NotFullDimensional);
        }
        issues.extend(self.lattice.structural_issues());

        let tol = PLANE_REL_TOL * self.diameter();
        let margin = INTERIOR_MARGIN_REL_TOL * self.diameter();
        let phi0 = self.lattice.phi0();
        for (&k, members) in &phi0 {
            let Some(facet) = self.facet(k) else {
                issues.push(Issue::MissingPlane { facet: k });
                continue;
            };
            let ring: BTreeSet<usize> = facet.ring.iter().map(|&p| self.labels[p]).collect();
            if &ring != members {
                issues.push(Issue::RingMismatch { facet: k });
            }
            for (p, x) in self.points.iter().enumerate() {
                let i = self.labels[p];
                let s = x.dot(&facet.normal) - facet.offset;
                if members.contains(&i) {
                    if s.abs() > tol {
                        issues.push(Issue::OffPlane {
                            facet: k,
                            vertex: i,
                            distance: s,
                        });
                    }
                } else if s > -margin {
                    issues.push(Issue::NotStrictlyInside {
                        facet: k,
                        vertex: i,
                        distance: s,
                    });
                }
            }
        }

        for (i, facets) in self.lattice.vertex_facets() {
            let normals: Vec<Point3> = facets.iter().filter_map(|&k| self.facet(k).map(|f| f.normal)).collect();
            if normals.len() >= 3 && !spans_space(&normals) {
                issues.push(Issue::NonExtreme { vertex: i });
            }
        }
        Diagnostics { issues }
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let d = self.validate();
        if d.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidPolytope(d.to_string()))
        }
    }

    fn full_dimensional(&self) -> bool {
        let c = self.vertex_barycenter();
        let mut scatter = Matrix3::zeros();
        for x in &self.points {
            let d = x - c;
            scatter += d * d.transpose();
        }
        let eig = SymmetricEigen::new(scatter).eigenvalues;
        let max = eig.max();
        max > 0.0 && eig.min() > 1e-18 * max
    }

    /// Volume, checked: fails with `InvalidPolytope` when validation fails.
    pub fn volume(&self) -> Result<f64> {
        self.ensure_valid()?;
        Ok(self.volume_unchecked())
    }

    /// Fan of tetrahedra from the vertex barycenter over the fixed facet
    /// triangulation (each facet fanned from its lowest-labeled vertex).
    pub fn volume_unchecked(&self) -> f64 {
        let p = self.vertex_barycenter();
        let mut sum = 0.0;
        for f in &self.facets {
            let a = self.points[f.ring[0]] - p;
            for w in f.ring[1..].windows(2) {
                let b = self.points[w[0]] - p;
                let c = self.points[w[1]] - p;
                sum += det3(&a, &b, &c).abs();
            }
        }
        sum / 6.0
    }

    /// `(Delta, d)`: the largest facet vertex count and the largest vertex degree.
    pub fn facet_stats(&self) -> (usize, usize) {
        let delta = self.lattice.phi0().values().map(|s| s.len()).max().unwrap_or(0);
        let degree = self.lattice.phi1.values().map(|s| s.len()).max().unwrap_or(0);
        (delta, degree)
    }

    pub fn lattice_equal(&self, other: &Polytope) -> bool {
        self.lattice == other.lattice
    }

    /// For each vertex position, the indices (into `facets()`) of its incident
    /// facets in cyclic order around the vertex.
    pub fn vertex_figures(&self) -> Result<Vec<Vec<usize>>> {
        let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
        let mut first = vec![usize::MAX; self.points.len()];
        for (fi, f) in self.facets.iter().enumerate() {
            for (a, b) in ring_edges(&f.ring) {
                owner.insert((a, b), fi);
                if first[a] == usize::MAX {
                    first[a] = fi;
                }
            }
        }
        let mut out = Vec::with_capacity(self.points.len());
        for (i, &start) in first.iter().enumerate() {
            if start == usize::MAX {
                return Err(Error::InvalidPolytope(format!(
                    "vertex {} lies on no facet",
                    self.labels[i]
                )));
            }
            let mut cycle = vec![start];
            let mut cur = start;
            loop {
                let ring = &self.facets[cur].ring;
                let at = ring.iter().position(|&p| p == i).expect("vertex on facet");
                let next_vertex = ring[(at + 1) % ring.len()];
                let Some(&g) = owner.get(&(next_vertex, i)) else {
                    return Err(Error::InvalidPolytope(format!(
                        "edge {}-{} has no twin facet",
                        self.labels[i], self.labels[next_vertex]
                    )));
                };
                if g == start {
                    break;
                }
                if cycle.len() > self.facets.len() {
                    return Err(Error::InvalidPolytope(format!(
                        "facets around vertex {} do not close up",
                        self.labels[i]
                    )));
                }
                cycle.push(g);
                cur = g;
            }
            out.push(cycle);
        }
        Ok(out)
    }
}

pub(crate) fn ring_edges(ring: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..ring.len()).map(move |s| (ring[s], ring[(s + 1) % ring.len()]))
}

fn sorted_pair(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn spans_space(normals: &[Point3]) -> bool {
    for (a, na) in normals.iter().enumerate() {
        for (b, nb) in normals.iter().enumerate().skip(a + 1) {
            for nc in &normals[b + 1..] {
                if det3(na, nb, nc).abs() > 1e-9 {
                    return true;
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::{cube, octahedron, simplex};

    #[test]
    fn cube_is_valid_with_expected_counts() {
        let c = cube();
        assert!(c.validate().is_empty(), "{}", c.validate());
        assert_eq!((c.num_vertices(), c.num_edges(), c.num_facets()), (8, 12, 6));
        assert!(c.facets().iter().all(|f| f.ring.len() == 4));
    }

    #[test]
    fn deleted_facet_label_is_an_euler_violation() {
        let c = cube();
        let mut lattice = c.lattice().clone();
        let gone = lattice.facet_labels.remove(2);
        for set in lattice.phi2.values_mut() {
            set.remove(&gone);
        }
        let d = c.with_lattice(lattice).validate();
        assert!(d.issues.contains(&Issue::Euler { v: 8, e: 12, f: 5 }), "{d}");
    }

    #[test]
    fn edge_in_three_facets_is_reported() {
        let c = cube();
        let mut lattice = c.lattice().clone();
        let j = lattice.edge_labels[0];
        let extra = lattice
            .facet_labels
            .iter()
            .copied()
            .find(|k| !lattice.phi2[&j].contains(k))
            .unwrap();
        lattice.phi2.get_mut(&j).unwrap().insert(extra);
        let d = c.with_lattice(lattice).validate();
        assert!(d.issues.contains(&Issue::EdgeFacets { edge: j, count: 3 }), "{d}");
    }

    #[test]
    fn volumes_of_builtins() {
        assert!((cube().volume().unwrap() - 8.0).abs() < 1e-12);
        assert!((simplex().volume().unwrap() - 8.0 / 3.0).abs() < 1e-12);
        assert!((octahedron().volume().unwrap() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_volume_matches_single_determinant() {
        let s = simplex();
        let x = s.points();
        let oracle = det3(&(x[1] - x[0]), &(x[2] - x[0]), &(x[3] - x[0])).abs() / 6.0;
        assert!((s.volume().unwrap() - oracle).abs() < 1e-14);
    }

    #[test]
    fn volume_rejects_invalid_polytope() {
        let c = cube();
        let mut lattice = c.lattice().clone();
        lattice.facet_labels.pop();
        assert!(matches!(
            c.with_lattice(lattice).volume(),
            Err(Error::InvalidPolytope(_))
        ));
    }

    #[test]
    fn facet_stats_of_builtins() {
        assert_eq!(cube().facet_stats(), (4, 3));
        assert_eq!(octahedron().facet_stats(), (3, 4));
        assert_eq!(simplex().facet_stats(), (3, 3));
    }

    #[test]
    fn lattice_equality() {
        let c = cube();
        let moved = c.map_points(|x| x + Point3::new(0.3, -2.0, 5.0));
        assert!(c.lattice_equal(&moved));
        assert!(!c.lattice_equal(&octahedron()));

        // exchange the edge sets of vertices 0 and 1
        let mut lattice = c.lattice().clone();
        let a = lattice.phi1.remove(&0).unwrap();
        let b = lattice.phi1.remove(&1).unwrap();
        lattice.phi1.insert(0, b);
        lattice.phi1.insert(1, a);
        assert!(!c.lattice_equal(&c.with_lattice(lattice)));
    }

    #[test]
    fn vertex_figures_have_degree_length() {
        let o = octahedron();
        let figs = o.vertex_figures().unwrap();
        assert!(figs.iter().all(|f| f.len() == 4));
        let c = cube();
        assert!(c.vertex_figures().unwrap().iter().all(|f| f.len() == 3));
    }

    #[test]
    fn rings_are_outward_and_start_at_lowest_label() {
        for p in [cube(), octahedron(), simplex()] {
            let center = p.vertex_barycenter();
            for f in p.facets() {
                assert_eq!(f.ring[0], *f.ring.iter().min().unwrap());
                let pts: Vec<Point3> = f.ring.iter().map(|&i| p.points()[i]).collect();
                let n = newell_normal(&pts);
                assert!(n.dot(&f.normal) > 0.0);
                assert!(f.offset - center.dot(&f.normal) > 0.0);
            }
        }
    }
}
