//! Incremental 3D convex hull with exact orientation tests, followed by
//! merging of coplanar triangles into maximal polygonal facets.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::geometry::{diameter, orient, Point3, COPLANAR_REL_TOL};
use crate::polytope::Polytope;

/// Convex hull of `points`. Vertex labels are the input indices of the
/// surviving extreme points.
pub fn hull(points: &[Point3]) -> Result<Polytope> {
    let labels: Vec<usize> = (0..points.len()).collect();
    hull_labeled(&labels, points)
}

/// Convex hull where vertex `points[i]` carries label `labels[i]`.
///
/// Facets and edges are labeled canonically: facets in lexicographic order of
/// their sorted vertex-label sets, edges in order of their sorted endpoints.
pub fn hull_labeled(labels: &[usize], points: &[Point3]) -> Result<Polytope> {
    if labels.len() != points.len() {
        return Err(Error::InvalidArgument("label and point counts differ".into()));
    }
    if points.len() < 4 {
        return Err(Error::DegenerateInput(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    if let Some(i) = points
        .iter()
        .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
    {
        return Err(Error::DegenerateInput(format!("point {i} is not finite")));
    }
    let diam = diameter(points);
    if diam == 0.0 {
        return Err(Error::DegenerateInput("all points coincide".into()));
    }
    let tol = COPLANAR_REL_TOL * diam;

    let mut candidates: Vec<usize> = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if candidates.iter().all(|&k| (points[k] - p).norm() > tol) {
            candidates.push(i);
        }
    }

    let rings = loop {
        let triangles = triangulate(points, &candidates, tol)?;
        let rings = merge_coplanar(points, &triangles, tol)?;
        let mut count: HashMap<usize, usize> = HashMap::new();
        for ring in &rings {
            for &v in ring {
                *count.entry(v).or_default() += 1;
            }
        }
        let before = candidates.len();
        candidates.retain(|v| count.get(v).is_some_and(|&c| c >= 3));
        if candidates.len() == before {
            break rings;
        }
        if candidates.len() < 4 {
            return Err(Error::DegenerateInput("fewer than 4 extreme points".into()));
        }
    };

    if candidates.len() < points.len() {
        log::debug!(
            "hull: dropped {} duplicate or non-extreme points",
            points.len() - candidates.len()
        );
    }

    let position: HashMap<usize, usize> = candidates.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let mut keyed: Vec<(Vec<usize>, Vec<usize>)> = rings
        .into_iter()
        .map(|ring| {
            let mut key: Vec<usize> = ring.iter().map(|&i| labels[i]).collect();
            key.sort_unstable();
            (key, ring.into_iter().map(|i| position[&i]).collect())
        })
        .collect();
    keyed.sort();
    let facets = keyed.into_iter().enumerate().map(|(k, (_, ring))| (k, ring)).collect();
    let out_labels = candidates.iter().map(|&i| labels[i]).collect();
    let out_points = candidates.iter().map(|&i| points[i]).collect();
    Ok(Polytope::assemble(out_labels, out_points, facets, None))
}

/// Outward-oriented triangles (indices into `points`) of the hull of the
/// candidate subset.
fn triangulate(points: &[Point3], candidates: &[usize], tol: f64) -> Result<Vec<[usize; 3]>> {
    let [a, b, c, d] = initial_simplex(points, candidates, tol)?;
    let mut faces: Vec<Option<[usize; 3]>> = Vec::new();
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();

    fn add(faces: &mut Vec<Option<[usize; 3]>>, owner: &mut HashMap<(usize, usize), usize>, f: [usize; 3]) {
        let id = faces.len();
        for s in 0..3 {
            owner.insert((f[s], f[(s + 1) % 3]), id);
        }
        faces.push(Some(f));
    }
    for (tri, other) in [([a, b, c], d), ([a, b, d], c), ([a, c, d], b), ([b, c, d], a)] {
        let [u, v, w] = tri;
        let f = if orient(&points[u], &points[v], &points[w], &points[other]) > 0.0 {
            [u, w, v]
        } else {
            [u, v, w]
        };
        add(&mut faces, &mut owner, f);
    }

    for &p in candidates {
        if p == a || p == b || p == c || p == d {
            continue;
        }
        let x = &points[p];
        let visible: Vec<usize> = faces
            .iter()
            .enumerate()
            .filter_map(|(id, f)| {
                let f = (*f)?;
                (orient(&points[f[0]], &points[f[1]], &points[f[2]], x) > 0.0).then_some(id)
            })
            .collect();
        if visible.is_empty() {
            continue;
        }
        let is_visible = |id: usize, faces: &[Option<[usize; 3]>], vis: &[usize]| {
            faces[id].is_some() && vis.binary_search(&id).is_ok()
        };
        let mut horizon = Vec::new();
        for &id in &visible {
            let f = faces[id].expect("alive");
            for s in 0..3 {
                let (u, v) = (f[s], f[(s + 1) % 3]);
                let twin = owner
                    .get(&(v, u))
                    .copied()
                    .ok_or_else(|| Error::DegenerateInput("hull surface is not closed".into()))?;
                if !is_visible(twin, &faces, &visible) {
                    horizon.push((u, v));
                }
            }
        }
        for &id in &visible {
            let f = faces[id].take().expect("alive");
            for s in 0..3 {
                owner.remove(&(f[s], f[(s + 1) % 3]));
            }
        }
        for (u, v) in horizon {
            add(&mut faces, &mut owner, [u, v, p]);
        }
    }
    Ok(faces.into_iter().flatten().collect())
}

fn initial_simplex(points: &[Point3], candidates: &[usize], tol: f64) -> Result<[usize; 4]> {
    let a = candidates[0];
    let far = |score: &dyn Fn(usize) -> f64| {
        candidates
            .iter()
            .copied()
            .map(|i| (i, score(i)))
            .fold(
                (a, f64::NEG_INFINITY),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            )
    };
    let (b, _) = far(&|i| (points[i] - points[a]).norm());
    let ab = points[b] - points[a];
    let (c, dist_line) = far(&|i| ab.cross(&(points[i] - points[a])).norm() / ab.norm());
    if dist_line <= tol {
        return Err(Error::DegenerateInput("points are collinear".into()));
    }
    let n = ab.cross(&(points[c] - points[a])).normalize();
    let (d, dist_plane) = far(&|i| n.dot(&(points[i] - points[a])).abs());
    if dist_plane <= tol {
        return Err(Error::DegenerateInput("points are coplanar".into()));
    }
    Ok([a, b, c, d])
}

/// Groups adjacent coplanar triangles and returns each group's boundary cycle.
fn merge_coplanar(points: &[Point3], tris: &[[usize; 3]], tol: f64) -> Result<Vec<Vec<usize>>> {
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (t, f) in tris.iter().enumerate() {
        for s in 0..3 {
            owner.insert((f[s], f[(s + 1) % 3]), t);
        }
    }
    let planes: Vec<(Point3, f64)> = tris
        .iter()
        .map(|f| {
            let (x, y, z) = (&points[f[0]], &points[f[1]], &points[f[2]]);
            let n = (y - x).cross(&(z - x)).normalize();
            (n, n.dot(x))
        })
        .collect();
    let mut parent: Vec<usize> = (0..tris.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (t, f) in tris.iter().enumerate() {
        for s in 0..3 {
            let (u, v) = (f[s], f[(s + 1) % 3]);
            let g = owner[&(v, u)];
            if g <= t {
                continue;
            }
            let opp_t = f[(s + 2) % 3];
            let opp_g = *tris[g].iter().find(|&&w| w != u && w != v).expect("triangle");
            let (nt, ht) = planes[t];
            let (ng, hg) = planes[g];
            if (nt.dot(&points[opp_g]) - ht).abs() <= tol && (ng.dot(&points[opp_t]) - hg).abs() <= tol {
                let (rt, rg) = (find(&mut parent, t), find(&mut parent, g));
                parent[rt] = rg;
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for t in 0..tris.len() {
        let r = find(&mut parent, t);
        groups.entry(r).or_default().push(t);
    }
    let mut rings = Vec::with_capacity(groups.len());
    for members in groups.values() {
        let root = find(&mut parent, members[0]);
        let mut next: HashMap<usize, usize> = HashMap::new();
        for &t in members {
            let f = tris[t];
            for s in 0..3 {
                let (u, v) = (f[s], f[(s + 1) % 3]);
                let twin = owner[&(v, u)];
                if find(&mut parent, twin) != root && next.insert(u, v).is_some() {
                    return Err(Error::DegenerateInput("pinched facet boundary".into()));
                }
            }
        }
        let start = *next.keys().min().expect("facet boundary");
        let mut ring = vec![start];
        let mut cur = next[&start];
        while cur != start {
            if ring.len() > next.len() {
                return Err(Error::DegenerateInput("facet boundary is not a cycle".into()));
            }
            ring.push(cur);
            cur = next[&cur];
        }
        if ring.len() != next.len() {
            return Err(Error::DegenerateInput("facet boundary has several cycles".into()));
        }
        rings.push(ring);
    }
    Ok(rings)
}
