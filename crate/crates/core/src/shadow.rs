//! Shadow systems `P_t = conv{x_i + t alpha_i theta}`.
//!
//! For an admissible speed the face lattice survives on some interval
//! `[-c, c]`, the volume is affine in `t` there, and the reciprocal of the
//! Santalo polar volume is convex. This module moves polytopes, detects the
//! persistence interval numerically and samples the three functions.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{det3, plane_basis, Point3};
use crate::hull::hull_labeled;
use crate::polar::{santalo_point, DEFAULT_TOL};
use crate::polytope::Polytope;
use crate::speeds::{admissibility_violations, SpeedAssignment, PARALLEL_TOL};

/// Samples per side used to certify lattice persistence.
pub const PERSISTENCE_SAMPLES: usize = 64;

/// Relative width at which the bisection for the break point stops.
pub const BISECTION_REL_TOL: f64 = 1e-6;

/// Relative slack for second differences of `1 / polar volume`.
pub const CONVEXITY_REL_TOL: f64 = 1e-7;

/// Relative slack for product constancy.
pub const CONSTANCY_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ShadowSystem {
    pub base: Polytope,
    pub speed: SpeedAssignment,
    /// Half-width of the validated interval `[-c, c]`.
    pub c: f64,
}

impl ShadowSystem {
    pub fn new(base: Polytope, speed: SpeedAssignment, cap: f64) -> Result<ShadowSystem> {
        let c = persistence_interval(&base, &speed, cap)?;
        Ok(ShadowSystem { base, speed, c })
    }

    pub fn at(&self, t: f64) -> Result<Polytope> {
        deform(&self.base, &self.speed, t)
    }

    pub fn sweep(&self, n: usize) -> Result<SweepTrace> {
        sweep(&self.base, &self.speed, self.c, n)
    }
}

fn check_length(p: &Polytope, s: &SpeedAssignment) -> Result<()> {
    if s.alpha.len() != p.num_vertices() {
        return Err(Error::InvalidArgument(format!(
            "speed has {} entries for {} vertices",
            s.alpha.len(),
            p.num_vertices()
        )));
    }
    Ok(())
}

/// Hull of the moved vertices, with labels carried over from `p`.
pub fn deform(p: &Polytope, s: &SpeedAssignment, t: f64) -> Result<Polytope> {
    check_length(p, s)?;
    let theta = s.theta();
    let moved: Vec<Point3> = p
        .points()
        .iter()
        .zip(&s.alpha)
        .map(|(x, a)| x + theta * (t * a))
        .collect();
    Ok(hull_labeled(p.labels(), &moved)?.relabel_like(p))
}

/// `x -> x + t (w . x + beta) theta` applied vertexwise.
pub fn shear(p: &Polytope, w: &Point3, beta: f64, theta: &Point3, t: f64) -> Polytope {
    p.map_points(|x| x + theta * (t * (w.dot(x) + beta)))
}

fn persists(p: &Polytope, s: &SpeedAssignment, t: f64) -> bool {
    deform(p, s, t).is_ok_and(|q| q.lattice_equal(p) && q.is_valid())
}

fn persists_on(p: &Polytope, s: &SpeedAssignment, c: f64) -> bool {
    (1..=PERSISTENCE_SAMPLES).all(|k| {
        let t = c * k as f64 / PERSISTENCE_SAMPLES as f64;
        persists(p, s, t) && persists(p, s, -t)
    })
}

/// Last persisting `|t|` along one sign, searching `(0, cap]`.
fn one_side(p: &Polytope, s: &SpeedAssignment, cap: f64, sign: f64) -> f64 {
    let step = cap / PERSISTENCE_SAMPLES as f64;
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=PERSISTENCE_SAMPLES {
        let t = step * k as f64;
        if persists(p, s, sign * t) {
            lo = t;
        } else {
            hi = Some(t);
            break;
        }
    }
    let Some(mut hi) = hi else { return cap };
    for _ in 0..200 {
        if hi - lo <= BISECTION_REL_TOL * cap && lo > 0.0 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if persists(p, s, sign * mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Largest `c <= cap` such that the lattice of `p` persists at 64 samples of
/// each half of `[-c, c]`.
pub fn persistence_interval(p: &Polytope, s: &SpeedAssignment, cap: f64) -> Result<f64> {
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::InvalidArgument(format!("cap must be positive, got {cap}")));
    }
    check_length(p, s)?;
    p.ensure_valid()?;
    let bad = admissibility_violations(p, s);
    if !bad.is_empty() {
        return Err(Error::NotAdmissible(bad));
    }
    let mut c = one_side(p, s, cap, 1.0).min(one_side(p, s, cap, -1.0));
    // the break point search samples each side coarsely; confirm on the final
    // interval and shrink if a narrow break was skipped
    for _ in 0..60 {
        if c > 0.0 && persists_on(p, s, c) {
            return Ok(c);
        }
        c *= 0.5;
    }
    Err(Error::PreconditionUnmet(
        "face lattice does not persist for any t != 0".into(),
    ))
}

/// Parameters at which the combinatorics of `P_t` can first change: two
/// facets sharing an edge become coplanar, a facet parallel to `theta` gets
/// three consecutive collinear vertices, or a moving facet collapses. Each
/// condition is affine in `t` (or, for the collapse, has a single root), so
/// the roots are exact up to rounding.
pub fn break_times(p: &Polytope, s: &SpeedAssignment) -> Result<Vec<f64>> {
    check_length(p, s)?;
    let theta = s.theta();
    let x = p.points();
    let a = &s.alpha;
    let mut out = Vec::new();
    let mut root = |c0: f64, c1: f64| {
        if c1 != 0.0 {
            let t = -c0 / c1;
            if t.is_finite() && t != 0.0 {
                out.push(t);
            }
        }
    };
    let off_edge = |k: usize, i: usize, j: usize| -> Option<usize> {
        let f = p.facet(k)?;
        let n = f.ring.len();
        let at = f.ring.iter().position(|&v| v == i)?;
        [f.ring[(at + 1) % n], f.ring[(at + n - 1) % n]]
            .into_iter()
            .find(|&v| v != j)
    };
    for (label, i, j) in p.edges() {
        let facets: Vec<usize> = p
            .lattice()
            .phi2
            .get(&label)
            .map(|f| f.iter().copied().collect())
            .unwrap_or_default();
        let [f1, f2] = facets[..] else { continue };
        let (Some(c), Some(q)) = (off_edge(f1, i, j), off_edge(f2, i, j)) else {
            continue;
        };
        let (u, v, w) = (x[j] - x[i], x[c] - x[i], x[q] - x[i]);
        let (du, dv, dw) = (a[j] - a[i], a[c] - a[i], a[q] - a[i]);
        root(
            det3(&u, &v, &w),
            du * det3(&theta, &v, &w) + dv * det3(&u, &theta, &w) + dw * det3(&u, &v, &theta),
        );
    }
    for f in p.facets() {
        let n = f.ring.len();
        if theta.dot(&f.normal).abs() <= PARALLEL_TOL {
            for k in 0..n {
                let (i, j, l) = (f.ring[k], f.ring[(k + 1) % n], f.ring[(k + 2) % n]);
                let (u, v) = (x[j] - x[i], x[l] - x[j]);
                let (du, dv) = (a[j] - a[i], a[l] - a[j]);
                root(
                    u.cross(&v).dot(&f.normal),
                    (du * theta.cross(&v) + dv * u.cross(&theta)).dot(&f.normal),
                );
            }
        } else {
            let (w, _) = facet_affine_extension(p, f.label, a)?;
            root(1.0, theta.dot(&w));
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Closest break time with the sign of `sign`, if any.
pub fn first_break(p: &Polytope, s: &SpeedAssignment, sign: f64) -> Result<Option<f64>> {
    let times = break_times(p, s)?;
    Ok(if sign > 0.0 {
        times.into_iter().find(|&t| t > 0.0)
    } else {
        times.into_iter().rev().find(|&t| t < 0.0)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTrace {
    pub ts: Vec<f64>,
    pub volumes: Vec<f64>,
    pub polar_volumes: Vec<f64>,
    pub products: Vec<f64>,
    pub lattice_ok: Vec<bool>,
}

impl SweepTrace {
    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,volume,polar_volume,product,lattice_ok\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                self.ts[i], self.volumes[i], self.polar_volumes[i], self.products[i], self.lattice_ok[i]
            ));
        }
        out
    }

    /// Largest deviation of the volumes from their least-squares affine fit,
    /// relative to the volume at the sample closest to `t = 0`.
    pub fn volume_affinity_residual(&self) -> f64 {
        let reference = self.volumes[self.zero_index()];
        affine_fit_residual(&self.ts, &self.volumes) / reference.abs()
    }

    fn zero_index(&self) -> usize {
        (0..self.len())
            .min_by(|&a, &b| self.ts[a].abs().total_cmp(&self.ts[b].abs()))
            .unwrap_or(0)
    }
}

/// Samples volume, Santalo polar volume and product at `n` equispaced points
/// of `[-c, c]`. Samples are evaluated in parallel and stored in `t` order.
pub fn sweep(p: &Polytope, s: &SpeedAssignment, c: f64, n: usize) -> Result<SweepTrace> {
    if n < 5 {
        return Err(Error::InvalidArgument(format!("need at least 5 samples, got {n}")));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "half-width must be finite and nonnegative, got {c}"
        )));
    }
    check_length(p, s)?;
    let ts: Vec<f64> = (0..n)
        .map(|i| c * (2.0 * i as f64 - (n - 1) as f64) / (n - 1) as f64)
        .collect();
    let samples: Vec<(f64, f64, bool)> = ts
        .par_iter()
        .map(|&t| {
            let q = deform(p, s, t)?;
            let r = santalo_point(&q, DEFAULT_TOL)?;
            Ok((r.volume, r.polar_volume, q.lattice_equal(p)))
        })
        .collect::<Result<_>>()?;
    Ok(SweepTrace {
        volumes: samples.iter().map(|x| x.0).collect(),
        polar_volumes: samples.iter().map(|x| x.1).collect(),
        products: samples.iter().map(|x| x.0 * x.1).collect(),
        lattice_ok: samples.iter().map(|x| x.2).collect(),
        ts,
    })
}

/// Max absolute residual of the least-squares line through `(ts, ys)`.
pub fn affine_fit_residual(ts: &[f64], ys: &[f64]) -> f64 {
    let a = DMatrix::from_fn(ts.len(), 2, |r, c| if c == 0 { 1.0 } else { ts[r] });
    let b = DVector::from_column_slice(ys);
    let coef = a.clone().svd(true, true).solve(&b, 1e-14).expect("svd solve");
    (a * coef - b).amax()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    /// Smallest second difference of `1 / polar volume`, relative to its
    /// largest magnitude.
    pub min_second_difference: f64,
    pub worst_index: Option<usize>,
    pub holds: bool,
    /// Whether every sample kept the base lattice.
    pub lattice_ok: bool,
}

pub fn convexity_check(trace: &SweepTrace) -> ConvexityReport {
    convexity_check_with(trace, CONVEXITY_REL_TOL)
}

pub fn convexity_check_with(trace: &SweepTrace, tol: f64) -> ConvexityReport {
    let h: Vec<f64> = trace.polar_volumes.iter().map(|g| 1.0 / g).collect();
    let scale = h.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let t = &trace.ts;
    let mut min = f64::INFINITY;
    let mut worst = None;
    for i in 1..h.len().saturating_sub(1) {
        let left = (h[i] - h[i - 1]) / (t[i] - t[i - 1]);
        let right = (h[i + 1] - h[i]) / (t[i + 1] - t[i]);
        let d = (right - left) * 0.5 * (t[i + 1] - t[i - 1]) / scale;
        if d < min {
            min = d;
            worst = Some(i);
        }
    }
    ConvexityReport {
        min_second_difference: min,
        worst_index: worst,
        holds: min >= -tol,
        lattice_ok: trace.lattice_ok.iter().all(|&b| b),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstancyReport {
    /// `max |P(P_t) - P(P_0)| / P(P_0)`.
    pub max_deviation: f64,
    pub holds: bool,
    /// `D(t) = h(0) f(t) - f(0) h(t)` with `f` the volume and `h` the
    /// reciprocal polar volume.
    pub d_values: Vec<f64>,
}

pub fn constancy_check(trace: &SweepTrace) -> Result<ConstancyReport> {
    constancy_check_with(trace, CONSTANCY_REL_TOL)
}

/// Requires a sample at `t = 0` whose product is minimal within `tol`.
pub fn constancy_check_with(trace: &SweepTrace, tol: f64) -> Result<ConstancyReport> {
    if trace.is_empty() {
        return Err(Error::PreconditionUnmet("empty trace".into()));
    }
    let z = trace.zero_index();
    let span = trace.ts.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    if trace.ts[z].abs() > 1e-12 * span {
        return Err(Error::PreconditionUnmet("trace has no sample at t = 0".into()));
    }
    let p0 = trace.products[z];
    let (imin, min) = trace
        .products
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty");
    if p0 > min * (1.0 + tol) {
        let at = if imin == 0 || imin + 1 == trace.len() {
            "an endpoint"
        } else {
            "an interior sample"
        };
        return Err(Error::PreconditionUnmet(format!(
            "product minimum {min} is at {at} (t = {}), not at t = 0",
            trace.ts[imin]
        )));
    }
    let max_deviation = trace.products.iter().fold(0.0_f64, |m, p| m.max((p - p0).abs() / p0));
    let (f0, h0) = (trace.volumes[z], 1.0 / trace.polar_volumes[z]);
    let d_values = trace
        .volumes
        .iter()
        .zip(&trace.polar_volumes)
        .map(|(f, g)| h0 * f - f0 / g)
        .collect();
    Ok(ConstancyReport {
        max_deviation,
        holds: max_deviation <= tol,
        d_values,
    })
}

/// Least-squares affine extension `(w, beta)` of the speed restricted to
/// facet `k`, with `w` lying in the facet plane.
pub fn facet_affine_extension(p: &Polytope, k: usize, alpha: &[f64]) -> Result<(Point3, f64)> {
    let f = p
        .facet(k)
        .ok_or_else(|| Error::InvalidArgument(format!("no facet labeled {k}")))?;
    let (e1, e2) = plane_basis(&f.normal);
    let x = p.points();
    let a = DMatrix::from_fn(f.ring.len(), 3, |r, c| match c {
        0 => x[f.ring[r]].dot(&e1),
        1 => x[f.ring[r]].dot(&e2),
        _ => 1.0,
    });
    let b = DVector::from_iterator(f.ring.len(), f.ring.iter().map(|&i| alpha[i]));
    let coef = a.svd(true, true).solve(&b, 1e-14).expect("svd solve");
    Ok((e1 * coef[0] + e2 * coef[1], coef[2]))
}

/// Normal of facet `k` at time `t`: `(1 + t theta.w) v - t (theta.v) w`.
/// Returned unnormalized.
pub fn normal_update(p: &Polytope, k: usize, s: &SpeedAssignment, t: f64) -> Result<Point3> {
    check_length(p, s)?;
    let f = p
        .facet(k)
        .ok_or_else(|| Error::InvalidArgument(format!("no facet labeled {k}")))?;
    let theta = s.theta();
    if theta.dot(&f.normal).abs() <= PARALLEL_TOL {
        return Err(Error::ParallelFacet(k));
    }
    let (w, _) = facet_affine_extension(p, k, &s.alpha)?;
    Ok(f.normal * (1.0 + t * theta.dot(&w)) - w * (t * theta.dot(&f.normal)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::{cube, octahedron, simplex};
    use crate::speeds::{nontrivial_speed, trivial_space};
    use crate::SIMPLEX_PRODUCT;

    fn cube_speed(c: &Polytope) -> SpeedAssignment {
        let alpha = c.points().iter().map(|p| if p.x > 0.0 { p.y } else { 0.0 }).collect();
        SpeedAssignment::new(Point3::x(), alpha).unwrap()
    }

    fn top(c: &Polytope) -> usize {
        c.facets().iter().find(|f| f.normal.x > 0.5).unwrap().label
    }

    #[test]
    fn deform_at_zero_is_identity() {
        for p in [cube(), octahedron(), simplex()] {
            let s = SpeedAssignment::new(Point3::new(1.0, 2.0, 3.0), vec![0.7; p.num_vertices()]).unwrap();
            let q = deform(&p, &s, 0.0).unwrap();
            assert!(q.lattice_equal(&p));
            assert_eq!(q.points(), p.points());
        }
    }

    #[test]
    fn deformed_cube_tilts_top_facet() {
        let c = cube();
        let q = deform(&c, &cube_speed(&c), 0.3).unwrap();
        assert!(q.lattice_equal(&c));
        // analytic oracle: the moved top vertices satisfy x = 1 + 0.3 y
        let f = q.facet(top(&c)).unwrap();
        for &i in &f.ring {
            let p = q.points()[i];
            assert!((p.x - (1.0 + 0.3 * p.y)).abs() < 1e-15);
        }
        let n = Point3::new(1.0, -0.3, 0.0).normalize();
        assert!((f.normal - n).norm() < 1e-12);
        assert!((q.volume().unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn trivial_speed_is_a_shear() {
        let p = octahedron();
        let (w, beta) = (Point3::new(0.2, -0.1, 0.4), 0.3);
        let theta = Point3::new(0.0, 0.6, 0.8);
        let alpha = p.points().iter().map(|x| w.dot(x) + beta).collect();
        let s = SpeedAssignment::new(theta, alpha).unwrap();
        let q = deform(&p, &s, 0.37).unwrap();
        let r = shear(&p, &w, beta, &theta, 0.37);
        assert!(q.lattice_equal(&p));
        for (a, b) in q.points().iter().zip(r.points()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn simplex_persists_to_cap() {
        let t = simplex();
        let s = SpeedAssignment::new(Point3::new(0.3, -0.2, 0.9), vec![0.4, -0.9, 0.1, 0.6]).unwrap();
        assert_eq!(persistence_interval(&t, &s, 0.25).unwrap(), 0.25);
    }

    #[test]
    fn cube_persists_to_cap() {
        let c = cube();
        assert_eq!(persistence_interval(&c, &cube_speed(&c), 0.5).unwrap(), 0.5);
    }

    #[test]
    fn persistence_break_is_tight() {
        // top facet x = 1 + t y becomes parallel to the y facets only at
        // infinity, but the bottom-right vertex meets the left face at t = 2:
        // 1 + t * (-1) = -1
        let c = cube();
        let s = cube_speed(&c);
        let got = persistence_interval(&c, &s, 4.0).unwrap();
        assert!((got - 2.0).abs() < 4.0 * 2e-6, "{got}");
        assert!(!persists(&c, &s, got + 1e-5));
    }

    #[test]
    fn break_times_match_bisection() {
        let c = cube();
        let s = cube_speed(&c);
        assert_eq!(first_break(&c, &s, 1.0).unwrap(), Some(2.0));
        assert_eq!(first_break(&c, &s, -1.0).unwrap(), Some(-2.0));
        for seed in 0..5 {
            let p = crate::shapes::random_polytope(9, seed).unwrap();
            let s = nontrivial_speed(&p, &Point3::new(0.3, 0.4, 0.5)).unwrap().unwrap();
            let cap = 2.0 * p.diameter();
            let c = persistence_interval(&p, &s, cap).unwrap();
            let hi = first_break(&p, &s, 1.0).unwrap().unwrap_or(f64::INFINITY);
            let lo = first_break(&p, &s, -1.0).unwrap().unwrap_or(f64::NEG_INFINITY);
            let analytic = hi.min(-lo).min(cap);
            assert!((analytic - c).abs() <= 2e-6 * cap, "seed {seed}: {analytic} vs {c}");
        }
    }

    #[test]
    fn inadmissible_speed_rejected() {
        let c = cube();
        let mut alpha = vec![0.0; 8];
        alpha[c.facet(top(&c)).unwrap().ring[0]] = 1.0;
        let s = SpeedAssignment::new(Point3::x(), alpha).unwrap();
        match persistence_interval(&c, &s, 0.5) {
            Err(Error::NotAdmissible(v)) => assert_eq!(v[0].0, top(&c)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cube_sweep_has_constant_volume() {
        let c = cube();
        let tr = sweep(&c, &cube_speed(&c), 0.4, 9).unwrap();
        assert_eq!(tr.len(), 9);
        assert_eq!(tr.ts[4], 0.0);
        for v in &tr.volumes {
            assert!((v - 8.0).abs() < 1e-12);
        }
        assert!(tr.lattice_ok.iter().all(|&b| b));
        assert!(tr.volume_affinity_residual() < 1e-9);
        let conv = convexity_check(&tr);
        assert!(conv.holds && conv.lattice_ok, "{conv:?}");
    }

    #[test]
    fn simplex_shear_sweep_is_constant() {
        let t = simplex();
        let alpha = trivial_space(&t).unwrap()[1].clone();
        let s = SpeedAssignment::new(Point3::new(0.0, 1.0, 1.0), alpha).unwrap();
        let tr = sweep(&t, &s, 0.2, 9).unwrap();
        for p in &tr.products {
            assert!((p - SIMPLEX_PRODUCT).abs() < 1e-6);
        }
        let conv = convexity_check(&tr);
        assert!(conv.holds && conv.min_second_difference.abs() < 1e-7);
        let k = constancy_check(&tr).unwrap();
        assert!(k.holds && k.max_deviation < 1e-6);
    }

    #[test]
    fn sweep_rejects_too_few_samples() {
        let c = cube();
        assert!(matches!(
            sweep(&c, &cube_speed(&c), 0.1, 4),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let tr = SweepTrace {
            ts: vec![-0.5, 0.0],
            volumes: vec![8.0, 8.0],
            polar_volumes: vec![1.0, 4.0 / 3.0],
            products: vec![8.0, 32.0 / 3.0],
            lattice_ok: vec![true, false],
        };
        let csv = tr.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,volume,polar_volume,product,lattice_ok");
        assert_eq!(
            lines[2],
            "0.0000000000000000e0,8.0000000000000000e0,1.3333333333333333e0,1.0666666666666666e1,false"
        );
        let back: f64 = lines[2].split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(back, 32.0 / 3.0);
    }

    #[test]
    fn convexity_checker_flags_concave_bump() {
        let ts: Vec<f64> = (0..9).map(|i| i as f64 - 4.0).collect();
        let mut polar_volumes: Vec<f64> = ts.iter().map(|t| 1.0 / (1.0 + t * t)).collect();
        polar_volumes[4] = 1.0 / 3.0;
        let tr = SweepTrace {
            volumes: vec![1.0; 9],
            products: polar_volumes.clone(),
            lattice_ok: vec![true; 9],
            ts,
            polar_volumes,
        };
        let r = convexity_check(&tr);
        assert!(!r.holds);
        assert_eq!(r.worst_index, Some(4));
    }

    #[test]
    fn constancy_needs_interior_minimum() {
        let tr = SweepTrace {
            ts: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            volumes: vec![1.0; 5],
            polar_volumes: vec![1.0; 5],
            products: vec![5.0, 4.0, 3.0, 2.0, 1.0],
            lattice_ok: vec![true; 5],
        };
        assert!(matches!(constancy_check(&tr), Err(Error::PreconditionUnmet(_))));
    }

    #[test]
    fn cube_constancy_reports_or_rejects() {
        let c = cube();
        let tr = sweep(&c, &cube_speed(&c), 0.4, 9).unwrap();
        match constancy_check(&tr) {
            Err(Error::PreconditionUnmet(_)) => {}
            Ok(r) => assert!(!r.holds && r.max_deviation > 1e-6),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn normal_update_on_cube() {
        let c = cube();
        let s = cube_speed(&c);
        let k = top(&c);
        assert_eq!(normal_update(&c, k, &s, 0.0).unwrap(), c.facet(k).unwrap().normal);
        let v = normal_update(&c, k, &s, 0.3).unwrap();
        assert!((v - Point3::new(1.0, -0.3, 0.0)).norm() < 1e-14);
        let q = deform(&c, &s, 0.3).unwrap();
        let ring = &q.facet(k).unwrap().ring;
        let h0 = q.points()[ring[0]].dot(&v);
        for &i in ring {
            assert!((q.points()[i].dot(&v) - h0).abs() < 1e-10);
        }
        let side = c.facets().iter().find(|f| f.normal.y > 0.5).unwrap().label;
        assert_eq!(normal_update(&c, side, &s, 0.3), Err(Error::ParallelFacet(side)));
    }

    #[test]
    fn normal_update_matches_shear() {
        let p = octahedron();
        let (w, beta) = (Point3::new(0.1, 0.3, -0.2), -0.1);
        let theta = Point3::new(1.0, 1.0, 1.0).normalize();
        let alpha = p.points().iter().map(|x| w.dot(x) + beta).collect();
        let s = SpeedAssignment::new(theta, alpha).unwrap();
        let q = deform(&p, &s, 0.25).unwrap();
        for f in p.facets() {
            let v = normal_update(&p, f.label, &s, 0.25).unwrap().normalize();
            assert!((v - q.facet(f.label).unwrap().normal).norm() < 1e-10);
        }
    }

    #[test]
    fn nontrivial_cube_speed_sweeps() {
        let c = cube();
        let s = nontrivial_speed(&c, &Point3::x()).unwrap().unwrap();
        let sys = ShadowSystem::new(c, s, 0.25).unwrap();
        let tr = sys.sweep(9).unwrap();
        assert!(tr.volume_affinity_residual() < 1e-9);
        assert!(convexity_check(&tr).holds);
    }
}
