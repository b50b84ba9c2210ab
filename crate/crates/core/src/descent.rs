//! Volume-product descent along admissible shadow systems.
//!
//! Each iteration looks for a nontrivial admissible speed on the current
//! polytope or on its Santalo polar, line-searches the product along the
//! resulting shadow system and keeps the best body found. A step on the polar
//! side is mapped back by taking the Santalo polar of the deformed body, which
//! has as many vertices as the current iterate and no larger product.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{from_array, Point3};
use crate::hull::hull;
use crate::lattice::Issue;
use crate::off::write_off;
use crate::polar::{santalo_point, DEFAULT_TOL};
use crate::polytope::Polytope;
use crate::shadow::{first_break, persistence_interval, BISECTION_REL_TOL};
use crate::speeds::{candidate_directions, combinatorial_alternative, nontrivial_speed, Alternative, SpeedAssignment};

/// How far past the bisected interval an analytic break may lie and still be
/// used as the step, relative to the search cap.
const SNAP_REL_TOL: f64 = 4.0 * BISECTION_REL_TOL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentOptions {
    pub cap_iter: usize,
    /// Largest shadow parameter tried, as a fraction of the diameter of the
    /// moving body divided by the largest speed.
    pub step_cap: f64,
    /// A step is accepted when it lowers the product by at least this
    /// fraction.
    pub tol: f64,
    pub santalo_tol: f64,
    /// Interior evaluations of the golden-section search.
    pub line_evals: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            cap_iter: 50,
            step_cap: 0.25,
            tol: 1e-7,
            santalo_tol: DEFAULT_TOL,
            line_evals: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Primal,
    Polar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    ReachedTetrahedron,
    NoDecrease,
    IterationCap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescentStep {
    pub index: usize,
    pub side: Side,
    pub theta: [f64; 3],
    pub speed: Vec<f64>,
    pub t_star: f64,
    /// Half-width of the persistence interval searched.
    pub interval: f64,
    pub product: f64,
    pub vertices: usize,
    pub facets: usize,
    #[serde(skip)]
    pub polytope: Option<Polytope>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescentTrace {
    pub initial_product: f64,
    pub steps: Vec<DescentStep>,
    pub final_product: f64,
    pub termination: Termination,
    /// Set when the search stopped at a non-tetrahedron although both sides
    /// offered nontrivial speeds.
    pub anomalous: bool,
    pub errors: Vec<String>,
    #[serde(skip)]
    pub initial: Option<Polytope>,
}

impl DescentTrace {
    pub fn products(&self) -> Vec<f64> {
        std::iter::once(self.initial_product)
            .chain(self.steps.iter().map(|s| s.product))
            .collect()
    }

    /// Whether every step kept the product from rising by more than `rel`.
    pub fn is_monotone(&self, rel: f64) -> bool {
        self.products().windows(2).all(|w| w[1] <= w[0] * (1.0 + rel))
    }

    pub fn final_polytope(&self) -> Option<&Polytope> {
        self.steps
            .last()
            .and_then(|s| s.polytope.as_ref())
            .or(self.initial.as_ref())
    }

    /// One JSON object per step, newline separated.
    pub fn to_json_lines(&self) -> String {
        self.steps
            .iter()
            .map(|s| serde_json::to_string(s).expect("step serializes") + "\n")
            .collect()
    }

    /// Writes `trace.jsonl`, `summary.json` and `step_NNN.off` snapshots
    /// (`step_000.off` is the input) into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::InvalidArgument(format!("cannot write to {}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        fs::write(dir.join("trace.jsonl"), self.to_json_lines()).map_err(io)?;
        let summary = serde_json::to_string_pretty(self).expect("trace serializes");
        fs::write(dir.join("summary.json"), summary + "\n").map_err(io)?;
        if let Some(p) = &self.initial {
            fs::write(dir.join("step_000.off"), write_off(p)).map_err(io)?;
        }
        for s in &self.steps {
            if let Some(p) = &s.polytope {
                fs::write(dir.join(format!("step_{:03}.off", s.index)), write_off(p)).map_err(io)?;
            }
        }
        Ok(())
    }
}

/// Translates the bounding-box center to the origin and scales the largest
/// half-extent to 1. The volume product is unchanged.
pub fn normalize(p: &Polytope) -> Polytope {
    let (mut lo, mut hi) = (p.points()[0], p.points()[0]);
    for x in p.points() {
        lo = lo.inf(x);
        hi = hi.sup(x);
    }
    let center = (lo + hi) * 0.5;
    let half = ((hi - lo) * 0.5).max();
    p.map_points(|x| (x - center) / half)
}

fn product_of(p: &Polytope, tol: f64) -> f64 {
    santalo_point(p, tol).map_or(f64::INFINITY, |r| r.product)
}

/// Minimizes `f` over `[a, b]` by golden-section search with `evals`
/// interior evaluations, also comparing the endpoints and `t = 0`.
/// Returns the best `(t, f(t))` seen.
pub fn golden_section(f: impl Fn(f64) -> f64, a: f64, b: f64, evals: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut best = (0.0, f(0.0));
    let mut note = |t: f64, v: f64| {
        if v < best.1 {
            best = (t, v);
        }
    };
    note(a, f(a));
    note(b, f(b));
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    note(x1, f1);
    note(x2, f2);
    for _ in 2..evals {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
            note(x1, f1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
            note(x2, f2);
        }
    }
    best
}

/// Hull of `points`, dropping one near-degenerate vertex at a time until the
/// result validates, then normalized. Only vertices the validator singles
/// out (nearly non-extreme or nearly on a foreign facet plane) are removed.
pub fn cleanup(points: &[Point3]) -> Result<Polytope> {
    let mut pts = points.to_vec();
    loop {
        let h = normalize(&hull(&pts)?);
        let diag = h.validate();
        if diag.is_empty() {
            return Ok(h);
        }
        let worst = diag.issues.iter().find_map(|i| match i {
            Issue::NonExtreme { vertex } | Issue::NotStrictlyInside { vertex, .. } | Issue::OffPlane { vertex, .. } => {
                Some(*vertex)
            }
            _ => None,
        });
        let Some(drop) = worst else {
            return Err(Error::InvalidPolytope(diag.to_string()));
        };
        pts = h
            .labels()
            .iter()
            .zip(h.points())
            .filter(|(l, _)| **l != drop)
            .map(|(_, x)| *x)
            .collect();
    }
}

/// Vertices of the polar about `z`, one per facet.
fn dual_points(p: &Polytope, z: &Point3) -> Vec<Point3> {
    p.facets()
        .iter()
        .map(|f| z + f.normal / (f.offset - z.dot(&f.normal)))
        .collect()
}

/// The Santalo polar of `p`, rebuilt through `cleanup`.
fn santalo_polar(p: &Polytope, tol: f64) -> Result<Polytope> {
    let s = santalo_point(p, tol)?;
    cleanup(&dual_points(p, &s.point()))
}

fn moved_points(p: &Polytope, s: &SpeedAssignment, t: f64) -> Vec<Point3> {
    let theta = s.theta();
    p.points()
        .iter()
        .zip(&s.alpha)
        .map(|(x, a)| x + theta * (t * a))
        .collect()
}

struct Candidate {
    side: Side,
    speed: SpeedAssignment,
    t_star: f64,
    interval: f64,
    next: Polytope,
    product: f64,
}

/// Tries each candidate direction on `base`; returns the first step that
/// `accept` approves, and whether any nontrivial speed was found at all.
fn try_side(
    side: Side,
    base: &Polytope,
    accept: &dyn Fn(&Candidate) -> bool,
    opts: &DescentOptions,
    errors: &mut Vec<String>,
) -> (Option<Candidate>, bool) {
    let mut found_speed = false;
    for theta in candidate_directions(base) {
        let attempt = || -> Result<Option<Candidate>> {
            let Some(speed) = nontrivial_speed(base, &theta)? else {
                return Ok(None);
            };
            let amax = speed.alpha.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
            let cap = opts.step_cap * base.diameter() / amax;
            let c = persistence_interval(base, &speed, cap)?;
            let eval = |t: f64| {
                cleanup(&moved_points(base, &speed, t)).map_or(f64::INFINITY, |q| product_of(&q, opts.santalo_tol))
            };
            let (mut t_star, mut moved_product) = golden_section(eval, -c, c, opts.line_evals);
            // an optimum at the end of the bisected interval sits just short
            // of a lattice change; move onto the change itself so the cleanup
            // hull merges the degenerate faces
            if t_star != 0.0 && t_star.abs() == c {
                if let Some(tb) = first_break(base, &speed, t_star.signum())? {
                    if tb.abs() - c <= SNAP_REL_TOL * cap {
                        let v = eval(tb);
                        if v <= moved_product * (1.0 + 1e-12) {
                            (t_star, moved_product) = (tb, v);
                        }
                    }
                }
            }
            let moved = cleanup(&moved_points(base, &speed, t_star))?;
            let (next, product) = match side {
                Side::Primal => (moved, moved_product),
                Side::Polar => {
                    let back = santalo_polar(&moved, opts.santalo_tol)?;
                    let product = santalo_point(&back, opts.santalo_tol)?.product;
                    (back, product)
                }
            };
            Ok(Some(Candidate {
                side,
                speed,
                t_star,
                interval: c,
                next,
                product,
            }))
        };
        match attempt() {
            Ok(Some(cand)) => {
                found_speed = true;
                if accept(&cand) {
                    return (Some(cand), true);
                }
            }
            Ok(None) => {}
            Err(e) => errors.push(format!("{side:?} side, theta {:?}: {e}", theta.as_slice())),
        }
    }
    (None, found_speed)
}

fn sides(p: &Polytope) -> [Side; 2] {
    match combinatorial_alternative(p) {
        Alternative::PolarMoves => [Side::Polar, Side::Primal],
        _ => [Side::Primal, Side::Polar],
    }
}

pub fn descend(p: &Polytope, opts: &DescentOptions) -> Result<DescentTrace> {
    p.ensure_valid()?;
    if !(opts.step_cap > 0.0 && opts.tol >= 0.0 && opts.line_evals >= 2) {
        return Err(Error::InvalidArgument(
            "step cap must be positive and line search needs 2 evaluations".into(),
        ));
    }
    let mut current = cleanup(p.points())?;
    let initial_product = santalo_point(&current, opts.santalo_tol)?.product;
    let mut trace = DescentTrace {
        initial_product,
        steps: Vec::new(),
        final_product: initial_product,
        termination: Termination::IterationCap,
        anomalous: false,
        errors: Vec::new(),
        initial: Some(current.clone()),
    };
    let mut product = initial_product;

    for index in 1..=opts.cap_iter {
        if current.num_vertices() == 4 {
            trace.termination = Termination::ReachedTetrahedron;
            break;
        }
        // a step must lower the product by the relative tolerance, or remove
        // vertices without raising it
        let vertices = current.num_vertices();
        let accept = |c: &Candidate| {
            c.product <= product * (1.0 - opts.tol) || (c.next.num_vertices() < vertices && c.product <= product)
        };
        let mut accepted = None;
        let mut speeds_found = [false; 2];
        for (i, side) in sides(&current).into_iter().enumerate() {
            let base = match side {
                Side::Primal => current.clone(),
                Side::Polar => match santalo_polar(&current, opts.santalo_tol) {
                    Ok(q) => q,
                    Err(e) => {
                        trace.errors.push(format!("polar of iterate {}: {e}", index - 1));
                        continue;
                    }
                },
            };
            let (cand, found) = try_side(side, &base, &accept, opts, &mut trace.errors);
            speeds_found[i] = found;
            if cand.is_some() {
                accepted = cand;
                break;
            }
        }
        let Some(cand) = accepted else {
            trace.termination = Termination::NoDecrease;
            trace.anomalous = speeds_found.iter().all(|&f| f);
            break;
        };
        let next = cand.next;
        product = cand.product;
        trace.steps.push(DescentStep {
            index,
            side: cand.side,
            theta: cand.speed.theta,
            speed: cand.speed.alpha,
            t_star: cand.t_star,
            interval: cand.interval,
            product,
            vertices: next.num_vertices(),
            facets: next.num_facets(),
            polytope: Some(next.clone()),
        });
        current = next;
    }
    if trace.termination == Termination::IterationCap && current.num_vertices() == 4 {
        trace.termination = Termination::ReachedTetrahedron;
    }
    trace.final_product = product;
    Ok(trace)
}

/// Direction stored in a step, as a vector.
pub fn step_theta(step: &DescentStep) -> Point3 {
    from_array(step.theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::{cube, random_polytope, simplex};
    use crate::{CUBE_PRODUCT, SIMPLEX_PRODUCT};

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (t, v) = golden_section(|t| (t - 0.3).powi(2) + 1.0, -1.0, 1.0, 40);
        assert!((t - 0.3).abs() < 1e-6 && (v - 1.0).abs() < 1e-12);
        // endpoint minimum
        let (t, _) = golden_section(|t| t, -1.0, 1.0, 10);
        assert_eq!(t, -1.0);
    }

    #[test]
    fn normalize_keeps_product() {
        let p = random_polytope(9, 4)
            .unwrap()
            .map_points(|x| x * 3.0 + Point3::new(5.0, -2.0, 1.0));
        let q = normalize(&p);
        assert!(q.lattice_equal(&p));
        let (a, b) = (product_of(&p, 1e-10), product_of(&q, 1e-10));
        assert!((a - b).abs() < 1e-9 * a);
    }

    #[test]
    fn cleanup_drops_nearly_coplanar_vertex() {
        // a fifth point 1e-11 above a cube facet
        let mut pts: Vec<Point3> = cube().points().to_vec();
        pts.push(Point3::new(0.3, 0.2, 1.0 + 1e-11));
        let q = cleanup(&pts).unwrap();
        assert!(q.is_valid());
        assert_eq!((q.num_vertices(), q.num_facets()), (8, 6));
        pts.push(Point3::new(0.0, 0.0, 1.5));
        assert_eq!(cleanup(&pts).unwrap().num_vertices(), 9);
    }

    #[test]
    fn simplex_stops_immediately() {
        let t = descend(&simplex(), &DescentOptions::default()).unwrap();
        assert_eq!(t.termination, Termination::ReachedTetrahedron);
        assert!(t.steps.is_empty());
        assert!((t.final_product - SIMPLEX_PRODUCT).abs() < 1e-6);
    }

    #[test]
    fn cube_first_step_is_polar_and_decreases() {
        let opts = DescentOptions {
            cap_iter: 2,
            ..Default::default()
        };
        let t = descend(&cube(), &opts).unwrap();
        assert!(!t.steps.is_empty(), "{:?}", t.errors);
        assert_eq!(t.steps[0].side, Side::Polar);
        assert!(t.steps[0].product < CUBE_PRODUCT - 1e-3);
        assert!(t.steps[0].vertices <= 8);
        assert!(t.is_monotone(1e-9));
    }

    #[test]
    fn rejects_bad_options() {
        let opts = DescentOptions {
            step_cap: 0.0,
            ..Default::default()
        };
        assert!(matches!(descend(&cube(), &opts), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn json_lines_have_one_step_per_line() {
        let opts = DescentOptions {
            cap_iter: 2,
            ..Default::default()
        };
        let t = descend(&random_polytope(8, 42).unwrap(), &opts).unwrap();
        let text = t.to_json_lines();
        assert_eq!(text.lines().count(), t.steps.len());
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v["product"].as_f64().unwrap() >= SIMPLEX_PRODUCT - 1e-6);
        }
    }
}
