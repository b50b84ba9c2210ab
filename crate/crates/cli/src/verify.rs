//! Invariant suites run by `mahler verify`.

use rayon::prelude::*;
use serde::Serialize;

use mahler_core::off::{read_off, write_off};
use mahler_core::polar::{polar, probe_minimality, product_monotonicity_check, santalo_point, DEFAULT_TOL};
use mahler_core::shadow::{affine_fit_residual, convexity_check, persistence_interval, sweep};
use mahler_core::shapes::{builtin, BUILTIN_NAMES};
use mahler_core::speeds::{combinatorial_alternative, dimension_bound_check, nontrivial_speed, Alternative};
use mahler_core::{Point3, Polytope, SIMPLEX_PRODUCT};

use crate::{Failure, Optional, OptionalInput, Source};

const MAHLER_SLACK: f64 = 1e-6;
const BIPOLAR_REL_TOL: f64 = 1e-8;
const AFFINE_REL_TOL: f64 = 1e-9;
const MINIMALITY_PROBES: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub instance: String,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub instances: usize,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<Check>,
}

/// Vertex count of the `k`-th random instance when none is requested.
fn default_size(k: usize) -> usize {
    4 + k % 27
}

fn instance_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(k as u64)
}

/// The polytopes a suite runs over, with display names.
pub fn instances(input: &OptionalInput, count: usize) -> Result<Vec<(String, Polytope)>, Failure> {
    let Optional { path, shape, random } = &input.from;
    let single = match (path, shape) {
        (Some(p), _) => Some(Source::File(p.clone())),
        (_, Some(s)) => Some(Source::Shape(s.clone())),
        _ => None,
    };
    if let Some(src) = single {
        return Ok(vec![(src.name(), src.load()?)]);
    }
    let mut out = Vec::new();
    if random.is_none() {
        for name in BUILTIN_NAMES {
            out.push((name.to_string(), builtin(name)?));
        }
    }
    for k in 0..count {
        let src = Source::Random {
            vertices: random.unwrap_or_else(|| default_size(k)),
            seed: instance_seed(input.seed, k),
        };
        out.push((src.name(), src.load()?));
    }
    Ok(out)
}

pub fn run_suite(input: &OptionalInput, count: usize) -> Result<SuiteReport, Failure> {
    let polytopes = instances(input, count)?;
    log::debug!("verifying {} polytopes", polytopes.len());
    let checks: Vec<Check> = polytopes
        .par_iter()
        .enumerate()
        .flat_map_iter(|(k, (name, p))| check_polytope(name, p, instance_seed(input.seed, k)))
        .collect();
    let failed = checks.iter().filter(|c| !c.pass).count();
    Ok(SuiteReport {
        seed: input.seed,
        instances: polytopes.len(),
        passed: checks.len() - failed,
        failed,
        checks,
    })
}

/// Every invariant on one polytope. Checks whose prerequisites failed are
/// reported as failures rather than skipped.
pub fn check_polytope(instance: &str, p: &Polytope, seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let mut record = |name: &'static str, result: Result<String, String>| {
        let (pass, detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        out.push(Check {
            instance: instance.to_string(),
            name,
            pass,
            detail,
        });
    };

    let (v, e, f) = (p.num_vertices() as i64, p.num_edges() as i64, p.num_facets() as i64);
    record(
        "valid",
        if !p.is_valid() {
            Err(p.validate().to_string())
        } else if v - e + f != 2 {
            Err(format!("V - E + F = {}", v - e + f))
        } else {
            Ok(format!("V {v}, E {e}, F {f}"))
        },
    );

    let santalo = santalo_point(p, DEFAULT_TOL);
    record(
        "santalo_point",
        match &santalo {
            Ok(s) => match probe_minimality(p, s, MINIMALITY_PROBES, seed) {
                Ok(true) => Ok(format!("residual {:.1e} after {} iterations", s.residual, s.iterations)),
                Ok(false) => Err("a probe point has smaller polar volume".into()),
                Err(e) => Err(e.to_string()),
            },
            Err(e) => Err(e.to_string()),
        },
    );
    let Ok(santalo) = santalo else { return out };

    record(
        "mahler_bound",
        if santalo.product >= SIMPLEX_PRODUCT - MAHLER_SLACK {
            Ok(format!("product {:.9}", santalo.product))
        } else {
            Err(format!("product {:.9} below 64/9", santalo.product))
        },
    );

    let z = santalo.point();
    let dual = polar(p, &z);
    record(
        "lattice_duality",
        dual.as_ref().map_err(|e| e.to_string()).and_then(|d| {
            let (delta, degree) = p.facet_stats();
            let swapped = d.num_vertices() == p.num_facets()
                && d.num_facets() == p.num_vertices()
                && d.num_edges() == p.num_edges()
                && d.facet_stats() == (degree, delta);
            if swapped {
                Ok(format!(
                    "polar V {}, F {}, max facet size {}",
                    d.num_vertices(),
                    d.num_facets(),
                    degree
                ))
            } else {
                Err("vertex, facet or edge counts do not swap".into())
            }
        }),
    );
    record(
        "bipolar",
        dual.as_ref().map_err(|e| e.to_string()).and_then(|d| {
            let back = polar(d, &z).map_err(|e| e.to_string())?;
            if !back.lattice_equal(p) {
                return Err("lattice changed".into());
            }
            let worst = back
                .points()
                .iter()
                .zip(p.points())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
                / p.diameter();
            if worst < BIPOLAR_REL_TOL {
                Ok(format!("max relative vertex error {worst:.1e}"))
            } else {
                Err(format!("max relative vertex error {worst:.1e}"))
            }
        }),
    );
    record(
        "polar_monotonicity",
        match product_monotonicity_check(p) {
            Ok(r) if r.holds => Ok(format!("{:.9} <= {:.9}", r.polar_product, r.product)),
            Ok(r) => Err(format!("{:.9} > {:.9}", r.polar_product, r.product)),
            Err(e) => Err(e.to_string()),
        },
    );
    record("off_round_trip", off_round_trip(p));
    record(
        "dimension_bound",
        match dimension_bound_check(p) {
            Ok(r) => {
                let eq = if r.dim as i64 == r.bound { " (equality)" } else { "" };
                let msg = format!("dim {}, bound {}{eq}", r.dim, r.bound);
                if r.satisfied {
                    Ok(msg)
                } else {
                    Err(msg)
                }
            }
            Err(e) => Err(e.to_string()),
        },
    );
    record("alternative", alternative(p));
    record("shadow_laws", shadow_laws(p));
    out
}

fn off_round_trip(p: &Polytope) -> Result<String, String> {
    let q = read_off(&write_off(p)).map_err(|e| e.to_string())?;
    let exact = q
        .points()
        .iter()
        .zip(p.points())
        .all(|(a, b)| (a - b).norm() <= 1e-15 * b.norm().max(1.0));
    if exact && q.lattice_equal(p) {
        Ok("vertices and lattice reproduced".into())
    } else {
        Err("read back differs".into())
    }
}

fn alternative(p: &Polytope) -> Result<String, String> {
    let alt = combinatorial_alternative(p);
    let moves = |q: &Polytope| -> Result<bool, String> {
        let theta = Point3::from(dimension_bound_check(q).map_err(|e| e.to_string())?.theta);
        Ok(nontrivial_speed(q, &theta).map_err(|e| e.to_string())?.is_some())
    };
    let polar_side = || -> Result<Polytope, String> {
        let s = santalo_point(p, DEFAULT_TOL).map_err(|e| e.to_string())?;
        polar(p, &s.point()).map_err(|e| e.to_string())
    };
    let ok = match alt {
        Alternative::Tetrahedron => p.num_vertices() == 4,
        Alternative::PrimalMoves => moves(p)?,
        Alternative::PolarMoves => moves(&polar_side()?)?,
        Alternative::Both => moves(p)? && moves(&polar_side()?)?,
    };
    if ok {
        Ok(format!("{alt:?}"))
    } else {
        Err(format!(
            "{alt:?} reported but the indicated side has no nontrivial speed"
        ))
    }
}

fn shadow_laws(p: &Polytope) -> Result<String, String> {
    let err = |e: mahler_core::Error| e.to_string();
    let theta = Point3::from(dimension_bound_check(p).map_err(err)?.theta);
    let Some(s) = nontrivial_speed(p, &theta).map_err(err)? else {
        return Ok("no nontrivial speed in the bound direction".into());
    };
    let c = persistence_interval(p, &s, 0.25 * p.diameter()).map_err(err)?;
    let wide = sweep(p, &s, c, 16).map_err(err)?;
    if !wide.lattice_ok.iter().all(|&b| b) {
        return Err(format!("lattice changed inside [-{c:.3e}, {c:.3e}]"));
    }
    let affine = affine_fit_residual(&wide.ts, &wide.volumes) / p.volume().map_err(err)?;
    if affine >= AFFINE_REL_TOL {
        return Err(format!("volume affine-fit residual {affine:.1e}"));
    }
    let conv = convexity_check(&sweep(p, &s, c, 9).map_err(err)?);
    if !conv.holds {
        return Err(format!(
            "reciprocal polar volume second difference {:.1e}",
            conv.min_second_difference
        ));
    }
    Ok(format!(
        "c {c:.3e}, affine residual {affine:.1e}, min second difference {:.1e}",
        conv.min_second_difference
    ))
}
