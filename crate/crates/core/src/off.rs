//! OFF polyhedron files.
//!
//! ```text
//! OFF
//! V F E
//! x y z          (V lines)
//! m i_1 ... i_m  (F lines, zero-based indices in boundary order)
//! ```
//!
//! `#` starts a comment. The edge count may be 0 and is never trusted. On
//! reading, vertex `i` gets label `i` and the `k`-th facet gets label `k`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::polytope::Polytope;

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    /// Next line with content, as (1-based line number, tokens).
    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, raw) in self.inner.by_ref() {
            self.last = i + 1;
            let body = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = body.split_whitespace().collect();
            if !tokens.is_empty() {
                return Some((i + 1, tokens));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        self.next().ok_or_else(|| Error::Parse {
            line: self.last + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn parse<T: std::str::FromStr>(line: usize, token: &str, what: &str) -> Result<T> {
    token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} {token:?}"),
    })
}

/// Parses OFF text without checking convexity.
pub fn parse_off(text: &str) -> Result<Polytope> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (line, mut tokens) = lines.expect("OFF header")?;
    if tokens[0] != "OFF" {
        return Err(Error::Parse {
            line,
            message: format!("expected header \"OFF\", found {:?}", tokens[0]),
        });
    }
    tokens.remove(0);
    let (line, counts) = if tokens.is_empty() {
        lines.expect("counts line")?
    } else {
        (line, tokens)
    };
    if counts.len() != 3 {
        return Err(Error::Parse {
            line,
            message: format!("counts line needs 3 integers \"V F E\", found {} tokens", counts.len()),
        });
    }
    let nv: usize = parse(line, counts[0], "vertex count")?;
    let nf: usize = parse(line, counts[1], "facet count")?;
    let _: usize = parse(line, counts[2], "edge count")?;

    let mut points = Vec::with_capacity(nv);
    for i in 0..nv {
        let (line, t) = lines.expect(&format!("vertex {i}"))?;
        if t.len() < 3 {
            return Err(Error::Parse {
                line,
                message: format!("vertex {i} needs 3 coordinates"),
            });
        }
        let c: Vec<f64> = t[..3]
            .iter()
            .map(|s| parse::<f64>(line, s, "coordinate"))
            .collect::<Result<_>>()?;
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse {
                line,
                message: format!("vertex {i} has a non-finite coordinate"),
            });
        }
        points.push(Point3::new(c[0], c[1], c[2]));
    }

    let mut facets = Vec::with_capacity(nf);
    for k in 0..nf {
        let (line, t) = lines.expect(&format!("facet {k}"))?;
        let m: usize = parse(line, t[0], "facet size")?;
        if m < 3 || t.len() < m + 1 {
            return Err(Error::Parse {
                line,
                message: format!("facet {k} needs at least 3 indices and lists {} of {m}", t.len() - 1),
            });
        }
        let ring: Vec<usize> = t[1..=m]
            .iter()
            .map(|s| parse::<usize>(line, s, "vertex index"))
            .collect::<Result<_>>()?;
        if let Some(bad) = ring.iter().find(|&&i| i >= nv) {
            return Err(Error::Parse {
                line,
                message: format!("vertex index {bad} out of range (V = {nv})"),
            });
        }
        facets.push((k, ring));
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::Parse {
            line,
            message: "trailing content after the last facet".into(),
        });
    }
    Ok(Polytope::assemble((0..nv).collect(), points, facets, None))
}

/// Parses OFF text and checks that it describes a valid convex polytope.
pub fn read_off(text: &str) -> Result<Polytope> {
    let p = parse_off(text)?;
    p.ensure_valid()?;
    Ok(p)
}

pub fn read_off_file(path: impl AsRef<Path>) -> Result<Polytope> {
    let path = path.as_ref();
    let text =
        fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    read_off(&text)
}

/// Vertices in position order, facets in label order. Coordinates use the
/// shortest representation that reads back to the same `f64`.
pub fn write_off(p: &Polytope) -> String {
    let mut out = format!("OFF\n{} {} {}\n", p.num_vertices(), p.num_facets(), p.num_edges());
    for x in p.points() {
        out.push_str(&format!("{:?} {:?} {:?}\n", x.x, x.y, x.z));
    }
    let mut facets: Vec<_> = p.facets().iter().collect();
    facets.sort_by_key(|f| f.label);
    for f in facets {
        out.push_str(&f.ring.len().to_string());
        for i in &f.ring {
            out.push_str(&format!(" {i}"));
        }
        out.push('\n');
    }
    out
}

pub fn write_off_file(p: &Polytope, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_off(p)).map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))
}
