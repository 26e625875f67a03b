//! Marching-squares contour extraction on the node lattice.
//!
//! Crossings are identified by the grid edge they sit on, so chaining
//! segments into polylines is exact (no floating-point endpoint matching).

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{Point, ScalarField};

/// All polylines of one iso-level.
#[derive(Debug, Clone)]
pub struct LevelContours {
    pub level: f64,
    pub polylines: Vec<Vec<Point>>,
}

/// Grid edges carrying a crossing: horizontal `(i,j)-(i+1,j)` or vertical
/// `(i,j)-(i,j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum EdgeKey {
    H(usize, usize),
    V(usize, usize),
}

/// Extract iso-contours of `field` at each finite level.
pub fn extract_contours(field: &ScalarField, levels: &[f64]) -> Result<Vec<LevelContours>> {
    levels
        .iter()
        .map(|&level| {
            if !level.is_finite() {
                return Err(Error::invalid("levels", format!("level {level} is not finite")));
            }
            Ok(LevelContours {
                level,
                polylines: contour_level(field, level),
            })
        })
        .collect()
}

/// CSV rows `level,polyline,x,y` (polyline ids restart per level).
pub fn write_contours_csv(contours: &[LevelContours], mut w: impl Write) -> Result<()> {
    writeln!(w, "level,polyline,x,y")?;
    for lc in contours {
        for (pid, line) in lc.polylines.iter().enumerate() {
            for p in line {
                writeln!(w, "{},{},{},{}", lc.level, pid, p.x, p.y)?;
            }
        }
    }
    Ok(())
}

fn contour_level(field: &ScalarField, level: f64) -> Vec<Vec<Point>> {
    let spec = field.spec();
    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    let above = |v: f64| v >= level;

    for j in 0..spec.ny - 1 {
        for i in 0..spec.nx - 1 {
            let c00 = field.get(i, j);
            let c10 = field.get(i + 1, j);
            let c01 = field.get(i, j + 1);
            let c11 = field.get(i + 1, j + 1);
            let mut crossings: Vec<EdgeKey> = Vec::with_capacity(4);
            if above(c00) != above(c10) {
                crossings.push(EdgeKey::H(i, j));
            }
            if above(c10) != above(c11) {
                crossings.push(EdgeKey::V(i + 1, j));
            }
            if above(c01) != above(c11) {
                crossings.push(EdgeKey::H(i, j + 1));
            }
            if above(c00) != above(c01) {
                crossings.push(EdgeKey::V(i, j));
            }
            match crossings.len() {
                2 => segments.push((crossings[0], crossings[1])),
                4 => {
                    // saddle cell: resolve the pairing with the center average
                    let center = 0.25 * (c00 + c10 + c01 + c11);
                    let bottom = EdgeKey::H(i, j);
                    let right = EdgeKey::V(i + 1, j);
                    let top = EdgeKey::H(i, j + 1);
                    let left = EdgeKey::V(i, j);
                    let diag00 = above(c00); // c00/c11 on one side, c10/c01 on the other
                    let connect_diag = above(center) == diag00;
                    if connect_diag {
                        segments.push((bottom, right));
                        segments.push((top, left));
                    } else {
                        segments.push((bottom, left));
                        segments.push((top, right));
                    }
                }
                _ => {}
            }
        }
    }
    chain_segments(field, level, &segments)
}

fn crossing_point(field: &ScalarField, level: f64, edge: EdgeKey) -> Point {
    let spec = field.spec();
    let ((i0, j0), (i1, j1)) = match edge {
        EdgeKey::H(i, j) => ((i, j), (i + 1, j)),
        EdgeKey::V(i, j) => ((i, j), (i, j + 1)),
    };
    let a = field.get(i0, j0);
    let b = field.get(i1, j1);
    let mut t = (level - a) / (b - a);
    if !t.is_finite() {
        t = if a.is_finite() { 0.0 } else { 1.0 };
    }
    let t = t.clamp(0.0, 1.0);
    let p0 = spec.node(i0, j0);
    let p1 = spec.node(i1, j1);
    Point::new(p0.x + t * (p1.x - p0.x), p0.y + t * (p1.y - p0.y))
}

fn chain_segments(
    field: &ScalarField,
    level: f64,
    segments: &[(EdgeKey, EdgeKey)],
) -> Vec<Vec<Point>> {
    let mut by_edge: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(s);
        by_edge.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut chain = vec![a, b];
        // extend forward from the tail, then backward from the head
        for dir in 0..2 {
            loop {
                let tip = if dir == 0 { *chain.last().unwrap() } else { chain[0] };
                let next = by_edge
                    .get(&tip)
                    .and_then(|ss| ss.iter().find(|&&s| !used[s]).copied());
                let Some(s) = next else { break };
                used[s] = true;
                let (x, y) = segments[s];
                let other = if x == tip { y } else { x };
                if dir == 0 {
                    chain.push(other);
                } else {
                    chain.insert(0, other);
                }
            }
        }
        polylines.push(
            chain
                .into_iter()
                .map(|e| crossing_point(field, level, e))
                .collect(),
        );
    }
    polylines
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn constant_field_has_no_contours() {
        let spec = GridSpec::unit_square(11).unwrap();
        let f = ScalarField::constant(spec, 1.0);
        let cs = extract_contours(&f, &[0.5, 1.0, 2.0]).unwrap();
        for lc in cs {
            assert!(lc.polylines.is_empty(), "level {}", lc.level);
        }
    }

    #[test]
    fn linear_field_gives_one_straight_polyline() {
        let spec = GridSpec::unit_square(21).unwrap();
        let f = ScalarField::from_fn(spec, |p| p.x).unwrap();
        let cs = extract_contours(&f, &[0.47]).unwrap();
        assert_eq!(cs[0].polylines.len(), 1);
        let line = &cs[0].polylines[0];
        assert!(line.len() >= spec.ny);
        for p in line {
            assert!((p.x - 0.47).abs() < 1e-9);
        }
    }

    #[test]
    fn infinite_levels_rejected() {
        let spec = GridSpec::unit_square(5).unwrap();
        let f = ScalarField::constant(spec, 1.0);
        assert!(extract_contours(&f, &[f64::INFINITY]).is_err());
    }

    #[test]
    fn distance_level_set_is_a_closed_loop_near_the_circle() {
        let spec = GridSpec::unit_square(81).unwrap();
        let c = Point::new(0.5, 0.5);
        let f = ScalarField::from_fn(spec, |p| p.dist(c)).unwrap();
        let cs = extract_contours(&f, &[0.3]).unwrap();
        assert_eq!(cs[0].polylines.len(), 1);
        let line = &cs[0].polylines[0];
        // closed: chained endpoints touch
        assert!(line.first().unwrap().dist(*line.last().unwrap()) < 2.0 * spec.h + 1e-12);
        for p in line {
            assert!((p.dist(c) - 0.3).abs() <= 2.0 * spec.h);
        }
    }

    #[test]
    fn csv_shape() {
        let spec = GridSpec::unit_square(5).unwrap();
        let f = ScalarField::from_fn(spec, |p| p.y).unwrap();
        let cs = extract_contours(&f, &[0.4]).unwrap();
        let mut buf = Vec::new();
        write_contours_csv(&cs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("level,polyline,x,y\n"));
        assert!(text.lines().count() > 1);
    }
}
