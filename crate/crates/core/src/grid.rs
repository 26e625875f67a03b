//! Uniform 2D grids, scalar fields sampled on them, and inside/outside masks.
//!
//! Everything downstream (solvers, planners, robustness criteria) works on
//! [`ScalarField`]s over a shared [`GridSpec`]. Obstacles and the domain
//! exterior are encoded as `+inf` field values together with a [`DomainMask`];
//! there are no ghost nodes. All types are immutable after construction and
//! can be shared freely across threads.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in domain coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A uniform grid with square spacing `h`, node `(i, j)` at
/// `(origin.x + i*h, origin.y + j*h)` for `0 <= i < nx`, `0 <= j < ny`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub origin: Point,
    pub h: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, origin: Point, h: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 nodes per axis, got {nx}x{ny}"
            )));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidGrid(format!("spacing h = {h} must be positive")));
        }
        Ok(GridSpec { nx, ny, origin, h })
    }

    /// `n` x `n` grid covering the unit square, `h = 1/(n-1)`.
    pub fn unit_square(n: usize) -> Result<Self> {
        GridSpec::new(n, n, Point::new(0.0, 0.0), 1.0 / (n as f64 - 1.0))
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Linear index of node `(i, j)`; row-major by `j`, then `i`.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.origin.x + i as f64 * self.h,
            self.origin.y + j as f64 * self.h,
        )
    }

    pub fn node_at(&self, idx: usize) -> Point {
        let (i, j) = self.coords(idx);
        self.node(i, j)
    }

    pub fn check_node(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.nx || j >= self.ny {
            return Err(Error::IndexOutOfRange {
                i,
                j,
                nx: self.nx,
                ny: self.ny,
            });
        }
        Ok(())
    }

    /// Nearest node to `p`, clamped to the grid.
    pub fn nearest_node(&self, p: Point) -> (usize, usize) {
        let clamp = |t: f64, n: usize| -> usize {
            let r = t.round();
            if r < 0.0 {
                0
            } else if r as usize >= n {
                n - 1
            } else {
                r as usize
            }
        };
        (
            clamp((p.x - self.origin.x) / self.h, self.nx),
            clamp((p.y - self.origin.y) / self.h, self.ny),
        )
    }

    /// Whether `p` lies in the closed bounding box of the grid (with a tiny
    /// floating-point slack).
    pub fn contains(&self, p: Point) -> bool {
        let eps = 1e-9 * self.h;
        p.x >= self.origin.x - eps
            && p.y >= self.origin.y - eps
            && p.x <= self.origin.x + (self.nx - 1) as f64 * self.h + eps
            && p.y <= self.origin.y + (self.ny - 1) as f64 * self.h + eps
    }
}

/// A real-valued function sampled on a grid. `+inf` is a legal value and
/// encodes excluded nodes (obstacles, exterior, unreachable); NaN is not.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(spec: GridSpec, value: f64) -> Self {
        ScalarField {
            spec,
            values: vec![value; spec.len()],
        }
    }

    /// Evaluates `formula` at every node. Rejects NaN with the offending node.
    pub fn from_fn(spec: GridSpec, formula: impl Fn(Point) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let v = formula(spec.node(i, j));
                if v.is_nan() {
                    return Err(Error::NonFiniteNode { i, j });
                }
                values.push(v);
            }
        }
        Ok(ScalarField { spec, values })
    }

    /// Wraps raw values (row-major by `j` then `i`). Length must match; NaN rejected.
    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidGrid(format!(
                "value buffer of length {} does not match {}x{} grid",
                values.len(),
                spec.nx,
                spec.ny
            )));
        }
        if let Some(pos) = values.iter().position(|v| v.is_nan()) {
            let (i, j) = spec.coords(pos);
            return Err(Error::NonFiniteNode { i, j });
        }
        Ok(ScalarField { spec, values })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.idx(i, j)]
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.spec, other.spec, "fields on different grids");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        ScalarField {
            spec: self.spec,
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copy of the field with `+inf` outside the mask.
    pub fn masked(&self, mask: &DomainMask) -> ScalarField {
        assert_eq!(self.spec, mask.spec, "mask on a different grid");
        let values = self
            .values
            .iter()
            .zip(&mask.inside)
            .map(|(&v, &ins)| if ins { v } else { f64::INFINITY })
            .collect();
        ScalarField {
            spec: self.spec,
            values,
        }
    }

    /// One-sided difference `(center - neighbor) / h` with the conventions of
    /// the upwind stencil: a `+inf` neighbor of a finite center contributes
    /// `-inf` (unavailable); two `+inf` values contribute 0.
    #[inline]
    fn one_sided(center: f64, neighbor: f64, h: f64) -> f64 {
        if center == neighbor {
            0.0
        } else {
            (center - neighbor) / h
        }
    }

    /// Magnitude of the first-order upwind gradient at node `(i, j)`:
    /// `sqrt(max{D-x, -D+x, 0}^2 + max{D-y, -D+y, 0}^2)`. Missing or `+inf`
    /// neighbors are treated as unavailable one-sided differences.
    pub fn upwind_gradient_magnitude(&self, i: usize, j: usize) -> Result<f64> {
        self.spec.check_node(i, j)?;
        let h = self.spec.h;
        let c = self.get(i, j);
        let nb = |cond: bool, ii: usize, jj: usize| -> f64 {
            if cond {
                self.get(ii, jj)
            } else {
                f64::INFINITY
            }
        };
        let w = nb(i > 0, i.wrapping_sub(1), j);
        let e = nb(i + 1 < self.spec.nx, i + 1, j);
        let s = nb(j > 0, i, j.wrapping_sub(1));
        let n = nb(j + 1 < self.spec.ny, i, j + 1);
        let gx = Self::one_sided(c, w, h).max(Self::one_sided(c, e, h)).max(0.0);
        let gy = Self::one_sided(c, s, h).max(Self::one_sided(c, n, h)).max(0.0);
        Ok(gx.hypot(gy))
    }

    /// Bilinear interpolation of the four surrounding nodes. Any `+inf`
    /// corner poisons the whole cell. Errors if `p` is outside the grid.
    pub fn bilinear(&self, p: Point) -> Result<f64> {
        let (i0, j0, fx, fy) = self.locate(p)?;
        let c00 = self.get(i0, j0);
        let c10 = self.get(i0 + 1, j0);
        let c01 = self.get(i0, j0 + 1);
        let c11 = self.get(i0 + 1, j0 + 1);
        if c00.is_infinite() || c10.is_infinite() || c01.is_infinite() || c11.is_infinite() {
            return Ok(f64::INFINITY);
        }
        Ok(c00 * (1.0 - fx) * (1.0 - fy)
            + c10 * fx * (1.0 - fy)
            + c01 * (1.0 - fx) * fy
            + c11 * fx * fy)
    }

    /// Cell containing `p` plus fractional offsets, snapped so that node
    /// coordinates reproduce node values exactly.
    pub(crate) fn locate(&self, p: Point) -> Result<(usize, usize, f64, f64)> {
        if !self.spec.contains(p) {
            return Err(Error::PointOutOfBounds { x: p.x, y: p.y });
        }
        let split = |t: f64, n: usize| -> (usize, f64) {
            let mut i0 = t.floor() as isize;
            if i0 < 0 {
                i0 = 0;
            }
            let mut i0 = i0 as usize;
            if i0 > n - 2 {
                i0 = n - 2;
            }
            let mut f = t - i0 as f64;
            if f < 1e-9 {
                f = 0.0;
            } else if f > 1.0 - 1e-9 {
                f = 1.0;
            }
            (i0, f)
        };
        let (i0, fx) = split((p.x - self.spec.origin.x) / self.spec.h, self.spec.nx);
        let (j0, fy) = split((p.y - self.spec.origin.y) / self.spec.h, self.spec.ny);
        Ok((i0, j0, fx, fy))
    }

    /// Minimizing node over the mask, ties broken by lowest linear index.
    /// `None` when every masked value is `+inf`.
    pub fn argmin_over(&self, mask: &DomainMask) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for idx in 0..self.values.len() {
            if !mask.inside[idx] {
                continue;
            }
            let v = self.values[idx];
            if !v.is_finite() {
                continue;
            }
            match best {
                Some((_, bv)) if bv <= v => {}
                _ => best = Some((idx, v)),
            }
        }
        best.map(|(idx, _)| idx)
    }

    /// Minimum over the mask, `+inf` when the masked field has no finite values.
    pub fn min_over(&self, mask: &DomainMask) -> f64 {
        self.argmin_over(mask)
            .map(|idx| self.values[idx])
            .unwrap_or(f64::INFINITY)
    }

    /// Plain-text CSV: header `# nx,ny,h,origin_x,origin_y`, then one row per
    /// `j` (ascending), comma-separated, `inf` for excluded nodes.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(
            w,
            "# {},{},{},{},{}",
            self.spec.nx, self.spec.ny, self.spec.h, self.spec.origin.x, self.spec.origin.y
        )?;
        let mut line = String::new();
        for j in 0..self.spec.ny {
            line.clear();
            for i in 0..self.spec.nx {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{}", self.get(i, j)));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<ScalarField> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty field file".into()))??;
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| Error::Config("field file missing `#` header".into()))?
            .trim();
        let parts: Vec<&str> = header.split(',').collect();
        if parts.len() != 5 {
            return Err(Error::Config(format!(
                "field header needs nx,ny,h,origin_x,origin_y, got `{header}`"
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad number `{s}`: {e}")))
        };
        let nx = parse(parts[0])? as usize;
        let ny = parse(parts[1])? as usize;
        let h = parse(parts[2])?;
        let origin = Point::new(parse(parts[3])?, parse(parts[4])?);
        let spec = GridSpec::new(nx, ny, origin, h)?;
        let mut values = Vec::with_capacity(spec.len());
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.split(',') {
                values.push(parse(tok)?);
            }
        }
        ScalarField::from_values(spec, values)
    }
}

/// Marks which nodes belong to the traversable domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMask {
    spec: GridSpec,
    inside: Vec<bool>,
}

impl DomainMask {
    /// Every node inside.
    pub fn all(spec: GridSpec) -> Self {
        DomainMask {
            spec,
            inside: vec![true; spec.len()],
        }
    }

    /// Errors if no node satisfies the predicate.
    pub fn from_fn(spec: GridSpec, pred: impl Fn(Point) -> bool) -> Result<Self> {
        let mut inside = Vec::with_capacity(spec.len());
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                inside.push(pred(spec.node(i, j)));
            }
        }
        if !inside.iter().any(|&b| b) {
            return Err(Error::EmptyMask);
        }
        Ok(DomainMask { spec, inside })
    }

    pub fn from_inside(spec: GridSpec, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != spec.len() {
            return Err(Error::InvalidGrid("mask length mismatch".into()));
        }
        if !inside.iter().any(|&b| b) {
            return Err(Error::EmptyMask);
        }
        Ok(DomainMask { spec, inside })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    #[inline]
    pub fn is_inside(&self, i: usize, j: usize) -> bool {
        self.inside[self.spec.idx(i, j)]
    }

    #[inline]
    pub fn inside_idx(&self, idx: usize) -> bool {
        self.inside[idx]
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    pub fn count_inside(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Intersection with another mask on the same grid; errors when empty.
    pub fn intersect(&self, other: &DomainMask) -> Result<DomainMask> {
        assert_eq!(self.spec, other.spec, "masks on different grids");
        let inside: Vec<bool> = self
            .inside
            .iter()
            .zip(&other.inside)
            .map(|(&a, &b)| a && b)
            .collect();
        DomainMask::from_inside(self.spec, inside)
    }

    /// Nearest inside node to `p` (Euclidean); errors if the mask is all outside.
    pub fn nearest_inside_node(&self, p: Point) -> Result<(usize, usize)> {
        let (i, j) = self.spec.nearest_node(p);
        if self.is_inside(i, j) {
            return Ok((i, j));
        }
        let mut best: Option<((usize, usize), f64)> = None;
        for idx in 0..self.inside.len() {
            if !self.inside[idx] {
                continue;
            }
            let (ii, jj) = self.spec.coords(idx);
            let d = self.spec.node(ii, jj).dist(p);
            match best {
                Some((_, bd)) if bd <= d => {}
                _ => best = Some(((ii, jj), d)),
            }
        }
        best.map(|(n, _)| n).ok_or(Error::EmptyMask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec_3x3() -> GridSpec {
        GridSpec::new(3, 3, Point::new(0.0, 0.0), 0.5).unwrap()
    }

    #[test]
    fn grid_spec_rejects_degenerate() {
        assert!(GridSpec::new(1, 3, Point::new(0.0, 0.0), 0.1).is_err());
        assert!(GridSpec::new(3, 3, Point::new(0.0, 0.0), 0.0).is_err());
        assert!(GridSpec::new(3, 3, Point::new(0.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn constant_formula_gives_all_ones() {
        let f = ScalarField::from_fn(spec_3x3(), |_| 1.0).unwrap();
        assert!(f.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn trig_speed_matches_hand_values() {
        let spec = GridSpec::unit_square(5).unwrap();
        let f = ScalarField::from_fn(spec, |p| {
            1.4 + 0.6
                * (2.0 * std::f64::consts::PI * p.x).cos()
                * (2.0 * std::f64::consts::PI * p.y).sin()
        })
        .unwrap();
        // cos(pi/2) = 0 at x = 0.25; cos(0)*sin(pi/2) = 1 at (0, 0.25).
        assert!((f.get(1, 1) - 1.4).abs() < 1e-12);
        assert!((f.get(0, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_values_pass_through() {
        let f = ScalarField::from_fn(spec_3x3(), |p| {
            if p.x > 0.6 {
                f64::INFINITY
            } else {
                1.0
            }
        })
        .unwrap();
        assert!(f.get(2, 0).is_infinite());
        assert_eq!(f.get(0, 0), 1.0);
    }

    #[test]
    fn nan_formula_rejected_with_node() {
        let err = ScalarField::from_fn(spec_3x3(), |p| {
            if p.x == 0.5 && p.y == 1.0 {
                f64::NAN
            } else {
                0.0
            }
        })
        .unwrap_err();
        match err {
            Error::NonFiniteNode { i, j } => assert_eq!((i, j), (1, 2)),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn upwind_gradient_constant_field_vanishes() {
        let f = ScalarField::constant(spec_3x3(), 42.0);
        assert_eq!(f.upwind_gradient_magnitude(1, 1).unwrap(), 0.0);
    }

    #[test]
    fn upwind_gradient_exact_for_linear() {
        let spec = GridSpec::new(5, 5, Point::new(0.0, 0.0), 0.1).unwrap();
        let f = ScalarField::from_fn(spec, |p| p.x).unwrap();
        assert!((f.upwind_gradient_magnitude(2, 2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn upwind_gradient_ramp_kink_selects_both_slopes() {
        let spec = GridSpec::new(11, 3, Point::new(0.0, 0.0), 0.1).unwrap();
        // tent ridge: at the peak both one-sided slopes enter the max and
        // give 1; at the V-shaped trough of the mirrored ramp they are both
        // rejected and the magnitude is 0
        let ridge = ScalarField::from_fn(spec, |p| -(p.x - 0.5).abs()).unwrap();
        assert!((ridge.upwind_gradient_magnitude(5, 1).unwrap() - 1.0).abs() < 1e-12);
        let trough = ScalarField::from_fn(spec, |p| (p.x - 0.5).abs()).unwrap();
        assert_eq!(trough.upwind_gradient_magnitude(5, 1).unwrap(), 0.0);
        // away from the kink the ramp slope is exact either way
        assert!((trough.upwind_gradient_magnitude(3, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn upwind_gradient_ignores_infinite_neighbors() {
        let spec = GridSpec::new(3, 3, Point::new(0.0, 0.0), 1.0).unwrap();
        let mut vals = vec![0.0; 9];
        vals[spec.idx(0, 1)] = f64::INFINITY;
        vals[spec.idx(2, 1)] = f64::INFINITY;
        vals[spec.idx(1, 0)] = 3.0;
        vals[spec.idx(1, 2)] = 7.0;
        vals[spec.idx(1, 1)] = 5.0;
        let f = ScalarField::from_values(spec, vals).unwrap();
        // x-neighbors are +inf -> only y contributes: max(5-3, 5-7, 0) = 2
        assert!((f.upwind_gradient_magnitude(1, 1).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn upwind_gradient_out_of_range() {
        let f = ScalarField::constant(spec_3x3(), 0.0);
        assert!(f.upwind_gradient_magnitude(3, 0).is_err());
    }

    #[test]
    fn bilinear_reproduces_nodes_and_midpoints() {
        let spec = spec_3x3();
        let f = ScalarField::from_fn(spec, |p| 1.0 + 4.0 * p.x).unwrap();
        for j in 0..3 {
            for i in 0..3 {
                assert_eq!(f.bilinear(spec.node(i, j)).unwrap(), f.get(i, j));
            }
        }
        // edge midpoint between corner values 1 and 3
        assert!((f.bilinear(Point::new(0.25, 0.0)).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bilinear_poisoned_by_infinite_corner() {
        let spec = spec_3x3();
        let f = ScalarField::from_fn(spec, |p| {
            if p.x == 1.0 && p.y == 1.0 {
                f64::INFINITY
            } else {
                1.0
            }
        })
        .unwrap();
        assert!(f.bilinear(Point::new(0.9, 0.9)).unwrap().is_infinite());
        assert!((f.bilinear(Point::new(0.1, 0.1)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bilinear_rejects_outside_points() {
        let f = ScalarField::constant(spec_3x3(), 0.0);
        assert!(f.bilinear(Point::new(-0.2, 0.0)).is_err());
        assert!(f.bilinear(Point::new(0.0, 1.2)).is_err());
    }

    #[test]
    fn mask_requires_an_inside_node() {
        assert!(DomainMask::from_fn(spec_3x3(), |_| false).is_err());
        let m = DomainMask::from_fn(spec_3x3(), |p| p.x < 0.6).unwrap();
        assert_eq!(m.count_inside(), 6);
    }

    #[test]
    fn nearest_inside_node_skips_outside() {
        let m = DomainMask::from_fn(spec_3x3(), |p| p.x > 0.4).unwrap();
        assert_eq!(m.nearest_inside_node(Point::new(0.0, 0.0)).unwrap(), (1, 0));
    }

    #[test]
    fn argmin_prefers_lowest_linear_index() {
        let spec = spec_3x3();
        let f = ScalarField::constant(spec, 2.0);
        let m = DomainMask::all(spec);
        assert_eq!(f.argmin_over(&m), Some(0));
    }

    #[test]
    fn csv_round_trip() {
        let spec = GridSpec::new(3, 2, Point::new(-1.0, 0.25), 0.125).unwrap();
        let f = ScalarField::from_fn(spec, |p| {
            if p.x > -0.8 {
                f64::INFINITY
            } else {
                p.x * 3.1 + p.y
            }
        })
        .unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = ScalarField::read_csv(&buf[..]).unwrap();
        assert_eq!(back.spec(), f.spec());
        assert_eq!(back.values(), f.values());
    }

    proptest! {
        #[test]
        fn from_fn_then_sample_at_node_is_identity(seed in 0u64..1000) {
            let spec = GridSpec::new(4, 5, Point::new(0.3, -0.2), 0.25).unwrap();
            let f = ScalarField::from_fn(spec, |p| {
                (p.x * 13.7 + seed as f64).sin() * (p.y * 7.1).cos()
            }).unwrap();
            for j in 0..spec.ny {
                for i in 0..spec.nx {
                    prop_assert_eq!(f.bilinear(spec.node(i, j)).unwrap(), f.get(i, j));
                }
            }
        }

        #[test]
        fn upwind_gradient_exact_for_affine(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -2.0f64..2.0) {
            let spec = GridSpec::new(6, 6, Point::new(0.0, 0.0), 0.2).unwrap();
            let f = ScalarField::from_fn(spec, |p| a * p.x + b * p.y + c).unwrap();
            let want = a.hypot(b);
            for j in 1..5 {
                for i in 1..5 {
                    let g = f.upwind_gradient_magnitude(i, j).unwrap();
                    prop_assert!((g - want).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn bilinear_monotone_in_corner_values(
            base in proptest::collection::vec(0.0f64..5.0, 4),
            bump in 0.0f64..3.0,
            corner in 0usize..4,
            fx in 0.0f64..1.0,
            fy in 0.0f64..1.0,
        ) {
            let spec = GridSpec::new(2, 2, Point::new(0.0, 0.0), 1.0).unwrap();
            let f0 = ScalarField::from_values(spec, base.clone()).unwrap();
            let mut raised = base.clone();
            raised[corner] += bump;
            let f1 = ScalarField::from_values(spec, raised).unwrap();
            let p = Point::new(fx, fy);
            prop_assert!(f1.bilinear(p).unwrap() >= f0.bilinear(p).unwrap() - 1e-12);
        }
    }
}
