//! Uniform grids, grid functions and the deterministic integrators built on them.
//!
//! A [`GridFunction`] stores node values. Without a support hint it is the
//! piecewise-linear interpolant of those values over the whole grid. With a
//! support hint `[a, b]` (both endpoints grid nodes) it is that interpolant
//! restricted to `[a, b]` and zero elsewhere, so indicator-type functions
//! integrate without an O(h) boundary ramp.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeVector;

/// Relative tolerance (in units of `h`) used to snap a real onto a grid node.
const NODE_SNAP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    t0: f64,
    h: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(t0: f64, h: f64, n_points: usize) -> Result<Self> {
        if !(t0.is_finite() && t0 >= 0.0) {
            return Err(Error::InvalidGrid(format!("t0 must be finite and >= 0, got {t0}")));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidGrid(format!("step must be finite and > 0, got {h}")));
        }
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {n_points}")));
        }
        Ok(Self { t0, h, n_points })
    }

    /// Grid from `t0` to `t_end` with step `h`; `t_end - t0` must be a multiple of `h`.
    pub fn spanning(t0: f64, t_end: f64, h: f64) -> Result<Self> {
        if !(t_end > t0) {
            return Err(Error::InvalidGrid(format!("empty interval [{t0}, {t_end}]")));
        }
        let steps = (t_end - t0) / h;
        let rounded = steps.round();
        if (steps - rounded).abs() > NODE_SNAP * steps.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "interval length {} is not a multiple of the step {h}",
                t_end - t0
            )));
        }
        Self::new(t0, h, rounded as usize + 1)
    }

    /// Grid from `t0` to `t_end` with `n_points` equally spaced nodes.
    pub fn with_points(t0: f64, t_end: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 || !(t_end > t0) {
            return Err(Error::InvalidGrid(format!("cannot place {n_points} points on [{t0}, {t_end}]")));
        }
        Self::new(t0, (t_end - t0) / (n_points - 1) as f64, n_points)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn node(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.h
    }

    pub fn end(&self) -> f64 {
        self.node(self.n_points - 1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.node(i))
    }

    /// Index of the node equal to `x` (up to a tiny fraction of `h`).
    pub fn index_of(&self, x: f64) -> Result<usize> {
        let pos = (x - self.t0) / self.h;
        let i = pos.round();
        if !(pos.is_finite() && (pos - i).abs() <= NODE_SNAP * pos.abs().max(1.0)) || i < 0.0 {
            return Err(Error::OffGrid { value: x });
        }
        let i = i as usize;
        if i >= self.n_points {
            return Err(Error::OffGrid { value: x });
        }
        Ok(i)
    }

    /// Index of the cell `[t_i, t_{i+1}]` containing `s`, clamped to the grid.
    pub fn cell_of(&self, s: f64) -> usize {
        let pos = ((s - self.t0) / self.h).floor();
        if pos <= 0.0 {
            0
        } else {
            (pos as usize).min(self.n_points - 2)
        }
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.n_points == other.n_points && self.t0 == other.t0 && self.h == other.h
    }

    fn require_same(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Support `[a, b]` of a grid function, stored together with its node indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub a: f64,
    pub b: f64,
    pub lo: usize,
    pub hi: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    support: Option<Support>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, support: Option<(f64, f64)>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.n_points()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let support = support.map(|(a, b)| resolve_support(&grid, a, b)).transpose()?;
        if let Some(s) = support {
            let outside = (0..s.lo).chain(s.hi + 1..grid.n_points());
            if let Some(i) = outside.into_iter().find(|&i| values[i] != 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "value at t = {} lies outside the support [{}, {}] but is nonzero",
                    grid.node(i),
                    s.a,
                    s.b
                )));
            }
        }
        Ok(Self { grid, values, support })
    }

    /// Samples `f` at the grid nodes, zeroing nodes outside the support.
    pub fn from_fn(grid: Grid, support: Option<(f64, f64)>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let resolved = support.map(|(a, b)| resolve_support(&grid, a, b)).transpose()?;
        let values = (0..grid.n_points())
            .map(|i| match resolved {
                Some(s) if i < s.lo || i > s.hi => 0.0,
                _ => f(grid.node(i)),
            })
            .collect();
        Self::new(grid, values, support)
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.n_points()], support: None }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> Option<Support> {
        self.support
    }

    /// Node index range `[lo, hi]` over which the function is integrated.
    pub fn active_range(&self) -> (usize, usize) {
        match self.support {
            Some(s) => (s.lo, s.hi),
            None => (0, self.grid.n_points() - 1),
        }
    }

    /// Value at an arbitrary point: linear interpolation inside the active
    /// range, zero outside it.
    pub fn eval(&self, s: f64) -> f64 {
        let (lo, hi) = self.active_range();
        let (left, right) = (self.grid.node(lo), self.grid.node(hi));
        if s < left || s > right {
            return 0.0;
        }
        if lo == hi {
            return self.values[lo];
        }
        let i = self.grid.cell_of(s).clamp(lo, hi - 1);
        let t = self.grid.node(i);
        let w = (s - t) / self.grid.h();
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Maps node values, keeping grid and support. `op(0)` must be 0 when a support is set.
    pub fn map(&self, op: impl Fn(f64) -> f64) -> Self {
        let support = self.support;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| match support {
                Some(s) if i < s.lo || i > s.hi => 0.0,
                _ => op(v),
            })
            .collect();
        Self { grid: self.grid, values, support }
    }

    /// Like [`map`](Self::map) but also passes the node position.
    pub fn map_with_t(&self, op: impl Fn(f64, f64) -> f64) -> Self {
        let support = self.support;
        let grid = self.grid;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| match support {
                Some(s) if i < s.lo || i > s.hi => 0.0,
                _ => op(grid.node(i), v),
            })
            .collect();
        Self { grid, values, support }
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `c1·self + c2·other`. The support of the result is the hull of both
    /// supports, or none if either operand is unsupported.
    pub fn linear_combination(&self, c1: f64, other: &Self, c2: f64) -> Result<Self> {
        self.grid.require_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&x, &y)| c1 * x + c2 * y).collect();
        let support = match (self.support, other.support) {
            (Some(s), Some(t)) => Some(hull(s, t)),
            _ => None,
        };
        Ok(Self { grid: self.grid, values, support })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.linear_combination(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.linear_combination(1.0, other, -1.0)
    }

    /// Pointwise product; the support is the intersection of the supports.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.grid.require_same(&other.grid)?;
        let support = match (self.support, other.support) {
            (Some(s), Some(t)) => intersect(s, t),
            (Some(s), None) | (None, Some(s)) => Some(s),
            (None, None) => None,
        };
        let mut values: Vec<f64> = self.values.iter().zip(&other.values).map(|(&x, &y)| x * y).collect();
        let support = match (self.support.is_some() || other.support.is_some(), support) {
            (true, None) => {
                values.iter_mut().for_each(|v| *v = 0.0);
                None
            }
            (_, s) => s,
        };
        Ok(Self { grid: self.grid, values, support })
    }

    /// Pointwise minimum of node values.
    pub fn min_with(&self, other: &Self) -> Result<Self> {
        self.grid.require_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&x, &y)| x.min(y)).collect();
        let support = match (self.support, other.support) {
            (Some(s), Some(t)) => Some(hull(s, t)),
            _ => None,
        };
        Ok(Self { grid: self.grid, values, support })
    }

    /// `f · 1_{[lo, hi]}` with `lo`, `hi` grid nodes (clamped to the grid).
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self> {
        let lo = lo.max(self.grid.t0());
        let hi = hi.min(self.grid.end());
        if hi < lo {
            return Ok(Self::zeros(self.grid));
        }
        let window = resolve_support(&self.grid, lo, hi)?;
        let support = match self.support {
            Some(s) => intersect(s, window),
            None => Some(window),
        };
        let Some(support) = support else {
            return Ok(Self::zeros(self.grid));
        };
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| if i < support.lo || i > support.hi { 0.0 } else { v })
            .collect();
        Ok(Self { grid: self.grid, values, support: Some(support) })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// CSV with header `t,value` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([fmt_f64(self.grid.node(i)), fmt_f64(*v)])?;
        }
        w.flush()
    }
}

fn resolve_support(grid: &Grid, a: f64, b: f64) -> Result<Support> {
    if !(a <= b) {
        return Err(Error::InvalidParameter(format!("support [{a}, {b}] is empty")));
    }
    let lo = grid.index_of(a)?;
    let hi = grid.index_of(b)?;
    Ok(Support { a: grid.node(lo), b: grid.node(hi), lo, hi })
}

fn hull(s: Support, t: Support) -> Support {
    let (a, lo) = if s.lo <= t.lo { (s.a, s.lo) } else { (t.a, t.lo) };
    let (b, hi) = if s.hi >= t.hi { (s.b, s.hi) } else { (t.b, t.hi) };
    Support { a, b, lo, hi }
}

fn intersect(s: Support, t: Support) -> Option<Support> {
    let (a, lo) = if s.lo >= t.lo { (s.a, s.lo) } else { (t.a, t.lo) };
    let (b, hi) = if s.hi <= t.hi { (s.b, s.hi) } else { (t.b, t.hi) };
    (lo <= hi).then_some(Support { a, b, lo, hi })
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Trapezoid,
    Simpson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StieltjesRule {
    LeftPoint,
    Midpoint,
}

/// Composite rule over the active range of `f`.
pub fn integrate(f: &GridFunction, rule: Rule) -> Result<f64> {
    let (lo, hi) = f.active_range();
    let h = f.grid().h();
    let v = f.values();
    match rule {
        Rule::Trapezoid => {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += 0.5 * h * (v[i] + v[i + 1]);
            }
            Ok(acc)
        }
        Rule::Simpson => {
            let points = hi - lo + 1;
            if points % 2 == 0 || points < 3 {
                return Err(Error::InvalidGrid(format!("Simpson needs an odd number (>= 3) of points, got {points}")));
            }
            let mut acc = 0.0;
            for i in (lo..hi).step_by(2) {
                acc += h / 3.0 * (v[i] + 4.0 * v[i + 1] + v[i + 2]);
            }
            Ok(acc)
        }
    }
}

/// Running trapezoid integral `F(t_i) = ∫_{t0}^{t_i} f`, with `F(t0) = 0`.
pub fn cumulative_integral(f: &GridFunction) -> GridFunction {
    let grid = *f.grid();
    let (lo, hi) = f.active_range();
    let h = grid.h();
    let v = f.values();
    let mut out = vec![0.0; grid.n_points()];
    let mut acc = 0.0;
    for i in lo..hi {
        acc += 0.5 * h * (v[i] + v[i + 1]);
        out[i + 1] = acc;
    }
    for slot in out.iter_mut().skip(hi + 1) {
        *slot = acc;
    }
    GridFunction { grid, values: out, support: None }
}

/// Riemann–Stieltjes sum of `g` against `path` over the cells lying in the
/// active range of `g`.
pub fn stieltjes_integral(g: &GridFunction, path: &GridFunction, rule: StieltjesRule) -> Result<f64> {
    g.grid().require_same(path.grid())?;
    let (lo, hi) = g.active_range();
    let gv = g.values();
    let pv = path.values();
    let mut acc = 0.0;
    for i in lo..hi {
        let weight = match rule {
            StieltjesRule::LeftPoint => gv[i],
            StieltjesRule::Midpoint => 0.5 * (gv[i] + gv[i + 1]),
        };
        acc += weight * (pv[i + 1] - pv[i]);
    }
    Ok(acc)
}

/// Grid function with [`LatticeVector`] values, stored component by component.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGridFunction {
    components: Vec<GridFunction>,
}

impl LatticeGridFunction {
    pub fn from_components(components: Vec<GridFunction>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidParameter("lattice-valued function needs >= 1 component".into()))?;
        for c in &components[1..] {
            first.grid().require_same(c.grid())?;
            if c.support() != first.support() {
                return Err(Error::InvalidParameter("components must share one support".into()));
            }
        }
        Ok(Self { components })
    }

    pub fn from_nodes(grid: Grid, values: &[LatticeVector], support: Option<(f64, f64)>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!("{} values for {} points", values.len(), grid.n_points())));
        }
        let dim = values.first().map(LatticeVector::dim).unwrap_or(1);
        if let Some(bad) = values.iter().find(|v| v.dim() != dim) {
            return Err(Error::DimensionMismatch { left: dim, right: bad.dim() });
        }
        let components = (0..dim)
            .map(|d| GridFunction::new(grid, values.iter().map(|v| v.values()[d]).collect(), support))
            .collect::<Result<Vec<_>>>()?;
        Self::from_components(components)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    pub fn component(&self, d: usize) -> &GridFunction {
        &self.components[d]
    }

    pub fn components(&self) -> &[GridFunction] {
        &self.components
    }

    pub fn value_at_node(&self, i: usize) -> LatticeVector {
        LatticeVector::new(self.components.iter().map(|c| c.values()[i]).collect())
            .expect("components hold finite values")
    }

    pub fn integrate(&self, rule: Rule) -> Result<LatticeVector> {
        let parts = self.components.iter().map(|c| integrate(c, rule)).collect::<Result<Vec<_>>>()?;
        LatticeVector::new(parts)
    }

    /// CSV with header `t,v0,v1,...`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.dim()).map(|d| format!("v{d}")));
        w.write_record(&header)?;
        let grid = *self.grid();
        for i in 0..grid.n_points() {
            let mut row = vec![fmt_f64(grid.node(i))];
            row.extend(self.components.iter().map(|c| fmt_f64(c.values()[i])));
            w.write_record(&row)?;
        }
        w.flush()
    }
}
