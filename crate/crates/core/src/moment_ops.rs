//! Moment kernels `M_n(w) = n wⁿ 1_{(0,1)}(w)` and the averaging operators
//!
//! ```text
//! T_n f(s) = ∫₀^∞ M_n(t/s) f(t) dt/t = (n / sⁿ) ∫₀ˢ t^{n-1} f(t) dt
//! ```
//!
//! The inner integral is evaluated by product integration: `f` is the
//! piecewise-linear interpolant of its node values and the power weight is
//! integrated exactly on every cell. All quantities are carried in scaled
//! form `G(s) = s^{-ν} ∫₀ˢ t^{ν-1} f(t) dt`, which never overflows and
//! reproduces constants and linear functions to rounding error.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{
    integrate, stieltjes_integral, Grid, GridFunction, LatticeGridFunction, Rule, StieltjesRule, Support,
};

/// `M_n(w)`; the support is the open interval `(0, 1)`.
pub fn kernel_eval(n: u32, w: f64) -> f64 {
    if w > 0.0 && w < 1.0 {
        n as f64 * w.powi(n as i32)
    } else {
        0.0
    }
}

/// Scaled running integral `G(s) = s^{-ν} ∫₀ˢ t^{ν-1} f(t) dt` of a grid function.
#[derive(Debug, Clone)]
pub struct ScaledCumulative {
    nu: f64,
    f: GridFunction,
    scaled: Vec<f64>,
}

impl ScaledCumulative {
    pub fn new(f: &GridFunction, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Domain(format!("exponent must be positive, got {nu}")));
        }
        let grid = *f.grid();
        let (lo, hi) = f.active_range();
        let v = f.values();
        let mut scaled = vec![0.0; grid.n_points()];
        for i in lo..hi {
            let (t_i, t_j) = (grid.node(i), grid.node(i + 1));
            let (alpha, beta) = cell_line(t_i, t_j, v[i], v[i + 1]);
            scaled[i + 1] = advance(scaled[i], t_i, t_j, alpha, beta, nu);
        }
        let end = grid.node(hi);
        for i in hi + 1..grid.n_points() {
            scaled[i] = scaled[hi] * (end / grid.node(i)).powf(nu);
        }
        Ok(Self { nu, f: f.clone(), scaled })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `G` at node `i` of the input grid.
    pub fn at_node(&self, i: usize) -> f64 {
        self.scaled[i]
    }

    /// `G(s)` for any `s >= 0`. Returns `None` at `s = 0` when `f` does not
    /// vanish near the origin (the scaled integral has no value there).
    pub fn at(&self, s: f64) -> Option<f64> {
        let grid = self.f.grid();
        let (lo, hi) = self.f.active_range();
        let (left, right) = (grid.node(lo), grid.node(hi));
        if s <= left {
            return if left > 0.0 || s > 0.0 { Some(0.0) } else { None };
        }
        if s >= right {
            return Some(self.scaled[hi] * (right / s).powf(self.nu));
        }
        let i = grid.cell_of(s).clamp(lo, hi - 1);
        let t_i = grid.node(i);
        if s == t_i {
            return Some(self.scaled[i]);
        }
        let v = self.f.values();
        let (alpha, beta) = cell_line(t_i, grid.node(i + 1), v[i], v[i + 1]);
        Some(advance(self.scaled[i], t_i, s, alpha, beta, self.nu))
    }
}

/// Coefficients of the line `alpha + beta t` through `(t_i, f_i)`, `(t_j, f_j)`.
fn cell_line(t_i: f64, t_j: f64, f_i: f64, f_j: f64) -> (f64, f64) {
    let beta = (f_j - f_i) / (t_j - t_i);
    (f_i - beta * t_i, beta)
}

/// `G(t_j)` from `G(t_i)` when `f = alpha + beta t` on `[t_i, t_j]`:
/// `G_j = G_i r^ν + alpha (1 - r^ν)/ν + beta t_j (1 - r^{ν+1})/(ν+1)`, `r = t_i / t_j`.
fn advance(g_i: f64, t_i: f64, t_j: f64, alpha: f64, beta: f64, nu: f64) -> f64 {
    let (pow_nu, one_minus_nu, one_minus_nu1) = if t_i == 0.0 {
        (0.0, 1.0, 1.0)
    } else {
        let ln_r = -((t_j - t_i) / t_i).ln_1p();
        (
            (nu * ln_r).exp(),
            -(nu * ln_r).exp_m1(),
            -((nu + 1.0) * ln_r).exp_m1(),
        )
    };
    g_i * pow_nu + alpha * one_minus_nu / nu + beta * t_j * one_minus_nu1 / (nu + 1.0)
}

/// `T_n f` on an evaluation grid together with the constants the bounds use.
#[derive(Debug, Clone)]
pub struct MomentTransform {
    n: u32,
    support: Support,
    input: GridFunction,
    output: GridFunction,
    cumulative: ScaledCumulative,
    m_f: f64,
}

/// Computes `T_n f` on `eval_grid`.
///
/// `f` needs a support hint `[a, b]`; `a = 0` is accepted so that functions
/// supported on the whole inner interval can be transformed. Beyond `b` the
/// closed form `n K_n / sⁿ` is used.
pub fn transform(f: &GridFunction, n: u32, eval_grid: &Grid) -> Result<MomentTransform> {
    if n == 0 {
        return Err(Error::Domain("moment order n must be >= 1".into()));
    }
    let support = f
        .support()
        .ok_or_else(|| Error::InvalidParameter("transform needs a support hint [a, b]".into()))?;
    if support.a < 0.0 {
        return Err(Error::Domain(format!("support must lie in [0, inf), got a = {}", support.a)));
    }
    if eval_grid.t0() == 0.0 && support.a == 0.0 {
        return Err(Error::Domain("evaluation at s = 0 needs a support bounded away from 0".into()));
    }
    let cumulative = ScaledCumulative::new(f, n as f64)?;
    let nf = n as f64;
    let values = eval_grid
        .nodes()
        .map(|s| cumulative.at(s).map(|g| nf * g).unwrap_or(0.0))
        .collect();
    let output = GridFunction::new(*eval_grid, values, None)?;
    Ok(MomentTransform { n, support, input: f.clone(), output, cumulative, m_f: f.max_abs() })
}

/// Componentwise transform of a lattice-valued function.
pub fn transform_lattice(f: &LatticeGridFunction, n: u32, eval_grid: &Grid) -> Result<LatticeGridFunction> {
    let parts = f
        .components()
        .iter()
        .map(|c| transform(c, n, eval_grid).map(|t| t.output))
        .collect::<Result<Vec<_>>>()?;
    LatticeGridFunction::from_components(parts)
}

impl MomentTransform {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn a(&self) -> f64 {
        self.support.a
    }

    pub fn b(&self) -> f64 {
        self.support.b
    }

    pub fn input(&self) -> &GridFunction {
        &self.input
    }

    pub fn output(&self) -> &GridFunction {
        &self.output
    }

    pub fn into_output(self) -> GridFunction {
        self.output
    }

    /// Grid maximum of `|f|`.
    pub fn m_f(&self) -> f64 {
        self.m_f
    }

    /// `K_n = ∫₀ᵇ t^{n-1} f(t) dt`.
    pub fn k_n(&self) -> f64 {
        self.scaled_at_b() * self.b().powi(self.n as i32)
    }

    fn scaled_at_b(&self) -> f64 {
        self.cumulative.at_node(self.support.hi)
    }

    /// `T_n f(s)` at an arbitrary `s > 0`.
    pub fn value_at(&self, s: f64) -> f64 {
        self.cumulative.at(s).map(|g| self.n as f64 * g).unwrap_or(0.0)
    }

    /// Closed-form branch `n K_n / sⁿ`, valid for `s >= b`.
    pub fn tail_value(&self, s: f64) -> f64 {
        self.n as f64 * self.scaled_at_b() * (self.b() / s).powi(self.n as i32)
    }

    /// `∫_x^∞ T_n f(s) ds` for `x >= b` (requires `n >= 2`).
    pub fn tail_integral_from(&self, x: f64) -> Result<f64> {
        self.require_integrable()?;
        let n = self.n as f64;
        let b = self.b();
        Ok(n * self.scaled_at_b() * b * (b / x).powi(self.n as i32 - 1) / (n - 1.0))
    }

    fn require_integrable(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Domain("T_1 f has a non-integrable 1/s tail; need n >= 2".into()));
        }
        Ok(())
    }

    /// `f(s)` under the same piecewise-linear model used for the transform.
    pub fn input_at(&self, s: f64) -> f64 {
        self.input.eval(s)
    }
}

/// `∫₀^∞ T_n f`: trapezoid over the output nodes up to `b` plus the exact tail.
pub fn total_integral(t: &MomentTransform) -> Result<f64> {
    t.require_integrable()?;
    let grid = t.output.grid();
    if grid.t0() > t.a() {
        return Err(Error::GridMismatch(format!(
            "evaluation grid starts at {} after the support start {}",
            grid.t0(),
            t.a()
        )));
    }
    let b_index = grid.index_of(t.b())?;
    let window = t.output.restrict(grid.t0(), grid.node(b_index))?;
    Ok(integrate(&window, Rule::Trapezoid)? + t.tail_integral_from(t.b())?)
}

/// `|∫₀^∞ T_n f − n/(n−1) ∫ f|`, evaluated on the input grid of `f`.
pub fn consfubini_residual(f: &GridFunction, n: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain("the integral identity needs n >= 2".into()));
    }
    let support = f
        .support()
        .ok_or_else(|| Error::InvalidParameter("needs a support hint [a, b]".into()))?;
    if support.a <= 0.0 {
        return Err(Error::Domain(format!("support must start at a > 0, got {}", support.a)));
    }
    let t = transform(f, n, f.grid())?;
    let nf = n as f64;
    Ok((total_integral(&t)? - nf / (nf - 1.0) * integrate(f, Rule::Trapezoid)?).abs())
}

/// `(T_n f)'(s) = (n/s)(f(s) − T_n f(s))` on the evaluation grid.
pub fn derivative(t: &MomentTransform) -> GridFunction {
    let n = t.n as f64;
    let grid = *t.output.grid();
    let values = grid
        .nodes()
        .zip(t.output.values())
        .map(|(s, &tv)| if s > 0.0 { n / s * (t.input_at(s) - tv) } else { 0.0 })
        .collect();
    GridFunction::new(grid, values, None).expect("derivative values are finite")
}

/// Largest gap between the central difference of `T_n f` and
/// [`derivative`] over interior nodes whose stencil does not straddle a
/// support endpoint of `f` (where `(T_n f)''` jumps).
pub fn derivative_fd_deviation(t: &MomentTransform) -> f64 {
    let d = derivative(t);
    let grid = t.output.grid();
    let h = grid.h();
    let out = t.output.values();
    let kinks = [t.a(), t.b()];
    (1..grid.n_points() - 1)
        .filter(|&i| {
            let s = grid.node(i);
            kinks.iter().all(|&k| (s - k).abs() > h * (1.0 + 1e-9))
        })
        .map(|i| ((out[i + 1] - out[i - 1]) / (2.0 * h) - d.values()[i]).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: u32,
    pub a: f64,
    pub b: f64,
    pub m_f: f64,
    /// `M(1+n)` with `M = n bⁿ M_f`.
    pub lipschitz_constant: f64,
    /// The Lipschitz statement is proved for `a > 1`.
    pub lipschitz_applicable: bool,
    pub lipschitz_ok: bool,
    pub pairs_checked: usize,
    pub lipschitz_violations: usize,
    pub worst_lipschitz_ratio: f64,
    pub lipschitz_witness: Option<(f64, f64)>,
    pub tail_ok: bool,
    pub tail_nodes_checked: usize,
    pub worst_tail_excess: f64,
    pub uniform_error: f64,
    pub l1_error: Option<f64>,
    /// `M_f b / 2^{n-1}`, the analytic bound on `∫_{2b}^∞ |T_n f|`.
    pub equi_ac_tail: f64,
    pub tail_mass_beyond_2b: Option<f64>,
    pub equi_ac_ok: bool,
}

pub const LIPSCHITZ_SLACK: f64 = 1e-9;
pub const TAIL_SLACK: f64 = 1e-12;

/// Checks the Lipschitz, tail and equi-absolute-continuity bounds on `T_n f`
/// and reports the uniform and L1 approximation errors over the evaluation
/// window. Node pairs for the Lipschitz test are drawn from a seeded stream.
pub fn bound_checks(t: &MomentTransform, pair_samples: usize, seed: u64) -> BoundReport {
    let n = t.n;
    let nf = n as f64;
    let (a, b, m_f) = (t.a(), t.b(), t.m_f);
    let big_m = nf * b.powi(n as i32) * m_f;
    let lipschitz_constant = big_m * (1.0 + nf);
    let grid = *t.output.grid();
    let out = t.output.values();
    let count = grid.n_points();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = || ((rng.next_u64() as u128 * count as u128) >> 64) as usize;
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    let mut witness = None;
    for _ in 0..pair_samples {
        let (i, j) = (pick(), pick());
        if i == j {
            continue;
        }
        let ds = (grid.node(i) - grid.node(j)).abs();
        let dt = (out[i] - out[j]).abs();
        let ratio = dt / (lipschitz_constant * ds).max(f64::MIN_POSITIVE);
        if ratio > worst_ratio {
            worst_ratio = ratio;
        }
        if dt > lipschitz_constant * ds + LIPSCHITZ_SLACK {
            violations += 1;
            witness.get_or_insert((grid.node(i), grid.node(j)));
        }
    }

    let mut tail_nodes = 0;
    let mut worst_tail_excess = f64::NEG_INFINITY;
    for (s, &v) in grid.nodes().zip(out) {
        if s > b {
            tail_nodes += 1;
            worst_tail_excess = worst_tail_excess.max(v.abs() - m_f * (b / s).powi(n as i32));
        }
    }
    let tail_ok = tail_nodes == 0 || worst_tail_excess <= TAIL_SLACK;

    let errors: Vec<f64> = grid.nodes().zip(out).map(|(s, &v)| (v - t.input_at(s)).abs()).collect();
    let uniform_error = errors.iter().copied().fold(0.0, f64::max);
    let l1_error = if n >= 2 && grid.end() >= b {
        let window = GridFunction::new(grid, errors, None).expect("finite errors");
        let grid_part = integrate(&window, Rule::Trapezoid).expect("trapezoid never fails");
        t.tail_integral_from(grid.end()).ok().map(|tail| grid_part + tail.abs())
    } else {
        None
    };

    let equi_ac_tail = m_f * b / 2f64.powi(n as i32 - 1);
    let tail_mass_beyond_2b = t.tail_integral_from(2.0 * b).ok().map(f64::abs);
    let equi_ac_ok = tail_mass_beyond_2b.is_none_or(|m| m <= equi_ac_tail + TAIL_SLACK);

    BoundReport {
        n,
        a,
        b,
        m_f,
        lipschitz_constant,
        lipschitz_applicable: a > 1.0,
        lipschitz_ok: violations == 0,
        pairs_checked: pair_samples,
        lipschitz_violations: violations,
        worst_lipschitz_ratio: worst_ratio,
        lipschitz_witness: witness,
        tail_ok,
        tail_nodes_checked: tail_nodes,
        worst_tail_excess: if tail_nodes == 0 { 0.0 } else { worst_tail_excess },
        uniform_error,
        l1_error,
        equi_ac_tail,
        tail_mass_beyond_2b,
        equi_ac_ok,
    }
}

/// Solves `s φ'(s) + ν φ(s) = ν f(s)` by `φ(s) = s^{-ν}(c + ν ∫₀ˢ f(t) t^{ν-1} dt)`.
pub fn ode_solve(nu: f64, f: &GridFunction, c: f64, eval_grid: &Grid) -> Result<GridFunction> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::Domain(format!("nu must be positive, got {nu}")));
    }
    if eval_grid.t0() <= 0.0 {
        return Err(Error::Domain("the ODE solution is evaluated on s > 0 only".into()));
    }
    let cumulative = ScaledCumulative::new(f, nu)?;
    let values = eval_grid
        .nodes()
        .map(|s| {
            let g = cumulative.at(s).expect("s > 0");
            c * s.powf(-nu) + nu * g
        })
        .collect();
    GridFunction::new(*eval_grid, values, None)
}

/// `s φ'(s) + ν φ(s) − ν f(s)` at interior nodes, with `φ'` by central differences.
/// The first and last nodes are reported as 0.
pub fn ode_residual(nu: f64, f: &GridFunction, phi: &GridFunction) -> GridFunction {
    let grid = *phi.grid();
    let h = grid.h();
    let p = phi.values();
    let last = grid.n_points() - 1;
    let values = (0..grid.n_points())
        .map(|i| {
            if i == 0 || i == last {
                return 0.0;
            }
            let s = grid.node(i);
            let dphi = (p[i + 1] - p[i - 1]) / (2.0 * h);
            s * dphi + nu * p[i] - nu * f.eval(s)
        })
        .collect();
    GridFunction::new(grid, values, None).expect("finite residual")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakRow {
    pub n: u32,
    /// `|∫ T_n f · w' − ∫ f · w'|`
    pub delta_weak: f64,
    /// `|∫ w d(T_n f) − ∫ w df|`
    pub delta_stieltjes: f64,
}

/// Central differences of `w` (one-sided at the ends).
pub fn central_derivative(w: &GridFunction) -> GridFunction {
    let grid = *w.grid();
    let h = grid.h();
    let v = w.values();
    let last = grid.n_points() - 1;
    let values = (0..=last)
        .map(|i| match i {
            0 => (v[1] - v[0]) / h,
            i if i == last => (v[last] - v[last - 1]) / h,
            i => (v[i + 1] - v[i - 1]) / (2.0 * h),
        })
        .collect();
    GridFunction::new(grid, values, None).expect("finite differences")
}

/// Compares `T_n f` with `f` tested against a compactly supported `w`, for every `n` in `n_list`.
pub fn weak_convergence_experiment(f: &GridFunction, w: &GridFunction, n_list: &[u32]) -> Result<Vec<WeakRow>> {
    let grid = *f.grid();
    if !grid.same_as(w.grid()) {
        return Err(Error::GridMismatch("f and w must share a grid".into()));
    }
    let w_prime = central_derivative(w);
    let base_weak = integrate(&f.mul(&w_prime)?, Rule::Trapezoid)?;
    let base_stieltjes = stieltjes_integral(w, f, StieltjesRule::Midpoint)?;
    n_list
        .iter()
        .map(|&n| {
            let t = transform(f, n, &grid)?;
            let tn = t.output();
            let weak = integrate(&tn.mul(&w_prime)?, Rule::Trapezoid)?;
            let stieltjes = stieltjes_integral(w, tn, StieltjesRule::Midpoint)?;
            Ok(WeakRow {
                n,
                delta_weak: (weak - base_weak).abs(),
                delta_stieltjes: (stieltjes - base_stieltjes).abs(),
            })
        })
        .collect()
}

/// The family `n ↦ T_n f − f` on `eval_grid`, for the Vitali decay experiment.
pub fn approximation_error_family(f: &GridFunction, n_list: &[u32], eval_grid: &Grid) -> Result<Vec<(u32, GridFunction)>> {
    n_list
        .iter()
        .map(|&n| {
            let t = transform(f, n, eval_grid)?;
            let values = eval_grid.nodes().zip(t.output.values()).map(|(s, &v)| v - t.input_at(s)).collect();
            Ok((n, GridFunction::new(*eval_grid, values, None)?))
        })
        .collect()
}
