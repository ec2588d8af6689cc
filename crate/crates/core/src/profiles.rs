//! Built-in test functions on `[a, b]`, with closed forms where they exist.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{Grid, GridFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `f ≡ 0` (support hint `[a, b]`).
    Zero,
    /// `1_{[a,b]}`
    Indicator,
    /// `(t − a)(b − t)` on `[a, b]`
    Bump,
    /// `sin t` on `[a, b]`
    Sin,
    /// `t` on `[a, b]`
    Ramp,
    /// `((t − a)(b − t))²` on `[a, b]`
    SmoothBump,
}

pub const ALL_PROFILES: [Profile; 6] =
    [Profile::Zero, Profile::Indicator, Profile::Bump, Profile::Sin, Profile::Ramp, Profile::SmoothBump];

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Zero => "zero",
            Profile::Indicator => "indicator",
            Profile::Bump => "bump",
            Profile::Sin => "sin",
            Profile::Ramp => "ramp",
            Profile::SmoothBump => "smooth-bump",
        }
    }

    /// Pointwise value on `[a, b]` (the profile is zero outside).
    pub fn value(self, a: f64, b: f64, t: f64) -> f64 {
        if t < a || t > b {
            return 0.0;
        }
        match self {
            Profile::Zero => 0.0,
            Profile::Indicator => 1.0,
            Profile::Bump => (t - a) * (b - t),
            Profile::Sin => t.sin(),
            Profile::Ramp => t,
            Profile::SmoothBump => ((t - a) * (b - t)).powi(2),
        }
    }

    /// The profile sampled on `grid` with support hint `[a, b]`.
    pub fn build(self, grid: &Grid, a: f64, b: f64) -> Result<GridFunction> {
        if !(0.0 <= a && a < b) {
            return Err(Error::InvalidParameter(format!("need 0 <= a < b, got a = {a}, b = {b}")));
        }
        GridFunction::from_fn(*grid, Some((a, b)), |t| self.value(a, b, t))
    }

    /// `∫_a^b f`.
    pub fn integral(self, a: f64, b: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Indicator => b - a,
            Profile::Bump => (b - a).powi(3) / 6.0,
            Profile::Sin => a.cos() - b.cos(),
            Profile::Ramp => (b * b - a * a) / 2.0,
            Profile::SmoothBump => (b - a).powi(5) / 30.0,
        }
    }

    /// `sup |f|`.
    pub fn sup_abs(self, a: f64, b: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Indicator => 1.0,
            Profile::Bump => (b - a).powi(2) / 4.0,
            Profile::Sin => {
                let k = ((a - std::f64::consts::FRAC_PI_2) / std::f64::consts::PI).ceil();
                if k * std::f64::consts::PI + std::f64::consts::FRAC_PI_2 <= b {
                    1.0
                } else {
                    a.sin().abs().max(b.sin().abs())
                }
            }
            Profile::Ramp => b,
            Profile::SmoothBump => (b - a).powi(4) / 16.0,
        }
    }

    /// Bound on `sup |f − I_h f|` for the piecewise-linear interpolant on
    /// a grid of step `h` having `a` and `b` as nodes. `T_n` has norm at most
    /// one in the sup norm, so the same bound holds after the transform.
    pub fn interpolation_bound(self, a: f64, b: f64, h: f64) -> f64 {
        match self {
            Profile::Zero | Profile::Indicator | Profile::Ramp => 0.0,
            Profile::Bump => h * h / 4.0,
            Profile::Sin => h * h / 8.0,
            Profile::SmoothBump => h * h * (b - a).powi(2) / 4.0,
        }
    }

    /// `T_n f(s)` in closed form, for the polynomial profiles.
    pub fn transform(self, a: f64, b: f64, n: u32, s: f64) -> Option<f64> {
        if s <= a {
            return Some(0.0);
        }
        let x = s.min(b);
        let nf = n as f64;
        // n s^{-n} ∫_a^x t^{n-1} Σ c_k t^k dt with every power scaled by s^{-n}
        let poly = |coeffs: &[f64]| {
            let prim = |y: f64| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * y.powi(k as i32) * (y / s).powi(n as i32) / (nf + k as f64))
                    .sum::<f64>()
            };
            nf * (prim(x) - prim(a))
        };
        match self {
            Profile::Zero => Some(0.0),
            Profile::Indicator => Some(poly(&[1.0])),
            Profile::Bump => Some(poly(&[-a * b, a + b, -1.0])),
            Profile::Ramp => Some(poly(&[0.0, 1.0])),
            Profile::Sin | Profile::SmoothBump => None,
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_PROFILES
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownProfile(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment_ops::transform;
    use crate::quadrature::{integrate, Rule};

    fn gauss(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
        const X: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let w = (hi - lo) / panels as f64;
        (0..panels)
            .map(|p| {
                let mid = lo + (p as f64 + 0.5) * w;
                X.iter().zip(W).map(|(x, wt)| wt * f(mid + 0.5 * w * x)).sum::<f64>() * 0.5 * w
            })
            .sum()
    }

    #[test]
    fn names_round_trip() {
        for p in ALL_PROFILES {
            assert_eq!(p.name().parse::<Profile>().unwrap(), p);
        }
        assert_eq!("triangle".parse::<Profile>(), Err(Error::UnknownProfile("triangle".into())));
    }

    #[test]
    fn integral_examples() {
        let g = Grid::spanning(0.0, 4.0, 1e-3).unwrap();
        let zero = Profile::Zero.build(&g, 2.0, 3.0).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        assert_eq!(Profile::Indicator.integral(2.0, 3.0), 1.0);
        assert!((integrate(&Profile::Indicator.build(&g, 2.0, 3.0).unwrap(), Rule::Trapezoid).unwrap() - 1.0).abs() < 1e-12);
        assert!((Profile::Bump.integral(2.0, 3.0) - 1.0 / 6.0).abs() < 1e-16);
        assert!(Profile::Bump.build(&g, 3.0, 2.0).is_err());
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for p in ALL_PROFILES {
            let (a, b) = (1.5, 3.0);
            let direct = gauss(|t| p.value(a, b, t), a, b, 64);
            assert!((p.integral(a, b) - direct).abs() < 1e-12, "{p}");
            let grid_max = (0..=15_000).map(|i| p.value(a, b, a + 1.5 * i as f64 / 15_000.0).abs()).fold(0.0, f64::max);
            assert!((p.sup_abs(a, b) - grid_max).abs() < 1e-6, "{p}");
            for n in [1u32, 3, 10] {
                for s in [1.0f64, 2.0, 2.9, 3.0, 4.5] {
                    let Some(closed) = p.transform(a, b, n, s) else { continue };
                    let nf = n as f64;
                    let lo = a.min(s);
                    let hi = s.min(b);
                    let direct = if hi > lo { gauss(|t| nf * t.powf(nf - 1.0) * p.value(a, b, t), lo, hi, 64) / s.powf(nf) } else { 0.0 };
                    assert!((closed - direct).abs() < 1e-12, "{p} n={n} s={s}");
                }
            }
        }
        assert_eq!(Profile::Sin.sup_abs(2.0, 3.0), 2f64.sin());
    }

    #[test]
    fn interpolation_bound_covers_grid_transform() {
        let g = Grid::spanning(0.0, 6.0, 1e-2).unwrap();
        for p in ALL_PROFILES {
            let f = p.build(&g, 1.5, 3.0).unwrap();
            let bound = p.interpolation_bound(1.5, 3.0, 1e-2);
            let dense = (0..=30_000).map(|i| i as f64 * 1e-4).map(|t| (f.eval(t) - p.value(1.5, 3.0, t)).abs()).fold(0.0, f64::max);
            assert!(dense <= bound + 1e-15, "{p}: {dense} > {bound}");
            let t = transform(&f, 7, &g).unwrap();
            for (s, v) in g.nodes().zip(t.output().values()) {
                if let Some(c) = p.transform(1.5, 3.0, 7, s) {
                    assert!((c - v).abs() <= bound + 1e-12, "{p} at {s}");
                }
            }
        }
    }

    #[test]
    fn closed_forms_agree_with_grid_transform() {
        let g = Grid::spanning(0.0, 6.0, 1e-3).unwrap();
        for p in [Profile::Indicator, Profile::Ramp] {
            let f = p.build(&g, 2.0, 3.0).unwrap();
            let t = transform(&f, 5, &g).unwrap();
            for (s, v) in g.nodes().zip(t.output().values()) {
                assert!((p.transform(2.0, 3.0, 5, s).unwrap() - v).abs() < 1e-12, "{p} at {s}");
            }
        }
    }
}
