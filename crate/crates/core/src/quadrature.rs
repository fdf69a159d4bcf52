//! Brillouin-zone quadrature and small numerical helpers.
//!
//! Integrals are of 2π-periodic functions over one zone and are normalized by
//! `1/2π`, so `∫ dk/2π 1 = 1`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result, C64};

/// Doubling trapezoid rule on `[-π, π)`, optionally on a grid clustered around
/// one momentum via `k = u - s·sin(u - center)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicQuadrature {
    pub initial_points: usize,
    pub max_points: usize,
    pub tolerance: f64,
    cluster: Option<(f64, f64)>,
}

impl Default for PeriodicQuadrature {
    fn default() -> Self {
        Self {
            initial_points: 1 << 12,
            max_points: 1 << 22,
            tolerance: 1e-10,
            cluster: None,
        }
    }
}

impl PeriodicQuadrature {
    pub fn new() -> Self {
        Self::default()
    }

    /// Clusters nodes around `center`. `strength` in `[0, 1)`; at `1 - ε` the
    /// local spacing near `center` shrinks by roughly `ε`.
    pub fn clustered(mut self, center: f64, strength: f64) -> Self {
        let s = strength.clamp(0.0, 1.0 - 1e-6);
        self.cluster = if s > 0.0 { Some((center, s)) } else { None };
        self
    }

    /// Picks a clustering for integrands whose features have width ~`√distance`
    /// around `center`.
    pub fn near_feature(self, center: f64, distance: f64) -> Self {
        let width = distance.abs().sqrt();
        if width >= 0.5 {
            self
        } else {
            self.clustered(center, 1.0 - width.max(1e-4))
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    fn map(&self, u: f64) -> (f64, f64) {
        match self.cluster {
            Some((c, s)) => (u - s * (u - c).sin(), 1.0 - s * (u - c).cos()),
            None => (u, 1.0),
        }
    }

    /// Integrates `len` components at once; `f(k, out)` must overwrite `out`.
    /// Converges when every component changes by less than the tolerance
    /// (relative to `max(1, |value|)`) between successive doublings.
    pub fn integrate_many<F>(&self, len: usize, mut f: F) -> Result<Vec<C64>>
    where
        F: FnMut(f64, &mut [C64]),
    {
        let mut sum = vec![C64::new(0.0, 0.0); len];
        let mut buf = vec![C64::new(0.0, 0.0); len];
        let mut n = self.initial_points.max(4);
        let mut add = |u: f64, sum: &mut [C64], buf: &mut [C64]| {
            let (k, jac) = self.map(u);
            f(k, buf);
            for (s, b) in sum.iter_mut().zip(buf.iter()) {
                *s += *b * jac;
            }
        };
        for i in 0..n {
            add(-PI + 2.0 * PI * i as f64 / n as f64, &mut sum, &mut buf);
        }
        let mut estimate: Vec<C64> = sum.iter().map(|s| s / n as f64).collect();
        loop {
            for i in 0..n {
                add(-PI + 2.0 * PI * (i as f64 + 0.5) / n as f64, &mut sum, &mut buf);
            }
            n *= 2;
            let next: Vec<C64> = sum.iter().map(|s| s / n as f64).collect();
            let change = next
                .iter()
                .zip(&estimate)
                .map(|(a, b)| (a - b).norm() / a.norm().max(1.0))
                .fold(0.0, f64::max);
            estimate = next;
            if change < self.tolerance {
                return Ok(estimate);
            }
            if 2 * n > self.max_points {
                return Err(Error::Quadrature { points: n, change });
            }
        }
    }

    pub fn integrate<F>(&self, mut f: F) -> Result<C64>
    where
        F: FnMut(f64) -> C64,
    {
        self.integrate_many(1, |k, out| out[0] = f(k)).map(|v| v[0])
    }

    pub fn integrate_real<F>(&self, mut f: F) -> Result<f64>
    where
        F: FnMut(f64) -> f64,
    {
        self.integrate(|k| C64::new(f(k), 0.0)).map(|z| z.re)
    }
}

fn neville_at_zero(xs: &[f64], ys: &[C64]) -> C64 {
    let n = xs.len();
    let mut p: Vec<C64> = ys.to_vec();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (p[i] * xj - p[i + 1] * xi) / (xj - xi);
        }
    }
    p[0]
}

/// Polynomial extrapolation to `x = 0` through all points, plus the spread
/// against the extrapolation that drops the point farthest from zero.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[C64]) -> (C64, f64) {
    let value = neville_at_zero(xs, ys);
    if xs.len() < 2 {
        return (value, f64::INFINITY);
    }
    let far = (0..xs.len())
        .max_by(|&a, &b| xs[a].abs().total_cmp(&xs[b].abs()))
        .unwrap_or(0);
    let (mut xr, mut yr) = (xs.to_vec(), ys.to_vec());
    xr.remove(far);
    yr.remove(far);
    let reduced = neville_at_zero(&xr, &yr);
    (value, (value - reduced).norm())
}

/// Bisection for an increasing or decreasing `f` on a sign-changing bracket.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Contract("bisection bracket has no sign change"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
