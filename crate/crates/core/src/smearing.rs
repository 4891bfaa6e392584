//! Smooth block kernels `f_R(x) = f(|x|/R)`, their self-convolutions and
//! Fourier transforms.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::qmc::{self, QmcConfig, QmcEstimate};
use crate::quadrature::{integrate, GaussRule, Tolerance};
use crate::scalar::{lit, norm, to_f64, unit_sphere_area, Real};

/// Radius of the kernel support in kernel units.
pub const SUPPORT_RADIUS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// C^∞ exponential glue between the plateau and zero.
    #[default]
    Bump,
    /// `cos²(π(s-1)/2)` taper, only C¹.
    Cos2,
}

fn glue<T: Real>(u: T) -> T {
    if u > T::zero() {
        (-u.recip()).exp()
    } else {
        T::zero()
    }
}

/// `f(s) = g(2-s)/(g(2-s)+g(s-1))` with `g(u) = e^{-1/u}` for `u > 0`.
pub fn bump_profile<T: Real>(s: T) -> T {
    if s <= T::one() {
        return T::one();
    }
    let two = lit::<T>(2.0);
    if s >= two {
        return T::zero();
    }
    let a = glue(two - s);
    let b = glue(s - T::one());
    a / (a + b)
}

pub fn cos2_profile<T: Real>(s: T) -> T {
    if s <= T::one() {
        return T::one();
    }
    if s >= lit(2.0) {
        return T::zero();
    }
    let c = (T::FRAC_PI_2() * (s - T::one())).cos();
    c * c
}

impl Profile {
    #[inline]
    pub fn value<T: Real>(&self, s: T) -> T {
        match self {
            Profile::Bump => bump_profile(s),
            Profile::Cos2 => cos2_profile(s),
        }
    }
}

pub fn default_resolution(n: usize) -> usize {
    match n {
        1 => 64,
        2 => 32,
        _ => 16,
    }
}

const PANEL_ORDER: usize = 8;
/// Default relative tolerance for `K_2` tables.
pub const DEFAULT_K2_TOLERANCE: f64 = 1e-5;

/// Quadrature nodes per unit length relative to the table resolution.
const QUAD_FACTOR: usize = 4;

#[derive(Debug, Clone)]
pub struct SmearingKernel<T> {
    n: usize,
    profile: Profile,
    resolution: usize,
    integral: T,
}

impl<T: Real> SmearingKernel<T> {
    pub fn new(n: usize, profile: Profile) -> Result<Self> {
        Self::with_resolution(n, profile, default_resolution(n))
    }

    pub fn with_resolution(n: usize, profile: Profile, resolution: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(domain(format!("kernel dimension n = {n} outside 1..=3")));
        }
        if resolution < 4 {
            return Err(domain(format!("kernel resolution {resolution} must be >= 4")));
        }
        let area = unit_sphere_area::<T>(n);
        let radial = integrate(
            |s: T| s.powi(n as i32 - 1) * profile.value(s),
            &[T::zero(), T::one(), lit(SUPPORT_RADIUS)],
            Tolerance::new(1e-15, 1e-14),
        );
        Ok(SmearingKernel {
            n,
            profile,
            resolution,
            integral: area * radial.value,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// `f(s)`; negative radii are rejected.
    pub fn eval_profile(&self, s: T) -> Result<T> {
        if s < T::zero() || !s.is_finite() {
            return Err(domain(format!("profile argument s = {s} must be finite and >= 0")));
        }
        Ok(self.profile.value(s))
    }

    /// `f(|x|)` at a point of ℝ^n.
    #[inline]
    pub fn eval_point(&self, x: &[T]) -> T {
        self.profile.value(norm(x))
    }

    /// `∫ f(|x|) d^n x`.
    pub fn integral(&self) -> T {
        self.integral
    }

    fn gauss(&self) -> GaussRule {
        GaussRule::legendre(PANEL_ORDER)
    }

    /// `(f∗f)(r·e_1)` by direct quadrature with `resolution` nodes per unit length.
    fn k2_direct(&self, r: T, resolution: usize, rule: &GaussRule) -> T {
        let one = T::one();
        let two = lit::<T>(SUPPORT_RADIUS);
        let panels_for = |len: T| ((to_f64(len) * resolution as f64 / PANEL_ORDER as f64).ceil() as usize).max(1);
        let segments = |pts: &mut Vec<T>, lo: T, hi: T| -> Vec<(T, T)> {
            pts.retain(|p| *p > lo && *p < hi);
            pts.push(lo);
            pts.push(hi);
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            pts.dedup_by(|a, b| (*a - *b).abs() <= lit(1e-14));
            pts.windows(2).map(|w| (w[0], w[1])).collect()
        };
        let p = self.profile;
        if self.n == 1 {
            let mut pts = vec![-one, T::zero(), one, r - two, r - one, r, r + one, r + two];
            let mut total = T::zero();
            for (a, b) in segments(&mut pts, -two, two) {
                total = total + rule.composite(|x: T| p.value(x.abs()) * p.value((x - r).abs()), a, b, panels_for(b - a));
            }
            return total;
        }
        let area = unit_sphere_area::<T>(self.n);
        if r == T::zero() {
            let mut total = T::zero();
            for (a, b) in [(T::zero(), one), (one, two)] {
                total = total + rule.composite(|s: T| s.powi(self.n as i32 - 1) * p.value(s).powi(2), a, b, panels_for(b - a));
            }
            return area * total;
        }
        // Spherical average of f(|ρω - r e_1|) in the variable c = cos θ.
        let angular = |rho: T| -> T {
            if rho == T::zero() {
                return p.value(r);
            }
            let dist = |c: T| (rho * rho + r * r - lit::<T>(2.0) * rho * r * c).max(T::zero()).sqrt();
            let mut cuts: Vec<T> = [one, two]
                .iter()
                .map(|&d| (rho * rho + r * r - d * d) / (lit::<T>(2.0) * rho * r))
                .collect();
            if self.n == 2 {
                // integrate over θ ∈ [0, π]; average = (1/π)∫ dθ
                let mut th: Vec<T> = cuts.iter().filter(|c| c.abs() < one).map(|c| c.acos()).collect();
                let mut s = T::zero();
                for (a, b) in segments(&mut th, T::zero(), T::PI()) {
                    s = s + rule.composite(|t: T| p.value(dist(t.cos())), a, b, panels_for((b - a) * rho.max(one)));
                }
                s / T::PI()
            } else {
                let mut s = T::zero();
                for (a, b) in segments(&mut cuts, -one, one) {
                    s = s + rule.composite(|c: T| p.value(dist(c)), a, b, panels_for((b - a) * rho.max(one)));
                }
                s * lit(0.5)
            }
        };
        let mut pts: Vec<T> = vec![one];
        for d in [one, two] {
            pts.push((r - d).abs());
            pts.push(r + d);
        }
        let mut total = T::zero();
        for (a, b) in segments(&mut pts, T::zero(), two) {
            total = total + rule.composite(|s: T| s.powi(self.n as i32 - 1) * p.value(s) * angular(s), a, b, panels_for(b - a));
        }
        area * total
    }

    /// Tabulates `K_2 = f∗f` on radii `[0, 4]` with step `1/resolution`.
    ///
    /// The reported error combines the change under halving the quadrature
    /// resolution and the interpolation error at cell midpoints. When it
    /// exceeds `rel_tol·K_2(0)` the table is rejected with a suggested
    /// resolution.
    pub fn self_convolution(&self, rel_tol: f64) -> Result<SelfConvolution<T>> {
        let rule = self.gauss();
        let h = T::one() / lit(self.resolution as f64);
        let count = 4 * self.resolution;
        let quad = QUAD_FACTOR * self.resolution;
        let values: Vec<T> = (0..=count).map(|k| self.k2_direct(h * lit(k as f64), quad, &rule)).collect();
        let mut table = SelfConvolution {
            n: self.n,
            step: h,
            values,
            error: T::zero(),
        };
        let scale = table.values[0];
        let half = quad / 2;
        let mut err = T::zero();
        for k in (0..count).step_by(4.max(count / 64)) {
            let r = h * lit(k as f64);
            let coarse = self.k2_direct(r, half, &rule);
            err = err.max((coarse - table.values[k]).abs());
            let mid = r + h * lit(0.5);
            let direct = self.k2_direct(mid, quad, &rule);
            err = err.max((table.eval(mid) - direct).abs());
        }
        table.error = err;
        let tolerance = rel_tol * to_f64(scale);
        if to_f64(err) > tolerance {
            return Err(Error::Resolution {
                estimate: to_f64(err),
                tolerance,
                suggested: 2 * self.resolution,
            });
        }
        Ok(table)
    }

    /// `K_m(y) = ∫ f(x) Π_j f(x - Σ_{i≤j} y_i) dx` for `m = y.len()/n + 1 >= 3`,
    /// by randomized QMC over the support cube of `x`.
    pub fn multi_overlap(&self, y: &[T], cfg: &QmcConfig) -> Result<QmcEstimate<T>> {
        let n = self.n;
        if y.is_empty() || y.len() % n != 0 {
            return Err(Error::Dimension(format!("overlap shifts must be a multiple of n = {n}")));
        }
        let m = y.len() / n + 1;
        if !(3..=5).contains(&m) {
            return Err(domain(format!("fold count m = {m} outside 3..=5")));
        }
        let side = lit::<T>(2.0 * SUPPORT_RADIUS);
        let volume = side.powi(n as i32);
        let mut shifts = vec![T::zero(); y.len()];
        for j in 0..m - 1 {
            for d in 0..n {
                let prev = if j == 0 { T::zero() } else { shifts[(j - 1) * n + d] };
                shifts[j * n + d] = prev + y[j * n + d];
            }
        }
        let est = qmc::estimate(n, cfg, 0, |u: &[f64]| {
            let mut x = [T::zero(); 3];
            for d in 0..n {
                x[d] = lit::<T>(u[d] * 4.0 - SUPPORT_RADIUS);
            }
            let mut w = self.eval_point(&x[..n]);
            let mut z = [T::zero(); 3];
            for j in 0..m - 1 {
                if w == T::zero() {
                    break;
                }
                for d in 0..n {
                    z[d] = x[d] - shifts[j * n + d];
                }
                w = w * self.eval_point(&z[..n]);
            }
            w
        })?;
        Ok(QmcEstimate {
            value: est.value * volume,
            stderr: est.stderr * volume,
            samples: est.samples,
        })
    }

    /// `f̂(p)` for radial `p >= 0`; real because `f` is even.
    pub fn transform_at(&self, p: T) -> T {
        let n = self.n;
        let p_abs = p.abs();
        let two = lit::<T>(SUPPORT_RADIUS);
        if p_abs == T::zero() {
            return self.integral;
        }
        let mut breaks = vec![T::zero(), T::one()];
        let period = T::PI() / p_abs;
        let mut b = period;
        while b < two {
            if (b - T::one()).abs() > lit(1e-12) {
                breaks.push(b);
            }
            b = b + period;
        }
        breaks.push(two);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let prof = self.profile;
        let tol = Tolerance::new(1e-15, 1e-13);
        match n {
            1 => lit::<T>(2.0) * integrate(|r: T| prof.value(r) * (p_abs * r).cos(), &breaks, tol).value,
            2 => {
                (T::PI() + T::PI())
                    * integrate(|r: T| prof.value(r) * crate::quadrature::bessel_j0(p_abs * r) * r, &breaks, tol).value
            }
            _ => {
                let four_pi = lit::<T>(4.0) * T::PI();
                four_pi
                    * integrate(
                        |r: T| {
                            let x = p_abs * r;
                            let sinc = if x == T::zero() { T::one() } else { x.sin() / x };
                            prof.value(r) * sinc * r * r
                        },
                        &breaks,
                        tol,
                    )
                    .value
            }
        }
    }

    /// Tabulated `f̂` on a momentum grid with the rapid-decrease report.
    pub fn fourier_transform(&self, p_grid: &[T]) -> Result<FourierTable<T>> {
        if p_grid.is_empty() {
            return Err(Error::Grid("empty momentum grid".into()));
        }
        let values: Vec<T> = p_grid.iter().map(|&p| self.transform_at(p)).collect();
        let mut decay = Vec::new();
        for order in 1..=4 {
            let c = p_grid
                .iter()
                .zip(&values)
                .filter(|(p, _)| p.abs() > T::zero())
                .map(|(p, v)| v.abs() * p.abs().powi(order))
                .fold(T::zero(), |a, b| a.max(b));
            decay.push(DecayBound { order: order as u32, c_n: c });
        }
        let mut sorted: Vec<(T, T)> = p_grid.iter().map(|p| p.abs()).zip(values.iter().map(|v| v.abs())).collect();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mid = sorted.len() / 2;
        let warning = if sorted.len() < 4 {
            Some("momentum grid too small to observe decay".to_string())
        } else {
            let low = sorted[..mid].iter().map(|x| x.1).fold(T::zero(), |a, b| a.max(b));
            let high = sorted[mid..].iter().map(|x| x.1).fold(T::zero(), |a, b| a.max(b));
            if high < low {
                None
            } else {
                Some("momentum grid too small to observe decay".to_string())
            }
        };
        Ok(FourierTable {
            p: p_grid.to_vec(),
            values,
            decay,
            warning,
        })
    }

    /// `f̂_R(p) = R^n f̂(R p)`.
    pub fn scaled_transform(&self, r: T, p: T) -> T {
        r.powi(self.n as i32) * self.transform_at(r * p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayBound<T> {
    pub order: u32,
    /// `max |f̂(p)|·|p|^order` over the grid.
    pub c_n: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierTable<T> {
    pub p: Vec<T>,
    pub values: Vec<T>,
    pub decay: Vec<DecayBound<T>>,
    pub warning: Option<String>,
}

/// Radial table of `K_2 = f∗f`, supported on `|y| <= 4`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfConvolution<T> {
    n: usize,
    step: T,
    values: Vec<T>,
    error: T,
}

impl<T: Real> SelfConvolution<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn error_estimate(&self) -> T {
        self.error
    }

    pub fn support_radius(&self) -> T {
        lit(2.0 * SUPPORT_RADIUS)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.values.iter().enumerate().map(move |(k, &v)| (self.step * lit(k as f64), v))
    }

    fn node(&self, k: isize) -> T {
        let idx = k.unsigned_abs();
        self.values.get(idx).copied().unwrap_or(T::zero())
    }

    /// `K_2` at radius `r` by cubic interpolation (mirrored at 0).
    pub fn eval(&self, r: T) -> T {
        let r = r.abs();
        if r >= self.support_radius() {
            return T::zero();
        }
        let t = r / self.step;
        let i = t.floor();
        let u = t - i;
        let i = to_f64(i) as isize;
        let (p0, p1, p2, p3) = (self.node(i - 1), self.node(i), self.node(i + 1), self.node(i + 2));
        let one = T::one();
        let two = lit::<T>(2.0);
        let six = lit::<T>(6.0);
        // Lagrange basis on nodes -1, 0, 1, 2
        let l0 = -u * (u - one) * (u - two) / six;
        let l1 = (u + one) * (u - one) * (u - two) / two;
        let l2 = -(u + one) * u * (u - two) / two;
        let l3 = (u + one) * u * (u - one) / six;
        p0 * l0 + p1 * l1 + p2 * l2 + p3 * l3
    }

    /// `K_2` at a vector argument.
    pub fn eval_vec(&self, y: &[T]) -> T {
        self.eval(norm(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn plateau_and_midpoint() {
        let k = SmearingKernel::<f64>::new(1, Profile::Bump).unwrap();
        assert_eq!(k.eval_profile(0.5).unwrap(), 1.0);
        assert_eq!(k.eval_profile(1.0).unwrap(), 1.0);
        assert_eq!(k.eval_profile(3.0).unwrap(), 0.0);
        assert_eq!(k.eval_profile(2.0).unwrap(), 0.0);
        assert_eq!(k.eval_profile(1.5).unwrap(), 0.5);
        assert!(k.eval_profile(-0.1).is_err());
        assert!((cos2_profile(1.5f64) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn profile_is_monotone_in_unit_interval() {
        for profile in [Profile::Bump, Profile::Cos2] {
            let mut prev = 1.0f64;
            for k in 0..=1000 {
                let v = profile.value(1.0 + k as f64 / 1000.0);
                assert!((0.0..=1.0).contains(&v));
                assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }

    #[test]
    fn derivatives_vanish_at_glue_points() {
        // one-sided differences into the transition region shrink faster than any power
        for s0 in [1.0f64, 2.0] {
            let dir = if s0 == 1.0 { 1.0 } else { -1.0 };
            let mut last = f64::INFINITY;
            for h in [0.1, 0.05, 0.025, 0.0125] {
                let f = |k: f64| bump_profile(s0 + dir * k * h);
                let d1 = (f(1.0) - f(0.0)) / h;
                let d2 = (f(2.0) - 2.0 * f(1.0) + f(0.0)) / (h * h);
                let d3 = (f(3.0) - 3.0 * f(2.0) + 3.0 * f(1.0) - f(0.0)) / (h * h * h);
                let worst = d1.abs().max(d2.abs()).max(d3.abs());
                assert!(worst < last);
                last = worst;
            }
            assert!(last < 1e-2);
        }
    }

    #[test]
    fn f32_profile_path() {
        assert_eq!(bump_profile(1.5f32), 0.5);
        let k = SmearingKernel::<f32>::new(1, Profile::Bump).unwrap();
        assert!((k.integral() - SmearingKernel::<f64>::new(1, Profile::Bump).unwrap().integral() as f32).abs() < 1e-5);
    }

    #[test]
    fn one_dimensional_integral_closed_form() {
        // ∫ f over ℝ = 2 + 2∫_1^2 f = 3 by the antisymmetry of the glue about s = 1.5
        let k = SmearingKernel::<f64>::new(1, Profile::Bump).unwrap();
        assert_relative_eq!(k.integral(), 3.0, max_relative = 1e-13);
        let c = SmearingKernel::<f64>::new(1, Profile::Cos2).unwrap();
        assert_relative_eq!(c.integral(), 3.0, max_relative = 1e-13);
    }

    #[test]
    fn k2_support_symmetry_and_mass() {
        for n in 1..=3 {
            let k = SmearingKernel::<f64>::new(n, Profile::Bump).unwrap();
            let t = k.self_convolution(DEFAULT_K2_TOLERANCE).unwrap();
            assert_eq!(t.eval(4.0), 0.0);
            assert_eq!(t.eval(5.5), 0.0);
            assert!(t.eval(0.0) > 0.0);
            assert_eq!(t.eval(1.3), t.eval(-1.3));
            // ∫ K_2 = (∫f)²
            let area = unit_sphere_area::<f64>(n);
            let mass = integrate(|r: f64| area * r.powi(n as i32 - 1) * t.eval(r), &[0.0, 1.0, 2.0, 3.0, 4.0], Tolerance::new(1e-12, 1e-10));
            assert_relative_eq!(mass.value, k.integral().powi(2), max_relative = 1e-6);
        }
    }

    #[test]
    fn k2_origin_against_trapezoid_oracle() {
        let k = SmearingKernel::<f64>::new(1, Profile::Bump).unwrap();
        let t = k.self_convolution(1e-6).unwrap();
        let m = 2 * 2 * k.resolution() * 4;
        let h = 4.0 / m as f64;
        let oracle: f64 = (0..=m)
            .map(|i| {
                let x = -2.0 + i as f64 * h;
                let w = if i == 0 || i == m { 0.5 } else { 1.0 };
                w * bump_profile(x.abs()).powi(2)
            })
            .sum::<f64>()
            * h;
        assert!((t.eval(0.0) - oracle).abs() < 1e-6);
    }

    #[test]
    fn coarse_resolution_is_rejected_with_suggestion() {
        let k = SmearingKernel::<f64>::with_resolution(2, Profile::Bump, 4).unwrap();
        match k.self_convolution(1e-12) {
            Err(Error::Resolution { suggested, .. }) => assert_eq!(suggested, 8),
            other => panic!("expected resolution error, got {other:?}"),
        }
    }

    #[test]
    fn multi_overlap_reduces_to_k2_shape() {
        // with a zero second shift, K_3(y, 0) = ∫ f² (x) f(x - y); compare to a 1-D quadrature
        let k = SmearingKernel::<f64>::new(1, Profile::Bump).unwrap();
        let cfg = QmcConfig { samples: 4096, replicas: 16, seed: 1 };
        let est = k.multi_overlap(&[0.7, 0.0], &cfg).unwrap();
        let oracle = integrate(
            |x: f64| bump_profile(x.abs()).powi(2) * bump_profile((x - 0.7).abs()),
            &[-2.0, -1.3, -1.0, 0.0, 0.7, 1.0, 1.7, 2.0],
            Tolerance::new(1e-13, 1e-12),
        );
        assert!((est.value - oracle.value).abs() < 4.0 * est.stderr + 1e-6);
    }

    #[test]
    fn transform_origin_evenness_and_decay() {
        let k = SmearingKernel::<f64>::new(1, Profile::Bump).unwrap();
        assert_relative_eq!(k.transform_at(0.0), k.integral(), max_relative = 1e-15);
        assert_eq!(k.transform_at(1.7), k.transform_at(-1.7));
        let grid: Vec<f64> = (0..=60).map(|i| 5.0 + 0.25 * i as f64).collect();
        let tab = k.fourier_transform(&grid).unwrap();
        // independent tabulation: trapezoid on a fine grid
        for (&p, &v) in tab.p.iter().zip(&tab.values).step_by(10) {
            let m = 40000;
            let h = 2.0 / m as f64;
            let trap: f64 = (0..=m)
                .map(|i| {
                    let r = i as f64 * h;
                    let w = if i == 0 || i == m { 0.5 } else { 1.0 };
                    w * bump_profile(r) * (p * r).cos()
                })
                .sum::<f64>()
                * 2.0
                * h;
            assert!((v - trap).abs() < 1e-7, "p = {p}: {v} vs {trap}");
            assert!(v.abs() * p.powi(4) < 2000.0);
        }
        assert_eq!(tab.decay.len(), 4);
    }

    #[test]
    fn transform_higher_dimensions_at_origin() {
        for n in 2..=3 {
            let k = SmearingKernel::<f64>::new(n, Profile::Bump).unwrap();
            assert_relative_eq!(k.transform_at(1e-9), k.integral(), max_relative = 1e-9);
        }
    }

    #[test]
    fn scaled_transform_identity() {
        let k = SmearingKernel::<f64>::new(2, Profile::Bump).unwrap();
        assert_relative_eq!(k.scaled_transform(3.0, 0.5), 9.0 * k.transform_at(1.5), max_relative = 1e-15);
    }

    #[test]
    fn tiny_grid_warns() {
        let k = SmearingKernel::<f64>::new(1, Profile::Bump).unwrap();
        assert!(k.fourier_transform(&[0.1, 0.2]).unwrap().warning.is_some());
        assert!(k.fourier_transform(&[]).is_err());
    }
}
