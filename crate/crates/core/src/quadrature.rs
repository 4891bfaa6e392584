//! One-dimensional quadrature: adaptive Gauss-Kronrod, fixed Gauss-Legendre
//! panels, periodic trapezoid sums, Wynn's epsilon acceleration and the radial
//! Fourier transforms built on top of them.
//!
//! Fourier convention throughout the crate: `f̂(p) = ∫ f(x) e^{-i p·x} dx`,
//! no 2π prefactor.

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of a quadrature with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
    pub converged: bool,
}

/// Tolerances for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance<T> {
    pub abs: T,
    pub rel: T,
    pub max_intervals: usize,
}

impl<T: Real> Tolerance<T> {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs: lit(abs),
            rel: lit(rel),
            max_intervals: 2000,
        }
    }

    pub fn with_max_intervals(mut self, max_intervals: usize) -> Self {
        self.max_intervals = max_intervals;
        self
    }

    fn target(&self, value: T) -> T {
        self.abs.max(self.rel * value.abs())
    }
}

impl<T: Real> Default for Tolerance<T> {
    fn default() -> Self {
        Self::new(1e-13, 1e-11)
    }
}

/// 15-point Kronrod rule with embedded 7-point Gauss error estimate
/// (QUADPACK QK15 error heuristic).
pub fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = lit::<T>(0.5);
    let center = half * (a + b);
    let h = half * (b - a);
    let fc = f(center);
    let mut resk = fc * lit(WGK[7]);
    let mut resg = fc * lit(WG[3]);
    let mut resabs = fc.abs() * lit(WGK[7]);
    let mut fv1 = [T::zero(); 7];
    let mut fv2 = [T::zero(); 7];
    for j in 0..7 {
        let dx = h * lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk = resk + lit::<T>(WGK[j]) * (f1 + f2);
        resabs = resabs + lit::<T>(WGK[j]) * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg = resg + lit::<T>(WG[j / 2]) * (f1 + f2);
        }
    }
    let mean = resk * half;
    let mut resasc = lit::<T>(WGK[7]) * (fc - mean).abs();
    for j in 0..7 {
        resasc = resasc + lit::<T>(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let habs = h.abs();
    let result = resk * h;
    resabs = resabs * habs;
    resasc = resasc * habs;
    let mut err = ((resk - resg) * h).abs();
    if resasc != T::zero() && err != T::zero() {
        let ratio = (lit::<T>(200.0) * err / resasc).powf(lit(1.5));
        err = resasc * ratio.min(T::one());
    }
    let floor = lit::<T>(50.0) * T::epsilon() * resabs;
    if resabs > T::min_positive_value() / (lit::<T>(50.0) * T::epsilon()) {
        err = err.max(floor);
    }
    (result, err)
}

struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

/// Globally adaptive Gauss-Kronrod integration over the segments delimited
/// by `breaks` (at least two increasing points). Integrable endpoint
/// singularities are handled by repeated bisection.
pub fn integrate<T: Real, F: FnMut(T) -> T>(mut f: F, breaks: &[T], tol: Tolerance<T>) -> Estimate<T> {
    assert!(breaks.len() >= 2, "need at least one segment");
    let mut panels: Vec<Panel<T>> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (value, error) = gk15(&mut f, w[0], w[1]);
            Panel {
                a: w[0],
                b: w[1],
                value,
                error,
            }
        })
        .collect();
    if panels.is_empty() {
        return Estimate {
            value: T::zero(),
            error: T::zero(),
            converged: true,
        };
    }
    loop {
        let total: T = panels.iter().map(|p| p.value).sum();
        let err: T = panels.iter().map(|p| p.error).sum();
        if err <= tol.target(total) {
            return Estimate {
                value: total,
                error: err,
                converged: true,
            };
        }
        if panels.len() >= tol.max_intervals {
            return Estimate {
                value: total,
                error: err,
                converged: false,
            };
        }
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                let mid = lit::<T>(0.5) * (p.a + p.b);
                mid > p.a && mid < p.b
            })
            .max_by(|x, y| to_f64(x.1.error).total_cmp(&to_f64(y.1.error)))
            .map(|(i, _)| i);
        let Some(i) = worst else {
            return Estimate {
                value: total,
                error: err,
                converged: false,
            };
        };
        let p = panels.swap_remove(i);
        let mid = lit::<T>(0.5) * (p.a + p.b);
        let (v1, e1) = gk15(&mut f, p.a, mid);
        let (v2, e2) = gk15(&mut f, mid, p.b);
        panels.push(Panel {
            a: p.a,
            b: mid,
            value: v1,
            error: e1,
        });
        panels.push(Panel {
            a: mid,
            b: p.b,
            value: v2,
            error: e2,
        });
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration on P_n).
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn legendre(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 1 { x } else { p1 };
                let pnm1 = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussRule { nodes, weights }
    }

    /// Composite rule: `panels` equal sub-intervals of [a, b].
    pub fn composite<T: Real, F: FnMut(T) -> T>(&self, mut f: F, a: T, b: T, panels: usize) -> T {
        let width = (b - a) / lit(panels as f64);
        let half = width * lit(0.5);
        let mut total = T::zero();
        for k in 0..panels {
            let center = a + width * lit(k as f64 + 0.5);
            let mut s = T::zero();
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                s = s + lit::<T>(*w) * f(center + half * lit(*x));
            }
            total = total + s * half;
        }
        total
    }
}

/// Trapezoid sum over one full period starting at `start`; spectrally
/// accurate for smooth periodic integrands.
pub fn trapezoid_periodic<T: Real, F: FnMut(T) -> T>(mut f: F, start: T, period: T, points: usize) -> T {
    let h = period / lit(points as f64);
    let mut s = T::zero();
    for k in 0..points {
        s = s + f(start + h * lit(k as f64));
    }
    s * h
}

/// Bessel J0 from its angular integral representation, evaluated by the
/// periodic trapezoid rule.
pub fn bessel_j0<T: Real>(z: T) -> T {
    let zf = to_f64(z).abs();
    let points = 2 * ((zf / 2.0).ceil() as usize) + 40;
    let two_pi = T::PI() + T::PI();
    trapezoid_periodic(|t: T| (z * t.cos()).cos(), T::zero(), two_pi, points) / two_pi
}

/// Wynn's epsilon algorithm on a sequence of partial sums. Returns the
/// accelerated limit and an error estimate from the last two entries of the
/// deepest usable even column.
pub fn wynn_epsilon<T: Real>(partial: &[T]) -> (T, T) {
    let m = partial.len();
    assert!(m >= 2);
    let mut best = partial[m - 1];
    let mut best_err = (partial[m - 1] - partial[m - 2]).abs();
    let mut prev = vec![T::zero(); m + 1];
    let mut cur = partial.to_vec();
    let mut column = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let d = cur[i + 1] - cur[i];
            if d == T::zero() || !d.is_finite() {
                return (best, best_err);
            }
            next.push(prev[i + 1] + d.recip());
        }
        column += 1;
        if column % 2 == 0 && next.len() >= 2 {
            let last = next[next.len() - 1];
            let e = (last - next[next.len() - 2]).abs();
            if e.is_finite() && e < best_err {
                best = last;
                best_err = e;
            }
        }
        prev = cur;
        cur = next;
    }
    (best, best_err)
}

/// Radial Fourier transform of a radial function `g(|y|)` on R^n (n = 1, 2, 3):
///
/// * n = 1: `2 ∫ g(r) cos(k r) dr`
/// * n = 2: `2π ∫ g(r) J0(k r) r dr`
/// * n = 3: `4π ∫ g(r) sin(k r)/(k r) r² dr`
///
/// over an unbounded range. The range is cut into half-period panels whose
/// alternating partial sums are accelerated with [`wynn_epsilon`].
pub fn radial_fourier<T: Real, G: Fn(T) -> T>(g: G, k: T, n: usize, rel_tol: f64) -> Result<Estimate<T>> {
    if !(1..=3).contains(&n) {
        return Err(Error::Dimension(format!("radial transform supports n = 1..3, got {n}")));
    }
    if k <= T::zero() {
        return Err(Error::Domain(format!("radial transform needs k > 0, got {k}")));
    }
    let pi = T::PI();
    let integrand = |r: T| -> T {
        let kr = k * r;
        match n {
            1 => g(r) * kr.cos(),
            2 => g(r) * bessel_j0(kr) * r,
            _ => {
                let sinc = if kr == T::zero() { T::one() } else { kr.sin() / kr };
                g(r) * sinc * r * r
            }
        }
    };
    // Panel boundaries at (asymptotic) zeros of the oscillating kernel.
    let zero = |j: usize| -> T {
        let j = lit::<T>(j as f64);
        match n {
            1 => (j + lit(0.5)) * pi / k,
            2 => (j + lit(0.75)) * pi / k,
            _ => (j + T::one()) * pi / k,
        }
    };
    let prefactor: T = match n {
        1 => lit(2.0),
        2 => pi + pi,
        _ => lit::<T>(4.0) * pi,
    };
    let tol = Tolerance::<T>::new(0.0, rel_tol * 1e-2).with_max_intervals(4000);

    // First panel: geometric break points help with slowly varying or
    // weakly singular g near the origin.
    let first_end = zero(0);
    let mut breaks = vec![T::zero()];
    let mut b = lit::<T>(1e-3);
    while b < first_end {
        breaks.push(b);
        b = b * lit(10.0);
    }
    breaks.push(first_end);
    let first = integrate(&integrand, &breaks, tol);
    if !first.converged {
        return Err(Error::Numerical(format!(
            "oscillatory quadrature: first panel did not converge at k = {k}"
        )));
    }
    let mut partial = vec![first.value];
    let mut j = 0usize;
    let (min_panels, max_panels) = (24usize, 160usize);
    let mut last_estimate: Option<T> = None;
    loop {
        let a = zero(j);
        let b = zero(j + 1);
        let e = integrate(&integrand, &[a, b], tol);
        if !e.converged {
            return Err(Error::Numerical(format!(
                "oscillatory quadrature: panel {j} did not converge at k = {k}"
            )));
        }
        let s = *partial.last().unwrap() + e.value;
        partial.push(s);
        j += 1;
        if partial.len() >= min_panels && partial.len() % 4 == 0 {
            let tail = &partial[partial.len().saturating_sub(40)..];
            let (est, err) = wynn_epsilon(tail);
            let scale = est.abs().max(lit(1e-300));
            if let Some(prev) = last_estimate {
                let change = (est - prev).abs();
                if change <= lit::<T>(rel_tol) * scale && err <= lit::<T>(rel_tol * 10.0) * scale {
                    return Ok(Estimate {
                        value: prefactor * est,
                        error: prefactor * change.max(err),
                        converged: true,
                    });
                }
            }
            last_estimate = Some(est);
        }
        if partial.len() >= max_panels {
            return Err(Error::Numerical(format!(
                "oscillatory quadrature: no convergence after {max_panels} panels at k = {k}"
            )));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let rule = GaussRule::legendre(8);
        let v: f64 = rule.composite(|x: f64| x.powi(15) + 3.0 * x.powi(4), -1.0, 2.0, 1);
        let exact = (2f64.powi(16) - 1.0) / 16.0 + 3.0 * (32.0 + 1.0) / 5.0;
        assert_relative_eq!(v, exact, max_relative = 1e-13);
        let s: f64 = rule.weights.iter().sum();
        assert_relative_eq!(s, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let e = integrate(|x: f64| x.powf(-0.5), &[0.0, 1.0], Tolerance::new(1e-10, 1e-10));
        assert!(e.converged);
        assert_relative_eq!(e.value, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn adaptive_f32_path() {
        let e = integrate(|x: f32| x.sin(), &[0.0, std::f32::consts::PI], Tolerance::new(1e-6, 1e-6));
        assert!((e.value - 2.0).abs() < 1e-5);
    }

    #[test]
    fn j0_matches_reference_values() {
        // J0(1), J0(10), J0(50)
        assert_relative_eq!(bessel_j0(1.0f64), 0.765_197_686_557_966_6, max_relative = 1e-14);
        assert_relative_eq!(bessel_j0(10.0f64), -0.245_935_764_451_348_3, max_relative = 1e-13);
        assert_relative_eq!(bessel_j0(50.0f64), 0.055_812_327_669_251_84, max_relative = 1e-11);
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // ln 2 = 1 - 1/2 + 1/3 - ...
        let mut s = 0.0;
        let partial: Vec<f64> = (1..=20)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                s
            })
            .collect();
        let (v, _) = wynn_epsilon(&partial);
        assert!((v - 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn radial_fourier_of_lorentzian_n1() {
        // 2∫ cos(kr)/(1+r²) dr = π e^{-k}
        let e = radial_fourier(|r: f64| 1.0 / (1.0 + r * r), 0.7, 1, 1e-10).unwrap();
        assert_relative_eq!(e.value, std::f64::consts::PI * (-0.7f64).exp(), max_relative = 1e-8);
    }

    #[test]
    fn radial_fourier_of_slow_power_tail_n1() {
        // 2∫ r^{-1/2} cos(kr) dr = 2 sqrt(π/(2k))
        let k = 0.01;
        let e = radial_fourier(|r: f64| r.powf(-0.5), k, 1, 1e-9).unwrap();
        assert_relative_eq!(e.value, 2.0 * (std::f64::consts::PI / (2.0 * k)).sqrt(), max_relative = 1e-7);
    }

    #[test]
    fn radial_fourier_n2_and_n3_gaussian() {
        // Gaussian e^{-r²/2}: transform (2π)^{n/2} e^{-k²/2}
        let k = 1.3;
        let e2 = radial_fourier(|r: f64| (-r * r / 2.0).exp(), k, 2, 1e-9).unwrap();
        assert_relative_eq!(e2.value, 2.0 * std::f64::consts::PI * (-k * k / 2.0f64).exp(), max_relative = 1e-8);
        let e3 = radial_fourier(|r: f64| (-r * r / 2.0).exp(), k, 3, 1e-9).unwrap();
        let c3 = (2.0 * std::f64::consts::PI).powf(1.5);
        assert_relative_eq!(e3.value, c3 * (-k * k / 2.0f64).exp(), max_relative = 1e-8);
    }
}
