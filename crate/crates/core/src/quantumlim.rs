//! Quantum-limit experiments at the two-point level: decay of the smeared
//! commutator bound, the KMS spectral relation, and critical slowing down
//! with macroscopic time rescaling.
//!
//! Sign convention: time correlations are `C(t) = ⟨A·B(t)⟩ = a + ∫W_AB(ω)e^{-iωt}dω`
//! and the reversed product is `⟨B(t)·A⟩ = ∫e^{-βω}W_AB(ω)e^{-iωt}dω + a`.

use num_complex::Complex;
use serde::Serialize;

use crate::corrmodels::{
    CommutatorProfile, CommutatorShape, SlowdownFamily, SpectralDensity, SpectralModel, SpectralShape,
};
use crate::error::{domain, Error, Result};
use crate::exponents::log_log_fit;
use crate::quadrature::{integrate, radial_fourier, Tolerance};
use crate::scalar::{lit, unit_sphere_area, Real};
use crate::smearing::{SmearingKernel, DEFAULT_K2_TOLERANCE};

// ---------------------------------------------------------------------------
// commutator bound

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutatorScalingResult<T> {
    pub profile: CommutatorProfile<T>,
    pub gamma_a: T,
    pub gamma_b: T,
    pub r_grid: Vec<T>,
    pub bound: Vec<T>,
    pub slope: T,
    pub predicted_slope: T,
    /// `bound(R)/R^{n-(γ_A+γ_B)}` at the largest R.
    pub prefactor: T,
    /// Its large-R limit `∫F · (f∗f)(0)`.
    pub prefactor_limit: T,
}

/// `R^{-(γ_A+γ_B)} ∫∫F(x_1-x_2) f(x_1/R) f(x_2/R) = R^{n-(γ_A+γ_B)} ∫F(y)(f∗f)(y/R) dy`.
pub fn commutator_scaling<T: Real>(
    profile: &CommutatorProfile<T>,
    gamma_a: T,
    gamma_b: T,
    kernel: &SmearingKernel<T>,
    r_grid: &[T],
) -> Result<CommutatorScalingResult<T>> {
    profile.validate()?;
    if !(gamma_a > T::zero() && gamma_b > T::zero()) {
        return Err(domain("commutator scaling needs gamma_A, gamma_B > 0"));
    }
    let n = profile.n();
    if kernel.n() != n {
        return Err(Error::Dimension(format!("kernel n = {} but profile n = {n}", kernel.n())));
    }
    if r_grid.len() < 2 || r_grid.iter().any(|r| !(*r > T::zero())) {
        return Err(Error::Grid("R grid needs at least two positive radii".into()));
    }
    let k2 = kernel.self_convolution(DEFAULT_K2_TOLERANCE)?;
    let sphere = unit_sphere_area::<T>(n);
    let exponent = lit::<T>(n as f64) - gamma_a - gamma_b;
    let tol = Tolerance::new(1e-300, 1e-12);
    let mut bound = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let reach = r * lit(4.0);
        let (hi, scale) = match *profile {
            CommutatorProfile::StrictlyLocal { radius, .. } => (radius.min(reach), radius),
            CommutatorProfile::IntegrableTail { xi, .. } => ((xi * lit(80.0)).min(reach), xi),
        };
        let mut breaks = vec![T::zero()];
        let mut b = scale;
        while b < hi {
            breaks.push(b);
            b = b + scale;
        }
        breaks.push(hi);
        let est = integrate(
            |rho: T| rho.powi(n as i32 - 1) * profile.eval_radial(rho) * k2.eval(rho / r),
            &breaks,
            tol,
        );
        if !est.converged {
            return Err(Error::Numerical(format!("commutator bound quadrature failed at R = {r}")));
        }
        bound.push(r.powf(exponent) * sphere * est.value);
    }
    let fit = log_log_fit(r_grid, &bound)?;
    let r_last = *r_grid.last().unwrap();
    Ok(CommutatorScalingResult {
        profile: *profile,
        gamma_a,
        gamma_b,
        r_grid: r_grid.to_vec(),
        prefactor: *bound.last().unwrap() / r_last.powf(exponent),
        prefactor_limit: profile.integral() * k2.eval(T::zero()),
        bound,
        slope: fit.slope,
        predicted_slope: exponent,
    })
}

// ---------------------------------------------------------------------------
// spectral models and time correlations

/// Two-point model from the factored commutator density `ω·g(ω)`:
/// `W_AB(ω) = ω g(ω)/(1-e^{-βω})`, equal to `g(0)/β` at ω = 0.
pub fn kms_transfer<T: Real>(shape: CommutatorShape<T>, beta: T, atom_at_zero: T) -> Result<SpectralModel<T>> {
    if !(beta > T::zero()) {
        return Err(domain(format!("inverse temperature beta = {beta} must be > 0")));
    }
    if !(atom_at_zero >= T::zero()) {
        return Err(domain("atom weight must be >= 0"));
    }
    match shape {
        CommutatorShape::Gaussian { amp, width } if !(amp.is_finite() && width > T::zero()) => {
            return Err(domain("gaussian commutator shape needs finite amp and width > 0"))
        }
        CommutatorShape::Compact { amp, cutoff } if !(amp.is_finite() && cutoff > T::zero()) => {
            return Err(domain("compact commutator shape needs finite amp and cutoff > 0"))
        }
        _ => {}
    }
    Ok(SpectralModel {
        beta,
        density: SpectralDensity::FromCommutator(shape),
        atom_at_zero,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeCorrelation<T> {
    pub t: Vec<T>,
    pub re: Vec<T>,
    pub im: Vec<T>,
    pub source: SpectralModel<T>,
    /// Times were evaluated at `R^δ·t` when set.
    pub rescale_delta: Option<T>,
}

impl<T: Real> TimeCorrelation<T> {
    pub fn value(&self, i: usize) -> Complex<T> {
        Complex::new(self.re[i], self.im[i])
    }
}

/// Half-width (in units of σ) beyond which a Gaussian profile is zero to
/// double precision.
const GAUSSIAN_REACH: f64 = 10.0;

/// `φ̂(s) = ∫φ(u)e^{-isu}du` for the normalized even profiles.
pub fn profile_transform<T: Real>(shape: SpectralShape, s: T) -> Result<T> {
    let s = s.abs();
    if s == T::zero() {
        return Ok(T::one());
    }
    match shape {
        SpectralShape::Gaussian => {
            let reach = lit::<T>(GAUSSIAN_REACH);
            let (re, _) = fourier_window(|u| shape.phi(u), T::zero(), reach, s)?;
            Ok(re + re)
        }
        SpectralShape::Lorentzian => {
            let est = radial_fourier(|u: T| shape.phi(u), s, 1, 1e-11).map_err(|e| {
                Error::Numerical(format!("lorentzian transform tail did not converge at s = {s}: {e}"))
            })?;
            Ok(est.value)
        }
    }
}

/// `∫_lo^hi w(ω)e^{-iωt}dω` with break points every half period.
fn fourier_window<T: Real, W: Fn(T) -> T>(w: W, lo: T, hi: T, t: T) -> Result<(T, T)> {
    if !(hi > lo) {
        return Ok((T::zero(), T::zero()));
    }
    let span = hi - lo;
    let mut pieces = 8usize;
    if t != T::zero() {
        let per = (span * t.abs() / T::PI()).ceil().to_usize().unwrap_or(usize::MAX);
        pieces = pieces.max(per.min(20_000));
    }
    let step = span / lit(pieces as f64);
    let breaks: Vec<T> = (0..=pieces).map(|k| lo + step * lit(k as f64)).collect();
    // absolute floor relative to ∫|w|, since odd parts can cancel to zero
    let mass = integrate(|om: T| w(om).abs(), &breaks, Tolerance::new(1e-300, 1e-6)).value;
    let mut tol = Tolerance::new(0.0, 1e-13).with_max_intervals(8 * pieces + 2000);
    tol.abs = mass * lit(1e-13);
    let re = integrate(|om: T| w(om) * (om * t).cos(), &breaks, tol);
    let im = integrate(|om: T| -w(om) * (om * t).sin(), &breaks, tol);
    if !(re.converged && im.converged) {
        return Err(Error::Numerical(format!(
            "time-correlation quadrature did not converge at t = {t} (error {})",
            re.error.max(im.error)
        )));
    }
    Ok((re.value, im.value))
}

/// `C(t) = a + ∫W_AB(ω)e^{-iωt}dω` per grid time.
pub fn time_correlation<T: Real>(model: &SpectralModel<T>, t_grid: &[T]) -> Result<TimeCorrelation<T>> {
    let mut re = Vec::with_capacity(t_grid.len());
    let mut im = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let c = correlation_at(model, t)?;
        re.push(c.re);
        im.push(c.im);
    }
    Ok(TimeCorrelation {
        t: t_grid.to_vec(),
        re,
        im,
        source: *model,
        rescale_delta: None,
    })
}

/// `C_R(R^δ·t)`: the correlation on the macroscopic time scale.
pub fn time_correlation_rescaled<T: Real>(model: &SpectralModel<T>, t_grid: &[T], r: T, delta: T) -> Result<TimeCorrelation<T>> {
    let factor = r.powf(delta);
    let scaled: Vec<T> = t_grid.iter().map(|t| *t * factor).collect();
    let mut tc = time_correlation(model, &scaled)?;
    tc.t = t_grid.to_vec();
    tc.rescale_delta = Some(delta);
    Ok(tc)
}

fn correlation_at<T: Real>(model: &SpectralModel<T>, t: T) -> Result<Complex<T>> {
    let atom = model.atom_at_zero;
    match model.density {
        SpectralDensity::Scaled { shape, weight, sigma } => {
            Ok(Complex::new(atom + weight * profile_transform(shape, sigma * t)?, T::zero()))
        }
        SpectralDensity::FromCommutator(shape) => {
            let (lo, hi) = shape.window();
            let (re, im) = fourier_window(|om| model.w_ab(om), lo, hi, t)?;
            Ok(Complex::new(atom + re, im))
        }
    }
}

// ---------------------------------------------------------------------------
// KMS checks

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KmsReport<T> {
    pub beta: T,
    pub shape: &'static str,
    /// Max of `|(1-e^{-βω})W_AB - W_[A,B]|` over the ω grid, relative to max |W_[A,B]|.
    pub relation_residual: T,
    /// Max over t of `|(C(t) - K(t)) - D(t)|` with `K = ∫W_[A,B]e^{-iωt}` and
    /// `D = a + ∫e^{-βω}W_AB e^{-iωt}`.
    pub max_violation: T,
    pub t: Vec<T>,
    pub reversed_re: Vec<T>,
    pub reversed_im: Vec<T>,
}

/// Frequency window of the density in absolute units, widened on the
/// negative side where `e^{-βω}` amplifies it. Errors for shapes whose
/// weighted integral diverges.
fn weighted_window<T: Real>(model: &SpectralModel<T>) -> Result<(T, T, T, T)> {
    let beta = model.beta;
    match model.density {
        SpectralDensity::FromCommutator(shape) => {
            let (lo, hi) = shape.window();
            let shift = match shape {
                CommutatorShape::Gaussian { width, .. } => beta * width * width,
                _ => T::zero(),
            };
            Ok((lo, hi, lo - shift, hi))
        }
        SpectralDensity::Scaled { shape: SpectralShape::Lorentzian, .. } => Err(domain(
            "shape class lorentzian: the e^{-βω}-weighted density is not integrable",
        )),
        SpectralDensity::Scaled { sigma, .. } => {
            let reach = sigma * lit(GAUSSIAN_REACH);
            Ok((-reach, reach, -reach - beta * sigma * sigma, reach))
        }
    }
}

/// Both sides of the spectral KMS relation by independent quadratures.
pub fn kms_identity_check<T: Real>(model: &SpectralModel<T>, t_grid: &[T]) -> Result<KmsReport<T>> {
    let (lo, hi, wlo, whi) = weighted_window(model)?;
    let beta = model.beta;
    let atom = model.atom_at_zero;

    let grid_pts = 2001usize;
    let mut residual = T::zero();
    let mut scale = T::zero();
    if hi > lo {
        for k in 0..grid_pts {
            let om = lo + (hi - lo) * lit(k as f64 / (grid_pts - 1) as f64);
            let comm = model.w_comm(om);
            let lhs = -(-beta * om).exp_m1() * model.w_ab(om);
            residual = residual.max((lhs - comm).abs());
            scale = scale.max(comm.abs());
        }
    }
    let relation_residual = if scale > T::zero() { residual / scale } else { residual };

    let mut max_violation = T::zero();
    let mut reversed_re = Vec::with_capacity(t_grid.len());
    let mut reversed_im = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let c = correlation_at(model, t)?;
        let (kr, ki) = fourier_window(|om| model.w_comm(om), lo, hi, t)?;
        let (dr, di) = fourier_window(|om| (-beta * om).exp() * model.w_ab(om), wlo, whi, t)?;
        let (dr, di) = (dr + atom, di);
        let v = ((c.re - kr - dr).powi(2) + (c.im - ki - di).powi(2)).sqrt();
        max_violation = max_violation.max(v);
        reversed_re.push(dr);
        reversed_im.push(di);
    }
    Ok(KmsReport {
        beta,
        shape: density_name(model),
        relation_residual,
        max_violation,
        t: t_grid.to_vec(),
        reversed_re,
        reversed_im,
    })
}

fn density_name<T: Real>(model: &SpectralModel<T>) -> &'static str {
    match model.density {
        SpectralDensity::FromCommutator(shape) => shape.name(),
        SpectralDensity::Scaled { shape, .. } => shape.name(),
    }
}

/// `max |W_AB(-ω) - e^{-βω}W_AB(ω)|` relative to max |W_AB| on the grid;
/// vanishes for odd commutator densities.
pub fn detailed_balance_residual<T: Real>(model: &SpectralModel<T>, omega_grid: &[T]) -> T {
    let mut worst = T::zero();
    let mut scale = T::zero();
    for &om in omega_grid {
        let a = model.w_ab(-om);
        let b = (-model.beta * om).exp() * model.w_ab(om);
        worst = worst.max((a - b).abs());
        scale = scale.max(model.w_ab(om).abs()).max(a.abs());
    }
    if scale > T::zero() {
        worst / scale
    } else {
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstancyReport<T> {
    pub atom: T,
    /// Largest |W_AB| sampled; zero when the transfer forces the density to vanish.
    pub max_density: T,
    pub density_forced_zero: bool,
    /// `max_t |C(t) - a|`.
    pub max_deviation: T,
    pub correlation: TimeCorrelation<T>,
}

/// With `W_[A,B] ≡ 0` the transfer leaves only the atom, so `C(t) = a`.
pub fn constancy_from_vanishing_commutator<T: Real>(atom: T, beta: T, t_grid: &[T]) -> Result<ConstancyReport<T>> {
    let model = kms_transfer(CommutatorShape::Zero, beta, atom)?;
    let max_density = (-200..=200)
        .map(|k| model.w_ab(lit::<T>(k as f64 * 0.05)).abs())
        .fold(T::zero(), T::max);
    let correlation = time_correlation(&model, t_grid)?;
    let max_deviation = (0..t_grid.len())
        .map(|i| (correlation.value(i) - Complex::new(atom, T::zero())).norm())
        .fold(T::zero(), T::max);
    Ok(ConstancyReport {
        atom,
        max_density,
        density_forced_zero: max_density == T::zero(),
        max_deviation,
        correlation,
    })
}

// ---------------------------------------------------------------------------
// critical slowing down

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlowdownReport<T> {
    pub planted_delta: T,
    pub r_grid: Vec<T>,
    /// `max_t |C_R(t) - C_R(0)|/|C_R(0)|` on the fixed t grid.
    pub flatness: Vec<T>,
    pub flatness_monotone: bool,
    /// Log-log slope of flatness against R (negative: flatness → 0).
    pub flatness_slope: Option<T>,
    /// Half-width times `C_R(τ) = C_R(0)/2`.
    pub tau: Vec<T>,
    pub delta_hat: T,
    pub delta_fit_rms: T,
    /// Max over R, t of `|C_R(R^δ̂ t) - C_{R_0}(R_0^δ̂ t)|/|C(0)|`.
    pub collapse_deviation: T,
    /// `sup_t |dC_R/dt|`; scales like `R^{-δ}`.
    pub derivative_sup: Vec<T>,
    pub derivative_slope: T,
}

fn real_correlation<T: Real>(family: &SlowdownFamily<T>, r: T, t: T) -> Result<T> {
    Ok(family.weight * profile_transform(family.shape, family.sigma(r) * t)?)
}

fn half_width<T: Real>(family: &SlowdownFamily<T>, r: T, t_max: T) -> Result<T> {
    let c0 = real_correlation(family, r, T::zero())?;
    let target = c0 * lit(0.5);
    if real_correlation(family, r, t_max)? > target {
        return Err(Error::Grid(format!(
            "half-width at R = {r} lies beyond the t range (max |t| = {t_max}); widen the t grid"
        )));
    }
    let (mut a, mut b) = (T::zero(), t_max);
    for _ in 0..200 {
        let m = (a + b) * lit(0.5);
        if real_correlation(family, r, m)? > target {
            a = m;
        } else {
            b = m;
        }
        if b - a <= b * lit(1e-15) {
            break;
        }
    }
    Ok((a + b) * lit(0.5))
}

/// Flatness, half-width exponent, master-curve collapse and the
/// derivative cross-check for a slowdown family.
pub fn slowdown_experiment<T: Real>(family: &SlowdownFamily<T>, t_grid: &[T], r_grid: &[T]) -> Result<SlowdownReport<T>> {
    if t_grid.is_empty() {
        return Err(Error::Grid("empty t grid".into()));
    }
    if r_grid.len() < 2 || r_grid.iter().any(|r| !(*r > T::zero())) {
        return Err(Error::Grid("R grid needs at least two positive radii".into()));
    }
    let t_max = t_grid.iter().fold(T::zero(), |m, t| m.max(t.abs()));
    let mut flatness = Vec::with_capacity(r_grid.len());
    let mut tau = Vec::with_capacity(r_grid.len());
    let mut derivative_sup = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let c0 = real_correlation(family, r, T::zero())?;
        let mut f = T::zero();
        for &t in t_grid {
            f = f.max((real_correlation(family, r, t)? - c0).abs());
        }
        flatness.push(f / c0.abs());
        let tr = half_width(family, r, t_max)?;
        tau.push(tr);
        // sup |C'| sampled over [0, 3τ] with central differences
        let samples = 600usize;
        let h = tr * lit(1e-4);
        let mut sup = T::zero();
        for k in 1..=samples {
            let t = tr * lit(3.0 * k as f64 / samples as f64);
            let d = (real_correlation(family, r, t + h)? - real_correlation(family, r, t - h)?) / (h + h);
            sup = sup.max(d.abs());
        }
        derivative_sup.push(sup);
    }
    let slack = lit::<T>(1e-12);
    let flatness_monotone = flatness.windows(2).all(|w| w[1] <= w[0] + slack);
    let flatness_slope = log_log_fit(r_grid, &flatness).ok().map(|f| f.slope);
    let tau_fit = log_log_fit(r_grid, &tau)?;
    let delta_hat = tau_fit.slope;
    let deriv_fit = log_log_fit(r_grid, &derivative_sup)?;

    let r0 = r_grid[0];
    let c_ref = real_correlation(family, r0, T::zero())?.abs();
    let mut collapse = T::zero();
    for &t in t_grid {
        let base = real_correlation(family, r0, r0.powf(delta_hat) * t)?;
        for &r in &r_grid[1..] {
            let v = real_correlation(family, r, r.powf(delta_hat) * t)?;
            collapse = collapse.max((v - base).abs() / c_ref);
        }
    }
    Ok(SlowdownReport {
        planted_delta: family.delta,
        r_grid: r_grid.to_vec(),
        flatness,
        flatness_monotone,
        flatness_slope,
        tau,
        delta_hat,
        delta_fit_rms: tau_fit.rms,
        collapse_deviation: collapse,
        derivative_sup,
        derivative_slope: deriv_fit.slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrmodels::{kms_weight, make_slowdown_family};
    use crate::smearing::Profile;

    #[test]
    fn transfer_examples() {
        let m = kms_transfer(CommutatorShape::Gaussian { amp: 1.0, width: 1e6 }, 2.0, 0.0).unwrap();
        assert!((m.w_ab(0.0) - 0.5f64).abs() < 1e-15);
        let m = kms_transfer(CommutatorShape::Gaussian { amp: 1.0, width: 1.0 }, 1.0, 0.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((m.w_ab(1.0) - e / (1.0 - e)).abs() < 1e-15);
        assert!(kms_transfer(CommutatorShape::Gaussian { amp: 1.0, width: 1.0 }, 0.0, 0.0).is_err());
        assert!(kms_transfer(CommutatorShape::Compact { amp: 1.0, cutoff: -1.0 }, 1.0, 0.0).is_err());
    }

    #[test]
    fn gaussian_profile_transform_matches_closed_form() {
        for s in [0.0, 0.1, 0.7, 1.5, 3.0, 6.0, 20.0] {
            let v = profile_transform(SpectralShape::Gaussian, s).unwrap();
            assert!((v - (-s * s / 2.0f64).exp()).abs() < 1e-12, "s = {s}: {v}");
        }
        for s in [0.05, 0.5, 2.0] {
            let v = profile_transform(SpectralShape::Lorentzian, s).unwrap();
            assert!((v - (-s as f64).exp()).abs() < 1e-9, "s = {s}: {v}");
        }
    }

    #[test]
    fn commutator_time_correlation_against_trapezoid() {
        // independent oracle: dense trapezoid on the same window
        let m = kms_transfer(CommutatorShape::Gaussian { amp: 1.0, width: 1.0 }, 1.0, 0.3).unwrap();
        let t = [-2.0, -0.5, 0.0, 0.5, 2.0];
        let tc = time_correlation(&m, &t).unwrap();
        for (i, &ti) in t.iter().enumerate() {
            let n = 40_000;
            let h = 18.0 / n as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for k in 0..=n {
                let om = -9.0 + h * k as f64;
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                let d = (-om * om).exp() * kms_weight(om, 1.0);
                re += w * d * (om * ti).cos() * h;
                im -= w * d * (om * ti).sin() * h;
            }
            assert!((tc.re[i] - 0.3 - re).abs() < 1e-10, "t = {ti}");
            assert!((tc.im[i] - im).abs() < 1e-10, "t = {ti}");
        }
        // conjugate symmetry
        assert!((tc.re[0] - tc.re[4]).abs() < 1e-13 && (tc.im[0] + tc.im[4]).abs() < 1e-13);
    }

    #[test]
    fn pure_atom_is_constant() {
        let r = constancy_from_vanishing_commutator(2.5, 1.0, &[-3.0, 0.0, 1.0, 7.0]).unwrap();
        assert!(r.density_forced_zero);
        assert!(r.max_deviation == 0.0);
        let r = constancy_from_vanishing_commutator(0.0, 1.0, &[-3.0, 2.0]).unwrap();
        assert!(r.correlation.re.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn kms_rejects_lorentzian_and_passes_gaussian() {
        let fam = make_slowdown_family(SpectralShape::Lorentzian, 0.5, 1.0, 1.0).unwrap();
        let e = kms_identity_check(&fam.model(4.0), &[0.0]).unwrap_err();
        assert!(e.to_string().contains("lorentzian"));
        let fam = make_slowdown_family(SpectralShape::Gaussian, 0.5, 1.0, 1.0).unwrap();
        let rep = kms_identity_check(&fam.model(4.0), &[-5.0, -1.0, 0.0, 2.5, 5.0]).unwrap();
        assert!(rep.max_violation < 1e-8, "{}", rep.max_violation);
    }

    #[test]
    fn detailed_balance_for_odd_commutator_density() {
        let m = kms_transfer(CommutatorShape::Compact { amp: 2.0, cutoff: 1.5 }, 0.7, 0.0).unwrap();
        let grid: Vec<f64> = (0..=300).map(|k| -3.0 + 0.02 * k as f64).collect();
        assert!(detailed_balance_residual(&m, &grid) < 1e-12);
    }

    #[test]
    fn commutator_boundary_has_flat_bound() {
        let kernel = SmearingKernel::<f64>::new(1, Profile::Bump).unwrap();
        let prof = CommutatorProfile::IntegrableTail { n: 1, amp: 1.0, xi: 1.0 };
        let res = commutator_scaling(&prof, 0.5, 0.5, &kernel, &[8.0, 32.0, 128.0, 512.0]).unwrap();
        assert!(res.slope.abs() < 0.05, "{}", res.slope);
        assert!((res.prefactor / res.prefactor_limit - 1.0).abs() < 1e-3);
    }

    #[test]
    fn half_width_outside_grid_is_an_error() {
        let fam = make_slowdown_family(SpectralShape::Gaussian, 1.0, 1.0, 1.0).unwrap();
        let t: Vec<f64> = (-5..=5).map(|k| k as f64).collect();
        let e = slowdown_experiment(&fam, &t, &[4.0, 256.0]).unwrap_err();
        assert!(e.to_string().contains("widen"));
    }
}
