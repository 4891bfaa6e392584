//! Synthetic correlation hierarchies with known decay, commutator norm
//! profiles and spectral two-point models.
//!
//! Truncated functions are evaluated on difference coordinates
//! `y_i = x_i - x_{i+1}`, passed as one flat slice of `(l-1)·n` numbers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::{lit, norm, unit_sphere_area, Real};
use crate::smearing::bump_profile;
use crate::truncation::partition_sum;

pub const MAX_DIMENSION: usize = 3;
pub const MAX_ORDER: usize = 5;

/// `W_2(y) = (c0 + f_amp·e^{-f_rate|y|})·(1+|y|²)^{-(n-α)/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct PowerLawSpec<T> {
    pub n: usize,
    pub alpha: T,
    #[serde(default = "one")]
    pub c0: T,
    #[serde(default)]
    pub f_amp: T,
    #[serde(default = "one")]
    pub f_rate: T,
}

fn one<T: Real>() -> T {
    T::one()
}

/// Map keyed by order; accepts the string keys JSON objects carry.
fn order_keys<'de, D, T>(d: D) -> std::result::Result<BTreeMap<usize, T>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    let raw = BTreeMap::<String, T>::deserialize(d)?;
    raw.into_iter()
        .map(|(k, v)| {
            k.trim()
                .parse::<usize>()
                .map(|l| (l, v))
                .map_err(|_| serde::de::Error::custom(format!("channel key '{k}' is not an order")))
        })
        .collect()
}

impl<T: Real> PowerLawSpec<T> {
    pub fn new(n: usize, alpha: T, c0: T) -> Self {
        PowerLawSpec {
            n,
            alpha,
            c0,
            f_amp: T::zero(),
            f_rate: T::one(),
        }
    }

    pub fn with_correction(mut self, f_amp: T, f_rate: T) -> Self {
        self.f_amp = f_amp;
        self.f_rate = f_rate;
        self
    }
}

/// `W_l(y) = (c0 + F(y)) / (1 + H_l(y))`, `H_l(y) = (Σ|y_i|²)^{α'_l/2}`,
/// one channel per listed order. Orders without a channel have vanishing
/// truncated functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct HomogeneousChannelSpec<T> {
    pub n: usize,
    #[serde(deserialize_with = "order_keys")]
    pub alpha_prime: BTreeMap<usize, T>,
    #[serde(default = "one")]
    pub c0: T,
    #[serde(default)]
    pub f_amp: T,
    #[serde(default = "one")]
    pub f_rate: T,
}

impl<T: Real> HomogeneousChannelSpec<T> {
    pub fn new(n: usize, channels: impl IntoIterator<Item = (usize, T)>) -> Self {
        HomogeneousChannelSpec {
            n,
            alpha_prime: channels.into_iter().collect(),
            c0: T::one(),
            f_amp: T::zero(),
            f_rate: T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub enum TwoPointSpec<T> {
    Exponential { n: usize, xi: T },
    PowerLaw(PowerLawSpec<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub enum FamilySpec<T> {
    /// `W_l(y) = exp(-|y|/ξ)` for every order: integrable clustering.
    ExponentialCluster { n: usize, xi: T, max_order: usize },
    PowerLaw(PowerLawSpec<T>),
    /// The scale-invariant two-point function `c0·|y|^{-(n-α)}`. Singular at
    /// the origin, so it is excluded from the finite-everywhere zoo invariant.
    ExactPowerLaw { n: usize, alpha: T, c0: T },
    /// Gaussian hierarchy: only the two-point function is connected.
    QuasiFree { two_point: TwoPointSpec<T>, max_order: usize },
    HomogeneousChannel(HomogeneousChannelSpec<T>),
}

#[derive(Debug, Clone, PartialEq)]
enum Model<T> {
    Exponential { xi: T },
    PowerLaw(PowerLawSpec<T>),
    ExactPowerLaw { alpha: T, c0: T },
    QuasiFree(TwoPointSpec<T>),
    Homogeneous(HomogeneousChannelSpec<T>),
}

/// An evaluable correlation hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFamily<T> {
    n: usize,
    max_order: usize,
    one_point: T,
    model: Model<T>,
    decay_meta: BTreeMap<usize, T>,
}

fn check_dimension(n: usize) -> Result<()> {
    if !(1..=MAX_DIMENSION).contains(&n) {
        return Err(domain(format!("dimension n = {n} outside 1..={MAX_DIMENSION}")));
    }
    Ok(())
}

fn check_max_order(l: usize) -> Result<()> {
    if !(2..=MAX_ORDER).contains(&l) {
        return Err(domain(format!("max_order = {l} outside 2..={MAX_ORDER}")));
    }
    Ok(())
}

fn check_alpha<T: Real>(n: usize, alpha: T) -> Result<()> {
    if !(alpha > T::zero() && alpha < lit(n as f64)) {
        return Err(domain(format!("alpha = {alpha} violates 0 < alpha < n = {n}")));
    }
    Ok(())
}

fn check_correction<T: Real>(c0: T, f_amp: T, f_rate: T) -> Result<()> {
    if !(c0 > T::zero()) {
        return Err(domain(format!("c0 = {c0} must be > 0")));
    }
    if f_amp < T::zero() || f_rate < T::zero() {
        return Err(domain("f_amp and f_rate must be >= 0"));
    }
    if f_amp > T::zero() && f_rate <= T::zero() {
        return Err(domain("f_rate must be > 0 when f_amp > 0 (F must be integrable)"));
    }
    Ok(())
}

fn check_power_law<T: Real>(s: &PowerLawSpec<T>) -> Result<()> {
    check_dimension(s.n)?;
    check_alpha(s.n, s.alpha)?;
    check_correction(s.c0, s.f_amp, s.f_rate)
}

fn check_xi<T: Real>(xi: T) -> Result<()> {
    if !(xi > T::zero()) {
        return Err(domain(format!("xi = {xi} must be > 0")));
    }
    Ok(())
}

fn power_law_value<T: Real>(s: &PowerLawSpec<T>, r: T) -> T {
    let expo = -(lit::<T>(s.n as f64) - s.alpha) * lit(0.5);
    (s.c0 + s.f_amp * (-s.f_rate * r).exp()) * (T::one() + r * r).powf(expo)
}

fn two_point_value<T: Real>(s: &TwoPointSpec<T>, r: T) -> T {
    match s {
        TwoPointSpec::Exponential { xi, .. } => (-r / *xi).exp(),
        TwoPointSpec::PowerLaw(p) => power_law_value(p, r),
    }
}

/// Builds a family, validating every parameter domain.
pub fn make_family<T: Real>(spec: &FamilySpec<T>) -> Result<CorrelationFamily<T>> {
    let mut decay_meta = BTreeMap::new();
    let (n, max_order, model) = match spec {
        FamilySpec::ExponentialCluster { n, xi, max_order } => {
            check_dimension(*n)?;
            check_xi(*xi)?;
            check_max_order(*max_order)?;
            (*n, *max_order, Model::Exponential { xi: *xi })
        }
        FamilySpec::PowerLaw(s) => {
            check_power_law(s)?;
            decay_meta.insert(2, lit::<T>(s.n as f64) - s.alpha);
            (s.n, 2, Model::PowerLaw(*s))
        }
        FamilySpec::ExactPowerLaw { n, alpha, c0 } => {
            check_dimension(*n)?;
            check_alpha(*n, *alpha)?;
            check_correction(*c0, T::zero(), T::zero())?;
            decay_meta.insert(2, lit::<T>(*n as f64) - *alpha);
            (
                *n,
                2,
                Model::ExactPowerLaw {
                    alpha: *alpha,
                    c0: *c0,
                },
            )
        }
        FamilySpec::QuasiFree { two_point, max_order } => {
            check_max_order(*max_order)?;
            let n = match two_point {
                TwoPointSpec::Exponential { n, xi } => {
                    check_dimension(*n)?;
                    check_xi(*xi)?;
                    *n
                }
                TwoPointSpec::PowerLaw(p) => {
                    check_power_law(p)?;
                    decay_meta.insert(2, lit::<T>(p.n as f64) - p.alpha);
                    p.n
                }
            };
            (n, *max_order, Model::QuasiFree(*two_point))
        }
        FamilySpec::HomogeneousChannel(s) => {
            check_dimension(s.n)?;
            check_correction(s.c0, s.f_amp, s.f_rate)?;
            if s.alpha_prime.is_empty() {
                return Err(domain("homogeneous channel family needs at least one channel"));
            }
            for (&l, &ap) in &s.alpha_prime {
                check_max_order(l)?;
                let upper = lit::<T>(((l - 1) * s.n) as f64);
                if !(ap > T::zero() && ap < upper) {
                    return Err(domain(format!(
                        "alpha'_{l} = {ap} violates 0 < alpha'_l < (l-1)·n = {upper}"
                    )));
                }
                decay_meta.insert(l, ap);
            }
            let max = *s.alpha_prime.keys().max().unwrap();
            (s.n, max, Model::Homogeneous(s.clone()))
        }
    };
    Ok(CorrelationFamily {
        n,
        max_order,
        one_point: T::zero(),
        model,
        decay_meta,
    })
}

impl<T: Real> CorrelationFamily<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn one_point(&self) -> T {
        self.one_point
    }

    pub fn with_one_point(mut self, w1: T) -> Self {
        self.one_point = w1;
        self
    }

    /// Declared homogeneity degrees `α'_l` by order.
    pub fn decay_meta(&self) -> &BTreeMap<usize, T> {
        &self.decay_meta
    }

    pub fn kind_name(&self) -> &'static str {
        match self.model {
            Model::Exponential { .. } => "exponential_cluster",
            Model::PowerLaw(_) => "power_law",
            Model::ExactPowerLaw { .. } => "exact_power_law",
            Model::QuasiFree(_) => "quasi_free",
            Model::Homogeneous(_) => "homogeneous_channel",
        }
    }

    /// Critical two-point exponent α (W_2 ~ |y|^{-(n-α)}), when the family has one.
    pub fn two_point_alpha(&self) -> Option<T> {
        self.decay_meta.get(&2).map(|ap| lit::<T>(self.n as f64) - *ap)
    }

    /// Constant `c0` in front of the leading power law, if any.
    pub fn leading_amplitude(&self) -> Option<T> {
        match &self.model {
            Model::PowerLaw(p) => Some(p.c0),
            Model::ExactPowerLaw { c0, .. } => Some(*c0),
            Model::QuasiFree(TwoPointSpec::PowerLaw(p)) => Some(p.c0),
            Model::Homogeneous(h) => Some(h.c0),
            _ => None,
        }
    }

    /// Decay length `1/f_rate` of the short-range correction `F`, if present.
    pub fn correction_length(&self) -> Option<T> {
        let (amp, rate) = match &self.model {
            Model::PowerLaw(p) | Model::QuasiFree(TwoPointSpec::PowerLaw(p)) => (p.f_amp, p.f_rate),
            Model::Homogeneous(h) => (h.f_amp, h.f_rate),
            _ => return None,
        };
        (amp > T::zero()).then(|| rate.recip())
    }

    /// Scale ξ when every truncated function is exactly `exp(-|y|/ξ)` (or zero).
    pub fn exponential_scale(&self) -> Option<T> {
        match &self.model {
            Model::Exponential { xi } => Some(*xi),
            Model::QuasiFree(TwoPointSpec::Exponential { xi, .. }) => Some(*xi),
            _ => None,
        }
    }

    /// True when the truncated functions diverge at coincident points.
    pub fn singular_at_origin(&self) -> bool {
        matches!(self.model, Model::ExactPowerLaw { .. })
    }

    /// True when `W^T_l ≡ 0`.
    pub fn vanishes_at_order(&self, l: usize) -> bool {
        match &self.model {
            Model::QuasiFree(_) => l >= 3,
            Model::PowerLaw(_) | Model::ExactPowerLaw { .. } => l >= 3,
            Model::Homogeneous(h) => !h.alpha_prime.contains_key(&l),
            Model::Exponential { .. } => false,
        }
    }

    /// `H_l(y) = |y|^{α'_l}` for homogeneous channels.
    pub fn homogeneous_h(&self, l: usize, y: &[T]) -> Option<T> {
        match &self.model {
            Model::Homogeneous(h) => h.alpha_prime.get(&l).map(|ap| norm(y).powf(*ap)),
            _ => None,
        }
    }

    fn check_order(&self, l: usize) -> Result<()> {
        if l < 2 || l > self.max_order {
            return Err(Error::OrderOutOfRange {
                order: l,
                max_order: self.max_order,
            });
        }
        Ok(())
    }

    /// Truncated `l`-point function at difference coordinates `y`
    /// (`(l-1)·n` numbers).
    pub fn eval_truncated(&self, l: usize, y: &[T]) -> Result<T> {
        self.check_order(l)?;
        if y.len() != (l - 1) * self.n {
            return Err(Error::Dimension(format!(
                "order {l} in n = {} needs {} difference coordinates, got {}",
                self.n,
                (l - 1) * self.n,
                y.len()
            )));
        }
        Ok(self.truncated_unchecked(l, y))
    }

    /// [`Self::eval_truncated`] without argument checks; used on hot paths.
    #[inline]
    pub fn truncated_unchecked(&self, l: usize, y: &[T]) -> T {
        let r = norm(y);
        match &self.model {
            Model::Exponential { xi } => (-r / *xi).exp(),
            Model::PowerLaw(p) => {
                if l == 2 {
                    power_law_value(p, r)
                } else {
                    T::zero()
                }
            }
            Model::ExactPowerLaw { alpha, c0 } => {
                if l == 2 {
                    *c0 * r.powf(-(lit::<T>(self.n as f64) - *alpha))
                } else {
                    T::zero()
                }
            }
            Model::QuasiFree(tp) => {
                if l == 2 {
                    two_point_value(tp, r)
                } else {
                    T::zero()
                }
            }
            Model::Homogeneous(h) => match h.alpha_prime.get(&l) {
                Some(ap) => (h.c0 + h.f_amp * (-h.f_rate * r).exp()) / (T::one() + r.powf(*ap)),
                None => T::zero(),
            },
        }
    }

    /// Radial profile of the two-point function, `W_2(r·e_1)`. All zoo
    /// two-point functions are isotropic.
    pub fn two_point_radial(&self, r: T) -> T {
        let mut y = [T::zero(); MAX_DIMENSION];
        y[0] = r;
        self.truncated_unchecked(2, &y[..self.n])
    }

    /// Full (untruncated) `l`-point function at absolute points `x`
    /// (`l·n` numbers), assembled from truncated functions by the partition sum.
    pub fn eval_full(&self, l: usize, x: &[T]) -> Result<T> {
        if x.len() != l * self.n {
            return Err(Error::Dimension(format!(
                "{l} points in n = {} need {} coordinates, got {}",
                self.n,
                l * self.n,
                x.len()
            )));
        }
        if l == 0 {
            return Err(domain("order must be >= 1"));
        }
        if l == 1 {
            return Ok(self.one_point);
        }
        if l > self.max_order {
            return Err(Error::OrderOutOfRange {
                order: l,
                max_order: self.max_order,
            });
        }
        let n = self.n;
        partition_sum(l, |block| {
            if block.len() == 1 {
                return Ok(self.one_point);
            }
            let mut y = Vec::with_capacity((block.len() - 1) * n);
            for w in block.windows(2) {
                for d in 0..n {
                    y.push(x[w[0] * n + d] - x[w[1] * n + d]);
                }
            }
            self.eval_truncated(block.len(), &y)
        })
    }
}

/// Norm profile `F(y) = ‖[A, B(y)]‖` of an equal-time commutator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CommutatorProfile<T> {
    /// `F = amp` for `|y| <= radius`, zero outside.
    StrictlyLocal { n: usize, radius: T, amp: T },
    /// `F = amp·exp(-|y|/xi)`.
    IntegrableTail { n: usize, amp: T, xi: T },
}

impl<T: Real> CommutatorProfile<T> {
    pub fn validate(&self) -> Result<()> {
        let (n, a, b) = match *self {
            CommutatorProfile::StrictlyLocal { n, radius, amp } => (n, radius, amp),
            CommutatorProfile::IntegrableTail { n, amp, xi } => (n, xi, amp),
        };
        check_dimension(n)?;
        if !(a > T::zero() && b > T::zero()) {
            return Err(domain("commutator profile parameters must be > 0"));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        match *self {
            CommutatorProfile::StrictlyLocal { n, .. } | CommutatorProfile::IntegrableTail { n, .. } => n,
        }
    }

    pub fn eval_radial(&self, r: T) -> T {
        match *self {
            CommutatorProfile::StrictlyLocal { radius, amp, .. } => {
                if r <= radius {
                    amp
                } else {
                    T::zero()
                }
            }
            CommutatorProfile::IntegrableTail { amp, xi, .. } => amp * (-r / xi).exp(),
        }
    }

    /// Radius beyond which the profile is zero, if finite.
    pub fn support_radius(&self) -> Option<T> {
        match *self {
            CommutatorProfile::StrictlyLocal { radius, .. } => Some(radius),
            CommutatorProfile::IntegrableTail { .. } => None,
        }
    }

    /// `∫ F(y) d^n y` in closed form.
    pub fn integral(&self) -> T {
        let n = self.n();
        match *self {
            CommutatorProfile::StrictlyLocal { radius, amp, .. } => {
                amp * unit_sphere_area::<T>(n) * radius.powi(n as i32) / lit(n as f64)
            }
            CommutatorProfile::IntegrableTail { amp, xi, .. } => {
                // S_{n-1} ∫ r^{n-1} e^{-r/ξ} dr = S_{n-1} (n-1)! ξ^n
                let fact: f64 = (1..n).map(|k| k as f64).product();
                amp * unit_sphere_area::<T>(n) * lit(fact) * xi.powi(n as i32)
            }
        }
    }
}

/// `g(ω)` in the factored commutator density `W_[A,B](ω) = ω·g(ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CommutatorShape<T> {
    /// `g = amp·exp(-ω²/width²)`.
    Gaussian { amp: T, width: T },
    /// `g = amp·f(|ω|/cutoff)` with the bump profile; support `|ω| <= 2·cutoff`.
    Compact { amp: T, cutoff: T },
    Zero,
}

impl<T: Real> CommutatorShape<T> {
    pub fn g(&self, omega: T) -> T {
        match *self {
            CommutatorShape::Gaussian { amp, width } => amp * (-(omega / width).powi(2)).exp(),
            CommutatorShape::Compact { amp, cutoff } => amp * bump_profile(omega.abs() / cutoff),
            CommutatorShape::Zero => T::zero(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CommutatorShape::Gaussian { .. } => "gaussian",
            CommutatorShape::Compact { .. } => "compact",
            CommutatorShape::Zero => "zero",
        }
    }

    /// Frequency window outside which `g` is negligible (or zero).
    pub(crate) fn window(&self) -> (T, T) {
        match *self {
            CommutatorShape::Gaussian { width, .. } => {
                let w = width * lit(9.0);
                (-w, w)
            }
            CommutatorShape::Compact { cutoff, .. } => {
                let w = cutoff * lit(2.0);
                (-w, w)
            }
            CommutatorShape::Zero => (T::zero(), T::zero()),
        }
    }
}

/// Normalized even profile φ (∫φ = 1) for concentrating two-point densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralShape {
    /// `φ(u) = e^{-u²/2}/√(2π)`
    Gaussian,
    /// `φ(u) = 1/(π(1+u²))`
    Lorentzian,
}

impl SpectralShape {
    pub fn phi<T: Real>(&self, u: T) -> T {
        match self {
            SpectralShape::Gaussian => (-u * u * lit(0.5)).exp() / (T::PI() + T::PI()).sqrt(),
            SpectralShape::Lorentzian => T::one() / (T::PI() * (T::one() + u * u)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpectralShape::Gaussian => "gaussian",
            SpectralShape::Lorentzian => "lorentzian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralDensity<T> {
    /// Two-point weight obtained from a factored commutator density.
    FromCommutator(CommutatorShape<T>),
    /// Two-point weight `(weight/σ)·φ(ω/σ)` given directly.
    Scaled { shape: SpectralShape, weight: T, sigma: T },
}

/// `ω / (1 - e^{-βω})`, continued to `1/β` at `ω = 0`.
#[inline]
pub fn kms_weight<T: Real>(omega: T, beta: T) -> T {
    if omega == T::zero() {
        return beta.recip();
    }
    omega / -(-beta * omega).exp_m1()
}

/// KMS-consistent two-point spectral model at inverse temperature β,
/// optionally with an atom at ω = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralModel<T> {
    pub beta: T,
    pub density: SpectralDensity<T>,
    pub atom_at_zero: T,
}

impl<T: Real> SpectralModel<T> {
    /// Factor `g` of the commutator density `W_[A,B](ω) = ω·g(ω)`.
    pub fn g(&self, omega: T) -> T {
        match self.density {
            SpectralDensity::FromCommutator(shape) => shape.g(omega),
            SpectralDensity::Scaled { .. } => self.w_ab(omega) / kms_weight(omega, self.beta),
        }
    }

    /// `W_[A,B](ω)`.
    pub fn w_comm(&self, omega: T) -> T {
        match self.density {
            SpectralDensity::FromCommutator(shape) => omega * shape.g(omega),
            SpectralDensity::Scaled { .. } => -(-self.beta * omega).exp_m1() * self.w_ab(omega),
        }
    }

    /// Continuous part of the two-point weight `W_AB(ω)`.
    pub fn w_ab(&self, omega: T) -> T {
        match self.density {
            SpectralDensity::FromCommutator(shape) => shape.g(omega) * kms_weight(omega, self.beta),
            SpectralDensity::Scaled { shape, weight, sigma } => weight / sigma * shape.phi(omega / sigma),
        }
    }

    /// Concentration scale of the density.
    pub fn sigma(&self) -> T {
        match self.density {
            SpectralDensity::FromCommutator(CommutatorShape::Gaussian { width, .. }) => width,
            SpectralDensity::FromCommutator(CommutatorShape::Compact { cutoff, .. }) => cutoff,
            SpectralDensity::FromCommutator(CommutatorShape::Zero) => T::zero(),
            SpectralDensity::Scaled { sigma, .. } => sigma,
        }
    }

    /// Frequency window carrying the continuous density for commutator-based
    /// models; `None` for scaled densities, which are integrated in their own
    /// units.
    pub fn commutator_window(&self) -> Option<(T, T)> {
        match self.density {
            SpectralDensity::FromCommutator(shape) => Some(shape.window()),
            SpectralDensity::Scaled { .. } => None,
        }
    }
}

/// Family `R ↦` spectral model whose two-point density concentrates at
/// ω = 0 with width `σ_R = c·R^{-δ}` and fixed total weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlowdownFamily<T> {
    pub shape: SpectralShape,
    pub delta: T,
    pub c: T,
    pub beta: T,
    pub weight: T,
}

pub fn make_slowdown_family<T: Real>(shape: SpectralShape, delta: T, c: T, beta: T) -> Result<SlowdownFamily<T>> {
    if !(delta > T::zero()) {
        return Err(domain(format!("slowdown exponent delta = {delta} must be > 0")));
    }
    if !(c > T::zero() && beta > T::zero()) {
        return Err(domain("slowdown family needs c > 0 and beta > 0"));
    }
    Ok(SlowdownFamily {
        shape,
        delta,
        c,
        beta,
        weight: T::one(),
    })
}

impl<T: Real> SlowdownFamily<T> {
    pub fn sigma(&self, r: T) -> T {
        self.c * r.powf(-self.delta)
    }

    pub fn model(&self, r: T) -> SpectralModel<T> {
        SpectralModel {
            beta: self.beta,
            density: SpectralDensity::Scaled {
                shape: self.shape,
                weight: self.weight,
                sigma: self.sigma(r),
            },
            atom_at_zero: T::zero(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn power_law(n: usize, alpha: f64) -> CorrelationFamily<f64> {
        make_family(&FamilySpec::PowerLaw(PowerLawSpec::new(n, alpha, 1.0))).unwrap()
    }

    #[test]
    fn quasi_free_higher_orders_vanish() {
        let fam = make_family(&FamilySpec::QuasiFree {
            two_point: TwoPointSpec::PowerLaw(PowerLawSpec::new(1, 0.5, 1.0)),
            max_order: 4,
        })
        .unwrap();
        assert_eq!(fam.eval_truncated(3, &[0.3, -1.2]).unwrap(), 0.0);
        assert_eq!(fam.eval_truncated(4, &[0.3, -1.2, 7.0]).unwrap(), 0.0);
    }

    #[test]
    fn power_law_values() {
        let fam = power_law(1, 0.5);
        assert_eq!(fam.eval_truncated(2, &[0.0]).unwrap(), 1.0);
        assert_relative_eq!(fam.eval_truncated(2, &[3.0]).unwrap(), 10f64.powf(-0.25), max_relative = 1e-15);
        assert_relative_eq!(fam.eval_truncated(2, &[3.0]).unwrap(), 0.562_341_325_190_349, max_relative = 1e-14);
    }

    #[test]
    fn exponential_at_origin() {
        let fam = make_family(&FamilySpec::ExponentialCluster {
            n: 1,
            xi: 1.0,
            max_order: 4,
        })
        .unwrap();
        assert_eq!(fam.eval_truncated(2, &[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn homogeneous_ratio() {
        let fam = make_family(&FamilySpec::HomogeneousChannel(HomogeneousChannelSpec::new(2, [(3, 1.5)]))).unwrap();
        let y = [1.0, 0.0, 0.0, 1.0];
        let y2 = [2.0, 0.0, 0.0, 2.0];
        let ratio = fam.homogeneous_h(3, &y2).unwrap() / fam.homogeneous_h(3, &y).unwrap();
        assert_relative_eq!(ratio, 2.828_427_124_746_19, max_relative = 1e-14);
    }

    #[test]
    fn domain_violations_name_the_bound() {
        let e = make_family(&FamilySpec::PowerLaw(PowerLawSpec::new(1, 1.0, 1.0))).unwrap_err();
        assert!(e.to_string().contains("0 < alpha < n"), "{e}");
        let e = make_family(&FamilySpec::HomogeneousChannel(HomogeneousChannelSpec::new(1, [(3, 2.0)]))).unwrap_err();
        assert!(e.to_string().contains("(l-1)·n"), "{e}");
        assert!(make_family(&FamilySpec::PowerLaw(PowerLawSpec::new(4, 0.5, 1.0))).is_err());
        assert!(make_family(&FamilySpec::ExponentialCluster { n: 1, xi: 1.0, max_order: 6 }).is_err());
        assert!(make_family(&FamilySpec::PowerLaw(PowerLawSpec::new(1, 0.5, 1.0).with_correction(1.0, 0.0))).is_err());
    }

    #[test]
    fn order_and_shape_errors() {
        let fam = power_law(1, 0.5);
        assert_eq!(
            fam.eval_truncated(3, &[0.0, 0.0]).unwrap_err(),
            Error::OrderOutOfRange { order: 3, max_order: 2 }
        );
        assert!(matches!(fam.eval_truncated(2, &[0.0, 1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn full_function_low_orders() {
        let fam = power_law(1, 0.5);
        assert_eq!(fam.eval_full(2, &[0.0, 3.0]).unwrap(), fam.eval_truncated(2, &[-3.0]).unwrap());
        let fam = fam.with_one_point(0.25);
        assert_eq!(fam.eval_full(1, &[9.0]).unwrap(), 0.25);
        assert_relative_eq!(
            fam.eval_full(2, &[0.0, 3.0]).unwrap(),
            fam.eval_truncated(2, &[-3.0]).unwrap() + 0.0625,
            max_relative = 1e-15
        );
    }

    #[test]
    fn quasi_free_four_point_is_wick_sum() {
        let fam = make_family(&FamilySpec::QuasiFree {
            two_point: TwoPointSpec::PowerLaw(PowerLawSpec::new(1, 0.5, 1.0)),
            max_order: 4,
        })
        .unwrap();
        let x = [0.1, 1.7, -2.3, 4.4];
        let w = |i: usize, j: usize| fam.eval_truncated(2, &[x[i] - x[j]]).unwrap();
        let wick = w(0, 1) * w(2, 3) + w(0, 2) * w(1, 3) + w(0, 3) * w(1, 2);
        assert_relative_eq!(fam.eval_full(4, &x).unwrap(), wick, max_relative = 1e-14);
    }

    #[test]
    fn commutator_profile_integrals() {
        let p = CommutatorProfile::IntegrableTail { n: 2, amp: 1.5, xi: 0.7 };
        let numeric = integrate(
            |r: f64| 2.0 * std::f64::consts::PI * r * p.eval_radial(r),
            &[0.0, 5.0, 60.0],
            Tolerance::new(1e-14, 1e-13),
        );
        assert_relative_eq!(p.integral(), numeric.value, max_relative = 1e-10);
        let s = CommutatorProfile::StrictlyLocal { n: 1, radius: 0.5, amp: 2.0 };
        assert_relative_eq!(s.integral(), 2.0, max_relative = 1e-15);
        assert_eq!(s.eval_radial(0.6), 0.0);
    }

    #[test]
    fn kms_weight_limits() {
        assert_eq!(kms_weight(0.0, 2.0), 0.5);
        assert_relative_eq!(kms_weight(1e-12, 2.0), 0.5, max_relative = 1e-9);
        assert_relative_eq!(kms_weight(1.0, 1.0), 1.0 / (1.0 - (-1.0f64).exp()), max_relative = 1e-15);
    }

    #[test]
    fn slowdown_family_scale_and_weight() {
        let fam = make_slowdown_family(SpectralShape::Gaussian, 0.5, 1.0, 1.0).unwrap();
        assert_relative_eq!(fam.sigma(16.0), 0.25, max_relative = 1e-15);
        assert!(make_slowdown_family(SpectralShape::Gaussian, 0.0, 1.0, 1.0).is_err());
        for r in [1.0, 16.0, 256.0] {
            let m = fam.model(r);
            let s = m.sigma();
            let total = integrate(|w: f64| m.w_ab(w), &[-12.0 * s, 0.0, 12.0 * s], Tolerance::new(1e-15, 1e-13));
            assert_relative_eq!(total.value, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn spectral_positivity_for_sign_compatible_shapes() {
        for beta in [0.5, 1.0, 2.0] {
            for shape in [
                CommutatorShape::Gaussian { amp: 1.0, width: 1.3 },
                CommutatorShape::Compact { amp: 0.7, cutoff: 0.8 },
            ] {
                let m = SpectralModel {
                    beta,
                    density: SpectralDensity::FromCommutator(shape),
                    atom_at_zero: 0.0,
                };
                for k in -400..=400 {
                    let w = k as f64 * 0.01;
                    assert!(m.w_ab(w) >= -1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn homogeneity_of_h(r in 0.01f64..100.0, a in -5.0f64..5.0, b in -5.0f64..5.0,
                            c in -5.0f64..5.0, d in -5.0f64..5.0, ap in 0.1f64..1.9) {
            let fam = make_family(&FamilySpec::HomogeneousChannel(HomogeneousChannelSpec::new(1, [(3, ap)]))).unwrap();
            let y = [a, b];
            let ry = [r * a, r * b];
            let h = fam.homogeneous_h(3, &y).unwrap();
            let hr = fam.homogeneous_h(3, &ry).unwrap();
            prop_assert!((hr - r.powf(ap) * h).abs() <= 1e-12 * hr.abs().max(1e-300));
            let fam2 = make_family(&FamilySpec::HomogeneousChannel(HomogeneousChannelSpec::new(2, [(2, ap)]))).unwrap();
            let h2 = fam2.homogeneous_h(2, &[c, d]).unwrap();
            let h2r = fam2.homogeneous_h(2, &[r * c, r * d]).unwrap();
            prop_assert!((h2r - r.powf(ap) * h2).abs() <= 1e-12 * h2r.abs().max(1e-300));
        }

        #[test]
        fn two_point_functions_are_even(a in -50.0f64..50.0, b in -50.0f64..50.0, c in -50.0f64..50.0) {
            let specs = vec![
                FamilySpec::ExponentialCluster { n: 3, xi: 1.3, max_order: 4 },
                FamilySpec::PowerLaw(PowerLawSpec::new(3, 0.7, 1.0).with_correction(0.5, 1.0)),
                FamilySpec::QuasiFree { two_point: TwoPointSpec::Exponential { n: 3, xi: 2.0 }, max_order: 4 },
                FamilySpec::HomogeneousChannel(HomogeneousChannelSpec::new(3, [(2, 1.2), (3, 2.0)])),
            ];
            for s in &specs {
                let fam = make_family(s).unwrap();
                let w = fam.eval_truncated(2, &[a, b, c]).unwrap();
                let wm = fam.eval_truncated(2, &[-a, -b, -c]).unwrap();
                prop_assert!((w - wm).abs() <= 1e-12 * w.abs().max(1e-300));
                prop_assert!(w.is_finite());
            }
        }

        #[test]
        fn quasi_free_closure(x in proptest::collection::vec(-10.0f64..10.0, 4)) {
            let fam = make_family(&FamilySpec::QuasiFree {
                two_point: TwoPointSpec::Exponential { n: 1, xi: 1.7 },
                max_order: 4,
            }).unwrap();
            let w = |i: usize, j: usize| fam.eval_truncated(2, &[x[i] - x[j]]).unwrap();
            let wick = w(0, 1) * w(2, 3) + w(0, 2) * w(1, 3) + w(0, 3) * w(1, 2);
            let full = fam.eval_full(4, &x).unwrap();
            prop_assert!((full - wick).abs() <= 1e-12 * wick.abs().max(1e-300));
        }
    }
}
