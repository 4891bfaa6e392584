//! Scaled truncated correlators over an R-grid.
//!
//! Block mode smears every point with `f_R`, places the blocks at `R·X_i`
//! and renormalises each observable by `R^{-γ}`; after `x → R x` the value is
//!
//! ```text
//! R^{l(n-γ)} ∫ W^T_l(R[(x_1-x_2)+(X_1-X_2)], …) Π f(x_i) dx_i .
//! ```
//!
//! Field mode drops the kernel: `R^{l(n-γ)} W^T_l(R(X_1-X_2), …)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::corrmodels::CorrelationFamily;
use crate::error::{domain, Error, Result};
use crate::qmc::{self, QmcConfig, QmcEstimate};
use crate::quadrature::{integrate, Estimate, Tolerance};
use crate::scalar::{lit, norm, to_f64, unit_sphere_area, Real};
use crate::smearing::{SelfConvolution, SmearingKernel, DEFAULT_K2_TOLERANCE, SUPPORT_RADIUS};

/// Minimal separation `|X_i - X_j|` for disjoint smeared supports.
pub const SUPPORT_SEPARATION: f64 = 2.0 * SUPPORT_RADIUS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Block,
    Field,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Deterministic quadrature through the `K_2` table (l = 2 only).
    #[default]
    Grid,
    Qmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampler {
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub qmc: QmcConfig,
    /// A point is flagged when `stderr > rel_tolerance·|value|`.
    #[serde(default = "default_rel_tolerance")]
    pub rel_tolerance: f64,
}

fn default_rel_tolerance() -> f64 {
    0.25
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler {
            method: Method::Grid,
            qmc: QmcConfig::default(),
            rel_tolerance: default_rel_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRequest<T> {
    pub l: usize,
    pub gamma: T,
    /// Macroscopic base points, one `n`-vector per observable.
    pub x: Vec<Vec<T>>,
    pub r_grid: Vec<T>,
    pub mode: Mode,
    pub sampler: Sampler,
    /// Reject configurations with `|X_i - X_j| <= 4`.
    pub enforce_support: bool,
}

impl<T: Real> ScalingRequest<T> {
    pub fn block(l: usize, gamma: T, x: Vec<Vec<T>>, r_grid: Vec<T>) -> Self {
        ScalingRequest {
            l,
            gamma,
            x,
            r_grid,
            mode: Mode::Block,
            sampler: Sampler {
                method: if l == 2 { Method::Grid } else { Method::Qmc },
                ..Sampler::default()
            },
            enforce_support: false,
        }
    }

    pub fn field(l: usize, gamma: T, x: Vec<Vec<T>>, r_grid: Vec<T>) -> Self {
        ScalingRequest {
            mode: Mode::Field,
            ..Self::block(l, gamma, x, r_grid)
        }
    }

    pub fn with_qmc(mut self, cfg: QmcConfig) -> Self {
        self.sampler.method = Method::Qmc;
        self.sampler.qmc = cfg;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesPoint<T> {
    pub r: T,
    pub value: T,
    pub stderr: T,
    pub samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesMeta {
    pub family: String,
    pub n: usize,
    pub l: usize,
    pub gamma: f64,
    pub mode: Mode,
    pub x: Vec<Vec<f64>>,
    pub r_grid: Vec<f64>,
    pub sampler: Sampler,
    pub estimator: String,
    pub kernel_profile: String,
    pub kernel_resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSeries<T> {
    pub points: Vec<SeriesPoint<T>>,
    /// Some point failed its accuracy target.
    pub flagged: bool,
    pub meta: SeriesMeta,
}

impl<T: Real> ScalingSeries<T> {
    pub fn radii(&self) -> Vec<T> {
        self.points.iter().map(|p| p.r).collect()
    }

    pub fn values(&self) -> Vec<T> {
        self.points.iter().map(|p| p.value).collect()
    }
}

/// Result of a limit-integral estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitEstimate<T> {
    pub value: T,
    pub stderr: T,
    /// The integrable-singularity fallback was needed (supports overlap).
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoincidentReport<T> {
    pub direct_value: T,
    pub direct_stderr: T,
    pub limit_value: T,
    pub limit_stderr: T,
    pub discrepancy: T,
    pub combined_sigma: T,
    pub within_three_sigma: bool,
    /// Direct all-X-zero values over the whole R-grid.
    pub direct_series: Vec<SeriesPoint<T>>,
    pub shrink: Vec<T>,
    pub shrink_values: Vec<T>,
}

/// Evaluates scaled correlators for one family and kernel.
#[derive(Debug, Clone)]
pub struct ScalingEngine<T> {
    family: CorrelationFamily<T>,
    kernel: SmearingKernel<T>,
    k2: SelfConvolution<T>,
}

fn differences<T: Real>(x: &[Vec<T>]) -> Vec<T> {
    let mut y = Vec::new();
    for w in x.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            y.push(*a - *b);
        }
    }
    y
}

/// The `K_2` table is accurate to about 1e-6 relative; tighter quadrature
/// only chases interpolation kinks.
fn quad_tol<T: Real>() -> Tolerance<T> {
    Tolerance::new(1e-300, 1e-9).with_max_intervals(4000)
}

impl<T: Real> ScalingEngine<T> {
    pub fn new(family: CorrelationFamily<T>, kernel: SmearingKernel<T>) -> Result<Self> {
        Self::with_tolerance(family, kernel, DEFAULT_K2_TOLERANCE)
    }

    pub fn with_tolerance(family: CorrelationFamily<T>, kernel: SmearingKernel<T>, k2_tolerance: f64) -> Result<Self> {
        if family.n() != kernel.n() {
            return Err(Error::Dimension(format!(
                "family dimension {} differs from kernel dimension {}",
                family.n(),
                kernel.n()
            )));
        }
        let k2 = kernel.self_convolution(k2_tolerance)?;
        Ok(ScalingEngine { family, kernel, k2 })
    }

    pub fn family(&self) -> &CorrelationFamily<T> {
        &self.family
    }

    pub fn kernel(&self) -> &SmearingKernel<T> {
        &self.kernel
    }

    pub fn k2(&self) -> &SelfConvolution<T> {
        &self.k2
    }

    fn validate(&self, req: &ScalingRequest<T>) -> Result<()> {
        let n = self.family.n();
        if req.l < 2 || req.l > self.family.max_order() {
            return Err(Error::OrderOutOfRange {
                order: req.l,
                max_order: self.family.max_order(),
            });
        }
        if req.x.len() != req.l || req.x.iter().any(|p| p.len() != n) {
            return Err(Error::Dimension(format!("need {} base points of dimension {n}", req.l)));
        }
        if req.r_grid.is_empty() {
            return Err(Error::Grid("empty R-grid".into()));
        }
        if req.r_grid.iter().any(|r| !(*r > T::zero()) || !r.is_finite()) {
            return Err(Error::Grid("R-grid entries must be finite and > 0".into()));
        }
        if req.r_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("R-grid must be strictly increasing".into()));
        }
        if req.x.iter().flatten().any(|v| !v.is_finite()) || !req.gamma.is_finite() {
            return Err(domain("base points and gamma must be finite"));
        }
        if req.mode == Mode::Block && req.enforce_support {
            self.check_support(&req.x)?;
        }
        Ok(())
    }

    fn check_support(&self, x: &[Vec<T>]) -> Result<()> {
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                let d: Vec<T> = x[i].iter().zip(&x[j]).map(|(a, b)| *a - *b).collect();
                if norm(&d) <= lit(SUPPORT_SEPARATION) {
                    return Err(Error::Support(format!(
                        "|X_{} - X_{}| = {} must exceed {SUPPORT_SEPARATION} (twice the kernel support radius)",
                        i + 1,
                        j + 1,
                        norm(&d)
                    )));
                }
            }
        }
        Ok(())
    }

    fn meta(&self, req: &ScalingRequest<T>, estimator: &str) -> SeriesMeta {
        SeriesMeta {
            family: self.family.kind_name().to_string(),
            n: self.family.n(),
            l: req.l,
            gamma: to_f64(req.gamma),
            mode: req.mode,
            x: req.x.iter().map(|p| p.iter().map(|v| to_f64(*v)).collect()).collect(),
            r_grid: req.r_grid.iter().map(|v| to_f64(*v)).collect(),
            sampler: req.sampler,
            estimator: estimator.to_string(),
            kernel_profile: format!("{:?}", self.kernel.profile()).to_lowercase(),
            kernel_resolution: self.kernel.resolution(),
        }
    }

    /// Dispatches on the request mode.
    pub fn run(&self, req: &ScalingRequest<T>) -> Result<ScalingSeries<T>> {
        match req.mode {
            Mode::Block => self.scaled_truncated_block(req),
            Mode::Field => self.scaled_truncated_field(req),
        }
    }

    pub fn scaled_truncated_block(&self, req: &ScalingRequest<T>) -> Result<ScalingSeries<T>> {
        if req.mode != Mode::Block {
            return Err(domain("scaled_truncated_block needs mode = block"));
        }
        self.validate(req)?;
        let n = self.family.n();
        let l = req.l;
        let y = differences(&req.x);

        if self.family.vanishes_at_order(l) {
            let points = req
                .r_grid
                .iter()
                .map(|&r| SeriesPoint {
                    r,
                    value: T::zero(),
                    stderr: T::zero(),
                    samples: 0,
                })
                .collect();
            return Ok(ScalingSeries {
                points,
                flagged: false,
                meta: self.meta(req, "identically_zero"),
            });
        }

        let use_grid = l == 2 && req.sampler.method == Method::Grid;
        let overlapping = y.chunks(n).all(|c| norm(c) < lit(SUPPORT_SEPARATION));
        let importance = !use_grid && self.family.exponential_scale().is_some() && overlapping;
        let estimator = if use_grid {
            "k2_quadrature"
        } else if importance {
            "qmc_exponential_importance"
        } else {
            "qmc_cube"
        };
        if !use_grid && req.sampler.method == Method::Grid {
            return Err(domain(format!("grid sampler supports l = 2 only; order {l} needs method = qmc")));
        }

        let results: Vec<Result<(SeriesPoint<T>, bool)>> = req
            .r_grid
            .par_iter()
            .enumerate()
            .map(|(idx, &r)| {
                let prefactor = r.powf(lit::<T>(l as f64) * (lit::<T>(n as f64) - req.gamma));
                if use_grid {
                    let ynorm = norm(&y);
                    let est = self.k2_weighted(|rho| self.family.two_point_radial(r * rho), ynorm, r.recip(), self.singular_alpha())?;
                    let point = SeriesPoint {
                        r,
                        value: prefactor * est.value,
                        stderr: T::zero(),
                        samples: 0,
                    };
                    Ok((point, !est.converged))
                } else {
                    let est = if importance {
                        self.block_importance(l, r, &y, &req.sampler.qmc, idx as u64)?
                    } else {
                        self.block_cube(l, r, &y, &req.sampler.qmc, idx as u64)?
                    };
                    let value = prefactor * est.value;
                    let stderr = prefactor * est.stderr;
                    let flag = !value.is_finite() || value == T::zero() || stderr > lit::<T>(req.sampler.rel_tolerance) * value.abs();
                    Ok((
                        SeriesPoint {
                            r,
                            value,
                            stderr,
                            samples: est.samples,
                        },
                        flag,
                    ))
                }
            })
            .collect();
        let mut points = Vec::with_capacity(results.len());
        let mut flagged = false;
        for res in results {
            let (p, f) = res?;
            flagged |= f;
            points.push(p);
        }
        Ok(ScalingSeries {
            points,
            flagged,
            meta: self.meta(req, estimator),
        })
    }

    pub fn scaled_truncated_field(&self, req: &ScalingRequest<T>) -> Result<ScalingSeries<T>> {
        if req.mode != Mode::Field {
            return Err(domain("scaled_truncated_field needs mode = field"));
        }
        self.validate(req)?;
        let n = self.family.n();
        let y = differences(&req.x);
        if self.family.singular_at_origin() && y.chunks(n).any(|c| norm(c) == T::zero()) {
            return Err(domain("unsmeared field at coincident points diverges"));
        }
        let mut scaled = vec![T::zero(); y.len()];
        let points = req
            .r_grid
            .iter()
            .map(|&r| {
                for (s, v) in scaled.iter_mut().zip(&y) {
                    *s = r * *v;
                }
                let prefactor = r.powf(lit::<T>(req.l as f64) * (lit::<T>(n as f64) - req.gamma));
                SeriesPoint {
                    r,
                    value: prefactor * self.family.truncated_unchecked(req.l, &scaled),
                    stderr: T::zero(),
                    samples: 0,
                }
            })
            .collect::<Vec<_>>();
        let flagged = points.iter().any(|p| !p.value.is_finite());
        Ok(ScalingSeries {
            points,
            flagged,
            meta: self.meta(req, "closed_form"),
        })
    }

    fn singular_alpha(&self) -> Option<T> {
        if self.family.singular_at_origin() {
            self.family.two_point_alpha()
        } else {
            None
        }
    }

    /// Spherical integral `∫_{S^{n-1}} K_2(|ρω - Y|) dω` for `|Y| = ynorm`.
    fn k2_shell(&self, rho: T, ynorm: T) -> T {
        let n = self.family.n();
        let k2 = &self.k2;
        if ynorm == T::zero() || rho == T::zero() {
            return unit_sphere_area::<T>(n) * k2.eval(rho.max(ynorm));
        }
        if n == 1 {
            return k2.eval((rho - ynorm).abs()) + k2.eval(rho + ynorm);
        }
        let two = lit::<T>(2.0);
        let four = lit::<T>(SUPPORT_SEPARATION);
        let dist = |c: T| (rho * rho + ynorm * ynorm - two * rho * ynorm * c).max(T::zero()).sqrt();
        let edge = (rho * rho + ynorm * ynorm - four * four) / (two * rho * ynorm);
        let tol = Tolerance::new(1e-300, 1e-10);
        if n == 2 {
            let mut breaks = vec![T::zero()];
            if edge.abs() < T::one() {
                breaks.push(edge.acos());
            }
            breaks.push(T::PI());
            two * integrate(|t: T| k2.eval(dist(t.cos())), &breaks, tol).value
        } else {
            let mut breaks = vec![-T::one()];
            if edge.abs() < T::one() {
                breaks.push(edge);
            }
            breaks.push(T::one());
            (T::PI() + T::PI()) * integrate(|c: T| k2.eval(dist(c)), &breaks, tol).value
        }
    }

    /// `∫ w(|u|) K_2(|u - Y|) d^n u` in polar coordinates around the origin.
    /// `peak` is the length scale on which `w` varies near 0; for a weight
    /// singular like `ρ^{-(n-α)}` pass `Some(α)` to integrate in `t = ρ^α`.
    pub fn k2_weighted<W: Fn(T) -> T>(&self, w: W, ynorm: T, peak: T, singular_alpha: Option<T>) -> Result<Estimate<T>> {
        let n = self.family.n();
        let four = lit::<T>(SUPPORT_SEPARATION);
        let lo = (ynorm - four).max(T::zero());
        let hi = ynorm + four;
        let mut breaks = vec![lo];
        if lo == T::zero() {
            let mut b = peak;
            while b < hi {
                breaks.push(b);
                b = b * lit(4.0);
            }
        }
        if ynorm > lo && ynorm < hi {
            breaks.push(ynorm);
        }
        breaks.push(hi);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        let radial = |rho: T| rho.powi(n as i32 - 1) * w(rho) * self.k2_shell(rho, ynorm);
        let est = match singular_alpha {
            Some(alpha) if lo == T::zero() => {
                let inv = alpha.recip();
                let tb: Vec<T> = breaks.iter().map(|b| b.powf(alpha)).collect();
                integrate(
                    |t: T| {
                        let rho = t.powf(inv);
                        radial(rho) * inv * t.powf(inv - T::one())
                    },
                    &tb,
                    quad_tol(),
                )
            }
            _ => integrate(radial, &breaks, quad_tol()),
        };
        if !est.value.is_finite() {
            return Err(Error::Numerical("kernel-weighted radial integral is not finite".into()));
        }
        Ok(est)
    }

    fn block_cube(&self, l: usize, r: T, y: &[T], cfg: &QmcConfig, stream: u64) -> Result<QmcEstimate<T>> {
        let n = self.family.n();
        let dims = l * n;
        let volume = lit::<T>(2.0 * SUPPORT_RADIUS).powi(dims as i32);
        let est = qmc::estimate(dims, cfg, stream, |u: &[f64]| {
            let mut x = [T::zero(); 15];
            for (xi, ui) in x.iter_mut().zip(u) {
                *xi = lit::<T>(ui * 2.0 * SUPPORT_RADIUS - SUPPORT_RADIUS);
            }
            let mut weight = T::one();
            for i in 0..l {
                weight = weight * self.kernel.eval_point(&x[i * n..(i + 1) * n]);
                if weight == T::zero() {
                    return T::zero();
                }
            }
            let mut z = [T::zero(); 12];
            for i in 0..l - 1 {
                for d in 0..n {
                    z[i * n + d] = r * (x[i * n + d] - x[(i + 1) * n + d] + y[i * n + d]);
                }
            }
            weight * self.family.truncated_unchecked(l, &z[..(l - 1) * n])
        })?;
        Ok(QmcEstimate {
            value: est.value * volume,
            stderr: est.stderr * volume,
            samples: est.samples,
        })
    }

    /// Samples `z = y + Y` from the density `∝ e^{-R|z|/ξ}` so that the
    /// exponential correlation cancels exactly; the last point is uniform on
    /// its support cube.
    fn block_importance(&self, l: usize, r: T, y: &[T], cfg: &QmcConfig, stream: u64) -> Result<QmcEstimate<T>> {
        let n = self.family.n();
        let xi = self.family.exponential_scale().expect("exponential family");
        let d = (l - 1) * n;
        let theta = to_f64(xi / r);
        let fact: f64 = (1..d).map(|k| k as f64).product();
        let norm_const = unit_sphere_area::<f64>(d) * fact * theta.powi(d as i32);
        let volume = (2.0 * SUPPORT_RADIUS).powi(n as i32);
        let normal = Normal::new(0.0, 1.0).map_err(|e| Error::Numerical(e.to_string()))?;
        let dims = 2 * d + n;
        let est = qmc::estimate(dims, cfg, stream, |u: &[f64]| {
            let radius = -theta * u[..d].iter().map(|v| v.ln()).sum::<f64>();
            let mut dir = [0.0f64; 12];
            let mut len = 0.0;
            for k in 0..d {
                dir[k] = normal.inverse_cdf(u[d + k]);
                len += dir[k] * dir[k];
            }
            let scale = radius / len.sqrt();
            let mut x = [T::zero(); 15];
            for k in 0..n {
                x[(l - 1) * n + k] = lit::<T>(u[2 * d + k] * 2.0 * SUPPORT_RADIUS - SUPPORT_RADIUS);
            }
            for i in (0..l - 1).rev() {
                for k in 0..n {
                    let yi = lit::<T>(dir[i * n + k] * scale) - y[i * n + k];
                    x[i * n + k] = x[(i + 1) * n + k] + yi;
                }
            }
            let mut weight = T::one();
            for i in 0..l {
                weight = weight * self.kernel.eval_point(&x[i * n..(i + 1) * n]);
                if weight == T::zero() {
                    break;
                }
            }
            weight
        })?;
        let c = lit::<T>(norm_const * volume);
        Ok(QmcEstimate {
            value: est.value * c,
            stderr: est.stderr * c,
            samples: est.samples,
        })
    }

    /// `c0·∫ |y+Y|^{-(n-α)} (f∗f)(y) dy` for the leading power law of the
    /// two-point function. Overlapping supports (`|Y| <= 4`) need
    /// `allow_fallback`, which integrates the integrable singularity directly.
    pub fn limit_prediction_2pt(&self, y: &[T], allow_fallback: bool) -> Result<LimitEstimate<T>> {
        let n = self.family.n();
        if y.len() != n {
            return Err(Error::Dimension(format!("Y must have dimension {n}")));
        }
        let alpha = self
            .family
            .two_point_alpha()
            .ok_or_else(|| domain(format!("family {} has no power-law two-point decay", self.family.kind_name())))?;
        let c0 = self.family.leading_amplitude().unwrap_or(T::one());
        let ynorm = norm(y);
        let fallback = ynorm <= lit(SUPPORT_SEPARATION);
        if fallback && !allow_fallback {
            return Err(Error::Support(format!(
                "|Y| = {ynorm} must exceed {SUPPORT_SEPARATION} (twice the kernel support radius) unless the integrable-singularity fallback is enabled"
            )));
        }
        let expo = -(lit::<T>(n as f64) - alpha);
        let est = self.k2_weighted(|rho| c0 * rho.powf(expo), ynorm, lit(0.05), Some(alpha))?;
        if !est.converged {
            return Err(Error::Numerical(format!("limit integral did not converge (error {})", est.error)));
        }
        Ok(LimitEstimate {
            value: est.value,
            stderr: T::zero(),
            fallback,
        })
    }

    /// Normal-regime two-point limit `Ŵ^T_2(0)·K_2(Y)` with
    /// `Ŵ^T_2(0) = ∫ W^T_2`.
    pub fn limit_prediction_normal(&self, y: &[T]) -> Result<T> {
        let n = self.family.n();
        if y.len() != n {
            return Err(Error::Dimension(format!("Y must have dimension {n}")));
        }
        if self.family.two_point_alpha().is_some() {
            return Err(domain("two-point function is not integrable (critical family)"));
        }
        let area = unit_sphere_area::<T>(n);
        let breaks: Vec<T> = [0.0, 1.0, 4.0, 16.0, 64.0, 256.0, 1024.0].iter().map(|v| lit(*v)).collect();
        let w0 = integrate(|r: T| area * r.powi(n as i32 - 1) * self.family.two_point_radial(r), &breaks, quad_tol());
        Ok(w0.value * self.k2.eval_vec(y))
    }

    /// `c0·∫ H_l(y+Y)^{-1} Π f(x_i) dx` for a homogeneous channel.
    pub fn limit_prediction_lpt(&self, x: &[Vec<T>], cfg: &QmcConfig, stream: u64) -> Result<LimitEstimate<T>> {
        let n = self.family.n();
        let l = x.len();
        if !(2..=5).contains(&l) || x.iter().any(|p| p.len() != n) {
            return Err(Error::Dimension(format!("need 2..=5 base points of dimension {n}")));
        }
        let ap = *self
            .family
            .decay_meta()
            .get(&l)
            .ok_or_else(|| domain(format!("family declares no homogeneous channel at order {l}")))?;
        if self.family.homogeneous_h(l, &vec![T::zero(); (l - 1) * n]).is_none() {
            return Err(domain("limit_prediction_lpt needs a homogeneous channel family"));
        }
        if ap >= lit(((l - 1) * n) as f64) {
            return Err(domain(format!(
                "alpha'_{l} = {ap} >= (l-1)·n: H_l^{{-1}} is not integrable (outside the weak-clustering regime)"
            )));
        }
        let c0 = self.family.leading_amplitude().unwrap_or(T::one());
        let y = differences(x);
        let fallback = self.check_support(x).is_err();
        let dims = l * n;
        let volume = lit::<T>(2.0 * SUPPORT_RADIUS).powi(dims as i32);
        let est = qmc::estimate(dims, cfg, stream, |u: &[f64]| {
            let mut p = [T::zero(); 15];
            for (xi, ui) in p.iter_mut().zip(u) {
                *xi = lit::<T>(ui * 2.0 * SUPPORT_RADIUS - SUPPORT_RADIUS);
            }
            let mut weight = T::one();
            for i in 0..l {
                weight = weight * self.kernel.eval_point(&p[i * n..(i + 1) * n]);
                if weight == T::zero() {
                    return T::zero();
                }
            }
            let mut z = [T::zero(); 12];
            for i in 0..l - 1 {
                for d in 0..n {
                    z[i * n + d] = p[i * n + d] - p[(i + 1) * n + d] + y[i * n + d];
                }
            }
            weight * c0 / norm(&z[..(l - 1) * n]).powf(ap)
        })?;
        Ok(LimitEstimate {
            value: est.value * volume,
            stderr: est.stderr * volume,
            fallback,
        })
    }

    /// Compares the all-X-zero block value at the largest R with the limit
    /// prediction extrapolated along `X = s·X_0`, `s → 0`, by a fit
    /// `a + b·s²` (the limit is even in `s`).
    pub fn coincident_channel_check(
        &self,
        l: usize,
        gamma: T,
        r_grid: &[T],
        shrink: &[T],
        cfg: &QmcConfig,
    ) -> Result<CoincidentReport<T>> {
        let n = self.family.n();
        let zero = vec![vec![T::zero(); n]; l];
        let req = ScalingRequest::block(l, gamma, zero, r_grid.to_vec()).with_qmc(*cfg);
        let series = self.scaled_truncated_block(&req)?;
        let last = *series.points.last().expect("non-empty grid");
        if self.family.vanishes_at_order(l) {
            return Ok(CoincidentReport {
                direct_value: T::zero(),
                direct_stderr: T::zero(),
                limit_value: T::zero(),
                limit_stderr: T::zero(),
                discrepancy: T::zero(),
                combined_sigma: T::zero(),
                within_three_sigma: true,
                direct_series: series.points,
                shrink: shrink.to_vec(),
                shrink_values: vec![T::zero(); shrink.len()],
            });
        }
        if shrink.len() < 2 {
            return Err(Error::Grid("shrink sequence needs at least two entries".into()));
        }
        let mut base = vec![vec![T::zero(); n]; l];
        for (i, p) in base.iter_mut().enumerate() {
            p[0] = lit(i as f64);
        }
        let mut values = Vec::new();
        let mut errs = Vec::new();
        for (k, &s) in shrink.iter().enumerate() {
            let x: Vec<Vec<T>> = base.iter().map(|p| p.iter().map(|v| *v * s).collect()).collect();
            let est = self.limit_prediction_lpt(&x, cfg, 1_000 + k as u64)?;
            values.push(est.value);
            errs.push(est.stderr);
        }
        // weighted least squares for v = a + b s²
        let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
        for ((s, v), e) in shrink.iter().zip(&values).zip(&errs) {
            let w = if *e > T::zero() { (*e * *e).recip() } else { T::one() };
            let t = *s * *s;
            sw = sw + w;
            sx = sx + w * t;
            sy = sy + w * *v;
            sxx = sxx + w * t * t;
            sxy = sxy + w * t * *v;
        }
        let det = sw * sxx - sx * sx;
        if det.abs() <= T::epsilon() * sw * sxx {
            return Err(Error::Fit("degenerate shrink sequence".into()));
        }
        let a = (sxx * sy - sx * sxy) / det;
        let var_a = if errs.iter().all(|e| *e > T::zero()) {
            sxx / det
        } else {
            T::zero()
        };
        let limit_stderr = var_a.sqrt();
        let discrepancy = (last.value - a).abs();
        let combined = (last.stderr * last.stderr + var_a).sqrt();
        Ok(CoincidentReport {
            direct_value: last.value,
            direct_stderr: last.stderr,
            limit_value: a,
            limit_stderr,
            discrepancy,
            combined_sigma: combined,
            within_three_sigma: discrepancy <= lit::<T>(3.0) * combined,
            direct_series: series.points,
            shrink: shrink.to_vec(),
            shrink_values: values,
        })
    }
}
