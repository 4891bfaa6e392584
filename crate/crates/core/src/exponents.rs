//! Critical exponent extraction: power-law decay fits, the integrability
//! scan for `α_inf`, empirical `γ` from scaling series and the Fourier-side
//! singularity probe.

use serde::Serialize;

use crate::corrmodels::CorrelationFamily;
use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate, radial_fourier, Tolerance};
use crate::scalar::{lit, to_f64, unit_sphere_area, Real};
use crate::scaling::{ScalingEngine, ScalingRequest, ScalingSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentMethod {
    MethodOne,
    MethodTwo,
    EmpiricalGamma,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentReport<T> {
    pub alpha_hat: T,
    pub method: ExponentMethod,
    /// RMS fit residual, or the scan resolution for method two.
    pub residual: T,
    pub window: (T, T),
    pub gamma_hat: T,
    pub order: usize,
    pub warning: Option<String>,
}

/// Least-squares line `y = slope·x + intercept` with its RMS residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit<T> {
    pub slope: T,
    pub intercept: T,
    pub rms: T,
}

pub fn fit_line<T: Real>(x: &[T], y: &[T]) -> Result<LineFit<T>> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Fit("line fit needs at least two matching points".into()));
    }
    let m = lit::<T>(x.len() as f64);
    let mx = x.iter().copied().sum::<T>() / m;
    let my = y.iter().copied().sum::<T>() / m;
    let sxx = x.iter().map(|v| (*v - mx) * (*v - mx)).sum::<T>();
    if sxx <= T::zero() {
        return Err(Error::Fit("line fit needs distinct abscissae".into()));
    }
    let sxy = x.iter().zip(y).map(|(a, b)| (*a - mx) * (*b - my)).sum::<T>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = x.iter().zip(y).map(|(a, b)| (*b - intercept - slope * *a).powi(2)).sum::<T>();
    Ok(LineFit {
        slope,
        intercept,
        rms: (rss / m).sqrt(),
    })
}

/// Log-log slope of positive data.
pub fn log_log_fit<T: Real>(x: &[T], y: &[T]) -> Result<LineFit<T>> {
    if y.iter().any(|v| !(*v > T::zero())) || x.iter().any(|v| !(*v > T::zero())) {
        return Err(Error::Fit("log-log fit needs strictly positive data".into()));
    }
    let lx: Vec<T> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<T> = y.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

/// `count` log-spaced values in `[lo, hi]`.
pub fn log_space<T: Real>(lo: T, hi: T, count: usize) -> Vec<T> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * lit::<T>(k as f64) / lit::<T>((count - 1) as f64)).exp())
        .collect()
}

/// Default Method-One window: one decade starting at ten correction lengths
/// (or at 10 without a correction).
pub fn default_method_one_window<T: Real>(family: &CorrelationFamily<T>) -> (T, T) {
    let lo = family.correction_length().unwrap_or(T::one()) * lit(10.0);
    (lo, lo * lit(10.0))
}

const METHOD_ONE_RESIDUAL_WARN: f64 = 1e-2;

/// Fits `W^T_2(r) ~ r^{-(n-α)}` on log-spaced radii; `α̂ = n + slope`.
pub fn fit_alpha_method_one<T: Real>(family: &CorrelationFamily<T>, window: (T, T), points: usize) -> Result<ExponentReport<T>> {
    let (lo, hi) = window;
    if !(lo > T::zero() && hi > lo) || points < 2 {
        return Err(Error::Grid("method one needs 0 < r_min < r_max and at least two points".into()));
    }
    let r = log_space(lo, hi, points);
    let w: Vec<T> = r.iter().map(|&v| family.two_point_radial(v)).collect();
    if let Some(bad) = r.iter().zip(&w).find(|(_, v)| !(**v > T::zero())) {
        return Err(Error::Fit(format!(
            "W^T_2({}) = {} is not positive; log-log fit undefined",
            bad.0, bad.1
        )));
    }
    let fit = log_log_fit(&r, &w)?;
    let n = lit::<T>(family.n() as f64);
    let alpha = n + fit.slope;
    let warning = (to_f64(fit.rms) > METHOD_ONE_RESIDUAL_WARN)
        .then(|| format!("log-log residual {} exceeds {METHOD_ONE_RESIDUAL_WARN}: no clean power-law window", fit.rms));
    Ok(ExponentReport {
        alpha_hat: alpha,
        method: ExponentMethod::MethodOne,
        residual: fit.rms,
        window,
        gamma_hat: (n + alpha) * lit(0.5),
        order: 2,
        warning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow<T> {
    pub alpha: T,
    pub cutoff: T,
    pub partial_integral: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint<T> {
    pub alpha: T,
    pub convergent: bool,
    /// Local tail exponent of the shell increments.
    pub tail_exponent: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport<T> {
    pub report: ExponentReport<T>,
    pub points: Vec<ScanPoint<T>>,
    pub rows: Vec<ScanRow<T>>,
    /// Classification changes exactly once along the grid.
    pub monotone: bool,
    /// Every weighting converged: integrable clustering.
    pub normal_regime: bool,
}

/// Geometric cutoffs `10^0 … 10^4` in half-decade steps.
pub fn default_cutoffs<T: Real>() -> Vec<T> {
    (0..=8).map(|k| lit::<T>(10f64.powf(0.5 * k as f64))).collect()
}

/// Uniform grid with step `delta` strictly inside `(0, n)`.
pub fn default_alpha_grid<T: Real>(n: usize, delta: T) -> Vec<T> {
    let mut out = Vec::new();
    let mut k = 1;
    loop {
        let a = delta * lit(k as f64);
        if a >= lit::<T>(n as f64) - delta * lit::<T>(0.5) {
            break;
        }
        out.push(a);
        k += 1;
    }
    out
}

/// Partial integrals `I(α', r) = ∫_{|y|<=r} |W^T_2(y)| (1+|y|²)^{-α'/2} dy`
/// over geometric cutoffs, classified by the local tail exponent
/// `δ = -log_q(D_last/D_prev)` of the last two shell increments:
/// convergent iff `δ > Δα/2` or the last increment is negligible.
pub fn alpha_inf_scan<T: Real>(family: &CorrelationFamily<T>, alpha_grid: &[T], cutoffs: &[T]) -> Result<ScanReport<T>> {
    if alpha_grid.len() < 2 || alpha_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Grid("alpha grid needs at least two increasing values".into()));
    }
    if cutoffs.len() < 3 || cutoffs.windows(2).any(|w| w[1] <= w[0]) || cutoffs[0] <= T::zero() {
        return Err(Error::Grid("need at least three increasing positive cutoffs".into()));
    }
    let n = family.n();
    let area = unit_sphere_area::<T>(n);
    let delta = alpha_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(T::infinity(), |a, b| a.min(b));
    let m = cutoffs.len();
    let q = cutoffs[m - 1] / cutoffs[m - 2];
    let q_prev = cutoffs[m - 2] / cutoffs[m - 3];
    if ((q - q_prev) / q).abs() > lit(1e-9) {
        return Err(Error::Grid("the last three cutoffs must be geometric".into()));
    }
    let tol = Tolerance::new(1e-300, 1e-12).with_max_intervals(4000);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &a in alpha_grid {
        let integrand = |r: T| area * r.powi(n as i32 - 1) * family.two_point_radial(r).abs() * (T::one() + r * r).powf(-a * lit(0.5));
        let mut total = T::zero();
        let mut increments = Vec::with_capacity(m);
        let mut prev = T::zero();
        for &c in cutoffs {
            let mut breaks = vec![prev];
            let mut b = if prev == T::zero() { lit::<T>(0.5).min(c) } else { prev * lit(2.0) };
            while b < c {
                breaks.push(b);
                b = b * lit(2.0);
            }
            breaks.push(c);
            breaks.dedup();
            let est = integrate(integrand, &breaks, tol);
            if !est.value.is_finite() {
                return Err(Error::Numerical(format!("partial integral at alpha = {a}, cutoff = {c} is not finite")));
            }
            total = total + est.value;
            increments.push(est.value);
            rows.push(ScanRow {
                alpha: a,
                cutoff: c,
                partial_integral: total,
            });
            prev = c;
        }
        let d_last = increments[m - 1];
        let d_prev = increments[m - 2];
        let negligible = d_last <= lit::<T>(1e-12) * total;
        let tail = if d_last > T::zero() && d_prev > T::zero() {
            -(d_last / d_prev).ln() / q.ln()
        } else {
            T::infinity()
        };
        points.push(ScanPoint {
            alpha: a,
            convergent: negligible || tail > delta * lit(0.5),
            tail_exponent: tail,
        });
    }
    let crossings = points.windows(2).filter(|w| w[0].convergent != w[1].convergent).count();
    let monotone = crossings <= 1 && (crossings == 0 || !points[0].convergent);
    let lo = alpha_grid[0];
    let hi = *alpha_grid.last().unwrap();
    if points.iter().all(|p| !p.convergent) {
        return Err(Error::Grid(format!(
            "every weighting up to alpha = {hi} diverges: alpha_inf lies above the grid; widen the grid"
        )));
    }
    let normal = points.iter().all(|p| p.convergent);
    let nn = lit::<T>(n as f64);
    let (alpha_hat, warning) = if normal {
        (lo, Some("normal regime: every weighting is integrable, alpha_inf at grid bottom".to_string()))
    } else {
        let k = points.iter().position(|p| p.convergent).unwrap();
        let boundary = if k == 0 { lo } else { (alpha_grid[k - 1] + alpha_grid[k]) * lit(0.5) };
        let warn = (!monotone).then(|| "classification is not monotone along the alpha grid".to_string());
        (boundary, warn)
    };
    Ok(ScanReport {
        report: ExponentReport {
            alpha_hat,
            method: ExponentMethod::MethodTwo,
            residual: delta,
            window: (lo, hi),
            gamma_hat: (nn + alpha_hat) * lit(0.5),
            order: 2,
            warning,
        },
        points,
        rows,
        monotone,
        normal_regime: normal,
    })
}

/// Fits `value(R; γ=0) ∝ R^{σ}` over the tail window `[R_max/10^{1/2}, R_max]`
/// (or the given window); `γ̂ = σ/l`, `α̂_l = l·γ̂ - n`.
pub fn fit_gamma_empirical<T: Real>(series: &ScalingSeries<T>, window: Option<(T, T)>) -> Result<ExponentReport<T>> {
    if series.meta.gamma != 0.0 {
        return Err(domain(format!("empirical gamma needs a series computed at gamma = 0, got {}", series.meta.gamma)));
    }
    let l = series.meta.l;
    let n = lit::<T>(series.meta.n as f64);
    let rmax = series.points.last().ok_or_else(|| Error::Fit("empty series".into()))?.r;
    let (lo, hi) = window.unwrap_or((rmax / lit::<T>(10f64.sqrt()) * lit(1.0 - 1e-12), rmax));
    let tail: Vec<_> = series.points.iter().filter(|p| p.r >= lo && p.r <= hi).collect();
    if tail.len() < 2 {
        return Err(Error::Fit("tail window holds fewer than two points".into()));
    }
    let positive = tail.iter().all(|p| p.value > T::zero());
    let negative = tail.iter().all(|p| p.value < T::zero());
    if !positive && !negative {
        return Err(Error::Fit("series changes sign (or vanishes) in the tail window".into()));
    }
    let r: Vec<T> = tail.iter().map(|p| p.r).collect();
    let v: Vec<T> = tail.iter().map(|p| p.value.abs()).collect();
    let fit = log_log_fit(&r, &v)?;
    let gamma = fit.slope / lit(l as f64);
    Ok(ExponentReport {
        alpha_hat: lit::<T>(l as f64) * gamma - n,
        method: ExponentMethod::EmpiricalGamma,
        residual: fit.rms,
        window: (lo, hi),
        gamma_hat: gamma,
        order: l,
        warning: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport<T> {
    pub weighting_alpha: T,
    pub p0: T,
    pub lambda: Vec<T>,
    pub transform: Vec<T>,
    /// Fitted exponent in `Ĝ(λp_0) ≈ a(λ^{-ε}-1)/ε + b`, clipped at 0.
    pub epsilon_hat: T,
    pub epsilon_raw: T,
    pub amplitude: T,
    pub offset: T,
    /// Relative residual of the best power fit.
    pub power_residual: T,
    /// Relative residual of the pure logarithmic fit `c_1 + c_2 ln λ`.
    pub log_residual: T,
    pub log_flag: bool,
}

/// Default `λ` grid: 16 log-spaced values in `[1e-4, 3e-2]`.
pub fn default_lambda_grid<T: Real>() -> Vec<T> {
    log_space(lit(1e-4), lit(3e-2), 16)
}

fn weighted_fit_offset<T: Real>(basis: &[T], y: &[T]) -> (T, T, T) {
    // weights 1/y² make the residual relative
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for (x, v) in basis.iter().zip(y) {
        let w = (*v * *v).recip();
        sw = sw + w;
        sx = sx + w * *x;
        sy = sy + w * *v;
        sxx = sxx + w * *x * *x;
        sxy = sxy + w * *x * *v;
    }
    let det = sw * sxx - sx * sx;
    let a = (sw * sxy - sx * sy) / det;
    let b = (sxx * sy - sx * sxy) / det;
    let rss = basis
        .iter()
        .zip(y)
        .map(|(x, v)| ((a * *x + b - *v) / *v).powi(2))
        .sum::<T>();
    (a, b, (rss / lit(y.len() as f64)).sqrt())
}

const LOG_FLAG_BAND: f64 = 0.05;

/// Probes the small-momentum behaviour of `Ĝ_α` for
/// `G_α(y) = W^T_2(y)(1+|y|²)^{-α/2}` along `λ·p_0`.
pub fn fourier_singularity_probe<T: Real>(
    family: &CorrelationFamily<T>,
    alpha: T,
    lambda_grid: &[T],
    p0: T,
) -> Result<ProbeReport<T>> {
    let n = family.n();
    if n > 2 {
        return Err(domain("fourier singularity probe supports n = 1 or 2"));
    }
    if lambda_grid.len() < 4 || lambda_grid.iter().any(|l| !(*l > T::zero())) {
        return Err(Error::Grid("probe needs at least four positive lambda values".into()));
    }
    let g = |r: T| family.two_point_radial(r) * (T::one() + r * r).powf(-alpha * lit(0.5));
    let mut transform = Vec::with_capacity(lambda_grid.len());
    for &lam in lambda_grid {
        let est = radial_fourier(g, lam * p0, n, 1e-9).map_err(|e| {
            Error::Numerical(format!("oscillatory quadrature failed at lambda = {lam}: {e}"))
        })?;
        transform.push(est.value);
    }
    if transform.iter().any(|v| !(*v > T::zero()) && !(*v < T::zero())) {
        return Err(Error::Numerical("transform vanished on the lambda grid".into()));
    }
    let ln_l: Vec<T> = lambda_grid.iter().map(|l| l.ln()).collect();
    let basis = |eps: T| -> Vec<T> {
        ln_l
            .iter()
            .map(|&ll| if eps == T::zero() { -ll } else { (-eps * ll).exp_m1() / eps })
            .collect()
    };
    let eval = |eps: T| weighted_fit_offset(&basis(eps), &transform);
    let lo = -T::one();
    let hi = lit::<T>(n as f64);
    let steps = 300;
    let mut best = (lo, T::infinity());
    for k in 0..=steps {
        let eps = lo + (hi - lo) * lit::<T>(k as f64) / lit::<T>(steps as f64);
        let (_, _, res) = eval(eps);
        if res < best.1 {
            best = (eps, res);
        }
    }
    // golden-section refinement around the grid minimum
    let h = (hi - lo) / lit::<T>(steps as f64);
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    let phi = lit::<T>(0.618_033_988_749_895);
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if eval(c).2 < eval(d).2 {
            b = d;
        } else {
            a = c;
        }
    }
    let eps = (a + b) * lit(0.5);
    let (amp, off, power_res) = eval(eps);
    let (_, _, log_res) = eval(T::zero());
    let log_flag = amp > T::zero() && eps.abs() < lit(LOG_FLAG_BAND);
    Ok(ProbeReport {
        weighting_alpha: alpha,
        p0,
        lambda: lambda_grid.to_vec(),
        transform,
        epsilon_hat: eps.max(T::zero()),
        epsilon_raw: eps,
        amplitude: amp,
        offset: off,
        power_residual: power_res,
        log_residual: log_res,
        log_flag,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Agreement<T> {
    pub pair: (ExponentMethod, ExponentMethod),
    pub difference: T,
    pub tolerance: T,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoAlphaMinCheck<T> {
    pub alpha: T,
    pub gamma: T,
    pub tail_slope: T,
    pub decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossValidation<T> {
    pub method_one: Option<ExponentReport<T>>,
    pub method_one_rejection: Option<String>,
    pub method_two: ScanReport<T>,
    pub empirical: Option<ExponentReport<T>>,
    pub agreements: Vec<Agreement<T>>,
    pub no_alpha_min: Option<NoAlphaMinCheck<T>>,
    pub normal_regime: bool,
    pub failures: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidationSettings<T> {
    pub method_one_window: Option<(T, T)>,
    pub method_one_points: usize,
    pub alpha_step: T,
    pub cutoffs: Vec<T>,
    /// R-grid for the empirical-γ and no-α_min series.
    pub r_grid: Vec<T>,
    /// Separation of the two blocks, in kernel units.
    pub separation: T,
    pub pair_tolerance: T,
    /// Offset above `α̂_inf` for the no-α_min check.
    pub no_min_offset: T,
    /// Maximal tail slope accepted as "decreasing".
    pub no_min_slope: T,
}

impl<T: Real> Default for CrossValidationSettings<T> {
    fn default() -> Self {
        CrossValidationSettings {
            method_one_window: None,
            method_one_points: 16,
            alpha_step: lit(0.05),
            cutoffs: default_cutoffs(),
            r_grid: [16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0].iter().map(|v| lit(*v)).collect(),
            separation: lit(8.0),
            pair_tolerance: lit(0.07),
            no_min_offset: lit(0.2),
            no_min_slope: lit(-0.15),
        }
    }
}

const METHOD_ONE_REJECT_RESIDUAL: f64 = 0.05;

/// Two-point block series at points `0` and `separation·e_1`.
pub fn two_point_series<T: Real>(engine: &ScalingEngine<T>, gamma: T, settings: &CrossValidationSettings<T>) -> Result<ScalingSeries<T>> {
    let n = engine.family().n();
    let mut x2 = vec![T::zero(); n];
    x2[0] = settings.separation;
    let req = ScalingRequest::block(2, gamma, vec![vec![T::zero(); n], x2], settings.r_grid.clone());
    engine.scaled_truncated_block(&req)
}

/// Runs all three estimators and the no-α_min check on one family.
pub fn cross_validate<T: Real>(engine: &ScalingEngine<T>, settings: &CrossValidationSettings<T>) -> Result<CrossValidation<T>> {
    let family = engine.family();
    let n = family.n();
    let nn = lit::<T>(n as f64);
    let mut failures = Vec::new();

    let window = settings.method_one_window.unwrap_or_else(|| default_method_one_window(family));
    let (method_one, rejection) = match fit_alpha_method_one(family, window, settings.method_one_points) {
        Ok(rep) if rep.alpha_hat > T::zero() && rep.alpha_hat < nn && to_f64(rep.residual) <= METHOD_ONE_REJECT_RESIDUAL => {
            (Some(rep), None)
        }
        Ok(rep) => (
            None,
            Some(format!(
                "no power-law window: alpha_hat = {}, residual = {}",
                rep.alpha_hat, rep.residual
            )),
        ),
        Err(e) => (None, Some(e.to_string())),
    };

    let grid = default_alpha_grid(n, settings.alpha_step);
    let scan = alpha_inf_scan(family, &grid, &settings.cutoffs)?;
    let normal = scan.normal_regime;

    let mut empirical = None;
    let mut agreements = Vec::new();
    let mut no_alpha_min = None;
    if !normal {
        let series = two_point_series(engine, T::zero(), settings)?;
        let emp = fit_gamma_empirical(&series, None)?;
        let mut estimates = vec![(ExponentMethod::MethodTwo, scan.report.alpha_hat), (ExponentMethod::EmpiricalGamma, emp.alpha_hat)];
        if let Some(m1) = &method_one {
            estimates.insert(0, (ExponentMethod::MethodOne, m1.alpha_hat));
        }
        for i in 0..estimates.len() {
            for j in i + 1..estimates.len() {
                let diff = (estimates[i].1 - estimates[j].1).abs();
                let ok = diff <= settings.pair_tolerance;
                if !ok {
                    failures.push(format!("{:?} vs {:?} differ by {diff}", estimates[i].0, estimates[j].0));
                }
                agreements.push(Agreement {
                    pair: (estimates[i].0, estimates[j].0),
                    difference: diff,
                    tolerance: settings.pair_tolerance,
                    ok,
                });
            }
        }
        empirical = Some(emp);

        let alpha = scan.report.alpha_hat + settings.no_min_offset;
        let gamma = (nn + alpha) * lit(0.5);
        let series = two_point_series(engine, gamma, settings)?;
        let k = series.points.len();
        let tail = &series.points[k.saturating_sub(3)..];
        let r: Vec<T> = tail.iter().map(|p| p.r).collect();
        let v: Vec<T> = tail.iter().map(|p| p.value).collect();
        let fit = log_log_fit(&r, &v)?;
        let decreasing = v.windows(2).all(|w| w[1] < w[0]) && fit.slope <= settings.no_min_slope;
        if !decreasing {
            failures.push(format!("no-alpha_min check: tail slope {} at alpha = {alpha}", fit.slope));
        }
        no_alpha_min = Some(NoAlphaMinCheck {
            alpha,
            gamma,
            tail_slope: fit.slope,
            decreasing,
        });
    }
    Ok(CrossValidation {
        passed: failures.is_empty(),
        method_one,
        method_one_rejection: rejection,
        method_two: scan,
        empirical,
        agreements,
        no_alpha_min,
        normal_regime: normal,
        failures,
    })
}
