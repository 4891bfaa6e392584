//! Fixed-point trichotomy from channel exponents, with optional numerical
//! confirmation through the scaling engine.

use serde::Serialize;

use crate::corrmodels::{make_family, CorrelationFamily, FamilySpec, HomogeneousChannelSpec};
use crate::error::{domain, Result};
use crate::exponents::log_log_fit;
use crate::qmc::QmcConfig;
use crate::scalar::{lit, to_f64, Real};
use crate::scaling::{ScalingEngine, ScalingRequest};

pub const DEFAULT_TIE_TOLERANCE: f64 = 0.02;
pub const TREND_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Less,
    Equal,
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Gaussian,
    NonTrivial,
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Vanishing,
    Finite,
    Diverging,
    Undecided,
}

impl Relation {
    /// Trend of the order-l series at `γ = γ_2` implied by the relation.
    pub fn expected_trend(self) -> Trend {
        match self {
            Relation::Less => Trend::Vanishing,
            Relation::Equal => Trend::Finite,
            Relation::Greater => Trend::Diverging,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumericConfirmation<T> {
    pub trend: Trend,
    pub final_r: T,
    pub final_value: T,
    pub tail_slope: T,
    /// Distance of the tail slope from the nearest trend threshold.
    pub margin: T,
    /// Standard error of the tail slope propagated from QMC errors.
    pub slope_stderr: T,
    pub matches_relation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelRow<T> {
    pub l: usize,
    pub alpha_prime: T,
    pub alpha_l: T,
    pub gamma_l: T,
    pub relation: Relation,
    pub numeric_confirmation: Option<NumericConfirmation<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointReport<T> {
    pub n: usize,
    pub alpha_2: T,
    pub gamma_2: T,
    pub tie_tolerance: T,
    pub rows: Vec<ChannelRow<T>>,
    pub verdict: Verdict,
    /// A numeric confirmation was undecided or contradicted its relation.
    pub flagged: bool,
    pub mismatches: Vec<String>,
}

fn verdict_of<T>(rows: &[ChannelRow<T>]) -> Verdict {
    if rows.iter().any(|r| r.relation == Relation::Greater) {
        Verdict::Divergent
    } else if rows.iter().any(|r| r.relation == Relation::Equal) {
        Verdict::NonTrivial
    } else {
        Verdict::Gaussian
    }
}

/// `γ_l = n - α'_l/l = (n + α_l)/l` with `α_l = (l-1)n - α'_l`, compared
/// against `γ_2 = (n + α_2)/2`.
pub fn classify<T: Real>(n: usize, alpha_2: T, rows: &[(usize, T)], tie_tolerance: T) -> Result<FixedPointReport<T>> {
    if !(1..=3).contains(&n) {
        return Err(domain(format!("dimension n = {n} outside 1..=3")));
    }
    let nn = lit::<T>(n as f64);
    if !(alpha_2 > T::zero() && alpha_2 < nn) {
        return Err(domain(format!("alpha_2 = {alpha_2} violates 0 < alpha_2 < n = {n}")));
    }
    if !(tie_tolerance >= T::zero()) {
        return Err(domain("tie tolerance must be >= 0"));
    }
    let gamma_2 = (nn + alpha_2) * lit(0.5);
    let mut out = Vec::with_capacity(rows.len());
    for &(l, ap) in rows {
        if !(3..=5).contains(&l) {
            return Err(domain(format!("channel order l = {l} outside 3..=5")));
        }
        let upper = lit::<T>(((l - 1) * n) as f64);
        if !(ap > T::zero() && ap < upper) {
            return Err(domain(format!(
                "alpha'_{l} = {ap} violates 0 < alpha'_l < (l-1)·n = {upper} (integrability of H_l^-1)"
            )));
        }
        let ll = lit::<T>(l as f64);
        let alpha_l = upper - ap;
        let gamma_l = nn - ap / ll;
        let relation = if (gamma_l - gamma_2).abs() <= tie_tolerance {
            Relation::Equal
        } else if gamma_l > gamma_2 {
            Relation::Greater
        } else {
            Relation::Less
        };
        out.push(ChannelRow {
            l,
            alpha_prime: ap,
            alpha_l,
            gamma_l,
            relation,
            numeric_confirmation: None,
        });
    }
    Ok(FixedPointReport {
        n,
        alpha_2,
        gamma_2,
        tie_tolerance,
        verdict: verdict_of(&out),
        rows: out,
        flagged: false,
        mismatches: Vec::new(),
    })
}

/// The homogeneous-channel family realizing the report's exponents
/// (`α'_2 = n - α_2` plus every listed channel).
pub fn realize_family<T: Real>(report: &FixedPointReport<T>) -> Result<CorrelationFamily<T>> {
    let nn = lit::<T>(report.n as f64);
    let mut channels = vec![(2, nn - report.alpha_2)];
    channels.extend(report.rows.iter().map(|r| (r.l, r.alpha_prime)));
    make_family(&FamilySpec::HomogeneousChannel(HomogeneousChannelSpec::new(report.n, channels)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfirmSettings<T> {
    pub r_grid: Vec<T>,
    pub qmc: QmcConfig,
    /// Spacing of the base points `X_i = i·spacing·e_1`.
    pub spacing: T,
    /// Points used for the tail slope.
    pub tail_points: usize,
}

impl<T: Real> Default for ConfirmSettings<T> {
    fn default() -> Self {
        ConfirmSettings {
            r_grid: [16.0, 32.0, 64.0, 128.0, 256.0].iter().map(|v| lit(*v)).collect(),
            qmc: QmcConfig::default(),
            spacing: lit(10.0),
            tail_points: 3,
        }
    }
}

fn decide_trend<T: Real>(slope: T, stderr: T) -> (Trend, T) {
    let th = lit::<T>(TREND_THRESHOLD);
    let margin = (slope - th).abs().min((slope + th).abs());
    let trend = if margin <= lit::<T>(2.0) * stderr {
        Trend::Undecided
    } else if slope < -th {
        Trend::Vanishing
    } else if slope > th {
        Trend::Diverging
    } else {
        Trend::Finite
    };
    (trend, margin)
}

/// Runs the order-l series at `γ = γ_2` for every row and labels the tail
/// trend (log-log slope below -0.1 vanishing, within ±0.1 finite, above 0.1
/// diverging).
pub fn confirm_numerically<T: Real>(
    report: &FixedPointReport<T>,
    engine: &ScalingEngine<T>,
    settings: &ConfirmSettings<T>,
) -> Result<FixedPointReport<T>> {
    let family = engine.family();
    if family.n() != report.n {
        return Err(domain("family dimension differs from the report"));
    }
    let mut out = report.clone();
    out.mismatches.clear();
    out.flagged = false;
    for row in out.rows.iter_mut() {
        let declared = family.decay_meta().get(&row.l).copied();
        if !family.vanishes_at_order(row.l) {
            match declared {
                Some(ap) if (ap - row.alpha_prime).abs() <= lit(1e-12) => {}
                _ => {
                    return Err(domain(format!(
                        "family does not realize alpha'_{} = {} (declares {:?})",
                        row.l,
                        row.alpha_prime,
                        declared.map(to_f64)
                    )))
                }
            }
        }
        let n = report.n;
        let x: Vec<Vec<T>> = (0..row.l)
            .map(|i| {
                let mut p = vec![T::zero(); n];
                p[0] = settings.spacing * lit(i as f64);
                p
            })
            .collect();
        let req = ScalingRequest::block(row.l, report.gamma_2, x, settings.r_grid.clone()).with_qmc(settings.qmc);
        let series = engine.scaled_truncated_block(&req)?;
        let last = *series.points.last().expect("non-empty grid");
        let confirmation = if family.vanishes_at_order(row.l) {
            NumericConfirmation {
                trend: Trend::Vanishing,
                final_r: last.r,
                final_value: T::zero(),
                tail_slope: T::neg_infinity(),
                margin: T::infinity(),
                slope_stderr: T::zero(),
                matches_relation: row.relation.expected_trend() == Trend::Vanishing,
            }
        } else {
            let k = series.points.len();
            let tail = &series.points[k.saturating_sub(settings.tail_points.max(2))..];
            let r: Vec<T> = tail.iter().map(|p| p.r).collect();
            let v: Vec<T> = tail.iter().map(|p| p.value).collect();
            let fit = log_log_fit(&r, &v)?;
            // slope error of an unweighted fit from independent relative errors
            let lr: Vec<T> = r.iter().map(|v| v.ln()).collect();
            let m = lit::<T>(lr.len() as f64);
            let mean = lr.iter().copied().sum::<T>() / m;
            let sxx = lr.iter().map(|v| (*v - mean).powi(2)).sum::<T>();
            let var = tail
                .iter()
                .zip(&lr)
                .map(|(p, x)| ((*x - mean) / sxx).powi(2) * (p.stderr / p.value).powi(2))
                .sum::<T>();
            let slope_stderr = var.sqrt();
            let (trend, margin) = decide_trend(fit.slope, slope_stderr);
            NumericConfirmation {
                trend,
                final_r: last.r,
                final_value: last.value,
                tail_slope: fit.slope,
                margin,
                slope_stderr,
                matches_relation: trend == row.relation.expected_trend(),
            }
        };
        if !confirmation.matches_relation {
            out.flagged = true;
            out.mismatches.push(format!(
                "l = {}: relation {:?} expects {:?}, numeric trend {:?} (slope {})",
                row.l,
                row.relation,
                row.relation.expected_trend(),
                confirmation.trend,
                confirmation.tail_slope
            ));
        }
        row.numeric_confirmation = Some(confirmation);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn arithmetic_examples() {
        let r = classify(2, 1.0, &[(3, 1.5)], 0.02).unwrap();
        assert_eq!(r.gamma_2, 1.5);
        assert_eq!(r.rows[0].gamma_l, 1.5);
        assert_eq!(r.rows[0].relation, Relation::Equal);
        assert_eq!(r.verdict, Verdict::NonTrivial);
        let r = classify(2, 1.0, &[(3, 2.0)], 0.02).unwrap();
        assert!((r.rows[0].gamma_l - 4.0f64 / 3.0).abs() < 1e-15);
        assert_eq!(r.verdict, Verdict::Gaussian);
        let r = classify(2, 1.0, &[(3, 1.0)], 0.02).unwrap();
        assert!((r.rows[0].gamma_l - 5.0f64 / 3.0).abs() < 1e-15);
        assert_eq!(r.verdict, Verdict::Divergent);
    }

    #[test]
    fn domain_errors_name_bounds() {
        let e = classify(1, 0.5, &[(3, 2.0)], 0.02).unwrap_err();
        assert!(e.to_string().contains("(l-1)·n"), "{e}");
        assert!(classify(1, 1.5, &[(3, 1.0)], 0.02).is_err());
        assert!(classify(1, 0.5, &[(2, 0.5)], 0.02).is_err());
    }

    #[test]
    fn no_rows_is_gaussian() {
        assert_eq!(classify(1, 0.5, &[], 0.02).unwrap().verdict, Verdict::Gaussian);
    }

    #[test]
    fn trend_decision() {
        assert_eq!(decide_trend(0.3f64, 0.01).0, Trend::Diverging);
        assert_eq!(decide_trend(-0.3f64, 0.01).0, Trend::Vanishing);
        assert_eq!(decide_trend(0.0f64, 0.01).0, Trend::Finite);
        assert_eq!(decide_trend(0.09f64, 0.01).0, Trend::Undecided);
    }

    proptest! {
        #[test]
        fn algebraic_identities(n in 1usize..=3, a2f in 0.01f64..0.99, l in 3usize..=5, apf in 0.01f64..0.99) {
            let alpha_2 = a2f * n as f64;
            let ap = apf * ((l - 1) * n) as f64;
            let r = classify(n, alpha_2, &[(l, ap)], 0.02).unwrap();
            let row = &r.rows[0];
            prop_assert!((row.alpha_prime + row.alpha_l - ((l - 1) * n) as f64).abs() < 1e-12);
            prop_assert!((row.gamma_l - (n as f64 + row.alpha_l) / l as f64).abs() < 1e-12);
        }

        #[test]
        fn verdict_monotone_in_alpha_prime(a2f in 0.01f64..0.99, apf in 0.01f64..0.9, bump in 0.0f64..0.09) {
            let n = 2;
            let alpha_2 = a2f * 2.0;
            let lo = classify(n, alpha_2, &[(3, apf * 4.0)], 0.02).unwrap().verdict;
            let hi = classify(n, alpha_2, &[(3, (apf + bump) * 4.0)], 0.02).unwrap().verdict;
            prop_assert!(hi <= lo);
        }
    }
}
