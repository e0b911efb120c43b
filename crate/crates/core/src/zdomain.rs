//! Frequency-domain view of the learning loop.
//!
//! Trial to trial the input evolves as `u_{j+1}(z) = T(z)·u_j(z)` with
//! `T(z) = 1 − L(z)·z·P(z)` (Q ≡ 1). The extra `z` undoes the one-sample
//! delay of the zero-order hold. The norm of the trial vector decreases
//! monotonically when `sup_θ |T(e^{iθ})| < 1`; by conjugate symmetry it is
//! enough to scan `θ ∈ [0, π]`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{IlcError, Result};
use crate::learning::{LearningFunction, LearningKind};
use crate::plant::{ABPoint, PlantParams};

/// Half-width of the band around a boundary in which verdicts are marginal.
pub const MARGINAL_BAND: f64 = 1e-6;

/// Default number of uniform samples before refinement.
pub const DEFAULT_GRID: usize = 1024;

const MIN_GRID: usize = 64;
const REFINE_TOL: f64 = 1e-10;

/// `P(z) = G/(1 + C·G)` with `G = (e^U − 1)/(z·e^U − 1)` and
/// `C = Kp + Ki·τs·z/(z − 1)`. For `Ki = 0` this equals `A/(z − B)`.
pub fn closed_loop_p(z: Complex64, params: &PlantParams) -> Result<Complex64> {
    // G rewritten with e^{−U}: (1 − e^{−U})/(z − e^{−U}).
    let decay = (-params.u_product).exp();
    let g_den = z - decay;
    if g_den.norm() == 0.0 {
        return Err(IlcError::Pole(z));
    }
    let g = Complex64::from(-(-params.u_product).exp_m1()) / g_den;
    let c = if params.ki != 0.0 {
        let integ_den = z - 1.0;
        if integ_den.norm() == 0.0 {
            return Err(IlcError::Pole(z));
        }
        params.kp + params.ki * params.sample_period * z / integ_den
    } else {
        Complex64::from(params.kp)
    };
    let den = 1.0 + c * g;
    if den.norm() <= f64::EPSILON * (1.0 + (c * g).norm()) {
        return Err(IlcError::Pole(z));
    }
    Ok(g / den)
}

/// `T(e^{iθ}) = 1 − L(e^{iθ})·e^{iθ}·A/(e^{iθ} − B)`.
pub fn t_of_theta(point: &ABPoint, lf: &LearningFunction, theta: f64) -> Result<Complex64> {
    let z = Complex64::from_polar(1.0, theta);
    let den = z - point.b_pole;
    if den.norm() <= 1e-15 {
        return Err(IlcError::Pole(z));
    }
    let l = lf.eval(z)?;
    Ok(1.0 - l * z * point.a_gain / den)
}

/// Locus of `T` over `θ ∈ [0, π]` and its refined supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct TLocus {
    pub thetas: Vec<f64>,
    pub values: Vec<Complex64>,
    pub sup_abs: f64,
    pub argmax_theta: f64,
}

impl TLocus {
    pub fn mc(&self) -> bool {
        self.sup_abs < 1.0
    }

    pub fn is_marginal(&self) -> bool {
        (self.sup_abs - 1.0).abs() <= MARGINAL_BAND
    }
}

/// Supremum of `|T|` over the upper unit semicircle: uniform scan with
/// `grid_size` samples, then golden-section refinement around every local
/// maximum.
pub fn sup_t(point: &ABPoint, lf: &LearningFunction, grid_size: usize) -> Result<TLocus> {
    if grid_size < MIN_GRID {
        return Err(IlcError::InvalidParameter {
            name: "grid_size",
            value: grid_size as f64,
            reason: "must be >= 64",
        });
    }
    let step = PI / (grid_size - 1) as f64;
    let thetas: Vec<f64> = (0..grid_size)
        .map(|i| if i + 1 == grid_size { PI } else { i as f64 * step })
        .collect();
    let values = thetas
        .iter()
        .map(|&th| t_of_theta(point, lf, th))
        .collect::<Result<Vec<_>>>()?;
    let mags: Vec<f64> = values.iter().map(|v| v.norm()).collect();

    let global = mags
        .iter()
        .enumerate()
        .fold(0, |best, (i, &m)| if m > mags[best] { i } else { best });
    let mut sup_abs = mags[global];
    let mut argmax_theta = thetas[global];

    let last = grid_size - 1;
    for i in 0..grid_size {
        let left = if i > 0 { mags[i - 1] } else { f64::NEG_INFINITY };
        let right = if i < last { mags[i + 1] } else { f64::NEG_INFINITY };
        let peak = mags[i] >= left && mags[i] >= right && (mags[i] > left || mags[i] > right);
        if !peak && i != global {
            continue;
        }
        let lo = thetas[i.saturating_sub(1)];
        let hi = thetas[(i + 1).min(last)];
        let (th, m) = golden_max(|th| t_of_theta(point, lf, th).map(|t| t.norm()), lo, hi)?;
        if m > sup_abs {
            sup_abs = m;
            argmax_theta = th;
        }
    }

    Ok(TLocus {
        thetas,
        values,
        sup_abs,
        argmax_theta,
    })
}

fn golden_max<F>(f: F, mut lo: f64, mut hi: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > REFINE_TOL {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1)?;
        }
    }
    // The bracket ends are candidates too: maxima at θ = 0 or π sit there.
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for end in [lo, hi] {
        let fe = f(end)?;
        if fe > best.1 {
            best = (end, fe);
        }
    }
    Ok(best)
}

/// How much weight an analytic verdict carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionBasis {
    /// Necessary and sufficient.
    Exact,
    /// Necessary conditions only; the true region may be smaller.
    NecessaryOnly,
    /// Curve fitted to numeric eigenvalue maps.
    EmpiricalFit,
}

impl RegionBasis {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionBasis::Exact => "exact",
            RegionBasis::NecessaryOnly => "necessary-only",
            RegionBasis::EmpiricalFit => "empirical-fit",
        }
    }
}

impl fmt::Display for RegionBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Verdict of a closed-form region test at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionVerdict {
    /// Every inequality holds.
    pub inside: bool,
    /// Some inequality is within [`MARGINAL_BAND`] of equality.
    pub marginal: bool,
    pub basis: RegionBasis,
    pub detail: String,
}

/// One inequality `lhs < rhs` (or `≤`).
#[derive(Debug, Clone)]
struct Condition {
    text: &'static str,
    lhs: f64,
    rhs: f64,
    strict: bool,
}

impl Condition {
    fn lt(text: &'static str, lhs: f64, rhs: f64) -> Self {
        Self {
            text,
            lhs,
            rhs,
            strict: true,
        }
    }

    fn le(text: &'static str, lhs: f64, rhs: f64) -> Self {
        Self {
            text,
            lhs,
            rhs,
            strict: false,
        }
    }

    fn holds(&self) -> bool {
        if self.strict {
            self.lhs < self.rhs
        } else {
            self.lhs <= self.rhs
        }
    }
}

fn verdict(conditions: &[Condition], basis: RegionBasis) -> RegionVerdict {
    let failed: Vec<&str> = conditions
        .iter()
        .filter(|c| !c.holds())
        .map(|c| c.text)
        .collect();
    let marginal = conditions
        .iter()
        .any(|c| (c.rhs - c.lhs).abs() <= MARGINAL_BAND);
    let detail = if failed.is_empty() {
        "all conditions hold".to_string()
    } else {
        format!("failed: {}", failed.join("; "))
    };
    RegionVerdict {
        inside: failed.is_empty(),
        marginal,
        basis,
        detail,
    }
}

/// Closed-form monotonic-convergence region of the named learning kinds.
pub fn mc_region_analytic(kind: LearningKind, point: &ABPoint, v: f64) -> Result<RegionVerdict> {
    let a = point.a_gain;
    let b = point.b_pole;
    let av = a * v;
    let c = |t, l, r| Condition::lt(t, l, r);
    let out = match kind {
        LearningKind::L1 => verdict(
            &[
                c("0 < Av", 0.0, av),
                c("Av < 2", av, 2.0),
                c("-1 + Av/2 < B", -1.0 + 0.5 * av, b),
                c("B < 1 - Av/2", b, 1.0 - 0.5 * av),
            ],
            RegionBasis::Exact,
        ),
        LearningKind::L2Back => verdict(
            &[
                c("0 < Av", 0.0, av),
                c("Av < 2", av, 2.0),
                c("-1 < B", -1.0, b),
                c("B < 1 - Av", b, 1.0 - av),
            ],
            RegionBasis::Exact,
        ),
        LearningKind::L2Ahead => verdict(
            &[
                c("0 < Av", 0.0, av),
                c("Av < 1", av, 1.0),
                Condition::le("(-1 + Av)/3 <= B", (-1.0 + av) / 3.0, b),
                Condition::le("B <= 1 - Av", b, 1.0 - av),
            ],
            RegionBasis::Exact,
        ),
        LearningKind::L3Symmetric => RegionVerdict {
            inside: false,
            marginal: false,
            basis: RegionBasis::Exact,
            detail: "no monotonic-convergence domain".to_string(),
        },
        LearningKind::L3Ahead => verdict(
            &[
                c("B < 1 - 3Av/2", b, 1.0 - 1.5 * av),
                c("B > (1 + Av/2)/2", 0.5 * (1.0 + 0.5 * av), b),
            ],
            RegionBasis::NecessaryOnly,
        ),
        LearningKind::L3Back => verdict(
            &[
                c("B < (-16 - 7A)/42", b, (-16.0 - 7.0 * a) / 42.0),
                c("B > (-28 + 7A)/42", (-28.0 + 7.0 * a) / 42.0, b),
            ],
            RegionBasis::NecessaryOnly,
        ),
        LearningKind::L3SymmetricHalf | LearningKind::Custom => {
            return Err(IlcError::UnsupportedKind {
                kind: kind.token(),
                what: "monotonic-convergence",
            })
        }
    };
    Ok(out)
}

fn require_unit_gain(kind: LearningKind, v: f64) -> Result<()> {
    if (v - 1.0).abs() > 1e-12 {
        return Err(IlcError::UnsupportedKind {
            kind: kind.token(),
            what: "asymptotic-convergence (fitted curves exist only for v = 1)",
        });
    }
    Ok(())
}

/// Closed-form (or fitted) asymptotic-convergence region.
///
/// Causal kinds have a lower-triangular iteration matrix whose eigenvalues
/// all equal `1 − vA`, so the region is `0 < vA < 2` whatever `B` is. The
/// look-ahead kinds only have curves fitted at `v = 1`.
pub fn ac_region_analytic(kind: LearningKind, point: &ABPoint, v: f64) -> Result<RegionVerdict> {
    let a = point.a_gain;
    let b = point.b_pole;
    let av = a * v;
    let c = |t, l, r| Condition::lt(t, l, r);
    let out = match kind {
        LearningKind::L1 | LearningKind::L2Back | LearningKind::L3Back => verdict(
            &[c("0 < Av", 0.0, av), c("Av < 2", av, 2.0)],
            RegionBasis::Exact,
        ),
        LearningKind::L2Ahead => {
            require_unit_gain(kind, v)?;
            verdict(
                &[
                    c("B > (-1 + A/2)/2", 0.5 * (-1.0 + 0.5 * a), b),
                    c("B < (2 - A)^2/(8A)", b, (2.0 - a).powi(2) / (8.0 * a)),
                ],
                RegionBasis::EmpiricalFit,
            )
        }
        LearningKind::L3Ahead => {
            require_unit_gain(kind, v)?;
            verdict(
                &[
                    c("B > -0.6(1 - A/2)^0.8", -0.6 * (1.0 - 0.5 * a).powf(0.8), b),
                    c(
                        "B < (2 - A)^2/(12 A^(2/3))",
                        b,
                        (2.0 - a).powi(2) / (12.0 * a.powf(2.0 / 3.0)),
                    ),
                ],
                RegionBasis::EmpiricalFit,
            )
        }
        LearningKind::L3Symmetric | LearningKind::L3SymmetricHalf | LearningKind::Custom => {
            return Err(IlcError::UnsupportedKind {
                kind: kind.token(),
                what: "asymptotic-convergence",
            })
        }
    };
    Ok(out)
}

/// Which convergence notion a closed-form curve bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveFamily {
    Mc,
    Ac,
}

impl CurveFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveFamily::Mc => "mc",
            CurveFamily::Ac => "ac",
        }
    }
}

/// A closed-form boundary `B = f(A, v)`.
#[derive(Debug, Clone, Copy)]
pub struct RegionCurve {
    pub label: &'static str,
    pub family: CurveFamily,
    pub basis: RegionBasis,
    f: fn(f64, f64) -> f64,
}

impl RegionCurve {
    pub fn b_at(&self, a: f64, v: f64) -> f64 {
        (self.f)(a, v)
    }
}

/// The boundary curves of the analytic regions for `kind`, suitable for
/// overlaying on numeric maps.
pub fn region_curves(kind: LearningKind, v: f64) -> Result<Vec<RegionCurve>> {
    use CurveFamily::{Ac, Mc};
    use RegionBasis::{EmpiricalFit, Exact, NecessaryOnly};
    let curve = |label, family, basis, f| RegionCurve {
        label,
        family,
        basis,
        f,
    };
    let unit_gain = (v - 1.0).abs() <= 1e-12;
    let mut curves = match kind {
        LearningKind::L1 => vec![
            curve("B = 1 - Av/2", Mc, Exact, (|a, v| 1.0 - 0.5 * a * v) as fn(f64, f64) -> f64),
            curve("B = -1 + Av/2", Mc, Exact, |a, v| -1.0 + 0.5 * a * v),
        ],
        LearningKind::L2Back => vec![
            curve("B = 1 - Av", Mc, Exact, (|a, v| 1.0 - a * v) as fn(f64, f64) -> f64),
            curve("B = -1", Mc, Exact, |_, _| -1.0),
        ],
        LearningKind::L2Ahead => {
            let mut c = vec![
                curve("B = 1 - Av", Mc, Exact, (|a, v| 1.0 - a * v) as fn(f64, f64) -> f64),
                curve("B = (-1 + Av)/3", Mc, Exact, |a, v| (-1.0 + a * v) / 3.0),
            ];
            if unit_gain {
                c.push(curve("B = (2 - A)^2/(8A)", Ac, EmpiricalFit, |a, _| {
                    (2.0 - a).powi(2) / (8.0 * a)
                }));
                c.push(curve("B = (-1 + A/2)/2", Ac, EmpiricalFit, |a, _| {
                    0.5 * (-1.0 + 0.5 * a)
                }));
            }
            c
        }
        LearningKind::L3Ahead => {
            let mut c = vec![
                curve("B = 1 - 3Av/2", Mc, NecessaryOnly, (|a, v| 1.0 - 1.5 * a * v) as fn(f64, f64) -> f64),
                curve("B = (1 + Av/2)/2", Mc, NecessaryOnly, |a, v| 0.5 * (1.0 + 0.5 * a * v)),
            ];
            if unit_gain {
                c.push(curve("B = (2 - A)^2/(12 A^(2/3))", Ac, EmpiricalFit, |a, _| {
                    (2.0 - a).powi(2) / (12.0 * a.powf(2.0 / 3.0))
                }));
                c.push(curve("B = -0.6(1 - A/2)^0.8", Ac, EmpiricalFit, |a, _| {
                    -0.6 * (1.0 - 0.5 * a).powf(0.8)
                }));
            }
            c
        }
        LearningKind::L3Back => vec![
            curve("B = (-16 - 7A)/42", Mc, NecessaryOnly, (|a, _| (-16.0 - 7.0 * a) / 42.0) as fn(f64, f64) -> f64),
            curve("B = (-28 + 7A)/42", Mc, NecessaryOnly, |a, _| (-28.0 + 7.0 * a) / 42.0),
        ],
        LearningKind::L3Symmetric | LearningKind::L3SymmetricHalf | LearningKind::Custom => {
            return Err(IlcError::UnsupportedKind {
                kind: kind.token(),
                what: "closed-form",
            })
        }
    };
    if kind.is_causal() {
        // Causal AC boundary is the vertical line A = 2/v, not a B-curve.
        curves.retain(|c| c.family == Mc);
    }
    Ok(curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::ab_from_plant;
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    fn lf(kind: LearningKind, v: f64) -> LearningFunction {
        kind.with_gain(v).unwrap()
    }

    #[test]
    fn closed_loop_examples() {
        let params = PlantParams::new(LN_2, 1.0).unwrap();
        let p1 = closed_loop_p(Complex64::new(1.0, 0.0), &params).unwrap();
        assert_relative_eq!(p1.re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(p1.re, 1.0 / (1.0 + params.kp), epsilon = 1e-15);

        let z = Complex64::new(2.0, 0.0);
        let p2 = closed_loop_p(z, &params).unwrap();
        let ab = ab_from_plant(&params).unwrap();
        let pole_form = ab.a_gain / (z - ab.b_pole);
        assert_relative_eq!(p2.re, 0.25, epsilon = 1e-15);
        assert_relative_eq!(p2.re, pole_form.re, epsilon = 1e-15);
    }

    #[test]
    fn closed_loop_pole_is_an_error() {
        let params = PlantParams::new(LN_2, 0.0).unwrap();
        // Open-loop pole at e^{−U} = 0.5 and closed-loop pole at B = 0.5.
        assert!(closed_loop_p(Complex64::new(0.5, 0.0), &params).is_err());
        let pi = PlantParams::pole_zero_cancelled(LN_2, 1.0, 1e-3).unwrap();
        assert!(closed_loop_p(Complex64::new(1.0, 0.0), &pi).is_err());
    }

    #[test]
    fn t_examples() {
        let p = ABPoint::new(0.5, 0.0);
        let t = t_of_theta(&p, &lf(LearningKind::L1, 1.0), 0.0).unwrap();
        assert_relative_eq!(t.re, 0.5, epsilon = 1e-15);
        let t = t_of_theta(&p, &lf(LearningKind::L2Ahead, 1.0), PI).unwrap();
        assert_relative_eq!(t.re, 1.0, epsilon = 1e-15);
        assert!(t.im.abs() < 1e-15);
        for kind in LearningKind::NAMED {
            let t = t_of_theta(&ABPoint::new(0.3, -0.4), &lf(kind, 0.0), 1.1).unwrap();
            assert_eq!(t, Complex64::new(1.0, 0.0));
        }
        assert!(t_of_theta(&ABPoint::new(0.5, 1.0), &lf(LearningKind::L1, 1.0), 0.0).is_err());
    }

    #[test]
    fn sup_examples() {
        let p = ABPoint::new(0.5, 0.0);
        let loc = sup_t(&p, &lf(LearningKind::L1, 1.0), DEFAULT_GRID).unwrap();
        assert_relative_eq!(loc.sup_abs, 0.5, epsilon = 1e-12);
        assert!(loc.argmax_theta.abs() < 1e-9 || (loc.argmax_theta - PI).abs() < 1e-9);

        let loc = sup_t(&p, &lf(LearningKind::L1, 4.0), DEFAULT_GRID).unwrap();
        assert_relative_eq!(loc.sup_abs, 1.0, epsilon = 1e-12);
        assert!(loc.is_marginal());

        let loc = sup_t(&ABPoint::new(0.3, 0.5), &lf(LearningKind::L3Symmetric, 1.0), DEFAULT_GRID)
            .unwrap();
        assert!(loc.sup_abs > 1.0);

        assert!(sup_t(&p, &lf(LearningKind::L1, 1.0), 32).is_err());
    }

    #[test]
    fn locus_shape() {
        let loc = sup_t(&ABPoint::new(0.4, 0.2), &lf(LearningKind::L3Ahead, 1.0), 128).unwrap();
        assert_eq!(loc.thetas[0], 0.0);
        assert_eq!(*loc.thetas.last().unwrap(), PI);
        assert!(loc.thetas.windows(2).all(|w| w[1] > w[0]));
        assert!(loc.values.iter().all(|v| v.norm() <= loc.sup_abs));
    }

    #[test]
    fn zero_gain_is_marginal_everywhere() {
        let loc = sup_t(&ABPoint::new(0.6, -0.3), &lf(LearningKind::L2Back, 0.0), 64).unwrap();
        assert_eq!(loc.sup_abs, 1.0);
        assert!(loc.is_marginal());
    }

    #[test]
    fn mc_analytic_examples() {
        let v = mc_region_analytic(LearningKind::L1, &ABPoint::new(0.5, 0.5), 1.0).unwrap();
        assert!(v.inside && !v.marginal);
        assert_eq!(v.basis, RegionBasis::Exact);

        let v = mc_region_analytic(LearningKind::L2Ahead, &ABPoint::new(0.5, 0.6), 1.0).unwrap();
        assert!(!v.inside);
        assert!(v.detail.contains("B <= 1 - Av"));

        for (a, b, g) in [(0.1, 0.0, 1.0), (0.5, 0.5, 2.0), (0.9, -0.9, 0.3)] {
            let v = mc_region_analytic(LearningKind::L3Symmetric, &ABPoint::new(a, b), g).unwrap();
            assert!(!v.inside);
        }

        let v = mc_region_analytic(LearningKind::L3Back, &ABPoint::new(0.2, -0.5), 1.0).unwrap();
        assert_eq!(v.basis, RegionBasis::NecessaryOnly);
        let v = mc_region_analytic(LearningKind::L1, &ABPoint::new(0.5, 0.75), 1.0).unwrap();
        assert!(!v.inside && v.marginal);

        assert!(matches!(
            mc_region_analytic(LearningKind::Custom, &ABPoint::new(0.5, 0.0), 1.0),
            Err(IlcError::UnsupportedKind { .. })
        ));
    }

    #[test]
    fn ac_analytic_examples() {
        for b in [-0.95, 0.0, 0.95] {
            let v = ac_region_analytic(LearningKind::L1, &ABPoint::new(0.5, b), 1.0).unwrap();
            assert!(v.inside);
        }
        let p = ABPoint::new(0.5, 0.55);
        assert!(ac_region_analytic(LearningKind::L2Ahead, &p, 1.0).unwrap().inside);
        assert!(!mc_region_analytic(LearningKind::L2Ahead, &p, 1.0).unwrap().inside);
        let v = ac_region_analytic(LearningKind::L2Ahead, &ABPoint::new(0.5, 0.6), 1.0).unwrap();
        assert!(!v.inside);
        assert_eq!(v.basis, RegionBasis::EmpiricalFit);

        assert!(ac_region_analytic(LearningKind::L2Ahead, &p, 2.0).is_err());
        assert!(ac_region_analytic(LearningKind::L3Symmetric, &p, 1.0).is_err());
    }

    #[test]
    fn curves_available() {
        assert_eq!(region_curves(LearningKind::L1, 1.0).unwrap().len(), 2);
        assert_eq!(region_curves(LearningKind::L2Ahead, 1.0).unwrap().len(), 4);
        assert_eq!(region_curves(LearningKind::L2Ahead, 2.0).unwrap().len(), 2);
        assert!(region_curves(LearningKind::L3Symmetric, 1.0).is_err());
        let c = &region_curves(LearningKind::L1, 1.0).unwrap()[0];
        assert_relative_eq!(c.b_at(0.4, 1.0), 0.8);
    }
}
