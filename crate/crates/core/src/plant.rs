//! Sampled first-order plant under proportional (optionally PI) control.
//!
//! The cavity with time constant `1/a`, sampled through a zero-order hold at
//! period `τs`, is summarized by the single product `U = a·τs`. With pure
//! proportional control the closed loop is `A/(z − B)` where
//! `A = 1 − e^{−U}` and `B = e^{−U}(1 + Kp) − Kp`; every region analysis in
//! this crate is carried out in the `(A, B)` coordinates.

use crate::error::{IlcError, Result};

/// Physical and controller parameters of the sampled plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// Dimensionless `U = a·τs`.
    pub u_product: f64,
    /// Proportional gain.
    pub kp: f64,
    /// Integral gain in 1/s. Zero for the single-pole problem.
    pub ki: f64,
    /// Sample period in seconds; only used when `ki != 0`.
    pub sample_period: f64,
}

impl PlantParams {
    /// Proportional-only plant (`Ki = 0`).
    pub fn new(u_product: f64, kp: f64) -> Result<Self> {
        Self::with_integral(u_product, kp, 0.0, 1.0)
    }

    pub fn with_integral(u_product: f64, kp: f64, ki: f64, sample_period: f64) -> Result<Self> {
        if !(u_product > 0.0) || !u_product.is_finite() {
            return Err(IlcError::InvalidParameter {
                name: "U",
                value: u_product,
                reason: "must be finite and > 0",
            });
        }
        if !(sample_period > 0.0) || !sample_period.is_finite() {
            return Err(IlcError::InvalidParameter {
                name: "sample_period",
                value: sample_period,
                reason: "must be finite and > 0",
            });
        }
        if !kp.is_finite() || !ki.is_finite() {
            return Err(IlcError::InvalidParameter {
                name: "gain",
                value: if kp.is_finite() { ki } else { kp },
                reason: "gains must be finite",
            });
        }
        Ok(Self {
            u_product,
            kp,
            ki,
            sample_period,
        })
    }

    /// PI controller with pole-zero cancellation, `Ki = a·Kp = U·Kp/τs`.
    pub fn pole_zero_cancelled(u_product: f64, kp: f64, sample_period: f64) -> Result<Self> {
        Self::with_integral(u_product, kp, u_product / sample_period * kp, sample_period)
    }
}

/// A point in the transformed `(A, B)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ABPoint {
    pub a_gain: f64,
    pub b_pole: f64,
}

impl ABPoint {
    pub const fn new(a_gain: f64, b_pole: f64) -> Self {
        Self { a_gain, b_pole }
    }

    /// `0 < A < 1` and `−1 < B < 1`: the image of a valid plant.
    pub fn in_range(&self) -> bool {
        self.a_gain > 0.0 && self.a_gain < 1.0 && self.b_pole > -1.0 && self.b_pole < 1.0
    }
}

/// Maps `(U, Kp)` to `(A, B)`. Requires `Ki = 0`.
pub fn ab_from_plant(params: &PlantParams) -> Result<ABPoint> {
    if params.ki != 0.0 {
        return Err(IlcError::IntegralGainNotSupported(params.ki));
    }
    if !(params.u_product > 0.0) {
        return Err(IlcError::InvalidParameter {
            name: "U",
            value: params.u_product,
            reason: "must be > 0",
        });
    }
    let decay = (-params.u_product).exp();
    // 1 − e^{−U} without cancellation for small U.
    let a_gain = -(-params.u_product).exp_m1();
    let b_pole = decay * (1.0 + params.kp) - params.kp;
    Ok(ABPoint { a_gain, b_pole })
}

/// Inverse of [`ab_from_plant`]: `U = −ln(1 − A)`, `Kp = (1 − A − B)/A`.
pub fn plant_from_ab(point: &ABPoint) -> Result<PlantParams> {
    let a = point.a_gain;
    if !(a > 0.0 && a < 1.0) {
        return Err(IlcError::InvalidParameter {
            name: "A",
            value: a,
            reason: "must lie in (0, 1)",
        });
    }
    if !point.b_pole.is_finite() {
        return Err(IlcError::InvalidParameter {
            name: "B",
            value: point.b_pole,
            reason: "must be finite",
        });
    }
    let u_product = -(-a).ln_1p();
    let kp = ((1.0 - a) - point.b_pole) / a;
    PlantParams::new(u_product, kp)
}

/// Proportional-gain limits of the loop without learning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoIlcGainLimits {
    /// `Kp < (1 + e^U)/(e^U − 1)`, equivalent to `B > −1`.
    pub stability_bound: f64,
    /// `Kp < 1/(e^U − 1)`, equivalent to `B > 0` (no sign alternation).
    pub oscillation_bound: f64,
    /// `Kp ≥ −1`, equivalent to `B < 1`.
    pub lower_bound: f64,
}

/// Qualitative behaviour of the loop without learning at a given `Kp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainClass {
    StableMonotone,
    StableOscillatory,
    Marginal,
    Unstable,
}

impl GainClass {
    pub fn describe(&self) -> &'static str {
        match self {
            GainClass::StableMonotone => "stable, monotone",
            GainClass::StableOscillatory => "stable, oscillatory",
            GainClass::Marginal => "marginal",
            GainClass::Unstable => "unstable",
        }
    }
}

impl NoIlcGainLimits {
    /// Stable interval `(lower_bound, stability_bound)`.
    pub fn stable_interval(&self) -> (f64, f64) {
        (self.lower_bound, self.stability_bound)
    }

    /// Oscillation-free interval `(lower_bound, oscillation_bound]`.
    pub fn monotone_interval(&self) -> (f64, f64) {
        (self.lower_bound, self.oscillation_bound)
    }

    pub fn classify(&self, kp: f64) -> GainClass {
        if kp == self.lower_bound || kp == self.stability_bound {
            GainClass::Marginal
        } else if kp < self.lower_bound || kp > self.stability_bound {
            GainClass::Unstable
        } else if kp > self.oscillation_bound {
            GainClass::StableOscillatory
        } else {
            GainClass::StableMonotone
        }
    }
}

/// The three `Kp` bounds that keep the pole of `A/(z − B)` inside the unit
/// circle, and the stricter one that keeps it on the positive real axis.
pub fn no_ilc_gain_limits(u_product: f64) -> Result<NoIlcGainLimits> {
    if !(u_product > 0.0) {
        return Err(IlcError::InvalidParameter {
            name: "U",
            value: u_product,
            reason: "must be > 0",
        });
    }
    // Written in e^{−U} so that large U does not overflow.
    let decay = (-u_product).exp();
    let one_minus_decay = -(-u_product).exp_m1();
    Ok(NoIlcGainLimits {
        stability_bound: (1.0 + decay) / one_minus_decay,
        oscillation_bound: decay / one_minus_decay,
        lower_bound: -1.0,
    })
}

/// Within-trial step-response shape, decided by the pole `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialClass {
    Monotone,
    DampedOscillation,
    GrowingOscillation,
    MonotoneDivergent,
    Marginal,
}

impl TrialClass {
    pub fn of_pole(b_pole: f64) -> Self {
        if b_pole == 1.0 || b_pole == -1.0 {
            TrialClass::Marginal
        } else if b_pole > 1.0 {
            TrialClass::MonotoneDivergent
        } else if b_pole < -1.0 {
            TrialClass::GrowingOscillation
        } else if b_pole < 0.0 {
            TrialClass::DampedOscillation
        } else {
            TrialClass::Monotone
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(
            self,
            TrialClass::GrowingOscillation | TrialClass::MonotoneDivergent
        )
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TrialClass::Monotone => "monotone",
            TrialClass::DampedOscillation => "damped-oscillation",
            TrialClass::GrowingOscillation => "growing-oscillation",
            TrialClass::MonotoneDivergent => "monotone-divergent",
            TrialClass::Marginal => "marginal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResponse {
    /// `y_0 … y_steps`, so `samples.len() == steps + 1`.
    pub samples: Vec<f64>,
    pub classification: TrialClass,
}

/// Step response of the loop without learning: `y_0 = 0`,
/// `y_{k+1} = B·y_k + A·r`.
pub fn simulate_trial(point: &ABPoint, reference: f64, steps: usize) -> Result<TrialResponse> {
    if steps == 0 {
        return Err(IlcError::InvalidParameter {
            name: "steps",
            value: 0.0,
            reason: "must be >= 1",
        });
    }
    let drive = point.a_gain * reference;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut y = 0.0;
    samples.push(y);
    for _ in 0..steps {
        y = point.b_pole * y + drive;
        samples.push(y);
    }
    Ok(TrialResponse {
        samples,
        classification: TrialClass::of_pole(point.b_pole),
    })
}
