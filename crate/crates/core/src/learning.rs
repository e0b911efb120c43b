//! FIR learning functions `L(z) = v·Σ c_s z^s`.
//!
//! Shift `+1` reads element `k+1` of the previous trial when updating element
//! `k` (look-ahead, superdiagonal); shift `−1` reads element `k−1`
//! (look-back, subdiagonal).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{IlcError, Result};

/// Largest admissible `|shift|`.
pub const MAX_SHIFT: i32 = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub shift: i32,
    pub coefficient: f64,
}

impl Tap {
    pub const fn new(shift: i32, coefficient: f64) -> Self {
        Self { shift, coefficient }
    }
}

/// The named learning functions plus `Custom` for parsed tap sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearningKind {
    L1,
    L2Back,
    L2Ahead,
    L3Symmetric,
    L3SymmetricHalf,
    L3Ahead,
    L3Back,
    Custom,
}

impl LearningKind {
    pub const NAMED: [LearningKind; 7] = [
        LearningKind::L1,
        LearningKind::L2Back,
        LearningKind::L2Ahead,
        LearningKind::L3Symmetric,
        LearningKind::L3SymmetricHalf,
        LearningKind::L3Ahead,
        LearningKind::L3Back,
    ];

    /// Tap set of a named kind; empty for `Custom`.
    pub fn taps(&self) -> Vec<Tap> {
        let t = |pairs: &[(i32, f64)]| pairs.iter().map(|&(s, c)| Tap::new(s, c)).collect();
        match self {
            LearningKind::L1 => t(&[(0, 1.0)]),
            LearningKind::L2Back => t(&[(-1, 1.0), (0, 1.0)]),
            LearningKind::L2Ahead => t(&[(0, 1.0), (1, 1.0)]),
            LearningKind::L3Symmetric => t(&[(-1, 1.0), (0, 1.0), (1, 1.0)]),
            LearningKind::L3SymmetricHalf => t(&[(-1, 0.5), (0, 1.0), (1, 0.5)]),
            LearningKind::L3Ahead => t(&[(0, 1.0), (1, 1.0), (2, 1.0)]),
            LearningKind::L3Back => t(&[(-2, 1.0), (-1, 1.0), (0, 1.0)]),
            LearningKind::Custom => Vec::new(),
        }
    }

    pub fn token(&self) -> &'static str {
        match self {
            LearningKind::L1 => "l1",
            LearningKind::L2Back => "l2back",
            LearningKind::L2Ahead => "l2ahead",
            LearningKind::L3Symmetric => "l3sym",
            LearningKind::L3SymmetricHalf => "l3symhalf",
            LearningKind::L3Ahead => "l3ahead",
            LearningKind::L3Back => "l3back",
            LearningKind::Custom => "custom",
        }
    }

    pub fn is_causal(&self) -> bool {
        matches!(
            self,
            LearningKind::L1 | LearningKind::L2Back | LearningKind::L3Back
        )
    }

    /// Learning function of this kind with gain `v`.
    pub fn with_gain(&self, gain_v: f64) -> Result<LearningFunction> {
        if *self == LearningKind::Custom {
            return Err(IlcError::InvalidTaps(
                "custom kind needs an explicit tap list".into(),
            ));
        }
        let mut lf = LearningFunction::new(self.taps(), gain_v)?;
        lf.kind = *self;
        lf.name = Some(self.token().to_string());
        Ok(lf)
    }
}

impl fmt::Display for LearningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for LearningKind {
    type Err = IlcError;

    fn from_str(s: &str) -> Result<Self> {
        LearningKind::NAMED
            .iter()
            .chain(std::iter::once(&LearningKind::Custom))
            .find(|k| k.token().eq_ignore_ascii_case(s.trim()))
            .copied()
            .ok_or_else(|| IlcError::UnknownKind(s.to_string()))
    }
}

/// `L(z) = v·Σ c_s z^s` with the taps sorted by shift.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningFunction {
    taps: Vec<Tap>,
    gain_v: f64,
    kind: LearningKind,
    pub name: Option<String>,
}

impl LearningFunction {
    /// Builds a `Custom` learning function. Shifts must be distinct and
    /// within `±MAX_SHIFT`; the gain must be finite and non-negative.
    pub fn new(mut taps: Vec<Tap>, gain_v: f64) -> Result<Self> {
        if taps.is_empty() {
            return Err(IlcError::InvalidTaps("tap list is empty".into()));
        }
        if !gain_v.is_finite() || gain_v < 0.0 {
            return Err(IlcError::InvalidParameter {
                name: "v",
                value: gain_v,
                reason: "learning gain must be finite and >= 0",
            });
        }
        taps.sort_by_key(|t| t.shift);
        for w in taps.windows(2) {
            if w[0].shift == w[1].shift {
                return Err(IlcError::InvalidTaps(format!(
                    "shift {} appears twice",
                    w[0].shift
                )));
            }
        }
        for t in &taps {
            if t.shift.abs() > MAX_SHIFT {
                return Err(IlcError::InvalidTaps(format!(
                    "|shift| = {} exceeds {MAX_SHIFT}",
                    t.shift.abs()
                )));
            }
            if !t.coefficient.is_finite() {
                return Err(IlcError::InvalidTaps(format!(
                    "coefficient for shift {} is not finite",
                    t.shift
                )));
            }
        }
        Ok(Self {
            taps,
            gain_v,
            kind: LearningKind::Custom,
            name: None,
        })
    }

    /// Parses the compact form `"s:c,s:c,…"`, e.g. `"0:1,1:0.5,-1:0.5"`.
    pub fn parse_taps(text: &str, gain_v: f64) -> Result<Self> {
        let taps = text
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|item| {
                let (s, c) = item
                    .split_once(':')
                    .ok_or_else(|| IlcError::InvalidTaps(format!("`{item}` is not `shift:coef`")))?;
                let shift = s
                    .trim()
                    .parse::<i32>()
                    .map_err(|e| IlcError::InvalidTaps(format!("shift `{s}`: {e}")))?;
                let coefficient = c
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| IlcError::InvalidTaps(format!("coefficient `{c}`: {e}")))?;
                Ok(Tap::new(shift, coefficient))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut lf = Self::new(taps, gain_v)?;
        lf.name = Some(text.trim().to_string());
        Ok(lf)
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn gain(&self) -> f64 {
        self.gain_v
    }

    pub fn kind(&self) -> LearningKind {
        self.kind
    }

    /// Same taps, different gain.
    pub fn with_gain(&self, gain_v: f64) -> Result<Self> {
        let mut lf = Self::new(self.taps.clone(), gain_v)?;
        lf.kind = self.kind;
        lf.name = self.name.clone();
        Ok(lf)
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.taps_string())
    }

    /// Canonical `"s:c,…"` rendering.
    pub fn taps_string(&self) -> String {
        self.taps
            .iter()
            .map(|t| format!("{}:{}", t.shift, t.coefficient))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Largest look-back distance among non-zero taps (0 if none).
    pub fn lookback(&self) -> usize {
        self.taps
            .iter()
            .filter(|t| t.coefficient != 0.0)
            .map(|t| (-t.shift).max(0) as usize)
            .max()
            .unwrap_or(0)
    }

    /// Largest look-ahead distance among non-zero taps (0 if none).
    pub fn lookahead(&self) -> usize {
        self.taps
            .iter()
            .filter(|t| t.coefficient != 0.0)
            .map(|t| t.shift.max(0) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn max_abs_shift(&self) -> usize {
        self.lookback().max(self.lookahead())
    }

    /// No look-ahead taps.
    pub fn is_causal(&self) -> bool {
        self.lookahead() == 0
    }

    /// Coefficient at `shift` including the gain, zero if absent.
    pub fn weight(&self, shift: i32) -> f64 {
        self.taps
            .iter()
            .find(|t| t.shift == shift)
            .map_or(0.0, |t| self.gain_v * t.coefficient)
    }

    /// `L(z) = v·Σ c_s z^s`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        if z == Complex64::new(0.0, 0.0) {
            if self.lookback() > 0 {
                return Err(IlcError::ZeroArgument);
            }
            return Ok(Complex64::from(self.weight(0)));
        }
        let sum: Complex64 = self
            .taps
            .iter()
            .map(|t| t.coefficient * z.powi(t.shift))
            .sum();
        Ok(sum * self.gain_v)
    }

    /// Banded Toeplitz matrix with `(i, j) = v·c_{j−i}`; taps that would
    /// index outside the trial are dropped.
    pub fn toeplitz(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for t in &self.taps {
            let w = self.gain_v * t.coefficient;
            for i in 0..n {
                let j = i as i64 + t.shift as i64;
                if (0..n as i64).contains(&j) {
                    m[(i, j as usize)] = w;
                }
            }
        }
        m
    }

    /// `out = L·x` using the band structure directly.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        debug_assert_eq!(out.len(), n);
        out.iter_mut().for_each(|o| *o = 0.0);
        for t in &self.taps {
            let w = self.gain_v * t.coefficient;
            let s = t.shift as i64;
            let lo = (-s).max(0) as usize;
            let hi = (n as i64 - s).clamp(0, n as i64) as usize;
            for i in lo..hi {
                out[i] += w * x[(i as i64 + s) as usize];
            }
        }
    }
}

/// `eval_L` under its operation name.
pub fn eval_l(lf: &LearningFunction, z: Complex64) -> Result<Complex64> {
    lf.eval(z)
}

pub fn toeplitz_of(lf: &LearningFunction, n: usize) -> DMatrix<f64> {
    lf.toeplitz(n)
}
