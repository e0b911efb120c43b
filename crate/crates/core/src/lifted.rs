//! Finite-trial lifted operators.
//!
//! A trial of `n` samples is one vector; the plant (with the one-step lift
//! that compensates the hold) becomes the lower-triangular Toeplitz matrix
//! with first column `[A, AB, AB², …]`, the learning function becomes a
//! banded Toeplitz matrix, and learning is the matrix iteration
//! `x_{j+1} = M·x_j` with `M = I − P_lift·L`.
//!
//! Asymptotic convergence is `ρ(M) < 1`; monotonic convergence of the
//! 2-norm is `σ_max(M) < 1`, reported as the largest eigenvalue of `MᵀM`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{IlcError, Result};
use crate::learning::LearningFunction;
use crate::plant::ABPoint;

/// Default trial length for region maps.
pub const DEFAULT_TRIAL_LENGTH: usize = 128;

/// The lifted plant, learning matrix and iteration matrix for one
/// `(A, B, L)` triple.
#[derive(Debug, Clone)]
pub struct LiftedOperators {
    pub n: usize,
    pub point: ABPoint,
    pub learning: LearningFunction,
    pub p_lift: DMatrix<f64>,
    pub l_mat: DMatrix<f64>,
    pub m: DMatrix<f64>,
}

/// Smallest trial length [`build_lifted`] accepts for `lf`.
pub fn min_trial_length(lf: &LearningFunction) -> usize {
    match lf.max_abs_shift() {
        0 => 1,
        s => 2 * s + 2,
    }
}

pub fn build_lifted(point: &ABPoint, lf: &LearningFunction, n: usize) -> Result<LiftedOperators> {
    let min = min_trial_length(lf);
    if n < min {
        return Err(IlcError::TrialTooShort { n, min });
    }
    if !point.a_gain.is_finite() || !point.b_pole.is_finite() {
        return Err(IlcError::NonFinite);
    }
    let mut impulse = Vec::with_capacity(n);
    let mut h = point.a_gain;
    for _ in 0..n {
        impulse.push(h);
        h *= point.b_pole;
    }
    let p_lift = DMatrix::from_fn(n, n, |i, j| if i >= j { impulse[i - j] } else { 0.0 });
    let l_mat = lf.toeplitz(n);
    let m = DMatrix::identity(n, n) - &p_lift * &l_mat;
    Ok(LiftedOperators {
        n,
        point: *point,
        learning: lf.clone(),
        p_lift,
        l_mat,
        m,
    })
}

/// Which numerical route produced a spectral radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadiusMethod {
    /// Triangular matrix: the eigenvalues are the diagonal.
    Triangular,
    /// Eigenvalue count outside a circle from the banded determinant,
    /// bisected on the radius.
    BandedArgument,
    /// Dense real Schur decomposition.
    DenseSchur,
}

impl fmt::Display for RadiusMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RadiusMethod::Triangular => "triangular-diagonal",
            RadiusMethod::BandedArgument => "banded-argument-principle",
            RadiusMethod::DenseSchur => "dense-schur",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub rho: f64,
    pub sigma_sq_max: f64,
    pub rho_method: RadiusMethod,
    pub method_note: String,
}

impl LiftedOperators {
    /// `out = M·x` in O(n·taps), using the first-order recursion of the plant
    /// instead of the dense matrix.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (a, b) = (self.point.a_gain, self.point.b_pole);
        self.learning.apply(x, out);
        let mut state = 0.0;
        for (o, &xi) in out.iter_mut().zip(x) {
            state = b * state + a * *o;
            *o = xi - state;
        }
    }

    /// Eigenvalues of a causal `M` are its (constant) diagonal `1 − A·v·c_0`.
    pub fn is_triangular(&self) -> bool {
        self.learning.is_causal() || self.point.a_gain == 0.0 || self.learning.gain() == 0.0
    }

    /// Spectral radius of `M`.
    ///
    /// `M` is far from normal for look-ahead learning, and dense eigensolvers
    /// lose several digits on it once `n` exceeds a few dozen. Instead this
    /// uses `det(M − λI) = det((1 − λ)(I − B·S) − A·L)`, a banded matrix, and
    /// counts eigenvalues outside `|λ| = R` with the argument principle; the
    /// radius is then bisected.
    pub fn spectral_radius(&self) -> Result<(f64, RadiusMethod)> {
        if self.is_triangular() {
            let d = 1.0 - self.point.a_gain * self.learning.weight(0);
            return Ok((d.abs(), RadiusMethod::Triangular));
        }
        let counter = self.eigen_counter();
        let n = self.n as f64;
        let mut lo = (self.m.trace() / n).abs();
        let mut hi = (self.m.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max))
            .min(self.m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max));
        hi = hi.max(lo) * (1.0 + 1e-9) + 1e-300;
        while counter.outside(hi) > 0 {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(IlcError::NoConvergence);
            }
        }
        if counter.outside(lo) == 0 {
            return Ok((lo, RadiusMethod::BandedArgument));
        }
        while hi - lo > 1e-11 * hi.max(1e-3) {
            let mid = 0.5 * (lo + hi);
            if counter.outside(mid) > 0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi), RadiusMethod::BandedArgument))
    }

    /// Number of eigenvalues of `M` with modulus greater than `radius`.
    pub fn eigenvalues_outside(&self, radius: f64) -> usize {
        if self.is_triangular() {
            let d = (1.0 - self.point.a_gain * self.learning.weight(0)).abs();
            return if d > radius { self.n } else { 0 };
        }
        self.eigen_counter().outside(radius)
    }

    fn eigen_counter(&self) -> EigenCounter<'_> {
        EigenCounter { ops: self }
    }

    /// `ρ(M)` and `σ²_max(M)` together.
    pub fn spectral_summary(&self) -> Result<SpectralSummary> {
        let (rho, rho_method) = self.spectral_radius()?;
        let sigma_sq_max = max_sv_sq(&self.m)?;
        Ok(SpectralSummary {
            rho,
            sigma_sq_max,
            rho_method,
            method_note: format!("rho: {rho_method}; sigma^2: symmetric eigensolve of M^T M (n = {})", self.n),
        })
    }
}

/// Argument-principle eigenvalue counter for the structured `M`.
struct EigenCounter<'a> {
    ops: &'a LiftedOperators,
}

/// `φ(θ) = arg det(M − λI) − n·arg(−λ)` on `λ = R·e^{iθ}`, and `dφ/dθ`.
#[derive(Clone, Copy)]
struct Sample {
    phase: f64,
    rate: f64,
}

impl EigenCounter<'_> {
    const INITIAL_SAMPLES: usize = 64;
    const MAX_DEPTH: u32 = 48;

    fn sample(&self, radius: f64, theta: f64) -> Sample {
        let mut th = theta;
        loop {
            let l = Complex64::from_polar(radius, th);
            if let Some((arg_det, dlog)) = self.det_arg(l) {
                return Sample {
                    phase: arg_det - self.ops.n as f64 * (-l).arg(),
                    rate: (l * dlog).re - self.ops.n as f64,
                };
            }
            // Sitting exactly on an eigenvalue: nudge along the circle.
            th += 1e-13;
        }
    }

    /// Eigenvalues outside `|λ| = radius`: minus the winding of `φ`.
    fn outside(&self, radius: f64) -> usize {
        let radius = radius.max(f64::MIN_POSITIVE);
        let n0 = Self::INITIAL_SAMPLES;
        let step = 2.0 * PI / n0 as f64;
        let mut total = 0.0;
        let first = self.sample(radius, 0.0);
        let mut prev = first;
        for k in 1..=n0 {
            let th = k as f64 * step;
            let cur = if k == n0 { first } else { self.sample(radius, th) };
            total += self.wind(radius, th - step, prev, th, cur, 0);
            prev = cur;
        }
        let winding = (total / (2.0 * PI)).round();
        (-winding).max(0.0) as usize
    }

    /// Increment of `φ` over `[a, b]`. A step is accepted when the rate is
    /// nearly constant across it and the sampled phase agrees with the
    /// trapezoid prediction; the prediction also fixes the multiple of 2π.
    fn wind(&self, radius: f64, a: f64, sa: Sample, b: f64, sb: Sample, depth: u32) -> f64 {
        let mid = 0.5 * (a + b);
        let sm = self.sample(radius, mid);
        let h = 0.5 * (b - a);
        let left = step_increment(h, sa, sm);
        let right = step_increment(h, sm, sb);
        match (left, right) {
            (Some(l), Some(r)) => l + r,
            _ if depth >= Self::MAX_DEPTH => {
                let fallback = |s0: Sample, s1: Sample| {
                    let pred = 0.5 * h * (s0.rate + s1.rate);
                    let w = wrap(s1.phase - s0.phase);
                    w + 2.0 * PI * ((pred - w) / (2.0 * PI)).round()
                };
                fallback(sa, sm) + fallback(sm, sb)
            }
            _ => self.wind(radius, a, sa, mid, sm, depth + 1) + self.wind(radius, mid, sm, b, sb, depth + 1),
        }
    }

    /// Phase of `det((1 − λ)(I − B·S) − A·L)` and `d/dλ log det` by banded
    /// LU with partial pivoting on dual numbers, or `None` on an exactly
    /// singular pivot.
    ///
    /// The pencil is banded Toeplitz with symbol `k(z) = Σ k_s z^s`. The
    /// similarity `diag(r^{-i})` leaves the determinant unchanged and turns
    /// the symbol into `k(r·e^{iφ})`; picking `r` so that this curve has
    /// winding number zero keeps the finite sections well conditioned even
    /// when `M` itself is extremely non-normal.
    fn det_arg(&self, lambda: Complex64) -> Option<(f64, Complex64)> {
        let ops = self.ops;
        let lf = &ops.learning;
        let (a, b) = (ops.point.a_gain, ops.point.b_pole);
        let one_minus = 1.0 - lambda;
        let kl = lf.lookback().max(1);
        let ku = lf.lookahead();
        let mut symbol = Vec::with_capacity(kl + ku + 1);
        let mut dsymbol = Vec::with_capacity(kl + ku + 1);
        for s in -(kl as i64)..=(ku as i64) {
            let mut e = Complex64::from(-a * lf.weight(s as i32));
            let mut de = Complex64::from(0.0);
            if s == 0 {
                e += one_minus;
                de = Complex64::from(-1.0);
            } else if s == -1 {
                e -= one_minus * b;
                de = Complex64::from(b);
            }
            symbol.push(e);
            dsymbol.push(de);
        }
        let r = balancing_radius(&symbol, kl);
        let mut band = Band::new(ops.n, kl, ku);
        for (k, (e, de)) in symbol.iter().zip(&dsymbol).enumerate() {
            let scale = r.powi(k as i32 - kl as i32);
            let (e, de) = (e * scale, de * scale);
            for i in 0..ops.n {
                let j = i as i64 + k as i64 - kl as i64;
                if j < 0 || j >= ops.n as i64 {
                    continue;
                }
                band.set(i, j as usize, Dual { v: e, d: de });
            }
        }
        band.log_det()
    }
}

/// Accepted increment of `φ` over a step of length `h`, or `None` when the
/// step must be refined.
fn step_increment(h: f64, s0: Sample, s1: Sample) -> Option<f64> {
    if (s1.rate - s0.rate).abs() * h > PI / 4.0 {
        return None;
    }
    let pred = 0.5 * h * (s0.rate + s1.rate);
    let sampled = wrap(s1.phase - s0.phase);
    if wrap(sampled - pred).abs() > PI / 16.0 {
        return None;
    }
    Some(sampled + 2.0 * PI * ((pred - sampled) / (2.0 * PI)).round())
}

/// Radius `r` with exactly `kl` roots of `z^{kl}·k(z)` inside `|z| < r`,
/// placed geometrically between the `kl`-th and next root modulus.
fn balancing_radius(coeffs: &[Complex64], kl: usize) -> f64 {
    let at_zero = coeffs.iter().take_while(|c| c.norm() == 0.0).count();
    if at_zero == coeffs.len() {
        return 1.0;
    }
    let at_inf = coeffs.iter().rev().take_while(|c| c.norm() == 0.0).count();
    let poly = &coeffs[at_zero..coeffs.len() - at_inf];
    let mut moduli = vec![0.0; at_zero];
    moduli.extend(poly_root_moduli(poly));
    moduli.sort_by(f64::total_cmp);
    moduli.extend(std::iter::repeat_n(f64::INFINITY, at_inf));
    let lo = moduli[kl - 1];
    let hi = moduli[kl];
    match (lo == 0.0, hi.is_infinite()) {
        (true, true) => 1.0,
        (true, false) => (0.5 * hi).min(1.0),
        (false, true) => (2.0 * lo).max(1.0),
        (false, false) => (lo * hi).sqrt(),
    }
}

/// Moduli of the roots of `Σ c_m z^m` (ascending coefficients, nonzero ends).
fn poly_root_moduli(c: &[Complex64]) -> Vec<f64> {
    let d = c.len() - 1;
    match d {
        0 => Vec::new(),
        1 => vec![(c[0] / c[1]).norm()],
        2 => {
            let disc = (c[1] * c[1] - 4.0 * c[2] * c[0]).sqrt();
            let q1 = -c[1] + disc;
            let q2 = -c[1] - disc;
            // Larger-magnitude form first, the other from the product of roots.
            let q = if q1.norm() >= q2.norm() { q1 } else { q2 };
            let r1 = q / (2.0 * c[2]);
            let r2 = c[0] / (c[2] * r1);
            vec![r1.norm(), r2.norm()]
        }
        _ => {
            let lead = c[d];
            let mut comp = DMatrix::<Complex64>::zeros(d, d);
            for i in 1..d {
                comp[(i, i - 1)] = Complex64::from(1.0);
            }
            for i in 0..d {
                comp[(i, d - 1)] = -c[i] / lead;
            }
            match comp.eigenvalues() {
                Some(ev) => ev.iter().map(|z| z.norm()).collect(),
                None => vec![1.0; d],
            }
        }
    }
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// A value with its derivative along one parameter.
#[derive(Clone, Copy, Default)]
struct Dual {
    v: Complex64,
    d: Complex64,
}

/// Row-major band storage sized for partial-pivoting fill-in: row `i` holds
/// columns `i − kl ..= i + kl + ku`.
struct Band {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Dual>,
}

impl Band {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![Dual::default(); n * width],
        }
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> Dual {
        self.data[self.offset(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: Dual) {
        let o = self.offset(i, j);
        self.data[o] = v;
    }

    /// `(arg det, d log det)` by LU with partial pivoting; pivoting follows
    /// the values only, which is harmless since `det` is analytic.
    fn log_det(mut self) -> Option<(f64, Complex64)> {
        let n = self.n;
        let mut arg = 0.0;
        let mut dlog = Complex64::from(0.0);
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + self.kl + self.ku).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).v.norm();
            for r in k + 1..=last_row {
                let v = self.get(r, k).v.norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 {
                return None;
            }
            if p != k {
                for c in k..=last_col {
                    let t = self.get(k, c);
                    let u = self.get(p, c);
                    self.set(k, c, u);
                    self.set(p, c, t);
                }
                arg += PI;
            }
            let pivot = self.get(k, k);
            arg += pivot.v.arg();
            dlog += pivot.d / pivot.v;
            for r in k + 1..=last_row {
                let x = self.get(r, k);
                if x.v.norm() == 0.0 && x.d.norm() == 0.0 {
                    continue;
                }
                let f = x.v / pivot.v;
                let df = (x.d - f * pivot.d) / pivot.v;
                for c in k + 1..=last_col {
                    let u = self.get(k, c);
                    let y = self.get(r, c);
                    self.set(
                        r,
                        c,
                        Dual {
                            v: y.v - f * u.v,
                            d: y.d - df * u.v - f * u.d,
                        },
                    );
                }
            }
        }
        Some((arg, dlog))
    }
}

fn check_square_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(IlcError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(IlcError::NonFinite);
    }
    Ok(())
}

fn is_lower_triangular(m: &DMatrix<f64>) -> bool {
    (0..m.nrows()).all(|i| (i + 1..m.ncols()).all(|j| m[(i, j)] == 0.0))
}

fn is_upper_triangular(m: &DMatrix<f64>) -> bool {
    (0..m.nrows()).all(|i| (0..i).all(|j| m[(i, j)] == 0.0))
}

/// Spectral radius of a general square matrix from a dense real Schur
/// decomposition; triangular input short-circuits to `max |diag|`.
///
/// Reliable for matrices whose eigenvalues are well conditioned. For the
/// lifted iteration matrix use [`LiftedOperators::spectral_radius`].
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    check_square_finite(m)?;
    if is_lower_triangular(m) || is_upper_triangular(m) {
        return Ok(m.diagonal().iter().fold(0.0, |acc, d| acc.max(d.abs())));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100 * m.nrows().max(10))
        .ok_or(IlcError::NoConvergence)?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .fold(0.0, |acc, l| acc.max(l.norm())))
}

/// Largest eigenvalue of `mᵀm`, i.e. `σ_max(m)²`.
pub fn max_sv_sq(m: &DMatrix<f64>) -> Result<f64> {
    check_square_finite(m)?;
    let gram = m.transpose() * m;
    Ok(gram.symmetric_eigenvalues().max().max(0.0))
}

/// `σ_max(m)²` together with the corresponding right singular vector.
pub fn top_singular_pair(m: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    check_square_finite(m)?;
    let gram = m.transpose() * m;
    let eig = gram.symmetric_eigen();
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    Ok((val.max(0.0), eig.eigenvectors.column(idx).into_owned()))
}

/// Gelfand estimate `‖m^{2^k}‖^{1/2^k}` by repeated squaring, with the
/// scale carried in log space so the powers never overflow. Independent
/// check on [`spectral_radius`]; converges slowly for non-normal input.
pub fn gelfand_radius(m: &DMatrix<f64>, k_max: u32) -> Result<f64> {
    check_square_finite(m)?;
    if k_max < 4 {
        return Err(IlcError::InvalidParameter {
            name: "k_max",
            value: k_max as f64,
            reason: "must be >= 4",
        });
    }
    let norm = m.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let mut x = m / norm;
    let mut log_scale = norm.ln();
    for _ in 0..k_max {
        let sq = &x * &x;
        let s = sq.norm();
        if s == 0.0 {
            return Ok(0.0);
        }
        log_scale = 2.0 * log_scale + s.ln();
        x = sq / s;
    }
    // Frobenius normalization above; the final 2-norm removes its sqrt(n) bias.
    let two_norm = max_sv_sq(&x)?.sqrt();
    if two_norm == 0.0 {
        return Ok(0.0);
    }
    Ok(((log_scale + two_norm.ln()) / 2f64.powi(k_max as i32)).exp())
}
