//! Grid sweeps over the `(A, B)` rectangle, cross-method agreement counts
//! and iso-contours of the numeric fields.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{IlcError, Result};
use crate::iterdomain::{iteration_verdict_with, SeedSpec, DEFAULT_ITERATIONS, DEFAULT_SEED};
use crate::learning::{LearningFunction, LearningKind};
use crate::lifted::{build_lifted, max_sv_sq, top_singular_pair, DEFAULT_TRIAL_LENGTH};
use crate::parallel::map_indexed;
use crate::plant::ABPoint;
use crate::zdomain::{ac_region_analytic, mc_region_analytic, sup_t, RegionBasis, DEFAULT_GRID, MARGINAL_BAND};

/// Default half-width, in grid cells, of the band around a verdict change
/// that is left out of disagreement counts.
pub const DEFAULT_EPS_BOUNDARY: f64 = 1.5;

/// Evenly spaced axis values `min..=max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridAxis {
    pub const fn new(min: f64, max: f64, steps: usize) -> Self {
        Self { min, max, steps }
    }

    /// Cell centres of `steps` equal cells spanning `(lo, hi)`; the edges
    /// themselves are never sampled.
    pub fn interior(lo: f64, hi: f64, steps: usize) -> Self {
        let h = (hi - lo) / steps as f64;
        Self::new(lo + 0.5 * h, hi - 0.5 * h, steps)
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.steps <= 1 {
            return self.min;
        }
        if i + 1 == self.steps {
            return self.max;
        }
        self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.value(i)).collect()
    }

    /// Grid spacing.
    pub fn step(&self) -> f64 {
        if self.steps <= 1 {
            0.0
        } else {
            (self.max - self.min) / (self.steps - 1) as f64
        }
    }
}

impl fmt::Display for GridAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.steps)
    }
}

impl FromStr for GridAxis {
    type Err = IlcError;

    /// `"min:max:steps"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || IlcError::InvalidConfig(format!("grid axis `{s}` must look like min:max:steps"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let min = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
        let max = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
        let steps = parts[2].trim().parse::<usize>().map_err(|_| bad())?;
        Ok(Self::new(min, max, steps))
    }
}

/// Parses `"amin:amax:steps,bmin:bmax:steps"`.
pub fn parse_grid(s: &str) -> Result<(GridAxis, GridAxis)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| IlcError::InvalidConfig(format!("grid `{s}` must be amin:amax:steps,bmin:bmax:steps")))?;
    Ok((a.parse()?, b.parse()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Zsup,
    Sigma,
    Rho,
    Iterate,
    Analytic,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Zsup, Method::Sigma, Method::Rho, Method::Iterate, Method::Analytic];

    pub fn token(&self) -> &'static str {
        match self {
            Method::Zsup => "zsup",
            Method::Sigma => "sigma",
            Method::Rho => "rho",
            Method::Iterate => "iterate",
            Method::Analytic => "analytic",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Method {
    type Err = IlcError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.token() == t)
            .ok_or_else(|| IlcError::InvalidConfig(format!("unknown method `{s}` (expected zsup, sigma, rho, iterate, analytic)")))
    }
}

/// A set of methods, always iterated in [`Method::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MethodSet(u8);

impl MethodSet {
    pub fn all() -> Self {
        Method::ALL.into_iter().collect()
    }

    pub fn empty() -> Self {
        Self(0)
    }

    fn bit(m: Method) -> u8 {
        1 << (m as u8)
    }

    pub fn contains(&self, m: Method) -> bool {
        self.0 & Self::bit(m) != 0
    }

    pub fn insert(&mut self, m: Method) {
        self.0 |= Self::bit(m);
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = Method> + '_ {
        Method::ALL.into_iter().filter(|m| self.contains(*m))
    }
}

impl FromIterator<Method> for MethodSet {
    fn from_iter<I: IntoIterator<Item = Method>>(iter: I) -> Self {
        let mut s = Self::empty();
        for m in iter {
            s.insert(m);
        }
        s
    }
}

impl fmt::Display for MethodSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.iter().map(|m| m.token()).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for MethodSet {
    type Err = IlcError;

    /// Comma-separated tokens, or `all`.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Self::all());
        }
        let set = s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect::<Result<MethodSet>>()?;
        if set.is_empty() {
            return Err(IlcError::InvalidConfig("method list is empty".into()));
        }
        Ok(set)
    }
}

/// Convergence verdict of one method at one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TriState {
    True,
    False,
    /// Within the marginal band of the threshold.
    Marginal,
    /// Not computed.
    #[default]
    Absent,
}

impl TriState {
    pub fn from_bool(b: bool) -> Self {
        if b {
            TriState::True
        } else {
            TriState::False
        }
    }

    /// `value < 1` with a marginal band around 1.
    pub fn below_one(value: f64, band: f64) -> Self {
        if (value - 1.0).abs() <= band {
            TriState::Marginal
        } else {
            Self::from_bool(value < 1.0)
        }
    }

    /// `1`, `0`, `m`, or empty.
    pub fn token(&self) -> &'static str {
        match self {
            TriState::True => "1",
            TriState::False => "0",
            TriState::Marginal => "m",
            TriState::Absent => "",
        }
    }

    pub fn from_token(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(TriState::True),
            "0" => Ok(TriState::False),
            "m" => Ok(TriState::Marginal),
            "" => Ok(TriState::Absent),
            other => Err(IlcError::InvalidConfig(format!("bad tri-state `{other}`"))),
        }
    }

    /// True or marginal: the value does not exceed 1 beyond the band.
    pub fn is_mc(&self) -> bool {
        matches!(self, TriState::True | TriState::Marginal)
    }

    /// `Some(b)` for a definite verdict.
    pub fn definite(&self) -> Option<bool> {
        match self {
            TriState::True => Some(true),
            TriState::False => Some(false),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PointFlags {
    /// `ρ < 1` yet the iterates have not shrunk within the budget.
    pub slow_converging: bool,
    pub necessary_only: bool,
    pub empirical_fit: bool,
    /// Methods whose evaluation failed at this point.
    pub failed: Vec<Method>,
}

impl PointFlags {
    pub fn is_empty(&self) -> bool {
        !self.slow_converging && !self.necessary_only && !self.empirical_fit && self.failed.is_empty()
    }
}

impl fmt::Display for PointFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if self.slow_converging {
            parts.push("slow-converging".into());
        }
        if self.necessary_only {
            parts.push("necessary-only".into());
        }
        if self.empirical_fit {
            parts.push("empirical-fit".into());
        }
        for m in &self.failed {
            parts.push(format!("failed-{m}"));
        }
        f.write_str(&parts.join(";"))
    }
}

impl FromStr for PointFlags {
    type Err = IlcError;

    fn from_str(s: &str) -> Result<Self> {
        let mut flags = PointFlags::default();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "slow-converging" => flags.slow_converging = true,
                "necessary-only" => flags.necessary_only = true,
                "empirical-fit" => flags.empirical_fit = true,
                other => match other.strip_prefix("failed-") {
                    Some(m) => flags.failed.push(m.parse()?),
                    None => return Err(IlcError::InvalidConfig(format!("unknown flag `{other}`"))),
                },
            }
        }
        Ok(flags)
    }
}

/// Everything computed at one grid point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointReport {
    pub point: ABPoint,
    /// Grid indices along A and B.
    pub index: (usize, usize),
    pub sup_t: Option<f64>,
    pub sigma_sq: Option<f64>,
    pub rho: Option<f64>,
    pub mc_z: TriState,
    pub mc_sigma: TriState,
    pub ac_rho: TriState,
    pub mc_iter: TriState,
    pub ac_iter: TriState,
    pub mc_analytic: TriState,
    pub ac_analytic: TriState,
    /// Some iteration trace grew before or after its monotone phase.
    pub transient: Option<bool>,
    /// Largest final `log10` norm ratio over the seed ensemble.
    pub worst_log_ratio: Option<f64>,
    pub flags: PointFlags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub a_axis: GridAxis,
    pub b_axis: GridAxis,
    /// Taps and gain `v`.
    pub learning: LearningFunction,
    /// Trial length.
    pub n: usize,
    pub j_max: usize,
    pub methods: MethodSet,
    pub seed: u64,
    /// Pseudo-random vectors in the iteration seed ensemble.
    pub random_seeds: usize,
    /// Parallel workers; 1 runs on the calling thread.
    pub workers: usize,
    /// Half-width of the marginal band around 1 for numeric tests.
    pub eps_band: f64,
    /// Boundary exclusion for agreement counts, in grid cells.
    pub eps_boundary: f64,
    /// Samples of the uniform scan in `sup_t`.
    pub sup_grid: usize,
}

impl SweepConfig {
    /// 21×21 interior grid, every method, library defaults elsewhere.
    pub fn new(learning: LearningFunction) -> Self {
        Self {
            a_axis: GridAxis::interior(0.0, 1.0, 21),
            b_axis: GridAxis::interior(-1.0, 1.0, 21),
            learning,
            n: DEFAULT_TRIAL_LENGTH,
            j_max: DEFAULT_ITERATIONS,
            methods: MethodSet::all(),
            seed: DEFAULT_SEED,
            random_seeds: 4,
            workers: 1,
            eps_band: MARGINAL_BAND,
            eps_boundary: DEFAULT_EPS_BOUNDARY,
            sup_grid: DEFAULT_GRID,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(IlcError::InvalidConfig(m));
        for (name, ax, lo, hi) in [("A", &self.a_axis, 0.0, 1.0), ("B", &self.b_axis, -1.0, 1.0)] {
            if ax.steps < 2 {
                return bad(format!("{name} axis needs at least 2 steps"));
            }
            if !(ax.min.is_finite() && ax.max.is_finite()) || ax.min > ax.max {
                return bad(format!("{name} axis range {ax} is not ordered"));
            }
            if ax.min <= lo || ax.max >= hi {
                return bad(format!("{name} axis {ax} must lie strictly inside ({lo}, {hi})"));
            }
        }
        if self.methods.is_empty() {
            return bad("no methods requested".into());
        }
        if self.j_max == 0 {
            return bad("iteration budget must be at least 1".into());
        }
        if !(self.eps_band >= 0.0) || !(self.eps_boundary >= 0.0) {
            return bad("bands must be non-negative".into());
        }
        let min_n = crate::lifted::min_trial_length(&self.learning);
        if self.n < min_n {
            return Err(IlcError::TrialTooShort { n: self.n, min: min_n });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.a_axis.steps * self.b_axis.steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major: B varies fastest.
    pub fn index_of(&self, k: usize) -> (usize, usize) {
        (k / self.b_axis.steps, k % self.b_axis.steps)
    }

    fn seed_spec(&self) -> SeedSpec {
        SeedSpec {
            random: self.random_seeds,
            seed: self.seed,
            ..SeedSpec::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub reports: Vec<PointReport>,
    /// Present when at least two methods produced verdicts.
    pub stats: Option<AgreementStats>,
}

/// Evaluates every requested method at every grid point. Reports come back
/// row-major in `(A, B)` whatever the worker count.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let reports = map_indexed(config.len(), config.workers, |k| {
        let (i, j) = config.index_of(k);
        let point = ABPoint::new(config.a_axis.value(i), config.b_axis.value(j));
        evaluate_point(config, point, (i, j))
    });
    let stats = match compare_methods(&reports, config.eps_boundary) {
        Ok(s) => Some(s),
        Err(IlcError::NotEnoughMethods) => None,
        Err(e) => return Err(e),
    };
    Ok(SweepResult { reports, stats })
}

/// All requested methods at one point; cheap ones first. Failures are
/// recorded in the flags and never abort.
pub fn evaluate_point(config: &SweepConfig, point: ABPoint, index: (usize, usize)) -> PointReport {
    let methods = config.methods;
    let lf = &config.learning;
    let band = config.eps_band;
    let mut r = PointReport {
        point,
        index,
        ..PointReport::default()
    };

    if methods.contains(Method::Analytic) {
        analytic_verdicts(lf, &point, &mut r);
    }

    if methods.contains(Method::Zsup) {
        match sup_t(&point, lf, config.sup_grid) {
            Ok(t) if t.sup_abs.is_finite() => {
                r.sup_t = Some(t.sup_abs);
                r.mc_z = TriState::below_one(t.sup_abs, band);
            }
            _ => r.flags.failed.push(Method::Zsup),
        }
    }

    let wants_matrix = methods.contains(Method::Sigma) || methods.contains(Method::Rho) || methods.contains(Method::Iterate);
    if !wants_matrix {
        return r;
    }
    let ops = match build_lifted(&point, lf, config.n) {
        Ok(o) => o,
        Err(_) => {
            for m in [Method::Sigma, Method::Rho, Method::Iterate] {
                if methods.contains(m) {
                    r.flags.failed.push(m);
                }
            }
            return r;
        }
    };

    // The top singular pair serves both σ² and the worst-case iteration seed.
    let mut singular = None;
    if methods.contains(Method::Iterate) {
        match top_singular_pair(&ops.m) {
            Ok((s2, v)) => {
                singular = Some(v);
                if methods.contains(Method::Sigma) {
                    set_sigma(&mut r, s2, band);
                }
            }
            Err(_) => {
                r.flags.failed.push(Method::Iterate);
                if methods.contains(Method::Sigma) {
                    r.flags.failed.push(Method::Sigma);
                }
            }
        }
    } else if methods.contains(Method::Sigma) {
        match max_sv_sq(&ops.m) {
            Ok(s2) => set_sigma(&mut r, s2, band),
            Err(_) => r.flags.failed.push(Method::Sigma),
        }
    }

    if methods.contains(Method::Rho) {
        match ops.spectral_radius() {
            Ok((rho, _)) if rho.is_finite() => {
                r.rho = Some(rho);
                r.ac_rho = TriState::below_one(rho, band);
            }
            _ => r.flags.failed.push(Method::Rho),
        }
    }

    if let Some(v) = singular {
        match iteration_verdict_with(&ops, config.j_max, &config.seed_spec(), Some(&v)) {
            Ok(iv) => {
                let worst = iv.worst().ac_log_ratio;
                r.mc_iter = TriState::from_bool(iv.mc);
                r.ac_iter = if worst.abs() <= band {
                    TriState::Marginal
                } else {
                    TriState::from_bool(iv.ac)
                };
                r.transient = Some(iv.has_transient());
                r.worst_log_ratio = Some(worst);
                if r.ac_rho == TriState::True && worst >= 0.0 {
                    r.flags.slow_converging = true;
                }
            }
            Err(_) => r.flags.failed.push(Method::Iterate),
        }
    }
    r
}

fn set_sigma(r: &mut PointReport, s2: f64, band: f64) {
    if s2.is_finite() {
        r.sigma_sq = Some(s2);
        r.mc_sigma = TriState::below_one(s2, band);
    } else {
        r.flags.failed.push(Method::Sigma);
    }
}

fn analytic_verdicts(lf: &LearningFunction, point: &ABPoint, r: &mut PointReport) {
    let kind = lf.kind();
    if kind == LearningKind::Custom {
        return;
    }
    let v = lf.gain();
    let mut note = |basis: RegionBasis| match basis {
        RegionBasis::NecessaryOnly => r.flags.necessary_only = true,
        RegionBasis::EmpiricalFit => r.flags.empirical_fit = true,
        RegionBasis::Exact => {}
    };
    let mut out = [TriState::Absent; 2];
    for (slot, res) in out
        .iter_mut()
        .zip([mc_region_analytic(kind, point, v), ac_region_analytic(kind, point, v)])
    {
        if let Ok(verdict) = res {
            note(verdict.basis);
            *slot = if verdict.marginal {
                TriState::Marginal
            } else {
                TriState::from_bool(verdict.inside)
            };
        }
    }
    r.mc_analytic = out[0];
    r.ac_analytic = out[1];
}

/// The verdict columns of a report, in CSV order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VerdictField {
    McZ,
    McSigma,
    AcRho,
    McIter,
    AcIter,
    McAnalytic,
    AcAnalytic,
}

impl VerdictField {
    pub const ALL: [VerdictField; 7] = [
        VerdictField::McZ,
        VerdictField::McSigma,
        VerdictField::AcRho,
        VerdictField::McIter,
        VerdictField::AcIter,
        VerdictField::McAnalytic,
        VerdictField::AcAnalytic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            VerdictField::McZ => "mc_z",
            VerdictField::McSigma => "mc_sigma",
            VerdictField::AcRho => "ac_rho",
            VerdictField::McIter => "mc_iter",
            VerdictField::AcIter => "ac_iter",
            VerdictField::McAnalytic => "mc_analytic",
            VerdictField::AcAnalytic => "ac_analytic",
        }
    }

    pub fn is_mc(&self) -> bool {
        matches!(
            self,
            VerdictField::McZ | VerdictField::McSigma | VerdictField::McIter | VerdictField::McAnalytic
        )
    }

    pub fn get(&self, r: &PointReport) -> TriState {
        match self {
            VerdictField::McZ => r.mc_z,
            VerdictField::McSigma => r.mc_sigma,
            VerdictField::AcRho => r.ac_rho,
            VerdictField::McIter => r.mc_iter,
            VerdictField::AcIter => r.ac_iter,
            VerdictField::McAnalytic => r.mc_analytic,
            VerdictField::AcAnalytic => r.ac_analytic,
        }
    }
}

impl fmt::Display for VerdictField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Confusion counts for one pair of verdict fields. The five counts add
/// up to the number of grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairCounts {
    pub both_true: usize,
    pub both_false: usize,
    pub disagree: usize,
    /// Either verdict marginal or absent.
    pub either_marginal: usize,
    /// Left out: a verdict change of either field lies within the boundary
    /// exclusion radius, or the point is flagged slow-converging for an AC
    /// pair.
    pub near_boundary: usize,
}

impl PairCounts {
    pub fn total(&self) -> usize {
        self.both_true + self.both_false + self.disagree + self.either_marginal + self.near_boundary
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairStats {
    pub left: VerdictField,
    pub right: VerdictField,
    pub counts: PairCounts,
    /// Grid points of the counted disagreements.
    pub disagreements: Vec<ABPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementStats {
    /// MC fields against MC fields and AC against AC.
    pub pairs: Vec<PairStats>,
    /// Exclusion radius in grid cells.
    pub boundary_exclusion: f64,
    pub grid_size: usize,
    /// Points that pass an AC test but fail an MC test.
    pub ac_true_mc_false: usize,
    /// Of those, points whose iteration traces show a learning transient.
    pub ac_true_mc_false_transient: usize,
    /// Points that are MC-true by some test but AC-false by another.
    pub subset_violations: usize,
    pub slow_converging: usize,
}

impl AgreementStats {
    pub fn pair(&self, left: VerdictField, right: VerdictField) -> Option<&PairStats> {
        self.pairs
            .iter()
            .find(|p| (p.left == left && p.right == right) || (p.left == right && p.right == left))
    }
}

/// Grid shape of a set of reports, rejecting gaps and duplicates.
fn grid_shape(reports: &[PointReport]) -> Result<(usize, usize, HashMap<(usize, usize), usize>)> {
    if reports.is_empty() {
        return Err(IlcError::IncompleteGrid("no reports".into()));
    }
    let na = reports.iter().map(|r| r.index.0).max().unwrap_or(0) + 1;
    let nb = reports.iter().map(|r| r.index.1).max().unwrap_or(0) + 1;
    let mut at = HashMap::with_capacity(reports.len());
    for (k, r) in reports.iter().enumerate() {
        if at.insert(r.index, k).is_some() {
            return Err(IlcError::IncompleteGrid(format!("duplicate grid index {:?}", r.index)));
        }
    }
    if at.len() != na * nb {
        return Err(IlcError::IncompleteGrid(format!(
            "{} reports for a {na}x{nb} grid",
            at.len()
        )));
    }
    Ok((na, nb, at))
}

/// Pairwise agreement of the populated verdict fields.
///
/// A point counts towards `near_boundary` for a pair when either field
/// changes its definite verdict within `eps_boundary` grid cells of it:
/// disagreement there is discretization, not mathematics.
pub fn compare_methods(reports: &[PointReport], eps_boundary: f64) -> Result<AgreementStats> {
    let populated: Vec<VerdictField> = VerdictField::ALL
        .into_iter()
        .filter(|f| reports.iter().any(|r| f.get(r) != TriState::Absent))
        .collect();
    if populated.len() < 2 {
        return Err(IlcError::NotEnoughMethods);
    }
    let (na, nb, at) = grid_shape(reports)?;
    let reach = eps_boundary.floor() as i64;
    let offsets: Vec<(i64, i64)> = (-reach..=reach)
        .flat_map(|di| (-reach..=reach).map(move |dj| (di, dj)))
        .filter(|&(di, dj)| ((di * di + dj * dj) as f64).sqrt() <= eps_boundary && (di, dj) != (0, 0))
        .collect();
    let near_change = |f: VerdictField, r: &PointReport| -> bool {
        let own = f.get(r).definite();
        offsets.iter().any(|&(di, dj)| {
            let (i, j) = (r.index.0 as i64 + di, r.index.1 as i64 + dj);
            if i < 0 || j < 0 || i >= na as i64 || j >= nb as i64 {
                return false;
            }
            let other = f.get(&reports[at[&(i as usize, j as usize)]]).definite();
            other.is_some() && other != own
        })
    };

    let mut pairs = Vec::new();
    for (x, &left) in populated.iter().enumerate() {
        for &right in &populated[x + 1..] {
            if left.is_mc() != right.is_mc() {
                continue;
            }
            let mut counts = PairCounts::default();
            let mut disagreements = Vec::new();
            for r in reports {
                let (lv, rv) = (left.get(r).definite(), right.get(r).definite());
                let (Some(lv), Some(rv)) = (lv, rv) else {
                    counts.either_marginal += 1;
                    continue;
                };
                if (!left.is_mc() && r.flags.slow_converging) || near_change(left, r) || near_change(right, r) {
                    counts.near_boundary += 1;
                    continue;
                }
                match (lv, rv) {
                    (true, true) => counts.both_true += 1,
                    (false, false) => counts.both_false += 1,
                    _ => {
                        counts.disagree += 1;
                        disagreements.push(r.point);
                    }
                }
            }
            pairs.push(PairStats {
                left,
                right,
                counts,
                disagreements,
            });
        }
    }

    let mut ac_true_mc_false = 0;
    let mut with_transient = 0;
    let mut subset_violations = 0;
    for r in reports {
        let ac_true = [r.ac_rho, r.ac_iter].contains(&TriState::True)
            || (r.ac_rho == TriState::Absent && r.ac_iter == TriState::Absent && r.ac_analytic == TriState::True);
        let mc_false = [r.mc_sigma, r.mc_z, r.mc_iter].contains(&TriState::False);
        if ac_true && mc_false {
            ac_true_mc_false += 1;
            if r.transient == Some(true) {
                with_transient += 1;
            }
        }
        let mc_true = [r.mc_sigma, r.mc_z, r.mc_iter].contains(&TriState::True);
        let ac_false = [r.ac_rho, r.ac_iter].contains(&TriState::False) && !r.flags.slow_converging;
        if mc_true && ac_false {
            subset_violations += 1;
        }
    }

    Ok(AgreementStats {
        pairs,
        boundary_exclusion: eps_boundary,
        grid_size: reports.len(),
        ac_true_mc_false,
        ac_true_mc_false_transient: with_transient,
        subset_violations,
        slow_converging: reports.iter().filter(|r| r.flags.slow_converging).count(),
    })
}

/// A field that can be contoured at level 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContourField {
    SupT,
    SigmaSq,
    Rho,
    /// The `mc_iter` verdict as 0.5 (converged) or 1.5; the level-1 contour
    /// then runs midway between differing grid points.
    IterVerdict,
}

impl ContourField {
    pub fn for_method(m: Method) -> Option<Self> {
        match m {
            Method::Zsup => Some(ContourField::SupT),
            Method::Sigma => Some(ContourField::SigmaSq),
            Method::Rho => Some(ContourField::Rho),
            Method::Iterate => Some(ContourField::IterVerdict),
            Method::Analytic => None,
        }
    }

    pub fn value(&self, r: &PointReport) -> Option<f64> {
        match self {
            ContourField::SupT => r.sup_t,
            ContourField::SigmaSq => r.sigma_sq,
            ContourField::Rho => r.rho,
            ContourField::IterVerdict => match r.mc_iter {
                TriState::True => Some(0.5),
                TriState::False => Some(1.5),
                TriState::Marginal => Some(1.0),
                TriState::Absent => None,
            },
        }
    }
}

/// Ordered `(A, B)` vertices.
pub type Polyline = Vec<(f64, f64)>;

/// Level-1 iso-contours of `field` by marching squares with linear
/// interpolation along cell edges.
pub fn extract_boundary(reports: &[PointReport], field: ContourField) -> Result<Vec<Polyline>> {
    let (na, nb, _) = grid_shape(reports)?;
    let mut val = vec![vec![0.0; nb]; na];
    let mut coord = vec![vec![(0.0, 0.0); nb]; na];
    for r in reports {
        let v = field
            .value(r)
            .filter(|v| v.is_finite())
            .ok_or_else(|| IlcError::IncompleteGrid(format!("field missing at grid index {:?}", r.index)))?;
        val[r.index.0][r.index.1] = v;
        coord[r.index.0][r.index.1] = (r.point.a_gain, r.point.b_pole);
    }
    if na < 2 || nb < 2 {
        return Ok(Vec::new());
    }

    // Edge keys: (i, j, 0) joins (i,j)-(i+1,j); (i, j, 1) joins (i,j)-(i,j+1).
    type Edge = (usize, usize, u8);
    let above = |i: usize, j: usize| val[i][j] >= 1.0;
    let crossing = |e: Edge| -> (f64, f64) {
        let (i, j, d) = e;
        let (i2, j2) = if d == 0 { (i + 1, j) } else { (i, j + 1) };
        let (v0, v1) = (val[i][j], val[i2][j2]);
        let t = ((1.0 - v0) / (v1 - v0)).clamp(0.0, 1.0);
        let (p, q) = (coord[i][j], coord[i2][j2]);
        (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
    };

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for i in 0..na - 1 {
        for j in 0..nb - 1 {
            // Corners counter-clockwise from (i, j); edge k runs from corner k to k+1.
            let corners = [above(i, j), above(i + 1, j), above(i + 1, j + 1), above(i, j + 1)];
            let edges: [Edge; 4] = [(i, j, 0), (i + 1, j, 1), (i, j + 1, 0), (i, j, 1)];
            let cut: Vec<usize> = (0..4).filter(|&k| corners[k] != corners[(k + 1) % 4]).collect();
            match cut.len() {
                2 => segments.push((edges[cut[0]], edges[cut[1]])),
                4 => {
                    // Saddle: the centre value decides which corners connect.
                    let centre = 0.25 * (val[i][j] + val[i + 1][j] + val[i + 1][j + 1] + val[i][j + 1]);
                    if (centre >= 1.0) == corners[0] {
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    } else {
                        segments.push((edges[3], edges[0]));
                        segments.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }

    // Chain segments sharing an edge crossing into polylines.
    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, (e0, e1)) in segments.iter().enumerate() {
        by_edge.entry(*e0).or_default().push(k);
        by_edge.entry(*e1).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let next_from = |edge: Edge, used: &[bool]| -> Option<usize> {
        by_edge[&edge].iter().copied().find(|&s| !used[s])
    };
    let mut lines = Vec::new();
    // Open chains start at an edge with a single segment; closed loops after.
    let mut starts: Vec<usize> = (0..segments.len())
        .filter(|&k| by_edge[&segments[k].0].len() == 1 || by_edge[&segments[k].1].len() == 1)
        .collect();
    starts.extend(0..segments.len());
    for s in starts {
        if used[s] {
            continue;
        }
        let (e0, e1) = segments[s];
        let (head, mut tail) = if by_edge[&e1].len() == 1 && by_edge[&e0].len() != 1 {
            (e1, e0)
        } else {
            (e0, e1)
        };
        used[s] = true;
        let mut edges = vec![head, tail];
        while let Some(k) = next_from(tail, &used) {
            used[k] = true;
            let (a, b) = segments[k];
            let nxt = if a == tail { b } else { a };
            edges.push(nxt);
            tail = nxt;
            if tail == head {
                break;
            }
        }
        lines.push(edges.into_iter().map(crossing).collect());
    }
    Ok(lines)
}

/// One grid point of the printed-bounds audit.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub point: ABPoint,
    pub sup_t: f64,
    pub numeric_mc: TriState,
    pub printed_inside: bool,
    /// Inequalities of the printed region that fail here.
    pub printed_detail: String,
}

/// Printed necessary-only MC bounds against the `sup|T|` test.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsAudit {
    pub kind: LearningKind,
    pub v: f64,
    pub rows: Vec<AuditRow>,
    /// Numeric MC points where the printed conditions fail. A point counts
    /// as numeric MC when `sup|T| <= 1` within the marginal band, since the
    /// three-term kinds touch `|T| = 1` wherever `L` vanishes on the circle.
    pub necessary_violations: usize,
    /// Printed conditions hold but the numeric test says not MC.
    pub insufficient: usize,
    pub numeric_mc_true: usize,
    pub printed_true: usize,
}

impl BoundsAudit {
    /// The printed conditions are truly necessary on this grid.
    pub fn necessary_direction_holds(&self) -> bool {
        self.necessary_violations == 0
    }

    /// Human-readable summary; flags a discrepancy when the necessary
    /// direction fails.
    pub fn report(&self) -> String {
        let mut s = format!(
            "printed-bounds audit: {} v={} on {} points\n  numeric MC-true: {}\n  printed conditions true: {}\n  numeric MC-true but printed false: {}\n  printed true but numeric MC-false: {}\n",
            self.kind.token(),
            self.v,
            self.rows.len(),
            self.numeric_mc_true,
            self.printed_true,
            self.necessary_violations,
            self.insufficient
        );
        if self.necessary_direction_holds() {
            s.push_str("  necessary direction: holds\n");
        } else {
            s.push_str("  DISCREPANCY: the printed conditions exclude points that the sup|T| test finds MC\n");
            let mut failing: HashMap<&str, usize> = HashMap::new();
            for r in self.rows.iter().filter(|r| r.numeric_mc.is_mc() && !r.printed_inside) {
                *failing.entry(r.printed_detail.as_str()).or_default() += 1;
            }
            let mut failing: Vec<_> = failing.into_iter().collect();
            failing.sort();
            for (detail, count) in failing {
                s.push_str(&format!("    {count} points: {detail}\n"));
            }
        }
        s
    }
}

/// Compares the printed MC inequalities of a necessary-only kind with the
/// numeric `sup|T|` verdict on a grid.
pub fn audit_printed_bounds(
    kind: LearningKind,
    v: f64,
    a_axis: GridAxis,
    b_axis: GridAxis,
    sup_grid: usize,
    workers: usize,
) -> Result<BoundsAudit> {
    let lf = kind.with_gain(v)?;
    let nb = b_axis.steps;
    let rows = map_indexed(a_axis.steps * nb, workers, |k| -> Result<AuditRow> {
        let point = ABPoint::new(a_axis.value(k / nb), b_axis.value(k % nb));
        let t = sup_t(&point, &lf, sup_grid)?;
        let printed = mc_region_analytic(kind, &point, v)?;
        Ok(AuditRow {
            point,
            sup_t: t.sup_abs,
            numeric_mc: TriState::below_one(t.sup_abs, MARGINAL_BAND),
            printed_inside: printed.inside,
            printed_detail: printed.detail,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let necessary_violations = rows
        .iter()
        .filter(|r| r.numeric_mc.is_mc() && !r.printed_inside)
        .count();
    let insufficient = rows
        .iter()
        .filter(|r| r.numeric_mc == TriState::False && r.printed_inside)
        .count();
    Ok(BoundsAudit {
        kind,
        v,
        numeric_mc_true: rows.iter().filter(|r| r.numeric_mc.is_mc()).count(),
        printed_true: rows.iter().filter(|r| r.printed_inside).count(),
        rows,
        necessary_violations,
        insufficient,
    })
}
