//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Run a subset with `cargo test -p ilc-cli --test acceptance -- 4 5`.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use ilc_cli::{commands, Cli};
use ilc_core::iterdomain::{iteration_verdict, SeedSpec, DEFAULT_ITERATIONS};
use ilc_core::lifted::{build_lifted, max_sv_sq, min_trial_length, DEFAULT_TRIAL_LENGTH};
use ilc_core::plant::{ab_from_plant, no_ilc_gain_limits, simulate_trial};
use ilc_core::sweep::{run_sweep, GridAxis, MethodSet, PointReport, SweepConfig, TriState};
use ilc_core::zdomain::{mc_region_analytic, region_curves, sup_t, CurveFamily, DEFAULT_GRID, MARGINAL_BAND};
use ilc_core::{ABPoint, LearningFunction, LearningKind, PlantParams};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that fail for reasons recorded in the decisions ledger. Their
/// `[FAIL]` lines are printed as usual but do not fail the test run; if one
/// starts passing the run fails so that the list gets updated.
const KNOWN_BLOCKED: &[usize] = &[4, 8];

const REGION_STEPS: usize = 21;
const REGION_N: usize = 256;
const EXCLUSION_CELLS: f64 = 1.5;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Region sweeps shared between criteria.
#[derive(Default)]
struct Ctx {
    sweeps: HashMap<(LearningKind, u64), Vec<PointReport>>,
}

impl Ctx {
    /// 21×21 interior grid, n = 256, 800 iterations, every MC method.
    fn region_sweep(&mut self, kind: LearningKind, v: f64) -> &[PointReport] {
        self.sweeps.entry((kind, v.to_bits())).or_insert_with(|| {
            let mut c = SweepConfig::new(kind.with_gain(v).unwrap());
            c.a_axis = GridAxis::interior(0.0, 1.0, REGION_STEPS);
            c.b_axis = GridAxis::interior(-1.0, 1.0, REGION_STEPS);
            c.n = REGION_N;
            c.j_max = DEFAULT_ITERATIONS;
            c.methods = "zsup,sigma,iterate,analytic".parse::<MethodSet>().unwrap();
            c.workers = 1;
            run_sweep(&c).unwrap().reports
        })
    }
}

fn lf(kind: LearningKind, v: f64) -> LearningFunction {
    kind.with_gain(v).unwrap()
}

/// `M = I − P·L` assembled entry by entry: `P[i][j] = A·B^(i−j)` below the
/// diagonal, `L[i][j] = v·c_(j−i)`.
fn assemble_m(p: ABPoint, l: &LearningFunction, n: usize) -> DMatrix<f64> {
    let plant = DMatrix::from_fn(n, n, |i, j| {
        if i >= j {
            p.a_gain * p.b_pole.powi((i - j) as i32)
        } else {
            0.0
        }
    });
    let learn = DMatrix::from_fn(n, n, |i, j| {
        let s = j as i64 - i as i64;
        l.taps()
            .iter()
            .filter(|t| t.shift as i64 == s)
            .map(|t| l.gain() * t.coefficient)
            .sum()
    });
    DMatrix::identity(n, n) - plant * learn
}

fn c1_causal_eigenvalues(_: &mut Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_diag = 0.0f64;
    let mut worst_lib = 0.0f64;
    let mut problems = Vec::new();
    let mut cases = 0;
    for kind in [LearningKind::L1, LearningKind::L2Back, LearningKind::L3Back] {
        for n in [4, 32, 128] {
            for _ in 0..20 {
                let p = ABPoint::new(rng.gen_range(0.01..0.99), rng.gen_range(-0.99..0.99));
                let v = rng.gen_range(0.1..3.0);
                let l = lf(kind, v);
                let m = assemble_m(p, &l, n);
                let expected = 1.0 - v * p.a_gain;
                // Triangular, so the eigenvalues are the diagonal entries.
                let above = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .fold(0.0f64, |acc, (i, j)| acc.max(m[(i, j)].abs()));
                if above != 0.0 {
                    problems.push(format!("{} n={n}: not lower triangular", kind.token()));
                }
                let diag = (0..n).fold(0.0f64, |acc, i| acc.max((m[(i, i)] - expected).abs()));
                worst_diag = worst_diag.max(diag);
                if n >= min_trial_length(&l) {
                    let ops = build_lifted(&p, &l, n).unwrap();
                    let diff = (&ops.m - &m).abs().max();
                    let (rho, _) = ops.spectral_radius().unwrap();
                    worst_lib = worst_lib.max(diff).max((rho - expected.abs()).abs());
                }
                cases += 1;
            }
        }
    }
    let pass = problems.is_empty() && worst_diag <= 1e-12 && worst_lib <= 1e-12;
    let mut detail = format!(
        "{cases} cases; max |lambda - (1 - vA)| = {worst_diag:e}; library M and rho vs assembled: {worst_lib:e}"
    );
    if !problems.is_empty() {
        detail.push_str(&format!("; {}", problems.join(", ")));
    }
    Outcome::new(pass, detail)
}

/// Distance in grid cells from `p` to the closed-form MC boundary.
struct BoundaryDistance {
    samples: Vec<(f64, f64)>,
    vertical: Option<f64>,
    da: f64,
    db: f64,
}

impl BoundaryDistance {
    fn new(kind: LearningKind, v: f64) -> Self {
        let mut samples = Vec::new();
        for c in region_curves(kind, v).unwrap().iter().filter(|c| c.family == CurveFamily::Mc) {
            for i in 0..=20_000 {
                let a = i as f64 / 20_000.0;
                let b = c.b_at(a, v);
                if (-1.0..=1.0).contains(&b) {
                    samples.push((a, b));
                }
            }
        }
        // 0 < Av < 2.
        let vertical = Some(2.0 / v).filter(|&a| a <= 1.0);
        Self {
            samples,
            vertical,
            da: 1.0 / REGION_STEPS as f64,
            db: 2.0 / REGION_STEPS as f64,
        }
    }

    fn cells(&self, p: ABPoint) -> f64 {
        let curve = self
            .samples
            .iter()
            .map(|&(a, b)| ((p.a_gain - a) / self.da).hypot((p.b_pole - b) / self.db))
            .fold(f64::INFINITY, f64::min);
        let line = self.vertical.map_or(f64::INFINITY, |a| (p.a_gain - a).abs() / self.da);
        curve.min(line)
    }
}

/// Numeric MC verdicts; a norm within the marginal band of 1 counts as
/// non-expansive.
fn numeric_mc(r: &PointReport) -> [(&'static str, Option<bool>); 3] {
    [
        ("mc_z", r.sup_t.map(|s| s <= 1.0 + MARGINAL_BAND)),
        ("mc_sigma", r.sigma_sq.map(|s| s <= 1.0 + MARGINAL_BAND)),
        ("mc_iter", r.mc_iter.definite()),
    ]
}

/// Agreement of the numeric MC verdicts with the printed inequality away
/// from its boundary. Returns (points compared, disagreements).
fn region_agreement(reports: &[PointReport], kind: LearningKind, v: f64) -> (usize, Vec<String>) {
    let dist = BoundaryDistance::new(kind, v);
    let mut compared = 0;
    let mut bad = Vec::new();
    for r in reports {
        if dist.cells(r.point) <= EXCLUSION_CELLS {
            continue;
        }
        compared += 1;
        let printed = mc_region_analytic(kind, &r.point, v).unwrap().inside;
        for (name, verdict) in numeric_mc(r) {
            if verdict != Some(printed) {
                bad.push(format!(
                    "{name} at ({}, {}): {verdict:?} vs printed {printed}",
                    r.point.a_gain, r.point.b_pole
                ));
            }
        }
    }
    (compared, bad)
}

fn c2_l1_region(ctx: &mut Ctx) -> Outcome {
    let reports = ctx.region_sweep(LearningKind::L1, 1.0);
    let (compared, bad) = region_agreement(reports, LearningKind::L1, 1.0);
    Outcome::new(
        bad.is_empty() && compared > 0,
        format!(
            "{compared}/{} points beyond {EXCLUSION_CELLS} cells; mc_z, mc_sigma (n={REGION_N}), mc_iter vs inequality: {} disagreements{}",
            reports.len(),
            bad.len(),
            bad.first().map(|b| format!(" (first: {b})")).unwrap_or_default()
        ),
    )
}

fn mc_true_set(reports: &[PointReport], field: usize) -> Vec<(usize, usize)> {
    reports
        .iter()
        .filter(|r| numeric_mc(r)[field].1 == Some(true))
        .map(|r| r.index)
        .collect()
}

fn c3_l2back_region(ctx: &mut Ctx) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for v in [1.0, 2.0] {
        let reports = ctx.region_sweep(LearningKind::L2Back, v);
        let (compared, bad) = region_agreement(reports, LearningKind::L2Back, v);
        pass &= bad.is_empty() && compared > 0;
        parts.push(format!(
            "v={v}: {compared} points compared, {} disagreements{}",
            bad.len(),
            bad.first().map(|b| format!(" (first: {b})")).unwrap_or_default()
        ));
    }
    let one = ctx.region_sweep(LearningKind::L2Back, 1.0).to_vec();
    let two = ctx.region_sweep(LearningKind::L2Back, 2.0).to_vec();
    for (k, name) in ["mc_z", "mc_sigma", "mc_iter"].iter().enumerate() {
        let s1 = mc_true_set(&one, k);
        let s2 = mc_true_set(&two, k);
        let contained = s2.iter().all(|i| s1.contains(i));
        let strict = contained && s2.len() < s1.len();
        pass &= strict;
        parts.push(format!("{name} MC points v=2 {} within v=1 {}{}", s2.len(), s1.len(), if strict { "" } else { " NOT strictly contained" }));
    }
    let printed = |v: f64| one.iter().filter(|r| mc_region_analytic(LearningKind::L2Back, &r.point, v).unwrap().inside).count();
    parts.push(format!("printed MC points v=2 {} vs v=1 {}", printed(2.0), printed(1.0)));
    pass &= printed(2.0) < printed(1.0);
    Outcome::new(pass, parts.join("; "))
}

fn c4_l2ahead_separation(_: &mut Ctx) -> Outcome {
    let n = DEFAULT_TRIAL_LENGTH;
    let l = lf(LearningKind::L2Ahead, 1.0);
    let mut pass = true;
    let mut parts = Vec::new();
    for b in [0.51, 0.52, 0.53, 0.54, 0.55] {
        let p = ABPoint::new(0.5, b);
        let ops = build_lifted(&p, &l, n).unwrap();
        let (rho, _) = ops.spectral_radius().unwrap();
        let s2 = max_sv_sq(&ops.m).unwrap();
        let st = sup_t(&p, &l, DEFAULT_GRID).unwrap().sup_abs;
        let iv = iteration_verdict(&ops, DEFAULT_ITERATIONS, &SeedSpec::default()).unwrap();
        let all_transient = iv.traces.iter().all(|(_, t)| t.has_transient());
        let worst = iv.worst().ac_log_ratio;
        let mut failed = Vec::new();
        if !(rho < 1.0) {
            failed.push("rho >= 1");
        }
        if !(s2 > 1.0) {
            failed.push("sigma <= 1");
        }
        if !(st > 1.0) {
            failed.push("sup_T <= 1");
        }
        if !all_transient {
            failed.push("trace without transient");
        }
        if !(worst < 0.0) {
            failed.push("ac_log_ratio >= 0 at 800 iterations");
        }
        pass &= failed.is_empty();
        parts.push(format!(
            "B={b}: rho {rho:.4}, sigma^2 {s2:.3}, sup_T {st:.3}, worst ratio {worst:.2}{}",
            if failed.is_empty() { String::new() } else { format!(" [{}]", failed.join(", ")) }
        ));
    }
    Outcome::new(pass, format!("A=0.5 v=1 n={n}: {}", parts.join("; ")))
}

fn c5_l2ahead_ac_curve(_: &mut Ctx) -> Outcome {
    let l = lf(LearningKind::L2Ahead, 1.0);
    let ac = |a: f64, b: f64| build_lifted(&ABPoint::new(a, b), &l, REGION_N).unwrap().eigenvalues_outside(1.0) == 0;
    let top = 0.995;
    let mut pass = true;
    let mut worst_up = 0.0f64;
    let mut worst_lo = 0.0f64;
    let mut problems = Vec::new();
    for k in 0..=14 {
        let a = 0.2 + 0.05 * k as f64;
        let bs: Vec<f64> = (0..=199).map(|i| -top + 2.0 * top * i as f64 / 199.0).collect();
        let verdicts: Vec<bool> = bs.iter().map(|&b| ac(a, b)).collect();
        let mut crossings = Vec::new();
        for i in 1..bs.len() {
            if verdicts[i] != verdicts[i - 1] {
                let (mut lo, mut hi) = (bs[i - 1], bs[i]);
                while hi - lo > 1e-5 {
                    let mid = 0.5 * (lo + hi);
                    if ac(a, mid) == verdicts[i - 1] {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                crossings.push((0.5 * (lo + hi), verdicts[i]));
            }
        }
        let upper_curve = (2.0 - a).powi(2) / (8.0 * a);
        let lower_curve = 0.5 * (-1.0 + 0.5 * a);
        let lower: Vec<f64> = crossings.iter().filter(|c| c.1).map(|c| c.0).collect();
        let upper: Vec<f64> = crossings.iter().filter(|c| !c.1).map(|c| c.0).collect();
        match lower.as_slice() {
            [b] => {
                worst_lo = worst_lo.max((b - lower_curve).abs());
                if (b - lower_curve).abs() > 0.05 {
                    pass = false;
                    problems.push(format!("A={a:.2}: lower contour {b:.4} vs {lower_curve:.4}"));
                }
            }
            _ => {
                pass = false;
                problems.push(format!("A={a:.2}: {} lower crossings", lower.len()));
            }
        }
        match upper.as_slice() {
            [b] => {
                worst_up = worst_up.max((b - upper_curve).abs());
                if (b - upper_curve).abs() > 0.03 {
                    pass = false;
                    problems.push(format!("A={a:.2}: upper contour {b:.4} vs {upper_curve:.4}"));
                }
            }
            // The curve leaves the plane and the region reaches the top edge.
            [] if upper_curve >= top - 0.03 && verdicts[bs.len() - 1] => {}
            _ => {
                pass = false;
                problems.push(format!("A={a:.2}: {} upper crossings, curve at {upper_curve:.4}", upper.len()));
            }
        }
    }
    let mut detail = format!(
        "n={REGION_N}, A in [0.2, 0.9]: max |upper contour - (2-A)^2/(8A)| = {worst_up:.4} (tol 0.03), max |lower contour - (-1+A/2)/2| = {worst_lo:.4} (tol 0.05)"
    );
    if !problems.is_empty() {
        detail.push_str(&format!("; {}", problems.join("; ")));
    }
    Outcome::new(pass, detail)
}

fn c6_symmetric(ctx: &mut Ctx) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for v in [1.0, 2.0] {
        let reports = ctx.region_sweep(LearningKind::L3Symmetric, v);
        let z_bad = reports.iter().filter(|r| r.mc_z != TriState::False).count();
        let s_bad = reports.iter().filter(|r| r.mc_sigma != TriState::False).count();
        let min_t = reports.iter().filter_map(|r| r.sup_t).fold(f64::INFINITY, f64::min);
        let min_s = reports.iter().filter_map(|r| r.sigma_sq).fold(f64::INFINITY, f64::min);
        pass &= z_bad == 0 && s_bad == 0;
        parts.push(format!(
            "l3sym v={v}: points not above 1: sup_T {z_bad}, sigma^2 {s_bad} (min sup_T {min_t:.4}, min sigma^2 {min_s:.4})"
        ));
    }
    let reports = ctx.region_sweep(LearningKind::L3SymmetricHalf, 1.0);
    let total = reports.len() as f64;
    let z = mc_true_set(reports, 0).len() as f64 / total;
    let s = reports.iter().filter(|r| r.mc_sigma == TriState::True).count() as f64 / total;
    pass &= z >= 0.1 && s >= 0.1;
    parts.push(format!(
        "l3symhalf v=1 MC-true: sup_T <= 1 {:.1}%, sigma^2 < 1 {:.1}%",
        100.0 * z,
        100.0 * s
    ));
    Outcome::new(pass, parts.join("; "))
}

fn c7_method_agreement(ctx: &mut Ctx) -> Outcome {
    let mut zs = 0;
    let mut is = 0;
    let mut compared = (0, 0);
    let mut first = Vec::new();
    for kind in [
        LearningKind::L1,
        LearningKind::L2Back,
        LearningKind::L2Ahead,
        LearningKind::L3Symmetric,
        LearningKind::L3Ahead,
        LearningKind::L3Back,
    ] {
        for r in ctx.region_sweep(kind, 1.0) {
            let sigma = r.mc_sigma.definite();
            if let (Some(z), Some(s)) = (r.mc_z.definite(), sigma) {
                compared.0 += 1;
                if z != s {
                    zs += 1;
                    first.push(format!("{} mc_z/mc_sigma at ({}, {})", kind.token(), r.point.a_gain, r.point.b_pole));
                }
            }
            if let (Some(i), Some(s)) = (r.mc_iter.definite(), sigma) {
                compared.1 += 1;
                if i != s {
                    is += 1;
                    first.push(format!("{} mc_iter/mc_sigma at ({}, {})", kind.token(), r.point.a_gain, r.point.b_pole));
                }
            }
        }
    }
    Outcome::new(
        zs == 0 && is == 0,
        format!(
            "6 kinds, n={REGION_N}: mc_z vs mc_sigma {zs} disagreements in {} definite pairs; mc_iter vs mc_sigma {is} in {}{}",
            compared.0,
            compared.1,
            first.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn c8_norm_equivalence(_: &mut Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut accepted = 0;
    let mut over = Vec::new();
    while accepted < 50 {
        let kind = LearningKind::NAMED[rng.gen_range(0..LearningKind::NAMED.len())];
        let v = rng.gen_range(0.25..2.0);
        let p = ABPoint::new(rng.gen_range(0.02..0.98), rng.gen_range(-0.98..0.98));
        let l = lf(kind, v);
        let st = sup_t(&p, &l, DEFAULT_GRID).unwrap().sup_abs;
        if !(0.2..=3.0).contains(&st) {
            continue;
        }
        accepted += 1;
        let sigma = max_sv_sq(&build_lifted(&p, &l, REGION_N).unwrap().m).unwrap().sqrt();
        let rel = (sigma - st).abs() / st;
        if rel > 0.02 {
            over.push(format!("{} B={:.3} ({:.1}%)", kind.token(), p.b_pole, 100.0 * rel));
        }
        if rel > worst {
            worst = rel;
            worst_at = format!("{} v={v:.3} A={:.3} B={:.3}", kind.token(), p.a_gain, p.b_pole);
        }
    }
    Outcome::new(
        worst <= 0.02,
        format!(
            "50 samples, n={REGION_N}: max |sigma_max - sup_T|/sup_T = {:.3}% at {worst_at}; {} samples above 2%{}",
            100.0 * worst,
            over.len(),
            if over.is_empty() { String::new() } else { format!(": {}", over.join(", ")) }
        ),
    )
}

fn c9_no_ilc(_: &mut Ctx) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let steps = 400;
    let mut cases = 0;
    let mut bad = Vec::new();
    for _ in 0..20 {
        let u: f64 = rng.gen_range(0.05..3.0);
        let eu = u.exp();
        let stab = (1.0 + eu) / (eu - 1.0);
        let osc = 1.0 / (eu - 1.0);
        let limits = no_ilc_gain_limits(u).unwrap();
        let mut kps: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.95..1.6 * stab)).collect();
        kps.extend([osc * 0.98, osc * 1.02, stab * 0.99, stab * 1.01]);
        for kp in kps {
            let p = ab_from_plant(&PlantParams::new(u, kp).unwrap()).unwrap();
            let y = simulate_trial(&p, 1.0, steps).unwrap().samples;
            let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
            let diverges = dy[steps - 1].abs() > dy[0].abs();
            // Increments below rounding of y carry no sign information.
            let floor = 1e-12 * y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let significant: Vec<f64> = dy.iter().copied().take_while(|d| d.abs() > floor).take(20).collect();
            let alternates = significant.len() >= 2 && significant.windows(2).all(|w| w[0] * w[1] < 0.0);
            let oscillates = alternates && !diverges;
            let want_div = kp > stab;
            let want_osc = osc < kp && kp < stab;
            cases += 1;
            if diverges != want_div || oscillates != want_osc {
                bad.push(format!("U={u:.3} Kp={kp:.3}: diverges {diverges}, oscillates {oscillates}"));
            }
            if (limits.stability_bound - stab).abs() > 1e-12 * stab || (limits.oscillation_bound - osc).abs() > 1e-12 * osc.max(1.0) {
                bad.push(format!("U={u:.3}: library bounds differ"));
            }
        }
    }
    Outcome::new(
        bad.is_empty(),
        format!(
            "{cases} (U, Kp) cases over 20 U values: {} mismatches{}",
            bad.len(),
            bad.first().map(|b| format!(" (first: {b})")).unwrap_or_default()
        ),
    )
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let cli = Cli::try_parse_from(std::iter::once("ilc").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    commands::run(cli, &mut out).map_err(|e| format!("{e:#}"))?;
    Ok(String::from_utf8_lossy(&out).into_owned())
}

fn c10_printed_bounds_audit(_: &mut Ctx) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in ["l3ahead", "l3back"] {
        let table = dir.path().join(format!("{kind}_audit.csv"));
        let res = run_cli(&[
            "compare",
            "--learning",
            kind,
            "--methods",
            "zsup,analytic",
            "--grid",
            "0.1:0.9:5,-0.9:0.9:5",
            "--workers",
            "1",
            "--audit",
            table.to_str().unwrap(),
        ]);
        let text = match res {
            Ok(t) => t,
            Err(e) => {
                pass = false;
                parts.push(format!("{kind}: {e}"));
                continue;
            }
        };
        let rows = std::fs::read_to_string(&table).map(|t| t.lines().count().saturating_sub(1)).unwrap_or(0);
        let holds = text.contains("necessary direction: holds");
        let flagged = text.contains("DISCREPANCY");
        let count = |label: &str| {
            text.lines()
                .find_map(|l| l.trim().strip_prefix(label))
                .map(|s| s.trim().to_string())
                .unwrap_or_default()
        };
        pass &= rows == 41 * 41 && (holds || flagged);
        parts.push(format!(
            "{kind}: {rows} table rows, numeric MC-true {}, printed true {}, MC-true but printed false {}, {}",
            count("numeric MC-true:"),
            count("printed conditions true:"),
            count("numeric MC-true but printed false:"),
            if holds { "necessary direction holds" } else if flagged { "discrepancy flagged" } else { "no verdict" }
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = walk(dir)
        .into_iter()
        .filter(|p| !p.to_string_lossy().ends_with("manifest.json"))
        .map(|p| (p.strip_prefix(dir).unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn c11_determinism(_: &mut Ctx) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for workers in ["1", "8"] {
        let root = dir.path().join(format!("w{workers}"));
        let csv = root.join("sweep.csv");
        let img = root.join("img");
        if let Err(e) = run_cli(&[
            "sweep",
            "--learning",
            "l2ahead",
            "--grid",
            "0.05:0.95:12,-0.95:0.95:12",
            "--N",
            "32",
            "--iters",
            "200",
            "--workers",
            workers,
            "--out",
            csv.to_str().unwrap(),
            "--image",
            img.to_str().unwrap(),
        ]) {
            return Outcome::new(false, format!("sweep with {workers} workers failed: {e}"));
        }
        runs.push(read_outputs(&root));
    }
    let ppm = runs[0].iter().filter(|(n, _)| n.ends_with(".ppm")).count();
    let same = runs[0] == runs[1];
    Outcome::new(
        same && ppm > 0,
        format!(
            "1 vs 8 workers: {} files compared ({ppm} pixmaps + CSV + legends), {}",
            runs[0].len(),
            if same { "byte-identical" } else { "DIFFERENT" }
        ),
    )
}

fn c12_slow_convergence(_: &mut Ctx) -> Outcome {
    let mut c = SweepConfig::new(lf(LearningKind::L2Back, 1.0));
    c.a_axis = GridAxis::new(0.01, 0.09, 9);
    c.b_axis = GridAxis::new(-0.99, -0.91, 9);
    c.j_max = 500;
    c.methods = "rho,iterate".parse().unwrap();
    c.workers = 1;
    let reports = run_sweep(&c).unwrap().reports;
    let stalled: Vec<&PointReport> = reports
        .iter()
        .filter(|r| r.ac_rho == TriState::True && r.worst_log_ratio.is_some_and(|w| w >= 0.0))
        .collect();
    let unflagged = stalled.iter().filter(|r| !r.flags.slow_converging).count();
    let flagged_divergent = reports
        .iter()
        .filter(|r| r.flags.slow_converging && r.ac_rho != TriState::True)
        .count();
    let worst = reports.iter().filter_map(|r| r.worst_log_ratio).fold(f64::NEG_INFINITY, f64::max);
    Outcome::new(
        unflagged == 0 && flagged_divergent == 0,
        format!(
            "l2back v=1, A in [0.01, 0.09], B in [-0.99, -0.91], n={}, 500 iterations: {} points with rho < 1 miss the AC ratio, {} of them unflagged; {flagged_divergent} flagged points with rho >= 1; largest final log10 ratio {worst:.3}",
            c.n,
            stalled.len(),
            unflagged
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(usize, &str, fn(&mut Ctx) -> Outcome); 12] = [
        (1, "causal eigenvalue identity", c1_causal_eigenvalues),
        (2, "L1 region reproduction", c2_l1_region),
        (3, "L2Back region reproduction", c3_l2back_region),
        (4, "L2Ahead MC vs AC separation", c4_l2ahead_separation),
        (5, "L2Ahead AC curve", c5_l2ahead_ac_curve),
        (6, "3-term symmetric instability", c6_symmetric),
        (7, "method agreement", c7_method_agreement),
        (8, "norm-method equivalence", c8_norm_equivalence),
        (9, "no-ILC conditions", c9_no_ilc),
        (10, "printed bounds audit", c10_printed_bounds_audit),
        (11, "determinism", c11_determinism),
        (12, "slow-convergence flagging", c12_slow_convergence),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut ctx = Ctx::default();
    let mut unexpected = Vec::new();
    let mut passed = 0;
    let mut run = 0;
    for (id, name, check) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = check(&mut ctx);
        let secs = start.elapsed().as_secs_f64();
        let blocked = KNOWN_BLOCKED.contains(&id);
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        let note = if blocked && !outcome.pass { " (known, see decisions ledger)" } else { "" };
        println!("[{tag}] {id:>2} {name}: {}{note} [{secs:.1} s]", outcome.detail);
        std::io::stdout().flush().ok();
        run += 1;
        if outcome.pass {
            passed += 1;
        }
        if outcome.pass == blocked {
            unexpected.push(id);
        }
    }
    println!("{passed}/{run} criteria passed");
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
