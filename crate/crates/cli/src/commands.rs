use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ilc_core::iterdomain::{iteration_verdict, SeedKind, SeedSpec, DEFAULT_ITERATIONS, DEFAULT_SEED};
use ilc_core::lifted::{build_lifted, DEFAULT_TRIAL_LENGTH};
use ilc_core::plant::{ab_from_plant, no_ilc_gain_limits, plant_from_ab, simulate_trial};
use ilc_core::sweep::{
    audit_printed_bounds, compare_methods, evaluate_point, extract_boundary, parse_grid, run_sweep, AgreementStats,
    ContourField, GridAxis, Method, MethodSet, PointReport, SweepConfig, TriState, VerdictField,
};
use ilc_core::zdomain::{ac_region_analytic, mc_region_analytic, region_curves, sup_t, RegionVerdict, DEFAULT_GRID};
use ilc_core::{ABPoint, LearningFunction, LearningKind, PlantParams};

use crate::args::{Cli, Command, Opts};
use crate::manifest::Outputs;
use crate::pixmap;
use crate::table;

pub const SWEEP_STEPS: usize = 81;
pub const COMPARE_STEPS: usize = 21;
pub const AUDIT_STEPS: usize = 41;
pub const PLANT_STEPS: usize = 40;
pub const PIXEL_SCALE: usize = 4;

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let name = cli.command.name();
    let opts = resolve(cli.command.opts())?;
    match cli.command {
        Command::Point(_) => point(&opts, out),
        Command::Sweep(_) => sweep(&opts, out),
        Command::Plant(_) => plant(&opts, out),
        Command::Boundaries(_) => boundaries(&opts, out),
        Command::Compare(_) => compare(&opts, out),
    }
    .with_context(|| format!("{name} failed"))
}

/// Merges the `--config` file under the command-line flags.
pub fn resolve(flags: &Opts) -> Result<Opts> {
    match &flags.config {
        None => Ok(flags.clone()),
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let file: Opts = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            Ok(flags.clone().over(file))
        }
    }
}

pub fn learning(o: &Opts) -> Result<LearningFunction> {
    let v = o.v.unwrap_or(1.0);
    Ok(match (&o.learning, &o.taps) {
        (Some(_), Some(_)) => bail!("give either --learning or --taps, not both"),
        (None, Some(taps)) => LearningFunction::parse_taps(taps, v)?,
        (Some(kind), None) => kind.parse::<LearningKind>()?.with_gain(v)?,
        (None, None) => LearningKind::L1.with_gain(v)?,
    })
}

/// The `(A, B)` point from either coordinate pair.
pub fn coordinates(o: &Opts) -> Result<ABPoint> {
    let ab = o.a.is_some() || o.b.is_some();
    let uk = o.u.is_some() || o.kp.is_some();
    let p = match (ab, uk) {
        (true, true) => bail!("conflicting coordinate flags: give either --A/--B or --U/--Kp"),
        (false, false) => bail!("missing coordinates: give --A and --B, or --U and --Kp"),
        (true, false) => ABPoint::new(
            o.a.ok_or_else(|| anyhow!("missing --A"))?,
            o.b.ok_or_else(|| anyhow!("missing --B"))?,
        ),
        (false, true) => ab_from_plant(&PlantParams::new(
            o.u.ok_or_else(|| anyhow!("missing --U"))?,
            o.kp.ok_or_else(|| anyhow!("missing --Kp"))?,
        )?)?,
    };
    if !p.in_range() {
        bail!(
            "point A = {}, B = {} is outside 0 < A < 1, -1 < B < 1",
            p.a_gain,
            p.b_pole
        );
    }
    Ok(p)
}

fn grid(o: &Opts, default_steps: usize) -> Result<(GridAxis, GridAxis)> {
    Ok(match &o.grid {
        Some(g) => parse_grid(g)?,
        None => (
            GridAxis::interior(0.0, 1.0, default_steps),
            GridAxis::interior(-1.0, 1.0, default_steps),
        ),
    })
}

fn methods(o: &Opts) -> Result<MethodSet> {
    Ok(match &o.methods {
        Some(m) => m.parse()?,
        None => MethodSet::all(),
    })
}

fn default_workers() -> usize {
    if ilc_core::parallel::is_parallel_available() {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        1
    }
}

/// Sweep configuration from the options.
pub fn sweep_config(o: &Opts, default_steps: usize) -> Result<SweepConfig> {
    let mut c = SweepConfig::new(learning(o)?);
    (c.a_axis, c.b_axis) = grid(o, default_steps)?;
    c.n = o.n.unwrap_or(DEFAULT_TRIAL_LENGTH);
    c.j_max = o.iters.unwrap_or(DEFAULT_ITERATIONS);
    c.methods = methods(o)?;
    c.seed = o.seed.unwrap_or(DEFAULT_SEED);
    c.workers = o.workers.unwrap_or_else(default_workers).max(1);
    c.validate()?;
    Ok(c)
}

/// Fully resolved options of a sweep, for the manifest.
fn resolved(o: &Opts, c: &SweepConfig) -> Opts {
    let named = c.learning.kind() != LearningKind::Custom;
    Opts {
        learning: named.then(|| c.learning.kind().token().to_string()),
        taps: (!named).then(|| c.learning.taps_string()),
        v: Some(c.learning.gain()),
        n: Some(c.n),
        iters: Some(c.j_max),
        grid: Some(format!("{},{}", c.a_axis, c.b_axis)),
        methods: Some(c.methods.to_string()),
        seed: Some(c.seed),
        workers: Some(c.workers),
        config: None,
        ..o.clone()
    }
}

fn verdict_text(v: &RegionVerdict) -> String {
    let state = if v.marginal {
        "marginal"
    } else if v.inside {
        "inside"
    } else {
        "outside"
    };
    format!("{state} [{}] ({})", v.basis, v.detail)
}

fn seed_name(k: SeedKind) -> String {
    match k {
        SeedKind::SingularVector => "singular-vector".into(),
        SeedKind::Impulse => "impulse".into(),
        SeedKind::Ones => "ones".into(),
        SeedKind::Random(i) => format!("random-{i}"),
    }
}

fn opt_index(x: Option<usize>) -> String {
    x.map_or("-".into(), |v| v.to_string())
}

fn point(o: &Opts, out: &mut dyn Write) -> Result<()> {
    let p = coordinates(o)?;
    let lf = learning(o)?;
    let mut c = SweepConfig::new(lf.clone());
    c.n = o.n.unwrap_or(DEFAULT_TRIAL_LENGTH);
    c.j_max = o.iters.unwrap_or(DEFAULT_ITERATIONS);
    c.methods = methods(o)?;
    c.seed = o.seed.unwrap_or(DEFAULT_SEED);
    if c.j_max == 0 {
        bail!("--iters must be at least 1");
    }
    let r = evaluate_point(&c, p, (0, 0));
    let plant = plant_from_ab(&p)?;

    writeln!(out, "A = {}, B = {} (U = {}, Kp = {})", p.a_gain, p.b_pole, plant.u_product, plant.kp)?;
    writeln!(out, "learning: {} (taps {}, v = {})", lf.label(), lf.taps_string(), lf.gain())?;
    if c.methods.contains(Method::Zsup) {
        let t = sup_t(&p, &lf, DEFAULT_GRID)?;
        writeln!(out, "sup_T = {} at theta = {}  mc_z = {}", t.sup_abs, t.argmax_theta, r.mc_z.token())?;
    }
    if let Some(s2) = r.sigma_sq {
        writeln!(out, "sigma_sq = {} (N = {})  mc_sigma = {}", s2, c.n, r.mc_sigma.token())?;
    }
    if let Some(rho) = r.rho {
        let ops = build_lifted(&p, &lf, c.n)?;
        let (_, how) = ops.spectral_radius()?;
        writeln!(out, "rho = {} (N = {}, {})  ac_rho = {}", rho, c.n, how, r.ac_rho.token())?;
    }
    if c.methods.contains(Method::Iterate) {
        let ops = build_lifted(&p, &lf, c.n)?;
        let seeds = SeedSpec {
            seed: c.seed,
            random: c.random_seeds,
            ..SeedSpec::default()
        };
        let iv = iteration_verdict(&ops, c.j_max, &seeds)?;
        writeln!(
            out,
            "iteration ({} iterations, N = {}): mc_iter = {}  ac_iter = {}",
            c.j_max,
            c.n,
            r.mc_iter.token(),
            r.ac_iter.token()
        )?;
        for (k, t) in &iv.traces {
            writeln!(
                out,
                "  {:<16} mc_start = {:<4} mc_stop = {:<4} ac_log_ratio = {}  peak = {}",
                seed_name(*k),
                opt_index(t.mc_start),
                opt_index(t.mc_stop),
                t.ac_log_ratio,
                t.peak_log_ratio()
            )?;
        }
    }
    if c.methods.contains(Method::Analytic) {
        let kind = lf.kind();
        for (name, res) in [
            ("mc_analytic", mc_region_analytic(kind, &p, lf.gain())),
            ("ac_analytic", ac_region_analytic(kind, &p, lf.gain())),
        ] {
            match res {
                Ok(v) => writeln!(out, "{name}: {}", verdict_text(&v))?,
                Err(e) => writeln!(out, "{name}: none ({e})")?,
            }
        }
    }
    if !r.flags.is_empty() {
        writeln!(out, "flags: {}", r.flags)?;
    }
    if let Some(path) = &o.out {
        let mut buf = Vec::new();
        table::write_reports(&mut buf, std::slice::from_ref(&r))?;
        std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

/// Heatmaps for every populated field.
fn write_images(dir: &Path, reports: &[PointReport], scale: usize, files: &mut Outputs) -> Result<()> {
    for f in VerdictField::ALL {
        if reports.iter().all(|r| f.get(r) == TriState::Absent) {
            continue;
        }
        files.write(&dir.join(format!("{}.ppm", f.name())), &pixmap::verdict_map(reports, f, scale).to_p6())?;
        files.write(
            &dir.join(format!("{}.legend.txt", f.name())),
            pixmap::verdict_legend(f, reports).as_bytes(),
        )?;
    }
    let numeric: [(&str, fn(&PointReport) -> Option<f64>); 3] =
        [("sup_T", |r| r.sup_t), ("sigma_sq", |r| r.sigma_sq), ("rho", |r| r.rho)];
    for (name, get) in numeric {
        if reports.iter().all(|r| get(r).is_none()) {
            continue;
        }
        let (map, range) = pixmap::gray_map(reports, get, scale);
        files.write(&dir.join(format!("{name}_gray.ppm")), &map.to_p6())?;
        files.write(
            &dir.join(format!("{name}_gray.legend.txt")),
            pixmap::gray_legend(name, reports, range).as_bytes(),
        )?;
    }
    Ok(())
}

fn summarize(reports: &[PointReport], out: &mut dyn Write) -> Result<()> {
    writeln!(out, "points: {}", reports.len())?;
    for f in VerdictField::ALL {
        let count = |t| reports.iter().filter(|r| f.get(r) == t).count();
        if count(TriState::Absent) == reports.len() {
            continue;
        }
        writeln!(
            out,
            "  {:<12} true {:>6}  false {:>6}  marginal {:>6}",
            f.name(),
            count(TriState::True),
            count(TriState::False),
            count(TriState::Marginal)
        )?;
    }
    let slow = reports.iter().filter(|r| r.flags.slow_converging).count();
    let failed = reports.iter().filter(|r| !r.flags.failed.is_empty()).count();
    writeln!(out, "  slow-converging {slow}  failed {failed}")?;
    Ok(())
}

fn sweep(o: &Opts, out: &mut dyn Write) -> Result<()> {
    let c = sweep_config(o, SWEEP_STEPS)?;
    let csv_path = o.out.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
    let result = run_sweep(&c)?;
    let mut files = Outputs::default();
    let mut buf = Vec::new();
    table::write_reports(&mut buf, &result.reports)?;
    files.write(&csv_path, &buf)?;
    if let Some(dir) = &o.image {
        write_images(dir, &result.reports, o.scale.unwrap_or(PIXEL_SCALE), &mut files)?;
    }
    let mut config = resolved(o, &c);
    config.out = Some(csv_path.clone());
    let manifest = manifest_path(&csv_path);
    files.finish(&manifest, "sweep", config, c.seed)?;
    summarize(&result.reports, out)?;
    writeln!(out, "wrote {} and {}", csv_path.display(), manifest.display())?;
    Ok(())
}

fn plant(o: &Opts, out: &mut dyn Write) -> Result<()> {
    let params = match (o.u, o.kp, o.a, o.b) {
        (Some(u), Some(kp), None, None) => PlantParams::new(u, kp)?,
        (None, None, Some(a), Some(b)) => plant_from_ab(&ABPoint::new(a, b))?,
        (Some(_), None, None, None) => bail!("missing --Kp"),
        _ => bail!("give --U and --Kp (or --A and --B)"),
    };
    let limits = no_ilc_gain_limits(params.u_product)?;
    let p = ab_from_plant(&params)?;
    writeln!(out, "U = {}, Kp = {} (A = {}, B = {})", params.u_product, params.kp, p.a_gain, p.b_pole)?;
    writeln!(out, "stability:   Kp < {}  (B > -1)", limits.stability_bound)?;
    writeln!(out, "oscillation: Kp < {}  (B > 0, no sign alternation)", limits.oscillation_bound)?;
    writeln!(out, "lower:       Kp > {}  (B < 1)", limits.lower_bound)?;
    writeln!(out, "class: {}", limits.classify(params.kp).describe())?;
    let trial = simulate_trial(&p, 1.0, o.steps.unwrap_or(PLANT_STEPS))?;
    writeln!(out, "step response: {}", trial.classification.as_str())?;
    let mut csv = String::from("k,y\n");
    for (k, y) in trial.samples.iter().enumerate() {
        csv.push_str(&format!("{k},{y}\n"));
    }
    match &o.out {
        Some(path) => std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => out.write_all(csv.as_bytes())?,
    }
    Ok(())
}

fn boundaries(o: &Opts, out: &mut dyn Write) -> Result<()> {
    let lf = learning(o)?;
    let kind = lf.kind();
    let sweep = match &o.sweep {
        Some(path) => {
            let f = std::fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
            Some(table::read_reports(f).with_context(|| format!("parsing {}", path.display()))?)
        }
        None => None,
    };
    let curves = region_curves(kind, lf.gain()).ok();
    if curves.is_none() && sweep.is_none() {
        bail!(
            "{} has no closed-form region; pass --sweep with a sweep CSV to extract numeric contours",
            lf.label()
        );
    }

    let mut rows = String::from("source,family,curve,polyline,A,B\n");
    if let Some(curves) = curves {
        let a_values = match (&sweep, &o.grid) {
            (Some(reports), None) => {
                let mut a: Vec<f64> = reports.iter().map(|r| r.point.a_gain).collect();
                a.sort_by(f64::total_cmp);
                a.dedup();
                a
            }
            _ => grid(o, SWEEP_STEPS)?.0.values(),
        };
        for (k, curve) in curves.iter().enumerate() {
            for &a in &a_values {
                let b = curve.b_at(a, lf.gain());
                if (-1.0..=1.0).contains(&b) {
                    rows.push_str(&format!(
                        "analytic,{},{} [{}],{k},{a},{b}\n",
                        curve.family.as_str(),
                        curve.label,
                        curve.basis
                    ));
                }
            }
        }
    }
    if let Some(reports) = &sweep {
        for m in Method::ALL {
            let Some(field) = ContourField::for_method(m) else { continue };
            if reports.iter().all(|r| field.value(r).is_none()) {
                continue;
            }
            let family = if m == Method::Rho { "ac" } else { "mc" };
            for (k, line) in extract_boundary(reports, field)?.iter().enumerate() {
                for &(a, b) in line {
                    rows.push_str(&format!("{},{family},level 1,{k},{a},{b}\n", m.token()));
                }
            }
        }
    }
    match &o.out {
        Some(path) => std::fs::write(path, rows).with_context(|| format!("writing {}", path.display()))?,
        None => out.write_all(rows.as_bytes())?,
    }
    Ok(())
}

pub fn write_stats(stats: &AgreementStats, out: &mut dyn Write) -> Result<()> {
    writeln!(
        out,
        "agreement on {} points (boundary exclusion {} cells)",
        stats.grid_size, stats.boundary_exclusion
    )?;
    writeln!(
        out,
        "  {:<24} {:>9} {:>10} {:>9} {:>9} {:>9}",
        "pair", "both-true", "both-false", "disagree", "marginal", "excluded"
    )?;
    for p in &stats.pairs {
        let c = p.counts;
        writeln!(
            out,
            "  {:<24} {:>9} {:>10} {:>9} {:>9} {:>9}",
            format!("{} vs {}", p.left, p.right),
            c.both_true,
            c.both_false,
            c.disagree,
            c.either_marginal,
            c.near_boundary
        )?;
    }
    writeln!(
        out,
        "  AC-true but MC-false: {} ({} with a learning transient)",
        stats.ac_true_mc_false, stats.ac_true_mc_false_transient
    )?;
    writeln!(out, "  MC-true but AC-false (subset violations): {}", stats.subset_violations)?;
    writeln!(out, "  slow-converging: {}", stats.slow_converging)?;
    Ok(())
}

fn compare(o: &Opts, out: &mut dyn Write) -> Result<()> {
    let c = sweep_config(o, COMPARE_STEPS)?;
    let result = run_sweep(&c)?;
    let stats = match result.stats {
        Some(s) => s,
        None => compare_methods(&result.reports, c.eps_boundary)?,
    };
    let mut files = Outputs::default();
    if let Some(path) = &o.out {
        let mut buf = Vec::new();
        table::write_reports(&mut buf, &result.reports)?;
        files.write(path, &buf)?;
    }
    write_stats(&stats, out)?;

    let kind = c.learning.kind();
    if matches!(kind, LearningKind::L3Ahead | LearningKind::L3Back) {
        let audit = audit_printed_bounds(
            kind,
            c.learning.gain(),
            GridAxis::interior(0.0, 1.0, AUDIT_STEPS),
            GridAxis::interior(-1.0, 1.0, AUDIT_STEPS),
            c.sup_grid,
            c.workers,
        )?;
        out.write_all(audit.report().as_bytes())?;
        if let Some(path) = &o.audit {
            let mut t = String::from("A,B,sup_T,numeric_mc,printed_inside,printed_detail\n");
            for r in &audit.rows {
                t.push_str(&format!(
                    "{},{},{},{},{},\"{}\"\n",
                    r.point.a_gain,
                    r.point.b_pole,
                    r.sup_t,
                    r.numeric_mc.token(),
                    u8::from(r.printed_inside),
                    r.printed_detail.replace('"', "\"\"")
                ));
            }
            files.write(path, t.as_bytes())?;
        }
    }
    if let Some(path) = o.out.as_ref().or(o.audit.as_ref()) {
        let manifest = manifest_path(path);
        files.finish(&manifest, "compare", resolved(o, &c), c.seed)?;
    }
    Ok(())
}
