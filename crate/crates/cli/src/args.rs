//! Command-line flags. Every flag can also come from a JSON config file;
//! flags given on the command line win.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "ilc", version, about = "Convergence domains of iterative learning control on a first-order plant")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Every test at one (A, B) or (U, Kp) point.
    Point(Opts),
    /// Sweep a grid of (A, B) points; writes CSV, heatmaps and a manifest.
    Sweep(Opts),
    /// Within-trial stability of the plant without learning.
    Plant(Opts),
    /// Closed-form region curves and numeric level-1 contours.
    Boundaries(Opts),
    /// Agreement between methods over a grid.
    Compare(Opts),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Point(_) => "point",
            Command::Sweep(_) => "sweep",
            Command::Plant(_) => "plant",
            Command::Boundaries(_) => "boundaries",
            Command::Compare(_) => "compare",
        }
    }

    pub fn opts(&self) -> &Opts {
        match self {
            Command::Point(o) | Command::Sweep(o) | Command::Plant(o) | Command::Boundaries(o) | Command::Compare(o) => o,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Opts {
    /// Plant gain A in (0, 1).
    #[arg(long = "A", allow_negative_numbers = true)]
    #[serde(rename = "A", skip_serializing_if = "Option::is_none", default)]
    pub a: Option<f64>,

    /// Closed-loop pole B in (-1, 1).
    #[arg(long = "B", allow_negative_numbers = true)]
    #[serde(rename = "B", skip_serializing_if = "Option::is_none", default)]
    pub b: Option<f64>,

    /// U = a·τs > 0.
    #[arg(long = "U", allow_negative_numbers = true)]
    #[serde(rename = "U", skip_serializing_if = "Option::is_none", default)]
    pub u: Option<f64>,

    /// Proportional gain.
    #[arg(long = "Kp", allow_negative_numbers = true)]
    #[serde(rename = "Kp", skip_serializing_if = "Option::is_none", default)]
    pub kp: Option<f64>,

    /// Learning kind: l1, l2back, l2ahead, l3sym, l3symhalf, l3ahead, l3back.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub learning: Option<String>,

    /// Custom taps "shift:coef,…"; positive shifts look ahead.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub taps: Option<String>,

    /// Learning gain.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub v: Option<f64>,

    /// Trial length.
    #[arg(long = "N")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,

    /// Iteration budget.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iters: Option<usize>,

    /// "amin:amax:steps,bmin:bmax:steps".
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub grid: Option<String>,

    /// Comma-separated subset of zsup, sigma, rho, iterate, analytic, or "all".
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub methods: Option<String>,

    /// Seed of the pseudo-random initial vectors.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,

    /// Output file (CSV).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub out: Option<PathBuf>,

    /// Directory for heatmaps.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub image: Option<PathBuf>,

    /// JSON file with any of these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Parallel workers for sweeps.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub workers: Option<usize>,

    /// Samples in the within-trial step response.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub steps: Option<usize>,

    /// Sweep CSV to contour (boundaries).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sweep: Option<PathBuf>,

    /// File for the full printed-bounds audit table (compare).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub audit: Option<PathBuf>,

    /// Heatmap pixels per grid cell.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scale: Option<usize>,
}

impl Opts {
    /// `self` with every unset option taken from `base`.
    pub fn over(self, base: Opts) -> Opts {
        macro_rules! pick {
            ($($f:ident),*) => {
                Opts { $($f: self.$f.or(base.$f),)* }
            };
        }
        pick!(a, b, u, kp, learning, taps, v, n, iters, grid, methods, seed, out, image, config, workers, steps, sweep, audit, scale)
    }
}
