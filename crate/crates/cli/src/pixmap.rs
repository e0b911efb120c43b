//! Binary P6 heatmaps of sweep fields with text legends.
//!
//! `A` grows to the right and `B` grows upwards; each grid point becomes a
//! `scale × scale` block.

use ilc_core::sweep::{PointReport, TriState, VerdictField};

pub const CONVERGED: [u8; 3] = [37, 99, 201];
pub const MARGINAL: [u8; 3] = [242, 196, 48];
pub const NOT_CONVERGED: [u8; 3] = [196, 44, 44];
pub const ABSENT: [u8; 3] = [255, 255, 255];

#[derive(Debug, Clone, PartialEq)]
pub struct Pixmap {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

impl Pixmap {
    pub fn to_p6(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }
}

/// Number of grid points along A and B.
pub fn grid_dims(reports: &[PointReport]) -> (usize, usize) {
    let na = reports.iter().map(|r| r.index.0).max().map_or(0, |m| m + 1);
    let nb = reports.iter().map(|r| r.index.1).max().map_or(0, |m| m + 1);
    (na, nb)
}

fn paint(reports: &[PointReport], scale: usize, color: impl Fn(&PointReport) -> [u8; 3]) -> Pixmap {
    let scale = scale.max(1);
    let (na, nb) = grid_dims(reports);
    let (width, height) = (na * scale, nb * scale);
    let mut rgb = vec![255u8; width * height * 3];
    for r in reports {
        let c = color(r);
        let (i, j) = r.index;
        let row0 = (nb - 1 - j) * scale;
        for y in row0..row0 + scale {
            for x in i * scale..(i + 1) * scale {
                let p = (y * width + x) * 3;
                rgb[p..p + 3].copy_from_slice(&c);
            }
        }
    }
    Pixmap { width, height, rgb }
}

pub fn tri_color(t: TriState) -> [u8; 3] {
    match t {
        TriState::True => CONVERGED,
        TriState::Marginal => MARGINAL,
        TriState::False => NOT_CONVERGED,
        TriState::Absent => ABSENT,
    }
}

pub fn verdict_map(reports: &[PointReport], field: VerdictField, scale: usize) -> Pixmap {
    paint(reports, scale, |r| tri_color(field.get(r)))
}

pub fn verdict_legend(field: VerdictField, reports: &[PointReport]) -> String {
    let (na, nb) = grid_dims(reports);
    let rgb = |c: [u8; 3]| format!("rgb({},{},{})", c[0], c[1], c[2]);
    format!(
        "field: {}\ngrid: {na} x {nb} (A to the right, B upwards)\n{}: converged\n{}: marginal band\n{}: not converged\n{}: not computed\n",
        field.name(),
        rgb(CONVERGED),
        rgb(MARGINAL),
        rgb(NOT_CONVERGED),
        rgb(ABSENT)
    )
}

/// Linear grayscale from the smallest (black) to the largest (white)
/// finite value. Missing values are drawn in the marginal colour.
pub fn gray_map(reports: &[PointReport], value: fn(&PointReport) -> Option<f64>, scale: usize) -> (Pixmap, Option<(f64, f64)>) {
    let range = reports
        .iter()
        .filter_map(value)
        .filter(|v| v.is_finite())
        .fold(None, |acc: Option<(f64, f64)>, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        });
    let map = paint(reports, scale, |r| match (value(r), range) {
        (Some(v), Some((lo, hi))) if v.is_finite() => {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            let g = (t * 255.0).round() as u8;
            [g, g, g]
        }
        _ => MARGINAL,
    });
    (map, range)
}

pub fn gray_legend(name: &str, reports: &[PointReport], range: Option<(f64, f64)>) -> String {
    let (na, nb) = grid_dims(reports);
    let scale = match range {
        Some((lo, hi)) => format!("black: {lo}\nwhite: {hi}\nlinear in between\n"),
        None => "no values\n".to_string(),
    };
    format!(
        "field: {name}\ngrid: {na} x {nb} (A to the right, B upwards)\n{scale}rgb({},{},{}): not computed\n",
        MARGINAL[0], MARGINAL[1], MARGINAL[2]
    )
}
