//! Self-contained SVG rendering of experiment results: log-log mean lines
//! with shaded 10%-90% replicate bands, one per sample-size regime.

use laplace_diag_core::error::{Error, Result};
use laplace_diag_core::experiment::{ExperimentRow, Regime};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 42.0;
const MARGIN_BOTTOM: f64 = 52.0;

struct BandPoint {
    log_d: f64,
    mean: f64,
    q10: f64,
    q90: f64,
}

struct Band {
    regime: Regime,
    class: &'static str,
    color: &'static str,
    points: Vec<BandPoint>,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let pos = p * (m - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= m {
        sorted[m - 1]
    } else {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    }
}

/// Rows are assigned to the regime whose sample-size rule reproduces their
/// `n` more closely; rows matching both (they coincide at d = 4) join every
/// regime that has at least one exclusive row.
fn classify(rows: &[ExperimentRow]) -> Vec<(Regime, Vec<&ExperimentRow>)> {
    let dist = |regime: Regime, r: &ExperimentRow| {
        (regime.n_for(r.d) as i64 - r.n as i64).abs()
    };
    let mut exclusive_d2 = Vec::new();
    let mut exclusive_d25 = Vec::new();
    let mut ties = Vec::new();
    for r in rows.iter().filter(|r| !r.diverged) {
        let d2 = dist(Regime::TwoDSquared, r);
        let d25 = dist(Regime::DPow25, r);
        if d2 < d25 {
            exclusive_d2.push(r);
        } else if d25 < d2 {
            exclusive_d25.push(r);
        } else {
            ties.push(r);
        }
    }
    let mut groups = Vec::new();
    if !exclusive_d2.is_empty() || exclusive_d25.is_empty() {
        let mut members = exclusive_d2;
        members.extend(ties.iter().copied());
        groups.push((Regime::TwoDSquared, members));
    }
    if !exclusive_d25.is_empty() {
        let mut members = exclusive_d25;
        members.extend(ties.iter().copied());
        groups.push((Regime::DPow25, members));
    }
    groups.retain(|(_, members)| !members.is_empty());
    groups
}

fn build_bands(rows: &[ExperimentRow]) -> Result<Vec<Band>> {
    let groups = classify(rows);
    let mut bands = Vec::new();
    for (regime, members) in groups {
        let mut dims: Vec<usize> = members.iter().map(|r| r.d).collect();
        dims.sort_unstable();
        dims.dedup();
        let mut points = Vec::new();
        for d in dims {
            let mut values: Vec<f64> = members
                .iter()
                .filter(|r| r.d == d && r.l_hat.is_finite() && r.l_hat > 0.0)
                .map(|r| r.l_hat)
                .collect();
            if values.is_empty() {
                continue;
            }
            values.sort_by(f64::total_cmp);
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            points.push(BandPoint {
                log_d: (d as f64).log10(),
                mean: mean.log10(),
                q10: quantile(&values, 0.1).max(1e-300).log10(),
                q90: quantile(&values, 0.9).max(1e-300).log10(),
            });
        }
        if points.is_empty() {
            continue;
        }
        let (class, color) = match regime {
            Regime::TwoDSquared => ("d2", "#1f77b4"),
            Regime::DPow25 => ("d2.5", "#d62728"),
        };
        bands.push(Band {
            regime,
            class,
            color,
            points,
        });
    }
    if bands.is_empty() {
        return Err(Error::Argument(
            "plot: no usable (non-diverged, positive) rows".into(),
        ));
    }
    Ok(bands)
}

pub fn render(rows: &[ExperimentRow]) -> Result<String> {
    let bands = build_bands(rows)?;

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for band in &bands {
        for p in &band.points {
            x_min = x_min.min(p.log_d);
            x_max = x_max.max(p.log_d);
            y_min = y_min.min(p.q10).min(p.mean);
            y_max = y_max.max(p.q90).max(p.mean);
        }
    }
    if x_max - x_min < 1e-9 {
        x_min -= 0.1;
        x_max += 0.1;
    }
    if y_max - y_min < 1e-9 {
        y_min -= 0.1;
        y_max += 0.1;
    }
    let x_pad = 0.05 * (x_max - x_min);
    let y_pad = 0.08 * (y_max - y_min);
    let (x_min, x_max) = (x_min - x_pad, x_max + x_pad);
    let (y_min, y_max) = (y_min - y_pad, y_max + y_pad);

    let sx = |lx: f64| MARGIN_LEFT + (lx - x_min) / (x_max - x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT);
    let sy = |ly: f64| HEIGHT - MARGIN_BOTTOM - (ly - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">Leading-order TV term vs dimension (log-log)</text>\n",
        WIDTH / 2.0
    ));

    // axes frame
    svg.push_str(&format!(
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n",
        MARGIN_LEFT,
        MARGIN_TOP,
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    ));

    // x ticks at every plotted dimension
    let mut dims: Vec<usize> = rows.iter().map(|r| r.d).collect();
    dims.sort_unstable();
    dims.dedup();
    for d in &dims {
        let x = sx((*d as f64).log10());
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#333\"/>\n",
            HEIGHT - MARGIN_BOTTOM,
            HEIGHT - MARGIN_BOTTOM + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{d}</text>\n",
            HEIGHT - MARGIN_BOTTOM + 18.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">dimension d</text>\n",
        MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / 2.0,
        HEIGHT - 12.0
    ));

    // y ticks at powers of ten inside the range
    let lo_exp = y_min.floor() as i64;
    let hi_exp = y_max.ceil() as i64;
    for e in lo_exp..=hi_exp {
        let ly = e as f64;
        if ly < y_min || ly > y_max {
            continue;
        }
        let y = sy(ly);
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#ccc\" stroke-dasharray=\"3,3\"/>\n",
            MARGIN_LEFT,
            WIDTH - MARGIN_RIGHT
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">1e{e}</text>\n",
            MARGIN_LEFT - 8.0,
            y + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">mean leading term L</text>\n",
        MARGIN_TOP + (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / 2.0,
        MARGIN_TOP + (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / 2.0
    ));

    // shaded quantile bands
    for band in &bands {
        if band.points.len() >= 2 {
            let mut path = String::from("M");
            for p in &band.points {
                path.push_str(&format!("{:.2},{:.2} ", sx(p.log_d), sy(p.q90)));
            }
            for p in band.points.iter().rev() {
                path.push_str(&format!("L{:.2},{:.2} ", sx(p.log_d), sy(p.q10)));
            }
            path.push('Z');
            svg.push_str(&format!(
                "<path class=\"band-{}\" d=\"{}\" fill=\"{}\" fill-opacity=\"0.22\" stroke=\"none\"/>\n",
                band.class, path.trim(), band.color
            ));
        }
    }
    // mean lines and points
    for band in &bands {
        let mut path = String::new();
        for (i, p) in band.points.iter().enumerate() {
            path.push_str(&format!(
                "{}{:.2},{:.2} ",
                if i == 0 { "M" } else { "L" },
                sx(p.log_d),
                sy(p.mean)
            ));
        }
        svg.push_str(&format!(
            "<path class=\"mean-{}\" d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            band.class,
            path.trim(),
            band.color
        ));
        for p in &band.points {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>\n",
                sx(p.log_d),
                sy(p.mean),
                band.color
            ));
        }
    }

    // legend
    let legend_x = WIDTH - MARGIN_RIGHT - 130.0;
    let mut legend_y = MARGIN_TOP + 14.0;
    for band in &bands {
        svg.push_str(&format!(
            "<rect x=\"{legend_x:.2}\" y=\"{:.2}\" width=\"18\" height=\"10\" fill=\"{}\" fill-opacity=\"0.6\"/>\n",
            legend_y - 9.0,
            band.color
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{legend_y:.2}\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
            legend_x + 24.0,
            band.regime.label()
        ));
        legend_y += 18.0;
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}
