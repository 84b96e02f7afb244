//! Plain-text SVG report generation: a smoothed training curve with a
//! mean +/- std band, and box-style policy comparisons. No graphics
//! dependencies; the output is assembled string by string.

use crate::error::{Error, Result};

const W: f64 = 720.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        W / 2.0,
        esc(title)
    )
}

fn axes(x_label: &str, y_label: &str) -> String {
    let x0 = MARGIN;
    let y0 = H - MARGIN;
    let x1 = W - MARGIN;
    let y1 = MARGIN;
    format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n\
         <text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" \
         transform=\"rotate(-90 16 {})\">{}</text>\n",
        (x0 + x1) / 2.0,
        H - 20.0,
        esc(x_label),
        H / 2.0,
        H / 2.0,
        esc(y_label)
    )
}

struct Scale {
    lo: f64,
    hi: f64,
    p0: f64,
    p1: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, p0: f64, p1: f64) -> Self {
        let (lo, hi) = if (hi - lo).abs() < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        };
        Scale { lo, hi, p0, p1 }
    }

    fn map(&self, v: f64) -> f64 {
        self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)
    }
}

fn fmt(v: f64) -> String {
    format!("{:.2}", v)
}

/// Sliding-window mean and standard deviation over the trailing `window`
/// values at each position.
pub fn smooth(values: &[f64], window: usize) -> Vec<(f64, f64)> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    for i in 0..values.len() {
        let start = (i + 1).saturating_sub(window);
        let slice = &values[start..=i];
        let n = slice.len() as f64;
        let mean = slice.iter().sum::<f64>() / n;
        let var = slice.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        out.push((mean, var.sqrt()));
    }
    out
}

/// Training-curve plot: per-episode values smoothed over `window`
/// episodes, drawn as a mean line inside a +/- one-std band. An empty
/// series still produces a valid plot with axes.
pub fn training_curve_svg(values: &[f64], window: usize, title: &str, y_label: &str) -> String {
    let mut svg = svg_open(title);
    svg.push_str(&axes("episode", y_label));
    if !values.is_empty() {
        let smoothed = smooth(values, window);
        let lo = smoothed
            .iter()
            .map(|(m, s)| m - s)
            .fold(f64::INFINITY, f64::min);
        let hi = smoothed
            .iter()
            .map(|(m, s)| m + s)
            .fold(f64::NEG_INFINITY, f64::max);
        let sx = Scale::new(0.0, (values.len() - 1).max(1) as f64, MARGIN, W - MARGIN);
        let sy = Scale::new(lo, hi, H - MARGIN, MARGIN);
        let mut band = String::from("<path fill=\"steelblue\" fill-opacity=\"0.25\" stroke=\"none\" d=\"M");
        for (i, (m, s)) in smoothed.iter().enumerate() {
            band.push_str(&format!("{},{} ", fmt(sx.map(i as f64)), fmt(sy.map(m + s))));
            if i == 0 {
                band.push('L');
            }
        }
        for (i, (m, s)) in smoothed.iter().enumerate().rev() {
            band.push_str(&format!("L{},{} ", fmt(sx.map(i as f64)), fmt(sy.map(m - s))));
        }
        band.push_str("Z\"/>\n");
        svg.push_str(&band);
        let mut line = String::from("<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"");
        for (i, (m, _)) in smoothed.iter().enumerate() {
            line.push_str(&format!("{},{} ", fmt(sx.map(i as f64)), fmt(sy.map(*m))));
        }
        line.push_str("\"/>\n");
        svg.push_str(&line);
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"10\">{}..{}</text>\n",
            W - MARGIN - 40.0,
            MARGIN - 6.0,
            fmt(lo),
            fmt(hi)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Five-number summary (min, q1, median, q3, max) with linear quartile
/// interpolation.
pub fn five_number_summary(values: &[f64]) -> Result<(f64, f64, f64, f64, f64)> {
    if values.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| {
        let idx = p * (v.len() - 1) as f64;
        let lo = idx.floor() as usize;
        let hi = idx.ceil() as usize;
        let frac = idx - lo as f64;
        v[lo] * (1.0 - frac) + v[hi] * frac
    };
    Ok((v[0], q(0.25), q(0.5), q(0.75), v[v.len() - 1]))
}

/// Box-style comparison of labeled samples (one box per policy).
pub fn comparison_svg(groups: &[(String, Vec<f64>)], title: &str, y_label: &str) -> Result<String> {
    let mut svg = svg_open(title);
    svg.push_str(&axes("policy", y_label));
    let nonempty: Vec<&(String, Vec<f64>)> =
        groups.iter().filter(|(_, v)| !v.is_empty()).collect();
    if !nonempty.is_empty() {
        let lo = nonempty
            .iter()
            .flat_map(|(_, v)| v.iter())
            .fold(f64::INFINITY, |a, &b| a.min(b));
        let hi = nonempty
            .iter()
            .flat_map(|(_, v)| v.iter())
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let sy = Scale::new(lo, hi, H - MARGIN, MARGIN);
        let span = W - 2.0 * MARGIN;
        let slot = span / nonempty.len() as f64;
        let box_w = (slot * 0.4).min(60.0);
        for (gi, (label, v)) in nonempty.iter().enumerate() {
            let cx = MARGIN + slot * (gi as f64 + 0.5);
            let (vmin, q1, med, q3, vmax) = five_number_summary(v)?;
            let (ymin, yq1, ymed, yq3, ymax) =
                (sy.map(vmin), sy.map(q1), sy.map(med), sy.map(q3), sy.map(vmax));
            svg.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
                fmt(cx),
                fmt(ymin),
                fmt(ymax)
            ));
            svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" \
                 fill=\"lightsteelblue\" stroke=\"black\"/>\n",
                fmt(cx - box_w / 2.0),
                fmt(yq3),
                fmt(box_w),
                fmt((yq1 - yq3).abs()),
            ));
            svg.push_str(&format!(
                "<line x1=\"{}\" y1=\"{2}\" x2=\"{}\" y2=\"{2}\" stroke=\"black\" stroke-width=\"2\"/>\n",
                fmt(cx - box_w / 2.0),
                fmt(cx + box_w / 2.0),
                fmt(ymed)
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\n",
                fmt(cx),
                H - MARGIN + 18.0,
                esc(label)
            ));
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimal well-formedness check: every opened tag is closed in order
    /// and attribute quoting is balanced.
    fn assert_well_formed(svg: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = svg;
        while let Some(start) = rest.find('<') {
            let end = rest[start..].find('>').expect("unclosed tag") + start;
            let tag = &rest[start + 1..end];
            assert_eq!(tag.matches('"').count() % 2, 0, "unbalanced quotes in {tag}");
            if let Some(name) = tag.strip_prefix('/') {
                assert_eq!(stack.pop().as_deref(), Some(name), "mismatched </{name}>");
            } else if !tag.ends_with('/') {
                let name = tag.split_whitespace().next().unwrap().to_string();
                stack.push(name);
            }
            rest = &rest[end + 1..];
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
        assert!(!rest.contains('<'));
    }

    #[test]
    fn smoothing_matches_direct_window_statistics() {
        let v: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let s = smooth(&v, 4);
        assert_eq!(s.len(), 10);
        assert_eq!(s[0], (0.0, 0.0));
        // window at i=5 covers {2,3,4,5}
        let mean = 3.5;
        let var: f64 = (2.25 + 0.25 + 0.25 + 2.25) / 4.0;
        assert!((s[5].0 - mean).abs() < 1e-12);
        assert!((s[5].1 - var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn five_number_summary_oracle() {
        let (mn, q1, med, q3, mx) =
            five_number_summary(&[7.0, 1.0, 3.0, 5.0, 9.0]).unwrap();
        assert_eq!((mn, q1, med, q3, mx), (1.0, 3.0, 5.0, 7.0, 9.0));
        let (_, _, med2, _, _) = five_number_summary(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(med2, 2.5);
        assert!(five_number_summary(&[]).is_err());
    }

    #[test]
    fn empty_series_yields_axes_only_plot() {
        let svg = training_curve_svg(&[], 500, "empty", "return");
        assert_well_formed(&svg);
        assert!(svg.contains("<line"));
        assert!(!svg.contains("polyline"));
    }

    #[test]
    fn curve_and_band_are_well_formed() {
        let v: Vec<f64> = (0..300).map(|i| (i as f64 * 0.1).sin()).collect();
        let svg = training_curve_svg(&v, 50, "training", "return");
        assert_well_formed(&svg);
        assert!(svg.contains("polyline"));
        assert!(svg.contains("fill-opacity"));
    }

    #[test]
    fn comparison_has_one_box_per_policy() {
        let groups = vec![
            ("learned".to_string(), vec![20.0, 21.0, 22.0, 23.0]),
            ("equidistant".to_string(), vec![19.0, 20.0, 20.5, 21.0]),
        ];
        let svg = comparison_svg(&groups, "m = 3", "psnr").unwrap();
        assert_well_formed(&svg);
        assert_eq!(svg.matches("<rect").count(), 3); // background + 2 boxes
        assert!(svg.contains("learned"));
        assert!(svg.contains("equidistant"));
    }

    #[test]
    fn titles_are_escaped() {
        let svg = training_curve_svg(&[1.0, 2.0], 1, "a < b & c", "y");
        assert_well_formed(&svg);
        assert!(svg.contains("a &lt; b &amp; c"));
    }
}
