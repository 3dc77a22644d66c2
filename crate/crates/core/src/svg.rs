//! Scatter plots of planar measures and their barycenter.

use std::fmt::Write;

use crate::barycenter::BarycenterResult;
use crate::error::{Error, Result};
use crate::measure::MeasureSet;
use crate::scalar::Scalar;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8",
];
const BARYCENTER_COLOR: &str = "#d62728";

#[derive(Clone, Debug)]
pub struct SvgOptions {
    pub width: f64,
    pub height: f64,
    /// Radius of a disk of unit mass, in pixels.
    pub unit_radius: f64,
    /// Draw the transport from the barycenter to this measure.
    pub transport_to: Option<usize>,
}

impl Default for SvgOptions {
    fn default() -> Self {
        Self { width: 800.0, height: 600.0, unit_radius: 40.0, transport_to: None }
    }
}

/// Renders the input measures as translucent disks and the barycenter as
/// red disks, disk area proportional to mass. Coordinates are printed with
/// six decimals so equal inputs give identical documents.
pub fn render_svg<T: Scalar>(result: &BarycenterResult<T>, ms: &MeasureSet<T>, opts: &SvgOptions) -> Result<String> {
    if ms.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: ms.dim() });
    }
    if let Some(i) = opts.transport_to {
        if i >= ms.len() {
            return Err(Error::Validation(format!("transport target {i} but only {} measures", ms.len())));
        }
    }
    let xy = |p: &[T]| (p[0].to_f64(), p[1].to_f64());
    let mut pts: Vec<(f64, f64)> = ms.measures().iter().flat_map(|m| m.points().iter().map(|p| xy(p))).collect();
    pts.extend(result.barycenter.points().iter().map(|p| xy(p)));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let margin = opts.unit_radius;
    let span = ((x1 - x0) / (opts.width - 2.0 * margin)).max((y1 - y0) / (opts.height - 2.0 * margin));
    let scale = if span > 0.0 { 1.0 / span } else { 1.0 };
    let cx = (x0 + x1) / 2.0;
    let cy = (y0 + y1) / 2.0;
    let map = |(x, y): (f64, f64)| {
        (opts.width / 2.0 + (x - cx) * scale, opts.height / 2.0 - (y - cy) * scale)
    };
    let radius = |m: f64| opts.unit_radius * m.max(0.0).sqrt();

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.6}" height="{:.6}" viewBox="0 0 {:.6} {:.6}">"#,
        opts.width, opts.height, opts.width, opts.height
    );
    out.push_str(
        "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"6\" markerHeight=\"6\" orient=\"auto\"><path d=\"M 0 0 L 10 5 L 0 10 z\"/></marker></defs>\n",
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, m) in ms.measures().iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(out, r#"<g class="measure" data-index="{i}" fill="{color}" fill-opacity="0.35">"#);
        for (p, d) in m.points().iter().zip(m.masses()) {
            let (x, y) = map(xy(p));
            let _ = writeln!(out, r#"<circle cx="{x:.6}" cy="{y:.6}" r="{:.6}"/>"#, radius(d.to_f64()));
        }
        out.push_str("</g>\n");
    }
    if let Some(i) = opts.transport_to {
        let _ = writeln!(out, r#"<g class="transport" data-index="{i}" stroke="black" stroke-width="1" marker-end="url(#arrow)">"#);
        let pts = ms.measures()[i].points();
        for (_, j, k, _) in result.transport.plan(i) {
            let (ax, ay) = map(xy(result.centroids.point(*j)));
            let (bx, by) = map(xy(&pts[*k]));
            let _ = writeln!(out, r#"<line x1="{ax:.6}" y1="{ay:.6}" x2="{bx:.6}" y2="{by:.6}"/>"#);
        }
        out.push_str("</g>\n");
    }
    let _ = writeln!(out, r#"<g class="barycenter" fill="{BARYCENTER_COLOR}" fill-opacity="0.8">"#);
    for (p, d) in result.barycenter.points().iter().zip(result.barycenter.masses()) {
        let (x, y) = map(xy(p));
        let _ = writeln!(out, r#"<circle cx="{x:.6}" cy="{y:.6}" r="{:.6}"/>"#, radius(d.to_f64()));
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barycenter::{solve_barycenter, BarycenterOptions};
    use crate::measure::DiscreteMeasure;

    fn instance(dim: usize) -> MeasureSet<f64> {
        let p = |x: f64| {
            let mut v = vec![0.0; dim];
            v[0] = x;
            v
        };
        MeasureSet::new(vec![
            DiscreteMeasure::new(dim, vec![p(0.0), p(2.0)], vec![0.5, 0.5]).unwrap(),
            DiscreteMeasure::new(dim, vec![p(1.0), p(5.0), p(6.0)], vec![0.25, 0.25, 0.5]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn counts_elements() {
        let ms = instance(2);
        let r = solve_barycenter(&ms, &BarycenterOptions::default()).unwrap();
        let svg = render_svg(&r, &ms, &SvgOptions::default()).unwrap();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<circle").count(), 5 + r.support_size());
        assert_eq!(svg.matches("<line").count(), 0);

        let opts = SvgOptions { transport_to: Some(1), ..Default::default() };
        let svg = render_svg(&r, &ms, &opts).unwrap();
        assert_eq!(svg.matches("<line").count(), r.transport.plan(1).len());
        assert_eq!(svg, render_svg(&r, &ms, &opts).unwrap());
    }

    #[test]
    fn area_tracks_mass() {
        let ms = instance(2);
        let r = solve_barycenter(&ms, &BarycenterOptions::default()).unwrap();
        let svg = render_svg(&r, &ms, &SvgOptions::default()).unwrap();
        // masses 0.5 and 0.25 in the second measure
        assert!(svg.contains(&format!(r#"r="{:.6}""#, 40.0 * 0.5f64.sqrt())));
        assert!(svg.contains(r#"r="20.000000""#));
    }

    #[test]
    fn rejects_other_dimensions() {
        let ms = instance(3);
        let r = solve_barycenter(&ms, &BarycenterOptions::default()).unwrap();
        assert!(matches!(render_svg(&r, &ms, &SvgOptions::default()), Err(Error::Dimension { expected: 2, got: 3 })));
        let ms = instance(2);
        let r = solve_barycenter(&ms, &BarycenterOptions::default()).unwrap();
        let opts = SvgOptions { transport_to: Some(2), ..Default::default() };
        assert!(matches!(render_svg(&r, &ms, &opts), Err(Error::Validation(_))));
    }
}
