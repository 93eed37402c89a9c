//! SVG rendering: an orthographic view of the sphere and the stereographic
//! image of the loop from the pole used for the rotation index.

use magloop::geometry::Stereographic;
use magloop::loops::rotation_index;
use magloop::verify::select_pole;
use magloop::{DiscreteLoop, SpherePoint, Vec3};
use std::fmt::Write as _;

const PANEL: f64 = 400.0;
const MARGIN: f64 = 30.0;

fn basis(view: &Vec3) -> (Vec3, Vec3) {
    let w = view.normalize();
    let up = if w.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
    let e1 = up.cross(&w).normalize();
    (e1, w.cross(&e1))
}

fn polyline(out: &mut String, pts: &[(f64, f64)], style: &str) {
    if pts.len() < 2 {
        return;
    }
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
    writeln!(out, r##"  <polyline fill="none" {style} points="{}"/>"##, coords.join(" ")).unwrap();
}

fn orthographic(out: &mut String, lp: &DiscreteLoop, view: &Vec3) {
    let (e1, e2) = basis(view);
    let w = view.normalize();
    let r = PANEL / 2.0 - MARGIN;
    let (cx, cy) = (PANEL / 2.0, PANEL / 2.0);
    let map = |p: &Vec3| (cx + r * p.dot(&e1), cy - r * p.dot(&e2));
    writeln!(out, r##"  <circle cx="{cx:.3}" cy="{cy:.3}" r="{r:.3}" fill="#f4f6fa" stroke="#888"/>"##).unwrap();
    // equator and prime meridian for orientation
    for axis in [Vec3::z(), Vec3::y()] {
        let (a, b) = basis(&axis);
        let ring: Vec<(f64, f64)> = (0..=120)
            .map(|j| {
                let s = std::f64::consts::TAU * j as f64 / 120.0;
                map(&(a * s.cos() + b * s.sin()))
            })
            .collect();
        polyline(out, &ring, r##"stroke="#ccc" stroke-width="0.8""##);
    }
    // split into visible and hidden runs
    let fine = lp.resample(4 * lp.len()).unwrap_or_else(|_| lp.clone());
    let pts = fine.points();
    let n = pts.len();
    let mut run: Vec<(f64, f64)> = Vec::new();
    let mut front = pts[0].dot(&w) >= 0.0;
    for j in 0..=n {
        let p = &pts[j % n];
        let f = p.dot(&w) >= 0.0;
        if f != front {
            run.push(map(p));
            let style = if front {
                r##"stroke="#c0392b" stroke-width="2""##
            } else {
                r##"stroke="#c0392b" stroke-width="1" stroke-dasharray="4 3" opacity="0.6""##
            };
            polyline(out, &run, style);
            run.clear();
            front = f;
        }
        run.push(map(p));
    }
    let style = if front {
        r##"stroke="#c0392b" stroke-width="2""##
    } else {
        r##"stroke="#c0392b" stroke-width="1" stroke-dasharray="4 3" opacity="0.6""##
    };
    polyline(out, &run, style);
    let (sx, sy) = map(&pts[0]);
    writeln!(out, r##"  <circle cx="{sx:.3}" cy="{sy:.3}" r="4" fill="#2c3e50"/>"##).unwrap();
    writeln!(out, r##"  <text x="{:.3}" y="20" font-size="14" text-anchor="middle">orthographic, view ({:.3}, {:.3}, {:.3})</text>"##, cx, w.x, w.y, w.z).unwrap();
}

fn stereographic_panel(out: &mut String, lp: &DiscreteLoop, pole: &SpherePoint, index: Option<i64>) {
    let chart = Stereographic::new(pole);
    let fine = lp.resample(4 * lp.len()).unwrap_or_else(|_| lp.clone());
    let img: Vec<[f64; 2]> = fine.points().iter().filter_map(|p| chart.forward(&SpherePoint::from_vec(*p)).ok()).collect();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for w in &img {
        for a in 0..2 {
            lo[a] = lo[a].min(w[a]);
            hi[a] = hi[a].max(w[a]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let scale = (PANEL - 2.0 * MARGIN) / span;
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let map = |w: &[f64; 2]| (PANEL * 1.5 + scale * (w[0] - mid[0]), PANEL / 2.0 - scale * (w[1] - mid[1]));
    let mut pts: Vec<(f64, f64)> = img.iter().map(map).collect();
    if let Some(first) = pts.first().copied() {
        pts.push(first);
    }
    writeln!(out, r##"  <rect x="{PANEL}" y="0" width="{PANEL}" height="{PANEL}" fill="none" stroke="#888"/>"##).unwrap();
    polyline(out, &pts, r##"stroke="#2471a3" stroke-width="2""##);
    if pts.len() > 2 {
        // direction marker at the start
        let (x0, y0) = pts[0];
        let (x1, y1) = pts[2];
        let (dx, dy) = (x1 - x0, y1 - y0);
        let len = (dx * dx + dy * dy).sqrt().max(1e-12);
        let (ux, uy) = (dx / len, dy / len);
        let tip = (x0 + 12.0 * ux, y0 + 12.0 * uy);
        let left = (x0 - 4.0 * uy, y0 + 4.0 * ux);
        let right = (x0 + 4.0 * uy, y0 - 4.0 * ux);
        writeln!(
            out,
            r##"  <polygon fill="#2c3e50" points="{:.3},{:.3} {:.3},{:.3} {:.3},{:.3}"/>"##,
            tip.0, tip.1, left.0, left.1, right.0, right.1
        )
        .unwrap();
    }
    let p = pole.vec();
    let label = match index {
        Some(i) => format!("rotation index = {i}"),
        None => "rotation index unavailable".to_string(),
    };
    writeln!(out, r##"  <text x="{:.3}" y="20" font-size="14" text-anchor="middle">stereographic from ({:.3}, {:.3}, {:.3})</text>"##, PANEL * 1.5, p.x, p.y, p.z).unwrap();
    writeln!(out, r##"  <text x="{:.3}" y="{:.3}" font-size="16" text-anchor="middle">{label}</text>"##, PANEL * 1.5, PANEL - 10.0).unwrap();
}

/// Two-panel SVG of the loop. The view defaults to the loop's mean
/// direction.
pub fn render_svg(lp: &DiscreteLoop, view: Option<Vec3>, seed: u64) -> String {
    let mean: Vec3 = lp.points().iter().sum();
    let view = view.filter(|v| v.norm() > 0.0).unwrap_or(if mean.norm() > 1e-9 { mean } else { Vec3::new(1.0, 1.0, 1.0) });
    let pole = select_pole(lp, seed).unwrap_or(SpherePoint::north());
    let index = rotation_index(lp, &pole).ok().map(|r| r.index);
    let mut out = String::new();
    writeln!(out, r##"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"##, 2.0 * PANEL, PANEL, 2.0 * PANEL, PANEL).unwrap();
    orthographic(&mut out, lp, &view);
    stereographic_panel(&mut out, lp, &pole, index);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_annotated_and_deterministic() {
        let c = DiscreteLoop::circle(64, &SpherePoint::new(1.0, 0.2, 0.3), 0.7).unwrap();
        let a = render_svg(&c, None, 7);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("rotation index = 1"));
        assert_eq!(a, render_svg(&c, None, 7));
    }

    #[test]
    fn iterate_shows_its_index() {
        let c = DiscreteLoop::circle(64, &SpherePoint::new(0.0, 0.0, 1.0), 0.7).unwrap().iterate(2);
        assert!(render_svg(&c, Some(Vec3::z()), 7).contains("rotation index = 2"));
    }
}
