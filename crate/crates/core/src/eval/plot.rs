//! Static SVG rendering of traces and comparison tables.
//!
//! Trace plots contain one `<circle class="obstacle">` per obstacle, one
//! `<polyline class="trajectory">` per robot (start point included), a
//! `<rect class="start">` and a `<path class="goal">` cross per robot.
//! World `+y` points up. Comparison plots hold one panel per metric with a
//! `<rect class="bar">` per planner and a `<line class="error">` for ±1 stdev.
//! Coordinates are printed with fixed precision, so output bytes depend
//! only on the input.

use std::fmt::Write;

use crate::geometry::Vec2;

use super::compare::ComparisonTable;
use super::EpisodeTrace;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const PX_PER_M: f64 = 60.0;
const MARGIN_M: f64 = 0.5;

struct Frame {
    min: Vec2,
    max: Vec2,
}

impl Frame {
    fn px(&self, p: &Vec2) -> (f64, f64) {
        ((p.x - self.min.x) * PX_PER_M, (self.max.y - p.y) * PX_PER_M)
    }
}

pub fn plot_trace(trace: &EpisodeTrace) -> String {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = -lo;
    let mut grow = |p: Vec2, r: f64| {
        lo = lo.inf(&(p - Vec2::new(r, r)));
        hi = hi.sup(&(p + Vec2::new(r, r)));
    };
    for r in &trace.robots {
        grow(r.start, 0.0);
        grow(r.goal, 0.0);
        r.positions.iter().for_each(|p| grow(*p, 0.0));
    }
    for o in &trace.scenario.obstacles {
        grow(o.center, o.radius);
    }
    if !lo.x.is_finite() {
        lo = Vec2::zeros();
        hi = Vec2::zeros();
    }
    let frame = Frame { min: lo - Vec2::new(MARGIN_M, MARGIN_M), max: hi + Vec2::new(MARGIN_M, MARGIN_M) };
    let (w, h) = frame.px(&Vec2::new(frame.max.x, frame.min.y));

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#).unwrap();
    writeln!(s, r#"<title>{} seed {} ({} steps)</title>"#, trace.planner, trace.seed, trace.steps).unwrap();
    writeln!(s, r##"<rect class="background" x="0" y="0" width="{w:.3}" height="{h:.3}" fill="#ffffff"/>"##).unwrap();
    for o in &trace.scenario.obstacles {
        let (cx, cy) = frame.px(&o.center);
        writeln!(s, r##"<circle class="obstacle" cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="#808080"/>"##, o.radius * PX_PER_M).unwrap();
    }
    for (i, r) in trace.robots.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = String::new();
        for p in std::iter::once(&r.start).chain(&r.positions) {
            let (x, y) = frame.px(p);
            if !pts.is_empty() {
                pts.push(' ');
            }
            write!(pts, "{x:.3},{y:.3}").unwrap();
        }
        writeln!(s, r#"<polyline class="trajectory" data-robot="{i}" points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>"#).unwrap();
        let (sx, sy) = frame.px(&r.start);
        writeln!(s, r#"<rect class="start" x="{:.3}" y="{:.3}" width="8" height="8" fill="{color}"/>"#, sx - 4.0, sy - 4.0).unwrap();
        let (gx, gy) = frame.px(&r.goal);
        writeln!(
            s,
            r#"<path class="goal" d="M{:.3},{:.3} L{:.3},{:.3} M{:.3},{:.3} L{:.3},{:.3}" stroke="{color}" stroke-width="2"/>"#,
            gx - 5.0, gy - 5.0, gx + 5.0, gy + 5.0, gx - 5.0, gy + 5.0, gx + 5.0, gy - 5.0
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

pub fn plot_comparison(table: &ComparisonTable) -> String {
    let summaries = table.summaries();
    let panels: [(&str, Vec<(f64, f64)>); 3] = [
        ("traveling distance l (m)", summaries.iter().map(|p| (p.l_mean, p.l_std)).collect()),
        ("motion smoothness xi", summaries.iter().map(|p| (p.xi_mean, p.xi_std)).collect()),
        ("success rate", summaries.iter().map(|p| (p.success_mean, p.success_std)).collect()),
    ];
    let n = summaries.len().max(1) as f64;
    let (panel_w, panel_h, bar_w, top, base) = (60.0 + 70.0 * n, 260.0, 40.0, 40.0, 220.0);
    let width = panel_w * 3.0;

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{panel_h:.0}" viewBox="0 0 {width:.3} {panel_h:.3}">"#).unwrap();
    writeln!(s, r##"<rect class="background" x="0" y="0" width="{width:.3}" height="{panel_h:.3}" fill="#ffffff"/>"##).unwrap();
    for (k, (title, values)) in panels.iter().enumerate() {
        let x0 = k as f64 * panel_w;
        let peak = values.iter().map(|(m, sd)| m + sd).filter(|v| v.is_finite()).fold(0.0, f64::max);
        let scale = if peak > 0.0 { (base - top) / peak } else { 0.0 };
        writeln!(s, r#"<g class="panel" data-metric="{k}">"#).unwrap();
        writeln!(s, r#"<text x="{:.3}" y="20" font-size="13" text-anchor="middle">{title}</text>"#, x0 + panel_w / 2.0).unwrap();
        writeln!(s, r##"<line class="axis" x1="{:.3}" y1="{base:.3}" x2="{:.3}" y2="{base:.3}" stroke="#000000"/>"##, x0 + 20.0, x0 + panel_w - 10.0).unwrap();
        for (i, ((mean, sd), p)) in values.iter().zip(&summaries).enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let bx = x0 + 40.0 + 70.0 * i as f64;
            let m = if mean.is_finite() { *mean } else { 0.0 };
            let bh = m * scale;
            writeln!(
                s,
                r#"<rect class="bar" data-planner="{}" x="{bx:.3}" y="{:.3}" width="{bar_w:.3}" height="{bh:.3}" fill="{color}"/>"#,
                p.planner,
                base - bh
            )
            .unwrap();
            if sd.is_finite() && *sd > 0.0 {
                let cx = bx + bar_w / 2.0;
                writeln!(
                    s,
                    r##"<line class="error" x1="{cx:.3}" y1="{:.3}" x2="{cx:.3}" y2="{:.3}" stroke="#000000"/>"##,
                    base - (m + sd) * scale,
                    base - (m - sd).max(0.0) * scale
                )
                .unwrap();
            }
            writeln!(
                s,
                r#"<text x="{:.3}" y="{:.3}" font-size="10" text-anchor="middle">{}</text>"#,
                bx + bar_w / 2.0,
                base + 14.0,
                p.planner
            )
            .unwrap();
            writeln!(s, r#"<text x="{:.3}" y="{:.3}" font-size="10" text-anchor="middle">{m:.3}</text>"#, bx + bar_w / 2.0, base - bh - 4.0).unwrap();
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apf::ApfConfig;
    use crate::eval::{compare, run_episode, Planner};
    use crate::world::{sample_scenario, ScenarioKind, ScenarioSampler, WorldConfig};

    #[test]
    fn circle_swap_has_one_polyline_per_robot() {
        let s = sample_scenario(ScenarioKind::CircleSwap, 8, 2).unwrap();
        let cfg = WorldConfig { max_steps: 60, ..Default::default() };
        let t = run_episode(&s, &Planner::vanilla(), &cfg, &ApfConfig::default(), 2).unwrap();
        let svg = plot_trace(&t);
        assert_eq!(svg.matches(r#"class="trajectory""#).count(), 8);
        assert_eq!(svg.matches(r#"class="start""#).count(), 8);
        assert_eq!(svg.matches(r#"class="obstacle""#).count(), 0);
        assert_eq!(svg, plot_trace(&t));
    }

    #[test]
    fn one_disc_per_obstacle() {
        let s = sample_scenario(ScenarioKind::Cluttered, 3, 5).unwrap();
        let cfg = WorldConfig { max_steps: 30, ..Default::default() };
        let t = run_episode(&s, &Planner::vanilla(), &cfg, &ApfConfig::default(), 5).unwrap();
        assert_eq!(plot_trace(&t).matches(r#"class="obstacle""#).count(), s.obstacles.len());
    }

    #[test]
    fn comparison_bars() {
        let sampler = ScenarioSampler::new(ScenarioKind::CircleSwap, 3);
        let cfg = WorldConfig { max_steps: 100, ..Default::default() };
        let t = compare(&[Planner::vanilla()], &sampler.into(), &[1, 2], &cfg, &ApfConfig::default(), |_| {});
        let svg = plot_comparison(&t);
        assert_eq!(svg.matches(r#"class="bar""#).count(), 3);
        assert_eq!(svg, plot_comparison(&t));
    }
}
