//! Static SVG drawings of scenarios, plans and roadmaps.

use std::fmt::Write;

use rades_core::geometry::{OrientedRect, Point2};
use rades_core::planner::PlanExport;
use rades_core::roadmap::{Layer, LatticeRoadmap};
use rades_core::scenario::Scenario;

pub const CANVAS: f64 = 800.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
];

/// Stable color for a robot id.
pub fn robot_color(id: u32) -> &'static str {
    PALETTE[(id as usize + PALETTE.len() - 1) % PALETTE.len()]
}

/// What to draw besides the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderSpec {
    pub references: bool,
    /// Footprints every this many time units along each path; 0 draws none.
    pub footprint_every: usize,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            references: true,
            footprint_every: 4,
        }
    }
}

struct Canvas {
    out: String,
    scale: f64,
    height: f64,
}

impl Canvas {
    fn new(s: &Scenario) -> Canvas {
        let scale = CANVAS / s.env.width.max(s.env.height);
        let (w, h) = (s.env.width * scale, s.env.height * scale);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
        );
        let _ = writeln!(out, "<title>{}</title>", escape(&s.name));
        let _ = writeln!(out, r##"<rect class="map" x="0" y="0" width="{w:.2}" height="{h:.2}" fill="#f4f4f0"/>"##);
        let mut c = Canvas { out, scale, height: s.env.height };
        for ob in &s.env.obstacles {
            let pts = c.points(ob.vertices().iter().copied());
            let _ = writeln!(c.out, r##"<polygon class="obstacle" points="{pts}" fill="#9a9a9a"/>"##);
        }
        c
    }

    fn xy(&self, p: Point2) -> (f64, f64) {
        (p.x * self.scale, (self.height - p.y) * self.scale)
    }

    fn points(&self, pts: impl Iterator<Item = Point2>) -> String {
        let mut s = String::new();
        for p in pts {
            let (x, y) = self.xy(p);
            if !s.is_empty() {
                s.push(' ');
            }
            let _ = write!(s, "{x:.2},{y:.2}");
        }
        s
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn draw_references(c: &mut Canvas, s: &Scenario) {
    for r in &s.robots {
        let pts = c.points(r.reference.points().iter().copied());
        let _ = writeln!(
            c.out,
            r#"<polyline class="reference" points="{pts}" fill="none" stroke="{}" stroke-width="1" stroke-dasharray="4 3" opacity="0.6"/>"#,
            robot_color(r.id)
        );
    }
}

/// Map, obstacles, references and one colored path per robot of `plan`.
pub fn trajectories_svg(s: &Scenario, plan: &PlanExport, spec: RenderSpec) -> String {
    let mut c = Canvas::new(s);
    if spec.references {
        draw_references(&mut c, s);
    }
    for track in &plan.robots {
        let color = robot_color(track.id);
        let pts = c.points(track.samples.iter().map(|p| Point2::new(p.x, p.y)));
        let _ = writeln!(
            c.out,
            r#"<polyline class="path" data-robot="{}" points="{pts}" fill="none" stroke="{color}" stroke-width="2.5"/>"#,
            track.id
        );
        if spec.footprint_every > 0 {
            let mut next = 0.0;
            for p in &track.samples {
                if p.t + 1e-9 < next {
                    continue;
                }
                next = p.t + spec.footprint_every as f64;
                let body = OrientedRect {
                    center: Point2::new(p.x, p.y),
                    heading: p.theta,
                    length: s.robot_length,
                    width: s.robot_width,
                };
                let pts = c.points(body.corners().into_iter());
                let _ = writeln!(
                    c.out,
                    r#"<polygon class="footprint" points="{pts}" fill="{color}" fill-opacity="0.25" stroke="{color}" stroke-width="0.5"/>"#
                );
            }
        }
    }
    c.finish()
}

/// Map, the robot's reference and every vertex and edge of `rm`.
pub fn roadmap_svg(s: &Scenario, robot: u32, rm: &LatticeRoadmap) -> String {
    let mut c = Canvas::new(s);
    if let Some(r) = s.robot(robot) {
        let pts = c.points(r.reference.points().iter().copied());
        let _ = writeln!(
            c.out,
            r##"<polyline class="reference" points="{pts}" fill="none" stroke="#444" stroke-width="1" stroke-dasharray="4 3"/>"##
        );
    }
    let color = robot_color(robot);
    for e in &rm.edges {
        let (x1, y1) = c.xy(rm.position(e.from));
        let (x2, y2) = c.xy(rm.position(e.to));
        let _ = writeln!(
            c.out,
            r#"<line class="edge" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{color}" stroke-width="0.6" opacity="0.7"/>"#
        );
    }
    for v in &rm.vertices {
        let (x, y) = c.xy(v.pose.position);
        let fill = match v.layer {
            Layer::Mid => "#000",
            Layer::Above | Layer::Below => color,
        };
        let _ = writeln!(
            c.out,
            r#"<circle class="vertex" cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{fill}"/>"#
        );
    }
    c.finish()
}
