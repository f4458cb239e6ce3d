//! Static SVG renderings in millimeters, y pointing up.

use std::fmt::Write;

use imp_core::energy::FieldSample;
use imp_core::numfmt::fmt9;
use imp_core::sim::TickRecord;
use imp_core::world::{ObjectBody, ObjectClass, WorldState};

struct Canvas {
    out: String,
    height_mm: f64,
}

impl Canvas {
    fn new(world: &WorldState) -> Self {
        let (w, h) = (world.table.width * 1000.0, world.table.height * 1000.0);
        let mut out = String::new();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}mm" height="{h}mm" viewBox="0 0 {} {}">"#,
            fmt9(w),
            fmt9(h)
        )
        .unwrap();
        Self { out, height_mm: h }
    }

    fn x(&self, x: f64) -> String {
        fmt9(x * 1000.0)
    }

    fn y(&self, y: f64) -> String {
        fmt9(self.height_mm - y * 1000.0)
    }

    fn group(&mut self, id: &str) {
        writeln!(self.out, r#"<g id="{id}">"#).unwrap();
    }

    fn end_group(&mut self) {
        self.out.push_str("</g>\n");
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, style: &str) {
        let line = format!(
            r#"<circle cx="{}" cy="{}" r="{}" {style}/>"#,
            self.x(cx),
            self.y(cy),
            fmt9(r * 1000.0)
        );
        self.out.push_str(&line);
        self.out.push('\n');
    }

    fn table(&mut self, world: &WorldState) {
        self.group("table");
        let line = format!(
            r##"<rect x="0" y="0" width="{}" height="{}" fill="#f4f1ea" stroke="#333" stroke-width="2"/>"##,
            fmt9(world.table.width * 1000.0),
            fmt9(self.height_mm)
        );
        self.out.push_str(&line);
        self.out.push('\n');
        self.end_group();
    }

    fn targets(&mut self, world: &WorldState) {
        self.group("targets");
        for t in &world.targets {
            self.circle(t.center.x, t.center.y, t.radius, r##"fill="#9fd49f" fill-opacity="0.5" stroke="#2a7a2a""##);
        }
        self.end_group();
    }

    fn objects(&mut self, id: &str, objects: &[ObjectBody], opacity: f64) {
        self.group(id);
        for o in objects {
            let fill = match (o.class_truth, o.toppled) {
                (_, true) => "#d08a3c",
                (ObjectClass::Fixed, _) => "#555555",
                (ObjectClass::Movable, _) => "#4a90c8",
            };
            let style = format!(r#"fill="{fill}" fill-opacity="{}" data-id="{}""#, fmt9(opacity), o.id);
            self.circle(o.pose().x, o.pose().y, o.disc.radius, &style);
        }
        self.end_group();
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

/// Table, objects at start and end, trajectory polyline and imagined-state
/// markers.
pub fn overview(start: &WorldState, end: &WorldState, trajectory: &[TickRecord]) -> String {
    let mut c = Canvas::new(start);
    c.table(start);
    c.targets(start);
    c.objects("objects_start", &start.objects, 0.35);
    c.objects("objects", &end.objects, 0.9);

    c.group("trajectory");
    let mut pts = format!("{},{}", c.x(start.robot.position.x), c.y(start.robot.position.y));
    for r in trajectory {
        write!(pts, " {},{}", c.x(r.position.x), c.y(r.position.y)).unwrap();
    }
    let line = format!(r##"<polyline points="{pts}" fill="none" stroke="#c0392b" stroke-width="2"/>"##);
    c.out.push_str(&line);
    c.out.push('\n');
    c.circle(
        start.robot.position.x,
        start.robot.position.y,
        start.robot.radius,
        r##"fill="none" stroke="#c0392b""##,
    );
    c.end_group();

    c.group("imagined");
    let mut last = None;
    for r in trajectory {
        if let Some(p) = r.imagined {
            if last != Some(p) {
                c.circle(p.x, p.y, 0.003, r##"fill="#8e44ad""##);
                last = Some(p);
            }
        }
    }
    c.end_group();
    c.finish()
}

/// Potential heat map with force arrows over the sampled local domain.
pub fn field(world: &WorldState, samples: &[FieldSample]) -> String {
    let mut c = Canvas::new(world);
    c.table(world);
    c.targets(world);
    c.objects("objects", &world.objects, 0.9);

    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.potential), hi.max(s.potential)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let step = if samples.len() > 1 {
        samples
            .windows(2)
            .map(|w| ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    } else {
        0.01
    };
    c.group("potential");
    for s in samples {
        let t = (s.potential - lo) / span;
        let (r, b) = ((255.0 * t).round() as u8, (255.0 * (1.0 - t)).round() as u8);
        c.circle(s.x, s.y, step * 0.5, &format!(r#"fill="rgb({r},64,{b})" fill-opacity="0.6""#));
    }
    c.end_group();

    let fmax = samples.iter().map(|s| s.fx.hypot(s.fy)).fold(0.0, f64::max);
    c.group("force");
    if fmax > 0.0 {
        for s in samples.iter().step_by(3) {
            let k = 1.5 * step / fmax;
            let line = format!(
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#222" stroke-width="0.8"/>"##,
                c.x(s.x),
                c.y(s.y),
                c.x(s.x + s.fx * k),
                c.y(s.y + s.fy * k)
            );
            c.out.push_str(&line);
            c.out.push('\n');
        }
    }
    c.end_group();
    c.finish()
}
