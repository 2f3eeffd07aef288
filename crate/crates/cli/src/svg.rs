//! Top-view (x–y) drawings of the mechanism with its CoM and centroidal frame.

use std::fmt::Write;

use centroidal_core::kinematics::{com, forward_kinematics};
use centroidal_core::model::{Model, State};
use centroidal_core::spatial::Vec3;
use centroidal_core::Transform;

#[derive(Clone, Copy, Debug)]
pub struct Bounds {
    min: [f64; 2],
    max: [f64; 2],
}

impl Bounds {
    pub fn empty() -> Self {
        Self {
            min: [f64::INFINITY; 2],
            max: [f64::NEG_INFINITY; 2],
        }
    }

    pub fn include(&mut self, p: &Vec3) {
        for k in 0..2 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    /// Every point drawn for `state`.
    pub fn include_state(&mut self, model: &Model, state: &State) {
        if let Ok(fk) = forward_kinematics(model, state) {
            for (i, (_, pose)) in fk.iter().enumerate() {
                self.include(&pose.origin);
                self.include(&pose.transform_point(&model.link_inertia(i).com));
            }
        }
    }

    fn padded(&self, pad: f64) -> ([f64; 2], [f64; 2]) {
        let mut lo = self.min;
        let mut hi = self.max;
        for k in 0..2 {
            if !lo[k].is_finite() || !hi[k].is_finite() {
                lo[k] = -1.0;
                hi[k] = 1.0;
            }
            lo[k] -= pad;
            hi[k] += pad;
        }
        (lo, hi)
    }
}

const PX_PER_M: f64 = 100.0;

pub fn snapshot(
    model: &Model,
    state: &State,
    frame: &Transform,
    t: f64,
    bounds: &Bounds,
) -> String {
    let (lo, hi) = bounds.padded(1.0);
    let (w, h) = ((hi[0] - lo[0]) * PX_PER_M, (hi[1] - lo[1]) * PX_PER_M);
    let px = |p: &Vec3| ((p.x - lo[0]) * PX_PER_M, (hi[1] - p.y) * PX_PER_M);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="10" y="24" font-family="sans-serif" font-size="18">t = {t:.3} s</text>"#
    );

    let Ok(fk) = forward_kinematics(model, state) else {
        out.push_str("</svg>\n");
        return out;
    };
    let poses: Vec<Transform> = fk.iter().map(|(_, p)| *p).collect();
    let line = |out: &mut String, a: &Vec3, b: &Vec3, color: &str, width: f64| {
        let ((x1, y1), (x2, y2)) = (px(a), px(b));
        let _ = writeln!(
            out,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{color}" stroke-width="{width}" stroke-linecap="round"/>"#
        );
    };

    // Base body as a square around its origin.
    let base = &poses[model.base_index()];
    let corners: Vec<String> = [(-0.3, -0.3), (0.3, -0.3), (0.3, 0.3), (-0.3, 0.3)]
        .iter()
        .map(|&(x, y)| {
            let (u, v) = px(&base.transform_point(&Vec3::new(x, y, 0.0)));
            format!("{u:.2},{v:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r##"<polygon points="{}" fill="#c8d6e5" stroke="#222f3e" stroke-width="2"/>"##,
        corners.join(" ")
    );

    for (i, pose) in poses.iter().enumerate() {
        let Some(parent) = model.parent_link(i) else {
            continue;
        };
        let link_com = pose.transform_point(&model.link_inertia(i).com);
        line(
            &mut out,
            &poses[parent].origin,
            &pose.origin,
            "#576574",
            3.0,
        );
        line(&mut out, &pose.origin, &link_com, "#222f3e", 6.0);
        let (cx, cy) = px(&link_com);
        let (jx, jy) = px(&pose.origin);
        let _ = writeln!(
            out,
            r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="8" fill="#8395a7"/>"##
        );
        let _ = writeln!(
            out,
            r##"<circle cx="{jx:.2}" cy="{jy:.2}" r="5" fill="white" stroke="#222f3e" stroke-width="2"/>"##
        );
    }

    if let Ok(p) = com(model, state) {
        let (cx, cy) = px(&p);
        let _ = writeln!(
            out,
            r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="9" fill="none" stroke="black" stroke-width="2"/>"##
        );
        let _ = writeln!(
            out,
            r##"<path d="M{} {cy:.2}h18M{cx:.2} {}v18" stroke="black" stroke-width="2"/>"##,
            cx - 9.0,
            cy - 9.0
        );
    }

    for (axis, color) in [
        (Vec3::x(), "#ee5253"),
        (Vec3::y(), "#10ac84"),
        (Vec3::z(), "#2e86de"),
    ] {
        let tip = frame.origin + frame.rotation * axis * 0.8;
        line(&mut out, &frame.origin, &tip, color, 3.0);
    }
    out.push_str("</svg>\n");
    out
}
