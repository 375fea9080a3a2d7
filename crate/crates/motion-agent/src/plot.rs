//! SVG plots of per-joint world trajectories.

use std::fmt::Write;

use motion_agent_core::MotionSequence;

const PANEL_W: f64 = 220.0;
const PANEL_H: f64 = 110.0;
const PAD: f64 = 14.0;
const COLUMNS: usize = 5;
const AXIS_COLORS: [&str; 3] = ["#d62728", "#2ca02c", "#1f77b4"];

/// One panel per joint with x, y and z against time. `boundaries` are frame
/// indices drawn as dashed vertical lines.
pub fn trajectory_svg(motion: &MotionSequence, title: &str, boundaries: &[usize]) -> String {
    let fk = motion.forward_kinematics();
    let joints = motion.skeleton().parent.len();
    let frames = motion.num_frames();
    let rows = joints.div_ceil(COLUMNS);
    let width = COLUMNS as f64 * (PANEL_W + PAD) + PAD;
    let height = rows as f64 * (PANEL_H + PAD) + PAD + 24.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{PAD}" y="16" font-size="13">{}</text>"#, escape(title));
    let tx = |t: usize| if frames > 1 { t as f64 / (frames - 1) as f64 * PANEL_W } else { 0.0 };
    for j in 0..joints {
        let ox = PAD + (j % COLUMNS) as f64 * (PANEL_W + PAD);
        let oy = 24.0 + PAD + (j / COLUMNS) as f64 * (PANEL_H + PAD);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for t in 0..frames {
            for v in fk.joint(t, j) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !(hi - lo).is_finite() || hi - lo < 1e-6 {
            lo -= 0.5;
            hi += 0.5;
        }
        let ty = |v: f64| PANEL_H - (v - lo) / (hi - lo) * PANEL_H;
        let _ = writeln!(s, r#"<g transform="translate({ox:.1},{oy:.1})">"#);
        let _ = writeln!(s, r##"<rect width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#bbb"/>"##);
        let _ = writeln!(s, r#"<text x="3" y="11">joint {j}</text>"#);
        for &b in boundaries.iter().filter(|&&b| b < frames) {
            let x = tx(b);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="0" x2="{x:.2}" y2="{PANEL_H}" stroke="#888" stroke-dasharray="3,3"/>"##
            );
        }
        for (axis, color) in AXIS_COLORS.iter().enumerate() {
            let mut points = String::new();
            for t in 0..frames {
                let _ = write!(points, "{:.2},{:.2} ", tx(t), ty(fk.joint(t, j)[axis]));
            }
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1"/>"#,
                points.trim_end()
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
