//! Oriented 3D box geometry: the 7-DoF encoding and its inverse, point
//! containment, vertex labeling, rotated-rectangle IoU and the occlusion
//! factor used by box scoring.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::ClassSpec;
use crate::pointcloud::PointCloud;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

/// 7-degree-of-freedom oriented box: center, (length, height, width), yaw
/// about the vertical (z) axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    pub center: [f64; 3],
    pub size: [f64; 3], // (l, h, w)
    pub yaw: f64,
}

/// Dimensionless encoded box deltas relative to a vertex and class constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodedBox {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dl: f64,
    pub dh: f64,
    pub dw: f64,
    pub dtheta: f64,
}

impl EncodedBox {
    pub fn zero() -> Self {
        EncodedBox {
            dx: 0.0,
            dy: 0.0,
            dz: 0.0,
            dl: 0.0,
            dh: 0.0,
            dw: 0.0,
            dtheta: 0.0,
        }
    }

    pub fn to_array(self) -> [f64; 7] {
        [self.dx, self.dy, self.dz, self.dl, self.dh, self.dw, self.dtheta]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        EncodedBox {
            dx: a[0],
            dy: a[1],
            dz: a[2],
            dl: a[3],
            dh: a[4],
            dw: a[5],
            dtheta: a[6],
        }
    }
}

/// Per-class scale constants for the box encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxConstants {
    pub l_m: f64,
    pub h_m: f64,
    pub w_m: f64,
    pub theta0: f64,
    pub theta_m: f64,
}

/// Class assignment for one graph vertex, with the regression target when
/// the vertex sits inside a localized-class box.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexLabel {
    pub class: usize,
    /// (encoded target, index of the winning ground-truth box)
    pub target: Option<(EncodedBox, usize)>,
}

impl Box3D {
    pub fn new(center: [f64; 3], size: [f64; 3], yaw: f64) -> Self {
        Box3D { center, size, yaw }
    }

    pub fn volume(&self) -> f64 {
        self.size[0] * self.size[1] * self.size[2]
    }

    /// Unit axes (length, width, height directions) for this yaw.
    pub fn axes(&self) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let (s, c) = self.yaw.sin_cos();
        ([c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0])
    }

    /// BEV footprint corners in the horizontal plane, counter-clockwise.
    pub fn bev_corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let (hl, hw) = (self.size[0] / 2.0, self.size[2] / 2.0);
        let (cx, cy) = (self.center[0], self.center[1]);
        let mut out = [[0.0; 2]; 4];
        for (k, (du, dv)) in [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)]
            .into_iter()
            .enumerate()
        {
            out[k] = [cx + c * du - s * dv, cy + s * du + c * dv];
        }
        out
    }
}

/// Map a yaw into [-pi/4, 3pi/4) modulo pi, so the side-view and front-view
/// bins partition all orientations.
pub fn normalize_yaw(theta: f64) -> f64 {
    theta - PI * ((theta + FRAC_PI_4) / PI).floor()
}

/// Encode a box relative to a vertex: positional deltas scaled by
/// (l_m, h_m, w_m), log size ratios, normalized yaw offset over theta_m.
pub fn encode_box(b: &Box3D, vertex: [f64; 3], k: &BoxConstants) -> Result<EncodedBox> {
    if b.size.iter().any(|&s| s <= 0.0) {
        return Err(Error::argument("box sizes must be positive"));
    }
    if k.l_m <= 0.0 || k.h_m <= 0.0 || k.w_m <= 0.0 || k.theta_m <= 0.0 {
        return Err(Error::argument("constants must be positive"));
    }
    Ok(EncodedBox {
        dx: (b.center[0] - vertex[0]) / k.l_m,
        dy: (b.center[1] - vertex[1]) / k.h_m,
        dz: (b.center[2] - vertex[2]) / k.w_m,
        dl: (b.size[0] / k.l_m).ln(),
        dh: (b.size[1] / k.h_m).ln(),
        dw: (b.size[2] / k.w_m).ln(),
        dtheta: (normalize_yaw(b.yaw) - k.theta0) / k.theta_m,
    })
}

/// Exact algebraic inverse of `encode_box`.
pub fn decode_box(e: &EncodedBox, vertex: [f64; 3], k: &BoxConstants) -> Box3D {
    Box3D {
        center: [
            e.dx * k.l_m + vertex[0],
            e.dy * k.h_m + vertex[1],
            e.dz * k.w_m + vertex[2],
        ],
        size: [k.l_m * e.dl.exp(), k.h_m * e.dh.exp(), k.w_m * e.dw.exp()],
        yaw: e.dtheta * k.theta_m + k.theta0,
    }
}

/// Containment with inclusive boundaries, evaluated in the box frame.
pub fn point_in_box(p: [f64; 3], b: &Box3D) -> bool {
    let dx = p[0] - b.center[0];
    let dy = p[1] - b.center[1];
    let dz = p[2] - b.center[2];
    let (s, c) = b.yaw.sin_cos();
    let u = c * dx + s * dy;
    let v = -s * dx + c * dy;
    u.abs() <= b.size[0] / 2.0 && v.abs() <= b.size[2] / 2.0 && dz.abs() <= b.size[1] / 2.0
}

/// Assign each vertex a class (plus an encoded regression target for
/// localized classes). Overlaps resolve toward the smallest-volume box.
/// `gt_boxes` pair each box with its base class name (e.g. "Car" or
/// "DoNotCare"); the yaw bin selects the side-view or front-view subclass.
pub fn assign_vertex_labels(
    vertices: &PointCloud,
    gt_boxes: &[(Box3D, String)],
    spec: &ClassSpec,
) -> Vec<VertexLabel> {
    vertices
        .points
        .iter()
        .map(|p| {
            let mut winner: Option<usize> = None;
            for (gi, (b, _)) in gt_boxes.iter().enumerate() {
                if point_in_box(p.position, b) {
                    let smaller = winner
                        .map(|w| b.volume() < gt_boxes[w].0.volume())
                        .unwrap_or(true);
                    if smaller {
                        winner = Some(gi);
                    }
                }
            }
            match winner {
                None => VertexLabel {
                    class: spec.background,
                    target: None,
                },
                Some(gi) => {
                    let (b, base) = &gt_boxes[gi];
                    if base == spec.class_name(spec.do_not_care) {
                        return VertexLabel {
                            class: spec.do_not_care,
                            target: None,
                        };
                    }
                    let class = spec.subclass_for(base, b.yaw);
                    match class {
                        Some(ci) => {
                            let k = spec.constants(ci).expect("localized class");
                            let enc = encode_box(b, p.position, &k).expect("valid gt box");
                            VertexLabel {
                                class: ci,
                                target: Some((enc, gi)),
                            }
                        }
                        // unknown base class: treat as background
                        None => VertexLabel {
                            class: spec.background,
                            target: None,
                        },
                    }
                }
            }
        })
        .collect()
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut area = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        area += poly[i][0] * poly[j][1] - poly[j][0] * poly[i][1];
    }
    area.abs() / 2.0
}

/// Sutherland-Hodgman clip of a convex polygon against the half-plane on the
/// inner side of the directed edge a->b (counter-clockwise clip polygon).
fn clip_edge(poly: &[[f64; 2]], a: [f64; 2], b: [f64; 2]) -> Vec<[f64; 2]> {
    let inside = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let cur = poly[i];
        let prev = poly[(i + poly.len() - 1) % poly.len()];
        let cur_in = inside(cur);
        let prev_in = inside(prev);
        if cur_in != prev_in {
            // intersection of prev->cur with the clip line
            let d1 = (b[0] - a[0]) * (prev[1] - a[1]) - (b[1] - a[1]) * (prev[0] - a[0]);
            let d2 = (b[0] - a[0]) * (cur[1] - a[1]) - (b[1] - a[1]) * (cur[0] - a[0]);
            let t = d1 / (d1 - d2);
            out.push([
                prev[0] + t * (cur[0] - prev[0]),
                prev[1] + t * (cur[1] - prev[1]),
            ]);
        }
        if cur_in {
            out.push(cur);
        }
    }
    out
}

fn ensure_ccw(corners: &mut [[f64; 2]; 4]) {
    let mut area = 0.0;
    for i in 0..4 {
        let j = (i + 1) % 4;
        area += corners[i][0] * corners[j][1] - corners[j][0] * corners[i][1];
    }
    if area < 0.0 {
        corners.swap(0, 3);
        corners.swap(1, 2);
    }
}

/// Intersection area of the two yaw-rotated BEV footprints.
pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    let mut pa = a.bev_corners();
    let mut pb = b.bev_corners();
    ensure_ccw(&mut pa);
    ensure_ccw(&mut pb);
    let mut poly: Vec<[f64; 2]> = pa.to_vec();
    for i in 0..4 {
        let j = (i + 1) % 4;
        poly = clip_edge(&poly, pb[i], pb[j]);
        if poly.is_empty() {
            return 0.0;
        }
    }
    polygon_area(&poly)
}

/// IoU of the rotated rectangular footprints in the horizontal plane.
pub fn bev_iou(a: &Box3D, b: &Box3D) -> f64 {
    let inter = bev_intersection_area(a, b);
    let area_a = a.size[0] * a.size[2];
    let area_b = b.size[0] * b.size[2];
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Volumetric IoU: BEV intersection area times vertical overlap, over the
/// union of volumes.
pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    let inter_area = bev_intersection_area(a, b);
    let (za0, za1) = (a.center[2] - a.size[1] / 2.0, a.center[2] + a.size[1] / 2.0);
    let (zb0, zb1) = (b.center[2] - b.size[1] / 2.0, b.center[2] + b.size[1] / 2.0);
    let overlap = (za1.min(zb1) - za0.max(zb0)).max(0.0);
    let inter = inter_area * overlap;
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Occupied-volume ratio of the points inside the box: the product of the
/// point extents along the box axes over the box volume, clamped to [0,1].
/// Zero or one contained point gives 0.
pub fn occlusion_factor(b: &Box3D, points: &PointCloud) -> f64 {
    let (vl, vw, vh) = b.axes();
    let mut mins = [f64::INFINITY; 3];
    let mut maxs = [f64::NEG_INFINITY; 3];
    let mut count = 0usize;
    for p in &points.points {
        if !point_in_box(p.position, b) {
            continue;
        }
        count += 1;
        for (k, axis) in [vl, vw, vh].iter().enumerate() {
            let proj = axis[0] * p.position[0] + axis[1] * p.position[1] + axis[2] * p.position[2];
            mins[k] = mins[k].min(proj);
            maxs[k] = maxs[k].max(proj);
        }
    }
    if count <= 1 {
        return 0.0;
    }
    let mut product = 1.0;
    for k in 0..3 {
        product *= maxs[k] - mins[k];
    }
    (product / b.volume()).clamp(0.0, 1.0)
}

/// Parse the ground-truth/detection text format: one box per line,
/// `class x y z l h w yaw [score]`.
pub fn parse_boxes_text(text: &str) -> Result<Vec<(String, Box3D, Option<f64>)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 && fields.len() != 9 {
            return Err(Error::format(format!(
                "line {}: expected 8 or 9 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let mut vals = [0.0f64; 8];
        for k in 0..fields.len() - 1 {
            vals[k] = fields[k + 1].parse().map_err(|_| {
                Error::format(format!("line {}: bad number {:?}", lineno + 1, fields[k + 1]))
            })?;
        }
        let score = if fields.len() == 9 { Some(vals[7]) } else { None };
        out.push((
            fields[0].to_string(),
            Box3D::new([vals[0], vals[1], vals[2]], [vals[3], vals[4], vals[5]], vals[6]),
            score,
        ));
    }
    Ok(out)
}

pub fn boxes_to_text(boxes: &[(String, Box3D, Option<f64>)]) -> String {
    let mut out = String::new();
    for (class, b, score) in boxes {
        write!(
            out,
            "{class} {} {} {} {} {} {} {}",
            b.center[0], b.center[1], b.center[2], b.size[0], b.size[1], b.size[2], b.yaw
        )
        .unwrap();
        if let Some(s) = score {
            write!(out, " {s}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Standard constants for car-sized boxes: the side-view bin.
pub fn car_side_constants() -> BoxConstants {
    BoxConstants {
        l_m: 3.88,
        h_m: 1.5,
        w_m: 1.63,
        theta0: 0.0,
        theta_m: FRAC_PI_2,
    }
}

/// Standard constants for car-sized boxes: the front-view bin.
pub fn car_front_constants() -> BoxConstants {
    BoxConstants {
        theta0: FRAC_PI_2,
        ..car_side_constants()
    }
}
