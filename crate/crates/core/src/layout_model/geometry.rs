//! Polygons and polygon overlap.
//!
//! Intersection area of two arbitrary simple polygons is computed from signed
//! fan decompositions: each polygon's winding-number indicator equals the
//! signed sum of the triangles `(v0, v_k, v_k+1)`, so the overlap integral
//! becomes a signed sum of triangle-triangle intersections. Triangle pairs are
//! convex, which makes Sutherland-Hodgman clipping exact for them. Concave
//! and mutually crossing regions are handled without any bounding-box
//! approximation.

use serde::{Deserialize, Serialize};

use super::LayoutError;

pub type Point = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    fn of(points: &[Point]) -> Self {
        let mut b = BBox {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for &(x, y) in points {
            b.min_x = b.min_x.min(x);
            b.min_y = b.min_y.min(y);
            b.max_x = b.max_x.max(x);
            b.max_y = b.max_y.max(y);
        }
        b
    }

    pub fn overlaps(&self, other: &BBox) -> bool {
        self.min_x < other.max_x && other.min_x < self.max_x && self.min_y < other.max_y && other.min_y < self.max_y
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

/// Closed polygon in pixel coordinates. The closing edge is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl TryFrom<Vec<[f64; 2]>> for Polygon {
    type Error = LayoutError;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self, Self::Error> {
        Polygon::new(v.into_iter().map(|[x, y]| (x, y)).collect())
    }
}

impl From<Polygon> for Vec<[f64; 2]> {
    fn from(p: Polygon) -> Self {
        p.vertices.into_iter().map(|(x, y)| [x, y]).collect()
    }
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self, LayoutError> {
        if vertices.len() < 3 {
            return Err(LayoutError::InvalidCoords(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(LayoutError::InvalidCoords("non-finite coordinate".into()));
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle from its corner and size.
    pub fn rect(x: f64, y: f64, w: f64, h: f64) -> Result<Self, LayoutError> {
        Self::new(vec![(x, y), (x + w, y), (x + w, y + h), (x, y + h)])
    }

    /// Parses the PAGE `points` attribute: `"x,y x,y ..."`.
    pub fn parse_points(s: &str) -> Result<Self, LayoutError> {
        let mut vertices = Vec::new();
        for pair in s.split_whitespace() {
            let (x, y) = pair
                .split_once(',')
                .ok_or_else(|| LayoutError::InvalidCoords(format!("bad point {pair:?}")))?;
            let x: f64 = x
                .trim()
                .parse()
                .map_err(|_| LayoutError::InvalidCoords(format!("bad x in {pair:?}")))?;
            let y: f64 = y
                .trim()
                .parse()
                .map_err(|_| LayoutError::InvalidCoords(format!("bad y in {pair:?}")))?;
            vertices.push((x, y));
        }
        Self::new(vertices)
    }

    pub fn to_points_string(&self) -> String {
        self.vertices
            .iter()
            .map(|(x, y)| format!("{x},{y}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Shoelace area; positive for counter-clockwise in a y-up frame.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let (ox, oy) = self.vertices[0];
        let mut acc = 0.0;
        for i in 0..n {
            let (x1, y1) = self.vertices[i];
            let (x2, y2) = self.vertices[(i + 1) % n];
            acc += (x1 - ox) * (y2 - oy) - (x2 - ox) * (y1 - oy);
        }
        acc / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Same polygon with counter-clockwise orientation.
    pub fn normalized(&self) -> Polygon {
        let mut vertices = self.vertices.clone();
        if self.signed_area() < 0.0 {
            vertices.reverse();
        }
        Polygon { vertices }
    }

    pub fn bbox(&self) -> BBox {
        BBox::of(&self.vertices)
    }

    pub fn is_degenerate(&self) -> bool {
        let b = self.bbox();
        let scale = b.width() * b.width() + b.height() * b.height();
        self.area() <= 1e-12 * scale || self.area() == 0.0
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|(x, y)| (x + dx, y + dy)).collect(),
        }
    }

    pub fn scaled(&self, sx: f64, sy: f64) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|(x, y)| (x * sx, y * sy)).collect(),
        }
    }

    /// True when every vertex lies in `[0, width] x [0, height]`.
    pub fn within(&self, width: f64, height: f64) -> bool {
        self.vertices
            .iter()
            .all(|&(x, y)| (0.0..=width).contains(&x) && (0.0..=height).contains(&y))
    }

    fn fan(&self) -> impl Iterator<Item = (f64, [Point; 3])> + '_ {
        let v0 = self.vertices[0];
        self.vertices.windows(2).skip(1).filter_map(move |w| {
            let tri = [v0, w[0], w[1]];
            let s = cross(v0, w[0], w[1]);
            if s == 0.0 {
                return None;
            }
            let tri = if s > 0.0 { tri } else { [tri[0], tri[2], tri[1]] };
            Some((s.signum(), tri))
        })
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn ring_area(points: &[Point]) -> f64 {
    if points.len() < 3 {
        return 0.0;
    }
    let o = points[0];
    let mut acc = 0.0;
    for w in points.windows(2).skip(1) {
        acc += cross(o, w[0], w[1]);
    }
    acc / 2.0
}

/// Area of the intersection of two counter-clockwise triangles.
fn triangle_overlap(subject: &[Point; 3], clip: &[Point; 3]) -> f64 {
    let mut output: Vec<Point> = subject.to_vec();
    let mut input = Vec::with_capacity(8);
    for i in 0..3 {
        let a = clip[i];
        let b = clip[(i + 1) % 3];
        std::mem::swap(&mut input, &mut output);
        output.clear();
        let n = input.len();
        if n == 0 {
            break;
        }
        for j in 0..n {
            let cur = input[j];
            let prev = input[(j + n - 1) % n];
            let cur_in = cross(a, b, cur) >= 0.0;
            let prev_in = cross(a, b, prev) >= 0.0;
            if cur_in {
                if !prev_in {
                    output.push(segment_line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(segment_line_intersection(prev, cur, a, b));
            }
        }
    }
    ring_area(&output).max(0.0)
}

fn segment_line_intersection(p: Point, q: Point, a: Point, b: Point) -> Point {
    let dp = cross(a, b, p);
    let dq = cross(a, b, q);
    let t = dp / (dp - dq);
    (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
}

fn tri_bbox(t: &[Point; 3]) -> BBox {
    BBox::of(t)
}

/// Area of `a ∩ b` for simple polygons of either orientation.
pub fn intersection_area(a: &Polygon, b: &Polygon) -> f64 {
    if !a.bbox().overlaps(&b.bbox()) {
        return 0.0;
    }
    let orient = a.signed_area().signum() * b.signed_area().signum();
    if orient == 0.0 {
        return 0.0;
    }
    let fan_b: Vec<(f64, [Point; 3], BBox)> = b.fan().map(|(s, t)| (s, t, tri_bbox(&t))).collect();
    let mut total = 0.0;
    for (sa, ta) in a.fan() {
        let ba = tri_bbox(&ta);
        for (sb, tb, bb) in &fan_b {
            if !ba.overlaps(bb) {
                continue;
            }
            total += sa * sb * triangle_overlap(&ta, tb);
        }
    }
    (total * orient).clamp(0.0, a.area().min(b.area()))
}

/// Intersection over union of the two polygon areas.
pub fn polygon_iou(a: &Polygon, b: &Polygon) -> Result<f64, LayoutError> {
    if a.is_degenerate() || b.is_degenerate() {
        return Err(LayoutError::DegeneratePolygon);
    }
    let inter = intersection_area(a, b);
    if inter == 0.0 {
        return Ok(0.0);
    }
    let union = a.area() + b.area() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x: f64, y: f64, s: f64) -> Polygon {
        Polygon::rect(x, y, s, s).unwrap()
    }

    #[test]
    fn identical_squares() {
        let a = square(0.0, 0.0, 1.0);
        assert!((polygon_iou(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_squares() {
        let a = square(0.0, 0.0, 1.0);
        let b = square(3.0, 0.0, 1.0);
        assert_eq!(polygon_iou(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn half_shift_is_one_third() {
        // overlap 0.5, union 1.5
        let a = square(0.0, 0.0, 1.0);
        let b = square(0.5, 0.0, 1.0);
        assert!((polygon_iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn orientation_does_not_matter() {
        let a = square(0.0, 0.0, 2.0);
        let b = Polygon::new(vec![(1.0, 1.0), (1.0, 3.0), (3.0, 3.0), (3.0, 1.0)]).unwrap();
        assert!(b.signed_area() < 0.0);
        assert!((intersection_area(&a, &b) - 1.0).abs() < 1e-12);
        assert!((intersection_area(&b, &a) - 1.0).abs() < 1e-12);
        assert!(b.normalized().signed_area() > 0.0);
    }

    #[test]
    fn concave_polygon_overlap() {
        // U shape: 3x3 square minus the 1x2 notch at x in [1,2], y in [1,3].
        let u = Polygon::new(vec![
            (0.0, 0.0),
            (3.0, 0.0),
            (3.0, 3.0),
            (2.0, 3.0),
            (2.0, 1.0),
            (1.0, 1.0),
            (1.0, 3.0),
            (0.0, 3.0),
        ])
        .unwrap();
        assert!((u.area() - 7.0).abs() < 1e-12);
        let notch = Polygon::rect(1.0, 1.0, 1.0, 2.0).unwrap();
        assert!(intersection_area(&u, &notch).abs() < 1e-12);
        let bar = Polygon::rect(0.0, 2.0, 3.0, 1.0).unwrap();
        assert!((intersection_area(&u, &bar) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn crossing_bars() {
        let h = Polygon::rect(0.0, 1.0, 3.0, 1.0).unwrap();
        let v = Polygon::rect(1.0, 0.0, 1.0, 3.0).unwrap();
        assert!((intersection_area(&h, &v) - 1.0).abs() < 1e-12);
        assert!((polygon_iou(&h, &v).unwrap() - 1.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_is_error() {
        let line = Polygon::new(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).unwrap();
        let a = square(0.0, 0.0, 1.0);
        assert!(matches!(polygon_iou(&line, &a), Err(LayoutError::DegeneratePolygon)));
    }

    #[test]
    fn points_round_trip() {
        let p = Polygon::parse_points("10,20 30.5,20 30.5,40 10,40").unwrap();
        assert_eq!(Polygon::parse_points(&p.to_points_string()).unwrap(), p);
        assert!(Polygon::parse_points("1,2 3,4").is_err());
        assert!(Polygon::parse_points("1,2 3;4 5,6").is_err());
    }
}
