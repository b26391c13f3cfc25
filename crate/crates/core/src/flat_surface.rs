//! Translation surfaces glued from convex polygons, with the double regular
//! (2g+1)-gon as the distinguished example.
//!
//! Cylinder decompositions are found by tracing every separatrix in the
//! chosen direction from the cone point until it lands on a vertex again.
//! The traced heights cut each polygon into trapezoidal strips; following the
//! gluings strip to strip closes up into cycles, and each cycle is one maximal
//! cylinder. Non-horizontal directions are handled by rotating the polygon
//! coordinates so the direction becomes horizontal.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rug::ops::Pow;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{to_decimal, Precision, Tolerance, Vec2};

/// Upper bound on polygon crossings for a single separatrix.
const MAX_TRACE_STEPS: usize = 100_000;

/// One side of a gluing: edge `edge` of polygon `polygon`, where edge `k`
/// runs from vertex `k` to vertex `k + 1` (mod the vertex count).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeRef {
    pub polygon: usize,
    pub edge: usize,
}

impl EdgeRef {
    pub fn new(polygon: usize, edge: usize) -> Self {
        EdgeRef { polygon, edge }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Gluing(pub EdgeRef, pub EdgeRef);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Horizontal,
    Vertical,
}

impl Direction {
    pub fn angle(self, prec: Precision) -> Float {
        match self {
            Direction::Horizontal => prec.zero(),
            Direction::Vertical => prec.pi() / 2u32,
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "horizontal" | "h" => Ok(Direction::Horizontal),
            "vertical" | "v" => Ok(Direction::Vertical),
            other => Err(Error::Parse(format!("unknown direction {other:?}"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Horizontal => f.write_str("horizontal"),
            Direction::Vertical => f.write_str("vertical"),
        }
    }
}

/// Name of a cylinder core curve. Indices are 1-based.
///
/// `A` and `B` are the horizontal and vertical multicurves; `C` labels cores
/// in any other periodic direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CurveLabel {
    A(usize),
    B(usize),
    C(usize),
}

impl CurveLabel {
    pub fn index(self) -> usize {
        match self {
            CurveLabel::A(i) | CurveLabel::B(i) | CurveLabel::C(i) => i,
        }
    }
}

impl fmt::Display for CurveLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveLabel::A(i) => write!(f, "a_{i}"),
            CurveLabel::B(i) => write!(f, "b_{i}"),
            CurveLabel::C(i) => write!(f, "c_{i}"),
        }
    }
}

/// A maximal flat cylinder in a fixed direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder {
    /// Angle of the core direction in `[0, pi)`.
    pub direction: Float,
    pub label: CurveLabel,
    pub circumference: Float,
    pub height: Float,
}

impl Cylinder {
    pub fn modulus(&self) -> Float {
        Float::with_val(self.height.prec(), &self.height / &self.circumference)
    }

    pub fn area(&self) -> Float {
        Float::with_val(self.height.prec(), &self.height * &self.circumference)
    }

    /// Holonomy of the core curve, oriented along the direction angle.
    pub fn holonomy(&self) -> Vec2 {
        let (s, c) = self
            .direction
            .clone()
            .sin_cos(Float::new(self.direction.prec()));
        Vec2::new(c, s).scale(&self.circumference)
    }
}

/// A cone point of the flat metric: an equivalence class of polygon corners.
#[derive(Debug, Clone)]
pub struct ConePoint {
    /// Corners `(polygon, vertex)` identified to this point.
    pub corners: Vec<(usize, usize)>,
    /// Total cone angle.
    pub angle: Float,
    /// Cone angle as a multiple of `2 pi`.
    pub multiple: usize,
}

/// A translation surface: convex counterclockwise polygons with every edge
/// glued by a translation to a parallel edge of opposite orientation.
#[derive(Clone)]
pub struct TranslationSurface {
    genus: usize,
    polygons: Vec<Vec<Vec2>>,
    gluings: Vec<Gluing>,
    partner: BTreeMap<EdgeRef, EdgeRef>,
    cone_points: Vec<ConePoint>,
    prec: Precision,
    tol: Tolerance,
}

impl fmt::Debug for TranslationSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TranslationSurface")
            .field("genus", &self.genus)
            .field("polygons", &self.polygons)
            .field("gluings", &self.gluings)
            .finish()
    }
}

impl TranslationSurface {
    /// Validates and assembles a surface.
    pub fn new(
        genus: usize,
        polygons: Vec<Vec<Vec2>>,
        gluings: Vec<Gluing>,
        prec: Precision,
        tol: Tolerance,
    ) -> Result<Self> {
        if polygons.is_empty() {
            return Err(Error::InvalidSurface("no polygons".into()));
        }
        for (p, poly) in polygons.iter().enumerate() {
            check_convex(p, poly, tol)?;
        }

        let mut partner = BTreeMap::new();
        for &Gluing(a, b) in &gluings {
            for e in [a, b] {
                let poly = polygons.get(e.polygon).ok_or_else(|| {
                    Error::InvalidSurface(format!("gluing names missing polygon {}", e.polygon))
                })?;
                if e.edge >= poly.len() {
                    return Err(Error::InvalidSurface(format!(
                        "gluing names missing edge {} of polygon {}",
                        e.edge, e.polygon
                    )));
                }
            }
            if a == b {
                return Err(Error::InvalidSurface(format!("edge {a:?} glued to itself")));
            }
            for (x, y) in [(a, b), (b, a)] {
                if partner.insert(x, y).is_some() {
                    return Err(Error::InvalidSurface(format!(
                        "edge ({}, {}) appears in more than one gluing",
                        x.polygon, x.edge
                    )));
                }
            }
        }
        let edge_count: usize = polygons.iter().map(Vec::len).sum();
        if partner.len() != edge_count {
            return Err(Error::InvalidSurface(format!(
                "{} of {edge_count} edges are glued",
                partner.len()
            )));
        }

        let mut surface = TranslationSurface {
            genus,
            polygons,
            gluings,
            partner,
            cone_points: Vec::new(),
            prec,
            tol,
        };

        for &Gluing(a, b) in &surface.gluings {
            let sum = surface.edge_vector(a).add(&surface.edge_vector(b));
            if !(tol.is_zero(&sum.x) && tol.is_zero(&sum.y)) {
                return Err(Error::InvalidSurface(format!(
                    "edges ({}, {}) and ({}, {}) are not opposite translates",
                    a.polygon, a.edge, b.polygon, b.edge
                )));
            }
        }

        surface.cone_points = surface.compute_cone_points()?;

        // Euler characteristic V - E + F.
        let v = surface.cone_points.len() as i64;
        let e = surface.gluings.len() as i64;
        let f = surface.polygons.len() as i64;
        let chi = v - e + f;
        if chi > 0 || chi % 2 != 0 || (2 - chi) / 2 != genus as i64 {
            return Err(Error::InvalidSurface(format!(
                "Euler characteristic {chi} does not match genus {genus}"
            )));
        }
        let excess: usize = surface.cone_points.iter().map(|c| c.multiple - 1).sum();
        if excess != 2 * genus - 2 {
            return Err(Error::InvalidSurface(format!(
                "cone-angle excess {excess} x 2pi, expected {}",
                2 * genus - 2
            )));
        }
        if surface.area().cmp0() != Some(Ordering::Greater) {
            return Err(Error::InvalidSurface("non-positive area".into()));
        }
        Ok(surface)
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn polygons(&self) -> &[Vec<Vec2>] {
        &self.polygons
    }

    pub fn gluings(&self) -> &[Gluing] {
        &self.gluings
    }

    pub fn precision(&self) -> Precision {
        self.prec
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    pub fn cone_points(&self) -> &[ConePoint] {
        &self.cone_points
    }

    pub fn partner(&self, e: EdgeRef) -> EdgeRef {
        self.partner[&e]
    }

    pub fn edge_vector(&self, e: EdgeRef) -> Vec2 {
        let poly = &self.polygons[e.polygon];
        poly[(e.edge + 1) % poly.len()].sub(&poly[e.edge])
    }

    /// Translation carrying edge `e` onto its partner.
    pub fn translation(&self, e: EdgeRef) -> Vec2 {
        let f = self.partner(e);
        let target = &self.polygons[f.polygon];
        target[(f.edge + 1) % target.len()].sub(&self.polygons[e.polygon][e.edge])
    }

    /// Total cone-angle excess over `2 pi`, i.e. `2 pi (2g - 2)` on a valid surface.
    pub fn cone_angle_excess(&self) -> Float {
        let two_pi = self.prec.pi() * 2u32;
        let mut total = self.prec.zero();
        for c in &self.cone_points {
            total += Float::with_val(self.prec.bits(), &c.angle - &two_pi);
        }
        total
    }

    /// Sum of polygon areas (shoelace formula).
    pub fn area(&self) -> Float {
        let mut total = self.prec.zero();
        for poly in &self.polygons {
            total += polygon_area(poly);
        }
        total
    }

    /// Copy of the surface with every vertex moved by `f`. `f` must be a
    /// rotation (orientation-preserving linear isometry) for the result to be
    /// a valid surface.
    fn transformed(&self, f: impl Fn(&Vec2) -> Vec2) -> TranslationSurface {
        let mut out = self.clone();
        for poly in &mut out.polygons {
            for v in poly.iter_mut() {
                *v = f(v);
            }
        }
        out
    }

    fn compute_cone_points(&self) -> Result<Vec<ConePoint>> {
        let mut offsets = Vec::with_capacity(self.polygons.len());
        let mut total = 0;
        for poly in &self.polygons {
            offsets.push(total);
            total += poly.len();
        }
        let mut uf = UnionFind::new(total);
        for &Gluing(a, b) in &self.gluings {
            let na = self.polygons[a.polygon].len();
            let nb = self.polygons[b.polygon].len();
            let start_a = offsets[a.polygon] + a.edge;
            let end_a = offsets[a.polygon] + (a.edge + 1) % na;
            let start_b = offsets[b.polygon] + b.edge;
            let end_b = offsets[b.polygon] + (b.edge + 1) % nb;
            uf.union(start_a, end_b);
            uf.union(end_a, start_b);
        }

        let mut classes: BTreeMap<usize, ConePoint> = BTreeMap::new();
        for (p, poly) in self.polygons.iter().enumerate() {
            for k in 0..poly.len() {
                let root = uf.find(offsets[p] + k);
                let entry = classes.entry(root).or_insert_with(|| ConePoint {
                    corners: Vec::new(),
                    angle: self.prec.zero(),
                    multiple: 0,
                });
                entry.corners.push((p, k));
                entry.angle += interior_angle(poly, k);
            }
        }

        let two_pi = self.prec.pi() * 2u32;
        let mut out = Vec::with_capacity(classes.len());
        for (_, mut c) in classes {
            let ratio = Float::with_val(self.prec.bits(), &c.angle / &two_pi);
            let nearest = ratio.clone().round();
            let off = Float::with_val(self.prec.bits(), &ratio - &nearest).abs();
            if off > 1e-9 || nearest < 1 {
                return Err(Error::InvalidSurface(format!(
                    "cone angle {} x 2pi at corners {:?} is not a positive integer multiple",
                    ratio.to_f64(),
                    c.corners
                )));
            }
            c.multiple = nearest.to_f64() as usize;
            out.push(c);
        }
        Ok(out)
    }

    /// JSON form with coordinates as decimal strings at full working precision.
    pub fn to_document(&self) -> SurfaceDocument {
        SurfaceDocument {
            genus: self.genus,
            polygons: self
                .polygons
                .iter()
                .map(|poly| {
                    poly.iter()
                        .map(|v| [to_decimal(&v.x), to_decimal(&v.y)])
                        .collect()
                })
                .collect(),
            gluings: self
                .gluings
                .iter()
                .map(|&Gluing(a, b)| [a.polygon, a.edge, b.polygon, b.edge])
                .collect(),
        }
    }

    pub fn from_document(doc: &SurfaceDocument, prec: Precision, tol: Tolerance) -> Result<Self> {
        let mut polygons = Vec::with_capacity(doc.polygons.len());
        for poly in &doc.polygons {
            let mut verts = Vec::with_capacity(poly.len());
            for [x, y] in poly {
                verts.push(Vec2::new(prec.parse(x)?, prec.parse(y)?));
            }
            polygons.push(verts);
        }
        let gluings = doc
            .gluings
            .iter()
            .map(|&[p, e, q, f]| Gluing(EdgeRef::new(p, e), EdgeRef::new(q, f)))
            .collect();
        TranslationSurface::new(doc.genus, polygons, gluings, prec, tol)
    }

    /// The same surface, revalidated under another tolerance.
    pub fn with_tolerance(self, tol: Tolerance) -> Result<Self> {
        TranslationSurface::new(self.genus, self.polygons, self.gluings, self.prec, tol)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("surface document serializes")
    }

    pub fn from_json(text: &str, prec: Precision, tol: Tolerance) -> Result<Self> {
        let doc: SurfaceDocument =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        TranslationSurface::from_document(&doc, prec, tol)
    }
}

/// Serialized surface: `{genus, polygons: [[[x, y], ...], ...], gluings: [[p, e, p', e'], ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceDocument {
    pub genus: usize,
    pub polygons: Vec<Vec<[String; 2]>>,
    pub gluings: Vec<[usize; 4]>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn check_convex(p: usize, poly: &[Vec2], tol: Tolerance) -> Result<()> {
    let n = poly.len();
    if n < 3 {
        return Err(Error::InvalidSurface(format!(
            "polygon {p} has {n} vertices"
        )));
    }
    for k in 0..n {
        let e0 = poly[(k + 1) % n].sub(&poly[k]);
        let e1 = poly[(k + 2) % n].sub(&poly[(k + 1) % n]);
        let turn = e0.cross(&e1);
        if turn.cmp0() != Some(Ordering::Greater) || tol.is_zero(&turn) {
            return Err(Error::InvalidSurface(format!(
                "polygon {p} is not strictly convex and counterclockwise at vertex {}",
                (k + 1) % n
            )));
        }
    }
    Ok(())
}

fn interior_angle(poly: &[Vec2], k: usize) -> Float {
    let n = poly.len();
    let out = poly[(k + 1) % n].sub(&poly[k]);
    let back = poly[(k + n - 1) % n].sub(&poly[k]);
    let c = out.cross(&back);
    let d = out.dot(&back);
    c.atan2(&d)
}

fn polygon_area(poly: &[Vec2]) -> Float {
    let n = poly.len();
    let mut twice = Float::new(poly[0].prec());
    for k in 0..n {
        twice += poly[k].cross(&poly[(k + 1) % n]);
    }
    twice / 2u32
}

/// Double regular (2g+1)-gon with unit sides, before normalization.
///
/// Polygon 0 has vertices `v_k` counterclockwise with `v_0 = (0, 0)` and edge
/// `k` at angle `2 pi k / (2g+1)`, so edge 0 is horizontal at the bottom.
/// Polygon 1 is its point reflection `t - v_k`, placed to the right, and edge
/// `k` of polygon 0 is glued to edge `k` of polygon 1.
///
/// On this surface the cylinders forming a chain with the horizontal ones lie
/// in direction `pi / (2g+1)`, not in the vertical direction.
pub fn regular_double_polygon(g: usize, prec: Precision) -> Result<TranslationSurface> {
    if g < 2 {
        return Err(Error::RejectedParameter(format!(
            "genus must be >= 2, got {g}"
        )));
    }
    let n = 2 * g + 1;
    let pi = prec.pi();
    let mut first = Vec::with_capacity(n);
    let mut cur = Vec2::zero(prec);
    for k in 0..n {
        first.push(cur.clone());
        let angle = Float::with_val(prec.bits(), &pi * (2 * k) as u32) / n as u32;
        let (s, c) = angle.sin_cos(prec.zero());
        cur = cur.add(&Vec2::new(c, s));
    }
    let x_max = first
        .iter()
        .map(|v| v.x.clone())
        .fold(prec.zero(), |a, b| a.max(&b));
    let y_max = first
        .iter()
        .map(|v| v.y.clone())
        .fold(prec.zero(), |a, b| a.max(&b));
    let shift = Vec2::new(x_max * 2u32 + 1u32, y_max);
    let second: Vec<Vec2> = first.iter().map(|v| shift.sub(v)).collect();
    let gluings = (0..n)
        .map(|k| Gluing(EdgeRef::new(0, k), EdgeRef::new(1, k)))
        .collect();
    TranslationSurface::new(g, vec![first, second], gluings, prec, Tolerance::default())
}

/// The double (2g+1)-gon surface in chain-normalized position.
///
/// This is [`regular_double_polygon`] sheared by `[[1, -cot(pi/(2g+1))], [0, 1]]`.
/// The shear fixes the horizontal direction and carries the direction
/// `pi / (2g+1)` to the vertical one, so the horizontal cylinders `a_i` and the
/// vertical cylinders `b_j` have the chain intersection pattern. Areas and
/// horizontal cylinders are unchanged; polygon 0 keeps its horizontal edge.
pub fn build_double_polygon(g: usize, prec: Precision) -> Result<TranslationSurface> {
    let regular = regular_double_polygon(g, prec)?;
    let n = (2 * g + 1) as u32;
    let cot = (prec.pi() / n).tan().recip();
    let shear = |v: &Vec2| {
        let x = Float::with_val(
            prec.bits(),
            &v.x - Float::with_val(prec.bits(), &v.y * &cot),
        );
        Vec2::new(x, v.y.clone())
    };
    let sheared = regular.transformed(shear);
    TranslationSurface::new(
        g,
        sheared.polygons,
        sheared.gluings,
        prec,
        Tolerance::default(),
    )
}

/// A horizontal band of one polygon between two consecutive cut heights, in
/// the rotated frame of its decomposition.
#[derive(Debug, Clone)]
struct Strip {
    polygon: usize,
    lo: Float,
    hi: Float,
    left_edge: usize,
    right_edge: usize,
}

/// Piece of a cylinder's core leaf inside one polygon, in surface coordinates.
#[derive(Debug, Clone)]
pub struct CoreSegment {
    pub polygon: usize,
    pub start: Vec2,
    pub end: Vec2,
}

/// Full cylinder decomposition in one periodic direction, with enough strip
/// data to draw leaves and locate points.
#[derive(Debug, Clone)]
pub struct Decomposition {
    direction: Float,
    frame: Frame,
    strips: Vec<Strip>,
    /// Strip indices of each cylinder, in label order.
    cycles: Vec<Vec<usize>>,
    cylinders: Vec<Cylinder>,
    rotated: Vec<Vec<Vec2>>,
}

#[derive(Debug, Clone)]
enum Frame {
    Identity,
    QuarterTurn,
    Angle(Float),
}

impl Frame {
    /// Surface coordinates to the frame where the direction is +x.
    fn forward(&self, v: &Vec2) -> Vec2 {
        match self {
            Frame::Identity => v.clone(),
            Frame::QuarterTurn => v.rot_cw(),
            Frame::Angle(a) => v.rotate(&-a.clone()),
        }
    }

    fn backward(&self, v: &Vec2) -> Vec2 {
        match self {
            Frame::Identity => v.clone(),
            Frame::QuarterTurn => v.rot_ccw(),
            Frame::Angle(a) => v.rotate(a),
        }
    }
}

impl Decomposition {
    pub fn cylinders(&self) -> &[Cylinder] {
        &self.cylinders
    }

    pub fn into_cylinders(self) -> Vec<Cylinder> {
        self.cylinders
    }

    pub fn direction(&self) -> &Float {
        &self.direction
    }

    /// The leaf at relative height `fraction` in `(0, 1)` across cylinder
    /// `index` (0-based, label order), as segments in surface coordinates.
    pub fn core_segments(&self, index: usize, fraction: f64) -> Vec<CoreSegment> {
        self.cycles[index]
            .iter()
            .map(|&s| {
                let strip = &self.strips[s];
                let prec = strip.lo.prec();
                let span = Float::with_val(prec, &strip.hi - &strip.lo);
                let y = Float::with_val(prec, &strip.lo + span * fraction);
                let (xl, xr) = chord(&self.rotated[strip.polygon], &y);
                CoreSegment {
                    polygon: strip.polygon,
                    start: self.frame.backward(&Vec2::new(xl, y.clone())),
                    end: self.frame.backward(&Vec2::new(xr, y)),
                }
            })
            .collect()
    }

    /// Index of the cylinder whose interior contains `point` of polygon
    /// `polygon`, if any.
    pub fn locate(&self, polygon: usize, point: &Vec2, tol: Tolerance) -> Option<usize> {
        let local = self.frame.forward(point);
        self.cycles.iter().position(|cycle| {
            cycle.iter().any(|&s| {
                let strip = &self.strips[s];
                strip.polygon == polygon
                    && tol.lt(&strip.lo, &local.y)
                    && tol.lt(&local.y, &strip.hi)
            })
        })
    }
}

/// Cylinder decomposition in one of the two distinguished directions.
///
/// Horizontal cylinders are labeled `a_1..a_g` by increasing height of their
/// core, vertical ones `b_1..b_g` by increasing horizontal position, both
/// measured in polygon 0.
pub fn cylinder_decomposition(s: &TranslationSurface, dir: Direction) -> Result<Vec<Cylinder>> {
    Ok(decompose(s, dir)?.into_cylinders())
}

pub fn decompose(s: &TranslationSurface, dir: Direction) -> Result<Decomposition> {
    match dir {
        Direction::Horizontal => decompose_in_frame(s, Frame::Identity, s.prec.zero()),
        Direction::Vertical => {
            decompose_in_frame(s, Frame::QuarterTurn, Direction::Vertical.angle(s.prec))
        }
    }
}

/// Decomposition in the direction at `angle` radians; fails unless the
/// direction is completely periodic. Cylinders are labeled `c_1, c_2, ...`
/// by increasing position across the direction.
pub fn decompose_at_angle(s: &TranslationSurface, angle: &Float) -> Result<Decomposition> {
    let pi = s.prec.pi();
    let mut theta = Float::with_val(s.prec.bits(), angle % &pi);
    if theta < 0 {
        theta += &pi;
    }
    decompose_in_frame(s, Frame::Angle(theta.clone()), theta)
}

fn decompose_in_frame(
    s: &TranslationSurface,
    frame: Frame,
    direction: Float,
) -> Result<Decomposition> {
    let tol = s.tol;
    let rotated = s.transformed(|v| frame.forward(v));
    let polys = &rotated.polygons;

    // Cut heights per polygon, seeded with the extreme heights.
    let mut cuts: Vec<Vec<Float>> = polys
        .iter()
        .map(|poly| {
            let lo = poly
                .iter()
                .map(|v| v.y.clone())
                .reduce(|a, b| a.min(&b))
                .unwrap();
            let hi = poly
                .iter()
                .map(|v| v.y.clone())
                .reduce(|a, b| a.max(&b))
                .unwrap();
            vec![lo, hi]
        })
        .collect();

    for (p, poly) in polys.iter().enumerate() {
        let n = poly.len();
        for k in 0..n {
            let out = poly[(k + 1) % n].sub(&poly[k]);
            let back = poly[(k + n - 1) % n].sub(&poly[k]);
            for sign in [1i32, -1] {
                // Direction (sign, 0) lies strictly inside the corner iff
                // cross(out, d) > 0 and cross(d, back) > 0.
                let c1 = Float::with_val(out.prec(), -&out.y) * sign;
                let c2 = Float::with_val(back.prec(), &back.y * sign);
                if tol.is_zero(&c1)
                    || tol.is_zero(&c2)
                    || c1.cmp0() != Some(Ordering::Greater)
                    || c2.cmp0() != Some(Ordering::Greater)
                {
                    continue;
                }
                trace_separatrix(&rotated, p, k, sign, &mut cuts)?;
            }
        }
    }

    let mut strips = Vec::new();
    for (p, heights) in cuts.iter_mut().enumerate() {
        heights.sort_by(|a, b| a.partial_cmp(b).expect("finite heights"));
        heights.dedup_by(|b, a| tol.eq(a, b));
        for w in heights.windows(2) {
            let (lo, hi) = (&w[0], &w[1]);
            let mid = Float::with_val(lo.prec(), lo + hi) / 2u32;
            let (left_edge, right_edge) = chord_edges(&polys[p], &mid, tol)?;
            strips.push(Strip {
                polygon: p,
                lo: lo.clone(),
                hi: hi.clone(),
                left_edge,
                right_edge,
            });
        }
    }

    // Right neighbour of each strip across its right edge.
    let mut next = vec![usize::MAX; strips.len()];
    let mut prev_count = vec![0usize; strips.len()];
    for (i, strip) in strips.iter().enumerate() {
        let e = EdgeRef::new(strip.polygon, strip.right_edge);
        let f = rotated.partner(e);
        let shift = rotated.translation(e);
        let lo = Float::with_val(strip.lo.prec(), &strip.lo + &shift.y);
        let hi = Float::with_val(strip.hi.prec(), &strip.hi + &shift.y);
        let j = strips
            .iter()
            .position(|t| {
                t.polygon == f.polygon
                    && t.left_edge == f.edge
                    && tol.eq(&t.lo, &lo)
                    && tol.eq(&t.hi, &hi)
            })
            .ok_or_else(|| {
                Error::DecompositionFailure(format!(
                    "strip {i} of polygon {} has no matching neighbour across edge {}",
                    strip.polygon, strip.right_edge
                ))
            })?;
        next[i] = j;
        prev_count[j] += 1;
    }
    if prev_count.iter().any(|&c| c != 1) {
        return Err(Error::DecompositionFailure(
            "strip gluing is not a permutation".into(),
        ));
    }

    let mut seen = vec![false; strips.len()];
    let mut raw: Vec<(Float, Vec<usize>, Float, Float)> = Vec::new();
    for start in 0..strips.len() {
        if seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            cycle.push(i);
            i = next[i];
        }
        let height = Float::with_val(
            strips[start].lo.prec(),
            &strips[start].hi - &strips[start].lo,
        );
        let mut circumference = s.prec.zero();
        for &c in &cycle {
            let strip = &strips[c];
            if !tol.eq(
                &Float::with_val(height.prec(), &strip.hi - &strip.lo),
                &height,
            ) {
                return Err(Error::DecompositionFailure(
                    "strips of one cylinder have different heights".into(),
                ));
            }
            let mid = Float::with_val(strip.lo.prec(), &strip.lo + &strip.hi) / 2u32;
            let (xl, xr) = chord(&polys[strip.polygon], &mid);
            circumference += xr - xl;
        }
        let key = position_key(&cycle, &strips, &frame)?;
        raw.push((key, cycle, circumference, height));
    }
    raw.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite keys"));

    let mut cycles = Vec::with_capacity(raw.len());
    let mut cylinders = Vec::with_capacity(raw.len());
    for (i, (_, cycle, circumference, height)) in raw.into_iter().enumerate() {
        let label = match frame {
            Frame::Identity => CurveLabel::A(i + 1),
            Frame::QuarterTurn => CurveLabel::B(i + 1),
            Frame::Angle(_) => CurveLabel::C(i + 1),
        };
        cycles.push(cycle);
        cylinders.push(Cylinder {
            direction: direction.clone(),
            label,
            circumference,
            height,
        });
    }

    Ok(Decomposition {
        direction,
        frame,
        strips,
        cycles,
        cylinders,
        rotated: rotated.polygons,
    })
}

/// Ordering key of a cylinder: the lowest core position among its strips in
/// polygon 0, measured across the direction. For the vertical direction this
/// is the surface x-coordinate.
fn position_key(cycle: &[usize], strips: &[Strip], frame: &Frame) -> Result<Float> {
    let mut best: Option<Float> = None;
    let mut fallback: Option<Float> = None;
    for &c in cycle {
        let strip = &strips[c];
        let mid = Float::with_val(strip.lo.prec(), &strip.lo + &strip.hi) / 2u32;
        let key = match frame {
            Frame::QuarterTurn => -mid,
            _ => mid,
        };
        let slot = if strip.polygon == 0 {
            &mut best
        } else {
            &mut fallback
        };
        if slot.as_ref().map_or(true, |b| key < *b) {
            *slot = Some(key);
        }
    }
    best.or(fallback)
        .ok_or_else(|| Error::DecompositionFailure("empty cylinder".into()))
}

/// Follows the separatrix leaving vertex `k` of polygon `p` in direction
/// `(sign, 0)`, recording every height at which it crosses a polygon.
fn trace_separatrix(
    s: &TranslationSurface,
    p: usize,
    k: usize,
    sign: i32,
    cuts: &mut [Vec<Float>],
) -> Result<()> {
    let tol = s.tol;
    let mut poly = p;
    let mut point = s.polygons[p][k].clone();
    cuts[poly].push(point.y.clone());
    for _ in 0..MAX_TRACE_STEPS {
        let (edge, exit) = exit_point(&s.polygons[poly], &point, sign, tol)?;
        if s.polygons[poly].iter().any(|v| v.approx_eq(&exit, tol)) {
            return Ok(());
        }
        let e = EdgeRef::new(poly, edge);
        let shift = s.translation(e);
        point = exit.add(&shift);
        poly = s.partner(e).polygon;
        cuts[poly].push(point.y.clone());
    }
    Err(Error::DecompositionFailure(format!(
        "separatrix from vertex {k} of polygon {p} did not close after {MAX_TRACE_STEPS} crossings"
    )))
}

/// Far end of the horizontal chord through `point` in direction `sign`.
fn exit_point(poly: &[Vec2], point: &Vec2, sign: i32, tol: Tolerance) -> Result<(usize, Vec2)> {
    let n = poly.len();
    let mut best: Option<(usize, Float)> = None;
    for j in 0..n {
        let a = &poly[j];
        let b = &poly[(j + 1) % n];
        let dy = Float::with_val(a.prec(), &b.y - &a.y);
        if tol.is_zero(&dy) {
            continue;
        }
        let t = Float::with_val(a.prec(), &point.y - &a.y) / &dy;
        if t < 0 && !tol.is_zero(&t) {
            continue;
        }
        if t > 1 && !tol.eq(&t, &Float::with_val(t.prec(), 1)) {
            continue;
        }
        let x = Float::with_val(a.prec(), &b.x - &a.x) * &t + &a.x;
        let ahead = Float::with_val(x.prec(), &x - &point.x) * sign;
        if ahead.cmp0() != Some(Ordering::Greater) || tol.is_zero(&ahead) {
            continue;
        }
        let better = match &best {
            None => true,
            Some((_, bx)) => {
                let d = Float::with_val(x.prec(), &x - bx) * sign;
                d > 0
            }
        };
        if better {
            best = Some((j, x));
        }
    }
    let (j, x) =
        best.ok_or_else(|| Error::DecompositionFailure(format!("no exit from point {point:?}")))?;
    Ok((j, Vec2::new(x, point.y.clone())))
}

/// Edges carrying the left and right ends of the horizontal chord at `y`,
/// which must avoid vertex heights.
fn chord_edges(poly: &[Vec2], y: &Float, tol: Tolerance) -> Result<(usize, usize)> {
    let n = poly.len();
    let mut hits: Vec<(usize, Float)> = Vec::with_capacity(2);
    for j in 0..n {
        let a = &poly[j];
        let b = &poly[(j + 1) % n];
        let (lo, hi) = if a.y < b.y {
            (&a.y, &b.y)
        } else {
            (&b.y, &a.y)
        };
        if tol.lt(lo, y) && tol.lt(y, hi) {
            let t = Float::with_val(a.prec(), y - &a.y) / Float::with_val(a.prec(), &b.y - &a.y);
            let x = Float::with_val(a.prec(), &b.x - &a.x) * t + &a.x;
            hits.push((j, x));
        }
    }
    if hits.len() != 2 {
        return Err(Error::DecompositionFailure(format!(
            "horizontal chord meets {} edges",
            hits.len()
        )));
    }
    if hits[0].1 < hits[1].1 {
        Ok((hits[0].0, hits[1].0))
    } else {
        Ok((hits[1].0, hits[0].0))
    }
}

/// x-range of the horizontal chord at `y` through a convex polygon.
fn chord(poly: &[Vec2], y: &Float) -> (Float, Float) {
    let n = poly.len();
    let mut xs: Vec<Float> = Vec::new();
    for j in 0..n {
        let a = &poly[j];
        let b = &poly[(j + 1) % n];
        let (lo, hi) = if a.y < b.y {
            (&a.y, &b.y)
        } else {
            (&b.y, &a.y)
        };
        if *lo <= *y && *y <= *hi && lo != hi {
            let t = Float::with_val(a.prec(), y - &a.y) / Float::with_val(a.prec(), &b.y - &a.y);
            xs.push(Float::with_val(a.prec(), &b.x - &a.x) * t + &a.x);
        }
    }
    let min = xs
        .iter()
        .cloned()
        .reduce(|a, b| a.min(&b))
        .expect("chord inside polygon");
    let max = xs
        .into_iter()
        .reduce(|a, b| a.max(&b))
        .expect("chord inside polygon");
    (min, max)
}

pub fn area(s: &TranslationSurface) -> Float {
    s.area()
}

/// Outcome of testing the point reflection through the centroid of all
/// vertices as a symmetry of the glued surface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetryReport {
    /// The reflection respects polygons and gluings.
    pub is_automorphism: bool,
    /// Induced permutation of the horizontal cylinders (0-based), when defined.
    pub horizontal: Option<Vec<usize>>,
    /// Induced permutation of the vertical cylinders (0-based), when defined.
    pub vertical: Option<Vec<usize>>,
}

impl SymmetryReport {
    /// An automorphism fixing every horizontal and every vertical cylinder.
    pub fn preserves_each_cylinder(&self) -> bool {
        let fixes = |p: &Option<Vec<usize>>| {
            p.as_ref()
                .is_some_and(|perm| perm.iter().enumerate().all(|(i, &j)| i == j))
        };
        self.is_automorphism && fixes(&self.horizontal) && fixes(&self.vertical)
    }
}

pub fn symmetry_report(s: &TranslationSurface) -> Result<SymmetryReport> {
    let tol = s.tol;
    let prec = s.prec;
    let mut sum = Vec2::zero(prec);
    let mut count = 0u32;
    for poly in &s.polygons {
        for v in poly {
            sum = sum.add(v);
            count += 1;
        }
    }
    // Twice the centroid; the reflection is v -> 2c - v.
    let twice_centre = sum.scale(&(Float::with_val(prec.bits(), 2u32) / count));
    let reflect = |v: &Vec2| twice_centre.sub(v);

    // Polygon map and vertex offset: vertex k of p goes to vertex k + shift of image.
    let mut image: Vec<Option<(usize, usize)>> = Vec::with_capacity(s.polygons.len());
    for poly in &s.polygons {
        let first = reflect(&poly[0]);
        let found = s.polygons.iter().enumerate().find_map(|(q, target)| {
            if target.len() != poly.len() {
                return None;
            }
            let shift = target.iter().position(|w| w.approx_eq(&first, tol))?;
            let n = poly.len();
            poly.iter()
                .enumerate()
                .all(|(k, v)| reflect(v).approx_eq(&target[(k + shift) % n], tol))
                .then_some((q, shift))
        });
        image.push(found);
    }
    let mut is_automorphism = image.iter().all(Option::is_some);
    if is_automorphism {
        let map_edge = |e: EdgeRef| {
            let (q, shift) = image[e.polygon].expect("checked");
            EdgeRef::new(q, (e.edge + shift) % s.polygons[e.polygon].len())
        };
        is_automorphism = s
            .gluings
            .iter()
            .all(|&Gluing(a, b)| s.partner(map_edge(a)) == map_edge(b));
    }
    if !is_automorphism {
        return Ok(SymmetryReport {
            is_automorphism,
            horizontal: None,
            vertical: None,
        });
    }

    let induced = |dir: Direction| -> Result<Option<Vec<usize>>> {
        let decomposition = decompose(s, dir)?;
        let mut perm = Vec::with_capacity(decomposition.cylinders().len());
        for i in 0..decomposition.cylinders().len() {
            let seg = &decomposition.core_segments(i, 0.5)[0];
            let mid = seg
                .start
                .add(&seg.end)
                .scale(&Float::with_val(prec.bits(), 0.5));
            let (q, _) = image[seg.polygon].expect("checked");
            match decomposition.locate(q, &reflect(&mid), tol) {
                Some(j) => perm.push(j),
                None => return Ok(None),
            }
        }
        Ok(Some(perm))
    };

    Ok(SymmetryReport {
        is_automorphism,
        horizontal: induced(Direction::Horizontal)?,
        vertical: induced(Direction::Vertical)?,
    })
}

/// True iff the point reflection through the centre of the configuration is
/// an automorphism of the glued surface fixing each horizontal and each
/// vertical cylinder.
pub fn hyperelliptic_symmetry(s: &TranslationSurface) -> Result<bool> {
    Ok(symmetry_report(s)?.preserves_each_cylinder())
}

/// Regular n-gon area with unit sides, `n / (4 tan(pi / n))`.
pub fn regular_polygon_area(n: usize, prec: Precision) -> Float {
    let angle = prec.pi() / n as u32;
    Float::with_val(prec.bits(), n as u32) / (angle.tan() * 4u32)
}

/// Euclidean length of a core segment.
pub fn segment_length(seg: &CoreSegment) -> Float {
    let d = seg.end.sub(&seg.start);
    Float::with_val(d.prec(), d.x.clone().pow(2u32) + d.y.clone().pow(2u32)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prec() -> Precision {
        Precision::default()
    }

    fn rel(a: &Float, b: &Float) -> f64 {
        crate::real::relative_error(a, b)
    }

    #[test]
    fn rejects_small_genus() {
        assert!(matches!(
            build_double_polygon(1, prec()),
            Err(Error::RejectedParameter(_))
        ));
    }

    #[test]
    fn genus_two_shape() {
        let s = build_double_polygon(2, prec()).unwrap();
        assert_eq!(s.genus(), 2);
        assert_eq!(s.polygons().len(), 2);
        assert!(s.polygons().iter().all(|p| p.len() == 5));
        assert_eq!(s.gluings().len(), 5);
        // Horizontal bottom edge on polygon 0.
        let e = s.edge_vector(EdgeRef::new(0, 0));
        assert!(e.y.is_zero());
    }

    #[test]
    fn area_matches_closed_form() {
        // Oracle: n / (4 tan(pi/n)) per polygon, independent of the vertex walk.
        let s = build_double_polygon(2, prec()).unwrap();
        assert!((s.area().to_f64() - 3.440_954_801_177_934).abs() < 1e-12);
        let s3 = build_double_polygon(3, prec()).unwrap();
        let expect = regular_polygon_area(7, prec()) * 2u32;
        assert!(rel(&s3.area(), &expect) < 1e-30);
    }

    #[test]
    fn single_cone_point_with_gauss_bonnet_excess() {
        for g in 2..=6 {
            let s = build_double_polygon(g, prec()).unwrap();
            assert_eq!(s.cone_points().len(), 1);
            assert_eq!(s.cone_points()[0].multiple, 2 * g - 1);
            let expect = prec().pi() * (2 * (2 * g - 2)) as u32;
            assert!(rel(&s.cone_angle_excess(), &expect) < 1e-30);
        }
    }

    #[test]
    fn g_cylinders_each_direction() {
        for g in 2..=5 {
            let s = build_double_polygon(g, prec()).unwrap();
            for dir in [Direction::Horizontal, Direction::Vertical] {
                let cyls = cylinder_decomposition(&s, dir).unwrap();
                assert_eq!(cyls.len(), g, "g={g} {dir}");
                let mut total = prec().zero();
                for c in &cyls {
                    total += c.area();
                }
                assert!(rel(&total, &s.area()) < 1e-12);
            }
        }
    }

    #[test]
    fn moduli_agree_within_direction() {
        let s = build_double_polygon(2, prec()).unwrap();
        let cyls = cylinder_decomposition(&s, Direction::Horizontal).unwrap();
        assert!(rel(&cyls[0].modulus(), &cyls[1].modulus()) < 1e-12);
    }

    #[test]
    fn labels_follow_position() {
        let s = build_double_polygon(3, prec()).unwrap();
        let h = cylinder_decomposition(&s, Direction::Horizontal).unwrap();
        let labels: Vec<_> = h.iter().map(|c| c.label).collect();
        assert_eq!(
            labels,
            vec![CurveLabel::A(1), CurveLabel::A(2), CurveLabel::A(3)]
        );
        let v = cylinder_decomposition(&s, Direction::Vertical).unwrap();
        assert!(v.iter().all(|c| matches!(c.label, CurveLabel::B(_))));
    }

    #[test]
    fn hyperelliptic_fixes_every_cylinder() {
        let s = build_double_polygon(2, prec()).unwrap();
        assert!(hyperelliptic_symmetry(&s).unwrap());
        let s4 = build_double_polygon(4, prec()).unwrap();
        let report = symmetry_report(&s4).unwrap();
        assert!(report.is_automorphism);
        assert_eq!(report.horizontal, Some(vec![0, 1, 2, 3]));
        assert_eq!(report.vertical, Some(vec![0, 1, 2, 3]));
    }

    #[test]
    fn perturbed_vertex_fails_validation() {
        let s = build_double_polygon(2, prec()).unwrap();
        let mut doc = s.to_document();
        let mut x = prec().parse(&doc.polygons[0][2][0]).unwrap();
        x += 1e-3;
        doc.polygons[0][2][0] = to_decimal(&x);
        let err =
            TranslationSurface::from_document(&doc, prec(), Tolerance::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidSurface(_)), "{err}");
    }

    #[test]
    fn unglued_edge_rejected() {
        let s = build_double_polygon(2, prec()).unwrap();
        let mut doc = s.to_document();
        doc.gluings.pop();
        assert!(TranslationSurface::from_document(&doc, prec(), Tolerance::default()).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let s = build_double_polygon(3, prec()).unwrap();
        let back =
            TranslationSurface::from_json(&s.to_json(), prec(), Tolerance::default()).unwrap();
        assert_eq!(back.polygons(), s.polygons());
        assert_eq!(back.gluings(), s.gluings());
    }

    #[test]
    fn shear_keeps_area_and_horizontal_cylinders() {
        for g in 2..=4 {
            let regular = regular_double_polygon(g, prec()).unwrap();
            let sheared = build_double_polygon(g, prec()).unwrap();
            assert!(rel(&regular.area(), &sheared.area()) < 1e-30);
            let a = cylinder_decomposition(&regular, Direction::Horizontal).unwrap();
            let b = cylinder_decomposition(&sheared, Direction::Horizontal).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!(rel(&x.circumference, &y.circumference) < 1e-30);
                assert!(rel(&x.height, &y.height) < 1e-30);
            }
        }
    }

    #[test]
    fn regular_polygon_chain_partner_direction() {
        // The sheared vertical cylinders are the regular surface's cylinders in
        // direction pi/(2g+1), with lengths scaled by sin(pi/(2g+1)).
        let g = 3;
        let regular = regular_double_polygon(g, prec()).unwrap();
        let angle = prec().pi() / 7u32;
        let tilted = decompose_at_angle(&regular, &angle).unwrap();
        let vertical = cylinder_decomposition(
            &build_double_polygon(g, prec()).unwrap(),
            Direction::Vertical,
        )
        .unwrap();
        let sin = angle.clone().sin();
        let mut lhs: Vec<f64> = tilted
            .cylinders()
            .iter()
            .map(|c| Float::with_val(128, &c.circumference * &sin).to_f64())
            .collect();
        let mut rhs: Vec<f64> = vertical.iter().map(|c| c.circumference.to_f64()).collect();
        lhs.sort_by(f64::total_cmp);
        rhs.sort_by(f64::total_cmp);
        for (x, y) in lhs.iter().zip(&rhs) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn direction_parsing() {
        assert_eq!(
            "Vertical".parse::<Direction>().unwrap(),
            Direction::Vertical
        );
        assert!("diagonal".parse::<Direction>().is_err());
    }

    #[test]
    fn edge_direction_is_periodic() {
        // Rotation by 2 pi / (2g+1) is a symmetry, so edge directions decompose
        // into g cylinders like the horizontal one.
        let s = regular_double_polygon(2, prec()).unwrap();
        let angle = prec().pi() * 2u32 / 5u32;
        let d = decompose_at_angle(&s, &angle).unwrap();
        assert_eq!(d.cylinders().len(), 2);
        let h = cylinder_decomposition(&s, Direction::Horizontal).unwrap();
        let mut a: Vec<f64> = h.iter().map(|c| c.circumference.to_f64()).collect();
        let mut b: Vec<f64> = d
            .cylinders()
            .iter()
            .map(|c| c.circumference.to_f64())
            .collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
