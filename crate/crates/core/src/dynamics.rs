//! Projective dynamics: the limit of `T_C^k` on track weights, its 1/k
//! approach, and the circle of direction foliations.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rug::Float;
use serde::Serialize;

use crate::curves::chain_index;
use crate::error::{Error, Result};
use crate::flat_surface::{
    decompose, decompose_at_angle, CurveLabel, Direction, EdgeRef, TranslationSurface,
};
use crate::real::{Tolerance, Vec2};
use crate::traintrack::{ComponentWeights, TrackWeights};

/// Nonnegative vector up to positive scale, stored sum-normalized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectiveClass(Vec<f64>);

impl ProjectiveClass {
    pub fn new(v: &[f64]) -> Result<Self> {
        if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::RejectedParameter(
                "projective class needs finite nonnegative entries".into(),
            ));
        }
        let s: f64 = v.iter().sum();
        if s <= 0.0 {
            return Err(Error::Degenerate(
                "zero vector has no projective class".into(),
            ));
        }
        Ok(ProjectiveClass(v.iter().map(|x| x / s).collect()))
    }

    /// Exact normalization, rounded once at the end.
    pub fn from_rationals(v: &[BigRational]) -> Result<Self> {
        if v.iter().any(|x| x.is_negative()) {
            return Err(Error::RejectedParameter(
                "projective class needs nonnegative entries".into(),
            ));
        }
        let s: BigRational = v.iter().sum();
        if s.is_zero() {
            return Err(Error::Degenerate(
                "zero vector has no projective class".into(),
            ));
        }
        Ok(ProjectiveClass(
            v.iter()
                .map(|x| (x / &s).to_f64().unwrap_or(f64::NAN))
                .collect(),
        ))
    }

    pub fn from_integers(v: &[BigInt]) -> Result<Self> {
        let s: BigInt = v.iter().sum();
        if s.is_zero() || v.iter().any(|x| x.is_negative()) {
            return Err(Error::Degenerate("not a nonzero nonnegative vector".into()));
        }
        let r = |x: &BigInt| {
            BigRational::new(x.clone(), s.clone())
                .to_f64()
                .unwrap_or(f64::NAN)
        };
        Ok(ProjectiveClass(v.iter().map(r).collect()))
    }

    pub fn coordinates(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sup-norm distance between normalizations.
    pub fn distance(&self, o: &ProjectiveClass) -> f64 {
        assert_eq!(self.0.len(), o.0.len(), "classes of different dimension");
        self.0
            .iter()
            .zip(&o.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, o: &ProjectiveClass, tol: f64) -> bool {
        self.distance(o) <= tol
    }
}

/// `lim T_C^k [mu] = [x_1 c_1 + ... + x_n c_n]`, in closed form.
pub fn twist_limit(w: &TrackWeights) -> Result<ProjectiveClass> {
    w.validate()?;
    if let Some(j) = w.components.iter().position(|c| c.x.is_zero()) {
        return Err(Error::HypothesisViolation(format!(
            "x_{} = i(mu, c_{}) is zero",
            j + 1,
            j + 1
        )));
    }
    let limit = TrackWeights {
        components: w
            .components
            .iter()
            .map(|c| ComponentWeights::new(BigRational::zero(), c.x.clone(), c.x.clone()))
            .collect(),
        rest: vec![BigRational::zero(); w.rest.len()],
    };
    ProjectiveClass::from_rationals(&limit.coordinates())
}

/// Integer lift of the coordinates; projectively the same point.
fn integer_lift(w: &TrackWeights) -> Vec<BigInt> {
    let coords = w.coordinates();
    let l = coords
        .iter()
        .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
    coords
        .iter()
        .map(|r| (r * BigRational::from_integer(l.clone())).to_integer())
        .collect()
}

/// Brute-force iteration on integers: `k` single twists in a row.
struct Twister {
    v: Vec<BigInt>,
    n: usize,
}

impl Twister {
    fn new(w: &TrackWeights) -> Self {
        Twister {
            v: integer_lift(w),
            n: w.n(),
        }
    }

    fn step(&mut self) {
        for j in 0..self.n {
            let x = self.v[3 * j].clone();
            self.v[3 * j + 1] += &x;
            self.v[3 * j + 2] += &x;
        }
    }
}

/// `[T_C^k mu]` by `k` explicit twists.
pub fn iterate(w: &TrackWeights, k: u64) -> Result<ProjectiveClass> {
    w.validate()?;
    let mut it = Twister::new(w);
    for _ in 0..k {
        it.step();
    }
    ProjectiveClass::from_integers(&it.v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub k: u64,
    pub class: ProjectiveClass,
    /// Distance to [`twist_limit`], when the limit hypothesis holds.
    pub error: Option<f64>,
}

/// Every iterate `k = 1..=k_max`.
pub fn iterate_trace(w: &TrackWeights, k_max: i64) -> Result<Vec<TracePoint>> {
    if k_max <= 0 {
        return Err(Error::RejectedParameter(format!(
            "k_max must be positive, got {k_max}"
        )));
    }
    let ks: Vec<u64> = (1..=k_max as u64).collect();
    iterate_trace_at(w, &ks)
}

/// Iterates recorded only at the increasing steps `ks`.
pub fn iterate_trace_at(w: &TrackWeights, ks: &[u64]) -> Result<Vec<TracePoint>> {
    w.validate()?;
    if ks.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::RejectedParameter(
            "record steps must increase".into(),
        ));
    }
    let limit = twist_limit(w).ok();
    let mut it = Twister::new(w);
    let mut done = 0u64;
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        while done < k {
            it.step();
            done += 1;
        }
        let class = ProjectiveClass::from_integers(&it.v)?;
        let error = limit.as_ref().map(|l| class.distance(l));
        out.push(TracePoint { k, class, error });
    }
    Ok(out)
}

/// About `per_decade` log-spaced steps in `1..=k_max`, always ending at `k_max`.
pub fn log_schedule(k_max: u64, per_decade: usize) -> Vec<u64> {
    let mut ks: Vec<u64> = Vec::new();
    let decades = (k_max as f64).log10();
    let total = (decades * per_decade as f64).ceil() as usize;
    for i in 0..=total {
        let k = 10f64.powf(i as f64 / per_decade as f64).round() as u64;
        let k = k.clamp(1, k_max);
        if ks.last() != Some(&k) {
            ks.push(k);
        }
    }
    if ks.last() != Some(&k_max) {
        ks.push(k_max);
    }
    ks
}

/// Least-squares fit `log err = slope log k + log C` over the last decade of
/// a trace, plus the constant `sup k err(k)` over the whole trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub constant: f64,
    pub points: usize,
}

pub fn fit_decay(trace: &[TracePoint]) -> Result<DecayFit> {
    let k_max = trace.last().map(|p| p.k).unwrap_or(0);
    let lo = (k_max / 10).max(1);
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .filter(|p| p.k >= lo)
        .filter_map(|p| {
            p.error
                .filter(|e| *e > 0.0)
                .map(|e| ((p.k as f64).ln(), e.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return Err(Error::Degenerate(
            "need two positive errors in the last decade to fit".into(),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all samples at one step".into()));
    }
    let slope = sxy / sxx;
    let constant = trace
        .iter()
        .filter_map(|p| p.error.map(|e| e * p.k as f64))
        .fold(0.0, f64::max);
    Ok(DecayFit {
        slope,
        intercept: my - slope * mx,
        constant,
        points: pts.len(),
    })
}

/// Random valid weights: every entry `p/q` with `q` in `1..=16`, `p` in
/// `q..=8q`, so all `x_j` are nonzero. `z_j` is forced by the switch.
pub fn sample_weights<R: Rng>(rng: &mut R, n: usize, rest_len: usize) -> TrackWeights {
    let mut draw = || {
        let q: i64 = rng.random_range(1..=16);
        let p: i64 = rng.random_range(q..=8 * q);
        BigRational::new(BigInt::from(p), BigInt::from(q))
    };
    let components = (0..n)
        .map(|_| {
            let x = draw();
            let y = draw();
            let z = &x + &y;
            ComponentWeights::new(x, y, z)
        })
        .collect();
    let rest = (0..rest_len).map(|_| draw()).collect();
    TrackWeights { components, rest }
}

/// Holonomies of the curves the circle map is measured against: the `2g`
/// chain curves in chain labels (`a_1..a_g, b_1..b_g`), then the cores of the
/// cylinders in one auxiliary periodic direction.
///
/// The chain curves alone only see `|tan theta|`, which identifies `theta`
/// with `pi - theta`; the auxiliary cores separate those.
#[derive(Debug, Clone)]
pub struct CircleChart {
    labels: Vec<CurveLabel>,
    holonomies: Vec<Vec2>,
    breakpoints: Vec<f64>,
    tol: Tolerance,
}

impl CircleChart {
    pub fn new(s: &TranslationSurface) -> Result<Self> {
        let g = s.genus();
        let prec = s.precision();
        let mut labels = Vec::new();
        let mut holonomies = Vec::new();
        let horizontal = decompose(s, Direction::Horizontal)?.into_cylinders();
        let vertical = decompose(s, Direction::Vertical)?.into_cylinders();
        let mut push_chain = |cyls: &[crate::flat_surface::Cylinder], horizontal: bool| {
            let mut slot: Vec<Option<(CurveLabel, Vec2)>> = vec![None; g];
            for c in cyls {
                let i = chain_index(g, c.label.index());
                // Exact axis-parallel holonomies.
                let (label, hol) = if horizontal {
                    (
                        CurveLabel::A(i),
                        Vec2::new(c.circumference.clone(), prec.zero()),
                    )
                } else {
                    (
                        CurveLabel::B(i),
                        Vec2::new(prec.zero(), c.circumference.clone()),
                    )
                };
                slot[i - 1] = Some((label, hol));
            }
            for (l, h) in slot.into_iter().flatten() {
                labels.push(l);
                holonomies.push(h);
            }
        };
        push_chain(&horizontal, true);
        push_chain(&vertical, false);

        let e = s.edge_vector(EdgeRef::new(0, 1));
        let aux_angle = Float::with_val(prec.bits(), e.y.atan2_ref(&e.x));
        let aux = decompose_at_angle(s, &aux_angle)?;
        for c in aux.cylinders() {
            labels.push(c.label);
            holonomies.push(c.holonomy());
        }

        let mut breakpoints = vec![0.0, std::f64::consts::FRAC_PI_2, aux.direction().to_f64()];
        breakpoints.sort_by(|a, b| a.total_cmp(b));
        breakpoints.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        Ok(CircleChart {
            labels,
            holonomies,
            breakpoints,
            tol: s.tolerance(),
        })
    }

    pub fn labels(&self) -> &[CurveLabel] {
        &self.labels
    }

    /// Directions in `[0, pi)` where the map is not smooth.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Transverse measures `|hol x u|` of the foliation in direction `u`.
    pub fn measures(&self, u: &Vec2) -> Vec<Float> {
        self.holonomies.iter().map(|h| h.cross(u).abs()).collect()
    }

    pub fn evaluate(&self, theta: &Float) -> Result<ProjectiveClass> {
        let (s, c) = theta.clone().sin_cos(Float::new(theta.prec()));
        self.class_of(&Vec2::new(c, s))
    }

    /// As [`CircleChart::evaluate`] with the exact unit vector of a
    /// distinguished direction.
    pub fn evaluate_direction(
        &self,
        dir: Direction,
        prec: crate::real::Precision,
    ) -> Result<ProjectiveClass> {
        let u = match dir {
            Direction::Horizontal => Vec2::new(prec.from_i64(1), prec.zero()),
            Direction::Vertical => Vec2::new(prec.zero(), prec.from_i64(1)),
        };
        self.class_of(&u)
    }

    fn class_of(&self, u: &Vec2) -> Result<ProjectiveClass> {
        let m = self.measures(u);
        let total = m.iter().fold(Float::new(u.prec()), |acc, x| acc + x);
        assert!(
            !self.tol.is_zero(&total),
            "direction foliation pairs to zero with every curve"
        );
        let v: Vec<f64> = m
            .iter()
            .map(|x| Float::with_val(u.prec(), x / &total).to_f64())
            .collect();
        Ok(ProjectiveClass(v))
    }
}

/// Class of the direction-`theta` foliation, measured on the curves of
/// [`CircleChart`].
pub fn direction_foliation(s: &TranslationSurface, theta: &Float) -> Result<ProjectiveClass> {
    let pi = s.precision().pi();
    if *theta < 0 || *theta >= pi {
        return Err(Error::RejectedParameter(format!(
            "angle {} outside [0, pi)",
            theta.to_f64()
        )));
    }
    CircleChart::new(s)?.evaluate(theta)
}

/// `n` equally spaced angles `k pi / n`.
pub fn uniform_angles(n: usize, prec: crate::real::Precision) -> Vec<Float> {
    let pi = prec.pi();
    (0..n)
        .map(|k| Float::with_val(prec.bits(), &pi * k as u32) / n as u32)
        .collect()
}

/// Smallest pairwise distance among the images of `angles`.
pub fn min_pairwise_distance(chart: &CircleChart, angles: &[Float]) -> Result<f64> {
    let pts = angles
        .iter()
        .map(|t| chart.evaluate(t))
        .collect::<Result<Vec<_>>>()?;
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.min(pts[i].distance(&pts[j]));
        }
    }
    Ok(best)
}

/// Ratio `s_3 / s_1` of singular values of the stacked images; rank two up to
/// rounding when all points lie on one projective line.
pub fn rank_ratio(points: &[ProjectiveClass]) -> f64 {
    let rows = points.len();
    let cols = points.first().map(|p| p.len()).unwrap_or(0);
    let m = DMatrix::from_fn(rows, cols, |i, j| points[i].coordinates()[j]);
    let mut sv: Vec<f64> = m
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv.len() < 3 || sv[0] == 0.0 {
        return 0.0;
    }
    sv[2] / sv[0]
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectivityReport {
    pub tuples: usize,
    pub worst_ratio: f64,
}

/// Draws `per_arc` random 4-tuples inside each arc between breakpoints,
/// keeping `margin` away from the ends, and records the worst rank ratio.
pub fn piecewise_projectivity<R: Rng>(
    chart: &CircleChart,
    per_arc: usize,
    margin: f64,
    rng: &mut R,
    prec: crate::real::Precision,
) -> Result<ProjectivityReport> {
    let pi = std::f64::consts::PI;
    let b = chart.breakpoints();
    let mut arcs: Vec<(f64, f64)> = b.windows(2).map(|w| (w[0], w[1])).collect();
    arcs.push((*b.last().unwrap(), b[0] + pi));
    let mut worst: f64 = 0.0;
    let mut tuples = 0;
    for (lo, hi) in arcs {
        for _ in 0..per_arc {
            let pts = (0..4)
                .map(|_| {
                    let t = rng.random_range(lo + margin..hi - margin);
                    chart.evaluate(&prec.from_f64(t.rem_euclid(pi)))
                })
                .collect::<Result<Vec<_>>>()?;
            worst = worst.max(rank_ratio(&pts));
            tuples += 1;
        }
    }
    Ok(ProjectivityReport {
        tuples,
        worst_ratio: worst,
    })
}
