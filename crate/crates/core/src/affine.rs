//! Derivatives of affine automorphisms: the parabolic multitwist shears, the
//! central involution, and words in them.

use std::fmt;
use std::str::FromStr;

use rug::Float;

use crate::error::{Error, Result};
use crate::flat_surface::{
    cylinder_decomposition, CurveLabel, Cylinder, Direction, TranslationSurface,
};
use crate::real::{Precision, Tolerance};

/// Tolerance on `|trace| - 2` when classifying.
pub const TRACE_TOLERANCE: f64 = 1e-9;

/// Tolerance on `det - 1` for an element of SL(2, R).
pub const DET_TOLERANCE: f64 = 1e-12;

/// A real 2x2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, PartialEq)]
pub struct Mat2 {
    pub a: Float,
    pub b: Float,
    pub c: Float,
    pub d: Float,
}

impl fmt::Debug for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{:.12}, {:.12}], [{:.12}, {:.12}]]",
            self.a.to_f64(),
            self.b.to_f64(),
            self.c.to_f64(),
            self.d.to_f64()
        )
    }
}

impl Mat2 {
    pub fn new(a: Float, b: Float, c: Float, d: Float) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn identity(prec: Precision) -> Self {
        Mat2::new(prec.from_i64(1), prec.zero(), prec.zero(), prec.from_i64(1))
    }

    pub fn neg_identity(prec: Precision) -> Self {
        Mat2::new(
            prec.from_i64(-1),
            prec.zero(),
            prec.zero(),
            prec.from_i64(-1),
        )
    }

    pub fn from_f64(prec: Precision, m: [[f64; 2]; 2]) -> Self {
        Mat2::new(
            prec.from_f64(m[0][0]),
            prec.from_f64(m[0][1]),
            prec.from_f64(m[1][0]),
            prec.from_f64(m[1][1]),
        )
    }

    fn prec(&self) -> u32 {
        self.a
            .prec()
            .max(self.b.prec())
            .max(self.c.prec())
            .max(self.d.prec())
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let p = self.prec().max(o.prec());
        let dot = |x: &Float, y: &Float, z: &Float, w: &Float| {
            Float::with_val(p, x * y) + Float::with_val(p, z * w)
        };
        Mat2::new(
            dot(&self.a, &o.a, &self.b, &o.c),
            dot(&self.a, &o.b, &self.b, &o.d),
            dot(&self.c, &o.a, &self.d, &o.c),
            dot(&self.c, &o.b, &self.d, &o.d),
        )
    }

    pub fn neg(&self) -> Mat2 {
        Mat2::new(
            -self.a.clone(),
            -self.b.clone(),
            -self.c.clone(),
            -self.d.clone(),
        )
    }

    pub fn det(&self) -> Float {
        let p = self.prec();
        Float::with_val(p, &self.a * &self.d) - Float::with_val(p, &self.b * &self.c)
    }

    pub fn trace(&self) -> Float {
        Float::with_val(self.prec(), &self.a + &self.d)
    }

    /// Inverse of a determinant-one matrix, `[[d, -b], [-c, a]]`.
    pub fn sl2_inverse(&self) -> Mat2 {
        Mat2::new(
            self.d.clone(),
            -self.b.clone(),
            -self.c.clone(),
            self.a.clone(),
        )
    }

    /// Integer power of a determinant-one matrix by repeated squaring.
    pub fn pow(&self, k: i64) -> Mat2 {
        let prec = Precision::new(self.prec()).unwrap_or_default();
        let mut base = if k < 0 {
            self.sl2_inverse()
        } else {
            self.clone()
        };
        let mut e = k.unsigned_abs();
        let mut acc = Mat2::identity(prec);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    pub fn approx_eq(&self, o: &Mat2, tol: Tolerance) -> bool {
        tol.eq(&self.a, &o.a)
            && tol.eq(&self.b, &o.b)
            && tol.eq(&self.c, &o.c)
            && tol.eq(&self.d, &o.d)
    }

    pub fn to_f64(&self) -> [[f64; 2]; 2] {
        [
            [self.a.to_f64(), self.b.to_f64()],
            [self.c.to_f64(), self.d.to_f64()],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    /// `+Id` or `-Id`.
    Identity,
    Parabolic,
    Elliptic,
    Hyperbolic,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Identity => "identity",
            Classification::Parabolic => "parabolic",
            Classification::Elliptic => "elliptic",
            Classification::Hyperbolic => "hyperbolic",
        })
    }
}

/// Conjugacy type of an element of SL(2, R) read off from `|trace|`.
pub fn classify(m: &Mat2) -> Result<Classification> {
    let det = m.det();
    let off = Float::with_val(det.prec(), &det - 1u32).abs();
    if off > DET_TOLERANCE {
        return Err(Error::InvalidMatrix(format!("{}", det.to_f64())));
    }
    let tol = Tolerance::new(TRACE_TOLERANCE).expect("positive");
    let prec = Precision::new(m.prec()).unwrap_or_default();
    if m.approx_eq(&Mat2::identity(prec), tol) || m.approx_eq(&Mat2::neg_identity(prec), tol) {
        return Ok(Classification::Identity);
    }
    let t = m.trace().abs();
    let gap = Float::with_val(t.prec(), &t - 2u32);
    Ok(if gap.clone().abs() <= TRACE_TOLERANCE {
        Classification::Parabolic
    } else if gap < 0 {
        Classification::Elliptic
    } else {
        Classification::Hyperbolic
    })
}

/// Derivative of the multitwist in a family of parallel cylinders of equal
/// modulus: the shear by `lambda = circumference / height` along the core
/// direction. Horizontal gives `[[1, lambda], [0, 1]]`, vertical
/// `[[1, 0], [-lambda, 1]]`, other directions the rotation conjugate.
pub fn twist_derivative(cyls: &[Cylinder], tol: Tolerance) -> Result<Mat2> {
    let first = cyls
        .first()
        .ok_or_else(|| Error::RejectedParameter("no cylinders".into()))?;
    let modulus = first.modulus();
    for c in &cyls[1..] {
        if !tol.eq(&c.modulus(), &modulus) {
            return Err(Error::NotParabolic(
                format!("{}", modulus.to_f64()),
                format!("{}", c.modulus().to_f64()),
            ));
        }
        if c.direction != first.direction {
            return Err(Error::RejectedParameter(
                "cylinders in different directions".into(),
            ));
        }
    }
    let prec = Precision::new(modulus.prec()).unwrap_or_default();
    let lambda = Float::with_val(prec.bits(), &first.circumference / &first.height);
    let one = || prec.from_i64(1);
    Ok(match first.label {
        CurveLabel::A(_) => Mat2::new(one(), lambda, prec.zero(), one()),
        CurveLabel::B(_) => Mat2::new(one(), prec.zero(), -lambda, one()),
        CurveLabel::C(_) => {
            // R S R^-1 with S the horizontal shear and R rotation by the direction.
            let (s, c) = first.direction.clone().sin_cos(prec.zero());
            let cc = Float::with_val(prec.bits(), &c * &c);
            let ss = Float::with_val(prec.bits(), &s * &s);
            let cs = Float::with_val(prec.bits(), &c * &s);
            let l_cs = Float::with_val(prec.bits(), &lambda * &cs);
            Mat2::new(
                one() - l_cs.clone(),
                Float::with_val(prec.bits(), &lambda * &cc),
                -Float::with_val(prec.bits(), &lambda * &ss),
                one() + l_cs,
            )
        }
    })
}

/// Generators of the affine words: the two multitwists and the hyperelliptic
/// involution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Generator {
    TwistA,
    TwistB,
    Sigma,
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Generator::TwistA => "TA",
            Generator::TwistB => "TB",
            Generator::Sigma => "sigma",
        })
    }
}

/// Word in `TA`, `TB`, `sigma` with integer exponents. Adjacent equal
/// twists are merged and zero exponents dropped; `sigma` is central of order
/// two, so it is kept as a parity written at the end.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct AffineWord {
    twists: Vec<(Generator, i64)>,
    sigma: bool,
}

impl AffineWord {
    pub fn new(letters: impl IntoIterator<Item = (Generator, i64)>) -> Self {
        let mut w = AffineWord::default();
        for (g, e) in letters {
            w.push(g, e);
        }
        w
    }

    /// Letters in normal form, `sigma` last.
    pub fn letters(&self) -> Vec<(Generator, i64)> {
        let mut out = self.twists.clone();
        if self.sigma {
            out.push((Generator::Sigma, 1));
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.twists.is_empty() && !self.sigma
    }

    fn push(&mut self, g: Generator, e: i64) {
        if g == Generator::Sigma {
            self.sigma ^= e.rem_euclid(2) == 1;
            return;
        }
        let mut e = e;
        if let Some(&(last, f)) = self.twists.last() {
            if last == g {
                e += f;
                self.twists.pop();
            }
        }
        if e != 0 {
            self.twists.push((g, e));
        }
    }

    pub fn concat(&self, o: &AffineWord) -> AffineWord {
        let mut w = self.clone();
        for (g, e) in o.letters() {
            w.push(g, e);
        }
        w
    }

    pub fn pow(&self, k: u32) -> AffineWord {
        let mut w = AffineWord::default();
        for _ in 0..k {
            w = w.concat(self);
        }
        w
    }
}

impl fmt::Display for AffineWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self
            .letters()
            .iter()
            .map(|&(g, e)| {
                if e == 1 {
                    g.to_string()
                } else {
                    format!("{g}^{e}")
                }
            })
            .collect();
        f.write_str(&parts.join(" "))
    }
}

impl FromStr for AffineWord {
    type Err = Error;

    /// Parses whitespace-separated letters such as `TA^3 sigma TB^-2`.
    fn from_str(s: &str) -> Result<Self> {
        let mut letters = Vec::new();
        for token in s.split_whitespace() {
            let (name, exp) = match token.split_once('^') {
                Some((n, e)) => (
                    n,
                    e.parse::<i64>()
                        .map_err(|_| Error::Parse(format!("bad exponent in {token:?}")))?,
                ),
                None => (token, 1),
            };
            let g = match name {
                "TA" | "T_A" => Generator::TwistA,
                "TB" | "T_B" => Generator::TwistB,
                "sigma" | "s" => Generator::Sigma,
                _ => return Err(Error::Parse(format!("unknown generator {name:?}"))),
            };
            letters.push((g, exp));
        }
        Ok(AffineWord::new(letters))
    }
}

/// An affine automorphism known through its derivative and a word label.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineElement {
    pub derivative: Mat2,
    pub label: AffineWord,
}

impl AffineElement {
    pub fn compose(&self, o: &AffineElement) -> AffineElement {
        AffineElement {
            derivative: self.derivative.mul(&o.derivative),
            label: self.label.concat(&o.label),
        }
    }

    pub fn trace(&self) -> Float {
        self.derivative.trace()
    }

    pub fn classify(&self) -> Result<Classification> {
        classify(&self.derivative)
    }
}

/// Derivatives of `T_A`, `T_B` and `sigma` for one surface.
#[derive(Debug, Clone)]
pub struct AffineGenerators {
    pub twist_a: Mat2,
    pub twist_b: Mat2,
    pub sigma: Mat2,
    genus: usize,
}

impl AffineGenerators {
    pub fn from_surface(s: &TranslationSurface) -> Result<Self> {
        let tol = s.tolerance();
        let twist_a = twist_derivative(&cylinder_decomposition(s, Direction::Horizontal)?, tol)?;
        let twist_b = twist_derivative(&cylinder_decomposition(s, Direction::Vertical)?, tol)?;
        Ok(AffineGenerators {
            twist_a,
            twist_b,
            sigma: Mat2::neg_identity(s.precision()),
            genus: s.genus(),
        })
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    fn generator(&self, g: Generator) -> &Mat2 {
        match g {
            Generator::TwistA => &self.twist_a,
            Generator::TwistB => &self.twist_b,
            Generator::Sigma => &self.sigma,
        }
    }

    /// Derivative of a word, as the ordered product of generator powers.
    pub fn evaluate(&self, word: &AffineWord) -> AffineElement {
        let prec = Precision::new(self.twist_a.prec()).unwrap_or_default();
        let mut m = Mat2::identity(prec);
        for (g, e) in word.letters() {
            m = m.mul(&self.generator(g).pow(e));
        }
        AffineElement {
            derivative: m,
            label: word.clone(),
        }
    }

    /// `T_A^{2(2g+1)} sigma`.
    pub fn g0_generator(&self) -> AffineElement {
        let power = 2 * (2 * self.genus as i64 + 1);
        self.evaluate(&AffineWord::new([
            (Generator::TwistA, power),
            (Generator::Sigma, 1),
        ]))
    }
}

/// Generator `T_A^{2(2g+1)} sigma` of the cyclic edge group, evaluated on `s`.
pub fn g0_generator(g: usize, s: &TranslationSurface) -> Result<AffineElement> {
    if s.genus() != g {
        return Err(Error::RejectedParameter(format!(
            "surface has genus {}, expected {g}",
            s.genus()
        )));
    }
    Ok(AffineGenerators::from_surface(s)?.g0_generator())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flat_surface::build_double_polygon;

    fn prec() -> Precision {
        Precision::default()
    }

    fn gens(g: usize) -> AffineGenerators {
        AffineGenerators::from_surface(&build_double_polygon(g, prec()).unwrap()).unwrap()
    }

    #[test]
    fn classify_basic() {
        let p = prec();
        assert_eq!(
            classify(&Mat2::from_f64(p, [[1.0, 3.0], [0.0, 1.0]])).unwrap(),
            Classification::Parabolic
        );
        assert_eq!(
            classify(&Mat2::from_f64(p, [[0.0, -1.0], [1.0, 0.0]])).unwrap(),
            Classification::Elliptic
        );
        assert_eq!(
            classify(&Mat2::from_f64(p, [[2.0, 1.0], [1.0, 1.0]])).unwrap(),
            Classification::Hyperbolic
        );
        assert_eq!(
            classify(&Mat2::neg_identity(p)).unwrap(),
            Classification::Identity
        );
        assert!(matches!(
            classify(&Mat2::from_f64(p, [[2.0, 0.0], [0.0, 1.0]])),
            Err(Error::InvalidMatrix(_))
        ));
    }

    #[test]
    fn twist_a_is_unipotent_upper() {
        let s = build_double_polygon(2, prec()).unwrap();
        let cyls = cylinder_decomposition(&s, Direction::Horizontal).unwrap();
        let m = twist_derivative(&cyls, Tolerance::default()).unwrap();
        assert_eq!(m.trace(), 2);
        assert!(m.c.is_zero());
        for c in &cyls {
            let lambda = Float::with_val(128, &c.circumference / &c.height);
            assert!(crate::real::relative_error(&lambda, &m.b) < 1e-12);
        }
        // lambda = 2 cot(pi/5) for the double pentagon.
        let expect = 2.0 / (std::f64::consts::PI / 5.0).tan();
        assert!((m.b.to_f64() - expect).abs() < 1e-12);
    }

    #[test]
    fn unequal_moduli_rejected() {
        let p = prec();
        let cyl = |c: f64, h: f64, i| Cylinder {
            direction: p.zero(),
            label: CurveLabel::A(i),
            circumference: p.from_f64(c),
            height: p.from_f64(h),
        };
        let err = twist_derivative(&[cyl(1.0, 1.0, 1), cyl(1.0, 2.0, 2)], Tolerance::default());
        assert!(matches!(err, Err(Error::NotParabolic(..))));
    }

    #[test]
    fn both_twists_parabolic() {
        for g in 2..=8 {
            let gs = gens(g);
            assert_eq!(
                classify(&gs.twist_a).unwrap(),
                Classification::Parabolic,
                "g={g}"
            );
            assert_eq!(
                classify(&gs.twist_b).unwrap(),
                Classification::Parabolic,
                "g={g}"
            );
        }
    }

    #[test]
    fn product_of_twists_is_order_2g_plus_1_elliptic() {
        // For the chain, D(TA) D(TB) has trace 2 - lambda_A lambda_B = -2 cos(2 pi / (2g+1)).
        for g in 2..=5 {
            let gs = gens(g);
            let m = gs.twist_a.mul(&gs.twist_b);
            assert_eq!(classify(&m).unwrap(), Classification::Elliptic);
            let expect = -2.0 * (2.0 * std::f64::consts::PI / (2 * g + 1) as f64).cos();
            assert!((m.trace().to_f64() - expect).abs() < 1e-12);
            // Order 2g+1 in PSL: the power is +-Id.
            assert_eq!(
                classify(&m.pow((2 * g + 1) as i64)).unwrap(),
                Classification::Identity
            );
            let h = gs.twist_a.mul(&gs.twist_b.sl2_inverse());
            assert_eq!(classify(&h).unwrap(), Classification::Hyperbolic);
        }
    }

    #[test]
    fn g0_generator_trace_minus_two() {
        for g in 2..=4 {
            let gs = gens(g);
            let z = gs.g0_generator();
            assert_eq!(z.trace(), -2);
            assert_eq!(z.label.to_string(), format!("TA^{} sigma", 2 * (2 * g + 1)));
            let shear = Float::with_val(128, &gs.twist_a.b * (2 * (2 * g + 1)) as u32);
            assert!(crate::real::relative_error(&z.derivative.b, &(-shear)) < 1e-30);
            let sq = z.compose(&z);
            assert_eq!(sq.trace(), 2);
            assert_eq!(sq.label.to_string(), format!("TA^{}", 4 * (2 * g + 1)));
            assert_eq!(classify(&sq.derivative).unwrap(), Classification::Parabolic);
        }
    }

    #[test]
    fn g0_generator_checks_genus() {
        let s = build_double_polygon(3, prec()).unwrap();
        assert!(g0_generator(2, &s).is_err());
        let z = g0_generator(3, &s).unwrap();
        assert_eq!(z.trace(), -2);
    }

    #[test]
    fn word_parsing_and_normalization() {
        let w: AffineWord = "TA^2 TA^-2 sigma TB sigma sigma".parse().unwrap();
        assert_eq!(w.to_string(), "TB sigma");
        assert!("TC".parse::<AffineWord>().is_err());
        assert!("TA^x".parse::<AffineWord>().is_err());
    }

    #[test]
    fn derivative_is_multiplicative_on_short_words() {
        // Every word of length <= 4 over {TA^+-1, TB^+-1, sigma}, split at every point.
        let gs = gens(2);
        let alphabet = [
            (Generator::TwistA, 1),
            (Generator::TwistA, -1),
            (Generator::TwistB, 1),
            (Generator::TwistB, -1),
            (Generator::Sigma, 1),
        ];
        let mut words: Vec<Vec<(Generator, i64)>> = vec![vec![]];
        let mut frontier = words.clone();
        for _ in 0..4 {
            let mut next = Vec::new();
            for w in &frontier {
                for &l in &alphabet {
                    let mut v = w.clone();
                    v.push(l);
                    next.push(v);
                }
            }
            words.extend(next.iter().cloned());
            frontier = next;
        }
        assert_eq!(words.len(), 1 + 5 + 25 + 125 + 625);
        let tol = Tolerance::new(1e-20).unwrap();
        for w in &words {
            let whole = gs.evaluate(&AffineWord::new(w.clone())).derivative;
            for cut in 0..=w.len() {
                let left = gs.evaluate(&AffineWord::new(w[..cut].to_vec())).derivative;
                let right = gs.evaluate(&AffineWord::new(w[cut..].to_vec())).derivative;
                assert!(whole.approx_eq(&left.mul(&right), tol), "{w:?} at {cut}");
            }
        }
    }
}
