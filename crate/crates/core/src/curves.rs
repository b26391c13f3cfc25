//! The chain multicurve `a_1, b_g, a_2, b_{g-1}, ..., a_g, b_1`, its
//! intersection form, and weighted multicurves supported on one side.
//!
//! Two labelings are in play. Cylinders coming out of [`crate::flat_surface`]
//! carry *geometric* labels (by position in polygon 0). The chain system uses
//! *chain* labels. They differ by reversing both index families, see
//! [`chain_index`].

use std::fmt;
use std::ops::{Add, Mul};

use num_traits::Zero;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flat_surface::{
    decompose, CoreSegment, CurveLabel, Cylinder, Direction, TranslationSurface,
};
use crate::real::Tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::A => "A",
            Side::B => "B",
        })
    }
}

/// Geometric index to chain index (1-based) within one family. The map is an
/// involution, so it also converts back.
pub fn chain_index(g: usize, i: usize) -> usize {
    g + 1 - i
}

/// Chain multicurve of genus `g` with its `2g x 2g` intersection matrix.
///
/// Nodes are indexed `a_1..a_g` then `b_1..b_g`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSystem {
    genus: usize,
    order: Vec<CurveLabel>,
    matrix: Vec<Vec<u32>>,
}

impl ChainSystem {
    pub fn genus(&self) -> usize {
        self.genus
    }

    /// Labels in the order they occur along the chain.
    pub fn order(&self) -> &[CurveLabel] {
        &self.order
    }

    pub fn matrix(&self) -> &[Vec<u32>] {
        &self.matrix
    }

    /// Labels in node order.
    pub fn labels(&self) -> Vec<CurveLabel> {
        let g = self.genus;
        (1..=g)
            .map(CurveLabel::A)
            .chain((1..=g).map(CurveLabel::B))
            .collect()
    }

    pub fn node(&self, label: CurveLabel) -> Result<usize> {
        let g = self.genus;
        let (i, base) = match label {
            CurveLabel::A(i) => (i, 0),
            CurveLabel::B(i) => (i, g),
            CurveLabel::C(_) => {
                return Err(Error::RejectedParameter(format!(
                    "{label} is not a chain curve"
                )))
            }
        };
        if i == 0 || i > g {
            return Err(Error::IndexOutOfRange { index: i, len: g });
        }
        Ok(base + i - 1)
    }

    pub fn intersection(&self, x: CurveLabel, y: CurveLabel) -> Result<u32> {
        Ok(self.matrix[self.node(x)?][self.node(y)?])
    }

    /// The `g x g` block `I(a_i, b_j)`.
    pub fn ab_block(&self) -> Vec<Vec<u32>> {
        let g = self.genus;
        (0..g).map(|i| self.matrix[i][g..].to_vec()).collect()
    }
}

/// The chain system of genus `g`: path-graph adjacency in chain order.
pub fn chain_intersection_matrix(g: usize) -> Result<ChainSystem> {
    if g < 2 {
        return Err(Error::RejectedParameter(format!(
            "genus must be at least 2, got {g}"
        )));
    }
    let mut order = Vec::with_capacity(2 * g);
    for i in 1..=g {
        order.push(CurveLabel::A(i));
        order.push(CurveLabel::B(g + 1 - i));
    }
    let mut cs = ChainSystem {
        genus: g,
        order,
        matrix: vec![vec![0; 2 * g]; 2 * g],
    };
    for w in 0..2 * g - 1 {
        let p = cs.node(cs.order[w])?;
        let q = cs.node(cs.order[w + 1])?;
        cs.matrix[p][q] = 1;
        cs.matrix[q][p] = 1;
    }
    Ok(cs)
}

/// Leaf heights tried in turn; generic values keep crossings off polygon
/// edges and vertices.
const LEAF_FRACTIONS: [(f64, f64); 4] = [
    (0.4142, 0.618),
    (0.2718, 0.3271),
    (0.5772, 0.7213),
    (0.1732, 0.8660),
];

/// Counts transverse crossings of horizontal and vertical core leaves on the
/// flat surface. Rows are `a_i`, columns `b_j`, both in geometric labels.
pub fn derive_intersection_matrix(s: &TranslationSurface) -> Result<Vec<Vec<u32>>> {
    let horizontal = decompose(s, Direction::Horizontal)?;
    let vertical = decompose(s, Direction::Vertical)?;
    let (na, nb) = (horizontal.cylinders().len(), vertical.cylinders().len());
    let tol = s.tolerance();

    'fractions: for &(fa, fb) in &LEAF_FRACTIONS {
        let a_leaves: Vec<_> = (0..na).map(|i| horizontal.core_segments(i, fa)).collect();
        let b_leaves: Vec<_> = (0..nb).map(|j| vertical.core_segments(j, fb)).collect();
        let mut m = vec![vec![0u32; nb]; na];
        for (i, a) in a_leaves.iter().enumerate() {
            for (j, b) in b_leaves.iter().enumerate() {
                for sa in a {
                    for sb in b.iter().filter(|sb| sb.polygon == sa.polygon) {
                        match crossing(sa, sb, tol) {
                            Some(true) => m[i][j] += 1,
                            Some(false) => {}
                            None => continue 'fractions,
                        }
                    }
                }
            }
        }
        return Ok(m);
    }
    Err(Error::Degenerate(
        "core leaves meet non-transversally at every sampled height".into(),
    ))
}

/// `Some(true)` for a proper crossing, `Some(false)` for clearly disjoint
/// segments, `None` when an endpoint lies on the other segment's line.
fn crossing(a: &CoreSegment, b: &CoreSegment, tol: Tolerance) -> Option<bool> {
    let side =
        |p: &crate::real::Vec2, q: &crate::real::Vec2, r: &crate::real::Vec2| -> Option<i8> {
            let o = q.sub(p).cross(&r.sub(p));
            if tol.is_zero(&o) {
                None
            } else if o > 0 {
                Some(1)
            } else {
                Some(-1)
            }
        };
    let o1 = side(&b.start, &b.end, &a.start);
    let o2 = side(&b.start, &b.end, &a.end);
    let o3 = side(&a.start, &a.end, &b.start);
    let o4 = side(&a.start, &a.end, &b.end);
    match (o1, o2, o3, o4) {
        (Some(x1), Some(x2), Some(x3), Some(x4)) => Some(x1 != x2 && x3 != x4),
        // Touching lines only matter if the other pair straddles.
        (Some(x1), Some(x2), _, _) if x1 == x2 => Some(false),
        (_, _, Some(x3), Some(x4)) if x3 == x4 => Some(false),
        _ => None,
    }
}

/// Reorders a geometric `A x B` block into chain labels.
pub fn to_chain_labels(block: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let g = block.len();
    (1..=g)
        .map(|i| {
            (1..=g)
                .map(|j| block[chain_index(g, i) - 1][chain_index(g, j) - 1])
                .collect()
        })
        .collect()
}

/// Nonnegative weights on the components of `A` or of `B`, in chain labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedMulticurve<T> {
    pub side: Side,
    pub coefficients: Vec<T>,
}

impl<T> WeightedMulticurve<T>
where
    T: Clone + PartialOrd + Zero,
{
    pub fn new(side: Side, coefficients: Vec<T>) -> Result<Self> {
        if coefficients.iter().any(|c| *c < T::zero()) {
            return Err(Error::Pairing("negative coefficient".into()));
        }
        Ok(WeightedMulticurve { side, coefficients })
    }

    /// A single component with weight one.
    pub fn unit(side: Side, g: usize, index: usize) -> Result<Self>
    where
        T: num_traits::One,
    {
        if index == 0 || index > g {
            return Err(Error::IndexOutOfRange { index, len: g });
        }
        let mut c = vec![T::zero(); g];
        c[index - 1] = T::one();
        Ok(WeightedMulticurve {
            side,
            coefficients: c,
        })
    }

    pub fn is_projectivizable(&self) -> bool {
        self.coefficients.iter().any(|c| *c > T::zero())
    }
}

impl WeightedMulticurve<f64> {
    /// Heights of a cylinder decomposition as weights, converted from
    /// geometric to chain labels.
    pub fn from_heights(cyls: &[Cylinder]) -> Result<Self> {
        let side = match cyls.first().map(|c| c.label) {
            Some(CurveLabel::A(_)) => Side::A,
            Some(CurveLabel::B(_)) => Side::B,
            _ => {
                return Err(Error::Pairing(
                    "need horizontal or vertical cylinders".into(),
                ))
            }
        };
        let g = cyls.len();
        let mut c = vec![0.0; g];
        for cyl in cyls {
            c[chain_index(g, cyl.label.index()) - 1] = cyl.height.to_f64();
        }
        WeightedMulticurve::new(side, c)
    }
}

/// Bilinear pairing `sum u_i v_j I(a_i, b_j)`. Symmetric; same-side input is
/// an error.
pub fn pair<T>(u: &WeightedMulticurve<T>, v: &WeightedMulticurve<T>, cs: &ChainSystem) -> Result<T>
where
    T: Clone + PartialOrd + Zero + Add<Output = T> + Mul<Output = T>,
{
    pair_with(u, v, cs, false)
}

/// As [`pair`]; with `allow_same_side` two curves on the same side pair to
/// zero, since their components are disjoint.
pub fn pair_with<T>(
    u: &WeightedMulticurve<T>,
    v: &WeightedMulticurve<T>,
    cs: &ChainSystem,
    allow_same_side: bool,
) -> Result<T>
where
    T: Clone + PartialOrd + Zero + Add<Output = T> + Mul<Output = T>,
{
    let g = cs.genus();
    for w in [u, v] {
        if w.coefficients.len() != g {
            return Err(Error::Pairing(format!(
                "expected {g} coefficients, got {}",
                w.coefficients.len()
            )));
        }
        if !w.is_projectivizable() {
            return Err(Error::Pairing(
                "zero multicurve is not projectivizable".into(),
            ));
        }
    }
    if u.side == v.side {
        if allow_same_side {
            return Ok(T::zero());
        }
        return Err(Error::Pairing(format!(
            "both multicurves lie on side {}",
            u.side
        )));
    }
    let (a, b) = if u.side == Side::A { (u, v) } else { (v, u) };
    let block = cs.ab_block();
    let mut acc = T::zero();
    for (i, ai) in a.coefficients.iter().enumerate() {
        for (j, bj) in b.coefficients.iter().enumerate() {
            for _ in 0..block[i][j] {
                acc = acc + ai.clone() * bj.clone();
            }
        }
    }
    Ok(acc)
}

/// `i(nu_A, nu_B)` from cylinder heights and the chain matrix, at full
/// working precision.
pub fn height_pairing(s: &TranslationSurface) -> Result<Float> {
    let cs = chain_intersection_matrix(s.genus())?;
    let block = cs.ab_block();
    let ha = decompose(s, Direction::Horizontal)?.into_cylinders();
    let hb = decompose(s, Direction::Vertical)?.into_cylinders();
    let g = s.genus();
    let mut acc = s.precision().zero();
    for a in &ha {
        for b in &hb {
            let i = chain_index(g, a.label.index()) - 1;
            let j = chain_index(g, b.label.index()) - 1;
            if block[i][j] > 0 {
                acc += Float::with_val(acc.prec(), &a.height * &b.height) * block[i][j];
            }
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flat_surface::{area, build_double_polygon};
    use crate::real::{relative_error, Precision};
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use proptest::prelude::*;

    #[test]
    fn genus_two_chain_is_path_on_four() {
        let cs = chain_intersection_matrix(2).unwrap();
        let ones: u32 = cs.matrix().iter().flatten().sum();
        assert_eq!(ones, 6);
        assert_eq!(
            cs.order(),
            &[
                CurveLabel::A(1),
                CurveLabel::B(2),
                CurveLabel::A(2),
                CurveLabel::B(1)
            ]
        );
    }

    #[test]
    fn genus_four_b4_meets_a1() {
        let cs = chain_intersection_matrix(4).unwrap();
        assert_eq!(
            cs.intersection(CurveLabel::A(1), CurveLabel::B(4)).unwrap(),
            1
        );
        assert_eq!(
            cs.intersection(CurveLabel::A(1), CurveLabel::B(3)).unwrap(),
            0
        );
        assert_eq!(
            cs.intersection(CurveLabel::A(4), CurveLabel::B(1)).unwrap(),
            1
        );
        assert_eq!(
            cs.intersection(CurveLabel::B(1), CurveLabel::B(2)).unwrap(),
            0
        );
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn chain_structure_for_all_genera() {
        for g in 2..=8 {
            let cs = chain_intersection_matrix(g).unwrap();
            let m = cs.matrix();
            for i in 0..2 * g {
                let row: u32 = m[i].iter().sum();
                assert!(row == 1 || row == 2);
                for j in 0..2 * g {
                    assert_eq!(m[i][j], m[j][i]);
                    if (i < g) == (j < g) {
                        assert_eq!(m[i][j], 0);
                    }
                }
            }
        }
        assert!(chain_intersection_matrix(1).is_err());
    }

    #[test]
    fn flat_crossings_reproduce_the_chain() {
        let p = Precision::default();
        for g in 2..=6 {
            let s = build_double_polygon(g, p).unwrap();
            let geo = derive_intersection_matrix(&s).unwrap();
            let cs = chain_intersection_matrix(g).unwrap();
            assert_eq!(to_chain_labels(&geo), cs.ab_block(), "g = {g}");
        }
    }

    #[test]
    fn area_identity() {
        let p = Precision::default();
        for g in 2..=6 {
            let s = build_double_polygon(g, p).unwrap();
            let lhs = height_pairing(&s).unwrap();
            assert!(relative_error(&lhs, &area(&s)) < 1e-10, "g = {g}");

            let cs = chain_intersection_matrix(g).unwrap();
            let nu_a = WeightedMulticurve::from_heights(
                &decompose(&s, Direction::Horizontal)
                    .unwrap()
                    .into_cylinders(),
            )
            .unwrap();
            let nu_b = WeightedMulticurve::from_heights(
                &decompose(&s, Direction::Vertical).unwrap().into_cylinders(),
            )
            .unwrap();
            let v = pair(&nu_b, &nu_a, &cs).unwrap();
            assert!((v - area(&s).to_f64()).abs() < 1e-10 * v);
        }
    }

    #[test]
    fn unit_pairings() {
        let cs = chain_intersection_matrix(3).unwrap();
        let a1 = WeightedMulticurve::<f64>::unit(Side::A, 3, 1).unwrap();
        let b3 = WeightedMulticurve::<f64>::unit(Side::B, 3, 3).unwrap();
        let b1 = WeightedMulticurve::<f64>::unit(Side::B, 3, 1).unwrap();
        assert_eq!(pair(&a1, &b3, &cs).unwrap(), 1.0);
        assert_eq!(pair(&b3, &a1, &cs).unwrap(), 1.0);
        assert_eq!(pair(&a1, &b1, &cs).unwrap(), 0.0);
        assert!(pair(&b1, &b3, &cs).is_err());
        assert_eq!(pair_with(&b1, &b3, &cs, true).unwrap(), 0.0);
        let zero = WeightedMulticurve::new(Side::A, vec![0.0; 3]).unwrap();
        assert!(pair(&zero, &b3, &cs).is_err());
        assert!(WeightedMulticurve::new(Side::A, vec![-1.0, 0.0, 1.0]).is_err());
    }

    fn rational() -> impl Strategy<Value = BigRational> {
        (0i64..50, 1i64..20).prop_map(|(p, q)| BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    fn positive_vec(g: usize) -> impl Strategy<Value = Vec<BigRational>> {
        prop::collection::vec(rational(), g).prop_map(|mut v| {
            v[0] += BigRational::from_integer(BigInt::from(1));
            v
        })
    }

    fn triple(
    ) -> impl Strategy<Value = (usize, Vec<BigRational>, Vec<BigRational>, Vec<BigRational>)> {
        (2usize..6).prop_flat_map(|g| (Just(g), positive_vec(g), positive_vec(g), positive_vec(g)))
    }

    proptest! {
        #[test]
        fn pairing_is_bilinear((g, u, u2, v) in triple(), alpha in rational()) {
            let cs = chain_intersection_matrix(g).unwrap();
            let mk = |side, c: &Vec<BigRational>| WeightedMulticurve::new(side, c.clone()).unwrap();
            let combo: Vec<BigRational> = u.iter().zip(&u2).map(|(x, y)| &alpha * x + y).collect();
            let lhs = pair(&mk(Side::A, &combo), &mk(Side::B, &v), &cs).unwrap();
            let rhs = &alpha * pair(&mk(Side::A, &u), &mk(Side::B, &v), &cs).unwrap()
                + pair(&mk(Side::A, &u2), &mk(Side::B, &v), &cs).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
