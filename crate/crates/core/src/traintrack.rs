//! Exact weights on the standard track around a multicurve `C = c_1 + ... + c_n`
//! and the linear action of the multitwist `T_C`.
//!
//! Near each `c_j` the track has three branches: `x_j` crossing the annulus,
//! `y_j` running around it, and `z_j = x_j + y_j` where they merge. Twisting
//! once adds `x_j` to both `y_j` and `z_j`. Everything else lives in an opaque
//! `rest` block the twist does not touch.

use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default denominator bound when rationalizing real inputs.
pub const DEFAULT_MAX_DENOMINATOR: u64 = 1_000_000_000_000;

/// Branch weights near one component.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComponentWeights {
    #[serde(with = "ratio_string")]
    pub x: BigRational,
    #[serde(with = "ratio_string")]
    pub y: BigRational,
    #[serde(with = "ratio_string")]
    pub z: BigRational,
}

impl ComponentWeights {
    pub fn new(x: BigRational, y: BigRational, z: BigRational) -> Self {
        ComponentWeights { x, y, z }
    }

    pub fn from_ints(x: i64, y: i64, z: i64) -> Self {
        ComponentWeights::new(int(x), int(y), int(z))
    }
}

/// Weight vector on the track; see the module docs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrackWeights {
    pub components: Vec<ComponentWeights>,
    #[serde(with = "ratio_vec")]
    pub rest: Vec<BigRational>,
}

impl TrackWeights {
    /// Validates nonnegativity and the switch condition `z = x + y`.
    pub fn new(components: Vec<ComponentWeights>, rest: Vec<BigRational>) -> Result<Self> {
        let w = TrackWeights { components, rest };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidWeights("no components".into()));
        }
        for (j, c) in self.components.iter().enumerate() {
            if c.x.is_negative() || c.y.is_negative() || c.z.is_negative() {
                return Err(Error::InvalidWeights(format!(
                    "negative weight at component {}",
                    j + 1
                )));
            }
            if c.z != &c.x + &c.y {
                return Err(Error::InvalidWeights(format!(
                    "switch condition fails at component {}: {} != {} + {}",
                    j + 1,
                    c.z,
                    c.x,
                    c.y
                )));
            }
        }
        if self.rest.iter().any(|r| r.is_negative()) {
            return Err(Error::InvalidWeights(
                "negative weight in rest block".into(),
            ));
        }
        Ok(())
    }

    /// Checks caller-supplied linear switch relations on the rest block:
    /// every row of `relations` must pair to zero with `rest`.
    pub fn validate_rest(&self, relations: &[Vec<BigInt>]) -> Result<()> {
        for (k, row) in relations.iter().enumerate() {
            if row.len() != self.rest.len() {
                return Err(Error::InvalidWeights(format!(
                    "relation {} has {} entries, rest has {}",
                    k + 1,
                    row.len(),
                    self.rest.len()
                )));
            }
            let s: BigRational = row
                .iter()
                .zip(&self.rest)
                .map(|(c, r)| r * BigRational::from_integer(c.clone()))
                .sum();
            if !s.is_zero() {
                return Err(Error::InvalidWeights(format!(
                    "rest relation {} evaluates to {s}",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    /// Flat coordinates `x_1, y_1, z_1, ..., x_n, y_n, z_n, rest...`.
    pub fn coordinates(&self) -> Vec<BigRational> {
        self.components
            .iter()
            .flat_map(|c| [c.x.clone(), c.y.clone(), c.z.clone()])
            .chain(self.rest.iter().cloned())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("weights serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let w: TrackWeights =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        w.validate()?;
        Ok(w)
    }
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// One application of `T_C`.
pub fn multitwist_step(w: &TrackWeights) -> Result<TrackWeights> {
    multitwist_power(w, 1)
}

/// `T_C^k` in closed form: `y_j += k x_j`, `z_j += k x_j`.
pub fn multitwist_power(w: &TrackWeights, k: u64) -> Result<TrackWeights> {
    w.validate()?;
    let k = BigRational::from_integer(BigInt::from(k));
    let components = w
        .components
        .iter()
        .map(|c| {
            let kx = &k * &c.x;
            ComponentWeights::new(c.x.clone(), &c.y + &kx, &c.z + &kx)
        })
        .collect();
    Ok(TrackWeights {
        components,
        rest: w.rest.clone(),
    })
}

/// Weights carried by the core curve `c_j` itself: `y_j = z_j = 1`, all else 0.
pub fn curve_class(j: usize, n: usize, rest_len: usize) -> Result<TrackWeights> {
    if j == 0 || j > n {
        return Err(Error::IndexOutOfRange { index: j, len: n });
    }
    let components = (1..=n)
        .map(|i| {
            if i == j {
                ComponentWeights::from_ints(0, 1, 1)
            } else {
                ComponentWeights::from_ints(0, 0, 0)
            }
        })
        .collect();
    Ok(TrackWeights {
        components,
        rest: vec![BigRational::zero(); rest_len],
    })
}

/// `x_j = i(mu, c_j)`.
pub fn intersection_with_component(w: &TrackWeights, j: usize) -> Result<BigRational> {
    w.components
        .get(j.wrapping_sub(1))
        .map(|c| c.x.clone())
        .ok_or(Error::IndexOutOfRange {
            index: j,
            len: w.n(),
        })
}

/// Matrix of one twist on [`TrackWeights::coordinates`].
pub fn step_matrix(n: usize, rest_len: usize) -> Vec<Vec<i64>> {
    let d = 3 * n + rest_len;
    let mut m = vec![vec![0i64; d]; d];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1;
    }
    for j in 0..n {
        m[3 * j + 1][3 * j] = 1;
        m[3 * j + 2][3 * j] = 1;
    }
    m
}

/// Best rational approximation of `x` with denominator at most `max_den`,
/// by continued fractions.
pub fn rationalize(x: f64, max_den: u64) -> Result<BigRational> {
    if !x.is_finite() {
        return Err(Error::RejectedParameter(format!("cannot rationalize {x}")));
    }
    if max_den == 0 {
        return Err(Error::RejectedParameter(
            "denominator bound must be positive".into(),
        ));
    }
    // The float is an exact dyadic rational; expand that, not the float.
    let exact = BigRational::from_float(x).expect("finite float");
    let bound = BigInt::from(max_den);
    let (mut p0, mut q0) = (BigInt::zero(), BigInt::one());
    let (mut p1, mut q1) = (BigInt::one(), BigInt::zero());
    let mut r = exact.clone();
    loop {
        let a = r.floor().to_integer();
        let q2 = &a * &q1 + &q0;
        if q2 > bound {
            // Semiconvergent with the largest admissible partial quotient.
            let t = (&bound - &q0).div_floor(&q1);
            let ps = &t * &p1 + &p0;
            let qs = &t * &q1 + &q0;
            let semi = BigRational::new(ps, qs);
            let conv = BigRational::new(p1.clone(), q1.clone());
            let closer = (&semi - &exact).abs() < (&conv - &exact).abs();
            return Ok(if closer { semi } else { conv });
        }
        let p2 = &a * &p1 + &p0;
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = &r - BigRational::from_integer(a);
        if frac.is_zero() {
            return Ok(BigRational::new(p1, q1));
        }
        r = frac.recip();
    }
}

/// Parses `"p/q"`, `"p"` or a decimal literal, rationalizing decimals.
pub fn parse_weight(s: &str, max_den: u64) -> Result<BigRational> {
    let s = s.trim();
    if let Ok(r) = BigRational::from_str(s) {
        return Ok(r);
    }
    let x: f64 = s
        .parse()
        .map_err(|_| Error::Parse(format!("bad weight {s:?}")))?;
    rationalize(x, max_den)
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

mod ratio_string {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_weight(&s, DEFAULT_MAX_DENOMINATOR).map_err(serde::de::Error::custom)
    }
}

mod ratio_vec {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        v: &[BigRational],
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let strings: Vec<String> = v
            .iter()
            .map(|r| format!("{}/{}", r.numer(), r.denom()))
            .collect();
        strings.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<BigRational>, D::Error> {
        let strings = Vec::<String>::deserialize(d)?;
        strings
            .iter()
            .map(|s| parse_weight(s, DEFAULT_MAX_DENOMINATOR).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    fn single(x: i64, y: i64) -> TrackWeights {
        TrackWeights::new(vec![ComponentWeights::from_ints(x, y, x + y)], vec![]).unwrap()
    }

    #[test]
    fn one_twist_adds_x() {
        let w = multitwist_step(&single(2, 3)).unwrap();
        assert_eq!(w.components[0], ComponentWeights::from_ints(2, 5, 7));
    }

    #[test]
    fn core_curves_are_fixed() {
        for n in 1..4 {
            for j in 1..=n {
                let c = curve_class(j, n, 2).unwrap();
                assert_eq!(multitwist_step(&c).unwrap(), c);
                assert_eq!(
                    intersection_with_component(&c, j).unwrap(),
                    BigRational::zero()
                );
            }
        }
        let c = curve_class(1, 2, 0).unwrap();
        assert_eq!(
            c.coordinates(),
            [0, 1, 1, 0, 0, 0].map(|v| r(v, 1)).to_vec()
        );
        assert!(curve_class(3, 2, 0).is_err());
        assert!(curve_class(0, 2, 0).is_err());
    }

    #[test]
    fn k_fold_twist() {
        let mut w = single(1, 0);
        for _ in 0..25 {
            w = multitwist_step(&w).unwrap();
        }
        assert_eq!(w.components[0], ComponentWeights::from_ints(1, 25, 26));
        assert_eq!(multitwist_power(&single(1, 0), 25).unwrap(), w);
    }

    #[test]
    fn switch_violation_rejected() {
        let bad = TrackWeights {
            components: vec![ComponentWeights::from_ints(1, 1, 3)],
            rest: vec![],
        };
        assert!(matches!(
            multitwist_step(&bad),
            Err(Error::InvalidWeights(_))
        ));
        assert!(TrackWeights::new(vec![ComponentWeights::from_ints(-1, 1, 0)], vec![]).is_err());
    }

    #[test]
    fn rest_relations() {
        let w = TrackWeights::new(
            vec![ComponentWeights::from_ints(1, 0, 1)],
            vec![r(1, 2), r(1, 2), r(1, 1)],
        )
        .unwrap();
        let ok = vec![vec![BigInt::from(1), BigInt::from(1), BigInt::from(-1)]];
        let bad = vec![vec![BigInt::from(1), BigInt::from(0), BigInt::from(-1)]];
        assert!(w.validate_rest(&ok).is_ok());
        assert!(w.validate_rest(&bad).is_err());
    }

    #[test]
    fn json_uses_ratio_strings() {
        let w = TrackWeights::new(
            vec![ComponentWeights::new(r(1, 3), r(2, 3), r(1, 1))],
            vec![r(5, 7)],
        )
        .unwrap();
        let text = w.to_json();
        assert!(text.contains("\"1/3\"") && text.contains("\"1/1\"") && text.contains("\"5/7\""));
        assert_eq!(TrackWeights::from_json(&text).unwrap(), w);
        let bad = text.replace("\"1/1\"", "\"2/1\"");
        assert!(TrackWeights::from_json(&bad).is_err());
    }

    #[test]
    fn rationalize_known_values() {
        assert_eq!(rationalize(0.5, 10).unwrap(), r(1, 2));
        assert_eq!(
            rationalize(std::f64::consts::PI, 1000).unwrap(),
            r(355, 113)
        );
        assert_eq!(rationalize(std::f64::consts::PI, 100).unwrap(), r(311, 99));
        assert_eq!(rationalize(-1.25, 1_000_000).unwrap(), r(-5, 4));
        let x = 0.1234567891234;
        let q = rationalize(x, DEFAULT_MAX_DENOMINATOR).unwrap();
        assert!((to_f64(&q) - x).abs() < 1e-12);
        assert!(rationalize(f64::NAN, 10).is_err());
    }

    fn square_minus_identity_squared(m: &[Vec<i64>]) -> Vec<Vec<i64>> {
        let d = m.len();
        let n: Vec<Vec<i64>> = (0..d)
            .map(|i| (0..d).map(|j| m[i][j] - i64::from(i == j)).collect())
            .collect();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| (0..d).map(|k| n[i][k] * n[k][j]).sum())
                    .collect()
            })
            .collect()
    }

    fn weights() -> impl Strategy<Value = TrackWeights> {
        let comp = (0i64..40, 1i64..9, 0i64..40, 1i64..9)
            .prop_map(|(a, b, c, d)| ComponentWeights::new(r(a, b), r(c, d), r(a, b) + r(c, d)));
        (
            prop::collection::vec(comp, 1..5),
            prop::collection::vec((0i64..30, 1i64..7), 0..4),
        )
            .prop_map(|(components, rest)| TrackWeights {
                components,
                rest: rest.into_iter().map(|(p, q)| r(p, q)).collect(),
            })
    }

    proptest! {
        #[test]
        fn step_is_unipotent(n in 1usize..6, rest in 0usize..4) {
            let m = step_matrix(n, rest);
            prop_assert!(square_minus_identity_squared(&m).iter().flatten().all(|&v| v == 0));
        }

        #[test]
        fn step_matches_matrix(w in weights()) {
            let m = step_matrix(w.n(), w.rest.len());
            let v = w.coordinates();
            let expect: Vec<BigRational> = m
                .iter()
                .map(|row| row.iter().zip(&v).map(|(a, b)| b * BigRational::from_integer(BigInt::from(*a))).sum())
                .collect();
            prop_assert_eq!(multitwist_step(&w).unwrap().coordinates(), expect);
        }

        #[test]
        fn iteration_keeps_switches_and_x(w in weights(), k in 1u64..200) {
            let mut cur = w.clone();
            for _ in 0..k.min(20) {
                cur = multitwist_step(&cur).unwrap();
                prop_assert!(cur.validate().is_ok());
            }
            let far = multitwist_power(&w, k).unwrap();
            prop_assert!(far.validate().is_ok());
            for j in 1..=w.n() {
                prop_assert_eq!(
                    intersection_with_component(&far, j).unwrap(),
                    intersection_with_component(&w, j).unwrap()
                );
            }
            prop_assert_eq!(&far.rest, &w.rest);
        }

        #[test]
        fn combinations_of_core_curves_are_fixed(lams in prop::collection::vec((0i64..20, 1i64..5), 1..5)) {
            let n = lams.len();
            let mut sum = curve_class(1, n, 1).unwrap();
            for c in sum.components.iter_mut() {
                *c = ComponentWeights::from_ints(0, 0, 0);
            }
            for (j, (p, q)) in lams.iter().enumerate() {
                let cj = curve_class(j + 1, n, 1).unwrap();
                let l = r(*p, *q);
                let c = &mut sum.components[j];
                c.y += &l * &cj.components[j].y;
                c.z += &l * &cj.components[j].z;
            }
            prop_assert_eq!(multitwist_step(&sum).unwrap(), sum);
        }
    }
}
