//! Vertical heights `w`, the proportionality set `Y`, and the separation
//! between the twist limit `[sum v_j b_j]` and `[nu_B] = [sum w_j b_j]`.
//!
//! Vectors here are indexed like the vertical cylinders, `b_1..b_g` in
//! geometric labels.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::Float;
use serde::Serialize;

use crate::dynamics::{iterate, ProjectiveClass};
use crate::error::{Error, Result};
use crate::flat_surface::{
    build_double_polygon, cylinder_decomposition, Direction, TranslationSurface,
};
use crate::real::Precision;
use crate::traintrack::{rationalize, ComponentWeights, TrackWeights, DEFAULT_MAX_DENOMINATOR};

/// Default relative tolerance for the real-valued proportionality test.
pub const DEFAULT_Y_TOLERANCE: f64 = 1e-10;

/// Heights `w_1..w_g` of the vertical cylinders.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightVector(pub Vec<Float>);

impl HeightVector {
    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(Float::to_f64).collect()
    }

    /// Exact rational stand-ins with denominators at most `max_den`.
    pub fn rationalized(&self, max_den: u64) -> Result<Vec<BigRational>> {
        self.0
            .iter()
            .map(|h| rationalize(h.to_f64(), max_den))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Intersection numbers `v_j = i(mu, b_j)` of a candidate class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BVector(pub Vec<f64>);

pub fn heights(s: &TranslationSurface) -> Result<HeightVector> {
    Ok(HeightVector(
        cylinder_decomposition(s, Direction::Vertical)?
            .into_iter()
            .map(|c| c.height)
            .collect(),
    ))
}

fn check_positive(v: &[f64], g: usize) -> Result<()> {
    if v.len() != g {
        return Err(Error::RejectedParameter(format!(
            "expected {g} entries, got {}",
            v.len()
        )));
    }
    if let Some(j) = v.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::HypothesisViolation(format!(
            "v_{} = {} is not positive",
            j + 1,
            v[j]
        )));
    }
    Ok(())
}

/// `v` and `w` proportional: `|v_i w_j - v_j w_i| <= tol * max_k |v_k| max_k |w_k|`.
pub fn in_y(v: &BVector, w: &HeightVector, tol: f64) -> Result<bool> {
    let wf = w.to_f64();
    check_positive(&v.0, wf.len())?;
    let scale =
        v.0.iter().fold(0.0f64, |a, x| a.max(*x)) * wf.iter().fold(0.0f64, |a, x| a.max(*x));
    for i in 0..wf.len() {
        for j in i + 1..wf.len() {
            if (v.0[i] * wf[j] - v.0[j] * wf[i]).abs() > tol * scale {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Exact proportionality of rational vectors.
pub fn in_y_exact(v: &[BigRational], w: &[BigRational]) -> Result<bool> {
    if v.len() != w.len() {
        return Err(Error::RejectedParameter("length mismatch".into()));
    }
    if v.iter().any(|x| !x.is_positive()) {
        return Err(Error::HypothesisViolation(
            "entries must be positive".into(),
        ));
    }
    Ok((0..v.len()).all(|i| (i + 1..v.len()).all(|j| &v[i] * &w[j] == &v[j] * &w[i])))
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub in_y: bool,
    /// Projective distance from the twist limit to `[nu_B]`; counts as zero
    /// up to the tolerance of the membership test.
    pub separation: f64,
    pub limit_class: ProjectiveClass,
    pub nu_b_class: ProjectiveClass,
}

/// Twisting along `B` sends a class with `b`-intersections `v` to
/// `[sum v_j b_j]`. Compares that limit with `[nu_B]`.
pub fn contradiction_witness(v: &BVector, w: &HeightVector) -> Result<Witness> {
    contradiction_witness_with(v, w, DEFAULT_Y_TOLERANCE)
}

pub fn contradiction_witness_with(v: &BVector, w: &HeightVector, tol: f64) -> Result<Witness> {
    let member = in_y(v, w, tol)?;
    let limit_class = ProjectiveClass::new(&v.0)?;
    let nu_b_class = ProjectiveClass::new(&w.to_f64())?;
    let separation = limit_class.distance(&nu_b_class);
    Ok(Witness {
        in_y: member,
        separation,
        limit_class,
        nu_b_class,
    })
}

/// The same limit, reached by `k` explicit twists of a track vector with
/// `x_j = v_j` and `y_j = 1`, read off on the `y` branches.
pub fn limit_by_iteration(v: &[BigRational], k: u64) -> Result<ProjectiveClass> {
    let one = BigRational::from_integer(BigInt::from(1));
    let w = TrackWeights::new(
        v.iter()
            .map(|x| ComponentWeights::new(x.clone(), one.clone(), x + &one))
            .collect(),
        vec![],
    )?;
    let full = iterate(&w, k)?;
    let y: Vec<f64> = (0..v.len())
        .map(|j| full.coordinates()[3 * j + 1])
        .collect();
    ProjectiveClass::new(&y)
}

/// Random positive rational vector; entries `p/q` with `p, q` in `1..=1000`.
pub fn sample_bvector<R: Rng>(rng: &mut R, g: usize) -> Vec<BigRational> {
    (0..g)
        .map(|_| {
            let p: i64 = rng.random_range(1..=1000);
            let q: i64 = rng.random_range(1..=1000);
            BigRational::new(BigInt::from(p), BigInt::from(q))
        })
        .collect()
}

/// Generator for sample `index` of a run: its own ChaCha stream, so the
/// result does not depend on scheduling.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Serialize)]
pub struct GenericityReport {
    pub genus: usize,
    pub samples: usize,
    pub seed: u64,
    pub hits: usize,
    pub fraction_in_y: f64,
    /// Sample indices that landed in `Y`, in order.
    pub hit_indices: Vec<usize>,
}

/// Fraction of random rational `b`-vectors exactly proportional to the
/// rationalized heights. `plant` replaces one sample by `w` itself.
pub fn genericity_sample(
    g: usize,
    n_samples: usize,
    rng_seed: u64,
    plant: Option<usize>,
    prec: Precision,
) -> Result<GenericityReport> {
    if n_samples == 0 {
        return Err(Error::RejectedParameter("need at least one sample".into()));
    }
    let s = build_double_polygon(g, prec)?;
    let w = heights(&s)?.rationalized(DEFAULT_MAX_DENOMINATOR)?;
    let hits_mask: Vec<bool> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let v = if plant == Some(i) {
                w.clone()
            } else {
                sample_bvector(&mut sample_rng(rng_seed, i as u64), g)
            };
            in_y_exact(&v, &w)
        })
        .collect::<Result<_>>()?;
    let hit_indices: Vec<usize> = hits_mask
        .iter()
        .enumerate()
        .filter(|(_, h)| **h)
        .map(|(i, _)| i)
        .collect();
    Ok(GenericityReport {
        genus: g,
        samples: n_samples,
        seed: rng_seed,
        hits: hit_indices.len(),
        fraction_in_y: hit_indices.len() as f64 / n_samples as f64,
        hit_indices,
    })
}

pub fn to_f64_vec(v: &[BigRational]) -> Vec<f64> {
    v.iter().map(crate::traintrack::to_f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::relative_error;

    fn surface(g: usize) -> TranslationSurface {
        build_double_polygon(g, Precision::default()).unwrap()
    }

    #[test]
    fn heights_are_the_vertical_cylinder_heights() {
        for g in 2..=5 {
            let s = surface(g);
            let w = heights(&s).unwrap();
            let cyls = cylinder_decomposition(&s, Direction::Vertical).unwrap();
            assert_eq!(w.len(), g);
            for (h, c) in w.0.iter().zip(&cyls) {
                assert_eq!(h, &c.height);
                assert!(*h > 0);
            }
            let total = cyls.iter().fold(Float::new(128), |a, c| a + c.area());
            assert!(relative_error(&total, &crate::flat_surface::area(&s)) < 1e-12);
        }
    }

    #[test]
    fn genus_two_height_ratio_is_golden() {
        let w = heights(&surface(2)).unwrap().to_f64();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let ratio = w[0].max(w[1]) / w[0].min(w[1]);
        assert!((ratio - phi).abs() < 1e-12, "{ratio}");
    }

    #[test]
    fn membership_examples() {
        let w = heights(&surface(3)).unwrap();
        let wf = w.to_f64();
        assert!(in_y(&BVector(wf.clone()), &w, 1e-10).unwrap());
        assert!(in_y(&BVector(wf.iter().map(|x| 2.0 * x).collect()), &w, 1e-10).unwrap());
        let mut bumped = wf.clone();
        bumped[1] *= 1.1;
        assert!(!in_y(&BVector(bumped), &w, 1e-10).unwrap());
        let mut zero = wf.clone();
        zero[0] = 0.0;
        assert!(matches!(
            in_y(&BVector(zero), &w, 1e-10),
            Err(Error::HypothesisViolation(_))
        ));
    }

    #[test]
    fn witness_examples() {
        let w = heights(&surface(2)).unwrap();
        let wf = w.to_f64();
        let same = contradiction_witness(&BVector(wf.clone()), &w).unwrap();
        assert!(same.in_y && same.separation <= 1e-15);
        let mut doubled = wf.clone();
        doubled[0] *= 2.0;
        let wit = contradiction_witness(&BVector(doubled), &w).unwrap();
        assert!(!wit.in_y && wit.separation > 1e-6);
    }

    #[test]
    fn iteration_reaches_the_same_limit() {
        let mut rng = sample_rng(3, 0);
        for g in 2..=5 {
            let v = sample_bvector(&mut rng, g);
            let it = limit_by_iteration(&v, 10_000).unwrap();
            let closed = ProjectiveClass::new(&to_f64_vec(&v)).unwrap();
            assert!(it.distance(&closed) < 1e-3);
        }
    }

    #[test]
    fn sampling_misses_y_and_finds_the_plant() {
        let p = Precision::default();
        let r = genericity_sample(2, 1000, 9, None, p).unwrap();
        assert_eq!(r.fraction_in_y, 0.0);
        let r = genericity_sample(2, 1000, 9, Some(17), p).unwrap();
        assert_eq!(r.hit_indices, vec![17]);
        assert_eq!(r.fraction_in_y, 1.0 / 1000.0);
        assert!(genericity_sample(2, 0, 9, None, p).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_bvector(&mut sample_rng(5, 42), 4);
        let b = sample_bvector(&mut sample_rng(5, 42), 4);
        let c = sample_bvector(&mut sample_rng(5, 43), 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn membership_is_scale_invariant(
                v in prop::collection::vec(0.01f64..100.0, 3),
                alpha in 0.001f64..1000.0,
            ) {
                let w = heights(&surface(3)).unwrap();
                let scaled: Vec<f64> = v.iter().map(|x| alpha * x).collect();
                prop_assert_eq!(in_y(&BVector(v.clone()), &w, 1e-10).unwrap(), in_y(&BVector(scaled), &w, 1e-10).unwrap());
                let wf = w.to_f64();
                let on: Vec<f64> = wf.iter().map(|x| alpha * x).collect();
                prop_assert!(in_y(&BVector(on), &w, 1e-10).unwrap());
            }

            #[test]
            fn zero_separation_iff_member(seed in any::<u64>(), g in 2usize..6) {
                let w = heights(&surface(g)).unwrap();
                let v = to_f64_vec(&sample_bvector(&mut sample_rng(seed, 0), g));
                let wit = contradiction_witness(&BVector(v.clone()), &w).unwrap();
                prop_assert_eq!(wit.separation <= DEFAULT_Y_TOLERANCE, wit.in_y);
                prop_assert_eq!(wit.in_y, in_y(&BVector(v), &w, DEFAULT_Y_TOLERANCE).unwrap());
            }
        }
    }
}
