//! The end-to-end acceptance checks, shared by the test suite and the
//! `report` command. Each check returns a pass flag, a one-line detail and
//! its wall time against a budget.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::Float;
use serde::Serialize;

use crate::affine::{classify, AffineGenerators, Classification};
use crate::amalgam::{enumerate_amalgam_words, model::FreeModel, Amalgam, FreeWord};
use crate::curves::{
    chain_intersection_matrix, derive_intersection_matrix, height_pairing, to_chain_labels,
};
use crate::dynamics::{
    fit_decay, iterate_trace_at, log_schedule, min_pairwise_distance, piecewise_projectivity,
    sample_weights, twist_limit, uniform_angles, CircleChart, ProjectiveClass,
};
use crate::error::Result;
use crate::flat_surface::{area, build_double_polygon, cylinder_decomposition, Direction};
use crate::obstruction::{
    contradiction_witness, genericity_sample, heights, in_y, limit_by_iteration, sample_bvector,
    sample_rng, to_f64_vec, BVector,
};
use crate::real::{relative_error, Precision};

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_ms: u128,
    pub budget_ms: u128,
}

impl CriterionOutcome {
    pub fn within_budget(&self) -> bool {
        self.elapsed_ms <= self.budget_ms
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {}. {}: {} ({} ms, budget {} ms)",
            if self.passed && self.within_budget() {
                "PASS"
            } else {
                "FAIL"
            },
            self.id,
            self.name,
            self.detail,
            self.elapsed_ms,
            self.budget_ms
        )
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AcceptanceConfig {
    pub seed: u64,
    pub precision: u32,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        AcceptanceConfig {
            seed: 7,
            precision: Precision::default().bits(),
        }
    }
}

fn timed(
    id: u32,
    name: &'static str,
    budget: Duration,
    f: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionOutcome {
    let t = Instant::now();
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionOutcome {
        id,
        name,
        passed,
        detail,
        elapsed_ms: t.elapsed().as_millis(),
        budget_ms: budget.as_millis(),
    }
}

pub fn run_all(cfg: &AcceptanceConfig) -> Vec<CriterionOutcome> {
    vec![
        cylinder_structure(cfg),
        parabolicity_and_traces(cfg),
        twist_limit_oracle(cfg),
        area_identity(cfg),
        genericity(cfg),
        obstruction_witness(cfg),
        circle_map(cfg),
        amalgam_normal_form(cfg),
    ]
}

fn prec(cfg: &AcceptanceConfig) -> Result<Precision> {
    Precision::new(cfg.precision)
}

pub fn cylinder_structure(cfg: &AcceptanceConfig) -> CriterionOutcome {
    timed(1, "cylinder structure", Duration::from_secs(5), || {
        let p = prec(cfg)?;
        let mut worst_area: f64 = 0.0;
        let mut worst_modulus: f64 = 0.0;
        let mut counts_ok = true;
        for g in 2..=6 {
            let s = build_double_polygon(g, p)?;
            let a = area(&s);
            for dir in [Direction::Horizontal, Direction::Vertical] {
                let cyls = cylinder_decomposition(&s, dir)?;
                counts_ok &= cyls.len() == g;
                let total = cyls.iter().fold(p.zero(), |acc, c| acc + c.area());
                worst_area = worst_area.max(relative_error(&total, &a));
                let m0 = cyls[0].modulus();
                for c in &cyls {
                    worst_modulus = worst_modulus.max(relative_error(&c.modulus(), &m0));
                }
            }
        }
        Ok((
            counts_ok && worst_area <= 1e-12 && worst_modulus <= 1e-12,
            format!(
                "g=2..6: g cylinders per direction {counts_ok}, area rel err {worst_area:.1e}, modulus spread {worst_modulus:.1e}"
            ),
        ))
    })
}

pub fn parabolicity_and_traces(cfg: &AcceptanceConfig) -> CriterionOutcome {
    timed(2, "parabolicity and traces", Duration::from_secs(5), || {
        let p = prec(cfg)?;
        let mut ok = true;
        let mut worst: f64 = 0.0;
        for g in 2..=6 {
            let s = build_double_polygon(g, p)?;
            let gens = AffineGenerators::from_surface(&s)?;
            for m in [&gens.twist_a, &gens.twist_b] {
                let t = m.trace().to_f64();
                worst = worst.max((t - 2.0).abs());
                ok &= classify(m)? == Classification::Parabolic;
            }
            let z = gens.g0_generator();
            ok &= z.trace() == -2;
            ok &= z.compose(&z).trace() == 2;
        }
        Ok((
            ok && worst <= 1e-9,
            format!("g=2..6: |tr D(T_A)|, |tr D(T_B)| - 2 <= {worst:.1e}, tr(z) = -2 and tr(z^2) = 2 exactly: {ok}"),
        ))
    })
}

pub fn twist_limit_oracle(cfg: &AcceptanceConfig) -> CriterionOutcome {
    timed(3, "twist limit oracle", Duration::from_secs(30), || {
        let schedule = log_schedule(10_000, 60);
        let results: Vec<(f64, f64)> = (0..200u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = sample_rng(cfg.seed, i);
                let n = rng.random_range(1..=5);
                let rest = rng.random_range(0..=3);
                let w = sample_weights(&mut rng, n, rest);
                let limit = twist_limit(&w)?;
                let trace = iterate_trace_at(&w, &schedule)?;
                let last = trace.last().expect("nonempty schedule");
                let fit = fit_decay(&trace)?;
                Ok((last.class.distance(&limit), fit.slope))
            })
            .collect::<Result<_>>()?;
        let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
        let (lo, hi) = results
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| {
                (a.min(r.1), b.max(r.1))
            });
        Ok((
            worst <= 1e-3 && lo >= -1.1 && hi <= -0.9,
            format!("200 seeds: max sup-distance at k=1e4 {worst:.2e}, log-log slopes in [{lo:.4}, {hi:.4}]"),
        ))
    })
}

pub fn area_identity(cfg: &AcceptanceConfig) -> CriterionOutcome {
    timed(4, "area identity", Duration::from_secs(5), || {
        let p = prec(cfg)?;
        let mut worst: f64 = 0.0;
        let mut chain_ok = true;
        for g in 2..=6 {
            let s = build_double_polygon(g, p)?;
            worst = worst.max(relative_error(&height_pairing(&s)?, &area(&s)));
            chain_ok &= to_chain_labels(&derive_intersection_matrix(&s)?)
                == chain_intersection_matrix(g)?.ab_block();
        }
        Ok((
            worst <= 1e-10 && chain_ok,
            format!("g=2..6: rel err {worst:.1e}, flat crossings match chain {chain_ok}"),
        ))
    })
}

pub fn genericity(cfg: &AcceptanceConfig) -> CriterionOutcome {
    timed(5, "genericity of Y", Duration::from_secs(10), || {
        let p = prec(cfg)?;
        let mut fractions = Vec::new();
        let mut planted_ok = true;
        for g in 2..=5 {
            fractions.push(genericity_sample(g, 1000, cfg.seed, None, p)?.fraction_in_y);
            let planted = genericity_sample(g, 1000, cfg.seed, Some(0), p)?;
            planted_ok &= planted.hit_indices == [0];
        }
        Ok((
            fractions.iter().all(|f| *f == 0.0) && planted_ok,
            format!(
                "g=2..5, 1000 samples: fractions {fractions:?}, planted sample found {planted_ok}"
            ),
        ))
    })
}

pub fn obstruction_witness(cfg: &AcceptanceConfig) -> CriterionOutcome {
    timed(6, "obstruction witness", Duration::from_secs(30), || {
        let p = prec(cfg)?;
        let mut ok = true;
        let mut min_sep = f64::INFINITY;
        let mut worst_iter: f64 = 0.0;
        for g in 2..=5 {
            let w = heights(&build_double_polygon(g, p)?)?;
            let wf = w.to_f64();
            for scale in [1.0, 2.5, 1e-3] {
                let v = BVector(wf.iter().map(|x| x * scale).collect());
                let wit = contradiction_witness(&v, &w)?;
                ok &= wit.in_y && wit.separation <= 1e-12;
            }
            let negs: Vec<(bool, f64, f64)> = (0..500u64)
                .into_par_iter()
                .map(|i| {
                    let v =
                        sample_bvector(&mut sample_rng(cfg.seed ^ 0x5eed, (g as u64) << 32 | i), g);
                    let b = BVector(to_f64_vec(&v));
                    let wit = contradiction_witness(&b, &w)?;
                    let consistent = wit.in_y == in_y(&b, &w, 1e-10)? && !wit.in_y;
                    let by_iter = limit_by_iteration(&v, 10_000)?;
                    Ok((
                        consistent,
                        wit.separation,
                        by_iter.distance(&wit.limit_class),
                    ))
                })
                .collect::<Result<_>>()?;
            for (c, s, d) in negs {
                ok &= c;
                min_sep = min_sep.min(s);
                worst_iter = worst_iter.max(d);
            }
        }
        Ok((
            ok && min_sep > 1e-6 && worst_iter <= 1e-3,
            format!(
                "g=2..5: planted in Y with zero separation, 500 negatives each: min separation {min_sep:.2e}, \
                 iterate vs closed form {worst_iter:.1e}"
            ),
        ))
    })
}

pub fn circle_map(cfg: &AcceptanceConfig) -> CriterionOutcome {
    timed(7, "circle map", Duration::from_secs(10), || {
        let p = prec(cfg)?;
        let mut min_dist = f64::INFINITY;
        let mut worst_rank: f64 = 0.0;
        let mut tuples = 0;
        let mut support_ok = true;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for g in 2..=6 {
            let s = build_double_polygon(g, p)?;
            let chart = CircleChart::new(&s)?;
            min_dist = min_dist.min(min_pairwise_distance(&chart, &uniform_angles(720, p))?);
            let rep = piecewise_projectivity(&chart, 25, 1e-9, &mut rng, p)?;
            worst_rank = worst_rank.max(rep.worst_ratio);
            tuples += rep.tuples;
            let h = chart.evaluate_direction(Direction::Horizontal, p)?;
            let v = chart.evaluate_direction(Direction::Vertical, p)?;
            let zeros = |c: &ProjectiveClass, r: std::ops::Range<usize>| {
                r.clone().all(|i| c.coordinates()[i] == 0.0)
            };
            let pos = |c: &ProjectiveClass, r: std::ops::Range<usize>| {
                r.clone().all(|i| c.coordinates()[i] > 0.0)
            };
            support_ok &=
                zeros(&h, 0..g) && pos(&h, g..2 * g) && zeros(&v, g..2 * g) && pos(&v, 0..g);
            let at_zero = chart.evaluate(&Float::new(p.bits()))?;
            support_ok &= at_zero == h;
        }
        Ok((
            min_dist > 1e-10 && worst_rank < 1e-9 && support_ok,
            format!(
                "g=2..6: min distance over 720 samples {min_dist:.2e}, {tuples} in-arc 4-tuples with s3/s1 <= {worst_rank:.1e}, \
                 nu_A/nu_B supports {support_ok}"
            ),
        ))
    })
}

pub fn amalgam_normal_form(_cfg: &AcceptanceConfig) -> CriterionOutcome {
    timed(8, "amalgam normal form", Duration::from_secs(60), || {
        let words = enumerate_amalgam_words(2, 2, 3);
        let configs = [
            (FreeWord::generator(1), FreeModel::edge_g1()),
            (
                FreeWord::generator(1).mul(&FreeWord::generator(2)),
                FreeModel::edge_g1g2(),
            ),
        ];
        let mut mismatches = 0usize;
        let mut conj = 0usize;
        for (z, model) in &configs {
            let g = Amalgam::new(2, z.clone(), z.clone())?;
            let (bad, c) = words
                .par_iter()
                .map(|w| {
                    let r = g.britton_reduce(w);
                    let class = g.classify_element(w);
                    let agree = r.len() == model.syllable_length(w)
                        && model.image(&r) == model.image(w)
                        && g.britton_reduce(&r) == r
                        && class == model.classify(w);
                    (
                        usize::from(!agree),
                        usize::from(class == crate::amalgam::ElementClass::ConjugateIntoG0),
                    )
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            mismatches += bad;
            conj += c;
        }
        Ok((
            mismatches == 0,
            format!(
                "{} words x 2 edge words: {mismatches} disagreements with the free-group model, {conj} conjugate into <z>",
                words.len()
            ),
        ))
    })
}
