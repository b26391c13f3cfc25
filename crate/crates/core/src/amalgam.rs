//! Words in `F_L *_<z> F_R`, two free groups of rank `2g` glued along a cyclic
//! subgroup: free reduction, Britton reduction, and the split into elements
//! conjugate into `<z>` and the rest.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Generator index (1-based) and sign.
pub type Letter = (u32, i8);

/// Freely reduced word, stored letter by letter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FreeWord(Vec<Letter>);

/// Freely reduces a sequence of generator powers; zero exponents are skipped.
pub fn free_reduce(raw: &[(u32, i64)]) -> FreeWord {
    let mut out: Vec<Letter> = Vec::new();
    for &(gen, e) in raw {
        let sign: i8 = if e < 0 { -1 } else { 1 };
        for _ in 0..e.unsigned_abs() {
            push_letter(&mut out, (gen, sign));
        }
    }
    FreeWord(out)
}

fn push_letter(out: &mut Vec<Letter>, l: Letter) {
    if out.last() == Some(&(l.0, -l.1)) {
        out.pop();
    } else {
        out.push(l);
    }
}

impl FreeWord {
    pub fn identity() -> Self {
        FreeWord(Vec::new())
    }

    pub fn generator(i: u32) -> Self {
        FreeWord(vec![(i, 1)])
    }

    pub fn from_letters(letters: &[Letter]) -> Self {
        let mut out = Vec::with_capacity(letters.len());
        for &l in letters {
            push_letter(&mut out, l);
        }
        FreeWord(out)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_identity()
    }

    /// Run-length form `(generator, exponent)`.
    pub fn powers(&self) -> Vec<(u32, i64)> {
        let mut out: Vec<(u32, i64)> = Vec::new();
        for &(g, s) in &self.0 {
            match out.last_mut() {
                Some((h, e)) if *h == g => *e += i64::from(s),
                _ => out.push((g, i64::from(s))),
            }
        }
        out
    }

    pub fn max_generator(&self) -> u32 {
        self.0.iter().map(|l| l.0).max().unwrap_or(0)
    }

    pub fn inverse(&self) -> FreeWord {
        FreeWord(self.0.iter().rev().map(|&(g, s)| (g, -s)).collect())
    }

    pub fn mul(&self, o: &FreeWord) -> FreeWord {
        let mut out = self.0.clone();
        for &l in &o.0 {
            push_letter(&mut out, l);
        }
        FreeWord(out)
    }

    pub fn pow(&self, k: i64) -> FreeWord {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut out = FreeWord::identity();
        for _ in 0..k.unsigned_abs() {
            out = out.mul(&base);
        }
        out
    }

    /// `(t, c)` with `self = t c t^-1` and `c` cyclically reduced.
    pub fn cyclic_core(&self) -> (FreeWord, FreeWord) {
        let w = &self.0;
        let mut i = 0;
        while 2 * i + 1 < w.len() && w[i] == (w[w.len() - 1 - i].0, -w[w.len() - 1 - i].1) {
            i += 1;
        }
        (
            FreeWord(w[..i].to_vec()),
            FreeWord(w[i..w.len() - i].to_vec()),
        )
    }

    /// `self = u^m` for some `m >= 2`.
    pub fn is_proper_power(&self) -> bool {
        let (_, c) = self.cyclic_core();
        let n = c.0.len();
        (1..n).any(|p| n % p == 0 && (p..n).all(|i| c.0[i] == c.0[i - p]))
    }

    /// Cyclically reduced words equal up to rotation.
    fn is_rotation_of(&self, o: &FreeWord) -> bool {
        let n = self.0.len();
        n == o.0.len() && (n == 0 || (0..n).any(|r| (0..n).all(|i| self.0[(i + r) % n] == o.0[i])))
    }
}

impl fmt::Display for FreeWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return f.write_str("1");
        }
        for (g, e) in self.powers() {
            if e == 1 {
                write!(f, "g{g}")?;
            } else {
                write!(f, "g{g}^{e}")?;
            }
        }
        Ok(())
    }
}

fn check_edge_word(z: &FreeWord) -> Result<()> {
    if z.is_identity() {
        return Err(Error::InvalidEdgeGenerator("edge word is trivial".into()));
    }
    if z.is_proper_power() {
        return Err(Error::InvalidEdgeGenerator(format!(
            "{z} is a proper power"
        )));
    }
    Ok(())
}

/// `Some(k)` when `w = z^k`, `None` otherwise.
pub fn power_of_z(w: &FreeWord, z: &FreeWord) -> Result<Option<i64>> {
    check_edge_word(z)?;
    let (t, c) = z.cyclic_core();
    let inner = t.inverse().mul(w).mul(&t);
    if inner.is_identity() {
        return Ok(Some(0));
    }
    if inner.len() % c.len() != 0 {
        return Ok(None);
    }
    let m = (inner.len() / c.len()) as i64;
    let k = if inner.0[..c.len()] == c.0[..] { m } else { -m };
    Ok((c.pow(k) == inner).then_some(k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Factor {
    L,
    R,
}

impl Factor {
    pub fn other(self) -> Factor {
        match self {
            Factor::L => Factor::R,
            Factor::R => Factor::L,
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Factor::L => "L",
            Factor::R => "R",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Syllable {
    pub factor: Factor,
    pub word: FreeWord,
}

impl Syllable {
    pub fn new(factor: Factor, word: FreeWord) -> Self {
        Syllable { factor, word }
    }
}

/// Sequence of syllables; not necessarily reduced.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct AmalgamWord {
    pub syllables: Vec<Syllable>,
}

impl AmalgamWord {
    pub fn new(syllables: Vec<Syllable>) -> Self {
        AmalgamWord { syllables }
    }

    pub fn len(&self) -> usize {
        self.syllables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.syllables.is_empty()
    }

    pub fn inverse(&self) -> AmalgamWord {
        AmalgamWord::new(
            self.syllables
                .iter()
                .rev()
                .map(|s| Syllable::new(s.factor, s.word.inverse()))
                .collect(),
        )
    }

    pub fn concat(&self, o: &AmalgamWord) -> AmalgamWord {
        let mut s = self.syllables.clone();
        s.extend(o.syllables.iter().cloned());
        AmalgamWord::new(s)
    }

    /// Moves the first `r` syllables to the end.
    pub fn rotate(&self, r: usize) -> AmalgamWord {
        let mut s = self.syllables.clone();
        if !s.is_empty() {
            let r = r % s.len();
            s.rotate_left(r);
        }
        AmalgamWord::new(s)
    }
}

impl fmt::Display for AmalgamWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.syllables.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self
            .syllables
            .iter()
            .map(|s| format!("{}:{}", s.factor, s.word))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementClass {
    Identity,
    ConjugateIntoG0,
    PaType,
}

impl fmt::Display for ElementClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementClass::Identity => "identity",
            ElementClass::ConjugateIntoG0 => "conjugate_into_G0",
            ElementClass::PaType => "pA_type",
        })
    }
}

/// The group: factor rank and the edge generator in each factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Amalgam {
    rank: u32,
    z_l: FreeWord,
    z_r: FreeWord,
}

impl Amalgam {
    pub fn new(rank: u32, z_l: FreeWord, z_r: FreeWord) -> Result<Self> {
        for z in [&z_l, &z_r] {
            check_edge_word(z)?;
            if z.max_generator() > rank {
                return Err(Error::InvalidEdgeGenerator(format!(
                    "{z} uses a generator beyond g{rank}"
                )));
            }
        }
        Ok(Amalgam { rank, z_l, z_r })
    }

    /// Genus `g`: rank `2g`, edge generator `g1` in both factors.
    pub fn for_genus(g: usize) -> Result<Self> {
        if g < 2 {
            return Err(Error::RejectedParameter(format!(
                "genus must be at least 2, got {g}"
            )));
        }
        Amalgam::new(2 * g as u32, FreeWord::generator(1), FreeWord::generator(1))
    }

    /// Same edge word, given as text like `g1g2^-1`, in both factors.
    pub fn with_edge_word(g: usize, edge: &str) -> Result<Self> {
        let base = Amalgam::for_genus(g)?;
        let z = parse_free_word(edge, base.rank, None)?;
        Amalgam::new(base.rank, z.clone(), z)
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn z(&self, f: Factor) -> &FreeWord {
        match f {
            Factor::L => &self.z_l,
            Factor::R => &self.z_r,
        }
    }

    fn edge_power(&self, s: &Syllable) -> Option<i64> {
        power_of_z(&s.word, self.z(s.factor)).expect("edge words validated at construction")
    }

    /// Parses `"L:g1^2 R:g3 L:z^-1"`; `z` stands for the edge word of the
    /// token's factor, `1` for the identity.
    pub fn parse(&self, text: &str) -> Result<AmalgamWord> {
        let mut syllables = Vec::new();
        for tok in text.split_whitespace() {
            let (tag, body) = tok
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("token {tok:?} lacks a factor tag")))?;
            let factor = match tag {
                "L" | "l" => Factor::L,
                "R" | "r" => Factor::R,
                _ => return Err(Error::Parse(format!("unknown factor {tag:?}"))),
            };
            syllables.push(Syllable::new(
                factor,
                parse_free_word(body, self.rank, Some(self.z(factor)))?,
            ));
        }
        Ok(AmalgamWord::new(syllables))
    }

    /// Merges equal neighbours, drops trivial syllables, and absorbs edge
    /// syllables into a neighbour (the right one when there is one) until no
    /// syllable of a word of length two or more lies in `<z>`.
    pub fn britton_reduce(&self, w: &AmalgamWord) -> AmalgamWord {
        let mut s = w.syllables.clone();
        loop {
            s = merge_neighbours(s);
            if s.len() <= 1 {
                break;
            }
            let Some((i, k)) = s
                .iter()
                .enumerate()
                .find_map(|(i, x)| self.edge_power(x).map(|k| (i, k)))
            else {
                break;
            };
            let gone = s.remove(i);
            let zk = self.z(gone.factor.other()).pow(k);
            if i < s.len() {
                s[i].word = zk.mul(&s[i].word);
            } else {
                s[i - 1].word = s[i - 1].word.mul(&zk);
            }
        }
        AmalgamWord::new(s)
    }

    /// Britton reduction up to cyclic permutation of syllables.
    pub fn cyclic_reduce(&self, w: &AmalgamWord) -> AmalgamWord {
        let mut cur = self.britton_reduce(w);
        while cur.len() >= 3 && cur.syllables[0].factor == cur.syllables[cur.len() - 1].factor {
            let mut s = cur.syllables;
            let last = s.pop().unwrap();
            s[0].word = last.word.mul(&s[0].word);
            cur = self.britton_reduce(&AmalgamWord::new(s));
        }
        cur
    }

    pub fn classify_element(&self, w: &AmalgamWord) -> ElementClass {
        let c = self.cyclic_reduce(w);
        match c.len() {
            0 => ElementClass::Identity,
            1 => {
                let syl = &c.syllables[0];
                let (_, u) = syl.word.cyclic_core();
                let (_, core) = self.z(syl.factor).cyclic_core();
                let m = u.len() / core.len();
                let conj = u.len() % core.len() == 0
                    && (u.is_rotation_of(&core.pow(m as i64))
                        || u.is_rotation_of(&core.pow(-(m as i64))));
                if conj {
                    ElementClass::ConjugateIntoG0
                } else {
                    ElementClass::PaType
                }
            }
            _ => ElementClass::PaType,
        }
    }
}

fn merge_neighbours(s: Vec<Syllable>) -> Vec<Syllable> {
    let mut out: Vec<Syllable> = Vec::with_capacity(s.len());
    for syl in s {
        if syl.word.is_identity() {
            continue;
        }
        match out.last_mut() {
            Some(top) if top.factor == syl.factor => {
                top.word = top.word.mul(&syl.word);
                if top.word.is_identity() {
                    out.pop();
                }
            }
            _ => out.push(syl),
        }
    }
    out
}

/// Parses letters `g<i>` and, when an edge word is given, `z`, each with an
/// optional `^e`.
fn parse_free_word(body: &str, rank: u32, z: Option<&FreeWord>) -> Result<FreeWord> {
    let bad = || Error::Parse(format!("bad word {body:?}"));
    if body == "1" {
        return Ok(FreeWord::identity());
    }
    let b = body.as_bytes();
    let mut i = 0;
    let mut out = FreeWord::identity();
    let number = |i: &mut usize, signed: bool| -> Result<i64> {
        let start = *i;
        if signed && *i < b.len() && b[*i] == b'-' {
            *i += 1;
        }
        while *i < b.len() && b[*i].is_ascii_digit() {
            *i += 1;
        }
        body[start..*i].parse().map_err(|_| bad())
    };
    while i < b.len() {
        let base = match b[i] {
            b'g' => {
                i += 1;
                let idx = number(&mut i, false)?;
                if idx < 1 || idx > i64::from(rank) {
                    return Err(Error::Parse(format!(
                        "generator g{idx} outside g1..g{rank}"
                    )));
                }
                FreeWord::generator(idx as u32)
            }
            b'z' => {
                i += 1;
                z.ok_or_else(|| Error::Parse("z is not available here".into()))?
                    .clone()
            }
            b'*' | b'.' => {
                i += 1;
                continue;
            }
            _ => return Err(bad()),
        };
        let e = if i < b.len() && b[i] == b'^' {
            i += 1;
            number(&mut i, true)?
        } else {
            1
        };
        out = out.mul(&base.pow(e));
    }
    Ok(out)
}

/// An exact model of the amalgam as a free group of rank three, valid when
/// the edge word is primitive in both factors.
///
/// Letters of the model: `1 = z`, `2` the second basis element of `L`, `3`
/// that of `R`. Each factor generator is sent to its expression in that
/// basis. An element then has reduced syllable length equal to the number of
/// maximal runs of letters `2` and `3` alike, ignoring `1`, and is conjugate
/// into `<z>` exactly when its cyclic reduction is a nonzero power of `1`.
pub mod model {
    use super::*;

    #[derive(Debug, Clone)]
    pub struct FreeModel {
        left: Vec<FreeWord>,
        right: Vec<FreeWord>,
    }

    impl FreeModel {
        /// Images of `g_1, g_2, ...` in each factor.
        pub fn new(left: Vec<FreeWord>, right: Vec<FreeWord>) -> Self {
            FreeModel { left, right }
        }

        /// Model for rank two factors with `z = g1`.
        pub fn edge_g1() -> Self {
            let (a, b, b2) = (
                FreeWord::generator(1),
                FreeWord::generator(2),
                FreeWord::generator(3),
            );
            FreeModel::new(vec![a.clone(), b], vec![a, b2])
        }

        /// Model for rank two factors with `z = g1 g2`: `g1 = a b^-1`, `g2 = b`.
        pub fn edge_g1g2() -> Self {
            let a = FreeWord::generator(1);
            let (b, b2) = (FreeWord::generator(2), FreeWord::generator(3));
            FreeModel::new(
                vec![a.mul(&b.inverse()), b.clone()],
                vec![a.mul(&b2.inverse()), b2],
            )
        }

        pub fn image_of_word(&self, f: Factor, w: &FreeWord) -> FreeWord {
            let table = match f {
                Factor::L => &self.left,
                Factor::R => &self.right,
            };
            w.letters()
                .iter()
                .fold(FreeWord::identity(), |acc, &(g, s)| {
                    acc.mul(&table[g as usize - 1].pow(i64::from(s)))
                })
        }

        pub fn image(&self, w: &AmalgamWord) -> FreeWord {
            w.syllables.iter().fold(FreeWord::identity(), |acc, s| {
                acc.mul(&self.image_of_word(s.factor, &s.word))
            })
        }

        pub fn syllable_length(&self, w: &AmalgamWord) -> usize {
            let img = self.image(w);
            if img.is_identity() {
                return 0;
            }
            let kinds: Vec<u32> = img
                .letters()
                .iter()
                .map(|l| l.0)
                .filter(|&g| g != 1)
                .collect();
            if kinds.is_empty() {
                return 1;
            }
            1 + kinds.windows(2).filter(|p| p[0] != p[1]).count()
        }

        pub fn classify(&self, w: &AmalgamWord) -> ElementClass {
            let (_, c) = self.image(w).cyclic_core();
            if c.is_identity() {
                ElementClass::Identity
            } else if c.letters().iter().all(|l| l.0 == 1) {
                ElementClass::ConjugateIntoG0
            } else {
                ElementClass::PaType
            }
        }
    }
}

/// All free words of letter length at most `max_len` over `g1..g_rank`,
/// unreduced ones included.
pub fn enumerate_free_words(rank: u32, max_len: usize) -> Vec<FreeWord> {
    let letters: Vec<Letter> = (1..=rank).flat_map(|g| [(g, 1i8), (g, -1i8)]).collect();
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<Letter>> = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w| {
                letters.iter().map(move |&l| {
                    let mut v = w.clone();
                    v.push(l);
                    v
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out.iter().map(|w| FreeWord::from_letters(w)).collect()
}

/// All amalgam words of at most `max_syllables` syllables, each a word from
/// [`enumerate_free_words`] with either tag.
pub fn enumerate_amalgam_words(
    rank: u32,
    max_letters: usize,
    max_syllables: usize,
) -> Vec<AmalgamWord> {
    let syls: Vec<Syllable> = enumerate_free_words(rank, max_letters)
        .into_iter()
        .flat_map(|w| {
            [
                Syllable::new(Factor::L, w.clone()),
                Syllable::new(Factor::R, w),
            ]
        })
        .collect();
    let mut out = vec![AmalgamWord::default()];
    let mut layer = vec![AmalgamWord::default()];
    for _ in 0..max_syllables {
        layer = layer
            .iter()
            .flat_map(|w| {
                syls.iter().map(move |s| {
                    let mut v = w.syllables.clone();
                    v.push(s.clone());
                    AmalgamWord::new(v)
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::model::FreeModel;
    use super::*;
    use proptest::prelude::*;

    fn fw(p: &[(u32, i64)]) -> FreeWord {
        free_reduce(p)
    }

    #[test]
    fn free_reduction_examples() {
        assert!(fw(&[(1, 1), (1, -1)]).is_identity());
        assert_eq!(fw(&[(1, 1), (2, 1), (2, -1), (1, 1)]), fw(&[(1, 2)]));
        let w = fw(&[(1, 2), (3, -1), (2, 1)]);
        assert!(w.mul(&w.inverse()).is_identity());
        assert_eq!(w.to_string(), "g1^2g3^-1g2");
        assert_eq!(FreeWord::from_letters(w.letters()), w);
    }

    #[test]
    fn powers_of_z() {
        let z = fw(&[(1, 1)]);
        assert_eq!(power_of_z(&z.pow(3), &z).unwrap(), Some(3));
        assert_eq!(power_of_z(&z.mul(&fw(&[(2, 1)])), &z).unwrap(), None);
        assert_eq!(power_of_z(&FreeWord::identity(), &z).unwrap(), Some(0));
        let conj = fw(&[(2, 1), (1, 1), (2, -1)]);
        assert_eq!(power_of_z(&conj.pow(-4), &conj).unwrap(), Some(-4));
        assert_eq!(power_of_z(&fw(&[(1, 1)]), &conj).unwrap(), None);
        assert!(matches!(
            power_of_z(&z, &fw(&[(1, 2)])),
            Err(Error::InvalidEdgeGenerator(_))
        ));
        assert!(matches!(
            power_of_z(&z, &fw(&[(2, 1), (1, 1), (3, 1), (1, 1), (3, 1), (2, -1)])),
            Err(Error::InvalidEdgeGenerator(_))
        ));
        assert!(power_of_z(&z, &FreeWord::identity()).is_err());
    }

    #[test]
    fn britton_examples() {
        let g = Amalgam::for_genus(2).unwrap();
        let w = g.parse("L:z^2 R:g2").unwrap();
        assert_eq!(g.britton_reduce(&w).to_string(), "R:g1^2g2");
        let w = g.parse("L:g2 R:1 L:g3").unwrap();
        assert_eq!(g.britton_reduce(&w).to_string(), "L:g2g3");
        let w = g.parse("L:g2 R:g1^3 L:g2^-1").unwrap();
        assert_eq!(g.britton_reduce(&w).to_string(), "L:g2g1^3g2^-1");
        assert!(g
            .britton_reduce(&g.parse("L:g2 R:z L:z^-1 L:g2^-1").unwrap())
            .is_empty());
    }

    #[test]
    fn classification_examples() {
        let g = Amalgam::for_genus(2).unwrap();
        let c = |s: &str| g.classify_element(&g.parse(s).unwrap());
        assert_eq!(c("L:z^5"), ElementClass::ConjugateIntoG0);
        assert_eq!(c("L:g2z^5g2^-1"), ElementClass::ConjugateIntoG0);
        assert_eq!(c("L:g2 R:g3"), ElementClass::PaType);
        assert_eq!(c("L:g2 R:g1 L:g2^-1"), ElementClass::ConjugateIntoG0);
        assert_eq!(c("L:g2 R:g3 L:g2^-1"), ElementClass::PaType);
        assert_eq!(c("L:1"), ElementClass::Identity);
        assert_eq!(c("L:g2"), ElementClass::PaType);
    }

    #[test]
    fn parser_rejects_garbage() {
        let g = Amalgam::for_genus(2).unwrap();
        assert!(g.parse("L:g5").is_err());
        assert!(g.parse("X:g1").is_err());
        assert!(g.parse("g1").is_err());
        assert!(g.parse("L:g1^").is_err());
        assert!(Amalgam::with_edge_word(2, "g1^2").is_err());
        assert!(Amalgam::with_edge_word(2, "g1g2").is_ok());
    }

    fn check_against_model(g: &Amalgam, m: &FreeModel, words: &[AmalgamWord]) {
        for w in words {
            let r = g.britton_reduce(w);
            assert_eq!(m.image(&r), m.image(w), "{w}");
            assert_eq!(r.len(), m.syllable_length(w), "{w} -> {r}");
            assert_eq!(g.britton_reduce(&r), r);
            assert!(r.len() <= w.len().max(1) || w.is_empty());
            assert_eq!(g.classify_element(w), m.classify(w), "{w}");
        }
    }

    #[test]
    fn exhaustive_against_free_model_small() {
        let words = enumerate_amalgam_words(2, 1, 3);
        let g = Amalgam::new(2, FreeWord::generator(1), FreeWord::generator(1)).unwrap();
        check_against_model(&g, &FreeModel::edge_g1(), &words);
        let z = fw(&[(1, 1), (2, 1)]);
        let g = Amalgam::new(2, z.clone(), z).unwrap();
        check_against_model(&g, &FreeModel::edge_g1g2(), &words);
    }

    fn word_strategy(rank: u32) -> impl Strategy<Value = FreeWord> {
        prop::collection::vec((1..=rank, prop::bool::ANY), 0..6).prop_map(|v| {
            FreeWord::from_letters(
                &v.into_iter()
                    .map(|(g, s)| (g, if s { 1 } else { -1 }))
                    .collect::<Vec<_>>(),
            )
        })
    }

    fn amalgam_strategy() -> impl Strategy<Value = AmalgamWord> {
        prop::collection::vec((prop::bool::ANY, word_strategy(4)), 0..6).prop_map(|v| {
            AmalgamWord::new(
                v.into_iter()
                    .map(|(l, w)| Syllable::new(if l { Factor::L } else { Factor::R }, w))
                    .collect(),
            )
        })
    }

    proptest! {
        #[test]
        fn z_powers_are_recovered(z in word_strategy(3), k in -20i64..=20) {
            prop_assume!(!z.is_identity() && !z.is_proper_power());
            prop_assert_eq!(power_of_z(&z.pow(k), &z).unwrap(), Some(k));
        }

        #[test]
        fn free_reduction_is_idempotent(w in word_strategy(3)) {
            prop_assert_eq!(FreeWord::from_letters(w.letters()), w.clone());
            prop_assert!(w.mul(&w.inverse()).is_identity());
        }

        #[test]
        fn classification_is_a_conjugacy_invariant(
            w in amalgam_strategy(),
            r in 0usize..6,
            c in (prop::bool::ANY, 1u32..=4, prop::bool::ANY),
        ) {
            let g = Amalgam::for_genus(2).unwrap();
            let base = g.classify_element(&w);
            prop_assert_eq!(g.classify_element(&w.rotate(r)), base);
            let f = if c.0 { Factor::L } else { Factor::R };
            let letter = AmalgamWord::new(vec![Syllable::new(f, FreeWord::from_letters(&[(c.1, if c.2 { 1 } else { -1 })]))]);
            let conj = letter.concat(&w).concat(&letter.inverse());
            prop_assert_eq!(g.classify_element(&conj), base);
            let r1 = g.britton_reduce(&w);
            prop_assert_eq!(g.britton_reduce(&r1), r1.clone());
            prop_assert!(r1.len() <= w.len());
        }

        #[test]
        fn reduction_agrees_with_model_on_random_words(w in amalgam_strategy()) {
            let restricted = AmalgamWord::new(w.syllables.iter().map(|s| Syllable::new(
                s.factor,
                FreeWord::from_letters(&s.word.letters().iter().map(|&(g, e)| (1 + (g - 1) % 2, e)).collect::<Vec<_>>()),
            )).collect());
            let g = Amalgam::new(2, FreeWord::generator(1), FreeWord::generator(1)).unwrap();
            let m = FreeModel::edge_g1();
            prop_assert_eq!(g.britton_reduce(&restricted).len(), m.syllable_length(&restricted));
            prop_assert_eq!(g.classify_element(&restricted), m.classify(&restricted));
        }
    }
}
