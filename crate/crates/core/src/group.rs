//! Surface-group presentations and words.
//!
//! Generators are numbered `1..=2g` in the order a1, b1, a2, b2, ...; a letter
//! is a signed generator number, negative for inverses. Words print as
//! `a1b1A1B1` with capitals for inverses.

use nalgebra::DMatrix;

use crate::bilinear::q_adjoint;
use crate::error::{invalid, Result};
use crate::reps::Representation;

/// Default cap on word length for enumeration.
pub const MAX_ENUM_LEN: usize = 10;

/// Genus-g presentation with relator `[a1,b1]...[ag,bg]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Presentation {
    pub genus: usize,
}

impl Presentation {
    pub fn new(genus: usize) -> Result<Self> {
        if genus < 2 {
            return invalid(format!("genus {genus} < 2"));
        }
        Ok(Presentation { genus })
    }

    pub fn num_generators(&self) -> usize {
        2 * self.genus
    }

    /// Letters in enumeration order: a1 A1 b1 B1 a2 ...
    pub fn alphabet(&self) -> Vec<i8> {
        (1..=self.num_generators() as i8).flat_map(|k| [k, -k]).collect()
    }

    pub fn relator(&self) -> Word {
        let mut l = Vec::with_capacity(4 * self.genus);
        for i in 0..self.genus as i8 {
            let (a, b) = (2 * i + 1, 2 * i + 2);
            l.extend_from_slice(&[a, b, -a, -b]);
        }
        Word { letters: l }
    }

    /// True when no cyclic subword of `w` is longer than half of a cyclic
    /// rotation of the relator or its inverse (Dehn's condition).
    ///
    /// Cyclic words failing the test are conjugate to strictly shorter words.
    pub fn is_dehn_reduced(&self, w: &Word) -> bool {
        let r = self.relator().letters;
        let piece = r.len() / 2 + 1;
        let n = w.len();
        if n < piece {
            return true;
        }
        let ri: Vec<i8> = r.iter().rev().map(|x| -x).collect();
        let m = r.len();
        for rel in [&r, &ri] {
            for rot in 0..m {
                for s in 0..n {
                    if (0..piece).all(|i| w.letters[(s + i) % n] == rel[(rot + i) % m]) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Pairs treated as essentially intersecting: (a_i, b_i).
    pub fn is_registered_intersecting(&self, w1: &Word, w2: &Word) -> bool {
        let single = |w: &Word| if w.len() == 1 { Some(w.letters[0].unsigned_abs()) } else { None };
        match (single(w1), single(w2)) {
            (Some(x), Some(y)) => {
                let (lo, hi) = (x.min(y), x.max(y));
                lo % 2 == 1 && hi == lo + 1 && (hi as usize) <= self.num_generators()
            }
            _ => false,
        }
    }
}

#[inline]
pub(crate) fn letter_rank(l: i8) -> u8 {
    let k = l.unsigned_abs() - 1;
    2 * k + u8::from(l < 0)
}

/// A freely reduced word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word {
    pub letters: Vec<i8>,
}

impl Word {
    /// Freely reduces the given letters.
    pub fn new(letters: &[i8]) -> Self {
        let mut out: Vec<i8> = Vec::with_capacity(letters.len());
        for &l in letters {
            assert!(l != 0, "letter 0 is not a generator");
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word { letters: out }
    }

    pub fn empty() -> Self {
        Word { letters: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_reduced(&self) -> bool {
        self.letters.windows(2).all(|p| p[0] != -p[1]) && !self.letters.contains(&0)
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        self.is_reduced() && (self.len() < 2 || self.letters[0] != -self.letters[self.len() - 1])
    }

    pub fn inverse(&self) -> Word {
        Word { letters: self.letters.iter().rev().map(|l| -l).collect() }
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut l = self.letters.clone();
        l.extend_from_slice(&other.letters);
        Word::new(&l)
    }

    pub fn pow(&self, k: usize) -> Word {
        let mut l = Vec::with_capacity(self.len() * k);
        for _ in 0..k {
            l.extend_from_slice(&self.letters);
        }
        Word::new(&l)
    }

    pub fn rotate(&self, k: usize) -> Word {
        let mut l = self.letters.clone();
        if !l.is_empty() {
            let k = k % l.len();
            l.rotate_left(k);
        }
        Word { letters: l }
    }

    /// Cyclic reduction: strips `x ... x^{-1}` from both ends.
    pub fn cyclic_reduce(&self) -> Word {
        let mut l: &[i8] = &self.letters;
        while l.len() >= 2 && l[0] == -l[l.len() - 1] {
            l = &l[1..l.len() - 1];
        }
        Word { letters: l.to_vec() }
    }

    /// Splits `w = u c u^{-1}` with `c` cyclically reduced.
    pub fn core_split(&self) -> (Word, Word) {
        let l = &self.letters;
        let mut k = 0;
        while l.len() >= 2 * k + 2 && l[k] == -l[l.len() - 1 - k] {
            k += 1;
        }
        (Word { letters: l[..k].to_vec() }, Word { letters: l[k..l.len() - k].to_vec() })
    }

    /// Lexicographically smallest cyclic rotation, optionally also over the inverse.
    pub fn canonical_cyclic(&self, mod_inverse: bool) -> Word {
        let w = self.cyclic_reduce();
        let mut best = min_rotation(&w.letters);
        if mod_inverse {
            let inv = min_rotation(&w.inverse().letters);
            if rank_cmp(&inv, &best) == std::cmp::Ordering::Less {
                best = inv;
            }
        }
        Word { letters: best }
    }

    /// Uses only generators of the given handle (1-based).
    pub fn in_handle(&self, handle: usize) -> bool {
        self.letters.iter().all(|l| (l.unsigned_abs() as usize + 1) / 2 == handle)
    }

    pub fn parse(s: &str) -> Result<Word> {
        let s = s.trim();
        if s.is_empty() || s == "e" {
            return Ok(Word::empty());
        }
        let mut letters = Vec::new();
        let bytes: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            let (base, inv) = match c {
                'a' => (1, false),
                'b' => (2, false),
                'A' => (1, true),
                'B' => (2, true),
                _ => return invalid(format!("bad letter {c:?} in word {s:?}")),
            };
            i += 1;
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let idx: i8 = bytes[start..i]
                .iter()
                .collect::<String>()
                .parse()
                .map_err(|_| crate::Error::InvalidInput(format!("missing handle index in {s:?}")))?;
            if idx < 1 {
                return invalid(format!("handle index must be >= 1 in {s:?}"));
            }
            let g = 2 * (idx - 1) + base;
            letters.push(if inv { -g } else { g });
        }
        Ok(Word::new(&letters))
    }
}

pub(crate) fn letter_name(l: i8) -> String {
    let k = l.unsigned_abs();
    let h = (k + 1) / 2;
    let c = match (k % 2 == 1, l < 0) {
        (true, false) => 'a',
        (false, false) => 'b',
        (true, true) => 'A',
        (false, true) => 'B',
    };
    format!("{c}{h}")
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        for &l in &self.letters {
            write!(f, "{}", letter_name(l))?;
        }
        Ok(())
    }
}

impl serde::Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Word, D::Error> {
        let s = String::deserialize(d)?;
        Word::parse(&s).map_err(serde::de::Error::custom)
    }
}

fn rank_cmp(a: &[i8], b: &[i8]) -> std::cmp::Ordering {
    a.iter().map(|&l| letter_rank(l)).cmp(b.iter().map(|&l| letter_rank(l)))
}

fn min_rotation(l: &[i8]) -> Vec<i8> {
    let n = l.len();
    let mut best: Vec<i8> = l.to_vec();
    for k in 1..n {
        let r: Vec<i8> = l[k..].iter().chain(&l[..k]).copied().collect();
        if rank_cmp(&r, &best) == std::cmp::Ordering::Less {
            best = r;
        }
    }
    best
}

/// Whether `l` is its own minimal rotation (letters given by rank).
fn is_min_rotation(r: &[u8]) -> bool {
    let n = r.len();
    for k in 1..n {
        for i in 0..n {
            let a = r[(i + k) % n];
            let b = r[i];
            if a < b {
                return false;
            }
            if a > b {
                break;
            }
        }
    }
    true
}

fn check_len(maxlen: usize, cap: usize) -> Result<()> {
    if maxlen < 1 {
        return invalid("maxlen must be >= 1");
    }
    if maxlen > cap {
        return invalid(format!("maxlen {maxlen} exceeds the enumeration cap {cap}"));
    }
    Ok(())
}

/// All freely reduced nonempty words of length <= `maxlen`, in shortlex order.
pub fn enumerate_reduced(p: &Presentation, maxlen: usize, cap: usize) -> Result<Vec<Word>> {
    check_len(maxlen, cap)?;
    let alpha = p.alphabet();
    let mut out = Vec::new();
    let mut level: Vec<Vec<i8>> = vec![Vec::new()];
    for _ in 0..maxlen {
        let mut next = Vec::with_capacity(level.len() * (alpha.len() - 1));
        for w in &level {
            for &l in &alpha {
                if w.last() == Some(&-l) {
                    continue;
                }
                let mut v = w.clone();
                v.push(l);
                next.push(v);
            }
        }
        out.extend(next.iter().map(|l| Word { letters: l.clone() }));
        level = next;
    }
    Ok(out)
}

/// Visits every cyclically reduced word of length <= `maxlen` that is the
/// canonical representative of its cyclic class (and of its inverse's class
/// when `mod_inverse`), together with the running prefix products.
///
/// `f` receives the word and the product of the images under `gens`
/// (index `letter_rank`). Work is split over the first two letters.
pub fn for_each_class<T, O, F>(
    p: &Presentation,
    maxlen: usize,
    mod_inverse: bool,
    gens: &[T],
    mul: &(dyn Fn(&T, &T) -> T + Sync),
    f: &F,
) -> Vec<(Word, O)>
where
    T: Clone + Send + Sync,
    O: Send,
    F: Fn(&Word, &T) -> Option<O> + Sync,
{
    use rayon::prelude::*;
    let alpha = p.alphabet();
    let mut starts: Vec<Vec<i8>> = Vec::new();
    for &l in &alpha {
        starts.push(vec![l]);
    }
    let mut results: Vec<Vec<(Word, O)>> = starts
        .par_iter()
        .map(|s| {
            let mut acc = Vec::new();
            let first = s[0];
            let m0 = gens[letter_rank(first) as usize].clone();
            let mut stack: Vec<i8> = vec![first];
            let mut ranks: Vec<u8> = vec![letter_rank(first)];
            dfs(&alpha, maxlen, mod_inverse, gens, mul, f, &mut stack, &mut ranks, &m0, &mut acc);
            acc
        })
        .collect();
    let mut out: Vec<(Word, O)> = results.drain(..).flatten().collect();
    out.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| rank_cmp(&a.0.letters, &b.0.letters)));
    out
}

#[allow(clippy::too_many_arguments)]
fn dfs<T, O, F>(
    alpha: &[i8],
    maxlen: usize,
    mod_inverse: bool,
    gens: &[T],
    mul: &(dyn Fn(&T, &T) -> T + Sync),
    f: &F,
    stack: &mut Vec<i8>,
    ranks: &mut Vec<u8>,
    prod: &T,
    acc: &mut Vec<(Word, O)>,
) where
    T: Clone,
    F: Fn(&Word, &T) -> Option<O>,
{
    let n = stack.len();
    // The first letter of a minimal rotation is minimal among all letters.
    let cyc = n < 2 || stack[0] != -stack[n - 1];
    if cyc && is_min_rotation(ranks) && (!mod_inverse || inverse_not_smaller(stack)) {
        let w = Word { letters: stack.clone() };
        if let Some(v) = f(&w, prod) {
            acc.push((w, v));
        }
    }
    if n == maxlen {
        return;
    }
    let r0 = ranks[0];
    for &l in alpha {
        if stack[n - 1] == -l || letter_rank(l) < r0 {
            continue;
        }
        let next = mul(prod, &gens[letter_rank(l) as usize]);
        stack.push(l);
        ranks.push(letter_rank(l));
        dfs(alpha, maxlen, mod_inverse, gens, mul, f, stack, ranks, &next, acc);
        stack.pop();
        ranks.pop();
    }
}

fn inverse_not_smaller(l: &[i8]) -> bool {
    let inv: Vec<i8> = l.iter().rev().map(|x| -x).collect();
    rank_cmp(&min_rotation(&inv), l) != std::cmp::Ordering::Less
}

/// One representative per cyclic class (and per inversion when `mod_inverse`)
/// of cyclically reduced words of length <= `maxlen`.
///
/// Classes are deduplicated in the free group, so surface-group classes that
/// differ only through the relator are counted separately.
pub fn conjugacy_reps(p: &Presentation, maxlen: usize, mod_inverse: bool, cap: usize) -> Result<Vec<Word>> {
    check_len(maxlen, cap)?;
    let gens = vec![Unit; 2 * p.num_generators()];
    let out = for_each_class(p, maxlen, mod_inverse, &gens, &|_, _| Unit, &|_, _| Some(()));
    Ok(out.into_iter().map(|(w, _)| w).collect())
}

#[derive(Clone, Copy)]
struct Unit;

/// Product of generator images along `w`; inverses via the q-adjoint.
pub fn evaluate(rep: &Representation, w: &Word) -> DMatrix<f64> {
    let d = rep.dim();
    let mut m = DMatrix::<f64>::identity(d, d);
    for &l in &w.letters {
        let g = &rep.gen_images[l.unsigned_abs() as usize - 1];
        if l > 0 {
            m *= g;
        } else {
            m *= q_adjoint(g);
        }
    }
    m
}

/// Images of all letters indexed by `letter_rank`.
pub fn letter_images(rep: &Representation) -> Vec<DMatrix<f64>> {
    rep.gen_images.iter().flat_map(|g| [g.clone(), q_adjoint(g)]).collect()
}
