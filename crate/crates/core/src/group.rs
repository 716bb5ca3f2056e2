//! Countable groups supported by the engine: the lattices Z^d (d = 1, 2, 3),
//! the free group on two generators and the discrete Heisenberg group.
//!
//! All group elements share one value type, [`GroupElement`], so that laws,
//! cocycles and range statistics can be written once. Products of elements
//! from different groups are rejected at runtime.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which group a walk lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupKind {
    /// Z^d with d in 1..=3.
    Lattice(u8),
    /// The free group F2 = <a, b>.
    Free2,
    /// The discrete Heisenberg group H3(Z).
    Heisenberg,
}

impl GroupKind {
    pub fn token(&self) -> &'static str {
        match self {
            GroupKind::Lattice(1) => "z1",
            GroupKind::Lattice(2) => "z2",
            GroupKind::Lattice(_) => "z3",
            GroupKind::Free2 => "f2",
            GroupKind::Heisenberg => "heis",
        }
    }

    pub fn lattice_dim(&self) -> Option<usize> {
        match self {
            GroupKind::Lattice(d) => Some(*d as usize),
            _ => None,
        }
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for GroupKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "z1" => Ok(GroupKind::Lattice(1)),
            "z2" => Ok(GroupKind::Lattice(2)),
            "z3" => Ok(GroupKind::Lattice(3)),
            "f2" => Ok(GroupKind::Free2),
            "heis" => Ok(GroupKind::Heisenberg),
            other => Err(Error::Parse(format!(
                "unknown group `{other}` (expected z1, z2, z3, f2 or heis)"
            ))),
        }
    }
}

/// A point of Z^d, stored in a fixed three-slot array; unused slots are zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ZdPoint {
    dim: u8,
    coords: [i64; 3],
}

impl ZdPoint {
    pub fn new(coords: &[i64]) -> Self {
        assert!(
            (1..=3).contains(&coords.len()),
            "lattice dimension must be 1, 2 or 3"
        );
        let mut c = [0i64; 3];
        c[..coords.len()].copy_from_slice(coords);
        ZdPoint {
            dim: coords.len() as u8,
            coords: c,
        }
    }

    pub fn zero(dim: usize) -> Self {
        ZdPoint::new(&[0, 0, 0][..dim])
    }

    /// The unit vector e_i (0-based axis).
    pub fn unit(dim: usize, axis: usize, sign: i64) -> Self {
        let mut p = ZdPoint::zero(dim);
        p.coords[axis] = sign;
        p
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    pub fn raw(&self) -> [i64; 3] {
        self.coords
    }

    pub fn checked_add(&self, other: &ZdPoint) -> Option<ZdPoint> {
        let mut out = *self;
        for i in 0..3 {
            out.coords[i] = self.coords[i].checked_add(other.coords[i])?;
        }
        Some(out)
    }

    pub fn neg(&self) -> ZdPoint {
        let mut out = *self;
        for c in out.coords.iter_mut() {
            *c = c.checked_neg().expect("coordinate overflow in negation");
        }
        out
    }

    pub fn l1(&self) -> u64 {
        self.coords.iter().map(|c| c.unsigned_abs()).sum()
    }
}

/// One of the four letters a, a^-1, b, b^-1. Inversion flips the low bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Letter(u8);

impl Letter {
    pub const A: Letter = Letter(0);
    pub const A_INV: Letter = Letter(1);
    pub const B: Letter = Letter(2);
    pub const B_INV: Letter = Letter(3);
    pub const ALL: [Letter; 4] = [Letter::A, Letter::A_INV, Letter::B, Letter::B_INV];

    pub fn from_index(i: u8) -> Letter {
        assert!(i < 4);
        Letter(i)
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn inverse(self) -> Letter {
        Letter(self.0 ^ 1)
    }

    pub fn to_char(self) -> char {
        ['a', 'A', 'b', 'B'][self.0 as usize]
    }

    pub fn from_char(c: char) -> Option<Letter> {
        match c {
            'a' => Some(Letter::A),
            'A' => Some(Letter::A_INV),
            'b' => Some(Letter::B),
            'B' => Some(Letter::B_INV),
            _ => None,
        }
    }
}

/// A reduced word in F2. The invariant "no adjacent pair (s, s^-1)" is kept
/// by [`FreeWord::push`], which cancels against the last letter.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FreeWord {
    letters: Vec<Letter>,
}

impl FreeWord {
    pub fn identity() -> Self {
        FreeWord::default()
    }

    /// Reduces an arbitrary letter sequence.
    pub fn from_letters<I: IntoIterator<Item = Letter>>(letters: I) -> Self {
        let mut w = FreeWord::identity();
        for l in letters {
            w.push(l);
        }
        w
    }

    pub fn letter(l: Letter) -> Self {
        FreeWord { letters: vec![l] }
    }

    /// Right-multiplies by one letter in amortized O(1).
    pub fn push(&mut self, l: Letter) {
        if self.letters.last() == Some(&l.inverse()) {
            self.letters.pop();
        } else {
            self.letters.push(l);
        }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_reduced(&self) -> bool {
        self.letters.windows(2).all(|w| w[1] != w[0].inverse())
    }

    pub fn inverse(&self) -> FreeWord {
        FreeWord {
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }
}

/// (x, y, z) with product (x,y,z)(x',y',z') = (x+x', y+y', z+z'+x*y').
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HeisPoint {
    pub x: i64,
    pub y: i64,
    pub z: i64,
}

impl HeisPoint {
    pub fn checked_mul(&self, o: &HeisPoint) -> Option<HeisPoint> {
        Some(HeisPoint {
            x: self.x.checked_add(o.x)?,
            y: self.y.checked_add(o.y)?,
            z: self
                .z
                .checked_add(o.z)?
                .checked_add(self.x.checked_mul(o.y)?)?,
        })
    }

    pub fn inverse(&self) -> HeisPoint {
        HeisPoint {
            x: -self.x,
            y: -self.y,
            z: self.x.checked_mul(self.y).expect("coordinate overflow") - self.z,
        }
    }
}

/// An element of one of the supported groups.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupElement {
    Zd(ZdPoint),
    Free(FreeWord),
    Heis(HeisPoint),
}

impl GroupElement {
    pub fn zd(coords: &[i64]) -> Self {
        GroupElement::Zd(ZdPoint::new(coords))
    }

    pub fn word(s: &str) -> Self {
        let letters = s.chars().map(|c| Letter::from_char(c).expect("letter in {a,A,b,B}"));
        GroupElement::Free(FreeWord::from_letters(letters))
    }

    pub fn heis(x: i64, y: i64, z: i64) -> Self {
        GroupElement::Heis(HeisPoint { x, y, z })
    }

    pub fn kind(&self) -> GroupKind {
        match self {
            GroupElement::Zd(p) => GroupKind::Lattice(p.dim),
            GroupElement::Free(_) => GroupKind::Free2,
            GroupElement::Heis(_) => GroupKind::Heisenberg,
        }
    }

    pub fn is_identity(&self) -> bool {
        match self {
            GroupElement::Zd(p) => p.coords.iter().all(|&c| c == 0),
            GroupElement::Free(w) => w.is_empty(),
            GroupElement::Heis(h) => h.x == 0 && h.y == 0 && h.z == 0,
        }
    }

    pub fn as_zd(&self) -> Option<&ZdPoint> {
        match self {
            GroupElement::Zd(p) => Some(p),
            _ => None,
        }
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupElement::Zd(p) => {
                let parts: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
                f.write_str(&parts.join(","))
            }
            GroupElement::Free(w) if w.is_empty() => f.write_str("e"),
            GroupElement::Free(w) => {
                for l in w.letters() {
                    write!(f, "{}", l.to_char())?;
                }
                Ok(())
            }
            GroupElement::Heis(h) => write!(f, "{},{},{}", h.x, h.y, h.z),
        }
    }
}

/// Group product `a * b`.
pub fn multiply(a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
    match (a, b) {
        (GroupElement::Zd(p), GroupElement::Zd(q)) if p.dim == q.dim => p
            .checked_add(q)
            .map(GroupElement::Zd)
            .ok_or(Error::Overflow),
        (GroupElement::Free(u), GroupElement::Free(v)) => {
            let mut w = u.clone();
            for &l in v.letters() {
                w.push(l);
            }
            Ok(GroupElement::Free(w))
        }
        (GroupElement::Heis(p), GroupElement::Heis(q)) => p
            .checked_mul(q)
            .map(GroupElement::Heis)
            .ok_or(Error::Overflow),
        _ => Err(Error::MixedGroups {
            left: a.kind().to_string(),
            right: b.kind().to_string(),
        }),
    }
}

pub fn inverse(a: &GroupElement) -> GroupElement {
    match a {
        GroupElement::Zd(p) => GroupElement::Zd(p.neg()),
        GroupElement::Free(w) => GroupElement::Free(w.inverse()),
        GroupElement::Heis(h) => GroupElement::Heis(h.inverse()),
    }
}

/// Length in the canonical generators.
///
/// Exact for Z^d (l1 norm) and F2 (reduced length). For H3 this is the
/// ceiling of the Cygan-Koranyi gauge `((x^2+y^2)^2 + 16 w^2)^(1/4)` with
/// `w = z - xy/2`: a subadditive proxy comparable to the word metric up to
/// constants, meant only for "escapes to infinity" thresholds.
pub fn word_norm(a: &GroupElement) -> u64 {
    match a {
        GroupElement::Zd(p) => p.l1(),
        GroupElement::Free(w) => w.len() as u64,
        GroupElement::Heis(h) => {
            let (x, y) = (h.x as f64, h.y as f64);
            let w = h.z as f64 - x * y / 2.0;
            let r2 = x * x + y * y;
            let gauge = (r2 * r2 + 16.0 * w * w).sqrt().sqrt();
            // guard against 0.99999 style rounding on exact integers
            (gauge - 1e-9).ceil().max(0.0) as u64
        }
    }
}

/// Static description of a group: identity, canonical symmetric generating
/// set and structural flags.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupDescriptor {
    pub kind: GroupKind,
}

impl GroupDescriptor {
    pub fn new(kind: GroupKind) -> Self {
        if let GroupKind::Lattice(d) = kind {
            assert!((1..=3).contains(&d), "lattice dimension must be 1, 2 or 3");
        }
        GroupDescriptor { kind }
    }

    pub fn lattice(dim: usize) -> Self {
        GroupDescriptor::new(GroupKind::Lattice(dim as u8))
    }

    pub fn identity(&self) -> GroupElement {
        match self.kind {
            GroupKind::Lattice(d) => GroupElement::Zd(ZdPoint::zero(d as usize)),
            GroupKind::Free2 => GroupElement::Free(FreeWord::identity()),
            GroupKind::Heisenberg => GroupElement::heis(0, 0, 0),
        }
    }

    /// Canonical generators, closed under inversion and listed in inverse
    /// pairs: `{+e_1, -e_1, +e_2, ...}`, `{a, A, b, B}`, `{(±1,0,0), (0,±1,0)}`.
    pub fn generators(&self) -> Vec<GroupElement> {
        match self.kind {
            GroupKind::Lattice(d) => (0..d as usize)
                .flat_map(|i| {
                    [1, -1].map(|s| GroupElement::Zd(ZdPoint::unit(d as usize, i, s)))
                })
                .collect(),
            GroupKind::Free2 => Letter::ALL
                .iter()
                .map(|&l| GroupElement::Free(FreeWord::letter(l)))
                .collect(),
            GroupKind::Heisenberg => vec![
                GroupElement::heis(1, 0, 0),
                GroupElement::heis(-1, 0, 0),
                GroupElement::heis(0, 1, 0),
                GroupElement::heis(0, -1, 0),
            ],
        }
    }

    /// Only Z is virtually cyclic among the built-in groups.
    pub fn is_virtually_cyclic(&self) -> bool {
        matches!(self.kind, GroupKind::Lattice(1))
    }

    pub fn is_abelian(&self) -> bool {
        matches!(self.kind, GroupKind::Lattice(_))
    }

    /// Parses an element literal: comma-separated integers for Z^d and H3,
    /// a word over {a, A, b, B} for F2 (`e` or the empty string is the identity).
    pub fn parse_element(&self, s: &str) -> Result<GroupElement> {
        let s = s.trim();
        match self.kind {
            GroupKind::Lattice(d) => {
                let coords = parse_ints(s)?;
                if coords.len() != d as usize {
                    return Err(Error::Parse(format!(
                        "element `{s}` has {} coordinates, expected {d}",
                        coords.len()
                    )));
                }
                Ok(GroupElement::zd(&coords))
            }
            GroupKind::Heisenberg => {
                let c = parse_ints(s)?;
                if c.len() != 3 {
                    return Err(Error::Parse(format!(
                        "Heisenberg element `{s}` needs 3 coordinates"
                    )));
                }
                Ok(GroupElement::heis(c[0], c[1], c[2]))
            }
            GroupKind::Free2 => {
                if s.is_empty() || s == "e" {
                    return Ok(self.identity());
                }
                let mut letters = Vec::with_capacity(s.len());
                for c in s.chars() {
                    letters.push(Letter::from_char(c).ok_or_else(|| {
                        Error::Parse(format!("`{c}` is not a letter of {{a,A,b,B}} in `{s}`"))
                    })?);
                }
                Ok(GroupElement::Free(FreeWord::from_letters(letters)))
            }
        }
    }

    /// All elements at word distance at most `radius` from the identity,
    /// found by breadth-first search over the canonical generators.
    pub fn ball(&self, radius: u32) -> Vec<GroupElement> {
        let gens = self.generators();
        let id = self.identity();
        let mut seen: HashSet<GroupElement> = HashSet::from([id.clone()]);
        let mut out = vec![id.clone()];
        let mut frontier = vec![id];
        for _ in 0..radius {
            let mut next = Vec::new();
            for x in &frontier {
                for g in &gens {
                    let y = multiply(x, g).expect("same group");
                    if seen.insert(y.clone()) {
                        next.push(y.clone());
                        out.push(y);
                    }
                }
            }
            frontier = next;
        }
        out
    }
}

fn parse_ints(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<i64>()
                .map_err(|_| Error::Parse(format!("malformed integer `{t}` in element `{s}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_from_examples() {
        let p = multiply(&GroupElement::zd(&[1, 0]), &GroupElement::zd(&[0, 1])).unwrap();
        assert_eq!(p, GroupElement::zd(&[1, 1]));

        let ab = GroupElement::word("ab");
        let p = multiply(&ab, &GroupElement::word("B")).unwrap();
        assert_eq!(p, GroupElement::word("a"));

        let p = multiply(&GroupElement::heis(1, 0, 0), &GroupElement::heis(0, 1, 0)).unwrap();
        assert_eq!(p, GroupElement::heis(1, 1, 1));
    }

    #[test]
    fn inverses_from_examples() {
        assert_eq!(
            inverse(&GroupElement::zd(&[2, -1, 0])),
            GroupElement::zd(&[-2, 1, 0])
        );
        assert_eq!(inverse(&GroupElement::word("ab")), GroupElement::word("BA"));
        assert_eq!(
            inverse(&GroupElement::heis(1, 1, 1)),
            GroupElement::heis(-1, -1, 0)
        );
    }

    #[test]
    fn norms_from_examples() {
        assert_eq!(word_norm(&GroupElement::zd(&[3, -4])), 7);
        assert_eq!(word_norm(&GroupElement::word("abaB")), 4);
        for kind in [
            GroupKind::Lattice(2),
            GroupKind::Free2,
            GroupKind::Heisenberg,
        ] {
            assert_eq!(word_norm(&GroupDescriptor::new(kind).identity()), 0);
        }
        assert_eq!(word_norm(&GroupElement::heis(1, 0, 0)), 1);
    }

    #[test]
    fn mixed_groups_rejected() {
        let err = multiply(&GroupElement::zd(&[1]), &GroupElement::word("a")).unwrap_err();
        assert!(matches!(err, Error::MixedGroups { .. }));
        let err = multiply(&GroupElement::zd(&[1]), &GroupElement::zd(&[1, 2])).unwrap_err();
        assert!(matches!(err, Error::MixedGroups { .. }));
    }

    #[test]
    fn overflow_is_an_error() {
        let big = GroupElement::zd(&[i64::MAX]);
        assert_eq!(multiply(&big, &GroupElement::zd(&[1])), Err(Error::Overflow));
    }

    #[test]
    fn generators_closed_under_inverse() {
        for kind in [
            GroupKind::Lattice(1),
            GroupKind::Lattice(2),
            GroupKind::Lattice(3),
            GroupKind::Free2,
            GroupKind::Heisenberg,
        ] {
            let g = GroupDescriptor::new(kind);
            let gens = g.generators();
            for x in &gens {
                assert!(gens.contains(&inverse(x)));
            }
            assert_eq!(g.is_virtually_cyclic(), kind == GroupKind::Lattice(1));
        }
    }

    #[test]
    fn element_literals() {
        let z3 = GroupDescriptor::lattice(3);
        assert_eq!(z3.parse_element("1,0,-2").unwrap(), GroupElement::zd(&[1, 0, -2]));
        assert!(z3.parse_element("1,0").is_err());
        assert!(z3.parse_element("1,x,0").is_err());
        let f2 = GroupDescriptor::new(GroupKind::Free2);
        assert_eq!(f2.parse_element("aAb").unwrap(), GroupElement::word("b"));
        assert_eq!(f2.parse_element("e").unwrap(), f2.identity());
        assert!(f2.parse_element("abc").is_err());
        for e in [GroupElement::word("abAB"), GroupElement::zd(&[3, -1])] {
            let g = GroupDescriptor::new(e.kind());
            assert_eq!(g.parse_element(&e.to_string()).unwrap(), e);
        }
    }

    #[test]
    fn ball_sizes() {
        // |B_r| in Z^2 is 2r^2 + 2r + 1, in F2 it is 2*3^r - 1
        let z2 = GroupDescriptor::lattice(2);
        assert_eq!(z2.ball(3).len(), 25);
        let f2 = GroupDescriptor::new(GroupKind::Free2);
        assert_eq!(f2.ball(3).len(), 53);
        for x in f2.ball(4) {
            assert!(word_norm(&x) <= 4);
        }
    }

    #[test]
    fn heisenberg_gauge_bounds_word_length_from_below() {
        // the proxy never exceeds the true word length found by BFS
        let h = GroupDescriptor::new(GroupKind::Heisenberg);
        let gens = h.generators();
        let mut dist = std::collections::HashMap::from([(h.identity(), 0u64)]);
        let mut frontier = vec![h.identity()];
        for r in 1..=6 {
            let mut next = Vec::new();
            for x in &frontier {
                for g in &gens {
                    let y = multiply(x, g).unwrap();
                    if !dist.contains_key(&y) {
                        dist.insert(y.clone(), r);
                        next.push(y);
                    }
                }
            }
            frontier = next;
        }
        for (x, d) in dist {
            assert!(word_norm(&x) <= d, "{x}: proxy {} > {d}", word_norm(&x));
        }
    }
}
