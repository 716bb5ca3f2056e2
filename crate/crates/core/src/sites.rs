//! Compact site representations for the simulation hot loop.
//!
//! Z^d and H3 sites are packed coordinate triples. F2 sites are node ids of a
//! Cayley-tree trie that grows as the walk explores it, so multiplying by a
//! generator is a pointer hop and never allocates a word.

use std::fmt::Debug;
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::group::{FreeWord, GroupDescriptor, GroupElement, GroupKind, HeisPoint, Letter, ZdPoint};

pub trait SiteSpace {
    type Site: Copy + Eq + Hash + Debug;
    type Step: Copy + Eq + Debug;

    fn descriptor(&self) -> GroupDescriptor;
    fn origin(&self) -> Self::Site;
    /// Encodes a group element as a right multiplier.
    fn step_of(&mut self, g: &GroupElement) -> Result<Self::Step>;
    /// Integer jump on Z (zeta laws, rotation cocycles).
    fn jump(&self, k: i64) -> Self::Step;
    /// `x * s`, creating the site if needed.
    fn mul(&mut self, x: Self::Site, s: Self::Step) -> Result<Self::Site>;
    /// `x * s` if that site has been created; `None` means it was never
    /// reached and so cannot be visited.
    fn peek(&self, x: Self::Site, s: Self::Step) -> Option<Self::Site>;
    fn element(&self, x: Self::Site) -> GroupElement;
}

#[derive(Clone, Debug)]
pub struct LatticeSpace {
    dim: usize,
}

impl LatticeSpace {
    pub fn new(dim: usize) -> Self {
        assert!((1..=3).contains(&dim));
        LatticeSpace { dim }
    }
}

#[inline]
fn add3(a: [i64; 3], b: [i64; 3]) -> Option<[i64; 3]> {
    Some([
        a[0].checked_add(b[0])?,
        a[1].checked_add(b[1])?,
        a[2].checked_add(b[2])?,
    ])
}

impl SiteSpace for LatticeSpace {
    type Site = [i64; 3];
    type Step = [i64; 3];

    fn descriptor(&self) -> GroupDescriptor {
        GroupDescriptor::lattice(self.dim)
    }

    fn origin(&self) -> [i64; 3] {
        [0; 3]
    }

    fn step_of(&mut self, g: &GroupElement) -> Result<[i64; 3]> {
        match g {
            GroupElement::Zd(p) if p.dim() == self.dim => Ok(p.raw()),
            _ => Err(Error::MixedGroups {
                left: self.descriptor().kind.to_string(),
                right: g.kind().to_string(),
            }),
        }
    }

    fn jump(&self, k: i64) -> [i64; 3] {
        debug_assert_eq!(self.dim, 1);
        [k, 0, 0]
    }

    #[inline]
    fn mul(&mut self, x: [i64; 3], s: [i64; 3]) -> Result<[i64; 3]> {
        add3(x, s).ok_or(Error::Overflow)
    }

    #[inline]
    fn peek(&self, x: [i64; 3], s: [i64; 3]) -> Option<[i64; 3]> {
        add3(x, s)
    }

    fn element(&self, x: [i64; 3]) -> GroupElement {
        GroupElement::Zd(ZdPoint::new(&x[..self.dim]))
    }
}

#[derive(Clone, Debug, Default)]
pub struct HeisenbergSpace;

impl SiteSpace for HeisenbergSpace {
    type Site = [i64; 3];
    type Step = [i64; 3];

    fn descriptor(&self) -> GroupDescriptor {
        GroupDescriptor::new(GroupKind::Heisenberg)
    }

    fn origin(&self) -> [i64; 3] {
        [0; 3]
    }

    fn step_of(&mut self, g: &GroupElement) -> Result<[i64; 3]> {
        match g {
            GroupElement::Heis(h) => Ok([h.x, h.y, h.z]),
            _ => Err(Error::MixedGroups {
                left: "heis".into(),
                right: g.kind().to_string(),
            }),
        }
    }

    fn jump(&self, _k: i64) -> [i64; 3] {
        unreachable!("integer jumps live on z1")
    }

    #[inline]
    fn mul(&mut self, x: [i64; 3], s: [i64; 3]) -> Result<[i64; 3]> {
        self.peek(x, s).ok_or(Error::Overflow)
    }

    #[inline]
    fn peek(&self, x: [i64; 3], s: [i64; 3]) -> Option<[i64; 3]> {
        let a = HeisPoint { x: x[0], y: x[1], z: x[2] };
        let b = HeisPoint { x: s[0], y: s[1], z: s[2] };
        a.checked_mul(&b).map(|c| [c.x, c.y, c.z])
    }

    fn element(&self, x: [i64; 3]) -> GroupElement {
        GroupElement::heis(x[0], x[1], x[2])
    }
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct Node {
    parent: u32,
    letter: u8,
    children: [u32; 4],
}

/// Cayley graph of F2 (a 4-regular tree) materialized on demand.
#[derive(Clone, Debug)]
pub struct FreeTreeSpace {
    nodes: Vec<Node>,
    steps: Vec<Vec<u8>>,
}

impl Default for FreeTreeSpace {
    fn default() -> Self {
        FreeTreeSpace {
            nodes: vec![Node {
                parent: NONE,
                letter: u8::MAX,
                children: [NONE; 4],
            }],
            steps: Vec::new(),
        }
    }
}

impl FreeTreeSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    fn hop(&self, x: u32, l: u8) -> Option<u32> {
        let node = &self.nodes[x as usize];
        if x != 0 && node.letter == l ^ 1 {
            Some(node.parent)
        } else {
            let c = node.children[l as usize];
            (c != NONE).then_some(c)
        }
    }

    fn hop_or_grow(&mut self, x: u32, l: u8) -> Result<u32> {
        if let Some(y) = self.hop(x, l) {
            return Ok(y);
        }
        let id = u32::try_from(self.nodes.len())
            .ok()
            .filter(|&id| id != NONE)
            .ok_or(Error::Overflow)?;
        self.nodes.push(Node {
            parent: x,
            letter: l,
            children: [NONE; 4],
        });
        self.nodes[x as usize].children[l as usize] = id;
        Ok(id)
    }
}

impl SiteSpace for FreeTreeSpace {
    type Site = u32;
    type Step = u32;

    fn descriptor(&self) -> GroupDescriptor {
        GroupDescriptor::new(GroupKind::Free2)
    }

    fn origin(&self) -> u32 {
        0
    }

    fn step_of(&mut self, g: &GroupElement) -> Result<u32> {
        let GroupElement::Free(w) = g else {
            return Err(Error::MixedGroups {
                left: "f2".into(),
                right: g.kind().to_string(),
            });
        };
        let letters: Vec<u8> = w.letters().iter().map(|l| l.index()).collect();
        if let Some(i) = self.steps.iter().position(|s| *s == letters) {
            return Ok(i as u32);
        }
        self.steps.push(letters);
        Ok(self.steps.len() as u32 - 1)
    }

    fn jump(&self, _k: i64) -> u32 {
        unreachable!("integer jumps live on z1")
    }

    #[inline]
    fn mul(&mut self, x: u32, s: u32) -> Result<u32> {
        let mut y = x;
        for i in 0..self.steps[s as usize].len() {
            let l = self.steps[s as usize][i];
            y = self.hop_or_grow(y, l)?;
        }
        Ok(y)
    }

    #[inline]
    fn peek(&self, x: u32, s: u32) -> Option<u32> {
        self.steps[s as usize]
            .iter()
            .try_fold(x, |y, &l| self.hop(y, l))
    }

    fn element(&self, x: u32) -> GroupElement {
        let mut letters = Vec::new();
        let mut y = x;
        while y != 0 {
            let node = &self.nodes[y as usize];
            letters.push(Letter::from_index(node.letter));
            y = node.parent;
        }
        letters.reverse();
        GroupElement::Free(FreeWord::from_letters(letters))
    }
}
