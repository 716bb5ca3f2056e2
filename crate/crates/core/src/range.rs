//! Incremental range statistics.
//!
//! For a translate `t` write `D(t) = #{x in R : x t^-1 not in R}`. Then
//! `|d_v R| = D(v)` and `|R \ Rg| = D(g)`, so `|R ^ Rg| = D(g) + D(g^-1)`.
//! Each counter and the inner boundary change only when a new site appears,
//! and only through the site itself and its partners `x t`, so an insertion
//! costs one lookup per distinct translate.

use std::collections::HashSet;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::cocycle::CocycleSpec;
use crate::error::{Error, Result};
use crate::group::{inverse, multiply, GroupDescriptor, GroupElement};
use crate::law::Draw;
use crate::rng::Direction;
use crate::sites::SiteSpace;

/// Translates tracked by an accumulator: generators for the inner boundary,
/// test elements `v` for `d_v R`, and Fölner probes `g` (with `g^-1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub neighbors: Vec<GroupElement>,
    pub tests: Vec<GroupElement>,
    pub probes: Vec<GroupElement>,
}

impl BoundarySpec {
    /// Canonical generators as neighbours and as default test elements.
    pub fn new(group: GroupDescriptor) -> Self {
        BoundarySpec {
            neighbors: group.generators(),
            tests: group.generators(),
            probes: Vec::new(),
        }
    }

    pub fn with_tests(mut self, tests: Vec<GroupElement>) -> Self {
        self.tests = tests;
        self
    }

    pub fn with_probes(mut self, probes: Vec<GroupElement>) -> Self {
        self.probes = probes;
        self
    }

    /// Every translate appearing in the counters, closed under inversion.
    pub fn translates(&self) -> Vec<GroupElement> {
        let mut out: Vec<GroupElement> = Vec::new();
        for g in self.neighbors.iter().chain(&self.tests).chain(&self.probes) {
            for h in [g.clone(), inverse(g)] {
                if !out.contains(&h) {
                    out.push(h);
                }
            }
        }
        out
    }
}

/// Counters at one time. Ratios are formed here, never accumulated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub n: u64,
    pub range: u64,
    pub boundary: u64,
    /// `|d_v R|` per test element.
    pub vboundary: Vec<u64>,
    /// `(|R \ Rg|, |R \ Rg^-1|)` per probe.
    pub folner: Vec<(u64, u64)>,
}

impl Snapshot {
    pub fn boundary_ratio(&self) -> Option<f64> {
        (self.range > 0).then(|| self.boundary as f64 / self.range as f64)
    }

    pub fn symmetric_difference(&self, probe: usize) -> u64 {
        let (a, b) = self.folner[probe];
        a + b
    }

    /// `|R ^ Rg| / |R|`.
    pub fn folner_ratio(&self, probe: usize) -> Option<f64> {
        (self.range > 0).then(|| self.symmetric_difference(probe) as f64 / self.range as f64)
    }
}

pub struct RangeAccumulator<S: SiteSpace> {
    visited: FxHashMap<S::Site, u8>,
    offsets: Vec<S::Step>,
    neighbors: Vec<usize>,
    // (index of t, index of t^-1) per tracked deficit
    deficits: Vec<(usize, usize)>,
    counts: Vec<u64>,
    tests: Vec<usize>,
    probes: Vec<(usize, usize)>,
    boundary: u64,
    n: u64,
    look: Vec<Option<S::Site>>,
}

impl<S: SiteSpace> RangeAccumulator<S> {
    pub fn new(space: &mut S, spec: &BoundarySpec) -> Result<Self> {
        let mut offsets: Vec<S::Step> = Vec::new();
        let mut index = |space: &mut S, g: &GroupElement| -> Result<usize> {
            let s = space.step_of(g)?;
            Ok(match offsets.iter().position(|o| *o == s) {
                Some(i) => i,
                None => {
                    offsets.push(s);
                    offsets.len() - 1
                }
            })
        };
        let mut neighbors = Vec::new();
        for e in &spec.neighbors {
            if e.is_identity() {
                return Err(Error::Usage("the identity is not a neighbour".into()));
            }
            neighbors.push(index(space, e)?);
        }
        let mut deficits: Vec<(usize, usize)> = Vec::new();
        let mut track = |space: &mut S, g: &GroupElement| -> Result<usize> {
            let pair = (index(space, g)?, index(space, &inverse(g))?);
            Ok(match deficits.iter().position(|d| *d == pair) {
                Some(i) => i,
                None => {
                    deficits.push(pair);
                    deficits.len() - 1
                }
            })
        };
        let tests = spec
            .tests
            .iter()
            .map(|v| track(space, v))
            .collect::<Result<Vec<_>>>()?;
        let probes = spec
            .probes
            .iter()
            .map(|g| Ok((track(space, g)?, track(space, &inverse(g))?)))
            .collect::<Result<Vec<_>>>()?;
        let m = offsets.len();
        let d = deficits.len();
        Ok(RangeAccumulator {
            visited: FxHashMap::default(),
            offsets,
            neighbors,
            deficits,
            counts: vec![0; d],
            tests,
            probes,
            boundary: 0,
            n: 0,
            look: vec![None; m],
        })
    }

    pub fn len(&self) -> usize {
        self.visited.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visited.is_empty()
    }

    pub fn steps(&self) -> u64 {
        self.n
    }

    pub fn contains(&self, x: &S::Site) -> bool {
        self.visited.contains_key(x)
    }

    pub fn sites(&self) -> impl Iterator<Item = &S::Site> {
        self.visited.keys()
    }

    /// Records `S_{n+1} = x`. Returns whether the site is new.
    #[inline]
    pub fn insert(&mut self, space: &S, x: S::Site) -> bool {
        self.n += 1;
        if self.visited.contains_key(&x) {
            return false;
        }
        self.visited.insert(x, 0);
        for (k, off) in self.offsets.iter().enumerate() {
            self.look[k] = space.peek(x, *off).filter(|y| self.visited.contains_key(y));
        }
        let mut missing = 0u8;
        for &k in &self.neighbors {
            match self.look[k] {
                None => missing += 1,
                Some(y) => {
                    let c = self.visited.get_mut(&y).expect("present neighbour");
                    *c -= 1;
                    if *c == 0 {
                        self.boundary -= 1;
                    }
                }
            }
        }
        if missing > 0 {
            self.boundary += 1;
            *self.visited.get_mut(&x).unwrap() = missing;
        }
        for (i, &(t, t_inv)) in self.deficits.iter().enumerate() {
            if self.look[t_inv].is_none() {
                self.counts[i] += 1;
            }
            if let Some(y) = self.look[t] {
                if y != x {
                    self.counts[i] -= 1;
                }
            }
        }
        true
    }

    /// A step that stays put (lazy hold or zero increment).
    #[inline]
    pub fn hold(&mut self, space: &S, x: S::Site) {
        self.insert(space, x);
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            n: self.n,
            range: self.visited.len() as u64,
            boundary: self.boundary,
            vboundary: self.tests.iter().map(|&i| self.counts[i]).collect(),
            folner: self
                .probes
                .iter()
                .map(|&(a, b)| (self.counts[a], self.counts[b]))
                .collect(),
        }
    }
}

/// Reference implementation by full set algebra on the visited set.
pub fn brute_force_snapshot(visited: &[GroupElement], spec: &BoundarySpec, n: u64) -> Snapshot {
    let set: HashSet<&GroupElement> = visited.iter().collect();
    let outside = |x: &GroupElement, t: &GroupElement| -> bool {
        !set.contains(&multiply(x, t).expect("same group"))
    };
    let deficit = |t: &GroupElement| -> u64 {
        let ti = inverse(t);
        set.iter().filter(|x| outside(x, &ti)).count() as u64
    };
    Snapshot {
        n,
        range: set.len() as u64,
        boundary: set
            .iter()
            .filter(|x| spec.neighbors.iter().any(|e| outside(x, e)))
            .count() as u64,
        vboundary: spec.tests.iter().map(deficit).collect(),
        folner: spec
            .probes
            .iter()
            .map(|g| (deficit(g), deficit(&inverse(g))))
            .collect(),
    }
}

/// Right multipliers for the draws of a cocycle, forward and inverted.
pub struct StepTable<S: SiteSpace> {
    forward: Vec<S::Step>,
    backward: Vec<S::Step>,
}

impl<S: SiteSpace> StepTable<S> {
    pub fn new(space: &mut S, spec: &CocycleSpec) -> Result<Self> {
        let atoms = spec.law().and_then(|l| l.base_support()).unwrap_or_default();
        let forward = atoms
            .iter()
            .map(|g| space.step_of(g))
            .collect::<Result<Vec<_>>>()?;
        let backward = atoms
            .iter()
            .map(|g| space.step_of(&inverse(g)))
            .collect::<Result<Vec<_>>>()?;
        Ok(StepTable { forward, backward })
    }

    /// Multiplier for `omega(n)`; `None` for a hold.
    #[inline]
    pub fn forward(&self, space: &S, d: Draw) -> Option<S::Step> {
        match d {
            Draw::Atom(i) => Some(self.forward[i]),
            Draw::Jump(k) => Some(space.jump(k)),
            Draw::Hold => None,
        }
    }

    /// Multiplier `omega(-n)^-1` for the backward walk.
    #[inline]
    pub fn backward(&self, space: &S, d: Draw) -> Option<S::Step> {
        match d {
            Draw::Atom(i) => Some(self.backward[i]),
            Draw::Jump(k) => Some(space.jump(-k)),
            Draw::Hold => None,
        }
    }
}

/// Walks one forward trajectory and compares the incremental counters with
/// [`brute_force_snapshot`] every `every` steps.
pub fn compare_with_brute_force<S: SiteSpace>(
    mut space: S,
    cocycle: &CocycleSpec,
    spec: &BoundarySpec,
    seed: u64,
    trajectory: u64,
    steps: usize,
    every: usize,
) -> std::result::Result<(), String> {
    let table = StepTable::new(&mut space, cocycle).map_err(|e| e.to_string())?;
    let mut acc = RangeAccumulator::new(&mut space, spec).map_err(|e| e.to_string())?;
    let mut src = cocycle.source(seed, trajectory, Direction::Forward);
    let mut x = space.origin();
    let mut visited: Vec<GroupElement> = Vec::new();
    for step in 1..=steps {
        if let Some(s) = table.forward(&space, src.next()) {
            x = space.mul(x, s).map_err(|e| e.to_string())?;
        }
        acc.insert(&space, x);
        visited.push(space.element(x));
        if step % every == 0 || step == steps {
            let inc = acc.snapshot();
            let brute = brute_force_snapshot(&visited, spec, step as u64);
            if inc != brute {
                return Err(format!("trajectory {trajectory}, step {step}: {inc:?} != {brute:?}"));
            }
            if acc.len() as u64 != inc.range {
                return Err(format!("trajectory {trajectory}, step {step}: range count drift"));
            }
            // |d_v R| <= |dR| <= sum_v |d_v R| when the tests are the generators
            if spec.tests == spec.neighbors {
                let sum: u64 = inc.vboundary.iter().sum();
                if inc.vboundary.iter().any(|&v| v > inc.boundary) || inc.boundary > sum {
                    return Err(format!("trajectory {trajectory}, step {step}: boundary sandwich fails"));
                }
            }
        }
    }
    Ok(())
}
