//! Step laws: increment distributions with exact samplers, characteristic
//! functions for lattice laws, periodicity diagnostics and the lazy transform.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::weighted_alias::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::group::{inverse, multiply, GroupDescriptor, GroupElement, GroupKind};
use crate::lattice::{gcd, generates_lattice, rank_and_index};
use crate::rng::RngStream;
use crate::special::{cosine_deficit, hurwitz_zeta, zeta};

/// Default CDF table length for the zeta laws.
pub const ZETA_TABLE_CUTOFF: u64 = 1_000_000;
/// Loop horizon for the bounded-horizon strong aperiodicity certificate.
pub const LOOP_HORIZON: usize = 64;
const NONLATTICE_LOOP_HORIZON: usize = 8;
const ZETA_CERTIFICATE_SUPPORT: i64 = 4;
const GUIDE_BITS: u32 = 16;

/// Finite-support law with an alias sampler.
#[derive(Clone)]
pub struct FiniteLaw {
    group: GroupDescriptor,
    atoms: Vec<(GroupElement, f64)>,
    alias: Arc<WeightedAliasIndex<f64>>,
    source: String,
}

impl FiniteLaw {
    pub fn new(group: GroupDescriptor, atoms: Vec<(GroupElement, f64)>) -> Result<Self> {
        Self::with_source(group, atoms, "atoms".to_string())
    }

    fn with_source(
        group: GroupDescriptor,
        atoms: Vec<(GroupElement, f64)>,
        source: String,
    ) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Usage("a finite law needs at least one atom".into()));
        }
        // merge repeated atoms, keep a deterministic order
        let mut merged: BTreeMap<GroupElement, f64> = BTreeMap::new();
        for (x, p) in atoms {
            if x.kind() != group.kind {
                return Err(Error::MixedGroups {
                    left: group.kind.to_string(),
                    right: x.kind().to_string(),
                });
            }
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::Usage(format!("atom {x} has invalid probability {p}")));
            }
            *merged.entry(x).or_insert(0.0) += p;
        }
        merged.retain(|_, p| *p > 0.0);
        let total: f64 = merged.values().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Usage(format!(
                "atom probabilities sum to {total}, not 1"
            )));
        }
        let atoms: Vec<(GroupElement, f64)> = merged.into_iter().collect();
        let weights: Vec<f64> = atoms.iter().map(|(_, p)| *p).collect();
        let alias = WeightedAliasIndex::new(weights)
            .map_err(|e| Error::Usage(format!("cannot build sampler: {e}")))?;
        Ok(FiniteLaw {
            group,
            atoms,
            alias: Arc::new(alias),
            source,
        })
    }

    pub fn atoms(&self) -> &[(GroupElement, f64)] {
        &self.atoms
    }
}

/// Symmetric zeta law on Z: `P(X = ±k) = k^-(1+alpha) / (2 zeta(1+alpha))`.
///
/// The magnitude is drawn by inversion of a tabulated CDF up to `cutoff`
/// (with a guide table for O(1) expected search), and beyond the cutoff by a
/// continuous Pareto proposal with discrete rejection, which is exact.
pub struct ZetaTable {
    alpha: f64,
    exponent: f64,
    norm: f64,
    cutoff: u64,
    cdf: Vec<f64>,
    guide: Vec<u32>,
    tail_mass: f64,
    tail_max_ratio: f64,
}

impl ZetaTable {
    pub fn new(alpha: f64, cutoff: u64) -> Result<Self> {
        if !(1.0..=2.0).contains(&alpha) {
            return Err(Error::Usage(format!(
                "zeta index must lie in [1, 2], got {alpha}"
            )));
        }
        if cutoff < 2 || cutoff > u32::MAX as u64 {
            return Err(Error::Usage(format!("invalid zeta cutoff {cutoff}")));
        }
        let s = 1.0 + alpha;
        let norm = zeta(s);
        let mut cdf = Vec::with_capacity(cutoff as usize);
        let (mut acc, mut comp) = (0.0f64, 0.0f64);
        for k in 1..=cutoff {
            let y = (k as f64).powf(-s) / norm - comp;
            let t = acc + y;
            comp = (t - acc) - y;
            acc = t;
            cdf.push(acc);
        }
        let tail_mass = hurwitz_zeta(s, cutoff + 1) / norm;
        let guide_len = 1usize << GUIDE_BITS;
        let mut guide = Vec::with_capacity(guide_len + 1);
        let mut k = 0usize;
        for j in 0..=guide_len {
            let u = j as f64 / guide_len as f64;
            while k < cdf.len() && cdf[k] <= u {
                k += 1;
            }
            guide.push(k.min(cdf.len() - 1) as u32);
        }
        let first = (cutoff + 1) as f64;
        let tail_max_ratio = pareto_weight(first, s);
        Ok(ZetaTable {
            alpha,
            exponent: s,
            norm,
            cutoff,
            cdf,
            guide,
            tail_mass,
            tail_max_ratio,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cutoff(&self) -> u64 {
        self.cutoff
    }

    /// `P(|X| = k)`.
    pub fn magnitude_pmf(&self, k: u64) -> f64 {
        if k == 0 {
            0.0
        } else {
            (k as f64).powf(-self.exponent) / self.norm
        }
    }

    /// `P(|X| > k)`, exact through the Hurwitz zeta function.
    pub fn magnitude_tail(&self, k: u64) -> f64 {
        hurwitz_zeta(self.exponent, k + 1) / self.norm
    }

    pub fn sample_magnitude<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        loop {
            let u: f64 = rng.gen();
            if u < 1.0 - self.tail_mass {
                let j = (u * (1u64 << GUIDE_BITS) as f64) as usize;
                let mut lo = self.guide[j] as usize;
                let mut hi = self.guide[j + 1] as usize;
                // smallest k with cdf[k] > u inside [lo, hi]
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    if self.cdf[mid] > u {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                if self.cdf[lo] > u {
                    return lo as u64 + 1;
                }
                // u fell in the rounding gap between cdf[K-1] and 1 - tail
                continue;
            }
            if let Some(k) = self.sample_tail(rng) {
                return k;
            }
        }
    }

    fn sample_tail<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<u64> {
        let s = self.exponent;
        let start = (self.cutoff + 1) as f64;
        loop {
            let u: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
            let x = start * u.powf(-1.0 / (s - 1.0));
            if x >= (1u64 << 62) as f64 {
                // mass beyond 2^62 is below 1e-18; redraw rather than overflow
                return None;
            }
            let k = x.floor();
            let v: f64 = rng.gen();
            if v * self.tail_max_ratio <= pareto_weight(k, s) {
                return Some(k as u64);
            }
        }
    }

    /// `1 - phi(t)` for the symmetric law.
    pub fn one_minus_char_fn(&self, t: f64) -> f64 {
        let t = wrap_angle(t);
        cosine_deficit(self.exponent, t) / self.norm
    }

    /// Leading coefficient `c` in `1 - phi(t) ~ c |t|^alpha` for alpha < 2
    /// (for alpha = 1 this is the Cauchy scale 3/pi).
    pub fn stable_scale(&self) -> Option<f64> {
        let a = self.alpha;
        if a >= 2.0 {
            return None;
        }
        if a == 1.0 {
            return Some(3.0 / PI);
        }
        Some(PI / (2.0 * gamma(1.0 + a) * (PI * a / 2.0).sin() * self.norm))
    }
}

// k^-s divided by the proposal mass on [k, k+1) (up to the common factor s-1)
fn pareto_weight(k: f64, s: f64) -> f64 {
    let cell = -(k.powf(1.0 - s)) * ((1.0 - s) * (1.0 / k).ln_1p()).exp_m1();
    k.powf(-s) / cell
}

fn wrap_angle(t: f64) -> f64 {
    if (-PI..=PI).contains(&t) {
        t
    } else {
        let r = (t + PI).rem_euclid(2.0 * PI) - PI;
        if r == -PI {
            PI
        } else {
            r
        }
    }
}

#[derive(Clone)]
pub struct ZetaLaw {
    table: Arc<ZetaTable>,
}

impl ZetaLaw {
    pub fn table(&self) -> &ZetaTable {
        &self.table
    }

    pub fn is_cauchy(&self) -> bool {
        self.table.alpha == 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Draw {
    Atom(usize),
    Jump(i64),
    Hold,
}

/// Increment distribution of a walk.
#[derive(Clone)]
pub enum StepLaw {
    /// Uniform on the canonical generators of a group.
    Simple {
        group: GroupDescriptor,
        generators: Vec<GroupElement>,
    },
    Finite(FiniteLaw),
    /// Symmetric zeta law on Z (alpha = 1 is the Cauchy-domain case).
    Zeta(ZetaLaw),
    /// `B * xi` with `P(B = 1) = rho`, `P(B = 0) = 1 - rho`.
    Lazy { inner: Box<StepLaw>, rho: f64 },
}

impl fmt::Debug for StepLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StepLaw({} on {})", self.token(), self.group().kind)
    }
}

impl StepLaw {
    pub fn simple(group: GroupDescriptor) -> Self {
        StepLaw::Simple {
            group,
            generators: group.generators(),
        }
    }

    pub fn finite(group: GroupDescriptor, atoms: Vec<(GroupElement, f64)>) -> Result<Self> {
        Ok(StepLaw::Finite(FiniteLaw::new(group, atoms)?))
    }

    /// Point mass on one element.
    pub fn deterministic(x: GroupElement) -> Self {
        let group = GroupDescriptor::new(x.kind());
        StepLaw::finite(group, vec![(x, 1.0)]).expect("point mass is a valid law")
    }

    pub fn zeta(alpha: f64) -> Result<Self> {
        Self::zeta_with_cutoff(alpha, ZETA_TABLE_CUTOFF)
    }

    pub fn zeta_with_cutoff(alpha: f64, cutoff: u64) -> Result<Self> {
        if alpha <= 1.0 {
            return Err(Error::Usage(format!(
                "symmetric zeta laws need alpha in (1, 2]; use `cauchy` for alpha = 1 (got {alpha})"
            )));
        }
        Ok(StepLaw::Zeta(ZetaLaw {
            table: Arc::new(ZetaTable::new(alpha, cutoff)?),
        }))
    }

    pub fn cauchy() -> Self {
        StepLaw::Zeta(ZetaLaw {
            table: Arc::new(ZetaTable::new(1.0, ZETA_TABLE_CUTOFF).expect("valid cutoff")),
        })
    }

    pub fn group(&self) -> GroupDescriptor {
        match self {
            StepLaw::Simple { group, .. } => *group,
            StepLaw::Finite(f) => f.group,
            StepLaw::Zeta(_) => GroupDescriptor::lattice(1),
            StepLaw::Lazy { inner, .. } => inner.group(),
        }
    }

    /// CLI token describing the law.
    pub fn token(&self) -> String {
        match self {
            StepLaw::Simple { .. } => "srw".to_string(),
            StepLaw::Finite(f) => f.source.clone(),
            StepLaw::Zeta(z) if z.is_cauchy() => "cauchy".to_string(),
            StepLaw::Zeta(z) => format!("zeta:{}", z.table.alpha),
            StepLaw::Lazy { inner, rho } => format!("lazy:{rho}:{}", inner.token()),
        }
    }

    /// Finite support with probabilities, merged and sorted; `None` for
    /// infinite-support laws.
    pub fn atoms(&self) -> Option<Vec<(GroupElement, f64)>> {
        match self {
            StepLaw::Simple { generators, .. } => {
                let p = 1.0 / generators.len() as f64;
                let mut v: Vec<_> = generators.iter().map(|g| (g.clone(), p)).collect();
                v.sort_by(|a, b| a.0.cmp(&b.0));
                Some(v)
            }
            StepLaw::Finite(f) => Some(f.atoms.clone()),
            StepLaw::Zeta(_) => None,
            StepLaw::Lazy { inner, rho } => {
                let mut merged: BTreeMap<GroupElement, f64> = BTreeMap::new();
                merged.insert(self.group().identity(), 1.0 - rho);
                for (x, p) in inner.atoms()? {
                    *merged.entry(x).or_insert(0.0) += rho * p;
                }
                Some(merged.into_iter().collect())
            }
        }
    }

    /// Law of the inverse increment (drives the backward walk).
    pub fn inverted(&self) -> StepLaw {
        match self {
            StepLaw::Simple { .. } | StepLaw::Zeta(_) => self.clone(),
            StepLaw::Finite(f) => {
                let atoms = f.atoms.iter().map(|(x, p)| (inverse(x), *p)).collect();
                let mut law = FiniteLaw::new(f.group, atoms).expect("inverse of a valid law");
                law.source = format!("inv({})", f.source);
                StepLaw::Finite(law)
            }
            StepLaw::Lazy { inner, rho } => StepLaw::Lazy {
                inner: Box::new(inner.inverted()),
                rho: *rho,
            },
        }
    }

    /// One increment in index form: an atom of [`StepLaw::base_support`], an
    /// integer jump (zeta laws) or a lazy hold.
    #[inline]
    pub fn draw(&self, rng: &mut RngStream) -> Draw {
        match self {
            StepLaw::Simple { generators, .. } => Draw::Atom(rng.gen_range(0..generators.len())),
            StepLaw::Finite(f) => Draw::Atom(f.alias.sample(rng)),
            StepLaw::Zeta(z) => Draw::Jump(sample_zeta(&z.table, rng)),
            StepLaw::Lazy { inner, rho } => {
                if rng.gen::<f64>() < *rho {
                    inner.draw(rng)
                } else {
                    Draw::Hold
                }
            }
        }
    }

    /// Atoms addressed by [`Draw::Atom`]: the support of the innermost
    /// non-lazy law, or `None` for zeta laws.
    pub fn base_support(&self) -> Option<Vec<GroupElement>> {
        match self {
            StepLaw::Simple { generators, .. } => Some(generators.clone()),
            StepLaw::Finite(f) => Some(f.atoms.iter().map(|(x, _)| x.clone()).collect()),
            StepLaw::Zeta(_) => None,
            StepLaw::Lazy { inner, .. } => inner.base_support(),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> GroupElement {
        match self.draw(rng) {
            Draw::Atom(i) => match self.innermost() {
                StepLaw::Simple { generators, .. } => generators[i].clone(),
                StepLaw::Finite(f) => f.atoms[i].0.clone(),
                _ => unreachable!(),
            },
            Draw::Jump(k) => GroupElement::zd(&[k]),
            Draw::Hold => self.group().identity(),
        }
    }

    fn innermost(&self) -> &StepLaw {
        match self {
            StepLaw::Lazy { inner, .. } => inner.innermost(),
            other => other,
        }
    }

    /// `phi(t) = E exp(i <t, xi>)` for lattice laws.
    pub fn char_fn(&self, t: &[f64]) -> Result<Complex64> {
        Ok(Complex64::new(1.0, 0.0) - self.one_minus_char_fn(t)?)
    }

    /// `1 - phi(t)` evaluated without cancellation near t = 0.
    pub fn one_minus_char_fn(&self, t: &[f64]) -> Result<Complex64> {
        let dim = self.group().kind.lattice_dim().ok_or_else(|| {
            Error::Unsupported(format!(
                "characteristic function on {}",
                self.group().kind
            ))
        })?;
        if t.len() != dim {
            return Err(Error::Usage(format!(
                "frequency has {} components, law lives on Z^{dim}",
                t.len()
            )));
        }
        Ok(match self {
            StepLaw::Simple { .. } => {
                let s: f64 = t.iter().map(|&ti| 2.0 * (ti / 2.0).sin().powi(2)).sum();
                Complex64::new(s / dim as f64, 0.0)
            }
            StepLaw::Finite(f) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (x, p) in &f.atoms {
                    let x = x.as_zd().expect("lattice atom");
                    let phase: f64 = x
                        .coords()
                        .iter()
                        .zip(t)
                        .map(|(&c, &ti)| c as f64 * ti)
                        .sum();
                    acc += Complex64::new(2.0 * (phase / 2.0).sin().powi(2), -phase.sin()) * *p;
                }
                acc
            }
            StepLaw::Zeta(z) => Complex64::new(z.table.one_minus_char_fn(t[0]), 0.0),
            StepLaw::Lazy { inner, rho } => inner.one_minus_char_fn(t)? * *rho,
        })
    }

    /// The lazy version of this law.
    pub fn lazy(&self, rho: f64) -> Result<StepLaw> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Usage(format!(
                "laziness parameter must lie in (0, 1), got {rho}"
            )));
        }
        Ok(StepLaw::Lazy {
            inner: Box::new(self.clone()),
            rho,
        })
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            StepLaw::Simple { .. } | StepLaw::Zeta(_) => true,
            StepLaw::Finite(f) => f.atoms.iter().all(|(x, p)| {
                let xi = inverse(x);
                f.atoms
                    .iter()
                    .any(|(y, q)| *y == xi && (p - q).abs() < 1e-15)
            }),
            StepLaw::Lazy { inner, .. } => inner.is_symmetric(),
        }
    }

    /// Largest |coordinate| of a support point (lattice finite laws only).
    pub fn max_jump(&self) -> Option<i64> {
        let atoms = self.atoms()?;
        atoms
            .iter()
            .map(|(x, _)| x.as_zd().map(|p| p.coords().iter().map(|c| c.abs()).max().unwrap()))
            .try_fold(0i64, |m, v| v.map(|v| m.max(v)))
    }

    pub fn diagnose(&self) -> LawDiagnostics {
        diagnose(self)
    }
}

#[inline]
fn sample_zeta(table: &ZetaTable, rng: &mut RngStream) -> i64 {
    let k = table.sample_magnitude(rng) as i64;
    if rng.gen::<bool>() {
        k
    } else {
        -k
    }
}

/// Parses a law token: `srw`, `atoms:<file>`, `zeta:<alpha>`, `cauchy`,
/// `lazy:<rho>:<inner>`.
pub fn parse_law(token: &str, group: GroupDescriptor) -> Result<StepLaw> {
    let token = token.trim();
    if token == "srw" {
        return Ok(StepLaw::simple(group));
    }
    if token == "cauchy" {
        require_z1(group, token)?;
        return Ok(StepLaw::cauchy());
    }
    if let Some(rest) = token.strip_prefix("zeta:") {
        require_z1(group, token)?;
        let alpha: f64 = rest
            .parse()
            .map_err(|_| Error::Parse(format!("malformed zeta index `{rest}`")))?;
        return StepLaw::zeta(alpha);
    }
    if let Some(rest) = token.strip_prefix("lazy:") {
        let (rho, inner) = rest
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected lazy:<rho>:<law>, got `{token}`")))?;
        let rho: f64 = rho
            .parse()
            .map_err(|_| Error::Parse(format!("malformed laziness `{rho}`")))?;
        return parse_law(inner, group)?.lazy(rho);
    }
    if let Some(path) = token.strip_prefix("atoms:") {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        let atoms = parse_atoms(&text, group)?;
        return Ok(StepLaw::Finite(FiniteLaw::with_source(
            group,
            atoms,
            token.to_string(),
        )?));
    }
    Err(Error::Parse(format!(
        "unknown law `{token}` (expected srw, atoms:<file>, zeta:<alpha>, cauchy, lazy:<rho>:<law>)"
    )))
}

fn require_z1(group: GroupDescriptor, token: &str) -> Result<()> {
    if group.kind != GroupKind::Lattice(1) {
        return Err(Error::Usage(format!("law `{token}` lives on z1, not {}", group.kind)));
    }
    Ok(())
}

/// Atom file: one `<element> <probability>` per line; `#` starts a comment.
/// Probabilities may be decimals or fractions like `1/3`.
pub fn parse_atoms(text: &str, group: GroupDescriptor) -> Result<Vec<(GroupElement, f64)>> {
    let mut atoms = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(elem), Some(prob), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Parse(format!(
                "line {}: expected `<element> <probability>`",
                lineno + 1
            )));
        };
        let x = group.parse_element(elem)?;
        let p = parse_probability(prob)
            .ok_or_else(|| Error::Parse(format!("line {}: bad probability `{prob}`", lineno + 1)))?;
        atoms.push((x, p));
    }
    Ok(atoms)
}

fn parse_probability(s: &str) -> Option<f64> {
    if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.parse().ok()?;
        let b: f64 = b.parse().ok()?;
        Some(a / b)
    } else {
        s.parse().ok()
    }
}

pub fn load_atoms(path: &Path, group: GroupDescriptor) -> Result<StepLaw> {
    parse_law(&format!("atoms:{}", path.display()), group)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certificate {
    /// Integer lattice certificate from the support (Hermite normal form).
    Exact,
    /// Return-loop lengths enumerated up to a finite horizon.
    BoundedHorizon,
    /// Sufficient condition only (non-lattice groups).
    Sufficient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recurrence {
    Recurrent,
    Transient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Analytic,
    Empirical,
}

/// Periodicity, moment and recurrence diagnostics.
///
/// `second_moment` is `E[xi xi^T]`; `quadratic_form` is half of it, the
/// matrix `Sigma` in the expansion `phi(t) = 1 - <Sigma t, t> + o(|t|^2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawDiagnostics {
    pub aperiodic: bool,
    pub strongly_aperiodic: bool,
    pub aperiodicity_certificate: Certificate,
    pub strong_aperiodicity_certificate: Certificate,
    pub mean: Option<Vec<f64>>,
    pub second_moment: Option<Vec<Vec<f64>>>,
    pub quadratic_form: Option<Vec<Vec<f64>>>,
    /// `gamma` in `phi(t) = 1 - gamma |t| + o(|t|)` (Cauchy-domain laws).
    pub cauchy_scale: Option<f64>,
    /// Tail index alpha of zeta laws.
    pub stable_index: Option<f64>,
    pub recurrence: Recurrence,
    pub recurrence_provenance: Provenance,
}

impl LawDiagnostics {
    pub fn is_transient(&self) -> bool {
        self.recurrence == Recurrence::Transient
    }

    /// Satisfies the planar finite-variance assumption (d = 2, nonsingular
    /// covariance, centered) or the Cauchy-domain assumption (d = 1).
    pub fn has_log_return_regime(&self, dim: usize) -> bool {
        match dim {
            2 => {
                let centered = self
                    .mean
                    .as_ref()
                    .is_some_and(|m| m.iter().all(|x| x.abs() < 1e-12));
                let nonsingular = self.second_moment.as_ref().is_some_and(|m| {
                    (m[0][0] * m[1][1] - m[0][1] * m[1][0]).abs() > 1e-12
                });
                centered && nonsingular
            }
            1 => self.cauchy_scale.is_some(),
            _ => false,
        }
    }
}

fn diagnose(law: &StepLaw) -> LawDiagnostics {
    let group = law.group();
    match group.kind {
        GroupKind::Lattice(d) => diagnose_lattice(law, d as usize),
        _ => diagnose_nonlattice(law, group),
    }
}

fn diagnose_lattice(law: &StepLaw, dim: usize) -> LawDiagnostics {
    if let Some((zeta, rho)) = zeta_core(law) {
        let alpha = zeta.table.alpha;
        // support is all of Z \ {0} (plus 0 when lazy): generates Z, and the
        // differences contain 1; certified on a truncated support by loops
        let loops = return_loop_gcd(law, 16);
        return LawDiagnostics {
            aperiodic: true,
            strongly_aperiodic: loops == Some(1),
            aperiodicity_certificate: Certificate::Exact,
            strong_aperiodicity_certificate: Certificate::BoundedHorizon,
            mean: Some(vec![0.0]),
            second_moment: None,
            quadratic_form: None,
            cauchy_scale: zeta.table.stable_scale().filter(|_| alpha == 1.0).map(|g| g * rho),
            stable_index: Some(alpha),
            recurrence: Recurrence::Recurrent,
            recurrence_provenance: Provenance::Analytic,
        };
    }
    let atoms = law.atoms().expect("finite lattice law");
    let support: Vec<Vec<i64>> = atoms
        .iter()
        .map(|(x, _)| x.as_zd().unwrap().coords().to_vec())
        .collect();
    let aperiodic = generates_lattice(&support, dim);
    let base = &support[0];
    let diffs: Vec<Vec<i64>> = support
        .iter()
        .map(|v| v.iter().zip(base).map(|(a, b)| a - b).collect())
        .collect();
    let strongly_aperiodic = generates_lattice(&diffs, dim);

    let mut mean = vec![0.0; dim];
    let mut second = vec![vec![0.0; dim]; dim];
    for (x, p) in &atoms {
        let c = x.as_zd().unwrap().coords();
        for i in 0..dim {
            mean[i] += p * c[i] as f64;
            for j in 0..dim {
                second[i][j] += p * (c[i] * c[j]) as f64;
            }
        }
    }
    let half: Vec<Vec<f64>> = second
        .iter()
        .map(|r| r.iter().map(|v| v / 2.0).collect())
        .collect();
    let (rank, _) = rank_and_index(&support, dim);
    let drift = mean.iter().any(|m| m.abs() > 1e-12);
    let recurrence = if rank >= 3 || drift {
        Recurrence::Transient
    } else {
        Recurrence::Recurrent
    };
    LawDiagnostics {
        aperiodic,
        strongly_aperiodic,
        aperiodicity_certificate: Certificate::Exact,
        strong_aperiodicity_certificate: Certificate::Exact,
        mean: Some(mean),
        second_moment: Some(second),
        quadratic_form: Some(half),
        cauchy_scale: None,
        stable_index: None,
        recurrence,
        recurrence_provenance: Provenance::Analytic,
    }
}

fn zeta_core(law: &StepLaw) -> Option<(&ZetaLaw, f64)> {
    match law {
        StepLaw::Zeta(z) => Some((z, 1.0)),
        StepLaw::Lazy { inner, rho } => zeta_core(inner).map(|(z, r)| (z, r * rho)),
        _ => None,
    }
}

fn diagnose_nonlattice(law: &StepLaw, group: GroupDescriptor) -> LawDiagnostics {
    let atoms = law.atoms().expect("finite law on a non-lattice group");
    let support: HashSet<GroupElement> = atoms.iter().map(|(x, _)| x.clone()).collect();
    // sufficient: every canonical generator or its inverse is a step
    let aperiodic = group
        .generators()
        .iter()
        .all(|g| support.contains(g) || support.contains(&inverse(g)));
    let strongly_aperiodic = return_loop_gcd(law, NONLATTICE_LOOP_HORIZON) == Some(1);
    let (recurrence, provenance) = if aperiodic {
        // admissible walks on F2 (non-amenable) and H3 (quartic growth) are transient
        (Recurrence::Transient, Provenance::Analytic)
    } else {
        (empirical_recurrence(law), Provenance::Empirical)
    };
    LawDiagnostics {
        aperiodic,
        strongly_aperiodic,
        aperiodicity_certificate: Certificate::Sufficient,
        strong_aperiodicity_certificate: Certificate::BoundedHorizon,
        mean: None,
        second_moment: None,
        quadratic_form: None,
        cauchy_scale: None,
        stable_index: None,
        recurrence,
        recurrence_provenance: provenance,
    }
}

// Returns to the identity keep accumulating for recurrent walks: compare the
// mean number of returns in [1, n] and [1, 4n].
fn empirical_recurrence(law: &StepLaw) -> Recurrence {
    let n = 2048usize;
    let reps = 400u64;
    let id = law.group().identity();
    let (mut early, mut late) = (0usize, 0usize);
    for r in 0..reps {
        let mut rng = crate::rng::aux_stream(0x5EED, r);
        let mut x = id.clone();
        for step in 1..=4 * n {
            x = multiply(&x, &law.sample(&mut rng)).expect("same group");
            if x == id {
                if step <= n {
                    early += 1;
                }
                late += 1;
            }
        }
    }
    if late as f64 > 1.5 * early as f64 + 2.0 {
        Recurrence::Recurrent
    } else {
        Recurrence::Transient
    }
}

/// gcd of the lengths of positive-probability loops at the identity of
/// length at most `horizon`; `None` if no loop is found. Zeta laws are
/// truncated to |k| <= 4.
pub fn return_loop_gcd(law: &StepLaw, horizon: usize) -> Option<u64> {
    let support: Vec<GroupElement> = match law.atoms() {
        Some(a) => a.into_iter().map(|(x, _)| x).collect(),
        None => {
            let mut s: Vec<GroupElement> = (1..=ZETA_CERTIFICATE_SUPPORT)
                .flat_map(|k| [GroupElement::zd(&[k]), GroupElement::zd(&[-k])])
                .collect();
            if matches!(law, StepLaw::Lazy { .. }) {
                s.push(GroupElement::zd(&[0]));
            }
            s
        }
    };
    let id = law.group().identity();
    let mut layer: HashSet<GroupElement> = HashSet::from([id.clone()]);
    let mut g = 0u64;
    const STATE_CAP: usize = 2_000_000;
    for len in 1..=horizon {
        let mut next = HashSet::with_capacity(layer.len() * 2);
        for x in &layer {
            for s in &support {
                next.insert(multiply(x, s).expect("same group"));
            }
        }
        if next.contains(&id) {
            g = gcd(g, len as u64);
            if g == 1 {
                break;
            }
        }
        if next.len() > STATE_CAP {
            break;
        }
        layer = next;
    }
    (g > 0).then_some(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Direction};

    fn z1(k: i64) -> GroupElement {
        GroupElement::zd(&[k])
    }

    #[test]
    fn deterministic_law_always_steps_plus_one() {
        let law = StepLaw::deterministic(z1(1));
        let mut rng = stream(1, 0, Direction::Forward);
        for _ in 0..100 {
            assert_eq!(law.sample(&mut rng), z1(1));
        }
    }

    #[test]
    fn simple_walk_z2_frequencies() {
        let law = StepLaw::simple(GroupDescriptor::lattice(2));
        let mut rng = stream(2, 0, Direction::Forward);
        let n = 1_000_000;
        let mut counts: BTreeMap<GroupElement, usize> = BTreeMap::new();
        for _ in 0..n {
            *counts.entry(law.sample(&mut rng)).or_default() += 1;
        }
        assert_eq!(counts.len(), 4);
        for c in counts.values() {
            let f = *c as f64 / n as f64;
            assert!((f - 0.25).abs() < 0.002, "frequency {f}");
        }
    }

    #[test]
    fn char_fn_examples() {
        let z1law = StepLaw::simple(GroupDescriptor::lattice(1));
        assert!((z1law.char_fn(&[PI]).unwrap() - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let z2law = StepLaw::simple(GroupDescriptor::lattice(2));
        let v = z2law.char_fn(&[PI / 2.0, PI / 2.0]).unwrap();
        assert!(v.norm() < 1e-15);
        let t = [0.3, -1.1];
        let expect = (0.3f64.cos() + 1.1f64.cos()) / 2.0;
        assert!((z2law.char_fn(&t).unwrap().re - expect).abs() < 1e-15);
        let lazy = z1law.lazy(0.5).unwrap();
        assert!(lazy.char_fn(&[PI]).unwrap().norm() < 1e-15);
    }

    #[test]
    fn char_fn_rejects_non_lattice() {
        let law = StepLaw::simple(GroupDescriptor::new(GroupKind::Free2));
        assert!(matches!(law.char_fn(&[0.1]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn finite_char_fn_matches_atom_sum() {
        let g = GroupDescriptor::lattice(1);
        let law = StepLaw::finite(g, vec![(z1(-1), 2.0 / 3.0), (z1(2), 1.0 / 3.0)]).unwrap();
        for &t in &[0.0, 0.1, -0.7, 2.0, PI] {
            let direct = Complex64::from_polar(2.0 / 3.0, -t) + Complex64::from_polar(1.0 / 3.0, 2.0 * t);
            assert!((law.char_fn(&[t]).unwrap() - direct).norm() < 1e-15);
            let mirrored = law.char_fn(&[-t]).unwrap();
            assert!((mirrored - direct.conj()).norm() < 1e-15);
        }
        assert_eq!(law.char_fn(&[0.0]).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn zeta_char_fn_regular_variation() {
        // direct series oracle: sum_k (1 - cos kt) k^-2.5 / zeta(2.5) to 4e6 terms
        let law = StepLaw::zeta_with_cutoff(1.5, 1000).unwrap();
        let norm = zeta(2.5);
        let mut ratios = Vec::new();
        for &t in &[1e-3, 3e-3, 1e-2] {
            let n = 4_000_000u64;
            let mut acc = 0.0;
            for k in (1..=n).rev() {
                let kf = k as f64;
                acc += (1.0 - (kf * t).cos()) * kf.powf(-2.5);
            }
            acc += hurwitz_zeta(2.5, n + 1);
            let direct = acc / norm;
            let fast = law.one_minus_char_fn(&[t]).unwrap().re;
            assert!((fast - direct).abs() < 1e-9 * direct, "t={t}");
            ratios.push(fast / t.powf(1.5));
        }
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi / lo < 1.05, "ratios {ratios:?}");
        let c = law_stable_scale(&law);
        assert!((ratios[0] / c - 1.0).abs() < 0.05);
    }

    fn law_stable_scale(law: &StepLaw) -> f64 {
        match law {
            StepLaw::Zeta(z) => z.table.stable_scale().unwrap(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn cauchy_char_fn_closed_form() {
        let law = StepLaw::cauchy();
        for &t in &[1e-4, 0.5, 2.0, PI] {
            let expect = 3.0 / PI * t - 3.0 / (2.0 * PI * PI) * t * t;
            let got = law.one_minus_char_fn(&[t]).unwrap().re;
            assert!((got - expect).abs() < 1e-14);
        }
        assert!((law.diagnose().cauchy_scale.unwrap() - 3.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn zeta_symmetric_sampler() {
        let law = StepLaw::zeta_with_cutoff(1.5, 10_000).unwrap();
        let mut rng = stream(3, 0, Direction::Forward);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| law.sample(&mut rng).as_zd().unwrap().coords()[0] as f64)
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        // heavy tails: use a median-of-means style robust stderr from |X| <= 1e4
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!(mean.abs() < 5.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn zeta_tail_slope() {
        // exact tail sums oracle: log-log slope of P(|X| > k) on [10, 1e3]
        let table = ZetaTable::new(1.5, 100_000).unwrap();
        let slope_exact = (table.magnitude_tail(1000).ln() - table.magnitude_tail(10).ln())
            / (1000f64.ln() - 10f64.ln());
        assert!((slope_exact + 1.5).abs() < 0.05, "oracle slope {slope_exact}");

        for law in [
            StepLaw::zeta_with_cutoff(1.5, 100_000).unwrap(),
            StepLaw::zeta_with_cutoff(1.5, 100_000).unwrap().lazy(0.9).unwrap(),
        ] {
            let mut rng = stream(4, 0, Direction::Forward);
            let n = 2_000_000;
            let thresholds = [10u64, 100, 1000];
            let mut above = [0usize; 3];
            let mut nonzero = 0usize;
            for _ in 0..n {
                let k = law.sample(&mut rng).as_zd().unwrap().coords()[0].unsigned_abs();
                if k > 0 {
                    nonzero += 1;
                }
                for (c, &t) in above.iter_mut().zip(&thresholds) {
                    if k > t {
                        *c += 1;
                    }
                }
            }
            for (c, &t) in above.iter().zip(&thresholds) {
                let p = table.magnitude_tail(t);
                let se = (p * (1.0 - p) / nonzero as f64).sqrt();
                let f = *c as f64 / nonzero as f64;
                assert!((f - p).abs() < 5.0 * se, "{law:?}: P(|X|>{t}) {f} vs {p}");
            }
        }
    }

    #[test]
    fn zeta_tail_sampler_beyond_cutoff_is_exact() {
        // with a tiny cutoff, most draws of size > 3 come from the rejection tail
        let table = ZetaTable::new(1.5, 3).unwrap();
        let mut rng = stream(5, 0, Direction::Forward);
        let n = 400_000;
        let mut counts = [0usize; 8];
        for _ in 0..n {
            let k = table.sample_magnitude(&mut rng) as usize;
            if k < 8 {
                counts[k] += 1;
            }
        }
        for k in 1..8u64 {
            let p = table.magnitude_pmf(k);
            let f = counts[k as usize] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() < 5.0 * se, "k={k}: {f} vs {p}");
        }
    }

    #[test]
    fn diagnose_examples() {
        let d = StepLaw::simple(GroupDescriptor::lattice(2)).diagnose();
        assert!(d.aperiodic);
        assert!(!d.strongly_aperiodic);
        assert_eq!(d.second_moment.as_ref().unwrap(), &vec![vec![0.5, 0.0], vec![0.0, 0.5]]);
        assert_eq!(d.quadratic_form.as_ref().unwrap()[0][0], 0.25);
        assert_eq!(d.recurrence, Recurrence::Recurrent);

        let g = GroupDescriptor::lattice(1);
        let even = StepLaw::finite(g, vec![(z1(2), 0.5), (z1(-2), 0.5)]).unwrap();
        assert!(!even.diagnose().aperiodic);

        let lazy = StepLaw::simple(GroupDescriptor::lattice(2)).lazy(0.5).unwrap();
        assert!(lazy.diagnose().strongly_aperiodic);

        let z3 = StepLaw::simple(GroupDescriptor::lattice(3)).diagnose();
        assert_eq!(z3.recurrence, Recurrence::Transient);

        let drift = StepLaw::finite(g, vec![(z1(2), 0.5), (z1(-1), 0.5)]).unwrap();
        let dd = drift.diagnose();
        assert_eq!(dd.recurrence, Recurrence::Transient);
        // positions after n steps are congruent to -n mod 3
        assert!(dd.aperiodic && !dd.strongly_aperiodic);

        let det = StepLaw::deterministic(z1(1)).diagnose();
        assert!(det.aperiodic && !det.strongly_aperiodic);

        let zeta = StepLaw::zeta_with_cutoff(1.5, 1000).unwrap().diagnose();
        assert!(zeta.aperiodic && zeta.strongly_aperiodic);
        assert_eq!(zeta.strong_aperiodicity_certificate, Certificate::BoundedHorizon);
        assert_eq!(zeta.recurrence, Recurrence::Recurrent);

        let f2 = StepLaw::simple(GroupDescriptor::new(GroupKind::Free2)).diagnose();
        assert!(f2.aperiodic && !f2.strongly_aperiodic);
        assert_eq!(f2.recurrence, Recurrence::Transient);
    }

    #[test]
    fn simple_walks_have_period_two() {
        for d in 1..=3 {
            let diag = StepLaw::simple(GroupDescriptor::lattice(d)).diagnose();
            assert!(diag.aperiodic);
            assert!(!diag.strongly_aperiodic);
            assert!(!diag.strongly_aperiodic || diag.aperiodic);
        }
    }

    #[test]
    fn lazy_examples() {
        let law = StepLaw::deterministic(z1(1)).lazy(0.5).unwrap();
        assert_eq!(law.atoms().unwrap(), vec![(z1(0), 0.5), (z1(1), 0.5)]);
        assert!(StepLaw::deterministic(z1(1)).lazy(1.0).is_err());
        assert!(StepLaw::deterministic(z1(1)).lazy(0.0).is_err());
    }

    #[test]
    fn lazy_char_fn_identity() {
        let g = GroupDescriptor::lattice(2);
        let base = StepLaw::finite(
            g,
            vec![
                (GroupElement::zd(&[1, 0]), 0.5),
                (GroupElement::zd(&[-1, 1]), 0.3),
                (GroupElement::zd(&[0, -2]), 0.2),
            ],
        )
        .unwrap();
        let lazy = base.lazy(0.3).unwrap();
        for t in [[0.2, 0.1], [-1.0, 2.5], [PI, -PI]] {
            let lhs = lazy.char_fn(&t).unwrap();
            let rhs = Complex64::new(0.7, 0.0) + base.char_fn(&t).unwrap() * 0.3;
            assert!((lhs - rhs).norm() < 1e-15);
        }
    }

    #[test]
    fn atom_file_parsing() {
        let g = GroupDescriptor::lattice(2);
        let atoms = parse_atoms("# law\n1,0 1/2\n-1,0 0.25\n0,1 0.25\n", g).unwrap();
        assert_eq!(atoms.len(), 3);
        let f2 = GroupDescriptor::new(GroupKind::Free2);
        let atoms = parse_atoms("a 0.5\nB 0.5", f2).unwrap();
        assert_eq!(atoms[1].0, GroupElement::word("B"));
        assert!(parse_atoms("1,0", g).is_err());
        assert!(StepLaw::finite(g, vec![(GroupElement::zd(&[1, 0]), 0.9)]).is_err());
        assert!(StepLaw::finite(g, vec![(GroupElement::zd(&[1, 0]), -0.1), (GroupElement::zd(&[0, 1]), 1.1)]).is_err());
    }

    #[test]
    fn law_tokens() {
        let g1 = GroupDescriptor::lattice(1);
        assert_eq!(parse_law("srw", g1).unwrap().token(), "srw");
        assert_eq!(parse_law("cauchy", g1).unwrap().token(), "cauchy");
        assert_eq!(parse_law("lazy:0.5:srw", g1).unwrap().token(), "lazy:0.5:srw");
        assert!(parse_law("zeta:1.5", GroupDescriptor::lattice(2)).is_err());
        assert!(parse_law("zeta:0.5", g1).is_err());
        assert!(parse_law("foo", g1).is_err());
    }

    #[test]
    fn loop_gcd_certificates() {
        let g = GroupDescriptor::lattice(2);
        assert_eq!(return_loop_gcd(&StepLaw::simple(g), 8), Some(2));
        assert_eq!(return_loop_gcd(&StepLaw::simple(g).lazy(0.2).unwrap(), 8), Some(1));
        let det = StepLaw::deterministic(z1(1));
        assert_eq!(return_loop_gcd(&det, 16), None);
    }
}
