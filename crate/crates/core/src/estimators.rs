//! Ensemble Monte Carlo and the estimators built on it.

use std::fmt;
use std::hash::Hasher;

use rayon::prelude::*;
use rustc_hash::FxHasher;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, AnalyticResult, Method};
use crate::cocycle::CocycleSpec;
use crate::error::{Error, Result};
use crate::group::{inverse, GroupDescriptor, GroupElement, GroupKind};
use crate::law::StepLaw;
use crate::quadrature::QuadratureSettings;
use crate::range::{BoundarySpec, RangeAccumulator, StepTable};
use crate::rng::Direction;
use crate::sites::{FreeTreeSpace, HeisenbergSpace, LatticeSpace, SiteSpace};
use crate::stats::{least_squares, Moments};

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const CHECKPOINT_START: u64 = 1000;
pub const CHECKPOINT_RATIO: f64 = 1.5;
/// Visited sites allowed per trajectory before it is recorded as failed.
pub const DEFAULT_MEMORY_CAP: usize = 20_000_000;

/// Functional of a trajectory evaluated at each checkpoint n.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    /// `|R_n| / n`.
    Range,
    /// `|R_n|`.
    Size,
    /// `|dR_n|`.
    Boundary,
    /// `|dR_n| / |R_n|`.
    BoundaryRatio,
    /// `|d_v R_n| = |R_n \ R_n v|`.
    VBoundary(GroupElement),
    /// `|R_n ^ R_n g| / |R_n|`.
    Folner(GroupElement),
    /// `1{S_k != g, 1 <= k <= n}`.
    Escape(GroupElement),
    /// `1{S_k not in {id, g}, 1 <= k <= n}`.
    Avoid(GroupElement),
    /// `1{S_k^(-) != g, 1 <= k <= n}` on the backward walk.
    BackEscape(GroupElement),
}

impl Statistic {
    pub fn name(&self) -> &'static str {
        match self {
            Statistic::Range => "range",
            Statistic::Size => "size",
            Statistic::Boundary => "boundary",
            Statistic::BoundaryRatio => "bratio",
            Statistic::VBoundary(_) => "vboundary",
            Statistic::Folner(_) => "folner",
            Statistic::Escape(_) => "escape",
            Statistic::Avoid(_) => "avoid",
            Statistic::BackEscape(_) => "backescape",
        }
    }

    pub fn element(&self) -> Option<&GroupElement> {
        match self {
            Statistic::VBoundary(g)
            | Statistic::Folner(g)
            | Statistic::Escape(g)
            | Statistic::Avoid(g)
            | Statistic::BackEscape(g) => Some(g),
            _ => None,
        }
    }

    fn element_label(&self) -> String {
        self.element().map(|g| g.to_string()).unwrap_or_default()
    }

    pub fn parse(token: &str, group: GroupDescriptor) -> Result<Statistic> {
        let (name, arg) = match token.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (token, None),
        };
        let element = || -> Result<GroupElement> {
            let a = arg.ok_or_else(|| Error::Parse(format!("statistic `{name}` needs `{name}:<element>`")))?;
            group.parse_element(a)
        };
        let plain = |s: Statistic| -> Result<Statistic> {
            match arg {
                None => Ok(s),
                Some(_) => Err(Error::Parse(format!("statistic `{name}` takes no element"))),
            }
        };
        match name {
            "range" => plain(Statistic::Range),
            "size" => plain(Statistic::Size),
            "boundary" => plain(Statistic::Boundary),
            "bratio" => plain(Statistic::BoundaryRatio),
            "vboundary" => Ok(Statistic::VBoundary(element()?)),
            "folner" => Ok(Statistic::Folner(element()?)),
            "escape" => Ok(Statistic::Escape(element()?)),
            "avoid" => Ok(Statistic::Avoid(element()?)),
            "backescape" => Ok(Statistic::BackEscape(element()?)),
            _ => Err(Error::Parse(format!(
                "unknown statistic `{token}` (expected range, size, boundary, bratio, vboundary:<v>, folner:<g>, escape:<g>, avoid:<g>, backescape:<g>)"
            ))),
        }
    }

    fn needs_range(&self) -> bool {
        !matches!(
            self,
            Statistic::Escape(_) | Statistic::Avoid(_) | Statistic::BackEscape(_)
        )
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.element() {
            Some(g) => write!(f, "{}:{g}", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

/// `ceil(n0 r^k)` below `n_max`, then `n_max`.
pub fn geometric_checkpoints(n0: u64, ratio: f64, n_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let n = (n0 as f64 * ratio.powi(k)).ceil() as u64;
        if n >= n_max {
            break;
        }
        if out.last() != Some(&n) {
            out.push(n);
        }
        k += 1;
    }
    out.push(n_max);
    out
}

pub fn default_checkpoints(n_max: u64) -> Vec<u64> {
    geometric_checkpoints(CHECKPOINT_START, CHECKPOINT_RATIO, n_max)
}

#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    pub experiment: String,
    pub spec: CocycleSpec,
    pub statistics: Vec<Statistic>,
    pub checkpoints: Vec<u64>,
    pub reps: u64,
    pub seed: u64,
    /// Horizon for infinite-time events; added to the checkpoints.
    pub horizon: Option<u64>,
    pub memory_cap: usize,
    /// Worker count; affects speed only.
    pub threads: Option<usize>,
}

impl ExperimentPlan {
    pub fn new(
        spec: CocycleSpec,
        statistics: Vec<Statistic>,
        checkpoints: Vec<u64>,
        reps: u64,
        seed: u64,
    ) -> Result<Self> {
        let plan = ExperimentPlan {
            experiment: "simulate".into(),
            spec,
            statistics,
            checkpoints,
            reps,
            seed,
            horizon: None,
            memory_cap: DEFAULT_MEMORY_CAP,
            threads: None,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn named(mut self, experiment: &str) -> Self {
        self.experiment = experiment.into();
        self
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_horizon(mut self, horizon: Option<u64>) -> Result<Self> {
        self.horizon = horizon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_memory_cap(mut self, cap: usize) -> Self {
        self.memory_cap = cap;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Usage("--reps must be positive".into()));
        }
        if self.statistics.is_empty() {
            return Err(Error::Usage("--stats needs at least one statistic".into()));
        }
        if self.checkpoints.is_empty() || self.checkpoints.contains(&0) || self.horizon == Some(0) {
            return Err(Error::Usage("--steps must be positive".into()));
        }
        let group = self.spec.group();
        for s in &self.statistics {
            if let Some(g) = s.element() {
                if g.kind() != group.kind {
                    return Err(Error::MixedGroups {
                        left: group.kind.to_string(),
                        right: g.kind().to_string(),
                    });
                }
            }
        }
        if let CocycleSpec::Rotation(r) = &self.spec {
            let n = self.last_step();
            if r.grid().1 <= 2 * n {
                return Err(Error::Usage(format!(
                    "rotation grid 1/{} is too coarse for {n} steps",
                    r.grid().1
                )));
            }
        }
        Ok(())
    }

    /// Sorted, deduplicated checkpoints including the horizon.
    pub fn schedule(&self) -> Vec<u64> {
        let mut c = self.checkpoints.clone();
        c.extend(self.horizon);
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn last_step(&self) -> u64 {
        *self.schedule().last().expect("validated")
    }

    pub fn group_token(&self) -> &'static str {
        self.spec.group().kind.token()
    }

    pub fn law_token(&self) -> String {
        match &self.spec {
            CocycleSpec::Bernoulli(law) => law.token(),
            CocycleSpec::Rotation(_) => self.spec.base_token(),
        }
    }

    /// Hash of everything results depend on (not the worker count).
    pub fn hash(&self) -> String {
        let canonical = format!(
            "{}|{}|{}|{}|{:?}|{:?}|{}|{}|{}",
            self.experiment,
            self.group_token(),
            self.law_token(),
            self.spec.base_token(),
            self.statistics.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            self.schedule(),
            self.reps,
            self.seed,
            self.memory_cap
        );
        let mut h = FxHasher::default();
        h.write(canonical.as_bytes());
        format!("{:016x}", h.finish())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: u64,
    pub statistic: String,
    pub element: String,
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
    pub reps: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub trajectory: u64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub experiment: String,
    pub group: String,
    pub law: String,
    pub base: String,
    pub seed: u64,
    pub reps: u64,
    pub plan_hash: String,
    pub rows: Vec<ReportRow>,
    pub failures: Vec<Failure>,
}

impl EstimateReport {
    pub fn empty(experiment: &str, group: &str, law: &str, seed: u64) -> Self {
        EstimateReport {
            experiment: experiment.into(),
            group: group.into(),
            law: law.into(),
            base: "bernoulli".into(),
            seed,
            reps: 0,
            plan_hash: String::new(),
            rows: Vec::new(),
            failures: Vec::new(),
        }
    }

    /// Rows of one statistic, in increasing n.
    pub fn series(&self, statistic: &Statistic) -> Vec<&ReportRow> {
        let (name, element) = (statistic.name(), statistic.element_label());
        self.rows
            .iter()
            .filter(|r| r.statistic == name && r.element == element)
            .collect()
    }

    pub fn sort_rows(&mut self) {
        self.rows.sort_by(|a, b| {
            a.n.cmp(&b.n)
                .then_with(|| a.statistic.cmp(&b.statistic))
                .then_with(|| a.element.cmp(&b.element))
        });
    }
}

/// Per-trajectory values: `values[i * statistics.len() + j]` is statistic j
/// at checkpoint i.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub plan: ExperimentPlan,
    pub checkpoints: Vec<u64>,
    pub records: Vec<std::result::Result<Vec<f64>, String>>,
}

impl Ensemble {
    /// The first `reps` trajectories, identical to running the plan with
    /// `reps` replications.
    pub fn truncated(&self, reps: u64) -> Ensemble {
        let reps = reps.min(self.plan.reps);
        let mut plan = self.plan.clone();
        plan.reps = reps;
        Ensemble {
            plan,
            checkpoints: self.checkpoints.clone(),
            records: self.records[..reps as usize].to_vec(),
        }
    }

    pub fn stat_index(&self, s: &Statistic) -> Option<usize> {
        self.plan.statistics.iter().position(|t| t == s)
    }

    pub fn checkpoint_index(&self, n: u64) -> Option<usize> {
        self.checkpoints.iter().position(|&c| c == n)
    }

    /// Values of statistic `j` at checkpoint `i` over successful trajectories,
    /// in trajectory order.
    pub fn column(&self, i: usize, j: usize) -> Vec<f64> {
        let s = self.plan.statistics.len();
        self.records
            .iter()
            .filter_map(|r| r.as_ref().ok().map(|v| v[i * s + j]))
            .collect()
    }

    pub fn column_of(&self, n: u64, stat: &Statistic) -> Result<Vec<f64>> {
        let i = self
            .checkpoint_index(n)
            .ok_or_else(|| Error::Usage(format!("no checkpoint at n = {n}")))?;
        let j = self
            .stat_index(stat)
            .ok_or_else(|| Error::Usage(format!("statistic {stat} was not tracked")))?;
        Ok(self.column(i, j))
    }

    pub fn failures(&self) -> Vec<Failure> {
        self.records
            .iter()
            .enumerate()
            .filter_map(|(t, r)| {
                r.as_ref().err().map(|m| Failure {
                    trajectory: t as u64,
                    message: m.clone(),
                })
            })
            .collect()
    }

    pub fn report(&self) -> EstimateReport {
        let plan = &self.plan;
        let mut rows = Vec::new();
        for (i, &n) in self.checkpoints.iter().enumerate() {
            for (j, s) in plan.statistics.iter().enumerate() {
                let m = Moments::of(&self.column(i, j));
                rows.push(ReportRow {
                    n,
                    statistic: s.name().into(),
                    element: s.element_label(),
                    mean: m.mean,
                    variance: m.variance,
                    stderr: m.stderr,
                    reps: m.count,
                });
            }
        }
        let mut report = EstimateReport {
            experiment: plan.experiment.clone(),
            group: plan.group_token().into(),
            law: plan.law_token(),
            base: plan.spec.base_token(),
            seed: plan.seed,
            reps: plan.reps,
            plan_hash: plan.hash(),
            rows,
            failures: self.failures(),
        };
        report.sort_rows();
        report
    }

    /// `(n, moments)` of one statistic over the checkpoints.
    pub fn moments(&self, stat: &Statistic) -> Result<Vec<(u64, Moments)>> {
        let j = self
            .stat_index(stat)
            .ok_or_else(|| Error::Usage(format!("statistic {stat} was not tracked")))?;
        Ok(self
            .checkpoints
            .iter()
            .enumerate()
            .map(|(i, &n)| (n, Moments::of(&self.column(i, j))))
            .collect())
    }
}

struct Layout {
    checkpoints: Vec<u64>,
    needs_range: bool,
    boundary: BoundarySpec,
    forward_targets: Vec<GroupElement>,
    backward_targets: Vec<GroupElement>,
    slots: Vec<Slot>,
}

enum Slot {
    Range,
    Size,
    Boundary,
    BoundaryRatio,
    VBoundary(usize),
    Folner(usize),
    Forward(Vec<usize>),
    Backward(usize),
}

fn push_unique(v: &mut Vec<GroupElement>, g: &GroupElement) -> usize {
    match v.iter().position(|x| x == g) {
        Some(i) => i,
        None => {
            v.push(g.clone());
            v.len() - 1
        }
    }
}

impl Layout {
    fn new(plan: &ExperimentPlan) -> Layout {
        let group = plan.spec.group();
        let mut tests = Vec::new();
        let mut probes = Vec::new();
        let mut fwd = Vec::new();
        let mut back = Vec::new();
        let slots = plan
            .statistics
            .iter()
            .map(|s| match s {
                Statistic::Range => Slot::Range,
                Statistic::Size => Slot::Size,
                Statistic::Boundary => Slot::Boundary,
                Statistic::BoundaryRatio => Slot::BoundaryRatio,
                Statistic::VBoundary(v) => Slot::VBoundary(push_unique(&mut tests, v)),
                Statistic::Folner(g) => Slot::Folner(push_unique(&mut probes, g)),
                Statistic::Escape(g) => Slot::Forward(vec![push_unique(&mut fwd, g)]),
                Statistic::Avoid(g) => Slot::Forward(vec![
                    push_unique(&mut fwd, &group.identity()),
                    push_unique(&mut fwd, g),
                ]),
                Statistic::BackEscape(g) => Slot::Backward(push_unique(&mut back, g)),
            })
            .collect();
        Layout {
            checkpoints: plan.schedule(),
            needs_range: plan.statistics.iter().any(|s| s.needs_range()),
            boundary: BoundarySpec::new(group).with_tests(tests).with_probes(probes),
            forward_targets: fwd,
            backward_targets: back,
            slots,
        }
    }
}

// First hitting times of `targets` by the walk driven in `direction`, up to
// `n_end`; stops early once every target is hit unless `acc` is tracking.
fn first_hits<S: SiteSpace>(
    space: &mut S,
    plan: &ExperimentPlan,
    layout: &Layout,
    trajectory: u64,
    direction: Direction,
    targets: &[GroupElement],
    mut acc: Option<(&mut RangeAccumulator<S>, &mut Vec<f64>)>,
) -> Result<Vec<u64>> {
    let table = StepTable::new(space, &plan.spec)?;
    let origin = space.origin();
    let sites = targets
        .iter()
        .map(|g| {
            let s = space.step_of(g)?;
            space.mul(origin, s)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut hits = vec![u64::MAX; sites.len()];
    let mut open = sites.len();
    let n_end = *layout.checkpoints.last().unwrap();
    if open == 0 && acc.is_none() {
        return Ok(hits);
    }
    let mut src = plan.spec.source(plan.seed, trajectory, direction);
    let mut x = origin;
    let mut next_cp = 0usize;
    for n in 1..=n_end {
        let d = src.next();
        let step = match direction {
            Direction::Forward => table.forward(space, d),
            Direction::Backward => table.backward(space, d),
        };
        if let Some(s) = step {
            x = space.mul(x, s)?;
        }
        if open > 0 {
            for (i, t) in sites.iter().enumerate() {
                if hits[i] == u64::MAX && *t == x {
                    hits[i] = n;
                    open -= 1;
                }
            }
        }
        match acc.as_mut() {
            Some((a, out)) => {
                a.insert(space, x);
                if a.len() > plan.memory_cap {
                    return Err(Error::Usage(format!(
                        "memory cap of {} sites exceeded at step {n}",
                        plan.memory_cap
                    )));
                }
                if n == layout.checkpoints[next_cp] {
                    record_range(layout, &a.snapshot(), next_cp, out);
                    next_cp += 1;
                }
            }
            None if open == 0 => break,
            None => {}
        }
    }
    Ok(hits)
}

fn record_range(layout: &Layout, snap: &crate::range::Snapshot, cp: usize, out: &mut [f64]) {
    let s = layout.slots.len();
    let n = snap.n as f64;
    for (j, slot) in layout.slots.iter().enumerate() {
        let v = match slot {
            Slot::Range => snap.range as f64 / n,
            Slot::Size => snap.range as f64,
            Slot::Boundary => snap.boundary as f64,
            Slot::BoundaryRatio => snap.boundary_ratio().unwrap_or(f64::NAN),
            Slot::VBoundary(k) => snap.vboundary[*k] as f64,
            Slot::Folner(k) => snap.folner_ratio(*k).unwrap_or(f64::NAN),
            _ => continue,
        };
        out[cp * s + j] = v;
    }
}

fn run_trajectory<S: SiteSpace>(
    mut space: S,
    plan: &ExperimentPlan,
    layout: &Layout,
    trajectory: u64,
) -> Result<Vec<f64>> {
    let s = layout.slots.len();
    let mut out = vec![f64::NAN; layout.checkpoints.len() * s];
    let fwd = if layout.needs_range {
        let mut acc = RangeAccumulator::new(&mut space, &layout.boundary)?;
        first_hits(
            &mut space,
            plan,
            layout,
            trajectory,
            Direction::Forward,
            &layout.forward_targets,
            Some((&mut acc, &mut out)),
        )?
    } else {
        first_hits(&mut space, plan, layout, trajectory, Direction::Forward, &layout.forward_targets, None)?
    };
    let back = first_hits(
        &mut space,
        plan,
        layout,
        trajectory,
        Direction::Backward,
        &layout.backward_targets,
        None,
    )?;
    for (i, &n) in layout.checkpoints.iter().enumerate() {
        for (j, slot) in layout.slots.iter().enumerate() {
            let v = match slot {
                Slot::Forward(ts) => ts.iter().all(|&t| fwd[t] > n),
                Slot::Backward(t) => back[*t] > n,
                _ => continue,
            };
            out[i * s + j] = if v { 1.0 } else { 0.0 };
        }
    }
    Ok(out)
}

fn run_one(plan: &ExperimentPlan, layout: &Layout, trajectory: u64) -> std::result::Result<Vec<f64>, String> {
    let r = match plan.spec.group().kind {
        GroupKind::Lattice(d) => run_trajectory(LatticeSpace::new(d as usize), plan, layout, trajectory),
        GroupKind::Heisenberg => run_trajectory(HeisenbergSpace, plan, layout, trajectory),
        GroupKind::Free2 => run_trajectory(FreeTreeSpace::new(), plan, layout, trajectory),
    };
    r.map_err(|e| e.to_string())
}

/// Runs every replication and keeps per-trajectory values. Results depend
/// only on the plan, never on the worker count.
pub fn simulate(plan: &ExperimentPlan) -> Result<Ensemble> {
    plan.validate()?;
    let layout = Layout::new(plan);
    let work = || -> Vec<std::result::Result<Vec<f64>, String>> {
        (0..plan.reps)
            .into_par_iter()
            .map(|t| run_one(plan, &layout, t))
            .collect()
    };
    let records = match plan.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::Usage(format!("--threads: {e}")))?
            .install(work),
        None => work(),
    };
    Ok(Ensemble {
        plan: plan.clone(),
        checkpoints: layout.checkpoints,
        records,
    })
}

pub fn run_experiment(plan: &ExperimentPlan) -> Result<EstimateReport> {
    Ok(simulate(plan)?.report())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailMethod {
    Exact,
    Quadrature,
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeEstimate {
    pub target: GroupElement,
    pub horizon: u64,
    /// Fraction of trajectories avoiding the target up to the horizon.
    pub estimate: f64,
    pub stderr: f64,
    /// Bound on the probability of a first visit after the horizon.
    pub tail: f64,
    pub tail_method: TailMethod,
    pub low: f64,
    pub high: f64,
    pub reps: u64,
}

// Exact zero tail for monotone walks on Z that have passed the target.
fn monotone_tail_is_zero(law: &StepLaw, target: &GroupElement, horizon: u64) -> bool {
    let (Some(atoms), Some(t)) = (law.atoms(), target.as_zd()) else {
        return false;
    };
    if t.dim() != 1 {
        return false;
    }
    let jumps: Vec<i64> = atoms.iter().map(|(g, _)| g.as_zd().unwrap().coords()[0]).collect();
    let t = t.coords()[0] as i128;
    let h = horizon as i128 + 1;
    if jumps.iter().all(|&j| j > 0) {
        t < h * *jumps.iter().min().unwrap() as i128
    } else if jumps.iter().all(|&j| j < 0) {
        t > h * *jumps.iter().max().unwrap() as i128
    } else {
        false
    }
}

/// Brackets `q(g) = P(S_n != g for all n >= 1)` by `[q_H - tail, q_H]`,
/// where `q_H` is the truncated Monte Carlo estimate.
pub fn escape_probability(
    spec: &CocycleSpec,
    targets: &[GroupElement],
    horizon: u64,
    reps: u64,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<EscapeEstimate>> {
    if targets.is_empty() {
        return Err(Error::Usage("escape_probability needs a target".into()));
    }
    let stats: Vec<Statistic> = targets.iter().map(|g| Statistic::Escape(g.clone())).collect();
    let half = (horizon / 2).max(1);
    let mut cps = vec![half, horizon];
    cps.dedup();
    let plan = ExperimentPlan::new(spec.clone(), stats.clone(), cps, reps, seed)?
        .named("escape")
        .with_threads(threads);
    let ens = simulate(&plan)?;
    let settings = QuadratureSettings::default();
    targets
        .iter()
        .zip(&stats)
        .map(|(g, s)| {
            let at_h = Moments::of(&ens.column_of(horizon, s)?);
            let at_half = Moments::of(&ens.column_of(half, s)?);
            let quad = match spec.law() {
                Some(law) if law.group().kind.lattice_dim().is_some() && law.diagnose().is_transient() => {
                    Some(law)
                }
                _ => None,
            };
            let (tail, method) = match quad {
                Some(law) if monotone_tail_is_zero(law, g, horizon) => (0.0, TailMethod::Exact),
                Some(law) => {
                    let t = analytic::green_tail(law, g, horizon, &settings)?;
                    ((t.value + t.error).max(0.0), TailMethod::Quadrature)
                }
                // first visits in (H/2, H] continued with an n^{-1/2} tail
                None => (
                    ((at_half.mean - at_h.mean).max(0.0)) / (2f64.sqrt() - 1.0),
                    TailMethod::Heuristic,
                ),
            };
            Ok(EscapeEstimate {
                target: g.clone(),
                horizon,
                estimate: at_h.mean,
                stderr: at_h.stderr,
                tail,
                tail_method: method,
                low: (at_h.mean - tail).max(0.0),
                high: at_h.mean,
                reps: at_h.count,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    FolnerConsistent,
    NotFolner,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::FolnerConsistent => "folner-consistent",
            Verdict::NotFolner => "not-folner",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Classifies a ratio sequence `(n, mean ratio)`.
///
/// Folner-consistent: the top ratio is below half the median one with a
/// negative log-log slope, or the ratio decays at least like `log(n)^-1/2`
/// (slope of log ratio against log log n at most -1/2). Not-Folner: the
/// last three ratios are within 20% of each other, above 0.02, and the
/// log-log-log slope is above -1/4.
pub fn classify(series: &[(u64, f64)]) -> Verdict {
    if series.len() < 3 {
        return Verdict::Inconclusive;
    }
    let top = series[series.len() - 1].1;
    if series.iter().all(|p| p.1 == 0.0) {
        return Verdict::FolnerConsistent;
    }
    let positive: Vec<(f64, f64)> = series
        .iter()
        .filter(|p| p.1 > 0.0 && p.0 > 1)
        .map(|&(n, r)| ((n as f64).ln(), r.ln()))
        .collect();
    if positive.len() < 3 {
        return Verdict::Inconclusive;
    }
    let x: Vec<f64> = positive.iter().map(|p| p.0).collect();
    let y: Vec<f64> = positive.iter().map(|p| p.1).collect();
    let slope = least_squares(&x, &y).slope;
    let xl: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let slope_ll = least_squares(&xl, &y).slope;
    let mut sorted: Vec<f64> = series.iter().map(|p| p.1).collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted[sorted.len() / 2];
    if (top < 0.5 * median && slope < 0.0) || slope_ll <= -0.5 {
        return Verdict::FolnerConsistent;
    }
    let last: Vec<f64> = series[series.len() - 3..].iter().map(|p| p.1).collect();
    let lo = last.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = last.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo > 0.02 && hi <= 1.2 * lo && slope_ll > -0.25 {
        return Verdict::NotFolner;
    }
    Verdict::Inconclusive
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathA {
    pub horizon: u64,
    /// `Phi(g)` and `Phi(g^-1)`.
    pub phi: (f64, f64),
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FolnerEstimate {
    pub probe: GroupElement,
    /// `(n, mean ratio, stderr)` per checkpoint.
    pub ratios: Vec<(u64, f64, f64)>,
    pub path_b: (f64, f64),
    pub path_a: Option<PathA>,
    pub verdict: Verdict,
    /// Whether both paths agree within 1.96 combined standard errors.
    pub agree: Option<bool>,
}

// Phi(g) = P(S^- avoids g) P(S avoids g | S avoids id), with a delta-method
// standard error; all indicators come from the same trajectories.
fn phi(ens: &Ensemble, h: u64, g: &GroupElement) -> Result<(f64, f64)> {
    let id = ens.plan.spec.group().identity();
    let back = ens.column_of(h, &Statistic::BackEscape(g.clone()))?;
    let both = ens.column_of(h, &Statistic::Avoid(g.clone()))?;
    let ret = ens.column_of(h, &Statistic::Escape(id))?;
    let mb = Moments::of(&back);
    let a = Moments::of(&both).mean;
    let q = Moments::of(&ret).mean;
    if q == 0.0 {
        return Err(Error::Numerical("no trajectory avoided the identity".into()));
    }
    let r = a / q;
    let z: Vec<f64> = both.iter().zip(&ret).map(|(a, b)| (a - r * b) / q).collect();
    let vr = Moments::of(&z).stderr.powi(2);
    let value = mb.mean * r;
    let var = r * r * mb.stderr.powi(2) + mb.mean * mb.mean * vr;
    Ok((value, var.sqrt()))
}

pub struct FolnerRequest<'a> {
    pub spec: &'a CocycleSpec,
    pub probe: GroupElement,
    pub checkpoints: Vec<u64>,
    pub reps: u64,
    /// Horizon and replications for path A (transient walks only).
    pub path_a: Option<(u64, u64)>,
    pub seed: u64,
    pub threads: Option<usize>,
}

/// Limit of `|R_n ^ R_n g| / |R_n|`: path B tracks the ratio directly, path
/// A evaluates `Phi(g) + Phi(g^-1)` from escape frequencies.
pub fn folner_limit(req: &FolnerRequest) -> Result<FolnerEstimate> {
    let stat = Statistic::Folner(req.probe.clone());
    let plan = ExperimentPlan::new(req.spec.clone(), vec![stat.clone()], req.checkpoints.clone(), req.reps, req.seed)?
        .named("folner")
        .with_threads(req.threads);
    let ens = simulate(&plan)?;
    let ratios: Vec<(u64, f64, f64)> = ens
        .moments(&stat)?
        .into_iter()
        .map(|(n, m)| (n, m.mean, m.stderr))
        .collect();
    let top = *ratios.last().unwrap();
    let verdict = classify(&ratios.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>());
    let transient = req.spec.law().is_some_and(|l| l.diagnose().is_transient());
    let path_a = match (req.path_a, transient) {
        (Some((h, reps)), true) => {
            let g = req.probe.clone();
            let gi = inverse(&g);
            let id = req.spec.group().identity();
            let stats = vec![
                Statistic::Escape(id),
                Statistic::Avoid(g.clone()),
                Statistic::Avoid(gi.clone()),
                Statistic::BackEscape(g.clone()),
                Statistic::BackEscape(gi.clone()),
            ];
            let plan = ExperimentPlan::new(req.spec.clone(), stats, vec![h], reps, req.seed ^ 0x5151)?
                .named("folner-path-a")
                .with_threads(req.threads);
            let ens = simulate(&plan)?;
            let (p, sp) = phi(&ens, h, &g)?;
            let (pi, spi) = if gi == g { (p, sp) } else { phi(&ens, h, &gi)? };
            // both terms come from the same trajectories; add errors linearly
            Some(PathA {
                horizon: h,
                phi: (p, pi),
                value: p + pi,
                stderr: sp + spi,
            })
        }
        _ => None,
    };
    let agree = path_a
        .as_ref()
        .map(|a| (a.value - top.1).abs() <= 1.96 * (a.stderr.powi(2) + top.2.powi(2)).sqrt());
    Ok(FolnerEstimate {
        probe: req.probe.clone(),
        ratios,
        path_b: (top.1, top.2),
        path_a,
        verdict,
        agree,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConstant {
    pub value: f64,
    pub stderr: f64,
    /// `(n, mean |dR_n| log^2(n) / n)`.
    pub series: Vec<(u64, f64)>,
    /// Largest relative deviation from the top value over the last three
    /// checkpoints.
    pub drift: f64,
    /// `C_v` per test element at the top checkpoint.
    pub per_direction: Vec<(GroupElement, f64)>,
}

pub fn require_log_regime(spec: &CocycleSpec) -> Result<()> {
    let law = spec
        .law()
        .ok_or_else(|| Error::Unsupported("boundary constants need a random walk".into()))?;
    let dim = law
        .group()
        .kind
        .lattice_dim()
        .ok_or_else(|| Error::Unsupported(format!("boundary constants on {}", law.group().kind)))?;
    let d = law.diagnose();
    if d.is_transient() {
        return Err(Error::Transient(
            "the n/log^2 n boundary regime needs a recurrent walk".into(),
        ));
    }
    if !d.has_log_return_regime(dim) {
        return Err(Error::Domain(
            "needs a centered planar walk with nonsingular covariance or a Cauchy-domain walk on Z".into(),
        ));
    }
    Ok(())
}

/// `C = lim |dR_n| log^2(n) / n` from an ensemble tracking `boundary` (and
/// `vboundary:<v>` for the per-direction constants).
pub fn boundary_constant(ens: &Ensemble) -> Result<BoundaryConstant> {
    require_log_regime(&ens.plan.spec)?;
    let norm = |n: u64| (n as f64).ln().powi(2) / n as f64;
    let m = ens.moments(&Statistic::Boundary)?;
    let series: Vec<(u64, f64)> = m.iter().map(|(n, m)| (*n, m.mean * norm(*n))).collect();
    let (n_top, top) = *m.last().unwrap();
    let value = top.mean * norm(n_top);
    let drift = series[series.len().saturating_sub(3)..]
        .iter()
        .map(|(_, c)| ((c - value) / value).abs())
        .fold(0.0, f64::max);
    let per_direction = ens
        .plan
        .statistics
        .iter()
        .filter_map(|s| match s {
            Statistic::VBoundary(v) => ens
                .moments(s)
                .ok()
                .map(|m| (v.clone(), m.last().unwrap().1.mean * norm(n_top))),
            _ => None,
        })
        .collect();
    Ok(BoundaryConstant {
        value,
        stderr: top.stderr * norm(n_top),
        series,
        drift,
        per_direction,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub index: f64,
    /// Regression standard error combined with the shift of the index when
    /// refitting on the upper half of the points.
    pub uncertainty: f64,
    pub regression_stderr: f64,
    pub intercept: f64,
    pub residual: f64,
    pub n_range: (u64, u64),
    /// Index refitted on the upper half of the points.
    pub upper_half_index: f64,
}

/// Slope of `log value` against `log n`.
pub fn regular_variation_fit(series: &[(u64, f64)]) -> Result<FitResult> {
    if series.len() < 5 {
        return Err(Error::Usage(format!(
            "a regular-variation fit needs at least 5 points, got {}",
            series.len()
        )));
    }
    if let Some(p) = series.iter().find(|p| !(p.1 > 0.0) || p.0 == 0) {
        return Err(Error::Domain(format!("nonpositive value {} at n = {}", p.1, p.0)));
    }
    let x: Vec<f64> = series.iter().map(|p| (p.0 as f64).ln()).collect();
    let y: Vec<f64> = series.iter().map(|p| p.1.ln()).collect();
    let line = least_squares(&x, &y);
    let h = x.len() / 2;
    let upper = least_squares(&x[h..], &y[h..]);
    Ok(FitResult {
        index: line.slope,
        uncertainty: line.slope_stderr.hypot(upper.slope - line.slope),
        regression_stderr: line.slope_stderr,
        intercept: line.intercept,
        residual: line.residual,
        n_range: (series[0].0, series[series.len() - 1].0),
        upper_half_index: upper.slope,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceScan {
    /// `(n, Var |dR_n|, Var log^5(n) / (n^2 log log n))`.
    pub points: Vec<(u64, f64, f64)>,
    pub last: f64,
    pub median: f64,
    pub bounded: bool,
    /// `(n, frequency of ||dR_n| - mean| > eps mean, Chebyshev bound)`.
    pub chebyshev: Vec<(u64, f64, f64)>,
}

pub const MIN_VARIANCE_REPS: u64 = 200;

/// Normalized variance of `|dR_n|` over checkpoints in `[n_lo, n_hi]`.
pub fn variance_scan(ens: &Ensemble, n_lo: u64, n_hi: u64, eps: f64) -> Result<VarianceScan> {
    if ens.plan.reps < MIN_VARIANCE_REPS {
        return Err(Error::Usage(format!(
            "variance scans need at least {MIN_VARIANCE_REPS} replications"
        )));
    }
    require_log_regime(&ens.plan.spec)?;
    let j = ens
        .stat_index(&Statistic::Boundary)
        .ok_or_else(|| Error::Usage("variance scans need the boundary statistic".into()))?;
    let mut points = Vec::new();
    let mut chebyshev = Vec::new();
    for (i, &n) in ens.checkpoints.iter().enumerate() {
        if n < 16 || n < n_lo || n > n_hi {
            continue;
        }
        let col = ens.column(i, j);
        let m = Moments::of(&col);
        let l = (n as f64).ln();
        points.push((n, m.variance, m.variance * l.powi(5) / ((n as f64).powi(2) * l.ln())));
        let far = col.iter().filter(|x| (*x - m.mean).abs() > eps * m.mean).count();
        chebyshev.push((
            n,
            far as f64 / col.len() as f64,
            m.variance / (eps * eps * m.mean * m.mean),
        ));
    }
    if points.len() < 3 {
        return Err(Error::Usage("variance scans need at least 3 checkpoints in range".into()));
    }
    let mut norm: Vec<f64> = points.iter().map(|p| p.2).collect();
    let last = *norm.last().unwrap();
    norm.sort_by(|a, b| a.total_cmp(b));
    let median = norm[norm.len() / 2];
    Ok(VarianceScan {
        points,
        last,
        median,
        bounded: last <= 2.0 * median,
        chebyshev,
    })
}

/// `1/G(0)` with its error, the limit of `|R_n|/n` for a transient lattice
/// walk.
pub fn range_rate_oracle(law: &StepLaw) -> Result<AnalyticResult> {
    let g = analytic::green(law, &law.group().identity(), &QuadratureSettings::default())?;
    Ok(AnalyticResult {
        value: 1.0 / g.value,
        error: g.error / (g.value * g.value),
        method: Method::Quadrature,
    })
}

pub use crate::taboo::{taboo_decay_check, TabooDecay};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::StepLaw;

    fn z(c: &[i64]) -> GroupElement {
        GroupElement::zd(c)
    }

    fn walk(law: StepLaw) -> CocycleSpec {
        CocycleSpec::Bernoulli(law)
    }

    #[test]
    fn checkpoint_schedule() {
        assert_eq!(geometric_checkpoints(1000, 1.5, 4000), vec![1000, 1500, 2250, 3375, 4000]);
        assert_eq!(default_checkpoints(500), vec![500]);
    }

    #[test]
    fn deterministic_folner_ratio() {
        let spec = walk(StepLaw::deterministic(z(&[1])));
        let plan = ExperimentPlan::new(spec, vec![Statistic::Folner(z(&[1]))], vec![10_000], 3, 1).unwrap();
        let r = run_experiment(&plan).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].mean, 2.0 / 10_000.0);
        assert_eq!(r.rows[0].variance, 0.0);
    }

    #[test]
    fn statistic_tokens_round_trip() {
        let g = GroupDescriptor::lattice(2);
        for t in ["range", "size", "boundary", "bratio", "vboundary:1,0", "folner:0,-1", "escape:0,0", "avoid:1,0", "backescape:2,1"] {
            let s = Statistic::parse(t, g).unwrap();
            assert_eq!(s.to_string(), t);
        }
        assert!(Statistic::parse("range:1", g).is_err());
        assert!(Statistic::parse("folner", g).is_err());
        assert!(Statistic::parse("nope", g).is_err());
    }

    #[test]
    fn reports_do_not_depend_on_workers() {
        let spec = walk(StepLaw::simple(GroupDescriptor::lattice(2)));
        let stats = vec![Statistic::Range, Statistic::Boundary, Statistic::Escape(z(&[1, 0]))];
        let plan = ExperimentPlan::new(spec, stats, vec![100, 500], 40, 9).unwrap();
        let a = run_experiment(&plan.clone().with_threads(Some(1))).unwrap();
        let b = run_experiment(&plan.with_threads(Some(3))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn escape_stops_early_but_matches_full_run() {
        let spec = walk(StepLaw::simple(GroupDescriptor::lattice(1)));
        let e = Statistic::Escape(z(&[2]));
        let quick = ExperimentPlan::new(spec.clone(), vec![e.clone()], vec![50, 400], 200, 3).unwrap();
        let full = ExperimentPlan::new(spec, vec![e.clone(), Statistic::Size], vec![50, 400], 200, 3).unwrap();
        let a = simulate(&quick).unwrap();
        let b = simulate(&full).unwrap();
        assert_eq!(a.column_of(400, &e).unwrap(), b.column_of(400, &e).unwrap());
    }

    #[test]
    fn memory_cap_records_failures() {
        let spec = walk(StepLaw::deterministic(z(&[1])));
        let plan = ExperimentPlan::new(spec, vec![Statistic::Size], vec![100], 2, 1)
            .unwrap()
            .with_memory_cap(50);
        let r = run_experiment(&plan).unwrap();
        assert_eq!(r.failures.len(), 2);
        assert_eq!(r.rows[0].reps, 0);
    }

    #[test]
    fn deterministic_escape_bracket() {
        let spec = walk(StepLaw::deterministic(z(&[1])));
        let e = escape_probability(&spec, &[z(&[-1]), z(&[3])], 1000, 10, 1, None).unwrap();
        assert_eq!((e[0].low, e[0].high), (1.0, 1.0));
        assert_eq!(e[0].tail_method, TailMethod::Exact);
        assert_eq!((e[1].low, e[1].high), (0.0, 0.0));
    }

    #[test]
    fn verdict_rules() {
        let det: Vec<(u64, f64)> = [1000u64, 2000, 4000, 8000].iter().map(|&n| (n, 2.0 / n as f64)).collect();
        assert_eq!(classify(&det), Verdict::FolnerConsistent);
        let flat: Vec<(u64, f64)> = [1000u64, 2000, 4000, 8000].iter().map(|&n| (n, 0.3 + 1.0 / n as f64)).collect();
        assert_eq!(classify(&flat), Verdict::NotFolner);
        let logdecay: Vec<(u64, f64)> = (0..9).map(|k| {
            let n = 10_000u64 * 2u64.pow(k);
            (n, 4.0 / (n as f64).ln())
        }).collect();
        assert_eq!(classify(&logdecay), Verdict::FolnerConsistent);
    }

    #[test]
    fn power_law_fit() {
        let s: Vec<(u64, f64)> = (0..8).map(|k| {
            let n = 1000u64 * 3u64.pow(k);
            (n, (n as f64).powf(-1.0 / 3.0))
        }).collect();
        let f = regular_variation_fit(&s).unwrap();
        assert!((f.index + 1.0 / 3.0).abs() < 1e-9);
        assert!(regular_variation_fit(&s[..4]).is_err());
        let mut bad = s.clone();
        bad[2].1 = 0.0;
        assert!(matches!(regular_variation_fit(&bad), Err(Error::Domain(_))));
    }

    #[test]
    fn deterministic_variance_is_zero() {
        let spec = walk(StepLaw::deterministic(z(&[1])));
        let plan = ExperimentPlan::new(spec, vec![Statistic::Boundary], vec![100, 1000], 5, 1).unwrap();
        let r = run_experiment(&plan).unwrap();
        assert!(r.rows.iter().all(|row| row.variance == 0.0 && row.mean == 2.0));
    }

    #[test]
    fn transient_walks_have_no_boundary_constant() {
        let spec = walk(StepLaw::simple(GroupDescriptor::lattice(3)));
        assert!(matches!(require_log_regime(&spec), Err(Error::Transient(_))));
    }
}
