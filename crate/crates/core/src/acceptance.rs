//! The acceptance suite: twelve end-to-end checks of the engine against
//! analytic oracles and the qualitative laws it is meant to exhibit.
//!
//! `Tier::Full` runs every check at its nominal size; `Tier::Quick` shrinks
//! walk lengths and ensembles so the whole suite takes well under a minute.

use std::fmt;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analytic::green;
use crate::cocycle::{parse_base, CocycleSpec};
use crate::error::{Error, Result};
use crate::estimators::{
    boundary_constant, classify, default_checkpoints, escape_probability, folner_limit,
    range_rate_oracle, regular_variation_fit, run_experiment, simulate, variance_scan, Ensemble,
    ExperimentPlan, FolnerRequest, Statistic, Verdict, DEFAULT_SEED,
};
use crate::group::{inverse, multiply, GroupDescriptor, GroupElement, GroupKind};
use crate::law::StepLaw;
use crate::quadrature::QuadratureSettings;
use crate::range::{compare_with_brute_force, BoundarySpec};
use crate::sites::{FreeTreeSpace, HeisenbergSpace, LatticeSpace};
use crate::stats::Moments;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Tier {
    Quick,
    Full,
}

impl Tier {
    fn pick<T>(self, full: T, quick: T) -> T {
        match self {
            Tier::Full => full,
            Tier::Quick => quick,
        }
    }

    fn slot(self) -> usize {
        self.pick(0, 1)
    }
}

impl std::str::FromStr for Tier {
    type Err = Error;
    fn from_str(s: &str) -> Result<Tier> {
        match s {
            "quick" => Ok(Tier::Quick),
            "full" => Ok(Tier::Full),
            _ => Err(Error::Usage(format!("--tier must be quick or full, got `{s}`"))),
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.pick("full", "quick"))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:>2} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured
        )
    }
}

pub const CRITERIA: [(u8, &str); 12] = [
    (1, "transient range rate"),
    (2, "green/escape identity"),
    (3, "planar boundary constant bracket"),
    (4, "rotation cocycle range rate"),
    (5, "folner dichotomy on Z"),
    (6, "free group not folner"),
    (7, "planar folner decay"),
    (8, "zeta no-return index"),
    (9, "zeta folner decay"),
    (10, "planar boundary variance"),
    (11, "green decay at infinity"),
    (12, "engine correctness"),
];

pub fn run_all(tier: Tier, threads: Option<usize>) -> Vec<Check> {
    CRITERIA.iter().map(|&(id, _)| run(id, tier, threads)).collect()
}

/// Runs one check; errors count as failures with the error as measurement.
pub fn run(id: u8, tier: Tier, threads: Option<usize>) -> Check {
    let name = CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map(|c| c.1)
        .unwrap_or("unknown");
    let outcome = match id {
        1 => range_rate(tier, threads),
        2 => green_escape(tier, threads),
        3 => planar_constant(tier, threads),
        4 => rotation(tier, threads),
        5 => dichotomy(tier, threads),
        6 => free_group(tier, threads),
        7 => planar_folner(tier, threads),
        8 => zeta_index(tier, threads),
        9 => zeta_folner(tier, threads),
        10 => planar_variance(tier, threads),
        11 => green_decay(),
        12 => engine(tier),
        _ => Err(Error::Usage(format!("no acceptance criterion {id}"))),
    };
    let (passed, measured) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    Check {
        id,
        name,
        passed,
        measured,
    }
}

type Outcome = Result<(bool, String)>;

fn srw(d: usize) -> CocycleSpec {
    CocycleSpec::Bernoulli(StepLaw::simple(GroupDescriptor::lattice(d)))
}

fn zeta() -> Result<CocycleSpec> {
    Ok(CocycleSpec::Bernoulli(StepLaw::zeta(1.5)?))
}

fn z(c: &[i64]) -> GroupElement {
    GroupElement::zd(c)
}

fn range_rate(tier: Tier, threads: Option<usize>) -> Outcome {
    let n = tier.pick(1_000_000, 100_000);
    let reps = tier.pick(100, 20);
    let plan = ExperimentPlan::new(srw(3), vec![Statistic::Range], vec![n], reps, DEFAULT_SEED)?
        .named("accept-range")
        .with_threads(threads);
    let r = run_experiment(&plan)?;
    let oracle = match &plan.spec {
        CocycleSpec::Bernoulli(law) => range_rate_oracle(law)?.value,
        _ => unreachable!(),
    };
    let m = &r.rows[0];
    Ok((
        (m.mean - oracle).abs() <= 0.005 && r.failures.is_empty(),
        format!(
            "mean |R_n|/n = {:.5} +- {:.5} at n = {n}, 1/G(0) = {oracle:.5}",
            m.mean, m.stderr
        ),
    ))
}

fn green_escape(tier: Tier, threads: Option<usize>) -> Outcome {
    let h = tier.pick(100_000, 20_000);
    let reps = tier.pick(20_000, 4_000);
    let spec = srw(3);
    let (id, e1) = (z(&[0, 0, 0]), z(&[1, 0, 0]));
    let q = escape_probability(&spec, &[id.clone(), e1.clone()], h, reps, DEFAULT_SEED, threads)?;
    let (qi, qe) = (&q[0], &q[1]);
    let law = spec.law().unwrap();
    let s = QuadratureSettings::default();
    let (g0, g1) = (green(law, &id, &s)?, green(law, &e1, &s)?);

    // predicted G(id) = 1/q(id) over the bracket, widened by CI and 1%
    let se0 = 1.96 * qi.stderr / (qi.estimate * qi.estimate);
    let lo0 = 1.0 / qi.high - se0 - 0.01 * g0.value - g0.error;
    let hi0 = 1.0 / qi.low + se0 + 0.01 * g0.value + g0.error;
    let ok0 = (lo0..=hi0).contains(&g0.value);

    // predicted G(e1) = (1 - q(e1)) / q(id)
    let qm = qi.estimate;
    let se1 = 1.96
        * ((qe.stderr / qm).powi(2) + ((1.0 - qe.estimate) * qi.stderr / (qm * qm)).powi(2)).sqrt();
    let lo1 = (1.0 - qe.high) / qi.high - se1 - 0.01 * g1.value - g1.error;
    let hi1 = (1.0 - qe.low) / qi.low + se1 + 0.01 * g1.value + g1.error;
    let ok1 = (lo1..=hi1).contains(&g1.value);
    Ok((
        ok0 && ok1,
        format!(
            "G(id) = {:.5} in [{lo0:.5}, {hi0:.5}], G(e1) = {:.5} in [{lo1:.5}, {hi1:.5}] (q(id) in [{:.4}, {:.4}], q(e1) in [{:.4}, {:.4}], H = {h})",
            g0.value, g1.value, qi.low, qi.high, qe.low, qe.high
        ),
    ))
}

// Shared planar run behind the boundary constant, folner decay and variance
// checks.
fn planar(tier: Tier, threads: Option<usize>) -> Result<&'static Ensemble> {
    static CACHE: [OnceLock<Result<Ensemble>>; 2] = [OnceLock::new(), OnceLock::new()];
    CACHE[tier.slot()]
        .get_or_init(|| {
            let g = GroupDescriptor::lattice(2);
            let mut stats = vec![Statistic::Boundary, Statistic::Folner(z(&[1, 0]))];
            stats.extend(g.generators().into_iter().map(Statistic::VBoundary));
            let n = tier.pick(1_000_000, 100_000);
            let plan = ExperimentPlan::new(
                srw(2),
                stats,
                default_checkpoints(n),
                tier.pick(500, 200),
                DEFAULT_SEED,
            )?
            .named("accept-planar")
            .with_threads(threads);
            simulate(&plan)
        })
        .as_ref()
        .map_err(Clone::clone)
}

fn planar_constant(tier: Tier, threads: Option<usize>) -> Outcome {
    let ens = planar(tier, threads)?.truncated(tier.pick(200, 100));
    let c = boundary_constant(&ens)?;
    let (lo, hi) = (std::f64::consts::PI.powi(2) / 2.0, 2.0 * std::f64::consts::PI.powi(2));
    let sandwich = c.per_direction.iter().all(|(_, cv)| *cv <= c.value)
        && c.per_direction.iter().map(|p| p.1).sum::<f64>() >= c.value;
    Ok((
        (lo..=hi).contains(&c.value) && c.drift < 0.1 && sandwich,
        format!(
            "C = {:.3} +- {:.3} in [{lo:.2}, {hi:.2}], drift over last three checkpoints {:.2}%, {} reps",
            c.value,
            c.stderr,
            100.0 * c.drift,
            ens.plan.reps
        ),
    ))
}

fn rotation(tier: Tier, threads: Option<usize>) -> Outcome {
    let n = tier.pick(1_000_000, 100_000);
    let spec = parse_base("rotation:golden:0.5:0", GroupDescriptor::lattice(1), None, n)?;
    let plan = ExperimentPlan::new(spec, vec![Statistic::Range], vec![n], 10, DEFAULT_SEED)?
        .named("accept-rotation")
        .with_threads(threads);
    let ens = simulate(&plan)?;
    let col = ens.column_of(n, &Statistic::Range)?;
    let m = Moments::of(&col);
    let worst = col.iter().map(|x| (x - 0.5).abs()).fold(0.0, f64::max);
    Ok((
        (m.mean - 0.5).abs() <= 1e-3,
        format!(
            "mean |R_n|/n = {:.6} at n = {n}, worst of {} starting points off by {worst:.2e}",
            m.mean, m.count
        ),
    ))
}

fn dichotomy(tier: Tier, threads: Option<usize>) -> Outcome {
    let n = tier.pick(100_000, 20_000);
    let det = CocycleSpec::Bernoulli(StepLaw::deterministic(z(&[1])));
    let a = folner_limit(&FolnerRequest {
        spec: &det,
        probe: z(&[1]),
        checkpoints: default_checkpoints(n),
        reps: 3,
        path_a: None,
        seed: DEFAULT_SEED,
        threads,
    })?;
    let exact = a.ratios.iter().all(|&(n, r, _)| r == 2.0 / n as f64);
    let g = GroupDescriptor::lattice(1);
    let skew = CocycleSpec::Bernoulli(StepLaw::finite(g, vec![(z(&[2]), 0.5), (z(&[-1]), 0.5)])?);
    let b = folner_limit(&FolnerRequest {
        spec: &skew,
        probe: z(&[1]),
        checkpoints: default_checkpoints(n),
        reps: tier.pick(200, 50),
        path_a: Some((tier.pick(10_000, 2_000), tier.pick(20_000, 5_000))),
        seed: DEFAULT_SEED,
        threads,
    })?;
    let pa = b.path_a.as_ref().ok_or_else(|| Error::Numerical("path A did not run".into()))?;
    Ok((
        exact
            && a.verdict == Verdict::FolnerConsistent
            && b.verdict == Verdict::NotFolner
            && b.agree == Some(true),
        format!(
            "+1 law: ratio == 2/n at all {} checkpoints = {exact}, {}; {{2,-1}} law: path B {:.4} +- {:.4}, path A {:.4} +- {:.4}, {}",
            a.ratios.len(),
            a.verdict,
            b.path_b.0,
            b.path_b.1,
            pa.value,
            pa.stderr,
            b.verdict
        ),
    ))
}

fn free_group(tier: Tier, threads: Option<usize>) -> Outcome {
    let f2 = GroupDescriptor::new(GroupKind::Free2);
    let spec = CocycleSpec::Bernoulli(StepLaw::simple(f2));
    let a = GroupElement::word("a");
    let f = folner_limit(&FolnerRequest {
        spec: &spec,
        probe: a.clone(),
        checkpoints: default_checkpoints(tier.pick(100_000, 20_000)),
        reps: tier.pick(200, 50),
        path_a: None,
        seed: DEFAULT_SEED,
        threads,
    })?;
    let q = escape_probability(
        &spec,
        &[f2.identity(), a],
        1_000,
        20_000,
        DEFAULT_SEED,
        threads,
    )?;
    let near = |e: &crate::estimators::EscapeEstimate| {
        e.low - 0.01 <= 2.0 / 3.0 && 2.0 / 3.0 <= e.high + 0.01
    };
    Ok((
        f.verdict == Verdict::NotFolner && f.path_b.0 > 0.1 && near(&q[0]) && near(&q[1]),
        format!(
            "ratio {:.4} +- {:.4}, {}; q(id) in [{:.4}, {:.4}], q(a) in [{:.4}, {:.4}] (+- {:.4})",
            f.path_b.0, f.path_b.1, f.verdict, q[0].low, q[0].high, q[1].low, q[1].high, q[1].stderr
        ),
    ))
}

fn window(series: Vec<(u64, f64)>, lo: u64, hi: u64) -> Vec<(u64, f64)> {
    series.into_iter().filter(|p| p.0 >= lo && p.0 <= hi).collect()
}

fn planar_folner(tier: Tier, threads: Option<usize>) -> Outcome {
    let ens = planar(tier, threads)?;
    let series: Vec<(u64, f64)> = ens
        .moments(&Statistic::Folner(z(&[1, 0])))?
        .into_iter()
        .map(|(n, m)| (n, m.mean))
        .collect();
    let verdict = classify(&series);
    let top = series.last().unwrap().0;
    let scaled: Vec<f64> = window(series, tier.pick(10_000, 1_000), top)
        .into_iter()
        .map(|(n, r)| r * (n as f64).ln())
        .collect();
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((
        hi <= 3.0 * lo && verdict == Verdict::FolnerConsistent,
        format!("ratio * log n in [{lo:.3}, {hi:.3}] over {} checkpoints, {verdict}", scaled.len()),
    ))
}

fn zeta_index(tier: Tier, threads: Option<usize>) -> Outcome {
    let n = tier.pick(1_000_000, 100_000);
    let e = Statistic::Escape(z(&[0]));
    let plan = ExperimentPlan::new(zeta()?, vec![e.clone()], default_checkpoints(n), tier.pick(10_000, 4_000), DEFAULT_SEED)?
        .named("accept-zeta-escape")
        .with_threads(threads);
    let ens = simulate(&plan)?;
    let series = ens.moments(&e)?.into_iter().map(|(n, m)| (n, m.mean)).collect();
    let fit = regular_variation_fit(&window(series, 1_000, n))?;
    Ok((
        (fit.index + 1.0 / 3.0).abs() <= 0.05,
        format!(
            "index {:.4} +- {:.4} over n in [{}, {}] (upper half {:.4})",
            fit.index, fit.uncertainty, fit.n_range.0, fit.n_range.1, fit.upper_half_index
        ),
    ))
}

/// Lower threshold for `|R_n| / n^(1/alpha - 0.05)`.
pub const RANGE_FLOOR: f64 = 0.1;

fn zeta_folner(tier: Tier, threads: Option<usize>) -> Outcome {
    let n = tier.pick(1_000_000, 100_000);
    let gap = Statistic::VBoundary(z(&[-1]));
    let stats = vec![Statistic::BoundaryRatio, Statistic::Size, gap.clone()];
    let plan = ExperimentPlan::new(zeta()?, stats, default_checkpoints(n), tier.pick(500, 200), DEFAULT_SEED)?
        .named("accept-zeta-range")
        .with_threads(threads);
    let ens = simulate(&plan)?;
    let means = |s: &Statistic| -> Result<Vec<(u64, f64)>> {
        Ok(window(
            ens.moments(s)?.into_iter().map(|(n, m)| (n, m.mean)).collect(),
            1_000,
            n,
        ))
    };
    let alpha = 1.5;
    let ratio = regular_variation_fit(&means(&Statistic::BoundaryRatio)?)?;
    let gaps = regular_variation_fit(&means(&gap)?)?;
    let scale = (n as f64).powf(1.0 / alpha - 0.05);
    let sizes = ens.column_of(n, &Statistic::Size)?;
    let above = sizes.iter().filter(|&&s| s / scale > RANGE_FLOOR).count() as f64 / sizes.len() as f64;
    let (r_max, g_max) = (1.0 / alpha - 1.0 + 0.1, 2.0 / alpha - 1.0 + 0.1);
    Ok((
        ratio.index <= r_max && above >= 0.99 && gaps.index <= g_max,
        format!(
            "|dR|/|R| index {:.4} (<= {r_max:.4}); {:.1}% of trajectories have |R_n|/n^{:.4} > {RANGE_FLOOR}; |R \\ (R-1)| index {:.4} (<= {g_max:.4})",
            ratio.index,
            100.0 * above,
            1.0 / alpha - 0.05,
            gaps.index
        ),
    ))
}

fn planar_variance(tier: Tier, threads: Option<usize>) -> Outcome {
    let ens = planar(tier, threads)?;
    let top = *ens.checkpoints.last().unwrap();
    let v = variance_scan(ens, tier.pick(10_000, 1_000), top, 0.5)?;
    Ok((
        v.bounded,
        format!(
            "normalized variance last {:.4e}, median {:.4e} over {} checkpoints",
            v.last,
            v.median,
            v.points.len()
        ),
    ))
}

fn green_decay() -> Outcome {
    let law = StepLaw::simple(GroupDescriptor::lattice(3));
    let s = QuadratureSettings::default();
    let g = (1..=20)
        .map(|k| green(&law, &z(&[k, 0, 0]), &s))
        .collect::<Result<Vec<_>>>()?;
    let decreasing = g.windows(2).all(|w| w[0].value - w[1].value > w[0].error + w[1].error);
    let ratio = g[19].value / g[0].value;
    Ok((
        decreasing && ratio < 0.2,
        format!(
            "G(k e1) strictly decreasing for k = 1..20: {decreasing}; G(20 e1)/G(e1) = {ratio:.4}"
        ),
    ))
}

fn random_element(group: GroupDescriptor, rng: &mut ChaCha8Rng) -> Result<GroupElement> {
    let gens = group.generators();
    let mut x = group.identity();
    for _ in 0..rng.gen_range(0..12) {
        x = multiply(&x, &gens[rng.gen_range(0..gens.len())])?;
    }
    Ok(x)
}

fn engine(tier: Tier) -> Outcome {
    let trajectories = tier.pick(100, 20);
    let mut failures = Vec::new();
    for t in 0..trajectories {
        let d = 1 + (t % 3) as usize;
        let zd = GroupDescriptor::lattice(d);
        let mut probe = vec![0; d];
        probe[0] = 1;
        *probe.last_mut().unwrap() += 1;
        let spec = BoundarySpec::new(zd)
            .with_tests(zd.generators())
            .with_probes(vec![z(&probe)]);
        let cz = srw(d);
        let f2 = GroupDescriptor::new(GroupKind::Free2);
        let sf = BoundarySpec::new(f2)
            .with_tests(f2.generators())
            .with_probes(vec![GroupElement::word("a"), GroupElement::word("ab")]);
        let cf = CocycleSpec::Bernoulli(StepLaw::simple(f2));
        let h = GroupDescriptor::new(GroupKind::Heisenberg);
        let sh = BoundarySpec::new(h)
            .with_tests(h.generators())
            .with_probes(vec![GroupElement::heis(0, 0, 1), GroupElement::heis(1, 1, 0)]);
        let ch = CocycleSpec::Bernoulli(StepLaw::simple(h));
        let results = [
            compare_with_brute_force(LatticeSpace::new(d), &cz, &spec, DEFAULT_SEED, t, 1000, 100),
            compare_with_brute_force(FreeTreeSpace::new(), &cf, &sf, DEFAULT_SEED, t, 1000, 100),
            compare_with_brute_force(HeisenbergSpace, &ch, &sh, DEFAULT_SEED, t, 1000, 100),
        ];
        failures.extend(results.into_iter().filter_map(|r| r.err()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut axiom_failures = 0usize;
    let groups = [
        GroupDescriptor::lattice(1),
        GroupDescriptor::lattice(2),
        GroupDescriptor::lattice(3),
        GroupDescriptor::new(GroupKind::Free2),
        GroupDescriptor::new(GroupKind::Heisenberg),
    ];
    let triples = tier.pick(10_000, 2_000);
    for group in groups {
        let e = group.identity();
        for _ in 0..triples {
            let a = random_element(group, &mut rng)?;
            let b = random_element(group, &mut rng)?;
            let c = random_element(group, &mut rng)?;
            let assoc = multiply(&multiply(&a, &b)?, &c)? == multiply(&a, &multiply(&b, &c)?)?;
            let unit = multiply(&a, &e)? == a && multiply(&e, &a)? == a;
            let inv = multiply(&a, &inverse(&a))? == e && multiply(&inverse(&a), &a)? == e;
            if !(assoc && unit && inv) {
                axiom_failures += 1;
            }
        }
    }

    let stats = vec![
        Statistic::Range,
        Statistic::Boundary,
        Statistic::Folner(z(&[1, 0])),
        Statistic::Escape(z(&[1, 1])),
        Statistic::BackEscape(z(&[0, 1])),
    ];
    let plan = ExperimentPlan::new(srw(2), stats, vec![100, 1000, 5000], 64, DEFAULT_SEED)?;
    let one = run_experiment(&plan.clone().with_threads(Some(1)))?;
    let many = run_experiment(&plan.with_threads(Some(4)))?;
    let identical = one == many;

    Ok((
        failures.is_empty() && axiom_failures == 0 && identical,
        format!(
            "{} brute-force mismatches over {} trajectories x 3 groups, {axiom_failures} axiom failures over {} triples x {} groups, reports identical across worker counts: {identical}{}",
            failures.len(),
            trajectories,
            triples,
            groups.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    ))
}
