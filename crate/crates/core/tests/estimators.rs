use std::collections::HashSet;

use walkrange_core::cocycle::{CocycleSpec, WalkStream};
use walkrange_core::estimators::*;
use walkrange_core::law::StepLaw;
use walkrange_core::rng::Direction;
use walkrange_core::stats::{ks_distance, Moments};
use walkrange_core::{GroupDescriptor, GroupElement, GroupKind};

fn srw(group: GroupDescriptor) -> CocycleSpec {
    CocycleSpec::Bernoulli(StepLaw::simple(group))
}

fn z(c: &[i64]) -> GroupElement {
    GroupElement::zd(c)
}

#[test]
fn folner_paths_agree_on_transient_walks() {
    let cases = [
        (srw(GroupDescriptor::lattice(3)), z(&[1, 0, 0])),
        (srw(GroupDescriptor::new(GroupKind::Free2)), GroupElement::word("a")),
        (srw(GroupDescriptor::new(GroupKind::Heisenberg)), GroupElement::heis(1, 0, 0)),
        (srw(GroupDescriptor::new(GroupKind::Heisenberg)), GroupElement::heis(0, 0, 1)),
    ];
    for (spec, probe) in cases {
        let f = folner_limit(&FolnerRequest {
            spec: &spec,
            probe: probe.clone(),
            checkpoints: default_checkpoints(20_000),
            reps: 50,
            path_a: Some((5_000, 5_000)),
            seed: 11,
            threads: None,
        })
        .unwrap();
        let a = f.path_a.as_ref().unwrap();
        assert_eq!(f.agree, Some(true), "{probe}: B {:?} vs A {a:?}", f.path_b);
        assert_eq!(f.verdict, Verdict::NotFolner, "{probe}");
    }
}

#[test]
fn transient_range_rate_matches_escape() {
    let spec = srw(GroupDescriptor::lattice(3));
    let plan = ExperimentPlan::new(spec.clone(), vec![Statistic::Range], vec![100_000], 40, 5).unwrap();
    let r = run_experiment(&plan).unwrap();
    let q = escape_probability(&spec, &[z(&[0, 0, 0])], 20_000, 10_000, 6, None).unwrap();
    let m = &r.rows[0];
    let ci = 1.96 * (m.stderr.powi(2) + q[0].stderr.powi(2)).sqrt();
    assert!(m.mean >= q[0].low - ci && m.mean <= q[0].high + ci, "{m:?} vs {:?}", q[0]);
}

// Abelian walks: the backward walk has the law of the forward walk run with
// inverted steps, so for symmetric laws both give the same range statistics.
#[test]
fn time_reversal_on_the_lattice() {
    let spec = srw(GroupDescriptor::lattice(2));
    let n = 20;
    let reps = 40_000;
    let mut fwd = Vec::with_capacity(reps);
    let mut back = Vec::with_capacity(reps);
    for t in 0..reps as u64 {
        let mut w = WalkStream::new(&spec, 3, t);
        for (dir, out) in [(Direction::Forward, &mut fwd), (Direction::Backward, &mut back)] {
            let mut seen = HashSet::new();
            for _ in 0..n {
                seen.insert(w.advance(dir).unwrap().clone());
            }
            out.push(seen.len() as f64);
        }
    }
    let d = ks_distance(&fwd, &back);
    assert!(d < 0.02, "KS distance {d}");
}

#[test]
fn stderr_shrinks_with_replications() {
    let spec = srw(GroupDescriptor::lattice(2));
    let plan = ExperimentPlan::new(spec, vec![Statistic::Boundary], vec![2_000], 400, 8).unwrap();
    let ens = simulate(&plan).unwrap();
    let big = Moments::of(&ens.column_of(2_000, &Statistic::Boundary).unwrap());
    let small = Moments::of(&ens.truncated(100).column_of(2_000, &Statistic::Boundary).unwrap());
    let ratio = small.stderr / big.stderr;
    assert!((1.5..2.7).contains(&ratio), "{ratio}");
}

#[test]
fn nested_plans_share_trajectories() {
    let spec = srw(GroupDescriptor::lattice(1));
    let small = ExperimentPlan::new(spec.clone(), vec![Statistic::Size], vec![500], 10, 4).unwrap();
    let big = ExperimentPlan::new(spec, vec![Statistic::Size], vec![500], 30, 4).unwrap();
    let a = simulate(&small).unwrap();
    let b = simulate(&big).unwrap().truncated(10);
    assert_eq!(a.report().rows, b.report().rows);
}

#[test]
fn cauchy_boundary_constant_is_stable() {
    let spec = CocycleSpec::Bernoulli(StepLaw::cauchy());
    let plan = ExperimentPlan::new(
        spec,
        vec![Statistic::Boundary],
        geometric_checkpoints(100_000, 1.5, 1_000_000),
        60,
        2,
    )
    .unwrap();
    let c = boundary_constant(&simulate(&plan).unwrap()).unwrap();
    let first = c.series[0].1;
    assert!(((c.value - first) / c.value).abs() < 0.1, "{:?}", c.series);
    assert!(c.drift < 0.1);
}

#[test]
fn zeta_range_lower_bound_and_gap_moments() {
    for alpha in [1.3, 1.5, 1.8] {
        let n = 100_000;
        let spec = CocycleSpec::Bernoulli(StepLaw::zeta(alpha).unwrap());
        let gap = Statistic::VBoundary(z(&[-1]));
        let plan = ExperimentPlan::new(spec, vec![Statistic::Size, gap.clone()], default_checkpoints(n), 200, 3)
            .unwrap();
        let ens = simulate(&plan).unwrap();
        let scale = (n as f64).powf(1.0 / alpha - 0.05);
        let sizes = ens.column_of(n, &Statistic::Size).unwrap();
        let above = sizes.iter().filter(|&&s| s / scale > 0.1).count();
        assert!(above as f64 >= 0.99 * sizes.len() as f64, "alpha {alpha}");

        // k = 1 and k = 2 moments of |R \ (R - 1)| against M n^{k(2/alpha - 1 + 0.1)}
        let p = 2.0 / alpha - 1.0 + 0.1;
        for k in [1, 2] {
            let j = ens.stat_index(&gap).unwrap();
            let m: Vec<f64> = ens
                .checkpoints
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    let col = ens.column(i, j);
                    let moment = col.iter().map(|x| x.powi(k)).sum::<f64>() / col.len() as f64;
                    moment / (n as f64).powf(k as f64 * p)
                })
                .collect();
            let top3 = &m[m.len() - 3..];
            assert!(top3[2] <= 1.1 * top3[0], "alpha {alpha} k {k}: {m:?}");
        }
    }
}

#[test]
fn planar_chebyshev_and_variance() {
    let spec = srw(GroupDescriptor::lattice(2));
    let plan = ExperimentPlan::new(spec, vec![Statistic::Boundary], default_checkpoints(50_000), 200, 9).unwrap();
    let v = variance_scan(&simulate(&plan).unwrap(), 1_000, 50_000, 0.5).unwrap();
    assert!(v.bounded);
    for (n, freq, bound) in &v.chebyshev {
        assert!(freq <= bound, "n = {n}: {freq} > {bound}");
    }
    let few = ExperimentPlan::new(srw(GroupDescriptor::lattice(2)), vec![Statistic::Boundary], vec![100, 200, 400], 50, 1).unwrap();
    assert!(variance_scan(&simulate(&few).unwrap(), 16, 400, 0.5).is_err());
}

#[test]
fn fit_is_stable_on_the_upper_half() {
    let spec = CocycleSpec::Bernoulli(StepLaw::zeta(1.5).unwrap());
    let e = Statistic::Escape(z(&[0]));
    let plan = ExperimentPlan::new(spec, vec![e.clone()], default_checkpoints(100_000), 2_000, 4).unwrap();
    let series: Vec<(u64, f64)> = simulate(&plan)
        .unwrap()
        .moments(&e)
        .unwrap()
        .into_iter()
        .map(|(n, m)| (n, m.mean))
        .collect();
    let f = regular_variation_fit(&series).unwrap();
    assert!((f.upper_half_index - f.index).abs() < f.uncertainty);
    assert!((f.index + 1.0 / 3.0).abs() < 0.08, "{f:?}");
}

#[test]
fn escape_on_the_tree() {
    let f2 = GroupDescriptor::new(GroupKind::Free2);
    let q = escape_probability(&srw(f2), &[GroupElement::word("a"), GroupElement::word("ab")], 500, 8_000, 12, None)
        .unwrap();
    // hitting a vertex at distance k on the 4-regular tree has probability 3^-k
    assert!((q[0].estimate - 2.0 / 3.0).abs() < 0.02, "{:?}", q[0]);
    assert!((q[1].estimate - 8.0 / 9.0).abs() < 0.015, "{:?}", q[1]);
    assert_eq!(q[0].tail_method, TailMethod::Heuristic);
}

#[test]
fn quadrature_tail_brackets_a_far_target() {
    // Z^3 escape from a far target: the bracket must hold the quadrature value
    let spec = srw(GroupDescriptor::lattice(3));
    let g = z(&[2, 1, 0]);
    let q = escape_probability(&spec, &[g.clone()], 5_000, 5_000, 13, None).unwrap();
    assert_eq!(q[0].tail_method, TailMethod::Quadrature);
    assert!(q[0].tail > 0.0 && q[0].low < q[0].high);
    let law = StepLaw::simple(GroupDescriptor::lattice(3));
    let s = walkrange_core::quadrature::QuadratureSettings::default();
    let g0 = walkrange_core::analytic::green(&law, &z(&[0, 0, 0]), &s).unwrap().value;
    let gg = walkrange_core::analytic::green(&law, &g, &s).unwrap().value;
    let exact = 1.0 - gg / g0;
    let ci = 1.96 * q[0].stderr;
    assert!(q[0].low - ci <= exact && exact <= q[0].high + ci, "{exact} vs {:?}", q[0]);
}
