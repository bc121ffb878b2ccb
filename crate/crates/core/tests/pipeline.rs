use equal_core::metrics::energy_histogram;
use equal_core::mitigate::RunOptions;
use equal_core::topology::random_chimera_instance;
use equal_core::{
    cast_maxcut, chimera_graph, estimate_ground, exact_ground, prepare, program, run_scheme,
    sample, sk_maxcut_graph, ChimeraSpec, DeviceModel, Effort, Graph, Scheme,
};

fn c2(seed: u64) -> equal_core::IsingModel {
    random_chimera_instance(ChimeraSpec::new(2).unwrap(), seed).unwrap()
}

#[test]
fn benchmark_sizes() {
    let g = chimera_graph(ChimeraSpec::new(2).unwrap()).unwrap();
    assert_eq!((g.node_count(), g.edges().len()), (32, 80));
    let m = c2(7);
    assert_eq!((m.n(), m.num_couplers()), (32, 80));
    let sk = cast_maxcut(&sk_maxcut_graph(17, 1).unwrap());
    assert_eq!(sk.num_couplers(), 136);
}

#[test]
fn triangle_maxcut_ground() {
    let g = Graph::new(3, vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
    let gt = exact_ground(&cast_maxcut(&g)).unwrap();
    assert_eq!(gt.energy, -2.0);
    assert!(gt.certified);
}

#[test]
fn noiseless_baseline_reaches_the_certified_ground() {
    let m = random_chimera_instance(ChimeraSpec::new(1).unwrap(), 3).unwrap();
    let d = DeviceModel::noiseless(16, 200, (0.1, 10.0));
    let run = run_scheme(Scheme::Baseline, &m, &d, 1, 500, 0, RunOptions::default()).unwrap();
    let gt = exact_ground(&m).unwrap();
    assert!((run.result.best.1 - gt.energy).abs() < 1e-9);
}

#[test]
fn estimate_agrees_with_enumeration_on_c2_slices() {
    // A 24-qubit instance is still enumerable; the estimate must not beat it.
    let g = chimera_graph(ChimeraSpec::new(2).unwrap())
        .unwrap()
        .without_nodes(&[0, 9, 18, 27, 4, 13, 22, 31])
        .unwrap();
    let m = equal_core::topology::random_instance(&g, 5, false);
    let exact = exact_ground(&m).unwrap();
    let est = estimate_ground(&m, Effort::default(), 1).unwrap();
    assert!(est.energy >= exact.energy - 1e-9);
    assert!((est.energy - exact.energy).abs() < 1e-9);
}

#[test]
fn biased_device_reprograms_identically() {
    let m = c2(4);
    let d = DeviceModel::default();
    let q = prepare(&m, d.bits, d.ranges).unwrap();
    let a = program(&d, &q).unwrap();
    let b = program(&d, &q).unwrap();
    assert_eq!(a.corrupted, b.corrupted);
    let s1 = sample(&a, 300, 11, &m).unwrap();
    let s2 = sample(&b, 300, 11, &m).unwrap();
    assert_eq!(s1, s2);
}

#[test]
fn equal_histogram_sits_closer_to_the_ground() {
    // Instance 8 is one where the default device's bias keeps the baseline
    // away from the true optimum.
    let m = c2(8);
    let d = DeviceModel::default();
    let gt = estimate_ground(&m, Effort::default(), 0).unwrap();
    let dist = |scheme: Scheme, members: usize| {
        let run = run_scheme(scheme, &m, &d, members, 5000, 1, RunOptions::default()).unwrap();
        let hist = energy_histogram(&run.merged_samples(), 20).unwrap();
        let total: u64 = hist.iter().map(|b| b.count).sum();
        assert_eq!(total, 5000);
        let lowest = hist.iter().find(|b| b.count > 0).unwrap().lower;
        (lowest - gt.energy).abs()
    };
    let d_base = dist(Scheme::Baseline, 1);
    let d_equal = dist(Scheme::Equal, 10);
    assert!(d_base > 0.0);
    assert!(d_equal <= d_base, "{d_equal} > {d_base}");
}

#[test]
fn equal_never_loses_to_member_zero_on_a_biased_device() {
    let d = DeviceModel { sweeps: 50, ..DeviceModel::default() };
    for seed in 0..5 {
        let m = c2(seed);
        for scheme in [Scheme::Equal, Scheme::EqualPlus] {
            let run = run_scheme(scheme, &m, &d, 5, 1000, seed, RunOptions::default()).unwrap();
            assert!(run.result.best.1 <= run.result.per_member_best[0].1);
        }
    }
}
