use std::path::Path;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use eit_sbp::conductivity::{blend, rasterize, Basis, Circle, CircleSample, ConductivityField};
use eit_sbp::excitation::{base_pattern, rotation_scheme, PatternKind, VoltagePattern};
use eit_sbp::export::export_histogram;
use eit_sbp::forward::{ElementDegree, ForwardSolver, ImpedanceSet};
use eit_sbp::measurement::{MeasurementHeader, MeasurementSet};
use eit_sbp::mesh::{build_disc_mesh, DomainSpec, Mesh};
use eit_sbp::objective::Evaluator;
use eit_sbp::optimizer::{coordinate_descent, is_feasible, line_search_scalar, pad_basis, restore_simplex, CdConfig};
use eit_sbp::sampling::{generate_collection, CollectionSpec};

const R: f64 = 0.1;

fn mesh() -> &'static Arc<Mesh> {
    static MESH: OnceLock<Arc<Mesh>> = OnceLock::new();
    MESH.get_or_init(|| Arc::new(build_disc_mesh(&DomainSpec::default(), 500).unwrap()))
}

fn circle() -> impl Strategy<Value = Circle> {
    (0.0..R, 0.0..std::f64::consts::TAU, 0.0..0.3 * R).prop_map(|(rho, t, r)| Circle::new(rho * t.cos(), rho * t.sin(), r))
}

fn sample() -> impl Strategy<Value = CircleSample> {
    prop::collection::vec(circle(), 1..6).prop_map(CircleSample::with_default_conductivity)
}

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01..1.0f64, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        let mut w: Vec<f64> = v.iter().map(|x| x / s).collect();
        let residue = 1.0 - w.iter().sum::<f64>();
        w[0] += residue;
        w
    })
}

fn basis() -> impl Strategy<Value = Basis> {
    (1usize..5)
        .prop_flat_map(|n| (prop::collection::vec(sample(), n), simplex(n)))
        .prop_map(|(samples, weights)| Basis::new(samples, weights).unwrap())
}

proptest! {
    #[test]
    fn restored_weights_stay_on_the_simplex(w in (2usize..12).prop_flat_map(simplex), i in 0usize..12, v in 0.0..=1.0f64) {
        let i = i % w.len();
        let out = restore_simplex(&w, i, v);
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(out.iter().all(|x| (0.0..=1.0).contains(x)));
        prop_assert!(Basis::new(vec![CircleSample::with_default_conductivity(vec![]); w.len()], out).is_ok());
    }

    #[test]
    fn rotated_patterns_are_grounded_shifts(m in 2usize..24, values in prop::collection::vec(-1.0..1.0f64, 24)) {
        let mut v = values[..m].to_vec();
        let mean = v.iter().sum::<f64>() / m as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let set = rotation_scheme(&VoltagePattern::new(v.clone()).unwrap());
        prop_assert_eq!(set.pattern_count(), m);
        for (k, p) in set.patterns().iter().enumerate() {
            let max = p.values().iter().fold(0.0_f64, |a, x| a.max(x.abs()));
            prop_assert!(p.values().iter().sum::<f64>().abs() <= 1e-12 * max.max(1e-300));
            for l in 0..m {
                prop_assert_eq!(p.values()[l], v[(l + k) % m]);
            }
        }
    }

    #[test]
    fn rasterized_samples_are_binary_and_centroid_exact(s in sample()) {
        let f = rasterize(&s, mesh());
        for (v, c) in f.values().iter().zip(mesh().element_centroids()) {
            prop_assert_eq!(*v, if s.contains(*c) { 0.4 } else { 0.2 });
        }
    }

    #[test]
    fn padding_leaves_blend_bitwise_unchanged(b in basis(), seed in any::<u64>(), extra in 0usize..5) {
        let n_c_max = b.samples.iter().map(|s| s.circles.len()).max().unwrap() + extra;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let padded = pad_basis(&b, n_c_max, &DomainSpec::default(), &mut rng).unwrap();
        prop_assert!(padded.samples.iter().all(|s| s.circles.len() == n_c_max));
        prop_assert!(padded.samples.iter().flat_map(|s| &s.circles).all(|c| c.center_norm() < R));
        prop_assert_eq!(blend(&padded, mesh()).unwrap(), blend(&b, mesh()).unwrap());
    }

    #[test]
    fn histogram_partitions_the_area(b in basis(), bins in 2usize..40) {
        let f = blend(&b, mesh()).unwrap();
        let h = export_histogram(&f, mesh(), bins, 0.2, 0.4).unwrap();
        prop_assert!((h.total() - mesh().total_area()).abs() <= 1e-12 * mesh().total_area() * bins as f64);
    }

    #[test]
    fn line_search_never_worsens(a in -2.0..2.0f64, start in -1.0..1.0f64, lo in -3.0..-1.0f64, hi in 1.0..3.0f64, step in 0.01..1.0f64) {
        let f = |v: f64| (v - a).powi(2) + 0.1 * (7.0 * v).sin();
        let mut seen = Vec::new();
        let out = line_search_scalar(start, f(start), (lo, hi), step, 1e-4, 0.5, &mut |v| {
            seen.push(v);
            Ok(Some(f(v)))
        }).unwrap();
        prop_assert!(out.cost <= f(start));
        prop_assert_eq!(out.cost, f(out.value));
        prop_assert!(seen.iter().all(|v| (lo..=hi).contains(v)));
    }

    #[test]
    fn text_formats_round_trip(values in prop::collection::vec(-1e3..1e3f64, 12), b in basis()) {
        let m = MeasurementSet::new(3, 4, values).unwrap();
        let header = MeasurementHeader {
            mesh_hash: "h".into(),
            pattern_hash: "p".into(),
            impedance: vec![0.1; 4],
            noise: None,
        };
        let (back, h) = MeasurementSet::from_text(&m.to_text(&header), Path::new("m")).unwrap();
        prop_assert_eq!(back, m);
        prop_assert_eq!(h, header);
        prop_assert_eq!(Basis::from_text(&b.to_text(), Path::new("b")).unwrap(), b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn collections_respect_the_sampling_rules(seed in any::<u64>(), n_c_max in 1usize..10) {
        let spec = CollectionSpec::with_defaults(50, n_c_max, R, seed);
        let samples = generate_collection(&spec, &DomainSpec::default(), 0.4, 0.2).unwrap();
        prop_assert_eq!(samples.len(), 50);
        for s in &samples {
            prop_assert!((1..=n_c_max).contains(&s.circles.len()));
            for c in &s.circles {
                prop_assert!(c.r > 0.0 && c.r <= 0.3 * R);
                prop_assert!(c.center_norm() < R);
            }
        }
    }

    #[test]
    fn descent_is_monotone_feasible_and_within_budget(b in basis(), truth in sample(), budget in 20usize..200) {
        let patterns = rotation_scheme(&base_pattern(16, &PatternKind::Adjacent, 1.0).unwrap());
        let solver = ForwardSolver::new(mesh().clone(), ImpedanceSet::uniform(16, 0.1).unwrap(), ElementDegree::Linear).unwrap();
        let observed = solver.simulate(&rasterize(&truth, mesh()), &patterns).unwrap();
        let evaluator = Evaluator::new(solver, patterns, observed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let padded = pad_basis(&b, 6, &DomainSpec::default(), &mut rng).unwrap();
        let mut cfg = CdConfig::for_domain(R);
        cfg.max_evaluations = budget;
        let (best, history) = coordinate_descent(&padded, &evaluator, &DomainSpec::default(), &cfg, None).unwrap();
        prop_assert!(history.evaluations <= budget);
        prop_assert!(evaluator.evaluations() <= budget);
        prop_assert!(is_feasible(&best, R, cfg.radius_bound));
        for pair in history.iterations.windows(2) {
            prop_assert!(pair[1].cost <= pair[0].cost);
        }
        for mv in &history.moves {
            prop_assert!(mv.cost <= history.initial_cost());
        }
        let recomputed = evaluator.evaluate_basis(&best).unwrap();
        prop_assert_eq!(recomputed, history.final_cost());
    }
}

fn circulant_rank(kind: PatternKind, m: usize) -> usize {
    let set = rotation_scheme(&base_pattern(m, &kind, 1.0).unwrap());
    let a = DMatrix::from_fn(m, m, |k, l| set.patterns()[k].values()[l]);
    let sv = a.singular_values();
    let tol = 1e-10 * sv.max();
    sv.iter().filter(|s| **s > tol).count()
}

#[test]
fn pattern_set_ranks() {
    assert_eq!(circulant_rank(PatternKind::Trig, 16), 2);
    assert_eq!(circulant_rank(PatternKind::Alternating, 16), 1);
    assert_eq!(circulant_rank(PatternKind::Adjacent, 16), 15);
}

#[test]
fn uniform_field_is_uniform_everywhere_on_grid() {
    let f = ConductivityField::uniform(mesh().element_count(), 0.3);
    let grid = f.to_grid(mesh(), 30);
    let inside: Vec<f64> = grid.iter().flatten().copied().filter(|v| !v.is_nan()).collect();
    assert!(inside.iter().all(|&v| v == 0.3));
    let frac = inside.len() as f64 / 900.0;
    assert!((frac - std::f64::consts::FRAC_PI_4).abs() < 0.05);
}
