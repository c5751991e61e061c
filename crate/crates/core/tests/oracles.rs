//! Library results checked against independent brute-force computations.

use kernmem::dynamics::{auto_step_sync, run_to_fixed_point, softmax_step, UpdateRule};
use kernmem::features::{phi_apply, sdm_overlap_mc, AddressSpace, FeatureMap};
use kernmem::kernels::{kernel_eval, sdm_cube_kernel, sdm_sphere_kernel_exact, KernelSpec};
use kernmem::patterns::{gen_patterns, Geometry};
use kernmem::training::{
    margin_dual, train_auto, train_neuron, train_neuron_hard_margin, LearningRule, NetworkMode, SolverConfig,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Fraction of all `2^n` cube addresses within Hamming radius `r` of both
/// `x = 0…0` and `y = 1…10…0` (first `delta` bits set).
fn cube_overlap_by_enumeration(n: u32, r: u32, delta: u32) -> f64 {
    let y: u32 = (1u32 << delta) - 1;
    let hits = (0u32..1 << n)
        .filter(|z| z.count_ones() <= r && (z ^ y).count_ones() <= r)
        .count();
    hits as f64 / (1u64 << n) as f64
}

#[test]
fn cube_kernel_matches_enumeration() {
    for n in [8u32, 12, 14] {
        for r in 0..=n {
            for delta in 0..=n {
                let oracle = cube_overlap_by_enumeration(n, r, delta);
                let k = sdm_cube_kernel(n as usize, r as usize, delta as usize).unwrap();
                assert!((k - oracle).abs() <= 1e-12, "n={n} r={r} Δ={delta}: {k} vs {oracle}");
            }
        }
    }
}

#[test]
fn sphere_kernel_matches_plain_sampling_in_low_dimension() {
    let p = gen_patterns(Geometry::Hypersphere, 5, 6, 21).unwrap();
    let b = 0.4;
    for j in 1..6 {
        let (x, y) = (p.column(0), p.column(j));
        let exact = sdm_sphere_kernel_exact(5, b, x.dot(&y)).unwrap();
        let (mc, se) = sdm_overlap_mc(AddressSpace::Sphere, b, x.as_slice(), y.as_slice(), 400_000, j as u64).unwrap();
        assert!((mc - exact).abs() <= 4.0 * se.max(1e-6), "pair {j}: {mc} ± {se} vs {exact}");
    }
}

/// Hard-margin dual `max Σα − ½ αᵀQα, α ≥ 0` solved by trying every active
/// set: `Q_SS α_S = 1` with `α_S ≥ 0` and `(Qα)_j ≥ 1` off the set.
fn hard_margin_by_active_sets(k: &DMatrix<f64>, y: &[f64]) -> DVector<f64> {
    let m = y.len();
    let q = DMatrix::from_fn(m, m, |a, b| y[a] * y[b] * k[(a, b)]);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1u32..(1 << m) {
        let set: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let qs = DMatrix::from_fn(set.len(), set.len(), |a, b| q[(set[a], set[b])]);
        let Some(sol) = qs.lu().solve(&DVector::from_element(set.len(), 1.0)) else {
            continue;
        };
        if sol.iter().any(|a| *a < -1e-12) {
            continue;
        }
        let mut alpha = DVector::zeros(m);
        for (a, &i) in set.iter().enumerate() {
            alpha[i] = sol[a].max(0.0);
        }
        let g = &q * &alpha;
        if g.iter().any(|v| *v < 1.0 - 1e-9) {
            continue;
        }
        let objective = alpha.sum() - 0.5 * alpha.dot(&g);
        if best.as_ref().is_none_or(|(o, _)| objective > *o) {
            best = Some((objective, alpha));
        }
    }
    best.expect("separable data has a feasible active set").1
}

#[test]
fn hard_margin_matches_active_set_oracle() {
    for seed in 0..12u64 {
        let m = 3 + (seed as usize % 5);
        let x = gen_patterns(Geometry::bipolar(), 12, m, seed).unwrap().into_data();
        let y: Vec<f64> = (0..m).map(|i| if (seed >> i) & 1 == 1 || i == 0 { 1.0 } else { -1.0 }).collect();
        for spec in [KernelSpec::Linear, KernelSpec::PolyHomogeneous { p: 2 }, KernelSpec::PolyInhomogeneous { p: 3 }] {
            let k = kernmem::kernels::kernel_matrix(&spec, &x).unwrap();
            let oracle = hard_margin_by_active_sets(&k, &y);
            let sol = train_neuron_hard_margin(&k, &y, &SolverConfig::hard_margin().with_tolerance(1e-10)).unwrap();
            assert!(sol.converged);
            let want = margin_dual(&k, &y, oracle.as_slice(), 0.0).unwrap();
            assert!((sol.margin - want).abs() <= 1e-6 * want, "seed {seed} {spec}: {} vs {want}", sol.margin);
            for (a, b) in sol.alpha.iter().zip(oracle.iter()) {
                assert!((a - b).abs() <= 1e-5 * oracle.max().max(1e-12), "seed {seed} {spec}");
            }
        }
    }
}

#[test]
fn kernel_adatron_reaches_the_oracle_margin() {
    let x = gen_patterns(Geometry::bipolar(), 10, 6, 77).unwrap().into_data();
    let y = [1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
    let k = kernmem::kernels::kernel_matrix(&KernelSpec::PolyHomogeneous { p: 2 }, &x).unwrap();
    let want = margin_dual(&k, &y, hard_margin_by_active_sets(&k, &y).as_slice(), 0.0).unwrap();
    let sol = train_neuron(&k, &y, &SolverConfig::new(LearningRule::KernelAdatron { lr: None }).with_tolerance(1e-10)).unwrap();
    assert!((sol.margin - want).abs() <= 1e-5 * want);
}

/// Classical Hopfield update `s ← sgn(W s)` with `W = XXᵀ` and zero diagonal.
fn hebbian_sync_step(x: &DMatrix<f64>, s: &[f64]) -> Vec<f64> {
    let mut w = x * x.transpose();
    w.fill_diagonal(0.0);
    let h = w * DVector::from_column_slice(s);
    h.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect()
}

fn state_of(bits: u32, n: usize) -> Vec<f64> {
    (0..n).map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 }).collect()
}

#[test]
fn sync_dynamics_match_brute_force_including_two_cycles() {
    let n = 6;
    let mut cycles_seen = 0;
    for seed in 0..6u64 {
        let x = gen_patterns(Geometry::bipolar(), n, 3, seed).unwrap().into_data();
        let net = train_auto(&x, NetworkMode::AutoNoSelf, KernelSpec::Linear, &SolverConfig::new(LearningRule::HebbianOneShot)).unwrap();
        for bits in 0..(1u32 << n) {
            let s = state_of(bits, n);
            let next = hebbian_sync_step(&x, &s);
            assert_eq!(auto_step_sync(&net, &s).unwrap().as_slice(), next.as_slice());
            let mut orbit = vec![s.clone()];
            let (mut fixed, mut cycle) = (false, false);
            for _ in 0..64 {
                let cur = orbit.last().unwrap().clone();
                let nx = hebbian_sync_step(&x, &cur);
                if nx == cur {
                    fixed = true;
                    break;
                }
                if orbit.len() >= 2 && orbit[orbit.len() - 2] == nx {
                    cycle = true;
                    break;
                }
                orbit.push(nx);
            }
            let trace = run_to_fixed_point(&UpdateRule::AutoSync(&net), &s, 64).unwrap();
            assert_eq!((trace.converged, trace.cycle), (fixed, cycle), "seed {seed} state {bits:b}");
            cycles_seen += cycle as usize;
        }
    }
    assert!(cycles_seen > 0);
}

#[test]
fn softmax_update_matches_direct_formula() {
    let x = gen_patterns(Geometry::Hypersphere, 4, 7, 3).unwrap().into_data();
    let s = gen_patterns(Geometry::Gaussian, 4, 1, 4).unwrap().into_data();
    for beta in [0.1, 1.0, 8.0, 50.0] {
        let logits: Vec<f64> = (0..7).map(|mu| beta * x.column(mu).dot(&s.column(0))).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = w.iter().sum();
        let direct = (0..7).fold(DVector::zeros(4), |acc, mu| acc + x.column(mu) * (w[mu] / z));
        let (out, tie) = softmax_step(&x, Some(beta), s.as_slice()).unwrap();
        assert!(!tie);
        assert!((out - direct).amax() < 1e-12, "β = {beta}");
    }
    let (out, _) = softmax_step(&x, None, s.as_slice()).unwrap();
    let best = (0..7)
        .max_by(|a, b| x.column(*a).dot(&s.column(0)).total_cmp(&x.column(*b).dot(&s.column(0))))
        .unwrap();
    assert_eq!(out, x.column(best).into_owned());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn explicit_features_reproduce_their_kernels(seed in any::<u64>(), n in 2usize..12) {
        let p = gen_patterns(Geometry::Gaussian, n, 2, seed).unwrap();
        let (x, y) = (p.column(0), p.column(1));
        let t = x.dot(&y);
        let poly2 = FeatureMap::Poly2 { n_in: n };
        let lhs = phi_apply(&poly2, x.as_slice()).unwrap().dot(&phi_apply(&poly2, y.as_slice()).unwrap());
        prop_assert!((lhs - (t + 1.0).powi(2)).abs() <= 1e-9 * (1.0 + (t + 1.0).powi(2)));
        let pairs = FeatureMap::Pairs { n_in: n };
        let lhs = phi_apply(&pairs, x.as_slice()).unwrap().dot(&phi_apply(&pairs, y.as_slice()).unwrap());
        let rhs = 0.5 * (t * t - x.iter().zip(y.iter()).map(|(a, b)| a * a * b * b).sum::<f64>());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        let k = kernel_eval(&KernelSpec::PolyInhomogeneous { p: 2 }, x.as_slice(), y.as_slice()).unwrap();
        prop_assert!((k - (t + 1.0).powi(2)).abs() <= 1e-9 * (1.0 + k.abs()));
    }

    #[test]
    fn hard_margin_dominates_hebbian(seed in any::<u64>()) {
        let x = gen_patterns(Geometry::bipolar(), 15, 6, seed).unwrap().into_data();
        let y: Vec<f64> = (0..6).map(|i| if (seed >> i) & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let k = kernmem::kernels::kernel_matrix(&KernelSpec::PolyHomogeneous { p: 2 }, &x).unwrap();
        let hm = train_neuron_hard_margin(&k, &y, &SolverConfig::hard_margin()).unwrap();
        let hebb = margin_dual(&k, &y, &[1.0; 6], 0.0).unwrap();
        prop_assert!(hm.margin >= hebb - 1e-6 * hm.margin.abs());
    }
}
