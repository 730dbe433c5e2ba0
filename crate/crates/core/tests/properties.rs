mod common;

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::*;
use proxyqas::circuit::{Circuit, Gate, GateKind, ParamRole};
use proxyqas::datasets::{generate, split, GeneratorKind, GeneratorParams};
use proxyqas::device::{check_hardware_aware, hardware_fidelity};
use proxyqas::evolve::{append_layer, prune_gates};
use proxyqas::proxies::{concentration, fisher_at, gram_matrix, kta, GramMatrix, GramMode, ProxyKind, ProxyVector, DEFAULT_P_MIN};
use proxyqas::qsvm::{dual_objective, svm_train_with_trace, SvmConfig};
use proxyqas::ranking::{aggregate, build_rank_table, kta_filter_indices, rank_term, survivors, top_k, Group, RankingConfig};
use proxyqas::search_space::{sample_family, SamplerConfig};
use proxyqas::sim::{feature_state, fidelity_overlap_with, OverlapMode};

fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Gate-wise subsequence, treating variational indices as renumberable.
fn is_subsequence(child: &[Gate], parent: &[Gate]) -> bool {
    let same = |a: &Gate, b: &Gate| {
        a.kind == b.kind
            && a.qubits == b.qubits
            && match (a.role, b.role) {
                (Some(ParamRole::Variational { .. }), Some(ParamRole::Variational { .. })) => true,
                (x, y) => x == y,
            }
    };
    let mut it = parent.iter();
    child.iter().all(|g| it.any(|p| same(g, p)))
}

fn theta_indices_compact(c: &Circuit) -> bool {
    let used: BTreeSet<usize> = c.gates().iter().filter_map(Gate::variational_index).collect();
    used == (0..c.theta_count()).collect::<BTreeSet<_>>()
}

fn random_psd_gram<R: Rng + ?Sized>(n: usize, rng: &mut R) -> GramMatrix {
    let rank = rng.random_range(1..=n);
    let b = DMatrix::<f64>::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
    let mut a = &b * b.transpose() + DMatrix::identity(n, n) * 1e-3;
    let d: Vec<f64> = (0..n).map(|i| a[(i, i)].sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] /= d[i] * d[j];
        }
    }
    a = (&a + a.transpose()) * 0.5;
    for i in 0..n {
        a[(i, i)] = 1.0;
    }
    GramMatrix::from_matrix(a).unwrap()
}

fn random_proxies<R: Rng + ?Sized>(z: usize, rng: &mut R) -> Vec<ProxyVector> {
    (0..z)
        .map(|_| ProxyVector {
            kta: rng.random_range(-1.0..1.0),
            concentration: rng.random_range(0.0..10.0),
            expressivity_kl: rng.random_range(0.0..5.0),
            expressivity_degenerate: false,
            led: rng.random_range(0.0..1.0),
            hw_fidelity: rng.random_range(0.0..1.0),
            cnot_count: rng.random_range(0..40),
            param_count: rng.random_range(0..40),
            depth: rng.random_range(1..60),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn simulation_preserves_norm(seed in any::<u64>(), n in 1usize..=8) {
        let mut r = rng(seed);
        let (c, _) = random_circuit(n, 5, &mut r);
        let x = random_points(1, 5, &mut r).remove(0);
        let theta = random_theta(c.theta_count(), &mut r);
        let s = feature_state(&c, &x, &theta).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn overlap_is_symmetric_and_modes_agree(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let (c, _) = random_circuit(n, 4, &mut r);
        let xs = random_points(2, 4, &mut r);
        let theta = random_theta(c.theta_count(), &mut r);
        let ab = fidelity_overlap_with(&c, &xs[0], &xs[1], &theta, OverlapMode::Exact).unwrap();
        let ba = fidelity_overlap_with(&c, &xs[1], &xs[0], &theta, OverlapMode::Exact).unwrap();
        let adj = fidelity_overlap_with(&c, &xs[0], &xs[1], &theta, OverlapMode::Adjoint).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((ab - adj).abs() <= 1e-10, "exact {} adjoint {}", ab, adj);
    }

    #[test]
    fn circuit_json_round_trips(seed in any::<u64>(), n in 1usize..=8) {
        let mut r = rng(seed);
        let (c, _) = random_circuit(n, 6, &mut r);
        let back = Circuit::from_json(&c.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_is_a_valid_kernel(seed in any::<u64>(), n in 1usize..=5, m in 2usize..=10) {
        let mut r = rng(seed);
        let (c, _) = random_circuit(n, 3, &mut r);
        let xs = random_points(m, 3, &mut r);
        let theta = random_theta(c.theta_count(), &mut r);
        let g = gram_matrix(&c, &xs, &theta, GramMode::Exact).unwrap();
        let k = g.matrix();
        for i in 0..m {
            prop_assert!((k[(i, i)] - 1.0).abs() <= 1e-10);
            for j in 0..m {
                prop_assert_eq!(k[(i, j)], k[(j, i)]);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&k[(i, j)]));
            }
        }
        prop_assert!(g.min_eigenvalue() >= -1e-8);
        let conc = concentration(&g);
        prop_assert!((0.0..=m as f64).contains(&conc));

        let y = random_labels(m, &mut r);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let a = kta(&g, &y).unwrap();
        prop_assert!(a.abs() <= 1.0 + 1e-12);
        prop_assert_eq!(a, kta(&g, &neg).unwrap());
    }

    #[test]
    fn fisher_is_symmetric_psd(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let (c, _) = random_circuit(n, 3, &mut r);
        let xs = random_points(6, 3, &mut r);
        let theta = random_theta(c.theta_count(), &mut r);
        let f = fisher_at(&c, &xs, &theta, DEFAULT_P_MIN).unwrap().matrix;
        prop_assert_eq!(f.nrows(), c.theta_count());
        let scale = f.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        for i in 0..f.nrows() {
            for j in 0..f.ncols() {
                prop_assert!((f[(i, j)] - f[(j, i)]).abs() <= 1e-12 * scale);
            }
        }
        if f.nrows() > 0 {
            let min = f.clone().symmetric_eigen().eigenvalues.min();
            prop_assert!(min >= -1e-9 * scale, "min eigenvalue {}", min);
        }
    }

    #[test]
    fn sampled_circuits_respect_the_device(seed in any::<u64>(), n in 2usize..=8, d in 1usize..=12) {
        let mut r = rng(seed);
        let device = random_device(n, &mut r);
        let mut cfg = SamplerConfig::new(n, d);
        cfg.data_fraction = r.random_range(0.0..=1.0);
        for family in FAMILIES.iter().cycle().take(16) {
            let c = sample_family(*family, &device, &cfg, &mut r).unwrap();
            prop_assert!(check_hardware_aware(&c, &device));
            for g in c.gates() {
                if let Some(i) = g.feature_index() {
                    prop_assert!(i < d);
                }
            }
            prop_assert!(theta_indices_compact(&c));
        }
    }

    #[test]
    fn evolution_operators_keep_hardware_awareness(seed in any::<u64>(), n in 2usize..=6, rate in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let (parent, device) = random_circuit(n, 4, &mut r);
        let child = prune_gates(&parent, rate, &mut r);
        prop_assert!(is_subsequence(child.gates(), parent.gates()));
        prop_assert!(check_hardware_aware(&child, &device));
        prop_assert!(theta_indices_compact(&child));
        let grown = append_layer(&child, &device, &SamplerConfig::new(n, 4), &mut r).unwrap();
        prop_assert!(check_hardware_aware(&grown, &device));
        prop_assert!(grown.gates().len() > child.gates().len());
        prop_assert_eq!(&grown.gates()[..child.gates().len()], child.gates());
    }

    #[test]
    fn fidelity_drops_when_a_noisy_gate_is_appended(seed in any::<u64>(), n in 2usize..=6) {
        let mut r = rng(seed);
        let (c, device) = random_circuit(n, 4, &mut r);
        let device = device.with_idle_error(vec![0.0; n]).unwrap();
        let base = hardware_fidelity(&c, &device).unwrap();

        let q = r.random_range(0..n);
        let mut gates = c.gates().to_vec();
        gates.push(Gate::rotation(GateKind::Rx, q, ParamRole::Fixed { angle: 0.3 }));
        let eps = device.gate_error(GateKind::Rx, &[q]);
        let more = hardware_fidelity(&Circuit::new(n, gates, 0).unwrap(), &device).unwrap();
        if eps > 0.0 {
            prop_assert!(more < base);
        }

        let (a, b) = device.coupling()[r.random_range(0..device.coupling().len())];
        let mut gates = c.gates().to_vec();
        gates.push(Gate::cx(a, b));
        let eps = device.gate_error(GateKind::Cx, &[a, b]);
        let with_cx = hardware_fidelity(&Circuit::new(n, gates, 0).unwrap(), &device).unwrap();
        prop_assert!((with_cx - base * (1.0 - eps)).abs() <= 1e-12 * base.max(1e-300));
    }

    #[test]
    fn svm_solution_is_feasible_and_objective_monotone(seed in any::<u64>(), m in 2usize..=20, c_idx in 0usize..3) {
        let mut r = rng(seed);
        let g = random_psd_gram(m, &mut r);
        let y = random_labels(m, &mut r);
        let cfg = SvmConfig { c: [0.5, 1.0, 2.0][c_idx], ..Default::default() };
        let mut objectives = Vec::new();
        let model = svm_train_with_trace(&g, &y, &cfg, |alpha| objectives.push(dual_objective(g.matrix(), &y, alpha))).unwrap();
        for &a in &model.alpha {
            prop_assert!((-1e-12..=cfg.c + 1e-12).contains(&a));
        }
        let balance: f64 = model.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        prop_assert!(balance.abs() <= 1e-6);
        for w in objectives.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "objective rose from {} to {}", w[0], w[1]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn selection_ignores_monotone_transforms(seed in any::<u64>(), z in 2usize..=30, k_frac in 0.0f64..1.0) {
        let mut r = rng(seed);
        let proxies = random_proxies(z, &mut r);
        let cfg = RankingConfig::default();
        let k = 1 + (k_frac * z as f64) as usize % z;
        let pick = |p: &[ProxyVector]| top_k(&aggregate(&build_rank_table(p, &cfg).unwrap()).unwrap(), k).unwrap();
        let before = pick(&proxies);
        let transformed: Vec<ProxyVector> = proxies
            .iter()
            .map(|p| ProxyVector {
                concentration: p.concentration.powi(3) + 7.0,
                expressivity_kl: p.expressivity_kl.exp(),
                led: 2.0 * p.led - 1.0,
                hw_fidelity: p.hw_fidelity.sqrt(),
                cnot_count: p.cnot_count * 3 + 1,
                ..p.clone()
            })
            .collect();
        prop_assert_eq!(before, pick(&transformed));
    }

    #[test]
    fn mid_term_is_symmetric(z in 1usize..=500, r_frac in 0.0f64..1.0) {
        let r = 1 + (r_frac * z as f64) as usize % z;
        prop_assert_eq!(rank_term(Group::Mid, r, z), rank_term(Group::Mid, z + 1 - r, z));
        prop_assert!(rank_term(Group::Mid, r, z).is_finite());
    }

    #[test]
    fn best_group_dominance(z in 3usize..=40, n_best in 1usize..=3, n_mid in 0usize..=3) {
        let best = rank_term(Group::Best, z, z) * n_best as f64;
        let worse = rank_term(Group::Best, 1, z) + rank_term(Group::Best, z, z) * (n_best - 1) as f64;
        let mid = rank_term(Group::Mid, z.div_ceil(2), z) * n_mid as f64;
        prop_assert!(best + mid >= worse + mid);
    }

    #[test]
    fn kta_filter_keeps_ceiling_and_ignores_order(seed in any::<u64>(), z in 1usize..=200, keep in 0.01f64..=1.0) {
        let mut r = rng(seed);
        let ids: Vec<u64> = (0..z as u64).map(|i| i * 3 + 1).collect();
        let scores: Vec<f64> = (0..z).map(|_| (r.random_range(-10..10) as f64) / 10.0).collect();
        let kept = kta_filter_indices(&ids, &scores, keep).unwrap();
        prop_assert_eq!(kept.len(), survivors(z, keep));
        prop_assert_eq!(kept.len(), ((keep * z as f64) - 1e-9).ceil().max(1.0) as usize);

        let mut perm: Vec<usize> = (0..z).collect();
        for i in (1..z).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let ids2: Vec<u64> = perm.iter().map(|&i| ids[i]).collect();
        let scores2: Vec<f64> = perm.iter().map(|&i| scores[i]).collect();
        let kept2 = kta_filter_indices(&ids2, &scores2, keep).unwrap();
        let a: BTreeSet<u64> = kept.iter().map(|&i| ids[i]).collect();
        let b: BTreeSet<u64> = kept2.iter().map(|&i| ids2[i]).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn rank_columns_are_permutations(seed in any::<u64>(), z in 1usize..=50) {
        let mut r = rng(seed);
        let table = build_rank_table(&random_proxies(z, &mut r), &RankingConfig::default()).unwrap();
        for col in table.columns() {
            let mut ranks = col.ranks.clone();
            ranks.sort_unstable();
            prop_assert_eq!(ranks, (1..=z).collect::<Vec<_>>());
        }
        let kinds: BTreeSet<ProxyKind> = table.columns().iter().map(|c| c.proxy).collect();
        prop_assert_eq!(kinds.len(), table.columns().len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generators_are_deterministic_and_well_formed(seed in any::<u64>(), kind_idx in 0usize..4, n in 20usize..=200, d in 2usize..=12) {
        let kind = [GeneratorKind::LinearlySeparable, GeneratorKind::HyperplaneParity, GeneratorKind::TwoCurves, GeneratorKind::HiddenManifold][kind_idx];
        let params = GeneratorParams { n, d, ..Default::default() };
        let a = generate(kind, &params, &mut rng(seed)).unwrap();
        let b = generate(kind, &params, &mut rng(seed)).unwrap();
        prop_assert_eq!(&a.x, &b.x);
        prop_assert_eq!(&a.y, &b.y);
        prop_assert_eq!(a.len(), n);
        prop_assert!(a.y.iter().all(|&v| v == 1.0 || v == -1.0));
        prop_assert!(a.x.iter().flatten().all(|v| v.is_finite()));
        prop_assert!(a.x.iter().all(|row| row.len() == d));
    }

    #[test]
    fn split_preserves_label_proportions(seed in any::<u64>(), n in 20usize..=300, f in 0.5f64..0.9) {
        let data = generate(GeneratorKind::LinearlySeparable, &GeneratorParams { n, d: 3, ..Default::default() }, &mut rng(seed)).unwrap();
        let (train, test) = split(&data, f, &mut rng(seed ^ 1)).unwrap();
        prop_assert_eq!(train.len() + test.len(), n);
        let expected = data.count_positive() as f64 * train.len() as f64 / n as f64;
        prop_assert!((train.count_positive() as f64 - expected).abs() <= 1.0 + 1e-9);
    }
}

#[test]
fn symmetric_generators_are_balanced() {
    for kind in [GeneratorKind::LinearlySeparable, GeneratorKind::HyperplaneParity] {
        for seed in 0..20 {
            let n = 1000;
            let params = GeneratorParams { n, d: 6, margin: 0.0, ..Default::default() };
            let data = generate(kind, &params, &mut rng(seed)).unwrap();
            let z = (data.count_positive() as f64 - n as f64 / 2.0) / (n as f64 / 4.0).sqrt();
            assert!(z.abs() <= 5.0, "{kind:?} seed {seed}: {z:+.2}σ");
        }
    }
}
