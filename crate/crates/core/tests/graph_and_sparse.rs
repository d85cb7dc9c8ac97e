use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectrafree_core::graph::{
    dijkstra_distances, farthest_point_sampling, laplacian, random_connected_graph, EdgeLength, LaplacianKind,
};
use spectrafree_core::oracle::dense_eigen;
use spectrafree_core::sparse::{cg_solve, prefactorize, CgOptions, CsrMatrix, Preconditioner, SolverConfig, SpdSolver};

fn eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn l_plus_d(n: usize, extra: usize, seed: u64) -> CsrMatrix {
    let g = random_connected_graph(n, extra, seed);
    let lap = laplacian(&g, LaplacianKind::Combinatorial).unwrap();
    lap.matrix().linear_combination(1.0, &CsrMatrix::from_diagonal(lap.degrees()), 1.0).unwrap()
}

fn rhs(n: usize, seed: u64) -> Vec<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constants_span_the_kernel(n in 2usize..60, extra in 0usize..80, seed in any::<u64>()) {
        let g = random_connected_graph(n, extra, seed);
        let lap = laplacian(&g, LaplacianKind::Combinatorial).unwrap();
        let l1 = lap.apply(&vec![1.0; n]).unwrap();
        let max_deg = lap.degrees().iter().fold(0.0f64, |m, d| m.max(*d));
        prop_assert!(l1.iter().all(|v| v.abs() <= 1e-10 * max_deg));
        prop_assert!(lap.matrix().is_symmetric(0.0));
        for i in 0..n {
            for (j, w) in lap.matrix().row(i) {
                if i == j {
                    prop_assert!((w - lap.degrees()[i]).abs() <= 1e-12 * max_deg);
                } else {
                    prop_assert!(w <= 0.0);
                }
            }
        }
    }

    #[test]
    fn connected_graphs_have_a_simple_zero_eigenvalue(n in 2usize..=30, extra in 0usize..40, seed in any::<u64>()) {
        let g = random_connected_graph(n, extra, seed);
        let lap = laplacian(&g, LaplacianKind::Combinatorial).unwrap();
        let es = dense_eigen(&lap).unwrap();
        prop_assert!(es.eigenvalues()[0] >= -1e-10);
        let zeros = es.eigenvalues().iter().filter(|l| l.abs() <= 1e-9 * es.lambda_max()).count();
        prop_assert_eq!(zeros, 1);
    }

    #[test]
    fn random_walk_and_combinatorial_share_generalized_eigenvalues(
        n in 2usize..=30, extra in 0usize..40, seed in any::<u64>()
    ) {
        let g = random_connected_graph(n, extra, seed);
        let comb = laplacian(&g, LaplacianKind::Combinatorial).unwrap();
        let rw = laplacian(&g, LaplacianKind::RandomWalk).unwrap();
        // Generalized problem (L, D) reduced by hand to D^{-1/2} L D^{-1/2}.
        let l = comb.matrix().to_dense();
        let s: Vec<f64> = comb.degrees().iter().map(|d| 1.0 / d.sqrt()).collect();
        let want = eigenvalues(DMatrix::from_fn(n, n, |i, j| s[i] * l[(i, j)] * s[j]));
        let got = dense_eigen(&rw).unwrap();
        for (a, b) in got.eigenvalues().iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-8, "{} vs {}", a, b);
        }
        let sym = dense_eigen(&laplacian(&g, LaplacianKind::SymmetricNormalized).unwrap()).unwrap();
        for (a, b) in sym.eigenvalues().iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn random_walk_is_degree_adjoint(n in 2usize..50, seed in any::<u64>()) {
        let g = random_connected_graph(n, n, seed);
        let rw = laplacian(&g, LaplacianKind::RandomWalk).unwrap();
        let f = rhs(n, seed);
        let h = rhs(n, seed.wrapping_add(1));
        let a = rw.inner(&rw.apply(&f).unwrap(), &h);
        let b = rw.inner(&f, &rw.apply(&h).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn farthest_point_sampling_is_reproducible_and_greedy(n in 2usize..40, extra in 0usize..30, seed in any::<u64>(), k in 1usize..10) {
        let g = random_connected_graph(n, extra, seed);
        let k = k.min(n);
        let start = (seed % n as u64) as usize;
        let a = farthest_point_sampling(&g, k, start, EdgeLength::Weight).unwrap();
        prop_assert_eq!(&a, &farthest_point_sampling(&g, k, start, EdgeLength::Weight).unwrap());
        prop_assert_eq!(a[0], start);
        // Brute force: each pick maximizes the distance to the chosen set,
        // lowest index first on ties.
        let dist: Vec<Vec<f64>> = (0..n).map(|s| dijkstra_distances(&g, s, EdgeLength::Weight).unwrap()).collect();
        for i in 1..k {
            let gap = |v: usize| a[..i].iter().map(|&s| dist[s][v]).fold(f64::INFINITY, f64::min);
            let best = (0..n).filter(|v| !a[..i].contains(v)).fold(None::<(usize, f64)>, |acc, v| match acc {
                Some((_, d)) if gap(v) <= d => acc,
                _ => Some((v, gap(v))),
            });
            prop_assert_eq!(a[i], best.unwrap().0);
        }
    }

    #[test]
    fn cg_matches_dense_cholesky(n in 2usize..=200, extra in 0usize..300, seed in any::<u64>()) {
        let a = l_plus_d(n, extra, seed);
        let b = rhs(n, seed);
        let tol = 1e-10;
        let opts = CgOptions { precond: Preconditioner::Jacobi(a.diagonal()), ..CgOptions::with_tol(tol) };
        let x = cg_solve(&a, &b, &opts).unwrap().into_converged().unwrap();
        let dense = a.to_dense().cholesky().unwrap().solve(&nalgebra::DVector::from_column_slice(&b));
        let want: Vec<f64> = dense.iter().copied().collect();
        // (L+D) D⁻¹ has condition at most 3, so the error tracks the residual.
        prop_assert!(rel(&x, &want) <= 10.0 * tol, "{}", rel(&x, &want));
    }

    #[test]
    fn factorization_and_cg_agree(n in 2usize..=200, extra in 0usize..300, seed in any::<u64>()) {
        let a = l_plus_d(n, extra, seed);
        let b = rhs(n, seed);
        let direct = prefactorize(&a).unwrap().solve(&b).unwrap();
        let iterative = SpdSolver::new(a.clone(), &SolverConfig { direct_threshold: 0, ..SolverConfig::default() }).unwrap();
        let (x, report) = iterative.solve(&b).unwrap();
        prop_assert!(report.unwrap().converged);
        prop_assert!(rel(&x, &direct) <= 1e-8);
    }
}

#[test]
fn concurrent_solves_share_one_factorization() {
    let a = l_plus_d(150, 200, 5);
    let f = prefactorize(&a).unwrap();
    let results: Vec<Vec<f64>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..4)
            .map(|i| {
                s.spawn({
                    let f = &f;
                    move || f.solve(&rhs(150, i)).unwrap()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (i, x) in results.iter().enumerate() {
        assert_eq!(x, &f.solve(&rhs(150, i as u64)).unwrap());
    }
}

#[test]
fn p3_plus_degrees_matches_hand_solution() {
    let g = spectrafree_core::graph::path_graph(3);
    let lap = laplacian(&g, LaplacianKind::Combinatorial).unwrap();
    let a = lap.matrix().linear_combination(1.0, &CsrMatrix::from_diagonal(lap.degrees()), 1.0).unwrap();
    // [[2,-1,0],[-1,4,-1],[0,-1,2]] x = (1,0,-1) has x = (1/2, 0, -1/2).
    let x = cg_solve(&a, &[1.0, 0.0, -1.0], &CgOptions::default()).unwrap().x;
    assert!((x[0] - 0.5).abs() < 1e-9 && x[1].abs() < 1e-9 && (x[2] + 0.5).abs() < 1e-9);
}
