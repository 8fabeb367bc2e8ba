//! Rayleigh-quotient identities checked against dense Laplacian algebra.

use mlgad_core::graph::{laplacian_dense, rayleigh_quotient};
use mlgad_core::{Graph, GraphBuilder, Signal};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
    let mut b = GraphBuilder::new(n);
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random_bool(p) {
                b.add_edge(u, v).unwrap();
            }
        }
    }
    b.build().unwrap()
}

fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Signal {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        if v.iter().any(|x| *x != 0.0) {
            return Signal::new(v).unwrap();
        }
    }
}

/// Independent L = D - A built from the edge list.
fn dense_laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.node_count();
    let mut l = DMatrix::zeros(n, n);
    for &(u, v) in g.edges() {
        l[(u, v)] -= 1.0;
        l[(v, u)] -= 1.0;
        l[(u, u)] += 1.0;
        l[(v, v)] += 1.0;
    }
    l
}

#[test]
fn edge_sum_matches_matrix_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n = rng.random_range(2..=20);
        let p = rng.random_range(0.05..0.8);
        let g = random_graph(&mut rng, n, p);
        let x = random_signal(&mut rng, n);
        let all: Vec<usize> = (0..n).collect();
        let rq = rayleigh_quotient(&x, &g, &all).unwrap().value();
        let xv = DVector::from_column_slice(x.values());
        let l = dense_laplacian(&g);
        let oracle = (xv.transpose() * &l * &xv)[(0, 0)] / xv.dot(&xv);
        assert!(
            (rq - oracle).abs() <= 1e-12 * oracle.abs().max(1.0),
            "{rq} vs {oracle}"
        );
    }
}

#[test]
fn laplacian_matches_independent_construction() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let g = random_graph(&mut rng, 9, 0.4);
        let ours = laplacian_dense(&g, false).unwrap();
        let oracle = dense_laplacian(&g);
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(ours[[i, j]], oracle[(i, j)]);
            }
        }
    }
}

#[test]
fn quotient_bounded_by_twice_max_degree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let n = rng.random_range(1..=25);
        let p = rng.random_range(0.0..1.0);
        let g = random_graph(&mut rng, n, p);
        let x = random_signal(&mut rng, n);
        let k = rng.random_range(1..=n);
        let nodes: Vec<usize> = (0..k).collect();
        let rq = rayleigh_quotient(&x, &g, &nodes).unwrap().value();
        assert!(rq >= 0.0);
        assert!(rq <= 2.0 * g.max_degree() as f64 + 1e-12);
    }
}

#[test]
fn quotient_is_scale_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        let n = rng.random_range(2..=15);
        let g = random_graph(&mut rng, n, 0.4);
        let x = random_signal(&mut rng, n);
        let mut c = rng.random_range(-10.0..10.0);
        if c == 0.0 {
            c = 1.5;
        }
        let all: Vec<usize> = (0..n).collect();
        let a = rayleigh_quotient(&x, &g, &all).unwrap().value();
        let b = rayleigh_quotient(&x.scaled(c), &g, &all).unwrap().value();
        assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }
}

#[test]
fn laplacian_spectrum_is_non_negative() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let g = random_graph(&mut rng, 6, 0.5);
        for normalized in [false, true] {
            let l = laplacian_dense(&g, normalized).unwrap();
            let m = DMatrix::from_row_slice(6, 6, l.as_slice().unwrap());
            assert_eq!(m, m.transpose());
            for ev in m.symmetric_eigenvalues().iter() {
                assert!(*ev >= -1e-10, "eigenvalue {ev}");
            }
            if !normalized {
                for i in 0..6 {
                    assert_eq!(l.row(i).sum(), 0.0);
                }
            }
        }
    }
}
