use dqc1m_core::dense::{product_matrix, sum_matrix, DenseOperator};
use dqc1m_core::pauli::{check_su2_triple, find_su2_partner, Commutation, Pauli, PauliProduct, PauliSum};
use proptest::prelude::*;

const TOL: f64 = 1e-10;

fn all_products(n: usize) -> Vec<PauliProduct> {
    let mask = (1u64 << n) - 1;
    let mut out = Vec::new();
    for x in 0..=mask {
        for z in 0..=mask {
            out.push(PauliProduct::from_masks(n, x, z, 0).unwrap());
        }
    }
    out
}

fn diff(a: &DenseOperator, b: &DenseOperator) -> f64 {
    a.max_abs_diff(b)
}

fn dense_relation(p: &PauliProduct, q: &PauliProduct) -> Commutation {
    let (a, b) = (product_matrix(p).unwrap(), product_matrix(q).unwrap());
    let ab = a.mul(&b).unwrap();
    let ba = b.mul(&a).unwrap();
    let scale = |m: &DenseOperator| DenseOperator::from_matrix(m.n(), -m.matrix()).unwrap();
    if diff(&ab, &ba) < TOL {
        Commutation::Commute
    } else {
        assert!(diff(&ab, &scale(&ba)) < TOL, "{p} and {q} neither commute nor anticommute");
        Commutation::Anticommute
    }
}

fn check_pair(p: &PauliProduct, q: &PauliProduct) {
    assert_eq!(p.commutes(q).unwrap(), dense_relation(p, q), "{p} vs {q}");
    let sym = product_matrix(&p.multiply(q).unwrap()).unwrap();
    let dense = product_matrix(p).unwrap().mul(&product_matrix(q).unwrap()).unwrap();
    assert!(diff(&sym, &dense) < TOL, "{p}·{q}");
}

#[test]
fn exhaustive_small_products() {
    for n in 1..=2 {
        let all = all_products(n);
        for p in &all {
            for q in &all {
                check_pair(p, q);
            }
        }
    }
}

#[test]
fn exhaustive_decoupling_two_qubits() {
    let all = all_products(2);
    let h = PauliSum::new(2, all.iter().skip(1).enumerate().map(|(i, &p)| (0.1 + 0.07 * i as f64, p))).unwrap();
    let hm = sum_matrix(&h).unwrap();
    for s in &all {
        let sm = product_matrix(s).unwrap();
        let conj = DenseOperator::product([&sm, &hm, &sm]).unwrap();
        let avg = DenseOperator::from_matrix(2, (hm.matrix() + conj.matrix()) * num_complex::Complex64::new(0.5, 0.0)).unwrap();
        let sym = sum_matrix(&h.decouple(s).unwrap()).unwrap();
        assert!(diff(&avg, &sym) < TOL, "decoupling by {s}");
    }
}

fn arb_product(n: usize) -> impl Strategy<Value = PauliProduct> {
    let mask = (1u64 << n) - 1;
    (0..=mask, 0..=mask).prop_map(move |(x, z)| PauliProduct::from_masks(n, x, z, 0).unwrap())
}

fn arb_sum(n: usize) -> impl Strategy<Value = PauliSum> {
    prop::collection::vec((-2.0f64..2.0, arb_product(n)), 1..5).prop_filter_map("non-empty", move |terms| {
        let mut kept: Vec<(f64, PauliProduct)> = Vec::new();
        for (c, p) in terms {
            if !p.is_identity() && !kept.iter().any(|(_, q)| *q == p) {
                kept.push((c, p));
            }
        }
        (!kept.is_empty()).then(|| PauliSum::new(n, kept).unwrap())
    })
}

fn dense_triple(h0: &PauliSum, h1: &PauliSum, h2: &PauliSum) -> bool {
    let m = [h0, h1, h2].map(|h| sum_matrix(h).unwrap());
    (0..3).all(|j| {
        let (a, b, c) = (&m[j], &m[(j + 1) % 3], &m[(j + 2) % 3]);
        let comm = a.matrix() * b.matrix() - b.matrix() * a.matrix();
        let want = c.matrix() * num_complex::Complex64::new(0.0, 2.0);
        (comm - want).iter().all(|z| z.norm() < TOL)
    })
}

/// Disjoint single-qubit triples with random sign patterns and cyclic factor
/// relabelling.
fn arb_triple(n: usize) -> impl Strategy<Value = (PauliSum, PauliSum, PauliSum)> {
    (1u64..(1 << n), prop::collection::vec((0usize..4, 0usize..3), n)).prop_map(
        move |(support, choices)| {
            let signs = [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)];
            let cycle = [Pauli::Z, Pauli::X, Pauli::Y];
            let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
            for q in 0..n {
                if support >> q & 1 == 0 {
                    continue;
                }
                let (s, r) = choices[q];
                let make = |k: usize| {
                    let mut fac = vec![Pauli::I; n];
                    fac[q] = cycle[(r + k) % 3];
                    PauliProduct::from_factors(&fac).unwrap()
                };
                let (e0, e1, e2) = signs[s];
                a.push((e0, make(0)));
                b.push((e1, make(1)));
                c.push((e2, make(2)));
            }
            (PauliSum::new(n, a).unwrap(), PauliSum::new(n, b).unwrap(), PauliSum::new(n, c).unwrap())
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn random_pairs_match_dense(n in 3usize..=4, seed in any::<u64>()) {
        let mask = (1u64 << n) - 1;
        let mut s = seed;
        let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); s >> 20 };
        let p = PauliProduct::from_masks(n, next() & mask, next() & mask, 0).unwrap();
        let q = PauliProduct::from_masks(n, next() & mask, next() & mask, 0).unwrap();
        check_pair(&p, &q);
    }

    #[test]
    fn multiplication_is_associative(p in arb_product(4), q in arb_product(4), r in arb_product(4)) {
        let left = p.multiply(&q).unwrap().multiply(&r).unwrap();
        let right = p.multiply(&q.multiply(&r).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn products_are_self_inverse(p in arb_product(4)) {
        prop_assert!(p.multiply(&p).unwrap().is_identity());
        prop_assert_eq!(p.multiply(&p).unwrap().phase_exponent(), 0);
    }

    #[test]
    fn decoupling_matches_dense_and_is_idempotent(h in arb_sum(3), s in arb_product(3)) {
        let once = h.decouple(&s).unwrap();
        prop_assert!(once.decouple(&s).unwrap().approx_eq(&once, 1e-12));
        if once.is_empty() {
            return Ok(());
        }
        let (hm, sm) = (sum_matrix(&h).unwrap(), product_matrix(&s).unwrap());
        let conj = DenseOperator::product([&sm, &hm, &sm]).unwrap();
        let avg = (hm.matrix() + conj.matrix()) * num_complex::Complex64::new(0.5, 0.0);
        let sym = sum_matrix(&once).unwrap();
        prop_assert!((avg - sym.matrix()).iter().all(|z| z.norm() < TOL));
    }

    #[test]
    fn triple_predicate_matches_dense(h0 in arb_sum(3), h1 in arb_sum(3), h2 in arb_sum(3)) {
        prop_assert_eq!(check_su2_triple(&h0, &h1, &h2).unwrap(), dense_triple(&h0, &h1, &h2));
    }

    #[test]
    fn constructed_triples_pass(t in arb_triple(4)) {
        let (h0, h1, h2) = t;
        prop_assert!(check_su2_triple(&h0, &h1, &h2).unwrap());
        prop_assert!(dense_triple(&h0, &h1, &h2));
    }

    #[test]
    fn partner_closes_su2(s0 in arb_product(4), s1 in arb_product(4)) {
        prop_assume!(!s0.is_identity() && s0.commutes(&s1).unwrap() == Commutation::Anticommute);
        let h0 = PauliSum::from_product(1.0, s0).unwrap();
        let (mu, s2) = find_su2_partner(&h0, &s1).unwrap();
        prop_assert_eq!(mu, 0);
        let h1 = PauliSum::from_product(1.0, s1).unwrap();
        let h2 = PauliSum::from_product(1.0, s2).unwrap();
        prop_assert!(check_su2_triple(&h0, &h1, &h2).unwrap());
    }
}
