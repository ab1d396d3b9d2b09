use chaoscert::symbolic::*;
use proptest::prelude::*;

/// Random 0/1 matrix with at least one entry per row.
fn matrix(max_m: usize) -> impl Strategy<Value = TransitionMatrix> {
    (2..=max_m)
        .prop_flat_map(|m| proptest::collection::vec(proptest::collection::vec(0u8..=1, m), m))
        .prop_map(|mut rows| {
            let m = rows.len();
            for (i, r) in rows.iter_mut().enumerate() {
                if r.iter().all(|&v| v == 0) {
                    r[(i + 1) % m] = 1;
                }
            }
            TransitionMatrix::new(rows).unwrap()
        })
}

/// Brute-force count of cyclically admissible words of length `n`.
fn brute_periodic(a: &TransitionMatrix, n: usize) -> u128 {
    let m = a.m();
    let mut count = 0;
    let mut w = vec![0usize; n];
    loop {
        let closes = (0..n).all(|i| a.allows(w[i] + 1, w[(i + 1) % n] + 1));
        count += closes as u128;
        let mut k = 0;
        loop {
            if k == n {
                return count;
            }
            w[k] += 1;
            if w[k] < m {
                break;
            }
            w[k] = 0;
            k += 1;
        }
    }
}

fn word_in(a: &TransitionMatrix) -> impl Strategy<Value = Word> {
    let m = a.m();
    proptest::collection::vec(1..=m, 1..10).prop_map(move |s| Word::new(s, m).unwrap())
}

/// Cyclically admissible A4 block built as a closed walk: symbols 1,2 are
/// followed by 3,4 and vice versa, so even lengths close.
fn a4_cycle() -> impl Strategy<Value = Vec<usize>> {
    (1usize..=5).prop_flat_map(|half| proptest::collection::vec((1usize..=2, 3usize..=4), half))
        .prop_map(|pairs| pairs.into_iter().flat_map(|(a, b)| [a, b]).collect())
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn admissibility_is_hereditary((a, w) in matrix(5).prop_flat_map(|a| { let w = word_in(&a); (Just(a), w) }),
                                   start in 0usize..10, len in 1usize..10) {
        prop_assume!(admissible(&w, &a).unwrap());
        let start = start % w.len();
        let len = len.min(w.len() - start).max(1);
        prop_assert!(admissible(&w.subword(start, len), &a).unwrap());
    }

    #[test]
    fn word_counts_grow_at_most_m_fold(a in matrix(6), n in 1usize..15) {
        let (c0, c1) = (count_words(&a, n).unwrap(), count_words(&a, n + 1).unwrap());
        prop_assert!(c1 <= a.m() as u128 * c0);
    }

    #[test]
    fn entropy_bounds_periodic_growth(a in matrix(5), n in 1usize..=12) {
        // trace(Aⁿ) is a sum of m eigenvalue powers, so trace(Aⁿ) ≤ m·ρⁿ
        let p = count_periodic(&a, n).unwrap();
        prop_assume!(p > 0);
        let bound = ((p as f64).ln() - (a.m() as f64).ln()) / n as f64;
        prop_assert!(entropy(&a).unwrap() >= bound - 1e-9);
    }

    #[test]
    fn trace_counts_cycles(a in matrix(4), n in 1usize..=6) {
        prop_assert_eq!(count_periodic(&a, n).unwrap(), brute_periodic(&a, n));
    }

    #[test]
    fn distance_is_a_metric_on_partial_sums(
        x in proptest::collection::vec(1usize..=4, 1..6),
        y in proptest::collection::vec(1usize..=4, 1..6),
        z in proptest::collection::vec(1usize..=4, 1..6),
        n in 1u32..20,
    ) {
        let s = |v: Vec<usize>| PeriodicSequence::new(Word::new(v, 4).unwrap());
        let (a, b, c) = (s(x), s(y), s(z));
        let ab = distance(&a, &b, n).unwrap().partial;
        prop_assert_eq!(ab, distance(&b, &a, n).unwrap().partial);
        let ac = distance(&a, &c, n).unwrap().partial;
        let cb = distance(&c, &b, n).unwrap().partial;
        prop_assert!(ab <= ac + cb + 1e-15);
        prop_assert_eq!(distance(&a, &a, n).unwrap().partial, 0.0);
    }

    #[test]
    fn shift_keeps_cyclic_admissibility(block in a4_cycle(), turns in 0usize..10) {
        let a = TransitionMatrix::a4();
        let mut s = PeriodicSequence::new(Word::new(block, 4).unwrap());
        prop_assert!(s.cyclically_admissible(&a).unwrap());
        for _ in 0..turns {
            s = shift(&s);
        }
        prop_assert!(shift(&s).cyclically_admissible(&a).unwrap());
    }
}

#[test]
fn periodic_growth_without_the_m_offset_can_exceed_entropy() {
    let a = TransitionMatrix::a4();
    let p2 = count_periodic(&a, 2).unwrap() as f64;
    assert!(p2.ln() / 2.0 > entropy(&a).unwrap());
    // but converges to it along even n
    let p40 = count_periodic(&a, 40).unwrap() as f64;
    assert!((p40.ln() / 40.0 - entropy(&a).unwrap()).abs() < 0.02);
}

#[test]
fn a4_word_counts_double() {
    let a = TransitionMatrix::a4();
    for n in 1..=20 {
        assert_eq!(count_words(&a, n).unwrap(), 4 * (1u128 << (n - 1)));
    }
}

#[test]
fn a4_periodic_counts_match_brute_force() {
    let a = TransitionMatrix::a4();
    for n in 1..=8 {
        assert_eq!(count_periodic(&a, n).unwrap(), brute_periodic(&a, n), "n = {n}");
    }
    assert_eq!(count_periodic(&a, 1).unwrap(), 0);
    assert_eq!(count_periodic(&a, 2).unwrap(), 8);
}

#[test]
fn b8_entropy_is_log_two_root_two() {
    let b = TransitionMatrix::b8();
    assert!((entropy(&b).unwrap() - (2.0 * 2f64.sqrt()).ln()).abs() < 1e-12);
    let ratio = word_growth_ratio(&b, 20).unwrap();
    assert!((ratio - entropy(&b).unwrap()).abs() < 0.02);
}
