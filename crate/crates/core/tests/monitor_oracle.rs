mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stlid::{parse, robustness, sat, Signal};

#[test]
fn matches_tree_recursion_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut sat_count, mut unsat, mut errors, mut zeros) = (0, 0, 0, 0);
    for i in 0..1500 {
        let case = common::monitor_case(&mut rng).unwrap_or_else(|e| panic!("case {i}: {e}"));
        match case.satisfied {
            Some(true) => sat_count += 1,
            Some(false) => unsat += 1,
            None => errors += 1,
        }
        zeros += usize::from(case.zero_robustness);
    }
    assert!(sat_count > 200 && unsat > 200 && errors > 10 && zeros > 10, "{sat_count} {unsat} {errors} {zeros}");
}

#[test]
fn negated_tie_is_violated_with_zero_robustness() {
    let s = Signal::scalar("x", 1.0, &[2.0]).unwrap();
    let f = parse("!(x >= 2)").unwrap();
    assert_eq!(robustness(&s, &f, 0).unwrap().value, 0.0);
    assert!(!sat(&s, &f, 0).unwrap());
}

#[test]
fn implication_and_intervals() {
    let s = Signal::scalar("x", 0.5, &[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
    let f = parse("G[0,1] (x >= 1 => F[0,0.5] x >= 2)").unwrap();
    assert!(sat(&s, &f, 0).unwrap());
    assert_eq!(robustness(&s, &f, 0).unwrap().value, 0.0);
    let f = parse("I[0,1](x) >= 0.5").unwrap();
    assert_eq!(robustness(&s, &f, 0).unwrap().value, 0.0);
}
