mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn run(seed: u64, one_sided: bool, count: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sat, mut unsat) = (0, 0);
    for i in 0..count {
        let case = common::encoder_case(&mut rng, one_sided, 12).unwrap_or_else(|e| panic!("case {i}: {e}"));
        if case.satisfied {
            sat += 1;
        } else {
            unsat += 1;
        }
    }
    assert!(sat > count / 10 && unsat > count / 10, "{sat} / {unsat}");
}

#[test]
fn two_sided_matches_monitor() {
    run(5, false, 150);
}

#[test]
fn one_sided_matches_monitor() {
    run(6, true, 150);
}
