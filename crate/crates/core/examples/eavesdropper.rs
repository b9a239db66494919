//! Shows the eavesdropper's incentive-weighted belief under different query
//! mixes and the hyperplane labeler.
//!
//! `cargo run --example eavesdropper`

use covert::eavesdropper::{Belief, Labeler, Trajectory};
use covert::gradient::QueryKind;
use covert::rng::stream;
use rand::Rng;

fn main() {
    let mut rng = stream(5, 0);
    for (name, learn_share, learn_incentive, obfuscate_incentive) in [
        ("greedy", 1.0, 3.0, 3.0),
        ("even split, equal pay", 0.5, 2.0, 2.0),
        ("rare learning at high pay", 0.3, 3.0, 1.0),
        ("frequent cheap learning", 0.7, 1.0, 3.0),
    ] {
        let mut belief = Belief::new();
        for _ in 0..100 {
            if rng.random_bool(learn_share) {
                belief.observe(Trajectory::One, learn_incentive);
            } else {
                belief.observe(Trajectory::Two, obfuscate_incentive);
            }
        }
        println!(
            "{name:<28} delta = {:.3}  MAP trajectory = {:?}",
            belief.delta(),
            belief.map_choice()
        );
    }

    let learner = [1.0, 1.0];
    let obfuscator = [5.0, 5.0];
    let labeler = Labeler::bisector(&learner, &obfuscator);
    for q in [[0.5, 0.8], [2.9, 3.0], [3.1, 3.2], [6.0, 4.0]] {
        println!("query {q:?} -> {:?}", labeler.classify(&q, QueryKind::Learn));
    }
}
