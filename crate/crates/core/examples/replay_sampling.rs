//! Proportional prioritized replay: sampling frequencies and
//! importance-sampling weights.

use adversarial_traffic::dqn::{ReplayBuffer, Transition};
use adversarial_traffic::seed;

fn main() {
    let alpha = 0.6;
    let mut buffer = ReplayBuffer::new(8, alpha);
    for (i, p) in [0.1, 0.5, 1.0, 2.0, 4.0, 8.0].into_iter().enumerate() {
        buffer.push_with_priority(Transition {
            obs: vec![i as f64],
            action: 0,
            reward: 0.0,
            next_obs: vec![i as f64],
            done: false,
            priority: p,
        });
    }
    let mut rng = seed::stream(0, "example", &[]);
    let draws = 100_000;
    let mut counts = vec![0usize; buffer.len()];
    for _ in 0..draws {
        counts[buffer.sample_index(&mut rng)] += 1;
    }
    println!("slot  priority  P(i)     observed");
    for (i, c) in counts.iter().enumerate() {
        println!(
            "{i:>4}  {:>8.1}  {:.4}   {:.4}",
            buffer.get(i).priority,
            buffer.probability(i),
            *c as f64 / draws as f64
        );
    }
    let batch = buffer.sample(6, 0.4, &mut rng);
    println!("batch indices {:?}", batch.indices);
    println!("IS weights    {:?}", batch.weights.iter().map(|w| format!("{w:.3}")).collect::<Vec<_>>());
}
