//! Fits the Q-network MLP to a toy regression with Adam, then round-trips
//! the weights through the binary blob format.

use adversarial_traffic::nn::{adam_step, AdamParams, AdamState, Mlp};
use adversarial_traffic::seed;
use rand::Rng;

fn main() {
    let mut rng = seed::stream(0, "example", &[]);
    let mut net = Mlp::new(&[2, 32, 32, 1], &mut rng);
    let mut adam = AdamState::new(&net, AdamParams { lr: 1e-2, ..AdamParams::default() });
    let target = |x: &[f64]| (3.0 * x[0]).sin() * x[1];

    let batch = 64;
    for it in 0..=2000 {
        let xs: Vec<f64> = (0..2 * batch).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ys: Vec<f64> = xs.chunks(2).map(target).collect();
        let mut loss = 0.0;
        let grads = net
            .forward_backward(&xs, batch, |out| {
                out.iter()
                    .zip(&ys)
                    .map(|(o, y)| {
                        loss += (o - y).powi(2) / batch as f64;
                        2.0 * (o - y) / batch as f64
                    })
                    .collect()
            })
            .unwrap();
        adam_step(&mut net, &grads, &mut adam).unwrap();
        if it % 400 == 0 {
            println!("iteration {it:>4}: mse {loss:.5}");
        }
    }

    let blob = net.save_weights();
    let back = Mlp::load_weights(&blob).unwrap();
    println!("blob: {} bytes, round trip exact: {}", blob.as_bytes().len(), back == net);
}
