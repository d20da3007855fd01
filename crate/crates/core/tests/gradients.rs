use nalgebra::DMatrix;
use rmtkd::distill::{combined_loss, DEFAULT_EPSILON_PROB};
use rmtkd::network::{Backprop, DenseLayer, Network};
use rmtkd::rng::SeededRng;

const STEP: f64 = 1e-5;

fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gaussian())
}

fn loss(net: &Network, batch: &DMatrix<f64>, teacher: &DMatrix<f64>, labels: &[usize], alpha: f64) -> f64 {
    let logits = net.logits(batch).unwrap();
    combined_loss(&logits, Some(teacher), labels, alpha, DEFAULT_EPSILON_PROB)
        .unwrap()
        .loss
}

fn perturbed(net: &Network, layer: usize, entry: Entry, delta: f64) -> Network {
    let mut layers: Vec<DenseLayer> = net.layers().to_vec();
    match entry {
        Entry::Weight(r, c) => layers[layer].weights[(r, c)] += delta,
        Entry::Bias(r) => layers[layer].bias.as_mut().unwrap()[r] += delta,
    }
    Network::new(layers, net.input_dim(), net.num_classes()).unwrap()
}

#[derive(Clone, Copy)]
enum Entry {
    Weight(usize, usize),
    Bias(usize),
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Largest per-tensor relative error between backprop and central
/// differences of the combined loss.
fn worst_error(net: &Network, alpha: f64, seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    let batch_size = 6;
    let batch = random_matrix(net.input_dim(), batch_size, &mut rng);
    let teacher = random_matrix(net.num_classes(), batch_size, &mut rng) * 2.0;
    let labels: Vec<usize> = (0..batch_size).map(|_| rng.below(net.num_classes())).collect();

    let mut bp = Backprop::new();
    let logits = bp.forward(net, &batch).unwrap();
    let out = combined_loss(&logits, Some(&teacher), &labels, alpha, DEFAULT_EPSILON_PROB).unwrap();
    let grads = bp.backward(net, &out.grad).unwrap();

    let numeric = |layer: usize, entry: Entry| {
        let up = loss(&perturbed(net, layer, entry, STEP), &batch, &teacher, &labels, alpha);
        let down = loss(&perturbed(net, layer, entry, -STEP), &batch, &teacher, &labels, alpha);
        (up - down) / (2.0 * STEP)
    };

    let mut worst: f64 = 0.0;
    for (i, layer) in net.layers().iter().enumerate() {
        let Some(g) = &grads.layers[i] else {
            assert!(layer.frozen);
            continue;
        };
        let (rows, cols) = layer.weights.shape();
        let mut fd = Vec::with_capacity(rows * cols);
        let mut an = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                fd.push(numeric(i, Entry::Weight(r, c)));
                an.push(g.weights[(r, c)]);
            }
        }
        worst = worst.max(relative_error(&an, &fd));
        if let Some(gb) = &g.bias {
            let fd: Vec<f64> = (0..gb.len()).map(|r| numeric(i, Entry::Bias(r))).collect();
            worst = worst.max(relative_error(gb.as_slice(), &fd));
        }
    }
    worst
}

#[test]
fn network_and_loss_gradients_match_finite_differences() {
    let shapes: [&[usize]; 4] = [&[], &[32], &[32, 32], &[16, 32]];
    for (s, hidden) in shapes.iter().enumerate() {
        for &alpha in &[0.0, 0.3, 0.5, 1.0] {
            for seed in 0..2u64 {
                let net = Network::mlp(12, hidden, 5, 100 * s as u64 + seed).unwrap();
                let err = worst_error(&net, alpha, seed);
                assert!(err <= 1e-4, "hidden {hidden:?} alpha {alpha} seed {seed}: {err}");
            }
        }
    }
}

#[test]
fn gradients_flow_through_a_frozen_projection() {
    let base = Network::mlp(10, &[32, 32], 4, 7).unwrap();
    let mut rng = SeededRng::new(8);
    let q = random_matrix(32, 32, &mut rng).qr().q();
    let p = q.rows(0, 9).into_owned();
    let mut layers = base.layers().to_vec();
    let downstream = &layers[2].weights * p.transpose();
    layers[2].weights = downstream;
    layers.insert(2, DenseLayer::projection(p));
    let net = Network::new(layers, 10, 4).unwrap();
    for &alpha in &[0.0, 0.5, 1.0] {
        let err = worst_error(&net, alpha, 3);
        assert!(err <= 1e-4, "alpha {alpha}: {err}");
    }
}

#[test]
fn logit_gradient_matches_finite_differences() {
    let mut rng = SeededRng::new(5);
    let (classes, batch) = (7, 4);
    let new = random_matrix(classes, batch, &mut rng) * 2.0;
    let old = random_matrix(classes, batch, &mut rng) * 2.0;
    let labels = vec![0, 3, 6, 2];
    for &alpha in &[0.0, 0.25, 0.5, 1.0] {
        let out = combined_loss(&new, Some(&old), &labels, alpha, DEFAULT_EPSILON_PROB).unwrap();
        let mut fd = Vec::new();
        for c in 0..batch {
            for r in 0..classes {
                let mut up = new.clone();
                up[(r, c)] += STEP;
                let mut down = new.clone();
                down[(r, c)] -= STEP;
                let f = |m: &DMatrix<f64>| {
                    combined_loss(m, Some(&old), &labels, alpha, DEFAULT_EPSILON_PROB)
                        .unwrap()
                        .loss
                };
                fd.push((f(&up) - f(&down)) / (2.0 * STEP));
            }
        }
        let err = relative_error(out.grad.as_slice(), &fd);
        assert!(err <= 1e-4, "alpha {alpha}: {err}");
    }
}
