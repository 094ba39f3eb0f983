use super::mlp::{Gradients, Mlp};
use serde::{Deserialize, Serialize};

/// Adam optimizer state: first/second moment estimates shaped like the
/// network parameters, plus the step counter for bias correction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m: Gradients,
    pub v: Gradients,
}

impl AdamState {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }
}

fn update_slice(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        // Epsilon sits outside the square root.
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// One Adam update over every parameter of the network.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState) {
    state.step += 1;
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);
    for l in 0..net.weights.len() {
        update_slice(
            net.weights[l].as_mut_slice(),
            grads.weights[l].as_slice(),
            state.m.weights[l].as_mut_slice(),
            state.v.weights[l].as_mut_slice(),
            state.learning_rate,
            state.beta1,
            state.beta2,
            state.epsilon,
            bc1,
            bc2,
        );
        update_slice(
            &mut net.biases[l],
            &grads.biases[l],
            &mut state.m.biases[l],
            &mut state.v.biases[l],
            state.learning_rate,
            state.beta1,
            state.beta2,
            state.epsilon,
            bc1,
            bc2,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::{init_mlp, OutputActivation};
    use crate::nn::rng::RngStream;

    fn tiny_net() -> Mlp {
        init_mlp(&[2, 2], OutputActivation::Linear, &mut RngStream::new(7)).unwrap()
    }

    #[test]
    fn first_step_has_closed_form_size() {
        // With bias correction, step one gives m_hat = g and v_hat = g^2, so
        // every parameter moves by -lr * g / (|g| + eps). For g = 1 that is
        // exactly -lr / (1 + eps).
        let mut net = tiny_net();
        let before = net.clone();
        let mut grads = Gradients::zeros_like(&net);
        for w in &mut grads.weights {
            for v in w.as_mut_slice() {
                *v = 1.0;
            }
        }
        for b in &mut grads.biases {
            for v in b {
                *v = 1.0;
            }
        }
        let mut state = AdamState::new(&net, 1e-4);
        adam_step(&mut net, &grads, &mut state);
        let expected: f64 = -1e-4 / (1.0 + 1e-8);
        assert!((expected + 9.9999e-5).abs() < 1e-8);
        for (w, wb) in net.weights.iter().zip(&before.weights) {
            for (a, b) in w.as_slice().iter().zip(wb.as_slice()) {
                assert!(((a - b) - expected).abs() < 1e-15);
            }
        }
        for (b, bb) in net.biases.iter().zip(&before.biases) {
            for (a, b0) in b.iter().zip(bb) {
                assert!(((a - b0) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn first_step_size_is_gradient_scale_invariant_above_epsilon() {
        // -lr * g / (|g| + eps) is within eps/|g| of -lr whenever |g| >> eps.
        for &g in &[1e-3, 1.0, 1e6] {
            let mut net = tiny_net();
            let before = net.weights[0].as_slice()[0];
            let mut grads = Gradients::zeros_like(&net);
            grads.weights[0].as_mut_slice()[0] = g;
            let mut state = AdamState::new(&net, 1e-4);
            adam_step(&mut net, &grads, &mut state);
            let delta = net.weights[0].as_slice()[0] - before;
            assert!(
                (delta + 1e-4).abs() < 1e-4 * (1e-8 / g) * 1.01 + 1e-15,
                "gradient {g}: delta {delta}"
            );
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op_for_parameters() {
        let mut net = tiny_net();
        let before = net.clone();
        let grads = Gradients::zeros_like(&net);
        let mut state = AdamState::new(&net, 1e-4);
        for _ in 0..5 {
            adam_step(&mut net, &grads, &mut state);
        }
        for (w, wb) in net.weights.iter().zip(&before.weights) {
            assert_eq!(w.as_slice(), wb.as_slice());
        }
        assert_eq!(state.step, 5);
    }

    #[test]
    fn updates_are_deterministic() {
        let run = || {
            let mut net = tiny_net();
            let mut state = AdamState::new(&net, 1e-3);
            let mut rng = RngStream::new(99);
            for _ in 0..50 {
                let mut grads = Gradients::zeros_like(&net);
                for w in &mut grads.weights {
                    for v in w.as_mut_slice() {
                        *v = rng.normal();
                    }
                }
                adam_step(&mut net, &grads, &mut state);
            }
            net
        };
        let a = run();
        let b = run();
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert_eq!(wa.as_slice(), wb.as_slice());
        }
    }

    #[test]
    fn constant_gradient_descends_a_quadratic() {
        // Minimise f(w) = (w - 3)^2 on a single scalar parameter.
        let mut net = tiny_net();
        for v in net.weights[0].as_mut_slice() {
            *v = 0.0;
        }
        let mut state = AdamState::new(&net, 1e-2);
        for _ in 0..2000 {
            let w = net.weights[0].as_slice()[0];
            let mut grads = Gradients::zeros_like(&net);
            grads.weights[0].as_mut_slice()[0] = 2.0 * (w - 3.0);
            adam_step(&mut net, &grads, &mut state);
        }
        let w = net.weights[0].as_slice()[0];
        assert!((w - 3.0).abs() < 1e-3, "converged to {w}");
    }
}
