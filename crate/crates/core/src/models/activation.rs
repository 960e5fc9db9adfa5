use serde::{Deserialize, Serialize};

/// Activation functions available to the hidden layers and output heads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Tanh,
    Identity,
    Softmax,
    SquareModulus,
    Relu,
    Sigmoid,
}

impl ActivationKind {
    /// Whether the function maps any vector onto a probability vector.
    pub fn is_normalizing(self) -> bool {
        matches!(self, ActivationKind::Softmax | ActivationKind::SquareModulus)
    }

    pub fn is_elementwise(self) -> bool {
        !self.is_normalizing()
    }

    /// Scalar value of an element-wise activation.
    #[inline]
    pub fn scalar(self, x: f64) -> f64 {
        match self {
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Identity => x,
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Softmax | ActivationKind::SquareModulus => {
                panic!("{self:?} is not an element-wise activation")
            }
        }
    }

    /// Derivative expressed through the activation's output `y = f(x)`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            ActivationKind::Tanh => 1.0 - y * y,
            ActivationKind::Identity => 1.0,
            ActivationKind::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Sigmoid => y * (1.0 - y),
            ActivationKind::Softmax | ActivationKind::SquareModulus => {
                panic!("{self:?} is not an element-wise activation")
            }
        }
    }

    /// Derivative with respect to the input `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        self.derivative_from_output(self.scalar(x))
    }
}

/// Logistic sigmoid, stable for large `|z|`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Apply an activation to a vector.
///
/// Softmax subtracts the maximum before exponentiating. The square modulus of the
/// zero vector is defined as the uniform vector.
pub fn activation_apply(kind: ActivationKind, r: &[f64]) -> Vec<f64> {
    match kind {
        ActivationKind::Softmax => {
            let m = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = r.iter().map(|&x| (x - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|x| x / s).collect()
        }
        ActivationKind::SquareModulus => {
            let s: f64 = r.iter().map(|x| x * x).sum();
            if s == 0.0 {
                let u = 1.0 / r.len() as f64;
                return vec![u; r.len()];
            }
            if !s.is_finite() {
                // Rescale by the largest magnitude so the squares cannot overflow.
                let m = r.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
                let t: Vec<f64> = r.iter().map(|x| x / m).collect();
                return activation_apply(kind, &t);
            }
            r.iter().map(|x| x * x / s).collect()
        }
        k => r.iter().map(|&x| k.scalar(x)).collect(),
    }
}

/// Log of the conditional component selected by `spin`, plus the phase contributed
/// by a negative component, for a two-level output head.
///
/// For normalizing outputs this is `ln g(z)_spin` with no extra phase. For the other
/// kinds the component may be negative: its magnitude enters the probability and its
/// sign contributes `pi` to the phase.
#[inline]
pub fn log_conditional(g: ActivationKind, z: [f64; 2], spin: u8) -> (f64, f64) {
    let s = spin as usize;
    match g {
        ActivationKind::Softmax => {
            let m = z[0].max(z[1]);
            let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
            (z[s] - lse, 0.0)
        }
        ActivationKind::SquareModulus => {
            let n2 = z[0] * z[0] + z[1] * z[1];
            if n2 == 0.0 {
                return (-std::f64::consts::LN_2, 0.0);
            }
            if !n2.is_finite() {
                let m = z[0].abs().max(z[1].abs());
                return log_conditional(g, [z[0] / m, z[1] / m], spin);
            }
            (2.0 * z[s].abs().ln() - n2.ln(), 0.0)
        }
        k => {
            let v = k.scalar(z[s]);
            let extra = if v < 0.0 { std::f64::consts::PI } else { 0.0 };
            (v.abs().ln(), extra)
        }
    }
}

/// Gradient of `ln |g(z)_spin|` with respect to the two logits.
#[inline]
pub fn log_conditional_grad(g: ActivationKind, z: [f64; 2], spin: u8) -> [f64; 2] {
    let s = spin as usize;
    match g {
        ActivationKind::Softmax => {
            let m = z[0].max(z[1]);
            let e0 = (z[0] - m).exp();
            let e1 = (z[1] - m).exp();
            let p = [e0 / (e0 + e1), e1 / (e0 + e1)];
            let mut d = [-p[0], -p[1]];
            d[s] += 1.0;
            d
        }
        ActivationKind::SquareModulus => {
            let n2 = z[0] * z[0] + z[1] * z[1];
            if n2 == 0.0 || z[s] == 0.0 {
                return [0.0, 0.0];
            }
            let mut d = [-2.0 * z[0] / n2, -2.0 * z[1] / n2];
            d[s] += 2.0 / z[s];
            d
        }
        k => {
            let v = k.scalar(z[s]);
            let mut d = [0.0, 0.0];
            if v != 0.0 {
                d[s] = k.derivative(z[s]) / v;
            }
            d
        }
    }
}
