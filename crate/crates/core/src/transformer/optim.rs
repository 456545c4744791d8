use super::linalg::Real;
use super::model::ParamBlock;
use super::train::TrainSpec;

/// Adam with decoupled weight decay. Decay applies only to blocks flagged
/// with [`ParamBlock::decay`] (weight matrices and embeddings).
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamW {
    pub fn new(n: usize, spec: &TrainSpec) -> Self {
        AdamW {
            lr: spec.lr,
            beta1: spec.beta1,
            beta2: spec.beta2,
            eps: spec.eps,
            weight_decay: spec.weight_decay,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// One update; the gradient may be in a narrower precision than the
    /// parameters.
    pub fn step<G: Real>(&mut self, params: &mut [f64], grads: &[G], blocks: &[ParamBlock]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for b in blocks {
            let wd = if b.decay { lr * self.weight_decay } else { 0.0 };
            let r = b.range();
            let it = params[r.clone()]
                .iter_mut()
                .zip(&grads[r.clone()])
                .zip(&mut self.m[r.clone()])
                .zip(&mut self.v[r]);
            for (((p, &g), m), v) in it {
                let g = g.widen();
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *p -= wd * *p + lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::model::Init;
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let blocks = vec![
            ParamBlock { name: "w".into(), offset: 0, rows: 1, cols: 2, init: Init::Normal, decay: true },
            ParamBlock { name: "b".into(), offset: 2, rows: 1, cols: 1, init: Init::Zeros, decay: false },
        ];
        let spec = TrainSpec { weight_decay: 0.5, ..TrainSpec::default() };
        let mut opt = AdamW::new(3, &spec);
        let mut p = vec![1.0, -2.0, 3.0];
        opt.step(&mut p, &[0.5, -4.0, 1e-3], &blocks);
        let lr = spec.lr;
        assert!((p[0] - (1.0 - lr * 0.5 - lr)).abs() < 1e-10);
        assert!((p[1] - (-2.0 + lr * 0.5 * 2.0 + lr)).abs() < 1e-10);
        assert!((p[2] - (3.0 - lr)).abs() < 1e-8);
    }
}
