/// Dense adaptive-moment optimizer over an f32 parameter vector, with f64
/// moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam { m: vec![0.0; len], v: vec![0.0; len], t: 0, lr, beta1, beta2, eps }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f32], grad: &[f64]) {
        assert_eq!(params.len(), grad.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            let m = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            let v = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            self.m[i] = m;
            self.v[i] = v;
            if m != 0.0 {
                let update = self.lr * (m / c1) / ((v / c2).sqrt() + self.eps);
                params[i] = (f64::from(params[i]) - update) as f32;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = [1.0f32, -1.0, 0.5];
        let mut opt = Adam::new(3, 0.1, 0.9, 0.999, 1e-8);
        opt.step(&mut p, &[2.0, -3.0, 0.0]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-6);
        assert_eq!(p[2], 0.5);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = [3.0f32];
        let mut opt = Adam::new(1, 0.05, 0.9, 0.999, 1e-8);
        for _ in 0..2000 {
            let g = 2.0 * f64::from(p[0]);
            opt.step(&mut p, &[g]);
        }
        assert!(p[0].abs() < 1e-2);
    }
}
