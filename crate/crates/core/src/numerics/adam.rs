//! Adam with decoupled weight decay.

use serde::{Deserialize, Serialize};

use super::params::{check_same_layout, Parameterized};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators mirroring a parameter layout.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new<P: Parameterized + ?Sized>(config: AdamConfig, params: &P) -> Self {
        let sizes: Vec<usize> = params.blocks().iter().map(|b| b.len()).collect();
        Self {
            config,
            step: 0,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update:
    /// `p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)`.
    ///
    /// Non-finite gradients abort the step before any parameter changes.
    pub fn step<P, G>(&mut self, params: &mut P, grads: &G) -> Result<()>
    where
        P: Parameterized + ?Sized,
        G: Parameterized + ?Sized,
    {
        check_same_layout(&params.block_info(), &grads.block_info())?;
        let grad_blocks = grads.blocks();
        if grad_blocks.len() != self.first.len()
            || grad_blocks
                .iter()
                .zip(&self.first)
                .any(|(g, m)| g.len() != m.len())
        {
            return Err(Error::invalid("optimizer state does not match parameters"));
        }
        for (b, block) in grad_blocks.iter().enumerate() {
            if let Some(i) = block.iter().position(|v| !v.is_finite()) {
                let name = &grads.block_info()[b].name;
                return Err(Error::NonFinite(format!(
                    "gradient {name}[{i}] = {}",
                    block[i]
                )));
            }
        }

        self.step += 1;
        let AdamConfig {
            lr,
            weight_decay,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);

        for (((p_block, g_block), m_block), v_block) in params
            .blocks_mut()
            .into_iter()
            .zip(grad_blocks)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for (((p, &g), m), v) in p_block
                .iter_mut()
                .zip(g_block)
                .zip(m_block.iter_mut())
                .zip(v_block.iter_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= lr * (m_hat / (v_hat.sqrt() + eps) + weight_decay * *p);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::params::BlockInfo;

    #[derive(Clone)]
    struct Flat(Vec<f64>);

    impl Parameterized for Flat {
        fn block_info(&self) -> Vec<BlockInfo> {
            vec![BlockInfo::new("x", vec![self.0.len()])]
        }
        fn blocks(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn zero_grads_without_decay_leave_params() {
        let mut p = Flat(vec![1.0, -2.0, 3.0]);
        let g = Flat(vec![0.0; 3]);
        let mut opt = OptimizerState::new(AdamConfig::new(0.1, 0.0), &p);
        for _ in 0..5 {
            opt.step(&mut p, &g).unwrap();
        }
        assert_eq!(p.0, vec![1.0, -2.0, 3.0]);
        assert_eq!(opt.step_count(), 5);
    }

    #[test]
    fn zero_grads_with_decay_scale_params() {
        let mut p = Flat(vec![1.0, -2.0, 3.0]);
        let g = Flat(vec![0.0; 3]);
        let mut opt = OptimizerState::new(AdamConfig::new(0.1, 0.5), &p);
        opt.step(&mut p, &g).unwrap();
        for (a, b) in p.0.iter().zip([1.0, -2.0, 3.0]) {
            assert!((a - b * (1.0 - 0.1 * 0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn converges_on_one_dimensional_quadratic() {
        // loss = (x - 0.5)^2 from x = 0
        let target = 0.5;
        let mut p = Flat(vec![0.0]);
        let mut opt = OptimizerState::new(AdamConfig::new(0.01, 0.0), &p);
        // reference: the bare update rule, unrolled by hand
        let (mut x, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=200 {
            let g = Flat(vec![2.0 * (p.0[0] - target)]);
            opt.step(&mut p, &g).unwrap();
            let gr = 2.0 * (x - target);
            m = 0.9 * m + 0.1 * gr;
            v = 0.999 * v + 0.001 * gr * gr;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 0.01 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((p.0[0] - x).abs() < 1e-12);
        assert!((p.0[0] - target).abs() < 1e-2, "{}", p.0[0]);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = Flat(vec![1.0, 2.0]);
        let g = Flat(vec![0.0, f64::NAN]);
        let mut opt = OptimizerState::new(AdamConfig::new(0.1, 0.0), &p);
        assert!(matches!(opt.step(&mut p, &g), Err(Error::NonFinite(_))));
        assert_eq!(p.0, vec![1.0, 2.0]);
        assert_eq!(opt.step_count(), 0);
    }
}
