//! Named parameter blocks shared by optimizers, gradient checks and
//! checkpoints.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BlockInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

impl BlockInfo {
    pub fn new(name: impl Into<String>, shape: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            shape,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Anything that exposes its trainable values as an ordered list of flat
/// blocks. Gradient containers implement it with the same names and shapes
/// as the parameters they mirror.
pub trait Parameterized {
    fn block_info(&self) -> Vec<BlockInfo>;
    fn blocks(&self) -> Vec<&[f64]>;
    fn blocks_mut(&mut self) -> Vec<&mut [f64]>;

    fn n_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total = self.n_params();
        if flat.len() != total {
            return Err(Error::Dimension {
                expected: total,
                actual: flat.len(),
                context: "flat parameter vector".into(),
            });
        }
        let mut offset = 0;
        for block in self.blocks_mut() {
            let n = block.len();
            block.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn zero(&mut self) {
        for block in self.blocks_mut() {
            block.fill(0.0);
        }
    }

    fn all_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Checks that two parameterized values have identical block layouts.
pub fn check_same_layout(a: &[BlockInfo], b: &[BlockInfo]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
            context: "number of parameter blocks".into(),
        });
    }
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return Err(Error::invalid(format!(
                "parameter block mismatch: {} {:?} vs {} {:?}",
                x.name, x.shape, y.name, y.shape
            )));
        }
    }
    Ok(())
}
