use crate::Scalar;

/// Parameter gradients as a list of flat blocks, ordered like the owning
/// model's parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub blocks: Vec<Vec<T>>,
}

impl<T: Scalar> Grads<T> {
    pub fn zeros(shapes: &[usize]) -> Self {
        Grads {
            blocks: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn shapes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn add_assign(&mut self, other: &Grads<T>) {
        debug_assert_eq!(self.blocks.len(), other.blocks.len());
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, k: T) {
        for b in &mut self.blocks {
            for x in b.iter_mut() {
                *x *= k;
            }
        }
    }

    pub fn norm(&self) -> T {
        self.blocks
            .iter()
            .flat_map(|b| b.iter())
            .map(|&x| x * x)
            .sum::<T>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.blocks.iter().flat_map(|b| b.iter()).all(|x| x.is_finite())
    }

    /// Rescales so the global L2 norm is at most `max_norm`; returns the norm
    /// before clipping.
    pub fn clip_norm(&mut self, max_norm: T) -> T {
        let n = self.norm();
        if n > max_norm && n > T::zero() {
            self.scale(max_norm / n);
        }
        n
    }

    pub fn flatten(&self) -> Vec<T> {
        self.blocks.iter().flat_map(|b| b.iter().copied()).collect()
    }

    /// Appends the blocks of `other` after the blocks of `self`.
    pub fn concat(mut self, other: Grads<T>) -> Self {
        self.blocks.extend(other.blocks);
        self
    }
}
