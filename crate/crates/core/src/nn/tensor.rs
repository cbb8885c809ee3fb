use super::NnError;

/// Dense row-major array of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "tensor extents must be positive: {shape:?}");
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NnError> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) || shape.iter().product::<usize>() != data.len() {
            return Err(NnError::Shape {
                layer: "tensor".into(),
                expected: shape,
                actual: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }
}

/// All trainable tensors of a network, in canonical layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub tensors: Vec<Tensor>,
}

impl ParameterSet {
    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.tensors.iter().map(|t| t.shape().to_vec()).collect()
    }

    pub fn same_shapes(&self, other_shapes: &[Vec<usize>]) -> bool {
        self.tensors.len() == other_shapes.len()
            && self.tensors.iter().zip(other_shapes).all(|(t, s)| t.shape() == s.as_slice())
    }

    /// Parameters flattened in canonical order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }
}

/// Gradient of a scalar loss with respect to every parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub tensors: Vec<Tensor>,
}

impl GradientSet {
    pub fn zeros_like(params: &ParameterSet) -> Self {
        Self { tensors: params.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect() }
    }

    pub fn check_against(&self, params: &ParameterSet) -> Result<(), NnError> {
        if params.tensors.len() != self.tensors.len() {
            return Err(NnError::Shape {
                layer: "gradient set".into(),
                expected: vec![params.tensors.len()],
                actual: vec![self.tensors.len()],
            });
        }
        for (k, (p, g)) in params.tensors.iter().zip(&self.tensors).enumerate() {
            if p.shape() != g.shape() {
                return Err(NnError::Shape {
                    layer: format!("gradient tensor {k}"),
                    expected: p.shape().to_vec(),
                    actual: g.shape().to_vec(),
                });
            }
        }
        Ok(())
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors.iter().flat_map(|t| t.data().iter()).map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        for t in &mut self.tensors {
            t.data_mut().iter_mut().for_each(|g| *g *= k);
        }
    }

    /// Rescales so the global norm is at most `max_norm`; returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data().iter().all(|g| g.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::from_vec(vec![2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::from_vec(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::from_vec(vec![0], vec![]).is_err());
    }

    #[test]
    fn clipping_preserves_direction() {
        let mut g = GradientSet { tensors: vec![Tensor::from_vec(vec![2], vec![3.0, 4.0]).unwrap()] };
        assert_eq!(g.clip_global_norm(1.0), 5.0);
        let d = g.tensors[0].data();
        assert!((d[0] - 0.6).abs() < 1e-15 && (d[1] - 0.8).abs() < 1e-15);
        assert_eq!(g.clip_global_norm(10.0), 1.0);
    }
}
