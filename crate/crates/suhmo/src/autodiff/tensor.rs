//! Dense row-major real arrays of rank 0..=3.

use std::fmt;

use crate::error::SuhmoError;

/// Dense array with explicit shape. Rank 0 (scalar) through rank 3.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    data: Vec<f64>,
    shape: Vec<usize>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 8 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl Tensor {
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Self {
        assert!(shape.len() <= 3, "rank > 3 unsupported, got {shape:?}");
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor { data, shape: shape.to_vec() }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::new(vec![0.0; shape.iter().product()], shape)
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::new(vec![v], &[])
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        Tensor::new(vec![v; shape.iter().product()], shape)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1 && self.shape.len() <= 1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on non-scalar {:?}", self.shape);
        self.data[0]
    }

    pub fn reshaped(&self, shape: &[usize]) -> Tensor {
        Tensor::new(self.data.clone(), shape)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::new(self.data.iter().map(|&v| f(v)).collect(), &self.shape)
    }

    /// Rows and columns of the trailing two axes; leading batch size (1 for rank <= 2).
    pub fn mat_dims(&self) -> (usize, usize, usize) {
        match self.shape.as_slice() {
            [m, n] => (1, *m, *n),
            [b, m, n] => (*b, *m, *n),
            s => panic!("mat_dims on rank-{} tensor", s.len()),
        }
    }

    pub fn check_same_shape(&self, other: &Tensor, ctx: &str) -> Result<(), SuhmoError> {
        if self.shape != other.shape {
            return Err(SuhmoError::ShapeMismatch {
                primitive: ctx.to_string(),
                shapes: format!("{:?} vs {:?}", self.shape, other.shape),
            });
        }
        Ok(())
    }
}

/// C = A @ B on the trailing two axes, with an optional shared batch axis.
/// Supports (m,k)x(k,n), (b,m,k)x(b,k,n) and (b,m,k)x(k,n).
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, SuhmoError> {
    let err = || SuhmoError::ShapeMismatch {
        primitive: "matmul".to_string(),
        shapes: format!("{:?} x {:?}", a.shape, b.shape),
    };
    if a.rank() < 2 || b.rank() < 2 {
        return Err(err());
    }
    let (ba, m, k) = a.mat_dims();
    let (bb, kb, n) = b.mat_dims();
    if kb != k || (bb != ba && bb != 1 && ba != 1) {
        return Err(err());
    }
    let batch = ba.max(bb);
    let mut out = vec![0.0; batch * m * n];
    for bi in 0..batch {
        let ao = if ba == 1 { 0 } else { bi * m * k };
        let bo = if bb == 1 { 0 } else { bi * k * n };
        let co = bi * m * n;
        // i-k-j loop order keeps the inner stride unit.
        for i in 0..m {
            for kk in 0..k {
                let av = a.data[ao + i * k + kk];
                if av == 0.0 {
                    continue;
                }
                let brow = &b.data[bo + kk * n..bo + kk * n + n];
                let crow = &mut out[co + i * n..co + i * n + n];
                for j in 0..n {
                    crow[j] += av * brow[j];
                }
            }
        }
    }
    let shape: Vec<usize> = if a.rank() == 3 || b.rank() == 3 {
        vec![batch, m, n]
    } else {
        vec![m, n]
    };
    Ok(Tensor::new(out, &shape))
}

/// Swap the trailing two axes.
pub fn transpose(a: &Tensor) -> Tensor {
    let (b, m, n) = a.mat_dims();
    let mut out = vec![0.0; a.numel()];
    for bi in 0..b {
        for i in 0..m {
            for j in 0..n {
                out[bi * m * n + j * m + i] = a.data[bi * m * n + i * n + j];
            }
        }
    }
    let shape: Vec<usize> = if a.rank() == 3 { vec![b, n, m] } else { vec![n, m] };
    Tensor::new(out, &shape)
}
