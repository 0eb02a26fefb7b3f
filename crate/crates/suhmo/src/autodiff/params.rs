//! Named trainable leaves.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor;

/// Gradients keyed by parameter name.
pub type GradMap = BTreeMap<String, Tensor>;

/// Map from hierarchical name to trainable array. Iteration order is
/// lexicographic, so walks over the set are deterministic.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    leaves: BTreeMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        let name = name.into();
        let prev = self.leaves.insert(name.clone(), value);
        assert!(prev.is_none(), "duplicate parameter {name:?}");
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.leaves.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.leaves.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.leaves.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.leaves.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.leaves.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.leaves.keys()
    }

    /// Uniform init in [-lim, lim] with lim = 1/sqrt(fan_in), fan_in = first dim.
    pub fn insert_uniform(&mut self, name: impl Into<String>, shape: &[usize], rng: &mut ChaCha8Rng) {
        let fan_in = shape.first().copied().unwrap_or(1).max(1);
        let lim = 1.0 / (fan_in as f64).sqrt();
        self.insert_uniform_lim(name, shape, lim, rng);
    }

    pub fn insert_uniform_lim(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        lim: f64,
        rng: &mut ChaCha8Rng,
    ) {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-lim..=lim)).collect();
        self.insert(name, Tensor::new(data, shape));
    }

    pub fn insert_zeros(&mut self, name: impl Into<String>, shape: &[usize]) {
        self.insert(name, Tensor::zeros(shape));
    }
}

impl FromIterator<(String, Tensor)> for ParamSet {
    fn from_iter<I: IntoIterator<Item = (String, Tensor)>>(iter: I) -> Self {
        ParamSet { leaves: iter.into_iter().collect() }
    }
}
