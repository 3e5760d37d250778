use std::collections::HashMap;

use super::Matrix;
use crate::error::{Error, Result};

/// Handle to one tensor inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Gradient accumulators laid out parallel to a [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(Vec<Matrix>);

impl Gradients {
    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.0[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.0[id.0]
    }

    pub fn zero(&mut self) {
        self.0.iter_mut().for_each(|g| g.fill(0.0));
    }

    /// Element-wise sum, in parameter order.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.0 {
            g.as_mut_slice().iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Matrix> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Matrix::is_finite)
    }
}

/// Named weight tensors with gradient accumulators of identical shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Matrix>,
    grads: Gradients,
    index: HashMap<String, ParamId>,
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
            grads: Gradients(Vec::new()),
            index: HashMap::new(),
        }
    }

    /// Registers a tensor. Panics on a duplicate name, which is a programming error.
    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter name `{name}`"
        );
        let id = ParamId(self.values.len());
        self.grads.0.push(Matrix::zeros(value.rows(), value.cols()));
        self.values.push(value);
        self.index.insert(name.clone(), id);
        self.names.push(name);
        id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total scalar count.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn grads(&self) -> &Gradients {
        &self.grads
    }

    pub fn grads_mut(&mut self) -> &mut Gradients {
        &mut self.grads
    }

    pub fn zero_grads(&mut self) {
        self.grads.zero();
    }

    /// Fresh zeroed accumulator matching this set's shapes.
    pub fn zeroed_gradients(&self) -> Gradients {
        Gradients(
            self.values
                .iter()
                .map(|v| Matrix::zeros(v.rows(), v.cols()))
                .collect(),
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Matrix)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    /// Disjoint borrow of values and gradients.
    pub(crate) fn split_mut(&mut self) -> (&mut [Matrix], &[Matrix]) {
        (&mut self.values, &self.grads.0)
    }

    /// Replaces a tensor's contents; shape must match.
    pub fn load(&mut self, name: &str, value: Matrix) -> Result<()> {
        let id = self
            .id(name)
            .ok_or_else(|| Error::Format(format!("unknown parameter `{name}`")))?;
        let slot = &mut self.values[id.0];
        if slot.shape() != value.shape() {
            return Err(Error::Format(format!(
                "parameter `{name}` has shape {:?}, file has {:?}",
                slot.shape(),
                value.shape()
            )));
        }
        *slot = value;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(Matrix::is_finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grads_follow_shapes() {
        let mut p = ParamSet::new();
        let a = p.add("a", Matrix::zeros(2, 3));
        let b = p.add("b", Matrix::zeros(1, 4));
        assert_eq!(p.grads().get(a).shape(), (2, 3));
        assert_eq!(p.grads().get(b).shape(), (1, 4));
        assert_eq!(p.num_scalars(), 10);
        assert_eq!(p.id("b"), Some(b));
        assert_eq!(p.name(a), "a");
    }

    #[test]
    #[should_panic(expected = "duplicate")]
    fn names_are_unique() {
        let mut p = ParamSet::new();
        p.add("w", Matrix::zeros(1, 1));
        p.add("w", Matrix::zeros(1, 1));
    }

    #[test]
    fn load_checks_shape() {
        let mut p = ParamSet::new();
        p.add("w", Matrix::zeros(2, 2));
        assert!(p.load("w", Matrix::zeros(2, 2)).is_ok());
        assert!(p.load("w", Matrix::zeros(1, 2)).is_err());
        assert!(p.load("nope", Matrix::zeros(2, 2)).is_err());
    }
}
