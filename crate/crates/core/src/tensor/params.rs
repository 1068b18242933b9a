use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::{Real, Result, Tensor, TensorError};

/// Which half of the network a parameter belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Partition {
    Encoder,
    Decoder,
    Shared,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Encoder => "encoder",
            Partition::Decoder => "decoder",
            Partition::Shared => "shared",
        })
    }
}

impl FromStr for Partition {
    type Err = TensorError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "encoder" => Ok(Partition::Encoder),
            "decoder" => Ok(Partition::Decoder),
            "shared" => Ok(Partition::Shared),
            other => Err(TensorError::Invalid(format!("unknown partition `{other}`"))),
        }
    }
}

/// A parameter with its gradient accumulator and Adam moments.
#[derive(Clone, Debug)]
pub struct Param<T: Real> {
    pub name: String,
    pub partition: Partition,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub first_moment: Tensor<T>,
    pub second_moment: Tensor<T>,
    /// Frozen parameters receive no updates and are skipped by gradient checks.
    pub frozen: bool,
}

/// Named parameters in insertion order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T: Real> {
    params: Vec<Param<T>>,
    index: HashMap<String, usize>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, partition: Partition, value: Tensor<T>) -> Result<usize> {
        if self.index.contains_key(name) {
            return Err(TensorError::DuplicateParam(name.to_string()));
        }
        let zeros = Tensor::zeros(value.shape().to_vec());
        let id = self.params.len();
        self.params.push(Param {
            name: name.to_string(),
            partition,
            grad: zeros.clone(),
            first_moment: zeros.clone(),
            second_moment: zeros,
            value,
            frozen: false,
        });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Param<T>> {
        Ok(&self.params[self.id(name)?])
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Param<T>> {
        let id = self.id(name)?;
        Ok(&mut self.params[id])
    }

    pub fn value(&self, name: &str) -> Result<&Tensor<T>> {
        Ok(&self.get(name)?.value)
    }

    pub fn value_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        Ok(&mut self.get_mut(name)?.value)
    }

    pub fn by_id(&self, id: usize) -> &Param<T> {
        &self.params[id]
    }

    pub fn by_id_mut(&mut self, id: usize) -> &mut Param<T> {
        &mut self.params[id]
    }

    pub fn set_frozen(&mut self, name: &str, frozen: bool) -> Result<()> {
        self.get_mut(name)?.frozen = frozen;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Add a set of gradients into the accumulators.
    pub fn accumulate(&mut self, grads: &Gradients<T>) -> Result<()> {
        if grads.per_param.len() != self.params.len() {
            return Err(TensorError::Invalid(format!(
                "gradient set covers {} parameters, store has {}",
                grads.per_param.len(),
                self.params.len()
            )));
        }
        for (p, g) in self.params.iter_mut().zip(&grads.per_param) {
            if let Some(g) = g {
                for (a, &b) in p.grad.data_mut().iter_mut().zip(g.data()) {
                    *a = *a + b;
                }
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// Global L2 norm over all non-frozen gradients.
    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .filter(|p| !p.frozen)
            .map(|p| {
                p.grad
                    .data()
                    .iter()
                    .map(|g| g.as_f64().powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Copy of the values with fresh gradient/moment buffers in another precision.
    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        let mut out = ParamStore::new();
        for p in &self.params {
            out.insert(&p.name, p.partition, p.value.cast())
                .expect("names are unique");
            out.params.last_mut().unwrap().frozen = p.frozen;
        }
        out
    }
}

/// Output of a backward pass: one optional gradient per parameter, in store order.
#[derive(Clone, Debug)]
pub struct Gradients<T: Real> {
    pub per_param: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, id: usize) -> Option<&Tensor<T>> {
        self.per_param.get(id).and_then(Option::as_ref)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::<f32>::new();
        s.insert("w", Partition::Shared, Tensor::zeros([2]))
            .unwrap();
        assert!(matches!(
            s.insert("w", Partition::Shared, Tensor::zeros([2])),
            Err(TensorError::DuplicateParam(_))
        ));
    }

    #[test]
    fn buffers_match_parameter_shape() {
        let mut s = ParamStore::<f64>::new();
        s.insert("a", Partition::Encoder, Tensor::zeros([3, 4]))
            .unwrap();
        let p = s.get("a").unwrap();
        assert_eq!(p.grad.shape(), &[3, 4]);
        assert_eq!(p.first_moment.shape(), &[3, 4]);
        assert_eq!(p.second_moment.shape(), &[3, 4]);
    }
}
