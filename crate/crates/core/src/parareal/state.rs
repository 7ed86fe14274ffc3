use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Binds the flat value layout of a [`StateVector`] to the solver and
/// resolution that produced it.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LayoutTag(Arc<str>);

impl LayoutTag {
    pub fn new(tag: impl AsRef<str>) -> Self {
        LayoutTag(Arc::from(tag.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for LayoutTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LayoutTag({})", self.0)
    }
}

impl fmt::Display for LayoutTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The unknowns of one coarse interval, flattened in a solver-defined order.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    values: Vec<f64>,
    layout: LayoutTag,
}

impl StateVector {
    pub fn new(values: Vec<f64>, layout: LayoutTag) -> Self {
        StateVector { values, layout }
    }

    pub fn zeros(len: usize, layout: LayoutTag) -> Self {
        StateVector::new(vec![0.0; len], layout)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layout(&self) -> &LayoutTag {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Fails with a data error unless `other` can be combined with `self`.
    pub fn check_compatible(&self, other: &StateVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::Data(format!(
                "layout mismatch: {} vs {}",
                self.layout, other.layout
            )));
        }
        if self.values.len() != other.values.len() {
            return Err(Error::Data(format!(
                "length mismatch for layout {}: {} vs {}",
                self.layout,
                self.values.len(),
                other.values.len()
            )));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &StateVector) -> Result<StateVector> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn checked_sub(&self, other: &StateVector) -> Result<StateVector> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &StateVector, op: impl Fn(f64, f64) -> f64) -> Result<StateVector> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| op(a, b))
            .collect();
        Ok(StateVector::new(values, self.layout.clone()))
    }

    pub fn scaled(&self, factor: f64) -> StateVector {
        StateVector::new(
            self.values.iter().map(|v| v * factor).collect(),
            self.layout.clone(),
        )
    }

    /// Root-sum-square, summed sequentially in index order.
    pub fn norm_l2(&self) -> f64 {
        let mut sum = 0.0;
        for v in &self.values {
            sum += v * v;
        }
        sum.sqrt()
    }

    pub fn norm_max(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}
