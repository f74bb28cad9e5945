use std::collections::BTreeMap;

use crate::linops::OperatorValue;
use crate::sft::{Point, Symbol, TransitionMatrix};

use super::CocycleError;

/// A locally constant function on the shift: a value for every admissible
/// word of length `2r+1`, read off the window `x_{-r} .. x_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderTable<T> {
    depth: usize,
    entries: BTreeMap<Vec<Symbol>, T>,
}

impl<T: Clone> CylinderTable<T> {
    pub fn new(depth: usize, entries: BTreeMap<Vec<Symbol>, T>) -> Self {
        Self { depth, entries }
    }

    /// Fills every admissible word with `f(word)`.
    pub fn from_fn(matrix: &TransitionMatrix, depth: usize, mut f: impl FnMut(&[Symbol]) -> T) -> Self {
        let entries = matrix
            .admissible_words(2 * depth + 1)
            .into_iter()
            .map(|w| {
                let v = f(&w);
                (w, v)
            })
            .collect();
        Self { depth, entries }
    }

    pub fn constant(matrix: &TransitionMatrix, value: T) -> Self {
        Self::from_fn(matrix, 0, |_| value.clone())
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn entries(&self) -> &BTreeMap<Vec<Symbol>, T> {
        &self.entries
    }

    pub fn lookup(&self, word: &[Symbol]) -> &T {
        &self.entries[word]
    }

    pub fn at(&self, x: &Point) -> &T {
        let r = self.depth as i64;
        self.lookup(&x.window(-r, 2 * self.depth + 1))
    }

    /// Checks that the keys are exactly the admissible `(2r+1)`-words.
    pub fn validate(&self, matrix: &TransitionMatrix) -> Result<(), CocycleError> {
        let len = 2 * self.depth + 1;
        for w in self.entries.keys() {
            if w.len() != len {
                return Err(CocycleError::WordLength(w.clone(), w.len(), len));
            }
            if !matrix.is_admissible(w) {
                return Err(CocycleError::InadmissibleWord(w.clone()));
            }
        }
        for w in matrix.admissible_words(len) {
            if !self.entries.contains_key(&w) {
                return Err(CocycleError::MissingWord(w));
            }
        }
        Ok(())
    }
}

impl CylinderTable<OperatorValue> {
    pub fn dim(&self) -> usize {
        self.entries.values().next().map_or(0, OperatorValue::dim)
    }

    /// [`validate`](Self::validate) plus a common dimension for all values.
    pub(crate) fn validate_operators(&self, matrix: &TransitionMatrix) -> Result<usize, CocycleError> {
        self.validate(matrix)?;
        let dim = self.dim();
        match self.entries.values().find(|v| v.dim() != dim) {
            Some(v) => Err(CocycleError::DimMismatch(v.dim(), dim)),
            None => Ok(dim),
        }
    }
}
