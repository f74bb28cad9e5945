//! Locally constant cocycles over a subshift of finite type.
//!
//! A [`Generator`] assigns an [`OperatorValue`] to every admissible word of
//! length `2r+1`; `A(x)` is the value of the window `x_{-r} .. x_r` and
//! `A_x^n = A(f^{n-1}x) ∘ ... ∘ A(x)`.

mod bunching;
mod closeness;
mod growth;
mod tables;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::linops::{LinopsError, Matrix, OperatorValue};
use crate::sft::{Point, ShiftMetric, SftError, Symbol, TransitionMatrix};

pub use bunching::{bunching_sequence, certify_fiber_bunching, BunchingCertificate, NotCertified};
pub use closeness::{
    closeness_profile, stable_closeness_defect, ClosenessProfile, DefectReport, Leaf,
};
pub use growth::{growth_exponent_check, GrowthReport};
pub use tables::CylinderTable;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CocycleError {
    #[error(transparent)]
    Sft(#[from] SftError),
    #[error(transparent)]
    Linops(#[from] LinopsError),
    #[error("word {0:?} has length {1}, expected {2}")]
    WordLength(Vec<Symbol>, usize, usize),
    #[error("word {0:?} is not admissible")]
    InadmissibleWord(Vec<Symbol>),
    #[error("word {0:?} appears twice")]
    DuplicateWord(Vec<Symbol>),
    #[error("admissible word {0:?} has no value")]
    MissingWord(Vec<Symbol>),
    #[error("values have dimension {0}, expected {1}")]
    DimMismatch(usize, usize),
    #[error("beta must lie in (0,1], got {0}")]
    BadBeta(f64),
    #[error("rotation needs dimension at least 2")]
    RotationDim,
    #[error("points use {0} symbols but the generator has {1}")]
    Alphabet(usize, usize),
    #[error("y is not in the local {0:?} set of x")]
    NotInLocalLeaf(Leaf),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
}

/// Locally constant generator of a cocycle.
#[derive(Debug, Clone)]
pub struct Generator {
    matrix: TransitionMatrix,
    depth: usize,
    beta: f64,
    dim: usize,
    /// Indexed by the base-k code of the window; `None` for inadmissible words.
    table: Vec<Option<OperatorValue>>,
}

impl Generator {
    /// Builds a generator by evaluating `f` on every admissible `(2r+1)`-word.
    pub fn from_fn<F>(matrix: &TransitionMatrix, depth: usize, dim: usize, mut f: F) -> Result<Self, CocycleError>
    where
        F: FnMut(&[Symbol]) -> Result<OperatorValue, CocycleError>,
    {
        let k = matrix.symbol_count();
        let len = 2 * depth + 1;
        let mut table = vec![None; k.pow(len as u32)];
        let mut err = None;
        matrix.for_each_word(len, |w| {
            if err.is_some() {
                return;
            }
            match f(w) {
                Ok(v) if v.dim() != dim => err = Some(CocycleError::DimMismatch(v.dim(), dim)),
                Ok(v) => table[encode(w, k)] = Some(v),
                Err(e) => err = Some(e),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        Ok(Self { matrix: matrix.clone(), depth, beta: 1.0, dim, table })
    }

    /// Builds a generator from an explicit table, which must cover exactly
    /// the admissible words of length `2r+1`.
    pub fn from_table(
        matrix: &TransitionMatrix,
        depth: usize,
        entries: Vec<(Vec<Symbol>, OperatorValue)>,
    ) -> Result<Self, CocycleError> {
        let len = 2 * depth + 1;
        let mut map = BTreeMap::new();
        let mut dim = None;
        for (w, v) in entries {
            if w.len() != len {
                return Err(CocycleError::WordLength(w.clone(), w.len(), len));
            }
            if !matrix.is_admissible(&w) {
                return Err(CocycleError::InadmissibleWord(w));
            }
            match dim {
                None => dim = Some(v.dim()),
                Some(d) if d != v.dim() => return Err(CocycleError::DimMismatch(v.dim(), d)),
                _ => {}
            }
            if map.insert(w.clone(), v).is_some() {
                return Err(CocycleError::DuplicateWord(w));
            }
        }
        let missing: Vec<Vec<Symbol>> =
            matrix.admissible_words(len).into_iter().filter(|w| !map.contains_key(w)).collect();
        if let Some(w) = missing.into_iter().next() {
            return Err(CocycleError::MissingWord(w));
        }
        let dim = dim.expect("at least one admissible word");
        Self::from_fn(matrix, depth, dim, |w| Ok(map[w].clone()))
    }

    pub fn identity(matrix: &TransitionMatrix, dim: usize) -> Self {
        Self::constant(matrix, OperatorValue::identity(dim))
    }

    pub fn constant(matrix: &TransitionMatrix, value: OperatorValue) -> Self {
        let dim = value.dim();
        Self::from_fn(matrix, 0, dim, |_| Ok(value.clone())).expect("constant table")
    }

    pub fn diagonal(matrix: &TransitionMatrix, entries: &[f64]) -> Result<Self, CocycleError> {
        Ok(Self::constant(matrix, OperatorValue::diagonal(entries)?))
    }

    /// Depth-0 generator with `A(x) = values[x_0]`.
    pub fn per_symbol(matrix: &TransitionMatrix, values: &[OperatorValue]) -> Result<Self, CocycleError> {
        if values.len() != matrix.symbol_count() {
            return Err(CocycleError::WordLength(Vec::new(), values.len(), matrix.symbol_count()));
        }
        let dim = values[0].dim();
        Self::from_fn(matrix, 0, dim, |w| Ok(values[w[0] as usize].clone()))
    }

    /// Coboundary `A(x) = C(fx) ∘ C(x)^-1` of a locally constant `C`.
    pub fn coboundary(matrix: &TransitionMatrix, c: &CylinderTable<OperatorValue>) -> Result<Self, CocycleError> {
        let dim = c.validate_operators(matrix)?;
        let rc = c.depth();
        let depth = rc + 1;
        Self::from_fn(matrix, depth, dim, |w| {
            let here = c.lookup(&w[depth - rc..=depth + rc]);
            let next = c.lookup(&w[depth + 1 - rc..=depth + 1 + rc]);
            Ok(OperatorValue::from_parts(
                next.matrix() * here.inverse_matrix(),
                here.matrix() * next.inverse_matrix(),
            ))
        })
    }

    /// `A(x) = C(fx) ∘ R(theta(x)) ∘ C(x)^-1` with `R` a rotation in the first
    /// coordinate plane.
    pub fn conjugated_rotation(
        matrix: &TransitionMatrix,
        c: &CylinderTable<OperatorValue>,
        theta: &CylinderTable<f64>,
    ) -> Result<Self, CocycleError> {
        let dim = c.validate_operators(matrix)?;
        theta.validate(matrix)?;
        if dim < 2 {
            return Err(CocycleError::RotationDim);
        }
        let (rc, ra) = (c.depth(), theta.depth());
        let depth = (rc + 1).max(ra);
        Self::from_fn(matrix, depth, dim, |w| {
            let here = c.lookup(&w[depth - rc..=depth + rc]);
            let next = c.lookup(&w[depth + 1 - rc..=depth + 1 + rc]);
            let rot = OperatorValue::rotation(dim, *theta.lookup(&w[depth - ra..=depth + ra]));
            Ok(OperatorValue::from_parts(
                next.matrix() * rot.matrix() * here.inverse_matrix(),
                here.matrix() * rot.inverse_matrix() * next.inverse_matrix(),
            ))
        })
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self, CocycleError> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(CocycleError::BadBeta(beta));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn transition_matrix(&self) -> &TransitionMatrix {
        &self.matrix
    }
    pub fn depth(&self) -> usize {
        self.depth
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn window_len(&self) -> usize {
        2 * self.depth + 1
    }

    /// Value on a `(2r+1)`-word; panics on inadmissible words.
    #[inline]
    pub fn value(&self, word: &[Symbol]) -> &OperatorValue {
        debug_assert_eq!(word.len(), self.window_len());
        self.table[encode(word, self.matrix.symbol_count())]
            .as_ref()
            .expect("admissible window")
    }

    /// Table entries in lexicographic word order.
    pub fn entries(&self) -> Vec<(Vec<Symbol>, &OperatorValue)> {
        self.matrix
            .admissible_words(self.window_len())
            .into_iter()
            .map(|w| {
                let v = self.value(&w);
                (w, v)
            })
            .collect()
    }

    /// `A(f^j x)`.
    #[inline]
    pub fn at(&self, x: &Point, j: i64) -> &OperatorValue {
        let k = self.matrix.symbol_count();
        let r = self.depth as i64;
        let mut code = 0usize;
        for i in j - r..=j + r {
            code = code * k + x.coord(i) as usize;
        }
        self.table[code].as_ref().expect("points are admissible")
    }

    fn check_point(&self, x: &Point) {
        assert_eq!(x.alphabet(), self.matrix.symbol_count(), "point and generator alphabets differ");
    }

    /// `A_x^n` for any integer `n`.
    pub fn evaluate(&self, x: &Point, n: i64) -> OperatorValue {
        self.check_point(x);
        let d = self.dim;
        let mut m = Matrix::identity(d, d);
        let mut inv = Matrix::identity(d, d);
        if n >= 0 {
            for j in 0..n {
                let a = self.at(x, j);
                m = a.matrix() * m;
                inv = inv * a.inverse_matrix();
            }
        } else {
            for j in (n..0).rev() {
                let a = self.at(x, j);
                m = a.inverse_matrix() * m;
                inv = inv * a.matrix();
            }
        }
        OperatorValue::from_parts(m, inv)
    }

    /// `A_x^n` for every `n` in `lo..=hi` (with `lo <= 0 <= hi`), indexed by `n - lo`.
    pub fn orbit_products(&self, x: &Point, lo: i64, hi: i64) -> Vec<OperatorValue> {
        assert!(lo <= 0 && hi >= 0);
        self.check_point(x);
        let d = self.dim;
        let mut back = Vec::with_capacity((-lo) as usize);
        let (mut m, mut inv) = (Matrix::identity(d, d), Matrix::identity(d, d));
        for j in (lo..0).rev() {
            let a = self.at(x, j);
            m = a.inverse_matrix() * m;
            inv = inv * a.matrix();
            back.push(OperatorValue::from_parts(m.clone(), inv.clone()));
        }
        let mut out: Vec<OperatorValue> = back.into_iter().rev().collect();
        out.push(OperatorValue::identity(d));
        let (mut m, mut inv) = (Matrix::identity(d, d), Matrix::identity(d, d));
        for j in 0..hi {
            let a = self.at(x, j);
            m = a.matrix() * m;
            inv = inv * a.inverse_matrix();
            out.push(OperatorValue::from_parts(m.clone(), inv.clone()));
        }
        out
    }

    /// `Q_A(x,n) = |A_x^n| |(A_x^n)^-1|`.
    pub fn quasiconformal_distortion(&self, x: &Point, n: i64) -> f64 {
        self.evaluate(x, n).quasiconformal()
    }

    /// Smallest `c` with `d(A(x), A(y)) <= c dist(x,y)^beta` for all `x`, `y`,
    /// by exhaustive enumeration of window pairs.
    pub fn holder_constant(&self, metric: &ShiftMetric) -> f64 {
        let words = self.matrix.admissible_words(self.window_len());
        let r = self.depth as i64;
        let mut c: f64 = 0.0;
        for (i, w) in words.iter().enumerate() {
            for w2 in &words[i + 1..] {
                let n = (0..w.len())
                    .filter(|&t| w[t] != w2[t])
                    .map(|t| (t as i64 - r).unsigned_abs())
                    .min()
                    .expect("distinct words");
                let d = self.value(w).distance(self.value(w2));
                c = c.max(d / metric.radius(n).powf(self.beta));
            }
        }
        c
    }
}

pub(crate) fn encode(word: &[Symbol], k: usize) -> usize {
    word.iter().fold(0usize, |acc, &s| acc * k + s as usize)
}
