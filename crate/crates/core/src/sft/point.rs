use serde::{Deserialize, Serialize};

use super::{SftError, Symbol, TransitionMatrix};

/// Eventually periodic bi-infinite sequence `... L L L core R R R ...`.
///
/// Coordinates: `x_i = core[i - lo]` on `[lo, hi]`, `right[(i - hi - 1) mod p]`
/// for `i > hi` and `left[(i - lo) mod q]` for `i < lo`. Values are always kept
/// in canonical form (primitive periods, minimal core; a globally periodic
/// sequence has an empty core and its least rotation as period), so derived
/// equality and ordering are equality and ordering of sequences.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(into = "PointRepr")]
pub struct Point {
    alphabet: usize,
    core_lo: i64,
    core: Vec<Symbol>,
    left: Vec<Symbol>,
    right: Vec<Symbol>,
}

/// Wire format of a [`Point`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointRepr {
    pub left: Vec<Symbol>,
    pub core: Vec<Symbol>,
    pub core_lo: i64,
    pub right: Vec<Symbol>,
}

impl From<Point> for PointRepr {
    fn from(p: Point) -> Self {
        PointRepr { left: p.left, core: p.core, core_lo: p.core_lo, right: p.right }
    }
}

impl PointRepr {
    pub fn into_point(self, m: &TransitionMatrix) -> Result<Point, SftError> {
        Point::new(m, self.left, self.core, self.core_lo, self.right)
    }
}

impl Point {
    /// Validates admissibility of every junction and returns the canonical form.
    pub fn new(
        m: &TransitionMatrix,
        left: Vec<Symbol>,
        core: Vec<Symbol>,
        core_lo: i64,
        right: Vec<Symbol>,
    ) -> Result<Self, SftError> {
        if left.is_empty() || right.is_empty() {
            return Err(SftError::EmptyPeriod);
        }
        let mut seq: Vec<Symbol> = Vec::with_capacity(2 * left.len() + core.len() + 2 * right.len());
        seq.extend(&left);
        seq.extend(&left);
        seq.extend(&core);
        seq.extend(&right);
        seq.extend(&right);
        if let Some(&bad) = seq.iter().find(|&&s| !m.is_symbol(s)) {
            return Err(SftError::UnknownSymbol(bad));
        }
        if let Some(i) = seq.windows(2).position(|w| !m.allowed(w[0], w[1])) {
            return Err(SftError::Inadmissible { from: seq[i], to: seq[i + 1] });
        }
        Ok(Self::raw(m.symbol_count(), left, core, core_lo, right).canonical())
    }

    /// The periodic point `p` with `p_0 .. p_{k-1} = word`.
    pub fn periodic(m: &TransitionMatrix, word: &[Symbol]) -> Result<Self, SftError> {
        if word.is_empty() {
            return Err(SftError::EmptyPeriod);
        }
        if !m.is_cyclically_admissible(word) {
            return Err(SftError::NotCyclic(word.to_vec()));
        }
        Ok(Self::raw(m.symbol_count(), word.to_vec(), Vec::new(), 0, word.to_vec()).canonical())
    }

    /// A point carrying `word` on coordinates `[lo, lo + |word| - 1]`, extended
    /// periodically by `word` followed by the shortest connector back to its
    /// first symbol.
    pub fn extending(m: &TransitionMatrix, word: &[Symbol], lo: i64) -> Result<Self, SftError> {
        if word.is_empty() {
            return Err(SftError::EmptyPeriod);
        }
        if !m.is_admissible(word) {
            return Err(SftError::NotAdmissible(word.to_vec()));
        }
        let mut tour = word.to_vec();
        tour.extend(m.connector(word[word.len() - 1], word[0]));
        Ok(Self::raw(m.symbol_count(), tour.clone(), Vec::new(), lo, tour).canonical())
    }

    pub(crate) fn raw(
        alphabet: usize,
        left: Vec<Symbol>,
        core: Vec<Symbol>,
        core_lo: i64,
        right: Vec<Symbol>,
    ) -> Self {
        Self { alphabet, core_lo, core, left, right }
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }
    pub fn left_period(&self) -> &[Symbol] {
        &self.left
    }
    pub fn right_period(&self) -> &[Symbol] {
        &self.right
    }
    pub fn core(&self) -> &[Symbol] {
        &self.core
    }
    pub fn core_lo(&self) -> i64 {
        self.core_lo
    }
    /// Last core coordinate; `core_lo - 1` for an empty core.
    pub fn core_hi(&self) -> i64 {
        self.core_lo + self.core.len() as i64 - 1
    }

    pub fn is_periodic(&self) -> bool {
        self.core.is_empty() && self.left == self.right
    }

    /// Minimal period when the whole sequence is periodic.
    pub fn period(&self) -> Option<usize> {
        self.is_periodic().then_some(self.right.len())
    }

    #[inline]
    pub fn coord(&self, i: i64) -> Symbol {
        let hi = self.core_hi();
        if i > hi {
            self.right[(i - hi - 1).rem_euclid(self.right.len() as i64) as usize]
        } else if i >= self.core_lo {
            self.core[(i - self.core_lo) as usize]
        } else {
            self.left[(i - self.core_lo).rem_euclid(self.left.len() as i64) as usize]
        }
    }

    /// Coordinates `lo .. lo + len - 1`.
    pub fn window(&self, lo: i64, len: usize) -> Vec<Symbol> {
        (0..len as i64).map(|t| self.coord(lo + t)).collect()
    }

    /// `f^n x`: coordinate `j` of the result is coordinate `j + n` of `self`.
    pub fn shift(&self, n: i64) -> Self {
        if n == 0 {
            return self.clone();
        }
        if self.is_periodic() {
            // canonical periodic points keep core_lo in [0, p)
            let p = self.right.len() as i64;
            let mut out = self.clone();
            out.core_lo = (self.core_lo - n).rem_euclid(p);
            return out;
        }
        let mut out = self.clone();
        out.core_lo -= n;
        out
    }

    /// Points `self, f self, ..., f^(n-1) self`.
    pub fn orbit(&self, n: usize) -> Vec<Self> {
        (0..n as i64).map(|j| self.shift(j)).collect()
    }

    /// Largest `|i|` at which either point leaves its periodic tails, plus the
    /// lcm of the periods on both sides: beyond this scan radius two points
    /// that agree so far agree forever.
    pub(crate) fn scan_radius(&self, other: &Self) -> i64 {
        let ext = [self.core_lo, self.core_hi(), other.core_lo, other.core_hi()]
            .iter()
            .map(|v| v.abs())
            .max()
            .unwrap_or(0);
        ext + 1
            + lcm(self.right.len(), other.right.len()) as i64
            + lcm(self.left.len(), other.left.len()) as i64
    }

    /// Rewrites the representation so that the core covers `[a, b]`.
    /// Requires `a <= core_lo` and `b >= core_hi`.
    #[cfg(test)]
    pub(crate) fn rewindow(&self, a: i64, b: i64) -> Self {
        debug_assert!(a <= self.core_lo && b >= self.core_hi());
        let core = (a..=b).map(|i| self.coord(i)).collect();
        let q = self.left.len() as i64;
        let p = self.right.len() as i64;
        let left = (a - q..a).map(|i| self.coord(i)).collect();
        let right = (b + 1..=b + p).map(|i| self.coord(i)).collect();
        Self::raw(self.alphabet, left, core, a, right)
    }

    pub(crate) fn canonical(self) -> Self {
        let left = primitive_root(&self.left).to_vec();
        let right = primitive_root(&self.right).to_vec();
        let x = Self { left, right, ..self };
        let p = x.right.len() as i64;
        let q = x.left.len() as i64;
        let lo = x.core_lo;
        let hi = x.core_hi();

        if p == q && (lo - p..=hi).all(|i| x.coord(i) == x.coord(i + p)) {
            let best = (0..p)
                .min_by(|&r1, &r2| x.window(r1, p as usize).cmp(&x.window(r2, p as usize)))
                .unwrap_or(0);
            let word = x.window(best, p as usize);
            return Self::raw(x.alphabet, word.clone(), Vec::new(), best, word);
        }

        let mut s_r = hi + 1;
        while x.coord(s_r - 1) == x.coord(s_r - 1 + p) {
            s_r -= 1;
        }
        let mut e_l = lo - 1;
        while x.coord(e_l + 1) == x.coord(e_l + 1 - q) {
            e_l += 1;
        }
        let new_lo = (e_l + 1).min(s_r);
        let core = (new_lo..s_r).map(|i| x.coord(i)).collect();
        let left_p = (new_lo - q..new_lo).map(|i| x.coord(i)).collect();
        let right_p = (s_r..s_r + p).map(|i| x.coord(i)).collect();
        Self::raw(x.alphabet, left_p, core, new_lo, right_p)
    }
}

fn primitive_root(w: &[Symbol]) -> &[Symbol] {
    let n = w.len();
    for d in 1..n {
        if n % d == 0 && (d..n).all(|i| w[i] == w[i - d]) {
            return &w[..d];
        }
    }
    w
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}
