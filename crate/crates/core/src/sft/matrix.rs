use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{SftError, Symbol};

/// 0/1 transition matrix of a mixing subshift of finite type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u8>>", into = "Vec<Vec<u8>>")]
pub struct TransitionMatrix {
    k: usize,
    entries: Vec<bool>,
    primitivity_exponent: usize,
}

impl TransitionMatrix {
    /// Builds a transition matrix from rows of 0/1 entries.
    ///
    /// Fails unless the matrix is square with `k >= 2`, has no stranded
    /// symbols, and some power `M^N` with `N <= (k-1)^2 + 1` is positive.
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self, SftError> {
        let k = rows.len();
        if k < 2 {
            return Err(SftError::TooFewSymbols(k));
        }
        if k > Symbol::MAX as usize + 1 {
            return Err(SftError::TooManySymbols(k));
        }
        let mut entries = Vec::with_capacity(k * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(SftError::NotSquare { row: i, len: row.len(), k });
            }
            for (j, &e) in row.iter().enumerate() {
                match e {
                    0 => entries.push(false),
                    1 => entries.push(true),
                    _ => return Err(SftError::NonBinaryEntry { row: i, col: j, value: e }),
                }
            }
        }
        for s in 0..k {
            if !(0..k).any(|j| entries[s * k + j]) {
                return Err(SftError::StrandedSymbol(s));
            }
            if !(0..k).any(|i| entries[i * k + s]) {
                return Err(SftError::StrandedSymbol(s));
            }
        }
        let wielandt = (k - 1) * (k - 1) + 1;
        let primitivity_exponent =
            boolean_primitivity(&entries, k, wielandt).ok_or(SftError::NotPrimitive { bound: wielandt })?;
        Ok(Self { k, entries, primitivity_exponent })
    }

    pub fn full_shift(k: usize) -> Result<Self, SftError> {
        Self::new(vec![vec![1; k]; k])
    }

    /// `[[1,1],[1,0]]`: no two consecutive 1s.
    pub fn golden_mean() -> Self {
        Self::new(vec![vec![1, 1], vec![1, 0]]).expect("golden mean matrix is primitive")
    }

    pub fn symbol_count(&self) -> usize {
        self.k
    }

    pub fn primitivity_exponent(&self) -> usize {
        self.primitivity_exponent
    }

    #[inline]
    pub fn allowed(&self, a: Symbol, b: Symbol) -> bool {
        self.entries[a as usize * self.k + b as usize]
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.k)
            .map(|i| (0..self.k).map(|j| self.entries[i * self.k + j] as u8).collect())
            .collect()
    }

    pub fn successors(&self, a: Symbol) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.k as Symbol).filter(move |&b| self.allowed(a, b))
    }

    pub fn predecessors(&self, b: Symbol) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.k as Symbol).filter(move |&a| self.allowed(a, b))
    }

    pub fn is_symbol(&self, s: Symbol) -> bool {
        (s as usize) < self.k
    }

    pub fn is_admissible(&self, word: &[Symbol]) -> bool {
        word.iter().all(|&s| self.is_symbol(s)) && word.windows(2).all(|w| self.allowed(w[0], w[1]))
    }

    /// Admissible and the wrap-around junction `last -> first` is allowed too.
    pub fn is_cyclically_admissible(&self, word: &[Symbol]) -> bool {
        match (word.first(), word.last()) {
            (Some(&f), Some(&l)) => self.is_admissible(word) && self.allowed(l, f),
            _ => false,
        }
    }

    /// All admissible words of length `len`, in lexicographic order.
    pub fn admissible_words(&self, len: usize) -> Vec<Vec<Symbol>> {
        let mut out = Vec::new();
        if len == 0 {
            out.push(Vec::new());
            return out;
        }
        let mut word = Vec::with_capacity(len);
        self.extend_words(&mut word, len, &mut |w| out.push(w.to_vec()));
        out
    }

    /// Depth-first walk over admissible words of length `len`, calling `visit`
    /// on each in lexicographic order.
    pub fn for_each_word(&self, len: usize, mut visit: impl FnMut(&[Symbol])) {
        let mut word = Vec::with_capacity(len);
        if len == 0 {
            visit(&word);
            return;
        }
        self.extend_words(&mut word, len, &mut visit);
    }

    fn extend_words(&self, word: &mut Vec<Symbol>, len: usize, visit: &mut dyn FnMut(&[Symbol])) {
        if word.len() == len {
            visit(word);
            return;
        }
        for s in 0..self.k as Symbol {
            if word.last().map_or(true, |&l| self.allowed(l, s)) {
                word.push(s);
                self.extend_words(word, len, visit);
                word.pop();
            }
        }
    }

    /// Number of admissible words of length `len` (sum of entries of `M^(len-1)`).
    pub fn count_words(&self, len: usize) -> u128 {
        if len == 0 {
            return 1;
        }
        let mut v = vec![1u128; self.k];
        for _ in 1..len {
            let mut next = vec![0u128; self.k];
            for a in 0..self.k {
                for b in 0..self.k {
                    if self.entries[a * self.k + b] {
                        next[a] += v[b];
                    }
                }
            }
            v = next;
        }
        v.iter().sum()
    }

    /// `trace(M^n)` in exact integer arithmetic.
    pub fn trace_power(&self, n: usize) -> u128 {
        let k = self.k;
        let base: Vec<u128> = self.entries.iter().map(|&e| e as u128).collect();
        let mut acc: Vec<u128> = (0..k * k).map(|i| (i / k == i % k) as u128).collect();
        for _ in 0..n {
            let mut next = vec![0u128; k * k];
            for i in 0..k {
                for l in 0..k {
                    let a = acc[i * k + l];
                    if a == 0 {
                        continue;
                    }
                    for j in 0..k {
                        next[i * k + j] += a * base[l * k + j];
                    }
                }
            }
            acc = next;
        }
        (0..k).map(|i| acc[i * k + i]).sum()
    }

    /// Shortest connector from `a` to `b` using at least one step: the returned
    /// symbols are the ones strictly between `a` and `b`. Ties go to the
    /// smallest symbol at the earliest position.
    pub fn connector(&self, a: Symbol, b: Symbol) -> Vec<Symbol> {
        if self.allowed(a, b) {
            return Vec::new();
        }
        // BFS backwards from b so that the forward reconstruction picks the
        // smallest next symbol among those on a shortest path.
        let mut dist = vec![usize::MAX; self.k];
        let mut queue = VecDeque::new();
        for p in self.predecessors(b) {
            dist[p as usize] = 0;
            queue.push_back(p);
        }
        while let Some(s) = queue.pop_front() {
            for p in self.predecessors(s) {
                if dist[p as usize] == usize::MAX {
                    dist[p as usize] = dist[s as usize] + 1;
                    queue.push_back(p);
                }
            }
        }
        let mut path = Vec::new();
        let mut cur = self
            .successors(a)
            .filter(|&s| dist[s as usize] != usize::MAX)
            .min_by_key(|&s| (dist[s as usize], s))
            .expect("primitive matrix is strongly connected");
        loop {
            path.push(cur);
            if self.allowed(cur, b) {
                return path;
            }
            let d = dist[cur as usize];
            cur = self
                .successors(cur)
                .find(|&s| dist[s as usize] + 1 == d)
                .expect("BFS layer has a successor one step closer");
        }
    }
}

impl TryFrom<Vec<Vec<u8>>> for TransitionMatrix {
    type Error = SftError;
    fn try_from(rows: Vec<Vec<u8>>) -> Result<Self, SftError> {
        Self::new(rows)
    }
}

impl From<TransitionMatrix> for Vec<Vec<u8>> {
    fn from(m: TransitionMatrix) -> Self {
        m.rows()
    }
}

fn boolean_primitivity(entries: &[bool], k: usize, bound: usize) -> Option<usize> {
    let mut power = entries.to_vec();
    for n in 1..=bound {
        if power.iter().all(|&e| e) {
            return Some(n);
        }
        let mut next = vec![false; k * k];
        for i in 0..k {
            for l in 0..k {
                if power[i * k + l] {
                    for j in 0..k {
                        next[i * k + j] |= entries[l * k + j];
                    }
                }
            }
        }
        power = next;
    }
    None
}
