//! Square banded matrices with an in-place LU factorization (partial pivoting).
//!
//! Row `i` stores columns `i - kl ..= i + ku + kl`; the extra `kl` columns hold
//! the fill-in produced by row interchanges.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let offset = j as isize - i as isize + self.kl as isize;
        (offset >= 0 && (offset as usize) < self.width).then(|| i * self.width + offset as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Adds `v` to entry `(i, j)`, which must lie inside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(
            j + self.kl >= i && j <= i + self.ku,
            "({i}, {j}) outside the band"
        );
        let s = self.slot(i, j).expect("entry outside the band");
        self.data[s] += v;
    }

    /// Factorizes in place and returns the factors.
    pub fn factorize(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.kl + self.ku;
        let mut pivots = Vec::with_capacity(n);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular(k));
            }
            pivots.push(p);
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.slot(k, j).unwrap();
                    let b = self.slot(p, j).unwrap();
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k).unwrap()];
            for i in k + 1..=last_row {
                let s = self.slot(i, k).unwrap();
                let factor = self.data[s] / pivot;
                self.data[s] = factor;
                if factor == 0.0 {
                    continue;
                }
                let (row_k, row_i) = (k * self.width, i * self.width);
                let (ok, oi) = (kl, kl + k - i);
                // column j sits at offset j - k + kl in row k and j - i + kl in row i
                for d in 1..=last_col - k {
                    let u = self.data[row_k + ok + d];
                    self.data[row_i + oi + d] -= factor * u;
                }
            }
        }
        Ok(BandLu { m: self, pivots })
    }
}

#[derive(Clone, Debug)]
pub struct BandLu {
    m: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + m.kl).min(n - 1) {
                b[i] -= m.get(i, k) * bk;
            }
        }
        let reach = m.kl + m.ku;
        for k in (0..n).rev() {
            let mut acc = b[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                acc -= m.get(k, j) * b[j];
            }
            b[k] = acc / m.get(k, k);
        }
    }
}
