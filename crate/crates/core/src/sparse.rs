//! Compressed-row real antisymmetric matrices and a Taylor exponential action.

use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    /// Builds `A` from upper-or-lower entries `(i, j, v)` meaning `A_ij += v`, `A_ji -= v`.
    /// Duplicates are summed in input order on both sides, so `A^T = -A` bit-exactly.
    pub fn antisymmetric(
        dim: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, v) in entries {
            if i == j {
                continue;
            }
            let (key, s) = if i < j { ((i, j), v) } else { ((j, i), -v) };
            *acc.entry(key).or_insert(0.0) += s;
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for (&(i, j), &v) in &acc {
            if v != 0.0 {
                rows[i].push((j, v));
                rows[j].push((i, -v));
            }
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (j, v) in r {
                col.push(j);
                val.push(v);
            }
            row_ptr.push(col.len());
        }
        Csr {
            dim,
            row_ptr,
            col,
            val,
        }
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = &self.col[self.row_ptr[i]..self.row_ptr[i + 1]];
        match r.binary_search(&j) {
            Ok(k) => self.val[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    /// `y = s * A x`.
    pub fn mul_scaled(&self, s: f64, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.val[k] * x[self.col[k]];
            }
            *yi = s * acc;
        }
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                self.val[self.row_ptr[i]..self.row_ptr[i + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col[k], self.val[k]))
        })
    }

    pub fn is_antisymmetric(&self) -> bool {
        self.triplets().all(|(i, j, v)| self.get(j, i) == -v)
    }
}

/// Overwrites `v` with `exp(t A) v`, where `apply(x, y)` sets `y = A x` and
/// `norm` bounds the operator norm of A. Substeps keep `norm * h <= 1`.
pub fn expmv(apply: impl Fn(&[f64], &mut [f64]), norm: f64, t: f64, v: &mut [f64]) {
    if t == 0.0 || norm == 0.0 {
        return;
    }
    let steps = (norm * t.abs()).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let n = v.len();
    let mut term = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..steps {
        term.copy_from_slice(v);
        let scale = v
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .max(f64::MIN_POSITIVE);
        for k in 1..60 {
            apply(&term, &mut next);
            let c = h / k as f64;
            let mut big = 0.0f64;
            for i in 0..n {
                let x = c * next[i];
                term[i] = x;
                v[i] += x;
                big = big.max(x.abs());
            }
            if big <= 1e-17 * scale {
                break;
            }
        }
    }
}
