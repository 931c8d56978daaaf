//! Complex banded matrices with LU factorization (partial pivoting).

use crate::error::{Error, Result};
use crate::C64;

/// Column-major band storage with room for pivoting fill:
/// A(i,j) lives at `data[j*ld + kl + ku + i - j]`.
#[derive(Debug, Clone)]
pub struct Band {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    ld: usize,
    data: Vec<C64>,
}

impl Band {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Band { n, kl, ku, ld, data: vec![C64::new(0.0, 0.0); ld * n] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ld + self.kl + self.ku + i - j
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if i > j + self.kl || j > i + self.ku {
            return C64::new(0.0, 0.0);
        }
        self.data[self.idx(i, j)]
    }

    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        assert!(i <= j + self.kl && j <= i + self.ku, "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut s = C64::new(0.0, 0.0);
            for j in lo..=hi {
                s += self.data[self.idx(i, j)] * x[j];
            }
            *yi = s;
        }
    }

    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut piv = vec![0usize; n];
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.data[self.idx(j, j)].norm();
            for i in j + 1..=last {
                let v = self.data[self.idx(i, j)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularSystem(j));
            }
            piv[j] = p;
            let cmax = (j + ku + kl).min(n - 1);
            if p != j {
                for c in j..=cmax {
                    let (a, b) = (self.idx(j, c), self.idx(p, c));
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.idx(j, j)];
            for i in j + 1..=last {
                let k = self.idx(i, j);
                self.data[k] /= d;
            }
            for c in j + 1..=cmax {
                let a = self.data[self.idx(j, c)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for i in j + 1..=last {
                    let l = self.data[self.idx(i, j)];
                    let k = self.idx(i, c);
                    self.data[k] -= l * a;
                }
            }
        }
        Ok(BandLu { a: self, piv })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    a: Band,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, b: &mut [C64]) {
        let a = &self.a;
        let n = a.n;
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            for i in j + 1..=(j + a.kl).min(n - 1) {
                b[i] -= a.data[a.idx(i, j)] * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= a.data[a.idx(j, j)];
            let bj = b[j];
            for i in j.saturating_sub(a.ku + a.kl)..j {
                b[i] -= a.data[a.idx(i, j)] * bj;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_solve() {
        let (n, kl, ku) = (40, 3, 2);
        let mut band = Band::zeros(n, kl, ku);
        let mut dense = DMatrix::<C64>::zeros(n, n);
        let mut seed = 1u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // small diagonal forces pivoting
                let v = C64::new(rnd(), rnd()) * if i == j { 1e-3 } else { 1.0 };
                band.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let rhs: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 1.0)).collect();
        let lu = band.factor().unwrap();
        let mut x = rhs.clone();
        lu.solve(&mut x);
        let r = &dense * DVector::from_vec(x) - DVector::from_vec(rhs);
        assert!(r.norm() < 1e-10, "{}", r.norm());
    }

    #[test]
    fn singular_detected() {
        let b = Band::zeros(3, 1, 1);
        assert!(matches!(b.factor(), Err(Error::SingularSystem(0))));
    }
}
