//! Symmetric positive definite banded matrices with an in-place Cholesky
//! factorization.

#[derive(Clone, Debug)]
pub struct BandedSpd {
    size: usize,
    bw: usize,
    // row i holds entries (i, i - bw) ..= (i, i)
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(size: usize, bw: usize) -> Self {
        BandedSpd {
            size,
            bw,
            data: vec![0.0; size * (bw + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    fn slot(&self, i: usize, k: usize) -> usize {
        debug_assert!(k <= i && i - k <= self.bw);
        i * (self.bw + 1) + (self.bw - (i - k))
    }

    /// Adds `v` to entry `(i, k)` (and implicitly to `(k, i)`).
    #[inline]
    pub fn add(&mut self, i: usize, k: usize, v: f64) {
        let (i, k) = if i >= k { (i, k) } else { (k, i) };
        let s = self.slot(i, k);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        let (i, k) = if i >= k { (i, k) } else { (k, i) };
        if i - k > self.bw {
            0.0
        } else {
            self.data[self.slot(i, k)]
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.size];
        for i in 0..self.size {
            let k0 = i.saturating_sub(self.bw);
            for k in k0..=i {
                let a = self.data[self.slot(i, k)];
                y[i] += a * x[k];
                if k != i {
                    y[k] += a * x[i];
                }
            }
        }
        y
    }

    /// Solves `A x = b` by banded Cholesky. Returns `None` when a pivot is not
    /// positive.
    pub fn solve(mut self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.size;
        let bw = self.bw;
        for i in 0..n {
            let k0 = i.saturating_sub(bw);
            for k in k0..=i {
                let j0 = k0.max(k.saturating_sub(bw));
                let mut s = self.data[self.slot(i, k)];
                let ri = self.slot(i, j0);
                let rk = self.slot(k, j0);
                for t in 0..(k - j0) {
                    s -= self.data[ri + t] * self.data[rk + t];
                }
                if k == i {
                    if !(s > 0.0) {
                        return None;
                    }
                    let si = self.slot(i, i);
                    self.data[si] = s.sqrt();
                } else {
                    let d = self.data[self.slot(k, k)];
                    let sik = self.slot(i, k);
                    self.data[sik] = s / d;
                }
            }
        }
        let mut y = b.to_vec();
        for i in 0..n {
            let k0 = i.saturating_sub(bw);
            let mut s = y[i];
            for k in k0..i {
                s -= self.data[self.slot(i, k)] * y[k];
            }
            y[i] = s / self.data[self.slot(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= self.data[self.slot(k, i)] * y[k];
            }
            y[i] = s / self.data[self.slot(i, i)];
        }
        Some(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_pentadiagonal_system() {
        let n = 9;
        let mut a = BandedSpd::zeros(n, 2);
        for i in 0..n {
            a.add(i, i, 6.0);
            if i >= 1 {
                a.add(i, i - 1, -1.5);
            }
            if i >= 2 {
                a.add(i, i - 2, 0.5);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.3).collect();
        let b = a.mul(&x);
        let got = a.clone().solve(&b).unwrap();
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-13);
        }
        assert_eq!(a.get(0, 5), 0.0);
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut a = BandedSpd::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert!(a.solve(&[1.0, 1.0]).is_none());
    }
}
