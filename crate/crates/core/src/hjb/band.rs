//! Square banded matrix with in-place LU factorization, no pivoting.
//! Only used on diagonally dominant M-matrices, where that is stable.

#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    bw: usize,
    /// Row-major; row i holds columns i-bw ..= i+bw.
    data: Vec<f64>,
    factored: bool,
}

impl BandMatrix {
    pub(crate) fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (2 * bw + 1)], factored: false }
    }

    #[inline]
    fn slot(&self, row: usize, col: usize) -> usize {
        debug_assert!(col + self.bw >= row && col <= row + self.bw);
        row * (2 * self.bw + 1) + (col + self.bw - row)
    }

    #[inline]
    pub(crate) fn add(&mut self, row: usize, col: usize, v: f64) {
        let k = self.slot(row, col);
        self.data[k] += v;
    }

    pub(crate) fn clear(&mut self) {
        self.data.iter_mut().for_each(|x| *x = 0.0);
        self.factored = false;
    }

    pub(crate) fn factor(&mut self) -> Result<(), usize> {
        let (n, bw) = (self.n, self.bw);
        let width = 2 * bw + 1;
        for k in 0..n {
            let pivot = self.data[k * width + bw];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(k);
            }
            let last = (k + bw).min(n - 1);
            let (head, tail) = self.data.split_at_mut((k + 1) * width);
            let prow = &head[k * width + bw + 1..k * width + bw + 1 + (last - k)];
            for i in k + 1..=last {
                let row = &mut tail[(i - k - 1) * width..(i - k) * width];
                let lk = bw + k - i;
                let l = row[lk] / pivot;
                row[lk] = l;
                if l != 0.0 {
                    // Columns k+1 ..= last sit at offsets lk+1 ..
                    for (dst, &src) in row[lk + 1..lk + 1 + (last - k)].iter_mut().zip(prow) {
                        *dst -= l * src;
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    pub(crate) fn solve(&self, rhs: &mut [f64]) {
        assert!(self.factored, "solve before factor");
        let (n, bw) = (self.n, self.bw);
        let width = 2 * bw + 1;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &self.data[i * width..(i + 1) * width];
            let mut s = rhs[i];
            for j in lo..i {
                s -= row[j + bw - i] * rhs[j];
            }
            rhs[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let row = &self.data[i * width..(i + 1) * width];
            let mut s = rhs[i];
            for j in i + 1..=hi {
                s -= row[j + bw - i] * rhs[j];
            }
            rhs[i] = s / row[bw];
        }
    }
}
