//! Small numeric helpers shared across modules.

use faer::Mat;

/// Neumaier-compensated accumulator. The bound calculators sum spectra that
/// span ~170 orders of magnitude; naive summation loses the tail there.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn frobenius_norm(m: faer::MatRef<'_, f64>) -> f64 {
    let mut acc = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)] * m[(i, j)];
        }
    }
    acc.sqrt()
}

/// Floor of a real-valued count like `alpha * ell`, robust to the half-ulp
/// fuzz of products that are mathematically integers (e.g. 0.75 * 400).
pub(crate) fn fuzzy_floor(x: f64) -> usize {
    let r = x.round();
    let v = if (x - r).abs() < 1e-9 { r } else { x.floor() };
    if v < 0.0 {
        0
    } else {
        v as usize
    }
}

/// Random orthogonal matrix from modified Gram-Schmidt on a seeded Gaussian;
/// test/oracle helper (rotation-invariance checks).
pub fn random_orthogonal(n: usize, seed: u64) -> Mat<f64> {
    let g = crate::rng::GaussianMatrix::sample(n, n, seed).expect("n >= 1");
    let mut q = g.matrix().to_owned();
    for j in 0..n {
        for _pass in 0..2 {
            for k in 0..j {
                let mut proj = 0.0;
                for i in 0..n {
                    proj += q[(i, k)] * q[(i, j)];
                }
                for i in 0..n {
                    let corr = proj * q[(i, k)];
                    q[(i, j)] -= corr;
                }
            }
        }
        let mut nrm = 0.0;
        for i in 0..n {
            nrm += q[(i, j)] * q[(i, j)];
        }
        let nrm = nrm.sqrt();
        for i in 0..n {
            q[(i, j)] /= nrm;
        }
    }
    q
}

/// Runs `f` over `0..n` collecting results in index order, in parallel when
/// the `parallel` feature is enabled. Output is identical either way.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential twin of [`map_indexed`], always available (benchmark baseline).
pub(crate) fn map_indexed_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
