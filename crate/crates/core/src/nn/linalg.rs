//! Small dense kernels. Every reduction runs in a fixed order so a row
//! produces the same bits whether it is evaluated alone or inside a batch.

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }
}

/// Whether 256-bit float vectors can be used. The AVX entry points below
/// compile the same code with wider registers; without fused multiply-add
/// every lane performs the same operation sequence, so results are
/// bit-identical either way.
#[inline]
pub(crate) fn avx() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::arch::is_x86_feature_detected!("avx")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

macro_rules! avx_dispatch {
    ($(#[$m:meta])* $vis:vis fn $name:ident => $portable:ident, $avx:ident ($($arg:ident : $ty:ty),*) $(-> $ret:ty)?) => {
        #[cfg(target_arch = "x86_64")]
        #[target_feature(enable = "avx")]
        #[allow(clippy::too_many_arguments)]
        unsafe fn $avx($($arg: $ty),*) $(-> $ret)? {
            $portable($($arg),*)
        }

        $(#[$m])*
        #[inline]
        $vis fn $name($($arg: $ty),*) $(-> $ret)? {
            #[cfg(target_arch = "x86_64")]
            if avx() {
                // SAFETY: the feature was detected at runtime.
                return unsafe { $avx($($arg),*) };
            }
            $portable($($arg),*)
        }
    };
}
pub(crate) use avx_dispatch;

#[inline(always)]
fn dot_portable(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for k in chunks * 8..a.len() {
        tail += a[k] * b[k];
    }
    ((acc[0] + acc[4]) + (acc[2] + acc[6])) + ((acc[1] + acc[5]) + (acc[3] + acc[7])) + tail
}

avx_dispatch! {
    /// Dot product with eight interleaved accumulators, combined pairwise.
    pub fn dot => dot_portable, dot_avx(a: &[f64], b: &[f64]) -> f64
}

#[inline(always)]
fn axpy_portable(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

avx_dispatch! {
    /// `y += alpha * x`
    pub fn axpy => axpy_portable, axpy_avx(alpha: f64, x: &[f64], y: &mut [f64])
}

/// Fused multiply-add on machines that have it, for the product kernels
/// below. Fixed per machine, so results are reproducible on it.
#[inline]
fn fused() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        avx() && std::arch::is_x86_feature_detected!("fma")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

#[inline(always)]
fn mac<const FUSED: bool>(acc: f64, c: f64, w: f64) -> f64 {
    if FUSED {
        c.mul_add(w, acc)
    } else {
        acc + c * w
    }
}

#[inline(always)]
fn product_axpy_kernel<const FUSED: bool>(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = mac::<FUSED>(*yi, alpha, xi);
    }
}

#[inline(always)]
fn accumulate_product_kernel<const FUSED: bool>(out: &mut Matrix, coeffs: &Matrix, w_t: &Matrix) {
    const B: usize = 4;
    const T: usize = 8;
    let (n, h) = (w_t.cols, w_t.rows);
    assert_eq!(coeffs.cols, h, "accumulate_product inner dimension");
    assert_eq!(out.cols, n, "accumulate_product output width");
    assert_eq!(out.rows, coeffs.rows, "accumulate_product rows");
    let tiles = n / T;
    let mut b0 = 0;
    while b0 + B <= out.rows {
        // coefficients of this block, one group of B per j
        let ct: Vec<[f64; B]> = (0..h)
            .map(|j| std::array::from_fn(|b| coeffs.data[(b0 + b) * h + j]))
            .collect();
        let block = &mut out.data[b0 * n..(b0 + B) * n];
        for tile in 0..tiles {
            let i0 = tile * T;
            let mut acc = [[0.0f64; T]; B];
            for (b, a) in acc.iter_mut().enumerate() {
                a.copy_from_slice(&block[b * n + i0..b * n + i0 + T]);
            }
            for (wrow, c) in w_t.data.chunks_exact(n).zip(&ct) {
                let w: &[f64; T] = wrow[i0..i0 + T].try_into().unwrap();
                for b in 0..B {
                    for t in 0..T {
                        acc[b][t] = mac::<FUSED>(acc[b][t], c[b], w[t]);
                    }
                }
            }
            for (b, a) in acc.iter().enumerate() {
                block[b * n + i0..b * n + i0 + T].copy_from_slice(a);
            }
        }
        let i0 = tiles * T;
        for b in 0..B {
            for (wrow, c) in w_t.data.chunks_exact(n).zip(&ct) {
                product_axpy_kernel::<FUSED>(c[b], &wrow[i0..], &mut block[b * n + i0..(b + 1) * n]);
            }
        }
        b0 += B;
    }
    for b in b0..out.rows {
        for j in 0..h {
            let c = coeffs.data[b * h + j];
            product_axpy_kernel::<FUSED>(c, w_t.row(j), out.row_mut(b));
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx,fma")]
unsafe fn accumulate_product_fma(out: &mut Matrix, coeffs: &Matrix, w_t: &Matrix) {
    accumulate_product_kernel::<true>(out, coeffs, w_t)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn accumulate_product_avx(out: &mut Matrix, coeffs: &Matrix, w_t: &Matrix) {
    accumulate_product_kernel::<false>(out, coeffs, w_t)
}

/// `out[b] += sum_j coeffs[b][j] * w_t[j]`, accumulated in increasing `j`
/// for every entry: the same bits as one [`product_axpy`] per `j`.
pub fn accumulate_product(out: &mut Matrix, coeffs: &Matrix, w_t: &Matrix) {
    #[cfg(target_arch = "x86_64")]
    {
        if fused() {
            // SAFETY: the features were detected at runtime.
            return unsafe { accumulate_product_fma(out, coeffs, w_t) };
        }
        if avx() {
            // SAFETY: as above.
            return unsafe { accumulate_product_avx(out, coeffs, w_t) };
        }
    }
    accumulate_product_kernel::<false>(out, coeffs, w_t)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx,fma")]
unsafe fn product_axpy_fma(alpha: f64, x: &[f64], y: &mut [f64]) {
    product_axpy_kernel::<true>(alpha, x, y)
}

/// `y += alpha * x` rounded like one step of [`accumulate_product`].
pub fn product_axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if fused() {
        // SAFETY: the features were detected at runtime.
        return unsafe { product_axpy_fma(alpha, x, y) };
    }
    axpy(alpha, x, y)
}

#[inline(always)]
fn affine_portable(x: &Matrix, weight: &Matrix, bias: &[f64]) -> Matrix {
    assert_eq!(x.cols, weight.cols, "affine input width");
    let mut out = Matrix::zeros(x.rows, weight.rows);
    for r in 0..x.rows {
        let xr = x.row(r);
        let orow = out.row_mut(r);
        for (o, v) in orow.iter_mut().enumerate() {
            *v = bias[o] + dot_portable(xr, weight.row(o));
        }
    }
    out
}

avx_dispatch! {
    /// `out[r][o] = bias[o] + x[r] . weight[o]` with `weight` stored `out x in`.
    pub fn affine => affine_portable, affine_avx(x: &Matrix, weight: &Matrix, bias: &[f64]) -> Matrix
}

#[inline(always)]
fn affine_backward_portable(
    x: &Matrix,
    weight: &Matrix,
    grad_out: &Matrix,
    grad_weight: &mut Matrix,
    grad_bias: &mut [f64],
    want_input_grad: bool,
) -> Option<Matrix> {
    for r in 0..x.rows {
        let xr = x.row(r);
        for (o, &g) in grad_out.row(r).iter().enumerate() {
            let gw = grad_weight.row_mut(o);
            if r == 0 {
                if g == 0.0 {
                    gw.fill(0.0);
                } else {
                    for (w, &v) in gw.iter_mut().zip(xr) {
                        *w = g * v;
                    }
                }
                grad_bias[o] = g;
            } else {
                if g != 0.0 {
                    axpy_portable(g, xr, gw);
                }
                grad_bias[o] += g;
            }
        }
    }
    if x.rows == 0 {
        grad_weight.as_mut_slice().fill(0.0);
        grad_bias.fill(0.0);
    }
    want_input_grad.then(|| {
        let mut grad_in = Matrix::zeros(x.rows, x.cols);
        for r in 0..x.rows {
            let gi = grad_in.row_mut(r);
            for (o, &g) in grad_out.row(r).iter().enumerate() {
                if g != 0.0 {
                    axpy_portable(g, weight.row(o), gi);
                }
            }
        }
        grad_in
    })
}

avx_dispatch! {
    /// Writes the parameter gradients of [`affine`] (previous contents are
    /// overwritten) and returns the gradient with respect to its input (when
    /// requested).
    pub fn affine_backward => affine_backward_portable, affine_backward_avx(
        x: &Matrix,
        weight: &Matrix,
        grad_out: &Matrix,
        grad_weight: &mut Matrix,
        grad_bias: &mut [f64],
        want_input_grad: bool
    ) -> Option<Matrix>
}

pub const LEAKY_SLOPE: f64 = 0.01;

#[inline]
pub fn leaky_relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

#[inline]
pub fn leaky_relu_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Numerically stable softmax of one slice, in place.
pub fn softmax_inplace(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        // exp(0) = 1 exactly
        *x = if *x == max { 1.0 } else { (*x - max).exp() };
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..19).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..19).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-9);
    }

    #[test]
    fn accumulate_product_matches_axpy_chain() {
        let h = 5;
        let coeffs = Matrix::from_vec(6, h, (0..30).map(|i| (i as f64 * 0.37).sin()).collect());
        let w_t = Matrix::from_vec(h, 19, (0..95).map(|i| (i as f64 * 0.11).cos()).collect());
        let init = Matrix::from_vec(6, 19, (0..114).map(|i| i as f64 * 1e-3).collect());
        let mut fast = init.clone();
        accumulate_product(&mut fast, &coeffs, &w_t);
        let mut slow = init;
        for b in 0..6 {
            for j in 0..h {
                product_axpy(coeffs.row(b)[j], w_t.row(j), slow.row_mut(b));
            }
        }
        assert_eq!(fast, slow);
        let x: Vec<f64> = (0..37).map(|i| (i as f64).sqrt()).collect();
        assert_eq!(dot(&x, &x).to_bits(), dot_portable(&x, &x).to_bits());
    }

    #[test]
    fn affine_single_row_equals_batch_row() {
        let w = Matrix::from_vec(2, 3, vec![0.1, -0.2, 0.3, 0.7, 0.01, -1.1]);
        let b = [0.5, -0.5];
        let batch = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[0.3, 0.2, 0.1]]);
        let single = Matrix::from_rows(&[&[0.3, 0.2, 0.1]]);
        assert_eq!(affine(&batch, &w, &b).row(1), affine(&single, &w, &b).row(0));
    }

    #[test]
    fn softmax_shift_invariant() {
        let mut a = vec![1.0, 2.0, 3.0];
        let mut b = vec![101.0, 102.0, 103.0];
        softmax_inplace(&mut a);
        softmax_inplace(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
