//! Row-major dense kernels. Inner loops run over contiguous memory so they
//! vectorize; reductions use fixed-width partial sums in a fixed order.

use super::Real;

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail += *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Real>(y: &mut [T], alpha: T, x: &[T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// `out = a · b (+ bias)` with `a: m×k`, `b: k×n`.
pub fn matmul<T: Real>(a: &[T], b: &[T], bias: Option<&[T]>, out: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        match bias {
            Some(bv) => row.copy_from_slice(bv),
            None => row.fill(T::zero()),
        }
        for p in 0..k {
            let av = a[i * k + p];
            if av != T::zero() {
                axpy(row, av, &b[p * n..(p + 1) * n]);
            }
        }
    }
}

/// `out += aᵀ · d` with `a: m×k`, `d: m×n`, `out: k×n`.
pub fn acc_at_b<T: Real>(a: &[T], d: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let drow = &d[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av != T::zero() {
                axpy(&mut out[p * n..(p + 1) * n], av, drow);
            }
        }
    }
}

/// `out (+)= d · bᵀ` with `d: m×n`, `b: k×n`, `out: m×k`.
pub fn a_bt<T: Real>(d: &[T], b: &[T], out: &mut [T], m: usize, n: usize, k: usize, accumulate: bool) {
    for i in 0..m {
        let drow = &d[i * n..(i + 1) * n];
        for p in 0..k {
            let v = dot(drow, &b[p * n..(p + 1) * n]);
            if accumulate {
                out[i * k + p] += v;
            } else {
                out[i * k + p] = v;
            }
        }
    }
}

/// Column sums of `d: m×n` added into `out`.
pub fn acc_colsum<T: Real>(d: &[T], out: &mut [T], m: usize, n: usize) {
    for i in 0..m {
        for (o, v) in out.iter_mut().zip(&d[i * n..(i + 1) * n]) {
            *o += *v;
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// Tanh-approximated GELU.
#[inline]
pub fn gelu<T: Real>(x: T) -> T {
    let c = T::from_f64(GELU_C).unwrap();
    let a = T::from_f64(0.044715).unwrap();
    let half = T::from_f64(0.5).unwrap();
    half * x * (T::one() + (c * (x + a * x * x * x)).tanh())
}

#[inline]
pub fn gelu_grad<T: Real>(x: T) -> T {
    let c = T::from_f64(GELU_C).unwrap();
    let a = T::from_f64(0.044715).unwrap();
    let half = T::from_f64(0.5).unwrap();
    let three = T::from_f64(3.0).unwrap();
    let t = (c * (x + a * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + three * a * x * x)
}

pub const RMS_EPS: f64 = 1e-6;

/// Row-wise RMS norm; returns the inverse RMS per row.
pub fn rmsnorm<T: Real>(x: &[T], gain: &[T], out: &mut [T], rows: usize, d: usize) -> Vec<T> {
    let eps = T::from_f64(RMS_EPS).unwrap();
    let dd = T::from_usize(d).unwrap();
    (0..rows)
        .map(|i| {
            let xr = &x[i * d..(i + 1) * d];
            let r = T::one() / (dot(xr, xr) / dd + eps).sqrt();
            for ((o, xv), g) in out[i * d..(i + 1) * d].iter_mut().zip(xr).zip(gain) {
                *o = *xv * r * *g;
            }
            r
        })
        .collect()
}

/// Backward of [`rmsnorm`]: accumulates into `dx` and `dgain`.
pub fn rmsnorm_backward<T: Real>(
    x: &[T],
    inv: &[T],
    gain: &[T],
    dy: &[T],
    dx: &mut [T],
    dgain: &mut [T],
    rows: usize,
    d: usize,
) {
    let dd = T::from_usize(d).unwrap();
    let mut gdy = vec![T::zero(); d];
    for i in 0..rows {
        let (xr, dyr) = (&x[i * d..(i + 1) * d], &dy[i * d..(i + 1) * d]);
        let r = inv[i];
        for j in 0..d {
            dgain[j] += dyr[j] * xr[j] * r;
            gdy[j] = gain[j] * dyr[j];
        }
        let s = dot(&gdy, xr);
        let coef = r * r * r * s / dd;
        for (j, o) in dx[i * d..(i + 1) * d].iter_mut().enumerate() {
            *o += r * gdy[j] - coef * xr[j];
        }
    }
}

/// In-place softmax of `row`; returns the log normalizer.
pub fn softmax_in_place<T: Real>(row: &mut [T]) -> T {
    let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_agree_with_naive_products() {
        let (m, k, n) = (3, 5, 4);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.91).cos()).collect();
        let mut out = vec![0.0; m * n];
        matmul(&a, &b, None, &mut out, m, k, n);
        for i in 0..m {
            for j in 0..n {
                let naive: f64 = (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum();
                assert!((out[i * n + j] - naive).abs() < 1e-12);
            }
        }
        // aᵀ·d and d·bᵀ
        let mut atd = vec![0.0; k * n];
        acc_at_b(&a, &out, &mut atd, m, k, n);
        let mut dbt = vec![0.0; m * k];
        a_bt(&out, &b, &mut dbt, m, n, k, false);
        for p in 0..k {
            for j in 0..n {
                let naive: f64 = (0..m).map(|i| a[i * k + p] * out[i * n + j]).sum();
                assert!((atd[p * n + j] - naive).abs() < 1e-12);
            }
        }
        for i in 0..m {
            for p in 0..k {
                let naive: f64 = (0..n).map(|j| out[i * n + j] * b[p * n + j]).sum();
                assert!((dbt[i * k + p] - naive).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gelu_derivative_matches_differences() {
        for i in -40..=40 {
            let x = f64::from(i) * 0.1;
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn dot_handles_remainders() {
        let a: Vec<f64> = (0..19).map(f64::from).collect();
        assert_eq!(dot(&a, &a), (0..19).map(|i| f64::from(i * i)).sum::<f64>());
    }
}
