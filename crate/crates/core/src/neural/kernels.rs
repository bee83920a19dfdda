//! Dense vector kernels with a runtime-selected AVX2/FMA path.

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    #[cfg(target_arch = "x86_64")]
    {
        if fast() {
            // SAFETY: the required CPU features were detected at runtime.
            unsafe { axpy_fma(alpha, x, y) };
            return;
        }
    }
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    #[cfg(target_arch = "x86_64")]
    {
        if fast() {
            // SAFETY: the required CPU features were detected at runtime.
            return unsafe { dot_fma(x, y) };
        }
    }
    dot_portable(x, y)
}

fn dot_portable(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (xc, xr) = x.split_at(x.len() / 4 * 4);
    let (yc, yr) = y.split_at(xc.len());
    for (a, b) in xc.chunks_exact(4).zip(yc.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += a[k] * b[k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (a, b) in xr.iter().zip(yr) {
        s += a * b;
    }
    s
}

#[cfg(target_arch = "x86_64")]
#[inline]
fn fast() -> bool {
    std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma")
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn axpy_fma(alpha: f64, x: &[f64], y: &mut [f64]) {
    use std::arch::x86_64::*;
    let n = x.len().min(y.len());
    let (px, py) = (x.as_ptr(), y.as_mut_ptr());
    let a = _mm256_set1_pd(alpha);
    let mut i = 0;
    while i + 8 <= n {
        let y0 = _mm256_fmadd_pd(a, _mm256_loadu_pd(px.add(i)), _mm256_loadu_pd(py.add(i)));
        let y1 = _mm256_fmadd_pd(a, _mm256_loadu_pd(px.add(i + 4)), _mm256_loadu_pd(py.add(i + 4)));
        _mm256_storeu_pd(py.add(i), y0);
        _mm256_storeu_pd(py.add(i + 4), y1);
        i += 8;
    }
    while i < n {
        *py.add(i) = alpha.mul_add(*px.add(i), *py.add(i));
        i += 1;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn dot_fma(x: &[f64], y: &[f64]) -> f64 {
    use std::arch::x86_64::*;
    let n = x.len().min(y.len());
    let (px, py) = (x.as_ptr(), y.as_ptr());
    let mut a0 = _mm256_setzero_pd();
    let mut a1 = _mm256_setzero_pd();
    let mut i = 0;
    while i + 8 <= n {
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(px.add(i)), _mm256_loadu_pd(py.add(i)), a0);
        a1 = _mm256_fmadd_pd(_mm256_loadu_pd(px.add(i + 4)), _mm256_loadu_pd(py.add(i + 4)), a1);
        i += 8;
    }
    let mut lanes = [0.0f64; 4];
    _mm256_storeu_pd(lanes.as_mut_ptr(), _mm256_add_pd(a0, a1));
    let mut s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    while i < n {
        s = (*px.add(i)).mul_add(*py.add(i), s);
        i += 1;
    }
    s
}

/// `out += Σ_t val[t]·w[idx[t]]` over rows of width `out.len()`, summed in
/// the order given.
pub fn gather_rows(idx: &[u32], val: &[f64], w: &[f64], out: &mut [f64]) {
    let n = out.len();
    let mut j0 = 0;
    #[cfg(target_arch = "x86_64")]
    {
        if fast() {
            assert!(idx.iter().all(|&i| (i as usize + 1) * n <= w.len()));
            // SAFETY: features detected at runtime; every row is in bounds.
            unsafe { gather_rows_fma(idx, val, w, out) };
            j0 = n / 16 * 16;
        }
    }
    if j0 < n {
        for (&i, &v) in idx.iter().zip(val) {
            let row = &w[i as usize * n..(i as usize + 1) * n];
            for (o, r) in out[j0..].iter_mut().zip(&row[j0..]) {
                *o = v.mul_add(*r, *o);
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn gather_rows_fma(idx: &[u32], val: &[f64], w: &[f64], out: &mut [f64]) {
    use std::arch::x86_64::*;
    let n = out.len();
    let (pw, po) = (w.as_ptr(), out.as_mut_ptr());
    let mut j = 0;
    while j + 16 <= n {
        let mut acc = [_mm256_setzero_pd(); 4];
        for c in 0..4 {
            acc[c] = _mm256_loadu_pd(po.add(j + 4 * c));
        }
        for (&i, &v) in idx.iter().zip(val) {
            let row = pw.add(i as usize * n + j);
            let b = _mm256_set1_pd(v);
            for c in 0..4 {
                acc[c] = _mm256_fmadd_pd(b, _mm256_loadu_pd(row.add(4 * c)), acc[c]);
            }
        }
        for c in 0..4 {
            _mm256_storeu_pd(po.add(j + 4 * c), acc[c]);
        }
        j += 16;
    }
}

/// `out[s] += Σ_i x[s,i]·w[i]` for row-major `x` (m × k), `w` (k × n) and
/// `out` (m × n). Each output sums its rows in ascending `i`.
pub fn rows_times(x: &[f64], w: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    assert!(x.len() >= m * k && w.len() >= k * n && out.len() >= m * n);
    let mut s0 = 0;
    #[cfg(target_arch = "x86_64")]
    {
        if fast() && n >= 8 {
            // SAFETY: features detected at runtime; bounds asserted above.
            unsafe { rows_times_fma(x, w, out, m, k, n) };
            s0 = m / 4 * 4;
        }
    }
    for s in s0..m {
        let o = &mut out[s * n..(s + 1) * n];
        for i in 0..k {
            let xi = x[s * k + i];
            if xi != 0.0 {
                axpy(xi, &w[i * n..(i + 1) * n], o);
            }
        }
    }
}

/// `g[i] += Σ_s x[s,i]·d[s]` for `x` (m × k), `d` (m × n) and `g` (k × n),
/// summing samples in ascending `s`.
pub fn outer_acc(x: &[f64], d: &[f64], g: &mut [f64], m: usize, k: usize, n: usize) {
    assert!(x.len() >= m * k && d.len() >= m * n && g.len() >= k * n);
    let mut i0 = 0;
    #[cfg(target_arch = "x86_64")]
    {
        if fast() && n >= 8 {
            // SAFETY: features detected at runtime; bounds asserted above.
            unsafe { outer_acc_fma(x, d, g, m, k, n) };
            i0 = k / 4 * 4;
        }
    }
    for i in i0..k {
        let gi = &mut g[i * n..(i + 1) * n];
        for s in 0..m {
            let xi = x[s * k + i];
            if xi != 0.0 {
                axpy(xi, &d[s * n..(s + 1) * n], gi);
            }
        }
    }
}

/// `out[s,i] = w[i]·d[s]` where `x[s,i] > 0`, else 0; `w` is k × n.
pub fn masked_dots(d: &[f64], w: &[f64], x: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    assert!(d.len() >= m * n && w.len() >= k * n && x.len() >= m * k && out.len() >= m * k);
    #[cfg(target_arch = "x86_64")]
    {
        if fast() {
            // SAFETY: features detected at runtime; bounds asserted above.
            unsafe { masked_dots_fma(d, w, x, out, m, k, n) };
            return;
        }
    }
    for s in 0..m {
        let ds = &d[s * n..(s + 1) * n];
        for i in 0..k {
            out[s * k + i] = if x[s * k + i] > 0.0 { dot(&w[i * n..(i + 1) * n], ds) } else { 0.0 };
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn rows_times_fma(x: &[f64], w: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    use std::arch::x86_64::*;
    let (px, pw, po) = (x.as_ptr(), w.as_ptr(), out.as_mut_ptr());
    let mut s = 0;
    while s + 4 <= m {
        let mut j = 0;
        while j + 8 <= n {
            let mut acc = [[_mm256_setzero_pd(); 2]; 4];
            for r in 0..4 {
                for c in 0..2 {
                    acc[r][c] = _mm256_loadu_pd(po.add((s + r) * n + j + 4 * c));
                }
            }
            for i in 0..k {
                let xs = [
                    *px.add(s * k + i),
                    *px.add((s + 1) * k + i),
                    *px.add((s + 2) * k + i),
                    *px.add((s + 3) * k + i),
                ];
                if xs == [0.0; 4] {
                    continue;
                }
                let row = pw.add(i * n + j);
                let wv = [_mm256_loadu_pd(row), _mm256_loadu_pd(row.add(4))];
                for r in 0..4 {
                    let b = _mm256_set1_pd(xs[r]);
                    for c in 0..2 {
                        acc[r][c] = _mm256_fmadd_pd(b, wv[c], acc[r][c]);
                    }
                }
            }
            for r in 0..4 {
                for c in 0..2 {
                    _mm256_storeu_pd(po.add((s + r) * n + j + 4 * c), acc[r][c]);
                }
            }
            j += 8;
        }
        for r in s..s + 4 {
            for jj in j..n {
                let mut a = *po.add(r * n + jj);
                for i in 0..k {
                    a = (*px.add(r * k + i)).mul_add(*pw.add(i * n + jj), a);
                }
                *po.add(r * n + jj) = a;
            }
        }
        s += 4;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn outer_acc_fma(x: &[f64], d: &[f64], g: &mut [f64], m: usize, k: usize, n: usize) {
    use std::arch::x86_64::*;
    let (px, pd, pg) = (x.as_ptr(), d.as_ptr(), g.as_mut_ptr());
    let mut i = 0;
    while i + 4 <= k {
        let mut j = 0;
        while j + 8 <= n {
            let mut acc = [[_mm256_setzero_pd(); 2]; 4];
            for r in 0..4 {
                for c in 0..2 {
                    acc[r][c] = _mm256_loadu_pd(pg.add((i + r) * n + j + 4 * c));
                }
            }
            for s in 0..m {
                let xs = px.add(s * k + i);
                let xs = [*xs, *xs.add(1), *xs.add(2), *xs.add(3)];
                if xs == [0.0; 4] {
                    continue;
                }
                let row = pd.add(s * n + j);
                let dv = [_mm256_loadu_pd(row), _mm256_loadu_pd(row.add(4))];
                for r in 0..4 {
                    let b = _mm256_set1_pd(xs[r]);
                    for c in 0..2 {
                        acc[r][c] = _mm256_fmadd_pd(b, dv[c], acc[r][c]);
                    }
                }
            }
            for r in 0..4 {
                for c in 0..2 {
                    _mm256_storeu_pd(pg.add((i + r) * n + j + 4 * c), acc[r][c]);
                }
            }
            j += 8;
        }
        for r in i..i + 4 {
            for jj in j..n {
                let mut a = *pg.add(r * n + jj);
                for s in 0..m {
                    a = (*px.add(s * k + r)).mul_add(*pd.add(s * n + jj), a);
                }
                *pg.add(r * n + jj) = a;
            }
        }
        i += 4;
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn masked_dots_fma(d: &[f64], w: &[f64], x: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    use std::arch::x86_64::*;
    let (pd, pw) = (d.as_ptr(), w.as_ptr());
    let n4 = n / 4 * 4;
    let hsum = |v: __m256d| {
        let mut l = [0.0f64; 4];
        _mm256_storeu_pd(l.as_mut_ptr(), v);
        (l[0] + l[1]) + (l[2] + l[3])
    };
    let mut s = 0;
    while s < m {
        let sb = (m - s).min(4);
        let mut i = 0;
        while i < k {
            let ib = (k - i).min(2);
            let mut acc = [[_mm256_setzero_pd(); 4]; 2];
            let mut j = 0;
            while j < n4 {
                let dv = [
                    _mm256_loadu_pd(pd.add(s * n + j)),
                    _mm256_loadu_pd(pd.add((s + 1).min(m - 1) * n + j)),
                    _mm256_loadu_pd(pd.add((s + 2).min(m - 1) * n + j)),
                    _mm256_loadu_pd(pd.add((s + 3).min(m - 1) * n + j)),
                ];
                for r in 0..2 {
                    let wv = _mm256_loadu_pd(pw.add((i + r).min(k - 1) * n + j));
                    for c in 0..4 {
                        acc[r][c] = _mm256_fmadd_pd(wv, dv[c], acc[r][c]);
                    }
                }
                j += 4;
            }
            for r in 0..ib {
                for c in 0..sb {
                    let (row, col) = (i + r, s + c);
                    let mut v = hsum(acc[r][c]);
                    for jj in n4..n {
                        v = (*pw.add(row * n + jj)).mul_add(*pd.add(col * n + jj), v);
                    }
                    out[col * k + row] = if x[col * k + row] > 0.0 { v } else { 0.0 };
                }
            }
            i += 2;
        }
        s += 4;
    }
}
