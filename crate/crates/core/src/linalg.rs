//! In-place inverse of a dense symmetric positive-definite matrix.
//!
//! `A = L Lᵀ` (Cholesky), `M = L⁻¹`, `A⁻¹ = Mᵀ M`. Each stage overwrites the
//! lower triangle of the same row-major buffer and only needs `O(block · n)`
//! scratch, so inverting an `n x n` matrix costs one `n²` allocation in
//! total. All three stages are organized around contiguous row prefixes and
//! process rows in blocks so that one pass over the already finished rows
//! serves a whole block.
//!
//! Every output entry is produced by a fixed sequence of operations, so the
//! result is bit-for-bit reproducible.

const BLOCK: usize = 64;
// Length of the inner-dimension tiles; 64 rows of this many f64 fit in L2.
const KTILE: usize = 256;

/// Failure of the Cholesky stage: the pivot at `index` was not positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NotPositiveDefinite {
    pub index: usize,
    pub pivot: f64,
}

/// Summary of a successful factorization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Factorization {
    /// Smallest pivot `A_jj − Σ_k L_jk²` encountered (the squared diagonal of `L`).
    pub min_pivot: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

/// Four dot products sharing the left operand.
#[inline]
fn dot4(x: &[f64], ys: [&[f64]; 4]) -> [f64; 4] {
    let m = x.len();
    let [y0, y1, y2, y3] = ys.map(|y| &y[..m]);
    let mut acc = [[0.0f64; 2]; 4];
    let pairs = m / 2;
    for p in 0..pairs {
        let k = 2 * p;
        let (a0, a1) = (x[k], x[k + 1]);
        acc[0][0] += a0 * y0[k];
        acc[0][1] += a1 * y0[k + 1];
        acc[1][0] += a0 * y1[k];
        acc[1][1] += a1 * y1[k + 1];
        acc[2][0] += a0 * y2[k];
        acc[2][1] += a1 * y2[k + 1];
        acc[3][0] += a0 * y3[k];
        acc[3][1] += a1 * y3[k + 1];
    }
    let mut out = [0.0; 4];
    for t in 0..4 {
        out[t] = acc[t][0] + acc[t][1];
    }
    if m % 2 == 1 {
        let k = m - 1;
        for (t, y) in [y0, y1, y2, y3].iter().enumerate() {
            out[t] += x[k] * y[k];
        }
    }
    out
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Overwrites the lower triangle (including the diagonal) of `a` with its
/// Cholesky factor `L`. The strict upper triangle is not read or written.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<Factorization, NotPositiveDefinite> {
    assert_eq!(a.len(), n * n);
    let mut min_pivot = f64::INFINITY;
    let mut block_start = 0;
    while block_start < n {
        let block_end = (block_start + BLOCK).min(n);
        // Columns of the block rows are finished chunk by chunk. Rows before
        // the block are final; a block row's columns left of the current
        // chunk were finished by earlier chunks.
        let mut j0 = 0;
        while j0 < block_end {
            let j1 = (j0 + BLOCK).min(block_end);
            // Rectangular part: k < j0, in tiles that stay in cache.
            let mut k0 = 0;
            while k0 < j0 {
                let k1 = (k0 + KTILE).min(j0);
                for i in block_start..block_end {
                    let (head, tail) = a.split_at_mut(i * n);
                    // reads stay left of j0, writes start at j0
                    let (left, right) = tail[..n].split_at_mut(j0);
                    let x = &left[k0..k1];
                    let seg = |j: usize| -> &[f64] {
                        if j == i {
                            x
                        } else {
                            &head[j * n + k0..j * n + k1]
                        }
                    };
                    let j_end = j1.min(i + 1);
                    let mut j = j0;
                    while j + 4 <= j_end {
                        let d = dot4(x, [seg(j), seg(j + 1), seg(j + 2), seg(j + 3)]);
                        for (t, dt) in d.iter().enumerate() {
                            right[j + t - j0] -= dt;
                        }
                        j += 4;
                    }
                    for j in j..j_end {
                        right[j - j0] -= dot(x, seg(j));
                    }
                }
                k0 = k1;
            }
            // Triangular part: j0 <= k < j, column by column.
            for j in j0..j1 {
                let (done, rest) = a.split_at_mut(j * n + n);
                let row_j = &mut done[j * n..];
                if j >= block_start {
                    let d = row_j[j] - dot(&row_j[j0..j], &row_j[j0..j]);
                    min_pivot = min_pivot.min(d);
                    if !(d > 0.0) || !d.is_finite() {
                        return Err(NotPositiveDefinite { index: j, pivot: d });
                    }
                    row_j[j] = d.sqrt();
                }
                let row_j = &done[j * n..];
                let ljj = row_j[j];
                for i in block_start.max(j + 1)..block_end {
                    let row_i = &mut rest[(i - j - 1) * n..(i - j) * n];
                    let s = row_i[j] - dot(&row_i[j0..j], &row_j[j0..j]);
                    row_i[j] = s / ljj;
                }
            }
            j0 = j1;
        }
        block_start = block_end;
    }
    Ok(Factorization { min_pivot })
}

/// Replaces the lower-triangular `L` stored in `a` by `L⁻¹`.
pub fn invert_lower_in_place(a: &mut [f64], n: usize) {
    assert_eq!(a.len(), n * n);
    // Row i of M = L⁻¹:  M_i = (e_i − Σ_{k<i} L_ik M_k) / L_ii.
    let mut scratch = vec![0.0; BLOCK * n];
    let mut block_start = 0;
    while block_start < n {
        let block_end = (block_start + BLOCK).min(n);
        let rows = block_end - block_start;
        scratch[..rows * n].fill(0.0);
        let (head, tail) = a.split_at(block_start * n);
        // Contributions of finished rows k < block_start, one column tile
        // at a time. M_kc is zero for c > k.
        let mut c0 = 0;
        while c0 < block_start {
            let c1 = (c0 + KTILE).min(block_start);
            for k in c0..block_start {
                let m_k = &head[k * n + c0..k * n + c1.min(k + 1)];
                for r in 0..rows {
                    let l_ik = tail[r * n + k];
                    if l_ik != 0.0 {
                        axpy(l_ik, m_k, &mut scratch[r * n + c0..r * n + c0 + m_k.len()]);
                    }
                }
            }
            c0 = c1;
        }
        // Within the block, rows are finished in order.
        for r in 0..rows {
            let i = block_start + r;
            for k in block_start..i {
                let l_ik = a[i * n + k];
                if l_ik != 0.0 {
                    let m_k = &a[k * n..k * n + k + 1];
                    axpy(l_ik, m_k, &mut scratch[r * n..r * n + k + 1]);
                }
            }
            let inv_lii = 1.0 / a[i * n + i];
            let row = &mut a[i * n..i * n + i + 1];
            for (dst, s) in row[..i].iter_mut().zip(&scratch[r * n..r * n + i]) {
                *dst = -s * inv_lii;
            }
            row[i] = inv_lii;
        }
        block_start = block_end;
    }
}

/// Replaces the lower-triangular `M` stored in `a` by the full symmetric
/// product `Mᵀ M`.
pub fn lower_gram_in_place(a: &mut [f64], n: usize) {
    assert_eq!(a.len(), n * n);
    // (MᵀM)_bc = Σ_{i≥b} M_ib M_ic for c ≤ b: row b of the result only needs
    // rows i ≥ b of M, so rows can be overwritten in ascending order.
    let mut scratch = vec![0.0; BLOCK * n];
    let mut block_start = 0;
    while block_start < n {
        let block_end = (block_start + BLOCK).min(n);
        let rows = block_end - block_start;
        scratch[..rows * n].fill(0.0);
        let mut c0 = 0;
        while c0 < block_end {
            let c1 = (c0 + KTILE).min(block_end);
            for i in block_start.max(c0)..n {
                let m_i = &a[i * n..i * n + i + 1];
                let last = rows.min(i + 1 - block_start);
                for r in 0..last {
                    let b = block_start + r;
                    let hi = c1.min(b + 1);
                    if hi <= c0 {
                        continue;
                    }
                    let m_ib = m_i[b];
                    if m_ib != 0.0 {
                        axpy(m_ib, &m_i[c0..hi], &mut scratch[r * n + c0..r * n + hi]);
                    }
                }
            }
            c0 = c1;
        }
        for r in 0..rows {
            let b = block_start + r;
            a[b * n..b * n + b + 1].copy_from_slice(&scratch[r * n..r * n + b + 1]);
        }
        block_start = block_end;
    }
    mirror_lower(a, n);
}

// Copies the strict lower triangle onto the upper one, tile by tile.
fn mirror_lower(a: &mut [f64], n: usize) {
    for i0 in (0..n).step_by(BLOCK) {
        for j0 in (0..=i0).step_by(BLOCK) {
            for i in i0..(i0 + BLOCK).min(n) {
                for j in j0..(j0 + BLOCK).min(i) {
                    a[j * n + i] = a[i * n + j];
                }
            }
        }
    }
}

/// Inverts the symmetric positive-definite matrix in `a` (row-major, only the
/// lower triangle is read). On success `a` holds the full symmetric inverse.
pub fn spd_inverse_in_place(a: &mut [f64], n: usize) -> Result<Factorization, NotPositiveDefinite> {
    let f = cholesky_in_place(a, n)?;
    invert_lower_in_place(a, n);
    lower_gram_in_place(a, n);
    Ok(f)
}
