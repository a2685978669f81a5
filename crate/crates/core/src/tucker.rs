//! Mode-2 Tucker decomposition of convolution kernels.
//!
//! A KxK kernel mapping C1 to C2 channels is factored along its two channel
//! modes as `W[.., i, o] = sum_ab U[i, a] G[.., a, b] V[o, b]`. Applying it
//! as a 1x1 conv (U), a KxK conv (G) and a 1x1 conv (V^T) is exactly the
//! Tucker layer structure.
//!
//! Factors come from a truncated higher-order SVD; singular vectors are
//! computed with one-sided Jacobi rotations.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::analysis::{tucker_ops, ConvOp};
use crate::error::{NasError, Result};

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Magic prefix of the binary kernel format.
pub const KERNEL_MAGIC: &[u8; 4] = b"TKRN";
/// Largest element count accepted when reading kernel files.
pub const MAX_KERNEL_ELEMENTS: usize = 1 << 24;

/// Dense `(K, K, C1, C2)` kernel, row-major with C2 fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel {
    pub kernel: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub data: Vec<f64>,
}

impl ConvKernel {
    pub fn zeros(kernel: usize, c_in: usize, c_out: usize) -> Self {
        ConvKernel {
            kernel,
            c_in,
            c_out,
            data: vec![0.0; kernel * kernel * c_in * c_out],
        }
    }

    pub fn new(kernel: usize, c_in: usize, c_out: usize, data: Vec<f64>) -> Result<Self> {
        let k = ConvKernel {
            kernel,
            c_in,
            c_out,
            data,
        };
        k.check()?;
        Ok(k)
    }

    /// Kernel with i.i.d. standard normal entries.
    pub fn random<R: Rng + ?Sized>(kernel: usize, c_in: usize, c_out: usize, rng: &mut R) -> Result<Self> {
        let n = kernel * kernel * c_in * c_out;
        let data = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        Self::new(kernel, c_in, c_out, data)
    }

    fn check(&self) -> Result<()> {
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(NasError::Shape(format!("kernel must be odd (got {})", self.kernel)));
        }
        if self.c_in == 0 || self.c_out == 0 {
            return Err(NasError::Shape("channel counts must be >= 1".into()));
        }
        let n = self.kernel * self.kernel * self.c_in * self.c_out;
        if self.data.len() != n {
            return Err(NasError::Shape(format!(
                "expected {n} entries, got {}",
                self.data.len()
            )));
        }
        if self.data.iter().any(|x| !x.is_finite()) {
            return Err(NasError::NonFinite("kernel entry".into()));
        }
        Ok(())
    }

    #[inline]
    fn idx(&self, ky: usize, kx: usize, i: usize, o: usize) -> usize {
        ((ky * self.kernel + kx) * self.c_in + i) * self.c_out + o
    }

    pub fn at(&self, ky: usize, kx: usize, i: usize, o: usize) -> f64 {
        self.data[self.idx(ky, kx, i, o)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Input-channel unfolding: `C1 x (K*K*C2)`.
    pub fn unfold_input(&self) -> DMatrix<f64> {
        let k2 = self.kernel * self.kernel;
        DMatrix::from_fn(self.c_in, k2 * self.c_out, |i, col| {
            let (t, o) = (col / self.c_out, col % self.c_out);
            self.data[(t * self.c_in + i) * self.c_out + o]
        })
    }

    /// Output-channel unfolding: `C2 x (K*K*C1)`.
    pub fn unfold_output(&self) -> DMatrix<f64> {
        let k2 = self.kernel * self.kernel;
        DMatrix::from_fn(self.c_out, k2 * self.c_in, |o, col| {
            let (t, i) = (col / self.c_in, col % self.c_in);
            self.data[(t * self.c_in + i) * self.c_out + o]
        })
    }

    /// Binary layout: `TKRN`, four little-endian u32 dims (K, K, C1, C2), then
    /// the entries as little-endian f64 in row-major order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + 8 * self.data.len());
        out.extend_from_slice(KERNEL_MAGIC);
        for d in [self.kernel, self.kernel, self.c_in, self.c_out] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    /// Reads the binary layout, or the text layout (a `K K C1 C2` header line
    /// followed by whitespace separated entries; `#` starts a comment).
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(KERNEL_MAGIC) {
            Self::parse_binary(bytes)
        } else {
            let text = std::str::from_utf8(bytes)
                .map_err(|e| NasError::Shape(format!("kernel file is neither binary nor UTF-8: {e}")))?;
            Self::parse_text(text)
        }
    }

    fn parse_binary(bytes: &[u8]) -> Result<Self> {
        let header = |msg: &str| NasError::Parse {
            line: 0,
            column: 0,
            message: msg.to_string(),
        };
        if bytes.len() < 20 {
            return Err(header("truncated header"));
        }
        let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let (k1, k2, c_in, c_out) = (dim(0), dim(1), dim(2), dim(3));
        if k1 != k2 {
            return Err(header("kernel must be square"));
        }
        let n = check_elements(k1, c_in, c_out)?;
        let body = &bytes[20..];
        if body.len() != 8 * n {
            return Err(NasError::Parse {
                line: 0,
                column: 20,
                message: format!("expected {} data bytes, got {}", 8 * n, body.len()),
            });
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(k1, c_in, c_out, data)
    }

    fn parse_text(text: &str) -> Result<Self> {
        let mut tokens = text.lines().enumerate().flat_map(|(ln, line)| {
            let line = line.split('#').next().unwrap_or("");
            line.split_whitespace().map(move |t| {
                let col = t.as_ptr() as usize - line.as_ptr() as usize;
                (ln + 1, col + 1, t)
            })
        });
        let mut dims = [0usize; 4];
        for d in &mut dims {
            let (line, column, tok) = tokens.next().ok_or(NasError::Parse {
                line: 0,
                column: 0,
                message: "missing K K C1 C2 header".into(),
            })?;
            *d = tok.parse().map_err(|_| NasError::Parse {
                line,
                column,
                message: format!("bad dimension {tok:?}"),
            })?;
        }
        if dims[0] != dims[1] {
            return Err(NasError::Shape("kernel must be square".into()));
        }
        let n = check_elements(dims[0], dims[2], dims[3])?;
        let mut data = Vec::with_capacity(n.min(1 << 16));
        for (line, column, tok) in tokens {
            if data.len() == n {
                return Err(NasError::Parse {
                    line,
                    column,
                    message: "trailing data".into(),
                });
            }
            data.push(tok.parse::<f64>().map_err(|_| NasError::Parse {
                line,
                column,
                message: format!("bad number {tok:?}"),
            })?);
        }
        Self::new(dims[0], dims[2], dims[3], data)
    }
}

fn check_elements(k: usize, c_in: usize, c_out: usize) -> Result<usize> {
    k.checked_mul(k)
        .and_then(|x| x.checked_mul(c_in))
        .and_then(|x| x.checked_mul(c_out))
        .filter(|&n| n <= MAX_KERNEL_ELEMENTS)
        .ok_or_else(|| NasError::Shape(format!("kernel {k}x{k}x{c_in}x{c_out} is too large")))
}

/// Left singular vectors of `m` (as columns of a square orthogonal matrix)
/// and the matching singular values, sorted descending. Each vector's
/// largest-magnitude entry is made positive.
pub fn left_singular_vectors(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    // One-sided Jacobi on the columns of m^T: the accumulated rotation holds
    // the right singular vectors of m^T, i.e. the left ones of m.
    let mut a = m.transpose();
    let n = a.ncols();
    let mut rot = DMatrix::<f64>::identity(n, n);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma == 0.0 {
                    continue;
                }
                let scale = (alpha * beta).sqrt();
                off = off.max(gamma.abs() / scale);
                if gamma.abs() <= JACOBI_TOL * scale {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut rot, p, q, c, s);
            }
        }
        if off <= JACOBI_TOL {
            break;
        }
    }

    let sigma: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let mut u = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = rot.column(src).clone_owned();
        let lead = col
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if lead < 0.0 {
            col.neg_mut();
        }
        u.set_column(dst, &col);
    }
    (u, order.iter().map(|&i| sigma[i]).collect())
}

fn rotate(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let x = m[(r, p)];
        let y = m[(r, q)];
        m[(r, p)] = c * x - s * y;
        m[(r, q)] = s * x + c * y;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tucker2Factors {
    /// `C1 x r1`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// `(K, K, r1, r2)` core.
    pub core: ConvKernel,
    /// `C2 x r2`, orthonormal columns.
    pub v: DMatrix<f64>,
}

impl Tucker2Factors {
    pub fn ranks(&self) -> (usize, usize) {
        (self.u.ncols(), self.v.ncols())
    }

    fn check(&self) -> Result<()> {
        if self.u.ncols() != self.core.c_in || self.v.ncols() != self.core.c_out {
            return Err(NasError::Shape(format!(
                "factor ranks ({}, {}) do not match core ({}, {})",
                self.u.ncols(),
                self.v.ncols(),
                self.core.c_in,
                self.core.c_out
            )));
        }
        Ok(())
    }
}

/// Truncated HOSVD along the two channel modes.
pub fn tucker2(kernel: &ConvKernel, r1: usize, r2: usize) -> Result<Tucker2Factors> {
    if r1 == 0 || r1 > kernel.c_in {
        return Err(NasError::Rank(format!("r1 = {r1} not in 1..={}", kernel.c_in)));
    }
    if r2 == 0 || r2 > kernel.c_out {
        return Err(NasError::Rank(format!("r2 = {r2} not in 1..={}", kernel.c_out)));
    }
    let (u_full, _) = left_singular_vectors(&kernel.unfold_input());
    let (v_full, _) = left_singular_vectors(&kernel.unfold_output());
    let u = u_full.columns(0, r1).clone_owned();
    let v = v_full.columns(0, r2).clone_owned();

    let k = kernel.kernel;
    let mut core = ConvKernel::zeros(k, r1, r2);
    for ky in 0..k {
        for kx in 0..k {
            // slice (C1 x C2) -> U^T slice V
            let slice = DMatrix::from_fn(kernel.c_in, kernel.c_out, |i, o| kernel.at(ky, kx, i, o));
            let g = u.transpose() * slice * &v;
            for a in 0..r1 {
                for b in 0..r2 {
                    let at = core.idx(ky, kx, a, b);
                    core.data[at] = g[(a, b)];
                }
            }
        }
    }
    Ok(Tucker2Factors { u, core, v })
}

pub fn reconstruct(factors: &Tucker2Factors) -> Result<ConvKernel> {
    factors.check()?;
    let k = factors.core.kernel;
    let (c_in, c_out) = (factors.u.nrows(), factors.v.nrows());
    let mut out = ConvKernel::zeros(k, c_in, c_out);
    for ky in 0..k {
        for kx in 0..k {
            let g = DMatrix::from_fn(factors.core.c_in, factors.core.c_out, |a, b| {
                factors.core.at(ky, kx, a, b)
            });
            let w = &factors.u * g * factors.v.transpose();
            for i in 0..c_in {
                for o in 0..c_out {
                    let at = out.idx(ky, kx, i, o);
                    out.data[at] = w[(i, o)];
                }
            }
        }
    }
    Ok(out)
}

/// `|kernel - reconstruct(factors)|_F / |kernel|_F`; zero for a zero kernel
/// reconstructed exactly.
pub fn rel_error(kernel: &ConvKernel, factors: &Tucker2Factors) -> Result<f64> {
    let approx = reconstruct(factors)?;
    if (approx.kernel, approx.c_in, approx.c_out) != (kernel.kernel, kernel.c_in, kernel.c_out) {
        return Err(NasError::Shape("factors do not match kernel".into()));
    }
    let diff = kernel
        .data
        .iter()
        .zip(&approx.data)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = kernel.frobenius_norm();
    if norm == 0.0 {
        Ok(if diff == 0.0 { 0.0 } else { f64::INFINITY })
    } else {
        Ok(diff / norm)
    }
}

/// `(H, W, C)` activation map, channels fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn random<R: Rng + ?Sized>(height: usize, width: usize, channels: usize, rng: &mut R) -> Self {
        FeatureMap {
            height,
            width,
            channels,
            data: (0..height * width * channels)
                .map(|_| StandardNormal.sample(rng))
                .collect(),
        }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest entrywise deviation, relative to the largest entry of `self`.
    pub fn max_rel_deviation(&self, other: &FeatureMap) -> f64 {
        let dev = self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = self.max_abs();
        if scale == 0.0 {
            dev
        } else {
            dev / scale
        }
    }
}

/// Stride-1 convolution with zero "same" padding.
pub fn apply_conv(kernel: &ConvKernel, input: &FeatureMap) -> Result<FeatureMap> {
    if input.channels != kernel.c_in {
        return Err(NasError::Shape(format!(
            "input has {} channels, kernel expects {}",
            input.channels, kernel.c_in
        )));
    }
    let (h, w, k) = (input.height, input.width, kernel.kernel);
    let pad = (k / 2) as isize;
    let mut out = vec![0.0; h * w * kernel.c_out];
    for y in 0..h {
        for x in 0..w {
            let dst = &mut out[(y * w + x) * kernel.c_out..(y * w + x + 1) * kernel.c_out];
            for ky in 0..k {
                let sy = y as isize + ky as isize - pad;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let sx = x as isize + kx as isize - pad;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    for i in 0..kernel.c_in {
                        let v = input.at(sy as usize, sx as usize, i);
                        let row = kernel.idx(ky, kx, i, 0);
                        for (o, d) in dst.iter_mut().enumerate() {
                            *d += v * kernel.data[row + o];
                        }
                    }
                }
            }
        }
    }
    Ok(FeatureMap {
        height: h,
        width: w,
        channels: kernel.c_out,
        data: out,
    })
}

fn pointwise(m: &DMatrix<f64>, input: &FeatureMap) -> FeatureMap {
    let (c_in, c_out) = (m.nrows(), m.ncols());
    let mut data = vec![0.0; input.height * input.width * c_out];
    for p in 0..input.height * input.width {
        for o in 0..c_out {
            data[p * c_out + o] = (0..c_in).map(|i| input.data[p * c_in + i] * m[(i, o)]).sum();
        }
    }
    FeatureMap {
        height: input.height,
        width: input.width,
        channels: c_out,
        data,
    }
}

/// 1x1 conv by U, KxK conv by the core, 1x1 conv by V^T.
pub fn apply_sequence(factors: &Tucker2Factors, input: &FeatureMap) -> Result<FeatureMap> {
    factors.check()?;
    if input.channels != factors.u.nrows() {
        return Err(NasError::Shape(format!(
            "input has {} channels, factors expect {}",
            input.channels,
            factors.u.nrows()
        )));
    }
    let z = pointwise(&factors.u, input);
    let t = apply_conv(&factors.core, &z)?;
    Ok(pointwise(&factors.v.transpose(), &t))
}

/// MAdds of the 1x1 / KxK / 1x1 sequence divided by those of the full KxK
/// conv, at stride 1 on an `h` x `w` map.
pub fn madds_savings(c1: usize, c2: usize, k: usize, r1: usize, r2: usize, h: usize, w: usize) -> f64 {
    let seq: u64 = tucker_ops(k, c1, c2, r1, r2, h, w, 1).iter().map(|o| o.madds).sum();
    let full = ConvOp::regular(k, c1, c2, h, w).madds;
    seq as f64 / full as f64
}
