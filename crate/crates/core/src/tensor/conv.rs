//! Dense 3D cross-correlation.
//!
//! Stride 1 runs as one GEMM per kernel tap over a zero-padded copy of the
//! input: in flat padded coordinates every tap is a constant offset, so the
//! shifted operand is a plain strided view and no im2col buffer is needed.
//! Outputs are computed on the padded row pitch and the valid voxels copied
//! out afterwards. Other strides fall back to chunked im2col.

use crate::error::{Error, Result};

use super::Element;

/// Upper bound on im2col buffer elements per chunk.
const COLS_BUDGET: usize = 1 << 21;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub d: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub od: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    /// Same-padding geometry for a cubic odd kernel.
    pub fn new(input: [usize; 5], weight: &[usize], stride: usize) -> Result<Self> {
        let [n, c_in, d, h, w] = input;
        let &[c_out, wc, k0, k1, k2] = weight else {
            return Err(Error::Shape(format!(
                "conv weight must be 5D (out, in, k, k, k), got {weight:?}"
            )));
        };
        if k0 != k1 || k1 != k2 || k0 % 2 == 0 {
            return Err(Error::Shape(format!(
                "kernel must be cubic with odd edge, got {k0}x{k1}x{k2}"
            )));
        }
        if wc != c_in {
            return Err(Error::Shape(format!(
                "conv expects {wc} input channels, input has {c_in}"
            )));
        }
        if !(stride == 1 || stride == 2) {
            return Err(Error::Shape(format!("unsupported conv stride {stride}")));
        }
        let k = k0;
        let pad = (k - 1) / 2;
        let out = |x: usize| (x + 2 * pad - k) / stride + 1;
        Ok(Self {
            n,
            c_in,
            c_out,
            d,
            h,
            w,
            k,
            stride,
            pad,
            od: out(d),
            oh: out(h),
            ow: out(w),
        })
    }

    fn rows(&self) -> usize {
        self.c_in * self.k * self.k * self.k
    }

    fn in_volume(&self) -> usize {
        self.d * self.h * self.w
    }

    fn out_volume(&self) -> usize {
        self.od * self.oh * self.ow
    }

    fn slab_depth(&self) -> usize {
        let per_slice = self.rows() * self.oh * self.ow;
        (COLS_BUDGET / per_slice.max(1)).clamp(1, self.od)
    }

    /// Valid output x range `[lo, hi)` for kernel tap `kx` at stride 1.
    fn x_range(&self, kx: usize) -> (usize, usize) {
        let lo = self.pad.saturating_sub(kx);
        let hi = (self.w + self.pad).saturating_sub(kx).min(self.ow);
        (lo, hi.max(lo))
    }

    /// Input coordinate for output coordinate `o` and tap `t`, if inside.
    fn src(&self, o: usize, t: usize, extent: usize) -> Option<usize> {
        let i = (o * self.stride + t) as isize - self.pad as isize;
        (i >= 0 && (i as usize) < extent).then_some(i as usize)
    }

    /// Visits every (column offset, input offset) pair of output slab
    /// `[z0, z1)` and kernel row `(c, kz, ky, kx)`.
    fn for_each_tap(
        &self,
        z0: usize,
        z1: usize,
        kz: usize,
        ky: usize,
        kx: usize,
        mut run: impl FnMut(usize, Option<usize>, usize),
    ) {
        // run(col_offset, Some(input_offset) or None for padding, run_len)
        let plane = self.oh * self.ow;
        for oz in z0..z1 {
            let zrow = (oz - z0) * plane;
            let iz = self.src(oz, kz, self.d);
            for oy in 0..self.oh {
                let col = zrow + oy * self.ow;
                let (iz, iy) = match (iz, self.src(oy, ky, self.h)) {
                    (Some(iz), Some(iy)) => (iz, iy),
                    _ => {
                        run(col, None, self.ow);
                        continue;
                    }
                };
                let base = (iz * self.h + iy) * self.w;
                if self.stride == 1 {
                    let (lo, hi) = self.x_range(kx);
                    if lo > 0 {
                        run(col, None, lo);
                    }
                    if hi > lo {
                        run(col + lo, Some(base + lo + kx - self.pad), hi - lo);
                    }
                    if self.ow > hi {
                        run(col + hi, None, self.ow - hi);
                    }
                } else {
                    for ox in 0..self.ow {
                        match self.src(ox, kx, self.w) {
                            Some(ix) => run(col + ox, Some(base + ix), 1),
                            None => run(col + ox, None, 1),
                        }
                    }
                }
            }
        }
    }

    fn im2col<T: Element>(&self, input: &[T], z0: usize, z1: usize, cols: &mut [T]) {
        let k = self.k;
        let width = (z1 - z0) * self.oh * self.ow;
        let vol = self.in_volume();
        for c in 0..self.c_in {
            let chan = &input[c * vol..(c + 1) * vol];
            for kz in 0..k {
                for ky in 0..k {
                    for kx in 0..k {
                        let r = ((c * k + kz) * k + ky) * k + kx;
                        let row = &mut cols[r * width..(r + 1) * width];
                        self.for_each_tap(z0, z1, kz, ky, kx, |col, src, len| match src {
                            Some(s) => row[col..col + len].copy_from_slice(&chan[s..s + len]),
                            None => row[col..col + len].fill(T::zero()),
                        });
                    }
                }
            }
        }
    }

    fn col2im<T: Element>(&self, cols: &[T], z0: usize, z1: usize, grad_input: &mut [T]) {
        let k = self.k;
        let width = (z1 - z0) * self.oh * self.ow;
        let vol = self.in_volume();
        for c in 0..self.c_in {
            let chan = &mut grad_input[c * vol..(c + 1) * vol];
            for kz in 0..k {
                for ky in 0..k {
                    for kx in 0..k {
                        let r = ((c * k + kz) * k + ky) * k + kx;
                        let row = &cols[r * width..(r + 1) * width];
                        self.for_each_tap(z0, z1, kz, ky, kx, |col, src, len| {
                            if let Some(s) = src {
                                for (g, &v) in chan[s..s + len].iter_mut().zip(&row[col..col + len])
                                {
                                    *g += v;
                                }
                            }
                        });
                    }
                }
            }
        }
    }
}

fn forward_im2col<T: Element>(
    g: &ConvGeom,
    input: &[T],
    weight: &[T],
    bias: &[T],
    out: &mut [T],
) {
    let rows = g.rows();
    let ovol = g.out_volume();
    let ivol = g.in_volume();
    let plane = g.oh * g.ow;
    let slab = g.slab_depth();
    let mut cols = vec![T::zero(); rows * slab * plane];
    for n in 0..g.n {
        let x = &input[n * g.c_in * ivol..(n + 1) * g.c_in * ivol];
        let y = &mut out[n * g.c_out * ovol..(n + 1) * g.c_out * ovol];
        for (o, &b) in bias.iter().enumerate() {
            y[o * ovol..(o + 1) * ovol].fill(b);
        }
        let mut z0 = 0;
        while z0 < g.od {
            let z1 = (z0 + slab).min(g.od);
            let width = (z1 - z0) * plane;
            let cols = &mut cols[..rows * width];
            g.im2col(x, z0, z1, cols);
            T::gemm(
                g.c_out,
                rows,
                width,
                weight,
                rows as isize,
                1,
                cols,
                width as isize,
                1,
                T::one(),
                &mut y[z0 * plane..],
                ovol as isize,
                1,
            );
            z0 = z1;
        }
    }
}

fn backward_im2col<T: Element>(
    g: &ConvGeom,
    input: &[T],
    weight: &[T],
    grad_out: &[T],
    mut grad_input: Option<&mut [T]>,
    mut grad_weight: Option<&mut [T]>,
    mut grad_bias: Option<&mut [T]>,
) {
    let rows = g.rows();
    let ovol = g.out_volume();
    let ivol = g.in_volume();
    let plane = g.oh * g.ow;
    let slab = g.slab_depth();
    let mut cols = vec![T::zero(); rows * slab * plane];
    for n in 0..g.n {
        let x = &input[n * g.c_in * ivol..(n + 1) * g.c_in * ivol];
        let gy = &grad_out[n * g.c_out * ovol..(n + 1) * g.c_out * ovol];
        if let Some(gb) = grad_bias.as_deref_mut() {
            for (o, b) in gb.iter_mut().enumerate() {
                *b += gy[o * ovol..(o + 1) * ovol].iter().copied().sum::<T>();
            }
        }
        let mut z0 = 0;
        while z0 < g.od {
            let z1 = (z0 + slab).min(g.od);
            let width = (z1 - z0) * plane;
            let cols = &mut cols[..rows * width];
            let gy_slab = &gy[z0 * plane..];
            if let Some(gw) = grad_weight.as_deref_mut() {
                g.im2col(x, z0, z1, cols);
                T::gemm(
                    g.c_out,
                    width,
                    rows,
                    gy_slab,
                    ovol as isize,
                    1,
                    cols,
                    1,
                    width as isize,
                    T::one(),
                    gw,
                    rows as isize,
                    1,
                );
            }
            if let Some(gx) = grad_input.as_deref_mut() {
                T::gemm(
                    rows,
                    g.c_out,
                    width,
                    weight,
                    1,
                    rows as isize,
                    gy_slab,
                    ovol as isize,
                    1,
                    T::zero(),
                    cols,
                    width as isize,
                    1,
                );
                let gx = &mut gx[n * g.c_in * ivol..(n + 1) * g.c_in * ivol];
                g.col2im(cols, z0, z1, gx);
            }
            z0 = z1;
        }
    }
}

pub(crate) fn forward<T: Element>(
    g: &ConvGeom,
    input: &[T],
    weight: &[T],
    bias: &[T],
    out: &mut [T],
) {
    if g.stride == 1 {
        Shifted::new(g).forward(input, weight, bias, out)
    } else {
        forward_im2col(g, input, weight, bias, out)
    }
}

pub(crate) fn backward<T: Element>(
    g: &ConvGeom,
    input: &[T],
    weight: &[T],
    grad_out: &[T],
    grad_input: Option<&mut [T]>,
    grad_weight: Option<&mut [T]>,
    grad_bias: Option<&mut [T]>,
) {
    if g.stride == 1 {
        Shifted::new(g).backward(input, weight, grad_out, grad_input, grad_weight, grad_bias)
    } else {
        backward_im2col(g, input, weight, grad_out, grad_input, grad_weight, grad_bias)
    }
}

/// Output positions per register block of the direct kernels.
const BLOCK: usize = 512;

/// Above this many output channels the forward pass goes through GEMM.
const DIRECT_MAX_OUT: usize = 6;

#[inline]
fn axpy<T: Element>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with eight independent partial sums (fixed order).
#[inline]
fn dot<T: Element>(a: &[T], b: &[T]) -> T {
    let mut lanes = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..8 {
            lanes[i] += x[i] * y[i];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    lanes.iter().copied().sum::<T>() + tail
}

/// Padded-offset formulation for stride 1.
struct Shifted<'a> {
    g: &'a ConvGeom,
    /// Padded extents.
    hp: usize,
    wp: usize,
    /// Padded voxels per channel.
    pp: usize,
    /// Flat output span on the padded pitch.
    nb: usize,
    taps: usize,
}

impl<'a> Shifted<'a> {
    fn new(g: &'a ConvGeom) -> Self {
        let (dp, hp, wp) = (g.d + 2 * g.pad, g.h + 2 * g.pad, g.w + 2 * g.pad);
        Self {
            g,
            hp,
            wp,
            pp: dp * hp * wp,
            nb: (g.d - 1) * hp * wp + (g.h - 1) * wp + g.w,
            taps: g.k * g.k * g.k,
        }
    }

    fn offset(&self, tap: usize) -> usize {
        let k = self.g.k;
        let (kz, ky, kx) = (tap / (k * k), (tap / k) % k, tap % k);
        (kz * self.hp + ky) * self.wp + kx
    }

    /// Padded-pitch position of interior voxel `(z, y, x)` relative to the
    /// first output.
    fn pitch(&self, z: usize, y: usize) -> usize {
        (z * self.hp + y) * self.wp
    }

    fn pad_sample<T: Element>(&self, x: &[T]) -> Vec<T> {
        let g = self.g;
        let p = g.pad;
        let mut xp = vec![T::zero(); g.c_in * self.pp];
        for c in 0..g.c_in {
            let src = &x[c * g.d * g.h * g.w..];
            let dst = &mut xp[c * self.pp..];
            for z in 0..g.d {
                for y in 0..g.h {
                    let s = (z * g.h + y) * g.w;
                    let d = ((z + p) * self.hp + y + p) * self.wp + p;
                    dst[d..d + g.w].copy_from_slice(&src[s..s + g.w]);
                }
            }
        }
        xp
    }

    /// `buf[o][j] = Σ_c Σ_tap w[o, c, tap] · xp[c][j + offset(tap)]`, blocked
    /// over `j` so the accumulators stay in L1.
    fn accumulate_taps<T: Element>(&self, xp: &[T], weight: &[T], acc: &mut [T], buf: &mut [T]) {
        let g = self.g;
        let mut j0 = 0;
        while j0 < self.nb {
            let jl = BLOCK.min(self.nb - j0);
            acc.fill(T::zero());
            for c in 0..g.c_in {
                let xc = &xp[c * self.pp..(c + 1) * self.pp];
                for tap in 0..self.taps {
                    let s = self.offset(tap) + j0;
                    let xs = &xc[s..s + jl];
                    for o in 0..g.c_out {
                        let w = weight[(o * g.c_in + c) * self.taps + tap];
                        axpy(&mut acc[o * BLOCK..o * BLOCK + jl], w, xs);
                    }
                }
            }
            for o in 0..g.c_out {
                buf[o * self.nb + j0..o * self.nb + j0 + jl]
                    .copy_from_slice(&acc[o * BLOCK..o * BLOCK + jl]);
            }
            j0 += jl;
        }
    }

    /// `gw[o, c, tap] += Σ_j gbuf[o][j] · xp[c][j + offset(tap)]`.
    fn weight_grad<T: Element>(&self, xp: &[T], gbuf: &[T], gw: &mut [T]) {
        let g = self.g;
        let mut j0 = 0;
        while j0 < self.nb {
            let jl = BLOCK.min(self.nb - j0);
            for c in 0..g.c_in {
                let xc = &xp[c * self.pp..(c + 1) * self.pp];
                for tap in 0..self.taps {
                    let s = self.offset(tap) + j0;
                    let xs = &xc[s..s + jl];
                    for o in 0..g.c_out {
                        let go = &gbuf[o * self.nb + j0..o * self.nb + j0 + jl];
                        gw[(o * g.c_in + c) * self.taps + tap] += dot(go, xs);
                    }
                }
            }
            j0 += jl;
        }
    }

    fn forward<T: Element>(&self, input: &[T], weight: &[T], bias: &[T], out: &mut [T]) {
        let g = self.g;
        let ivol = g.d * g.h * g.w;
        let mut buf = vec![T::zero(); g.c_out * self.nb];
        let mut acc = vec![T::zero(); if g.c_out <= DIRECT_MAX_OUT { g.c_out * BLOCK } else { 0 }];
        for n in 0..g.n {
            let xp = self.pad_sample(&input[n * g.c_in * ivol..(n + 1) * g.c_in * ivol]);
            if g.c_out <= DIRECT_MAX_OUT {
                self.accumulate_taps(&xp, weight, &mut acc, &mut buf);
            } else {
                buf.fill(T::zero());
                let rows = g.c_in * self.taps;
                for tap in 0..self.taps {
                    T::gemm(
                        g.c_out,
                        g.c_in,
                        self.nb,
                        &weight[tap..],
                        rows as isize,
                        self.taps as isize,
                        &xp[self.offset(tap)..],
                        self.pp as isize,
                        1,
                        T::one(),
                        &mut buf,
                        self.nb as isize,
                        1,
                    );
                }
            }
            let y = &mut out[n * g.c_out * ivol..(n + 1) * g.c_out * ivol];
            for o in 0..g.c_out {
                let src = &buf[o * self.nb..(o + 1) * self.nb];
                let dst = &mut y[o * ivol..(o + 1) * ivol];
                for z in 0..g.d {
                    for yy in 0..g.h {
                        let s = self.pitch(z, yy);
                        let d = (z * g.h + yy) * g.w;
                        for (v, &a) in dst[d..d + g.w].iter_mut().zip(&src[s..s + g.w]) {
                            *v = a + bias[o];
                        }
                    }
                }
            }
        }
    }

    fn backward<T: Element>(
        &self,
        input: &[T],
        weight: &[T],
        grad_out: &[T],
        mut grad_input: Option<&mut [T]>,
        mut grad_weight: Option<&mut [T]>,
        mut grad_bias: Option<&mut [T]>,
    ) {
        let g = self.g;
        let ivol = g.d * g.h * g.w;
        let rows = g.c_in * self.taps;
        let mut gbuf = vec![T::zero(); g.c_out * self.nb];
        let mut gxp = vec![T::zero(); if grad_input.is_some() { g.c_in * self.pp } else { 0 }];
        for n in 0..g.n {
            let gy = &grad_out[n * g.c_out * ivol..(n + 1) * g.c_out * ivol];
            if let Some(gb) = grad_bias.as_deref_mut() {
                for (o, b) in gb.iter_mut().enumerate() {
                    *b += gy[o * ivol..(o + 1) * ivol].iter().copied().sum::<T>();
                }
            }
            // scatter onto the padded pitch; gaps stay zero
            for o in 0..g.c_out {
                let dst = &mut gbuf[o * self.nb..(o + 1) * self.nb];
                for z in 0..g.d {
                    for yy in 0..g.h {
                        let s = (z * g.h + yy) * g.w;
                        let d = self.pitch(z, yy);
                        dst[d..d + g.w].copy_from_slice(&gy[o * ivol + s..o * ivol + s + g.w]);
                    }
                }
            }
            if let Some(gw) = grad_weight.as_deref_mut() {
                let xp = self.pad_sample(&input[n * g.c_in * ivol..(n + 1) * g.c_in * ivol]);
                self.weight_grad(&xp, &gbuf, gw);
            }
            if let Some(gx) = grad_input.as_deref_mut() {
                gxp.fill(T::zero());
                for tap in 0..self.taps {
                    T::gemm(
                        g.c_in,
                        g.c_out,
                        self.nb,
                        &weight[tap..],
                        self.taps as isize,
                        rows as isize,
                        &gbuf,
                        self.nb as isize,
                        1,
                        T::one(),
                        &mut gxp[self.offset(tap)..],
                        self.pp as isize,
                        1,
                    );
                }
                let p = g.pad;
                let gx = &mut gx[n * g.c_in * ivol..(n + 1) * g.c_in * ivol];
                for c in 0..g.c_in {
                    for z in 0..g.d {
                        for yy in 0..g.h {
                            let s = c * self.pp + ((z + p) * self.hp + yy + p) * self.wp + p;
                            let d = c * ivol + (z * g.h + yy) * g.w;
                            for (v, &a) in gx[d..d + g.w].iter_mut().zip(&gxp[s..s + g.w]) {
                                *v += a;
                            }
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Naive {
        out: Vec<f64>,
        gx: Vec<f64>,
        gw: Vec<f64>,
        gb: Vec<f64>,
    }

    // direct definition of a zero-padded strided correlation and its adjoint
    fn naive(g: &ConvGeom, x: &[f64], w: &[f64], b: &[f64], gy: &[f64]) -> Naive {
        let k = g.k;
        let mut r = Naive {
            out: vec![0.0; g.n * g.c_out * g.od * g.oh * g.ow],
            gx: vec![0.0; x.len()],
            gw: vec![0.0; w.len()],
            gb: vec![0.0; b.len()],
        };
        for n in 0..g.n {
            for o in 0..g.c_out {
                for oz in 0..g.od {
                    for oy in 0..g.oh {
                        for ox in 0..g.ow {
                            let oi = (((n * g.c_out + o) * g.od + oz) * g.oh + oy) * g.ow + ox;
                            let mut acc = b[o];
                            r.gb[o] += gy[oi];
                            for c in 0..g.c_in {
                                for kz in 0..k {
                                    for ky in 0..k {
                                        for kx in 0..k {
                                            let z = (oz * g.stride + kz) as isize - g.pad as isize;
                                            let y = (oy * g.stride + ky) as isize - g.pad as isize;
                                            let xx = (ox * g.stride + kx) as isize - g.pad as isize;
                                            if z < 0
                                                || y < 0
                                                || xx < 0
                                                || z >= g.d as isize
                                                || y >= g.h as isize
                                                || xx >= g.w as isize
                                            {
                                                continue;
                                            }
                                            let xi = (((n * g.c_in + c) * g.d + z as usize) * g.h
                                                + y as usize)
                                                * g.w
                                                + xx as usize;
                                            let wi = (((o * g.c_in + c) * k + kz) * k + ky) * k + kx;
                                            acc += w[wi] * x[xi];
                                            r.gx[xi] += w[wi] * gy[oi];
                                            r.gw[wi] += x[xi] * gy[oi];
                                        }
                                    }
                                }
                            }
                            r.out[oi] = acc;
                        }
                    }
                }
            }
        }
        r
    }

    fn random(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn all_paths_match_direct_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cases = [
            // (n, c_in, c_out, d, h, w, k, stride)
            (1, 1, 1, 1, 1, 1, 1, 1),
            (2, 3, 2, 4, 3, 2, 3, 1),
            (1, 2, 9, 3, 4, 4, 3, 1),
            (2, 5, 1, 4, 4, 4, 1, 1),
            (1, 2, 3, 4, 4, 4, 3, 2),
            (2, 3, 7, 3, 2, 4, 3, 2),
            (1, 1, 2, 2, 3, 4, 5, 1),
            (1, 4, 4, 4, 4, 4, 1, 2),
        ];
        for &(n, ci, co, d, h, w, k, stride) in &cases {
            let g = ConvGeom::new([n, ci, d, h, w], &[co, ci, k, k, k], stride).unwrap();
            let x = random(&mut rng, n * ci * d * h * w);
            let wt = random(&mut rng, co * ci * k * k * k);
            let b = random(&mut rng, co);
            let gy = random(&mut rng, n * co * g.od * g.oh * g.ow);
            let want = naive(&g, &x, &wt, &b, &gy);

            let mut out = vec![0.0; gy.len()];
            forward(&g, &x, &wt, &b, &mut out);
            assert!(max_diff(&out, &want.out) < 1e-12, "{:?}", g);
            let mut out2 = vec![0.0; gy.len()];
            forward_im2col(&g, &x, &wt, &b, &mut out2);
            assert!(max_diff(&out2, &want.out) < 1e-12);

            let (mut gx, mut gw, mut gb) = (vec![0.0; x.len()], vec![0.0; wt.len()], vec![0.0; co]);
            backward(&g, &x, &wt, &gy, Some(&mut gx), Some(&mut gw), Some(&mut gb));
            assert!(max_diff(&gx, &want.gx) < 1e-12, "{:?}", g);
            assert!(max_diff(&gw, &want.gw) < 1e-12, "{:?}", g);
            assert!(max_diff(&gb, &want.gb) < 1e-12);
            let (mut gx, mut gw, mut gb) = (vec![0.0; x.len()], vec![0.0; wt.len()], vec![0.0; co]);
            backward_im2col(&g, &x, &wt, &gy, Some(&mut gx), Some(&mut gw), Some(&mut gb));
            assert!(max_diff(&gx, &want.gx) < 1e-12);
            assert!(max_diff(&gw, &want.gw) < 1e-12);
            assert!(max_diff(&gb, &want.gb) < 1e-12);
        }
    }

    #[test]
    fn geometry_rejects_bad_kernels() {
        assert!(ConvGeom::new([1, 2, 4, 4, 4], &[1, 2, 2, 2, 2], 1).is_err());
        assert!(ConvGeom::new([1, 2, 4, 4, 4], &[1, 3, 3, 3, 3], 1).is_err());
        assert!(ConvGeom::new([1, 2, 4, 4, 4], &[1, 2, 3, 3, 3], 3).is_err());
        assert!(ConvGeom::new([1, 2, 4, 4, 4], &[1, 2, 3, 3, 1], 1).is_err());
    }
}
