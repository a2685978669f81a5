//! Helpers shared by the integration tests.
#![allow(dead_code)]

use hwnas::arch::{LayerKind, NetworkSpec};

/// Multiple of 8 nearest to `x`, at least 8.
fn width8(x: f64) -> usize {
    (((x / 8.0).round() as usize) * 8).max(8)
}

/// Counts one MAdd per (output pixel, output channel, tap, input channel in
/// group) by walking the output map and the kernel window.
fn conv(k: usize, c_in: usize, c_out: usize, groups: usize, ho: usize, wo: usize) -> (u64, u64) {
    let mut madds = 0u64;
    let per_tap = (c_in / groups * c_out) as u64;
    for _y in 0..ho {
        for _x in 0..wo {
            for _ky in 0..k {
                for _kx in 0..k {
                    madds += per_tap;
                }
            }
        }
    }
    (madds, (k * k) as u64 * per_tap)
}

fn se(c: usize) -> (u64, u64) {
    let mid = width8(c as f64 / 4.0);
    let n = (c * mid + mid * c) as u64;
    (n, n)
}

/// MAdds and parameters of `net`, counted without the library's analyzer.
pub fn brute_force_cost(net: &NetworkSpec) -> (u64, u64) {
    let mut h = net.input_resolution.div_ceil(2);
    let mut w = h;
    let (mut madds, mut params) = conv(3, 3, net.stem_channels, 1, h, w);
    for block in &net.blocks {
        for l in &block.layers {
            let (ho, wo) = (h.div_ceil(l.stride), w.div_ceil(l.stride));
            let mut ops = Vec::new();
            match l.kind {
                LayerKind::Ibn { kernel, expansion } => {
                    let mid = width8(expansion.0 * l.c_in as f64);
                    ops.push(conv(1, l.c_in, mid, 1, h, w));
                    ops.push(conv(kernel, mid, mid, mid, ho, wo));
                    ops.push(conv(1, mid, l.c_out, 1, ho, wo));
                }
                LayerKind::Fused { kernel, expansion } => {
                    let mid = width8(expansion.0 * l.c_in as f64);
                    ops.push(conv(kernel, l.c_in, mid, 1, ho, wo));
                    ops.push(conv(1, mid, l.c_out, 1, ho, wo));
                }
                LayerKind::Tucker {
                    kernel,
                    input_compression,
                    output_compression,
                } => {
                    let r1 = width8(input_compression.0 * l.c_in as f64);
                    let r2 = width8(output_compression.0 * l.c_out as f64);
                    ops.push(conv(1, l.c_in, r1, 1, h, w));
                    ops.push(conv(kernel, r1, r2, 1, ho, wo));
                    ops.push(conv(1, r2, l.c_out, 1, ho, wo));
                }
            }
            if l.use_se {
                ops.push(se(l.c_out));
            }
            for (m, p) in ops {
                madds += m;
                params += p;
            }
            h = ho;
            w = wo;
        }
    }
    (madds, params)
}
