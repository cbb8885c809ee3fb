//! Dense, convolution and LSTM-gate kernels with their hand-written backward passes.

/// `out += W x` for `W` of shape `[rows, cols]`.
pub(crate) fn matvec_acc(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let row = &w[r * cols..(r + 1) * cols];
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `dx += W^T dy`.
pub(crate) fn matvec_t_acc(w: &[f64], rows: usize, cols: usize, dy: &[f64], dx: &mut [f64]) {
    for (r, &g) in dy.iter().enumerate().take(rows) {
        if g == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (d, a) in dx.iter_mut().zip(row) {
            *d += g * a;
        }
    }
}

/// `dW += dy x^T`.
pub(crate) fn outer_acc(dw: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = &mut dw[r * cols..(r + 1) * cols];
        for (d, xv) in row.iter_mut().zip(x) {
            *d += g * xv;
        }
    }
}

/// Geometry of a same-padded stride-1 convolution over a small grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub height: usize,
    pub width: usize,
}

impl ConvGeom {
    fn pad(&self) -> isize {
        (self.k / 2) as isize
    }

    /// `out[o, y, x] += sum_{i, ky, kx} W[o, i, ky, kx] * input[i, y + ky - p, x + kx - p]`.
    pub fn forward_acc(&self, w: &[f64], input: &[f64], out: &mut [f64]) {
        let (h, wd, k, p) = (self.height, self.width, self.k, self.pad());
        let plane = h * wd;
        for o in 0..self.cout {
            for i in 0..self.cin {
                let wbase = (o * self.cin + i) * k * k;
                let inp = &input[i * plane..(i + 1) * plane];
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = w[wbase + ky * k + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        let dy = ky as isize - p;
                        let dx = kx as isize - p;
                        for y in 0..h {
                            let yy = y as isize + dy;
                            if yy < 0 || yy >= h as isize {
                                continue;
                            }
                            let orow = o * plane + y * wd;
                            let irow = yy as usize * wd;
                            for x in 0..wd {
                                let xx = x as isize + dx;
                                if xx < 0 || xx >= wd as isize {
                                    continue;
                                }
                                out[orow + x] += wv * inp[irow + xx as usize];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Accumulates weight and input gradients for [`ConvGeom::forward_acc`].
    pub fn backward_acc(&self, w: &[f64], input: &[f64], dout: &[f64], dw: &mut [f64], din: Option<&mut [f64]>) {
        let (h, wd, k, p) = (self.height, self.width, self.k, self.pad());
        let plane = h * wd;
        let mut din = din;
        for o in 0..self.cout {
            let dplane = &dout[o * plane..(o + 1) * plane];
            if dplane.iter().all(|&g| g == 0.0) {
                continue;
            }
            for i in 0..self.cin {
                let wbase = (o * self.cin + i) * k * k;
                for ky in 0..k {
                    for kx in 0..k {
                        let dy = ky as isize - p;
                        let dx = kx as isize - p;
                        let wv = w[wbase + ky * k + kx];
                        let mut acc = 0.0;
                        for y in 0..h {
                            let yy = y as isize + dy;
                            if yy < 0 || yy >= h as isize {
                                continue;
                            }
                            for x in 0..wd {
                                let xx = x as isize + dx;
                                if xx < 0 || xx >= wd as isize {
                                    continue;
                                }
                                let idx = i * plane + yy as usize * wd + xx as usize;
                                let g = dplane[y * wd + x];
                                acc += g * input[idx];
                                if let Some(d) = din.as_deref_mut() {
                                    d[idx] += g * wv;
                                }
                            }
                        }
                        dw[wbase + ky * k + kx] += acc;
                    }
                }
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations of one LSTM update over `n` units. Gate blocks in the
/// pre-activation vector are ordered input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct GateCache {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

/// Applies the gate nonlinearities to `z` (length 4n) and returns `(cache, c, h)`.
pub(crate) fn lstm_gates(z: &[f64], c_prev: &[f64]) -> (GateCache, Vec<f64>, Vec<f64>) {
    let n = c_prev.len();
    let i: Vec<f64> = z[..n].iter().map(|&v| sigmoid(v)).collect();
    let f: Vec<f64> = z[n..2 * n].iter().map(|&v| sigmoid(v)).collect();
    let g: Vec<f64> = z[2 * n..3 * n].iter().map(|v| v.tanh()).collect();
    let o: Vec<f64> = z[3 * n..].iter().map(|&v| sigmoid(v)).collect();
    let c: Vec<f64> = (0..n).map(|u| f[u] * c_prev[u] + i[u] * g[u]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..n).map(|u| o[u] * tanh_c[u]).collect();
    (GateCache { i, f, g, o, c_prev: c_prev.to_vec(), tanh_c }, c, h)
}

/// Given `dh` and the cell gradient flowing back from the next step, returns
/// `(dz, dc_prev)`.
pub(crate) fn lstm_gates_backward(cache: &GateCache, dh: &[f64], dc_next: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = dh.len();
    let mut dz = vec![0.0; 4 * n];
    let mut dc_prev = vec![0.0; n];
    for u in 0..n {
        let (i, f, g, o, tc) = (cache.i[u], cache.f[u], cache.g[u], cache.o[u], cache.tanh_c[u]);
        let dc = dc_next[u] + dh[u] * o * (1.0 - tc * tc);
        let d_o = dh[u] * tc;
        let di = dc * g;
        let dg = dc * i;
        let df = dc * cache.c_prev[u];
        dc_prev[u] = dc * f;
        dz[u] = di * i * (1.0 - i);
        dz[n + u] = df * f * (1.0 - f);
        dz[2 * n + u] = dg * (1.0 - g * g);
        dz[3 * n + u] = d_o * o * (1.0 - o);
    }
    (dz, dc_prev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_identity_kernel() {
        let geom = ConvGeom { cin: 1, cout: 1, k: 3, height: 4, width: 8 };
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        let input: Vec<f64> = (0..32).map(|v| v as f64).collect();
        let mut out = vec![0.0; 32];
        geom.forward_acc(&w, &input, &mut out);
        assert_eq!(out, input);
    }

    #[test]
    fn conv_shift_kernel_zero_pads() {
        let geom = ConvGeom { cin: 1, cout: 1, k: 3, height: 4, width: 8 };
        let mut w = vec![0.0; 9];
        w[5] = 1.0; // reads the right-hand neighbour
        let input: Vec<f64> = (0..32).map(|v| v as f64).collect();
        let mut out = vec![0.0; 32];
        geom.forward_acc(&w, &input, &mut out);
        assert_eq!(out[0], 1.0);
        assert_eq!(out[7], 0.0);
    }

    #[test]
    fn linear_gradient_is_outer_product() {
        // loss = sum(W x) with dy = 1 -> dW = 1 x^T
        let x = [1.0, 2.0, 3.0];
        let mut dw = vec![0.0; 6];
        outer_acc(&mut dw, &[1.0, 1.0], &x);
        assert_eq!(dw, vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
    }
}
