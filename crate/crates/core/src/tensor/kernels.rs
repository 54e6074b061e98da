//! Slice-level kernels behind the tape operations.

use super::Scalar;

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub filters: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.padding - self.kernel_h) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.padding - self.kernel_w) / self.stride + 1
    }

    fn patch_len(&self) -> usize {
        self.channels * self.kernel_h * self.kernel_w
    }

    fn positions(&self) -> usize {
        self.out_height() * self.out_width()
    }

    /// Unfolds the input into a (C·kh·kw) × (H'·W') patch matrix.
    fn im2col<T: Scalar>(&self, input: &[T]) -> Vec<T> {
        let (oh, ow) = (self.out_height(), self.out_width());
        let positions = oh * ow;
        let mut col = vec![T::zero(); self.patch_len() * positions];
        for c in 0..self.channels {
            let plane = &input[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ky in 0..self.kernel_h {
                for kx in 0..self.kernel_w {
                    let row = (c * self.kernel_h + ky) * self.kernel_w + kx;
                    let dst = &mut col[row * positions..(row + 1) * positions];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - self.padding as isize;
                        if iy < 0 || iy >= self.height as isize {
                            continue;
                        }
                        let src = &plane[iy as usize * self.width..(iy as usize + 1) * self.width];
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - self.padding as isize;
                            if ix >= 0 && ix < self.width as isize {
                                dst[oy * ow + ox] = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im<T: Scalar>(&self, col: &[T], grad_input: &mut [T]) {
        let (oh, ow) = (self.out_height(), self.out_width());
        let positions = oh * ow;
        for c in 0..self.channels {
            let plane =
                &mut grad_input[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ky in 0..self.kernel_h {
                for kx in 0..self.kernel_w {
                    let row = (c * self.kernel_h + ky) * self.kernel_w + kx;
                    let src = &col[row * positions..(row + 1) * positions];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - self.padding as isize;
                        if iy < 0 || iy >= self.height as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * self.width..(iy as usize + 1) * self.width];
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - self.padding as isize;
                            if ix >= 0 && ix < self.width as isize {
                                dst[ix as usize] = dst[ix as usize] + src[oy * ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn forward<T: Scalar>(&self, input: &[T], weight: &[T], bias: &[T]) -> Vec<T> {
        let positions = self.positions();
        let patch = self.patch_len();
        let col = self.im2col(input);
        let mut out = Vec::with_capacity(self.filters * positions);
        for &b in bias {
            out.extend(std::iter::repeat_n(b, positions));
        }
        T::gemm(
            self.filters,
            patch,
            positions,
            weight,
            (patch as isize, 1),
            &col,
            (positions as isize, 1),
            T::one(),
            &mut out,
            (positions as isize, 1),
        );
        out
    }

    /// Returns (grad_input, grad_weight, grad_bias); the input gradient is
    /// skipped when not requested since it dominates the cost for wide inputs.
    pub fn backward<T: Scalar>(
        &self,
        input: &[T],
        weight: &[T],
        grad_out: &[T],
        want_input: bool,
        want_weight: bool,
    ) -> (Option<Vec<T>>, Option<Vec<T>>, Vec<T>) {
        let positions = self.positions();
        let patch = self.patch_len();
        let grad_bias = grad_out
            .chunks(positions)
            .map(|row| row.iter().copied().sum())
            .collect();

        let grad_weight = want_weight.then(|| {
            let col = self.im2col(input);
            let mut gw = vec![T::zero(); self.filters * patch];
            T::gemm(
                self.filters,
                positions,
                patch,
                grad_out,
                (positions as isize, 1),
                &col,
                (1, positions as isize),
                T::zero(),
                &mut gw,
                (patch as isize, 1),
            );
            gw
        });

        let grad_input = want_input.then(|| {
            let mut gcol = vec![T::zero(); patch * positions];
            T::gemm(
                patch,
                self.filters,
                positions,
                weight,
                (1, patch as isize),
                grad_out,
                (positions as isize, 1),
                T::zero(),
                &mut gcol,
                (positions as isize, 1),
            );
            let mut gx = vec![T::zero(); self.channels * self.height * self.width];
            self.col2im(&gcol, &mut gx);
            gx
        });

        (grad_input, grad_weight, grad_bias)
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct PoolGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub window: usize,
    pub stride: usize,
    pub ceil_mode: bool,
}

fn pooled_extent(extent: usize, window: usize, stride: usize, ceil_mode: bool) -> usize {
    let span = extent - window;
    if !ceil_mode {
        return span / stride + 1;
    }
    let mut out = span.div_ceil(stride) + 1;
    // the last window has to start inside the input
    if (out - 1) * stride >= extent {
        out -= 1;
    }
    out
}

impl PoolGeometry {
    pub fn out_height(&self) -> usize {
        pooled_extent(self.height, self.window, self.stride, self.ceil_mode)
    }

    pub fn out_width(&self) -> usize {
        pooled_extent(self.width, self.window, self.stride, self.ceil_mode)
    }

    /// Max over each window; ties resolve to the first cell in row-major order.
    /// Returns the pooled values and the flat input index of each maximum.
    pub fn forward<T: Scalar>(&self, input: &[T]) -> (Vec<T>, Vec<usize>) {
        let (oh, ow) = (self.out_height(), self.out_width());
        let mut out = Vec::with_capacity(self.channels * oh * ow);
        let mut argmax = Vec::with_capacity(out.capacity());
        for c in 0..self.channels {
            let base = c * self.height * self.width;
            for oy in 0..oh {
                let y0 = oy * self.stride;
                let y1 = (y0 + self.window).min(self.height);
                for ox in 0..ow {
                    let x0 = ox * self.stride;
                    let x1 = (x0 + self.window).min(self.width);
                    let mut best = base + y0 * self.width + x0;
                    for y in y0..y1 {
                        for x in x0..x1 {
                            let idx = base + y * self.width + x;
                            if input[idx] > input[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(input[best]);
                    argmax.push(best);
                }
            }
        }
        (out, argmax)
    }
}
