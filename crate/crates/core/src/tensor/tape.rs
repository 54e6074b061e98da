use super::kernels::{ConvGeometry, PoolGeometry};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// What `backward` does with gradients already stored on leaves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GradMode {
    /// Overwrite gradients left over from a previous pass.
    #[default]
    Reset,
    /// Add the new gradients to the leaf gradients of a previous pass.
    Accumulate,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Conv2d {
        input: Var,
        weight: Var,
        bias: Var,
        geom: ConvGeometry,
    },
    Relu(Var),
    MaxPool {
        input: Var,
        argmax: Vec<usize>,
    },
    Dense {
        input: Var,
        weight: Var,
        bias: Var,
    },
    L2Normalize {
        input: Var,
        denom: T,
        clamped: bool,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Sum(Var),
    Reshape(Var),
    Distance(Var, Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
    grad: Option<Vec<T>>,
}

/// Records differentiable operations in execution order.
///
/// Node indices are assigned in creation order, so the node list is already
/// topologically sorted and the backward pass is a single reverse sweep.
#[derive(Debug, Default)]
pub struct Tape<T: Scalar = f32> {
    nodes: Vec<Node<T>>,
}

fn add_into<T: Scalar>(slot: &mut Option<Vec<T>>, delta: &[T]) {
    match slot {
        Some(acc) => acc.iter_mut().zip(delta).for_each(|(a, &d)| *a = *a + d),
        None => *slot = Some(delta.to_vec()),
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input. Gradients are tracked iff the tensor requires them.
    pub fn leaf(&mut self, tensor: Tensor<T>) -> Var {
        let requires_grad = tensor.requires_grad();
        let mut value = tensor;
        value.zero_grad();
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    pub fn grad(&self, var: Var) -> Option<&[T]> {
        self.nodes[var.0].grad.as_deref()
    }

    /// Copies the gradient of `var` into `target.grad`.
    pub fn populate_grad(&self, var: Var, target: &mut Tensor<T>) -> Result<()> {
        match self.grad(var) {
            Some(g) => target.set_grad(g.to_vec()),
            None => {
                target.zero_grad();
                Ok(())
            }
        }
    }

    fn push(&mut self, name: &str, shape: &[usize], data: Vec<T>, op: Op<T>, inputs: &[Var]) -> Result<Var> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(name.to_string()));
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value: Tensor::new(shape, data)?,
            op,
            requires_grad,
            grad: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var, stride: usize, padding: usize) -> Result<Var> {
        let (xs, ws, bs) = (
            self.value(input).shape(),
            self.value(weight).shape(),
            self.value(bias).shape(),
        );
        let (&[c, h, w], &[f, wc, kh, kw]) = (xs, ws) else {
            return Err(Error::Shape(format!(
                "conv2d expects a C×H×W input and F×C×kh×kw weight, got {xs:?} and {ws:?}"
            )));
        };
        if wc != c {
            return Err(Error::Shape(format!(
                "conv2d input has {c} channels but the weight expects {wc}"
            )));
        }
        if bs != [f] {
            return Err(Error::Shape(format!("conv2d bias {bs:?} does not match {f} filters")));
        }
        if stride == 0 {
            return Err(Error::Shape("conv2d stride must be positive".into()));
        }
        if kh > h + 2 * padding || kw > w + 2 * padding {
            return Err(Error::Shape(format!(
                "{kh}×{kw} kernel exceeds padded input {}×{}",
                h + 2 * padding,
                w + 2 * padding
            )));
        }
        let geom = ConvGeometry {
            channels: c,
            height: h,
            width: w,
            filters: f,
            kernel_h: kh,
            kernel_w: kw,
            stride,
            padding,
        };
        let out = geom.forward(
            self.value(input).data(),
            self.value(weight).data(),
            self.value(bias).data(),
        );
        let shape = [f, geom.out_height(), geom.out_width()];
        self.push(
            "conv2d",
            &shape,
            out,
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
            },
            &[input, weight, bias],
        )
    }

    pub fn relu(&mut self, input: Var) -> Result<Var> {
        let x = self.value(input);
        let shape = x.shape().to_vec();
        let out = x.data().iter().map(|&v| v.max(T::zero())).collect();
        self.push("relu", &shape, out, Op::Relu(input), &[input])
    }

    /// 2D max-pooling over each channel. With `ceil_mode` a partial window is
    /// kept at the bottom/right border when the extent does not divide evenly.
    pub fn maxpool2d(&mut self, input: Var, window: usize, stride: usize, ceil_mode: bool) -> Result<Var> {
        let xs = self.value(input).shape();
        let &[c, h, w] = xs else {
            return Err(Error::Shape(format!("maxpool2d expects C×H×W, got {xs:?}")));
        };
        if window == 0 || stride == 0 {
            return Err(Error::Shape("maxpool2d window and stride must be positive".into()));
        }
        if window > h || window > w {
            return Err(Error::Shape(format!("pool window {window} larger than {h}×{w} input")));
        }
        let geom = PoolGeometry {
            channels: c,
            height: h,
            width: w,
            window,
            stride,
            ceil_mode,
        };
        let (out, argmax) = geom.forward(self.value(input).data());
        let shape = [c, geom.out_height(), geom.out_width()];
        self.push("maxpool2d", &shape, out, Op::MaxPool { input, argmax }, &[input])
    }

    /// `weight · input + bias` for a vector input.
    pub fn dense(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (xs, ws, bs) = (
            self.value(input).shape(),
            self.value(weight).shape(),
            self.value(bias).shape(),
        );
        let (&[n], &[m, wn]) = (xs, ws) else {
            return Err(Error::Shape(format!(
                "dense expects a vector input and a matrix weight, got {xs:?} and {ws:?}"
            )));
        };
        if wn != n || bs != [m] {
            return Err(Error::Shape(format!(
                "dense weight {ws:?} and bias {bs:?} incompatible with input of length {n}"
            )));
        }
        let mut out = self.value(bias).data().to_vec();
        T::gemm(
            m,
            n,
            1,
            self.value(weight).data(),
            (n as isize, 1),
            self.value(input).data(),
            (1, 1),
            T::one(),
            &mut out,
            (1, 1),
        );
        self.push("dense", &[m], out, Op::Dense { input, weight, bias }, &[input, weight, bias])
    }

    /// `x / max(‖x‖₂, epsilon)`.
    pub fn l2_normalize(&mut self, input: Var, epsilon: T) -> Result<Var> {
        let x = self.value(input);
        let shape = x.shape().to_vec();
        let norm = x.l2_norm();
        let clamped = norm < epsilon;
        let denom = if clamped { epsilon } else { norm };
        let out = x.data().iter().map(|&v| v / denom).collect();
        self.push(
            "l2_normalize",
            &shape,
            out,
            Op::L2Normalize {
                input,
                denom,
                clamped,
            },
            &[input],
        )
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<Vec<usize>> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::Shape(format!("{what}: shapes {sa:?} and {sb:?} differ")));
        }
        Ok(sa.to_vec())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.same_shape(a, b, "add")?;
        let out = self.zip(a, b, |x, y| x + y);
        self.push("add", &shape, out, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.same_shape(a, b, "sub")?;
        let out = self.zip(a, b, |x, y| x - y);
        self.push("sub", &shape, out, Op::Sub(a, b), &[a, b])
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Vec<T> {
        let (xa, xb) = (self.value(a).data(), self.value(b).data());
        xa.iter().zip(xb).map(|(&x, &y)| f(x, y)).collect()
    }

    pub fn scale(&mut self, input: Var, factor: T) -> Result<Var> {
        let x = self.value(input);
        let shape = x.shape().to_vec();
        let out = x.data().iter().map(|&v| v * factor).collect();
        self.push("scale", &shape, out, Op::Scale(input, factor), &[input])
    }

    pub fn add_scalar(&mut self, input: Var, offset: T) -> Result<Var> {
        let x = self.value(input);
        let shape = x.shape().to_vec();
        let out = x.data().iter().map(|&v| v + offset).collect();
        self.push("add_scalar", &shape, out, Op::AddScalar(input), &[input])
    }

    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let total = self.value(input).data().iter().copied().sum();
        self.push("sum", &[1], vec![total], Op::Sum(input), &[input])
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let x = self.value(input);
        if shape.iter().product::<usize>() != x.len() {
            return Err(Error::Shape(format!("cannot reshape {:?} into {shape:?}", x.shape())));
        }
        let out = x.data().to_vec();
        self.push("reshape", shape, out, Op::Reshape(input), &[input])
    }

    pub fn flatten(&mut self, input: Var) -> Result<Var> {
        let n = self.value(input).len();
        self.reshape(input, &[n])
    }

    /// Euclidean distance `sqrt(Σ (aᵢ − bᵢ)²)` as a scalar.
    pub fn distance(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "distance")?;
        let d = self
            .zip(a, b, |x, y| (x - y) * (x - y))
            .into_iter()
            .sum::<T>()
            .sqrt();
        self.push("distance", &[1], vec![d], Op::Distance(a, b), &[a, b])
    }

    /// Reverse sweep from a scalar `loss`, populating gradients on every
    /// node that depends on a leaf with `requires_grad`.
    pub fn backward(&mut self, loss: Var, mode: GradMode) -> Result<()> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![T::one()]);
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let wants = |v: Var| self.nodes[v.0].requires_grad;
            match &node.op {
                Op::Leaf => {}
                Op::Conv2d {
                    input,
                    weight,
                    bias,
                    geom,
                } => {
                    let (gx, gw, gb) = geom.backward(
                        self.value(*input).data(),
                        self.value(*weight).data(),
                        &g,
                        wants(*input),
                        wants(*weight),
                    );
                    if let Some(gx) = gx {
                        add_into(&mut grads[input.0], &gx);
                    }
                    if let Some(gw) = gw {
                        add_into(&mut grads[weight.0], &gw);
                    }
                    if wants(*bias) {
                        add_into(&mut grads[bias.0], &gb);
                    }
                }
                Op::Relu(input) => {
                    let x = self.value(*input).data();
                    let gx: Vec<T> = x
                        .iter()
                        .zip(&g)
                        .map(|(&v, &d)| if v > T::zero() { d } else { T::zero() })
                        .collect();
                    add_into(&mut grads[input.0], &gx);
                }
                Op::MaxPool { input, argmax } => {
                    let mut gx = vec![T::zero(); self.value(*input).len()];
                    for (&src, &d) in argmax.iter().zip(&g) {
                        gx[src] = gx[src] + d;
                    }
                    add_into(&mut grads[input.0], &gx);
                }
                Op::Dense { input, weight, bias } => {
                    let x = self.value(*input).data();
                    let w = self.value(*weight).data();
                    let (m, n) = (g.len(), x.len());
                    if wants(*input) {
                        let mut gx = vec![T::zero(); n];
                        T::gemm(n, m, 1, w, (1, n as isize), &g, (1, 1), T::zero(), &mut gx, (1, 1));
                        add_into(&mut grads[input.0], &gx);
                    }
                    if wants(*weight) {
                        let mut gw = vec![T::zero(); m * n];
                        T::gemm(m, 1, n, &g, (1, 1), x, (1, 1), T::zero(), &mut gw, (n as isize, 1));
                        add_into(&mut grads[weight.0], &gw);
                    }
                    if wants(*bias) {
                        add_into(&mut grads[bias.0], &g);
                    }
                }
                Op::L2Normalize {
                    input,
                    denom,
                    clamped,
                } => {
                    let gx: Vec<T> = if *clamped {
                        g.iter().map(|&d| d / *denom).collect()
                    } else {
                        let y = node.value.data();
                        let dot: T = y.iter().zip(&g).map(|(&a, &b)| a * b).sum();
                        y.iter()
                            .zip(&g)
                            .map(|(&yv, &d)| (d - yv * dot) / *denom)
                            .collect()
                    };
                    add_into(&mut grads[input.0], &gx);
                }
                Op::Add(a, b) => {
                    if wants(*a) {
                        add_into(&mut grads[a.0], &g);
                    }
                    if wants(*b) {
                        add_into(&mut grads[b.0], &g);
                    }
                }
                Op::Sub(a, b) => {
                    if wants(*a) {
                        add_into(&mut grads[a.0], &g);
                    }
                    if wants(*b) {
                        let neg: Vec<T> = g.iter().map(|&d| -d).collect();
                        add_into(&mut grads[b.0], &neg);
                    }
                }
                Op::Scale(input, factor) => {
                    let gx: Vec<T> = g.iter().map(|&d| d * *factor).collect();
                    add_into(&mut grads[input.0], &gx);
                }
                Op::AddScalar(input) | Op::Reshape(input) => {
                    add_into(&mut grads[input.0], &g);
                }
                Op::Sum(input) => {
                    let gx = vec![g[0]; self.value(*input).len()];
                    add_into(&mut grads[input.0], &gx);
                }
                Op::Distance(a, b) => {
                    let d = node.value.data()[0];
                    // the subgradient at coincident points is taken as zero
                    let coef = if d > T::zero() { g[0] / d } else { T::zero() };
                    let diff = self.zip(*a, *b, |x, y| (x - y) * coef);
                    if wants(*a) {
                        add_into(&mut grads[a.0], &diff);
                    }
                    if wants(*b) {
                        let neg: Vec<T> = diff.iter().map(|&d| -d).collect();
                        add_into(&mut grads[b.0], &neg);
                    }
                }
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("backward through node {i}")));
            }
            grads[i] = Some(g);
        }

        for (node, fresh) in self.nodes.iter_mut().zip(grads) {
            let is_leaf = matches!(node.op, Op::Leaf);
            match (mode, is_leaf, fresh) {
                (GradMode::Accumulate, true, Some(g)) => add_into(&mut node.grad, &g),
                (GradMode::Accumulate, true, None) => {}
                (_, _, fresh) => node.grad = fresh,
            }
        }
        Ok(())
    }
}
