//! Single-sample reverse-mode differentiation over flat f64 buffers.
//!
//! Parameters live in one flat vector; a `Param` node is a view of a range
//! of it and its gradient is accumulated into the same range of a flat
//! gradient vector. Nodes are appended in evaluation order, so the reverse
//! pass simply walks the node list backwards.

pub type NodeId = usize;

/// `c = alpha·op(a)·op(b) + beta·c` for row-major operands, where `op`
/// optionally transposes. `a` is m×k after `op`, `b` is k×n, `c` is m×n.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Geometry of a grouped 2-d convolution over a `[C, H, W]` input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub ph: usize,
    pub pw: usize,
    pub groups: usize,
}

impl ConvGeom {
    pub fn out_hw(&self) -> (usize, usize) {
        (
            (self.h + 2 * self.ph - self.kh) / self.stride + 1,
            (self.w + 2 * self.pw - self.kw) / self.stride + 1,
        )
    }

    /// Rows of one group's column matrix.
    fn k_group(&self) -> usize {
        self.c_in / self.groups * self.kh * self.kw
    }

    pub fn weight_len(&self) -> usize {
        self.c_out * self.k_group()
    }
}

/// Unfold the input into per-group `[K, P]` column matrices, stacked.
fn im2col(x: &[f64], g: &ConvGeom, cols: &mut [f64]) {
    let (ho, wo) = g.out_hw();
    let p = ho * wo;
    let mut row = 0;
    for c in 0..g.c_in {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..ho {
                    let iy = (oy * g.stride + ki) as isize - g.ph as isize;
                    let line = &mut dst[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= g.h as isize {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pw as isize;
                        *v = if ix < 0 || ix >= g.w as isize { 0.0 } else { src[ix as usize] };
                    }
                }
                row += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add column gradients into `dx`.
fn col2im(dcols: &[f64], g: &ConvGeom, dx: &mut [f64]) {
    let (ho, wo) = g.out_hw();
    let p = ho * wo;
    let mut row = 0;
    for c in 0..g.c_in {
        let plane = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let src = &dcols[row * p..(row + 1) * p];
                for oy in 0..ho {
                    let iy = (oy * g.stride + ki) as isize - g.ph as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let base = iy as usize * g.w;
                    for ox in 0..wo {
                        let ix = (ox * g.stride + kj) as isize - g.pw as isize;
                        if ix >= 0 && ix < g.w as isize {
                            plane[base + ix as usize] += src[oy * wo + ox];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

#[derive(Debug)]
enum Op {
    Input,
    Param { offset: usize },
    Conv { x: NodeId, w: NodeId, b: NodeId, geom: ConvGeom, cols: Vec<f64> },
    Linear { x: NodeId, w: NodeId, b: NodeId },
    Silu { x: NodeId },
    Add { a: NodeId, b: NodeId },
    Concat { parts: Vec<NodeId> },
    Reshape { x: NodeId },
    GlobalAvgPool { x: NodeId, channels: usize },
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    /// Empty for `Param` nodes, whose value is read from the parameter vector.
    value: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

/// Recorded computation for one sample.
pub struct Tape<'p> {
    params: &'p [f64],
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [f64]) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        let n = &self.nodes[id];
        match n.op {
            Op::Param { offset } => &self.params[offset..offset + n.shape.iter().product::<usize>()],
            _ => &n.value,
        }
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id].shape
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            shape,
            value,
            op,
            needs_grad,
        });
        self.nodes.len() - 1
    }

    pub fn input(&mut self, shape: Vec<usize>, value: Vec<f64>) -> NodeId {
        assert_eq!(shape.iter().product::<usize>(), value.len(), "input shape");
        self.push(shape, value, Op::Input, false)
    }

    pub fn param(&mut self, offset: usize, shape: Vec<usize>) -> NodeId {
        assert!(offset + shape.iter().product::<usize>() <= self.params.len(), "param range");
        self.push(shape, Vec::new(), Op::Param { offset }, true)
    }

    /// Convolution of `[C, H, W]` input with `[O, C/groups, kh, kw]` weights.
    pub fn conv(&mut self, x: NodeId, w: NodeId, b: NodeId, geom: ConvGeom) -> NodeId {
        assert_eq!(self.shape(x), &[geom.c_in, geom.h, geom.w], "conv input shape");
        assert_eq!(self.value(w).len(), geom.weight_len(), "conv weight shape");
        assert_eq!(self.value(b).len(), geom.c_out, "conv bias shape");
        assert!(geom.c_in % geom.groups == 0 && geom.c_out % geom.groups == 0);
        let (ho, wo) = geom.out_hw();
        let p = ho * wo;
        let k = geom.k_group();
        let og = geom.c_out / geom.groups;
        let mut cols = vec![0.0; geom.c_in * geom.kh * geom.kw * p];
        im2col(self.value(x), &geom, &mut cols);
        let mut out = vec![0.0; geom.c_out * p];
        for (o, bias) in self.value(b).iter().enumerate() {
            out[o * p..(o + 1) * p].fill(*bias);
        }
        let wv = self.value(w);
        for g in 0..geom.groups {
            gemm(
                og,
                k,
                p,
                &wv[g * og * k..(g + 1) * og * k],
                false,
                &cols[g * k * p..(g + 1) * k * p],
                false,
                1.0,
                &mut out[g * og * p..(g + 1) * og * p],
            );
        }
        let needs = self.nodes[x].needs_grad || self.nodes[w].needs_grad || self.nodes[b].needs_grad;
        self.push(vec![geom.c_out, ho, wo], out, Op::Conv { x, w, b, geom, cols }, needs)
    }

    /// `W·x + b` with `W` of shape `[out, in]`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let xv = self.value(x);
        let n_in = xv.len();
        let bv = self.value(b);
        let n_out = bv.len();
        assert_eq!(self.value(w).len(), n_in * n_out, "linear weight shape");
        let mut out = bv.to_vec();
        gemm(n_out, n_in, 1, self.value(w), false, xv, false, 1.0, &mut out);
        let needs = self.nodes[x].needs_grad || self.nodes[w].needs_grad || self.nodes[b].needs_grad;
        self.push(vec![n_out], out, Op::Linear { x, w, b }, needs)
    }

    /// `x·σ(x)`.
    pub fn silu(&mut self, x: NodeId) -> NodeId {
        let out = self.value(x).iter().map(|&v| v / (1.0 + (-v).exp())).collect();
        let shape = self.shape(x).to_vec();
        let needs = self.nodes[x].needs_grad;
        self.push(shape, out, Op::Silu { x }, needs)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.shape(a), self.shape(b), "add shapes");
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        let shape = self.shape(a).to_vec();
        let needs = self.nodes[a].needs_grad || self.nodes[b].needs_grad;
        self.push(shape, out, Op::Add { a, b }, needs)
    }

    /// Flat concatenation.
    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut out = Vec::new();
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        let needs = parts.iter().any(|&p| self.nodes[p].needs_grad);
        let len = out.len();
        self.push(vec![len], out, Op::Concat { parts: parts.to_vec() }, needs)
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> NodeId {
        assert_eq!(shape.iter().product::<usize>(), self.value(x).len(), "reshape size");
        let out = self.value(x).to_vec();
        let needs = self.nodes[x].needs_grad;
        self.push(shape, out, Op::Reshape { x }, needs)
    }

    /// Mean over the spatial dimensions of a `[C, ...]` tensor.
    pub fn global_avg_pool(&mut self, x: NodeId) -> NodeId {
        let channels = self.shape(x)[0];
        let v = self.value(x);
        let per = v.len() / channels;
        let out = v.chunks_exact(per).map(|c| c.iter().sum::<f64>() / per as f64).collect();
        let needs = self.nodes[x].needs_grad;
        self.push(vec![channels], out, Op::GlobalAvgPool { x, channels }, needs)
    }

    /// Back-propagate `seeds` (output gradients) and add parameter gradients
    /// into `grads`, which is indexed like the parameter vector.
    pub fn backward(&self, seeds: &[(NodeId, &[f64])], grads: &mut [f64]) {
        assert_eq!(grads.len(), self.params.len(), "gradient buffer size");
        let mut g: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        fn acc(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
            slot.get_or_insert_with(|| vec![0.0; len])
        }
        for (id, seed) in seeds {
            let dst = acc(&mut g[*id], seed.len());
            assert_eq!(dst.len(), seed.len(), "seed size");
            for (d, s) in dst.iter_mut().zip(seed.iter()) {
                *d += s;
            }
        }

        for id in (0..self.nodes.len()).rev() {
            let Some(dy) = g[id].take() else {
                continue;
            };
            let node = &self.nodes[id];
            if !node.needs_grad {
                continue;
            }
            let len_of = |n: NodeId| self.value(n).len();
            match &node.op {
                Op::Input => {}
                Op::Param { offset } => {
                    for (d, v) in grads[*offset..*offset + dy.len()].iter_mut().zip(&dy) {
                        *d += v;
                    }
                }
                Op::Conv { x, w, b, geom, cols } => {
                    let (ho, wo) = geom.out_hw();
                    let p = ho * wo;
                    let k = geom.k_group();
                    let og = geom.c_out / geom.groups;
                    if self.nodes[*b].needs_grad {
                        let db = acc(&mut g[*b], geom.c_out);
                        for (o, d) in db.iter_mut().enumerate() {
                            *d += dy[o * p..(o + 1) * p].iter().sum::<f64>();
                        }
                    }
                    if self.nodes[*w].needs_grad {
                        let dw = acc(&mut g[*w], geom.weight_len());
                        for gi in 0..geom.groups {
                            gemm(
                                og,
                                p,
                                k,
                                &dy[gi * og * p..(gi + 1) * og * p],
                                false,
                                &cols[gi * k * p..(gi + 1) * k * p],
                                true,
                                1.0,
                                &mut dw[gi * og * k..(gi + 1) * og * k],
                            );
                        }
                    }
                    if self.nodes[*x].needs_grad {
                        let wv = self.value(*w);
                        let mut dcols = vec![0.0; geom.groups * k * p];
                        for gi in 0..geom.groups {
                            gemm(
                                k,
                                og,
                                p,
                                &wv[gi * og * k..(gi + 1) * og * k],
                                true,
                                &dy[gi * og * p..(gi + 1) * og * p],
                                false,
                                0.0,
                                &mut dcols[gi * k * p..(gi + 1) * k * p],
                            );
                        }
                        let dx = acc(&mut g[*x], geom.c_in * geom.h * geom.w);
                        col2im(&dcols, geom, dx);
                    }
                }
                Op::Linear { x, w, b } => {
                    let (n_in, n_out) = (len_of(*x), dy.len());
                    if self.nodes[*b].needs_grad {
                        for (d, v) in acc(&mut g[*b], n_out).iter_mut().zip(&dy) {
                            *d += v;
                        }
                    }
                    if self.nodes[*w].needs_grad {
                        let xv = self.value(*x);
                        gemm(n_out, 1, n_in, &dy, false, xv, false, 1.0, acc(&mut g[*w], n_in * n_out));
                    }
                    if self.nodes[*x].needs_grad {
                        let wv = self.value(*w);
                        gemm(n_in, n_out, 1, wv, true, &dy, false, 1.0, acc(&mut g[*x], n_in));
                    }
                }
                Op::Silu { x } => {
                    let xv = self.value(*x);
                    let dx = acc(&mut g[*x], xv.len());
                    for ((d, &v), &u) in dx.iter_mut().zip(xv).zip(&dy) {
                        let s = 1.0 / (1.0 + (-v).exp());
                        *d += u * s * (1.0 + v * (1.0 - s));
                    }
                }
                Op::Add { a, b } => {
                    for t in [*a, *b] {
                        if self.nodes[t].needs_grad {
                            for (d, v) in acc(&mut g[t], dy.len()).iter_mut().zip(&dy) {
                                *d += v;
                            }
                        }
                    }
                }
                Op::Concat { parts } => {
                    let mut start = 0;
                    for &p in parts {
                        let len = len_of(p);
                        if self.nodes[p].needs_grad {
                            for (d, v) in acc(&mut g[p], len).iter_mut().zip(&dy[start..start + len]) {
                                *d += v;
                            }
                        }
                        start += len;
                    }
                }
                Op::Reshape { x } => {
                    for (d, v) in acc(&mut g[*x], dy.len()).iter_mut().zip(&dy) {
                        *d += v;
                    }
                }
                Op::GlobalAvgPool { x, channels } => {
                    let len = len_of(*x);
                    let per = len / channels;
                    let dx = acc(&mut g[*x], len);
                    for (c, chunk) in dx.chunks_exact_mut(per).enumerate() {
                        let v = dy[c] / per as f64;
                        for d in chunk {
                            *d += v;
                        }
                    }
                }
            }
        }
    }
}
