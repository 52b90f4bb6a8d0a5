//! Minimal feed-forward networks with per-node activation capture.
//!
//! Hidden layers are dense or small 2-D convolutions, always ReLU-activated,
//! followed by one private linear head per task. Every hidden node's incoming
//! weights plus its bias form one contiguous group (the trailing entry of the
//! node's row is the bias), which is what makes group-level sparsification and
//! freezing cheap: a group is a single slice.
//!
//! All math is f64 and strictly sequential, so forward/backward results are
//! bitwise-reproducible for a fixed seed and batch order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::rng::Rng;
use crate::Result;

/// Shape of a single example at the network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputShape {
    /// Flat feature vector of the given length.
    Flat(usize),
    /// Channel-major image, flattened as `c * h * w + y * w + x`.
    Image { channels: usize, height: usize, width: usize },
}

impl InputShape {
    pub fn dim(&self) -> usize {
        match *self {
            InputShape::Flat(d) => d,
            InputShape::Image { channels, height, width } => channels * height * width,
        }
    }
}

/// Layer family plus the conv-only kernel geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Dense,
    Conv2d { kernel_h: usize, kernel_w: usize, stride: usize, padding: usize },
}

/// One hidden layer: `node_count` nodes, each fed by `fan_in` lower nodes.
///
/// For conv layers `fan_in` counts input channels and a node is one filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub fan_in: usize,
    pub node_count: usize,
}

impl LayerSpec {
    pub fn dense(fan_in: usize, node_count: usize) -> Self {
        LayerSpec { kind: LayerKind::Dense, fan_in, node_count }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn conv2d(
        in_channels: usize,
        filters: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        LayerSpec {
            kind: LayerKind::Conv2d { kernel_h, kernel_w, stride, padding },
            fan_in: in_channels,
            node_count: filters,
        }
    }
}

/// Fully resolved geometry of one hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerGeom {
    pub kind: LayerKind,
    /// Number of nodes (dense units or conv filters).
    pub rows: usize,
    /// Incoming weights per node plus one trailing bias slot.
    pub row_len: usize,
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl LayerGeom {
    pub fn in_len(&self) -> usize {
        self.in_c * self.in_h * self.in_w
    }

    pub fn out_len(&self) -> usize {
        self.rows * self.out_h * self.out_w
    }

    /// Incoming weight count (bias excluded).
    pub fn fan_in_scalars(&self) -> usize {
        self.row_len - 1
    }
}

/// Validated network architecture: hidden layers plus one head per task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetSpec {
    pub input: InputShape,
    pub layers: Vec<LayerSpec>,
    pub head_dims: Vec<usize>,
    geoms: Vec<LayerGeom>,
}

impl NetSpec {
    /// Resolve and validate the layer chain.
    ///
    /// Conv layers must all precede dense layers; the flatten boundary between
    /// them is implicit and channel-major.
    pub fn new(input: InputShape, layers: Vec<LayerSpec>, head_dims: Vec<usize>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one hidden layer".into()));
        }
        if head_dims.is_empty() {
            return Err(Error::Config("network needs at least one task head".into()));
        }
        if head_dims.contains(&0) {
            return Err(Error::Config("head output dimension must be >= 1".into()));
        }

        let (mut c, mut h, mut w) = match input {
            InputShape::Flat(d) => {
                if d == 0 {
                    return Err(Error::Config("input dimension must be >= 1".into()));
                }
                (d, 1, 1)
            }
            InputShape::Image { channels, height, width } => {
                if channels == 0 || height == 0 || width == 0 {
                    return Err(Error::Config("image input dimensions must be >= 1".into()));
                }
                (channels, height, width)
            }
        };

        let mut geoms = Vec::with_capacity(layers.len());
        let mut seen_dense = false;
        for (i, spec) in layers.iter().enumerate() {
            if spec.node_count == 0 {
                return Err(Error::Config(format!("layer {i}: node_count must be >= 1")));
            }
            match spec.kind {
                LayerKind::Conv2d { kernel_h, kernel_w, stride, padding } => {
                    if seen_dense {
                        return Err(Error::Config(format!(
                            "layer {i}: conv layers must precede all dense layers"
                        )));
                    }
                    if matches!(input, InputShape::Flat(_)) {
                        return Err(Error::Config(
                            "conv layers require an image input shape".into(),
                        ));
                    }
                    if spec.fan_in != c {
                        return Err(Error::Config(format!(
                            "layer {i}: fan_in {} does not match incoming channels {c}",
                            spec.fan_in
                        )));
                    }
                    if kernel_h == 0 || kernel_w == 0 || stride == 0 {
                        return Err(Error::Config(format!(
                            "layer {i}: kernel and stride must be >= 1"
                        )));
                    }
                    if h + 2 * padding < kernel_h || w + 2 * padding < kernel_w {
                        return Err(Error::Config(format!(
                            "layer {i}: kernel exceeds padded input"
                        )));
                    }
                    let out_h = (h + 2 * padding - kernel_h) / stride + 1;
                    let out_w = (w + 2 * padding - kernel_w) / stride + 1;
                    geoms.push(LayerGeom {
                        kind: spec.kind,
                        rows: spec.node_count,
                        row_len: spec.fan_in * kernel_h * kernel_w + 1,
                        in_c: c,
                        in_h: h,
                        in_w: w,
                        out_h,
                        out_w,
                    });
                    c = spec.node_count;
                    h = out_h;
                    w = out_w;
                }
                LayerKind::Dense => {
                    seen_dense = true;
                    let in_len = c * h * w;
                    if spec.fan_in != in_len {
                        return Err(Error::Config(format!(
                            "layer {i}: fan_in {} does not match incoming width {in_len}",
                            spec.fan_in
                        )));
                    }
                    geoms.push(LayerGeom {
                        kind: LayerKind::Dense,
                        rows: spec.node_count,
                        row_len: in_len + 1,
                        in_c: in_len,
                        in_h: 1,
                        in_w: 1,
                        out_h: 1,
                        out_w: 1,
                    });
                    c = spec.node_count;
                    h = 1;
                    w = 1;
                }
            }
        }

        Ok(NetSpec { input, layers, head_dims, geoms })
    }

    pub fn geoms(&self) -> &[LayerGeom] {
        &self.geoms
    }

    /// Flattened width of the last hidden layer (what the heads read).
    pub fn last_hidden_dim(&self) -> usize {
        self.geoms.last().map(|g| g.out_len()).unwrap_or(0)
    }
}

/// One task head: a plain linear readout, bias in the trailing column.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub rows: usize,
    pub row_len: usize,
    pub w: Vec<f64>,
}

/// All trainable state of the network.
///
/// `hidden[l]` is row-major `rows x row_len`; row `n` is exactly the group of
/// node `(l, n)`: incoming weights followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    geoms: Vec<LayerGeom>,
    input_dim: usize,
    pub hidden: Vec<Vec<f64>>,
    pub heads: Vec<HeadParams>,
}

fn init_row(row: &mut [f64], rng: &mut Rng) {
    // Zero-mean weights with variance 2/fan_in; bias starts at zero.
    let fan_in = row.len() - 1;
    let sd = libm::sqrt(2.0 / fan_in as f64);
    for w in row[..fan_in].iter_mut() {
        *w = sd * rng.normal();
    }
    row[fan_in] = 0.0;
}

impl NetworkParams {
    /// Randomly initialize all layers and heads. Deterministic given `rng`.
    pub fn init(spec: &NetSpec, rng: &mut Rng) -> Self {
        let mut hidden = Vec::with_capacity(spec.geoms.len());
        for g in &spec.geoms {
            let mut w = vec![0.0; g.rows * g.row_len];
            for n in 0..g.rows {
                init_row(&mut w[n * g.row_len..(n + 1) * g.row_len], rng);
            }
            hidden.push(w);
        }
        let last = spec.last_hidden_dim();
        let mut heads = Vec::with_capacity(spec.head_dims.len());
        for &dim in &spec.head_dims {
            let row_len = last + 1;
            let mut w = vec![0.0; dim * row_len];
            for k in 0..dim {
                init_row(&mut w[k * row_len..(k + 1) * row_len], rng);
            }
            heads.push(HeadParams { rows: dim, row_len, w });
        }
        NetworkParams { geoms: spec.geoms.clone(), input_dim: spec.input.dim(), hidden, heads }
    }

    pub fn geoms(&self) -> &[LayerGeom] {
        &self.geoms
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layer_count(&self) -> usize {
        self.geoms.len()
    }

    pub fn head_count(&self) -> usize {
        self.heads.len()
    }

    pub fn last_hidden_dim(&self) -> usize {
        self.geoms.last().map(|g| g.out_len()).unwrap_or(0)
    }

    /// The group of node `(layer, node)`: incoming weights plus trailing bias.
    pub fn group(&self, layer: usize, node: usize) -> &[f64] {
        let g = &self.geoms[layer];
        &self.hidden[layer][node * g.row_len..(node + 1) * g.row_len]
    }

    pub fn group_mut(&mut self, layer: usize, node: usize) -> &mut [f64] {
        let g = &self.geoms[layer];
        &mut self.hidden[layer][node * g.row_len..(node + 1) * g.row_len]
    }

    /// Re-draw one node's group from the initialization distribution.
    pub fn reinit_group(&mut self, layer: usize, node: usize, rng: &mut Rng) {
        init_row(self.group_mut(layer, node), rng);
    }

    /// Rebuild params from raw storage (checkpoint loading).
    pub fn from_raw(
        geoms: Vec<LayerGeom>,
        input_dim: usize,
        hidden: Vec<Vec<f64>>,
        heads: Vec<HeadParams>,
    ) -> Result<Self> {
        if geoms.len() != hidden.len() {
            return Err(Error::Config("layer/tensor count mismatch".into()));
        }
        for (g, w) in geoms.iter().zip(&hidden) {
            if w.len() != g.rows * g.row_len {
                return Err(Error::Config("hidden tensor length mismatch".into()));
            }
        }
        for h in &heads {
            if h.w.len() != h.rows * h.row_len {
                return Err(Error::Config("head tensor length mismatch".into()));
            }
        }
        Ok(NetworkParams { geoms, input_dim, hidden, heads })
    }
}

/// Captured forward pass: post-ReLU activations per layer plus head logits.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Per hidden layer, `batch x out_len`, channel-major for conv layers.
    pub hidden: Vec<Vec<f64>>,
    /// `batch x head_dim` logits of the active head.
    pub logits: Vec<f64>,
    pub batch: usize,
    pub head_dim: usize,
}

/// Gradients, shape-congruent with `NetworkParams`.
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub hidden: Vec<Vec<f64>>,
    pub heads: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        GradientSet {
            hidden: params.hidden.iter().map(|w| vec![0.0; w.len()]).collect(),
            heads: params.heads.iter().map(|h| vec![0.0; h.w.len()]).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.hidden.iter().chain(self.heads.iter()).all(|t| t.iter().all(|x| x.is_finite()))
    }
}

fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

fn dense_forward(geom: &LayerGeom, w: &[f64], input: &[f64], batch: usize, out: &mut [f64]) {
    let il = geom.in_len();
    let rl = geom.row_len;
    for b in 0..batch {
        let x = &input[b * il..(b + 1) * il];
        let o = &mut out[b * geom.rows..(b + 1) * geom.rows];
        for (j, oj) in o.iter_mut().enumerate() {
            let row = &w[j * rl..j * rl + rl];
            let mut z = row[il];
            for i in 0..il {
                z += row[i] * x[i];
            }
            *oj = relu(z);
        }
    }
}

fn conv_forward(geom: &LayerGeom, w: &[f64], input: &[f64], batch: usize, out: &mut [f64]) {
    let LayerKind::Conv2d { kernel_h, kernel_w, stride, padding } = geom.kind else {
        unreachable!()
    };
    let (ic, ih, iw) = (geom.in_c, geom.in_h, geom.in_w);
    let (oh, ow) = (geom.out_h, geom.out_w);
    let rl = geom.row_len;
    for b in 0..batch {
        let x = &input[b * ic * ih * iw..(b + 1) * ic * ih * iw];
        for oc in 0..geom.rows {
            let row = &w[oc * rl..oc * rl + rl];
            let bias = row[rl - 1];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut z = bias;
                    for c in 0..ic {
                        for ky in 0..kernel_h {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            if iy < 0 || iy >= ih as isize {
                                continue;
                            }
                            for kx in 0..kernel_w {
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if ix < 0 || ix >= iw as isize {
                                    continue;
                                }
                                z += row[(c * kernel_h + ky) * kernel_w + kx]
                                    * x[(c * ih + iy as usize) * iw + ix as usize];
                            }
                        }
                    }
                    out[((b * geom.rows + oc) * oh + oy) * ow + ox] = relu(z);
                }
            }
        }
    }
}

/// Forward pass with all intermediate post-ReLU activations captured.
///
/// `prune` optionally zeroes whole nodes post-activation (flat node indexing,
/// layer-major); used for importance-validation curves, never for training.
pub fn forward_impl(
    params: &NetworkParams,
    x: &[f64],
    task_id: usize,
    prune: Option<&[bool]>,
) -> Result<ForwardTrace> {
    if task_id >= params.heads.len() {
        return Err(Error::Lookup(format!("unknown task id {task_id}")));
    }
    let dim = params.input_dim;
    if dim == 0 || !x.len().is_multiple_of(dim) {
        return Err(Error::Data(format!(
            "batch length {} is not a multiple of input dim {dim}",
            x.len()
        )));
    }
    let batch = x.len() / dim;
    if batch == 0 {
        return Err(Error::Data("empty batch".into()));
    }

    let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(params.geoms.len());
    let mut node_base = 0usize;
    for (l, g) in params.geoms.iter().enumerate() {
        let input: &[f64] = if l == 0 { x } else { &hidden[l - 1] };
        let mut out = vec![0.0; batch * g.out_len()];
        match g.kind {
            LayerKind::Dense => dense_forward(g, &params.hidden[l], input, batch, &mut out),
            LayerKind::Conv2d { .. } => conv_forward(g, &params.hidden[l], input, batch, &mut out),
        }
        if let Some(mask) = prune {
            let plane = g.out_h * g.out_w;
            for n in 0..g.rows {
                if mask[node_base + n] {
                    for b in 0..batch {
                        let base = (b * g.rows + n) * plane;
                        out[base..base + plane].fill(0.0);
                    }
                }
            }
        }
        node_base += g.rows;
        hidden.push(out);
    }

    let head = &params.heads[task_id];
    let last = hidden.last().expect("at least one hidden layer");
    let ld = head.row_len - 1;
    let mut logits = vec![0.0; batch * head.rows];
    for b in 0..batch {
        let a = &last[b * ld..(b + 1) * ld];
        for k in 0..head.rows {
            let row = &head.w[k * head.row_len..(k + 1) * head.row_len];
            let mut z = row[ld];
            for j in 0..ld {
                z += row[j] * a[j];
            }
            logits[b * head.rows + k] = z;
        }
    }

    Ok(ForwardTrace { hidden, logits, batch, head_dim: head.rows })
}

/// Plain forward pass for task `task_id`.
pub fn forward(params: &NetworkParams, x: &[f64], task_id: usize) -> Result<ForwardTrace> {
    forward_impl(params, x, task_id, None)
}

/// Mean softmax cross-entropy of logits against labels.
pub fn cross_entropy(trace: &ForwardTrace, labels: &[usize]) -> Result<f64> {
    let (n, c) = (trace.batch, trace.head_dim);
    if labels.len() != n {
        return Err(Error::Data("label count does not match batch".into()));
    }
    let mut loss = 0.0;
    for (b, &y) in labels.iter().enumerate() {
        if y >= c {
            return Err(Error::Data(format!("label {y} out of range for {c}-way head")));
        }
        let z = &trace.logits[b * c..(b + 1) * c];
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &zi in z {
            sum += libm::exp(zi - m);
        }
        loss += m + libm::log(sum) - z[y];
    }
    Ok(loss / n as f64)
}

fn dense_backward(
    geom: &LayerGeom,
    w: &[f64],
    input: &[f64],
    d_out: &[f64],
    batch: usize,
    d_w: &mut [f64],
    mut d_in: Option<&mut [f64]>,
) {
    let il = geom.in_len();
    let rl = geom.row_len;
    for b in 0..batch {
        let x = &input[b * il..(b + 1) * il];
        let g = &d_out[b * geom.rows..(b + 1) * geom.rows];
        for (j, &gj) in g.iter().enumerate() {
            if gj == 0.0 {
                continue;
            }
            let dr = &mut d_w[j * rl..j * rl + rl];
            for i in 0..il {
                dr[i] += gj * x[i];
            }
            dr[il] += gj;
            if let Some(di) = d_in.as_deref_mut() {
                let row = &w[j * rl..j * rl + rl];
                let di = &mut di[b * il..(b + 1) * il];
                for i in 0..il {
                    di[i] += gj * row[i];
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    geom: &LayerGeom,
    w: &[f64],
    input: &[f64],
    d_out: &[f64],
    batch: usize,
    d_w: &mut [f64],
    mut d_in: Option<&mut [f64]>,
) {
    let LayerKind::Conv2d { kernel_h, kernel_w, stride, padding } = geom.kind else {
        unreachable!()
    };
    let (ic, ih, iw) = (geom.in_c, geom.in_h, geom.in_w);
    let (oh, ow) = (geom.out_h, geom.out_w);
    let rl = geom.row_len;
    for b in 0..batch {
        let x = &input[b * ic * ih * iw..(b + 1) * ic * ih * iw];
        for oc in 0..geom.rows {
            let row = &w[oc * rl..oc * rl + rl];
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = d_out[((b * geom.rows + oc) * oh + oy) * ow + ox];
                    if g == 0.0 {
                        continue;
                    }
                    d_w[oc * rl + rl - 1] += g;
                    for c in 0..ic {
                        for ky in 0..kernel_h {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            if iy < 0 || iy >= ih as isize {
                                continue;
                            }
                            for kx in 0..kernel_w {
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if ix < 0 || ix >= iw as isize {
                                    continue;
                                }
                                let wi = (c * kernel_h + ky) * kernel_w + kx;
                                let xi = (c * ih + iy as usize) * iw + ix as usize;
                                d_w[oc * rl + wi] += g * x[xi];
                                if let Some(di) = d_in.as_deref_mut() {
                                    di[b * ic * ih * iw + xi] += g * row[wi];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Mean cross-entropy loss and exact gradients for task `task_id`.
///
/// Inactive heads receive exactly zero gradient.
pub fn task_loss_and_grad(
    params: &NetworkParams,
    x: &[f64],
    labels: &[usize],
    task_id: usize,
) -> Result<(f64, GradientSet)> {
    let trace = forward(params, x, task_id)?;
    let loss = cross_entropy(&trace, labels)?;
    let (n, c) = (trace.batch, trace.head_dim);

    // dLoss/dLogits = (softmax - onehot) / n.
    let mut d_logits = vec![0.0; n * c];
    for (b, &y) in labels.iter().enumerate() {
        let z = &trace.logits[b * c..(b + 1) * c];
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &zi in z {
            sum += libm::exp(zi - m);
        }
        let d = &mut d_logits[b * c..(b + 1) * c];
        for k in 0..c {
            d[k] = libm::exp(z[k] - m) / sum / n as f64;
        }
        d[y] -= 1.0 / n as f64;
    }

    let mut grads = GradientSet::zeros_like(params);

    // Head backward: weight grads plus the gradient into the last activations.
    let head = &params.heads[task_id];
    let ld = head.row_len - 1;
    let last = trace.hidden.last().expect("hidden layer");
    let mut d_act = vec![0.0; n * ld];
    {
        let dh = &mut grads.heads[task_id];
        for b in 0..n {
            let a = &last[b * ld..(b + 1) * ld];
            for k in 0..c {
                let g = d_logits[b * c + k];
                if g == 0.0 {
                    continue;
                }
                let dr = &mut dh[k * head.row_len..(k + 1) * head.row_len];
                for j in 0..ld {
                    dr[j] += g * a[j];
                }
                dr[ld] += g;
                let row = &head.w[k * head.row_len..(k + 1) * head.row_len];
                let da = &mut d_act[b * ld..(b + 1) * ld];
                for j in 0..ld {
                    da[j] += g * row[j];
                }
            }
        }
    }

    // Hidden layers, last to first. ReLU gate: stored activation > 0.
    for l in (0..params.geoms.len()).rev() {
        let g = &params.geoms[l];
        let act = &trace.hidden[l];
        for (d, &a) in d_act.iter_mut().zip(act.iter()) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
        let input: &[f64] = if l == 0 { x } else { &trace.hidden[l - 1] };
        let mut d_in = if l == 0 { None } else { Some(vec![0.0; n * g.in_len()]) };
        match g.kind {
            LayerKind::Dense => dense_backward(
                g,
                &params.hidden[l],
                input,
                &d_act,
                n,
                &mut grads.hidden[l],
                d_in.as_deref_mut(),
            ),
            LayerKind::Conv2d { .. } => conv_backward(
                g,
                &params.hidden[l],
                input,
                &d_act,
                n,
                &mut grads.hidden[l],
                d_in.as_deref_mut(),
            ),
        }
        if let Some(di) = d_in {
            d_act = di;
        }
    }

    Ok((loss, grads))
}

/// Per-node mean ReLU activation over a whole dataset.
///
/// Returns one value per node in layer-major flat order. Conv nodes contribute
/// the spatial mean of their post-ReLU channel map per example. Examples are
/// accumulated in dataset order, so any minibatch partition of the same
/// ordering yields bitwise-identical sums.
pub fn mean_node_activations(
    params: &NetworkParams,
    x: &[f64],
    task_id: usize,
    batch_size: usize,
) -> Result<Vec<f64>> {
    let dim = params.input_dim;
    if x.is_empty() {
        return Err(Error::Data("empty dataset for activation means".into()));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    let n = x.len() / dim;
    let total_nodes: usize = params.geoms.iter().map(|g| g.rows).sum();
    let mut sums = vec![0.0; total_nodes];
    let mut start = 0usize;
    while start < n {
        let end = (start + batch_size).min(n);
        let trace = forward(params, &x[start * dim..end * dim], task_id)?;
        let bn = end - start;
        let mut base = 0usize;
        for (l, g) in params.geoms.iter().enumerate() {
            let plane = g.out_h * g.out_w;
            let act = &trace.hidden[l];
            for b in 0..bn {
                for node in 0..g.rows {
                    let off = (b * g.rows + node) * plane;
                    let mut s = 0.0;
                    for p in 0..plane {
                        s += act[off + p];
                    }
                    sums[base + node] += s / plane as f64;
                }
            }
            base += g.rows;
        }
        start = end;
    }
    for s in sums.iter_mut() {
        *s /= n as f64;
    }
    Ok(sums)
}
