use super::WUNetConfig;
use crate::autodiff::{Graph, Real, Tensor, Var};
use crate::imaging::{join_crops, split_crops, to_space};
use crate::rng::{derive, CounterRng};
use crate::{ColorSpace, Error, Image, Result};

/// One convolution layer of the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvSpec {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

impl ConvSpec {
    fn new(name: String, in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            name,
            in_channels,
            out_channels,
            kernel,
        }
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        vec![self.out_channels, self.in_channels, self.kernel, self.kernel]
    }
}

/// Layer list in parameter order: encoder levels top-down, the two
/// bottleneck convs, decoder levels bottom-up, then the 1x1 head.
pub(crate) fn layer_specs(cfg: &WUNetConfig) -> Vec<ConvSpec> {
    let mut specs = Vec::new();
    let mut prev = 3;
    for l in 0..cfg.depth {
        let c = cfg.channels(l);
        specs.push(ConvSpec::new(format!("enc{l}.conv0"), prev, c, 3));
        specs.push(ConvSpec::new(format!("enc{l}.conv1"), c, c, 3));
        prev = c;
    }
    let mid = cfg.channels(cfg.depth);
    specs.push(ConvSpec::new("mid.conv0".into(), prev, mid, 3));
    specs.push(ConvSpec::new("mid.conv1".into(), mid, mid, 3));
    let mut below = mid;
    for l in (0..cfg.depth).rev() {
        let c = cfg.channels(l);
        specs.push(ConvSpec::new(format!("dec{l}.conv0"), below + c, c, 3));
        specs.push(ConvSpec::new(format!("dec{l}.conv1"), c, c, 3));
        below = c;
    }
    specs.push(ConvSpec::new("head".into(), below, 3, 1));
    specs
}

/// The denoising UNet. Parameters are stored as `(weight, bias)` pairs in
/// [`layer_specs`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct WUNet {
    config: WUNetConfig,
    names: Vec<String>,
    params: Vec<Tensor<f32>>,
    /// Test-set MSE recorded when the weights were selected, if any.
    pub test_mse: Option<f64>,
}

/// He-uniform weights (bound `sqrt(6 / fan_in)`), zero biases, one stream per layer.
pub fn build_model(cfg: &WUNetConfig, seed: u64) -> Result<WUNet> {
    cfg.validate()?;
    let mut names = Vec::new();
    let mut params = Vec::new();
    for spec in layer_specs(cfg) {
        let shape = spec.weight_shape();
        let n: usize = shape.iter().product();
        let fan_in = (spec.in_channels * spec.kernel * spec.kernel) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let mut rng = CounterRng::new(derive(seed, &spec.name));
        let w = (0..n).map(|_| rng.uniform(-bound, bound) as f32).collect();
        names.push(format!("{}.weight", spec.name));
        params.push(Tensor::parameter(shape, w)?);
        names.push(format!("{}.bias", spec.name));
        params.push(Tensor::parameter(vec![spec.out_channels], vec![0.0; spec.out_channels])?);
    }
    Ok(WUNet {
        config: cfg.clone(),
        names,
        params,
        test_mse: None,
    })
}

impl WUNet {
    pub(crate) fn from_parts(config: WUNetConfig, named: Vec<(String, Tensor<f32>)>, test_mse: Option<f64>) -> Result<Self> {
        config.validate()?;
        let expected = build_model(&config, 0)?;
        if named.len() != expected.params.len() {
            return Err(Error::Data(format!(
                "expected {} parameter tensors, found {}",
                expected.params.len(),
                named.len()
            )));
        }
        let mut params = Vec::with_capacity(named.len());
        for ((name, t), (want_name, want)) in named.into_iter().zip(expected.names.iter().zip(&expected.params)) {
            if &name != want_name || t.shape() != want.shape() {
                return Err(Error::Data(format!(
                    "parameter {name} {:?} does not match {want_name} {:?}",
                    t.shape(),
                    want.shape()
                )));
            }
            params.push(t.requiring_grad(true));
        }
        Ok(Self {
            config,
            names: expected.names,
            params,
            test_mse,
        })
    }

    pub fn config(&self) -> &WUNetConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor<f32>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<f32>] {
        &mut self.params
    }

    pub fn named_params(&self) -> impl Iterator<Item = (&str, &Tensor<f32>)> {
        self.names.iter().map(String::as_str).zip(&self.params)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    pub fn layers(&self) -> Vec<ConvSpec> {
        layer_specs(&self.config)
    }

    /// Records the network on `graph` for input `x: [N, 3, H, W]`.
    ///
    /// `params` are the graph handles of the parameters in model order, so
    /// the same routine serves training (`f32`) and gradient checks (`f64`).
    pub fn forward_graph<T: Real>(cfg: &WUNetConfig, graph: &mut Graph<T>, params: &[Var], x: Var) -> Result<Var> {
        let mut next = params.chunks_exact(2);
        let mut conv = |g: &mut Graph<T>, h: Var| -> Result<Var> {
            let wb = next
                .next()
                .ok_or_else(|| Error::Contract("too few parameters for the configured depth".into()))?;
            g.conv2d(h, wb[0], wb[1])
        };
        let mut h = x;
        let mut skips = Vec::with_capacity(cfg.depth);
        for _ in 0..cfg.depth {
            let a = conv(graph, h)?;
            h = graph.relu(a);
            let a = conv(graph, h)?;
            h = graph.relu(a);
            skips.push(h);
            h = graph.maxpool2(h)?;
        }
        for _ in 0..2 {
            let a = conv(graph, h)?;
            h = graph.relu(a);
        }
        while let Some(skip) = skips.pop() {
            let up = graph.upsample_nn2(h)?;
            h = graph.concat_channels(up, skip)?;
            for _ in 0..2 {
                let a = conv(graph, h)?;
                h = graph.relu(a);
            }
        }
        let out = conv(graph, h)?;
        Ok(graph.sigmoid(out))
    }

    /// Adds every parameter to `graph` as a leaf, in model order.
    pub fn param_leaves(&self, graph: &mut Graph<f32>) -> Vec<Var> {
        self.params.iter().map(|p| graph.leaf(p)).collect()
    }

    /// Forward pass over a planar batch `[n, 3, h, w]` at the model's tensor size.
    pub fn forward_batch(&self, batch: &[f32], n: usize) -> Result<Vec<f32>> {
        let (w, h) = self.config.tensor_size();
        if batch.len() != n * 3 * w * h {
            return Err(Error::Shape(format!(
                "batch of {} values is not {n} x 3 x {h} x {w}",
                batch.len()
            )));
        }
        let mut g = Graph::new();
        let params: Vec<Var> = self
            .params
            .iter()
            .map(|p| g.input(p.shape().to_vec(), p.data().to_vec(), false))
            .collect::<Result<_>>()?;
        let x = g.input(vec![n, 3, h, w], batch.to_vec(), false)?;
        let y = Self::forward_graph(&self.config, &mut g, &params, x)?;
        Ok(g.value(y).to_vec())
    }

    /// Network-sized tiles of `img` in the model's color space.
    pub(crate) fn tiles(&self, img: &Image) -> Result<Vec<Image>> {
        let img = to_space(img, self.config.color_space);
        let (w, h) = self.config.tensor_size();
        match (self.config.crop_mode, self.config.crop_grid) {
            (true, Some(grid)) if (img.width(), img.height()) == self.config.input_size => split_crops(&img, &grid),
            _ if (img.width(), img.height()) == (w, h) => Ok(vec![img]),
            _ => Err(Error::Shape(format!(
                "{}x{} image does not match model input {}x{}",
                img.width(),
                img.height(),
                self.config.input_size.0,
                self.config.input_size.1
            ))),
        }
    }

    /// Runs the network on tensor-sized images in the model's color space.
    pub fn forward_tiles(&self, tiles: &[Image]) -> Result<Vec<Image>> {
        let (w, h) = self.config.tensor_size();
        let mut batch = Vec::with_capacity(tiles.len() * 3 * w * h);
        for t in tiles {
            if (t.width(), t.height()) != (w, h) {
                return Err(Error::Shape(format!(
                    "tile {}x{} does not match network input {w}x{h}",
                    t.width(),
                    t.height()
                )));
            }
            batch.extend(to_space(t, self.config.color_space).to_planar());
        }
        let out = self.forward_batch(&batch, tiles.len())?;
        out.chunks_exact(3 * w * h)
            .map(|p| Image::from_planar(w, h, p, self.config.color_space))
            .collect()
    }

    /// Denoises a whole RGB image; crop mode splits, batches and rejoins.
    pub fn forward_image(&self, img: &Image) -> Result<Image> {
        let (iw, ih) = self.config.input_size;
        if (img.width(), img.height()) != (iw, ih) {
            return Err(Error::Shape(format!(
                "{}x{} image does not match model input {iw}x{ih}",
                img.width(),
                img.height()
            )));
        }
        let tiles = self.tiles(img)?;
        let out = self.forward_tiles(&tiles)?;
        let joined = match (self.config.crop_mode, self.config.crop_grid) {
            (true, Some(grid)) => join_crops(&out, &grid)?,
            _ => out.into_iter().next().expect("one tile"),
        };
        Ok(to_space(&joined, ColorSpace::Rgb))
    }
}
