use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::{field, list, parse_kv};

/// Which architecture a [`NetworkSpec`] describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArchKind {
    DenseUnet,
    Autoencoder,
    Unet,
    Densenet,
}

impl ArchKind {
    pub const ALL: [ArchKind; 4] = [
        ArchKind::DenseUnet,
        ArchKind::Autoencoder,
        ArchKind::Unet,
        ArchKind::Densenet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ArchKind::DenseUnet => "dense-unet",
            ArchKind::Autoencoder => "autoencoder",
            ArchKind::Unet => "unet",
            ArchKind::Densenet => "densenet",
        }
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ArchKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture {s:?}")))
    }
}

/// Width/depth knobs shared by every architecture.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkConfig {
    pub kind: ArchKind,
    /// Channels produced by the stem convolution.
    pub stem_channels: usize,
    /// Channels each dense-block layer contributes.
    pub growth: usize,
    /// Layers per dense block (conv pairs per block for plain stacks).
    pub block_layers: usize,
    /// Transition output widths, one per pooling stage, shallowest first.
    pub widths: Vec<usize>,
    /// Adds the network input to the head output, so the layers predict a
    /// correction to the masked patch.
    pub input_skip: bool,
    pub seed: u64,
}

impl NetworkConfig {
    /// Three 12-layer dense blocks with growth rate 4.
    pub fn paper(kind: ArchKind) -> Self {
        Self {
            kind,
            stem_channels: 16,
            growth: 4,
            block_layers: 12,
            widths: vec![32, 48],
            input_skip: false,
            seed: 0,
        }
    }

    /// Three 4-layer blocks, growth 4, a narrow stem and an input skip.
    /// Trains on a CPU in minutes.
    pub fn desk(kind: ArchKind) -> Self {
        Self {
            kind,
            stem_channels: 8,
            growth: 4,
            block_layers: 4,
            widths: vec![12, 16],
            input_skip: true,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Number of 2× pooling stages.
    pub fn down_stages(&self) -> usize {
        match self.kind {
            ArchKind::Densenet => 0,
            _ => self.widths.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stem_channels == 0 || self.growth == 0 || self.block_layers == 0 {
            return Err(Error::Config(
                "stem channels, growth and block length must be ≥ 1".into(),
            ));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::Config("need ≥ 1 non-zero transition width".into()));
        }
        Ok(())
    }

    /// Plain-text `key = value` form.
    pub fn to_kv(&self) -> String {
        let widths: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        format!(
            "kind = {}\nstem_channels = {}\ngrowth = {}\nblock_layers = {}\nwidths = {}\ninput_skip = {}\nseed = {}\n",
            self.kind,
            self.stem_channels,
            self.growth,
            self.block_layers,
            widths.join(","),
            self.input_skip,
            self.seed
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let map = parse_kv(text)?;
        let kind: String = field(&map, "kind")?;
        let cfg = Self {
            kind: kind.parse()?,
            stem_channels: field(&map, "stem_channels")?,
            growth: field(&map, "growth")?,
            block_layers: field(&map, "block_layers")?,
            widths: list(&field::<String>(&map, "widths")?, ',')?,
            input_skip: field(&map, "input_skip")?,
            seed: field(&map, "seed")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Dense block: each layer is BN → ReLU → 3³ conv emitting `growth`
/// channels, fed with the block input and every earlier layer's output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseBlockSpec {
    pub name: String,
    pub in_channels: usize,
    pub layers: usize,
    pub growth: usize,
}

impl DenseBlockSpec {
    pub fn layer_input_channels(&self, layer: usize) -> usize {
        self.in_channels + layer * self.growth
    }

    pub fn out_channels(&self) -> usize {
        self.in_channels + self.layers * self.growth
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resample {
    None,
    /// Conv then 2× max-pool.
    Down,
    /// 2× nearest upsample then conv.
    Up,
}

/// BN → ReLU → 3³ conv, optionally changing resolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionSpec {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub resample: Resample,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Layer {
    /// Bare convolution, used for the stem.
    Conv {
        name: String,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    },
    Dense(DenseBlockSpec),
    /// `convs` × (BN → ReLU → 3³ conv); the plain-U-net building block.
    ConvStack {
        name: String,
        in_channels: usize,
        out_channels: usize,
        convs: usize,
    },
    Transition(TransitionSpec),
    /// Pushes the current activation onto the skip stack.
    SaveSkip,
    /// Pops the skip stack and concatenates it after the current channels.
    ConcatSkip,
    /// BN → ReLU → 1³ conv to a single linear output channel.
    Head { name: String, in_channels: usize },
}

/// Ordered layer graph of one architecture.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    pub config: NetworkConfig,
    pub layers: Vec<Layer>,
}

impl NetworkSpec {
    pub fn kind(&self) -> ArchKind {
        self.config.kind
    }

    pub fn skip_connections(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l, Layer::ConcatSkip))
            .count()
    }

    pub fn dense_blocks(&self) -> impl Iterator<Item = &DenseBlockSpec> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Dense(d) => Some(d),
            _ => None,
        })
    }

    /// Every spatial extent must be divisible by this.
    pub fn spatial_divisor(&self) -> usize {
        1 << self.config.down_stages()
    }

    pub fn check_input(&self, shape: &[usize]) -> Result<()> {
        let &[_, c, d, h, w] = shape else {
            return Err(Error::Shape(format!(
                "network input must be (N, 1, D, H, W), got {shape:?}"
            )));
        };
        if c != 1 {
            return Err(Error::Shape(format!("network input has {c} channels, expects 1")));
        }
        let div = self.spatial_divisor();
        if [d, h, w].iter().any(|&e| e % div != 0) {
            return Err(Error::Shape(format!(
                "spatial dims {d}x{h}x{w} must be divisible by {div}"
            )));
        }
        Ok(())
    }

    pub fn build(config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut b = Builder::default();
        let c = config.stem_channels;
        b.push(Layer::Conv {
            name: "stem".into(),
            in_channels: 1,
            out_channels: c,
            kernel: 3,
        });
        b.channels = c;
        match config.kind {
            ArchKind::DenseUnet => b.u_shape(config, true, true),
            ArchKind::Unet => b.u_shape(config, false, true),
            ArchKind::Autoencoder => b.u_shape(config, false, false),
            ArchKind::Densenet => b.flat_dense(config),
        }
        b.push(Layer::Head {
            name: "head".into(),
            in_channels: b.channels,
        });
        Ok(Self {
            config: config.clone(),
            layers: b.layers,
        })
    }
}

#[derive(Default)]
struct Builder {
    layers: Vec<Layer>,
    channels: usize,
    skips: Vec<usize>,
}

impl Builder {
    fn push(&mut self, layer: Layer) {
        self.layers.push(layer);
    }

    fn block(&mut self, name: &str, cfg: &NetworkConfig, dense: bool) {
        if dense {
            let spec = DenseBlockSpec {
                name: name.into(),
                in_channels: self.channels,
                layers: cfg.block_layers,
                growth: cfg.growth,
            };
            self.channels = spec.out_channels();
            self.push(Layer::Dense(spec));
        } else {
            // same output width as the dense block it replaces
            let out = self.channels + cfg.block_layers * cfg.growth;
            self.push(Layer::ConvStack {
                name: name.into(),
                in_channels: self.channels,
                out_channels: out,
                convs: 2,
            });
            self.channels = out;
        }
    }

    fn transition(&mut self, name: String, out: usize, resample: Resample) {
        self.push(Layer::Transition(TransitionSpec {
            name,
            in_channels: self.channels,
            out_channels: out,
            resample,
        }));
        self.channels = out;
    }

    fn save(&mut self, skips: bool) {
        if skips {
            self.push(Layer::SaveSkip);
            self.skips.push(self.channels);
        }
    }

    fn concat(&mut self, skips: bool) {
        if skips {
            self.push(Layer::ConcatSkip);
            self.channels += self.skips.pop().expect("balanced skips");
        }
    }

    /// stem → block → [down transitions] → bottleneck block →
    /// [up transitions with skip concatenation] → block.
    fn u_shape(&mut self, cfg: &NetworkConfig, dense: bool, skips: bool) {
        let depth = cfg.widths.len();
        self.block("enc", cfg, dense);
        for (i, &w) in cfg.widths.iter().enumerate() {
            self.save(skips);
            self.transition(format!("down{i}"), w, Resample::Down);
        }
        self.block("bottleneck", cfg, dense);
        for i in (0..depth).rev() {
            let out = if i == 0 {
                cfg.stem_channels
            } else {
                cfg.widths[i - 1]
            };
            self.transition(format!("up{i}"), out, Resample::Up);
            self.concat(skips);
        }
        self.block("dec", cfg, dense);
    }

    /// Three dense blocks at full resolution joined by transitions.
    fn flat_dense(&mut self, cfg: &NetworkConfig) {
        self.block("block0", cfg, true);
        self.transition("trans0".into(), cfg.widths[0], Resample::None);
        self.block("block1", cfg, true);
        let w = *cfg.widths.last().unwrap();
        self.transition("trans1".into(), w, Resample::None);
        self.block("block2", cfg, true);
    }
}
