//! Architecture hyperparameters and their flat `key=value` form.

use std::fmt;
use std::str::FromStr;

use crate::backbone::BackboneConfig;
use crate::error::{CoreError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvStyle {
    /// `k x k` kernels factorized as `k x 1` then `1 x k`.
    Asymmetric,
    Symmetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecoderStyle {
    /// Neighbor connection: each level is gated by its immediate neighbor.
    Ncd,
    /// Partial decoder: the deepest level gates both lower levels directly.
    Pd,
}

impl fmt::Display for ConvStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConvStyle::Asymmetric => "asym",
            ConvStyle::Symmetric => "sym",
        })
    }
}

impl FromStr for ConvStyle {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "asym" | "asymmetric" => Ok(ConvStyle::Asymmetric),
            "sym" | "symmetric" => Ok(ConvStyle::Symmetric),
            other => Err(CoreError::Config(format!("unknown convolution style `{other}`"))),
        }
    }
}

impl fmt::Display for DecoderStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecoderStyle::Ncd => "ncd",
            DecoderStyle::Pd => "pd",
        })
    }
}

impl FromStr for DecoderStyle {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ncd" => Ok(DecoderStyle::Ncd),
            "pd" => Ok(DecoderStyle::Pd),
            other => Err(CoreError::Config(format!("unknown decoder `{other}`"))),
        }
    }
}

/// Which of the three refinement blocks per level reverse their incoming
/// guidance, written as a bit string such as `100`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReversePattern(pub [bool; 3]);

impl Default for ReversePattern {
    fn default() -> Self {
        Self([true, false, false])
    }
}

impl fmt::Display for ReversePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for ReversePattern {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        let bits: Vec<char> = s.trim().chars().filter(|c| !matches!(c, ',' | ';' | ' ')).collect();
        if bits.len() != 3 {
            return Err(CoreError::Config(format!("reverse pattern `{s}` must have 3 flags")));
        }
        let mut out = [false; 3];
        for (o, c) in out.iter_mut().zip(bits) {
            *o = match c {
                '1' => true,
                '0' => false,
                _ => return Err(CoreError::Config(format!("reverse pattern `{s}` must be 0/1 flags"))),
            };
        }
        Ok(Self(out))
    }
}

/// Group sizes `g_1;g_2;g_3` for the three guidance blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupSizes(pub [usize; 3]);

impl Default for GroupSizes {
    fn default() -> Self {
        Self([32, 8, 1])
    }
}

impl fmt::Display for GroupSizes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};{};{}", self.0[0], self.0[1], self.0[2])
    }
}

impl FromStr for GroupSizes {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        let parts = parse_list::<usize>(s, ';')?;
        <[usize; 3]>::try_from(parts)
            .map(Self)
            .map_err(|_| CoreError::Config(format!("group sizes `{s}` must have 3 entries")))
    }
}

fn parse_list<T: FromStr>(s: &str, sep: char) -> Result<Vec<T>> {
    s.split(sep)
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| CoreError::Config(format!("cannot parse `{p}` in list `{s}`")))
        })
        .collect()
}

fn join<T: fmt::Display>(items: &[T], sep: &str) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(sep)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SinetConfig {
    /// Channel width `C` of every enhanced feature.
    pub channels: usize,
    /// Width of each receptive-field branch before concatenation.
    pub branch_channels: usize,
    pub dilations: [usize; 4],
    pub tem_conv: ConvStyle,
    pub decoder: DecoderStyle,
    pub reverse: ReversePattern,
    pub groups: GroupSizes,
    pub backbone: BackboneConfig,
    pub init_seed: u64,
}

impl Default for SinetConfig {
    fn default() -> Self {
        Self {
            channels: 32,
            branch_channels: 32,
            dilations: [1, 3, 5, 7],
            tem_conv: ConvStyle::Asymmetric,
            decoder: DecoderStyle::Ncd,
            reverse: ReversePattern::default(),
            groups: GroupSizes::default(),
            backbone: BackboneConfig::default(),
            init_seed: 0,
        }
    }
}

/// Keys accepted by [`SinetConfig::set`].
pub const CONFIG_KEYS: &[&str] = &[
    "channels",
    "branch_channels",
    "dilations",
    "tem_conv",
    "decoder",
    "reverse",
    "groups",
    "backbone.stem",
    "backbone.stages",
    "init_seed",
];

impl SinetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.branch_channels == 0 {
            return Err(CoreError::Config("channel widths must be positive".into()));
        }
        for &g in &self.groups.0 {
            if g == 0 || self.channels % g != 0 {
                return Err(CoreError::Config(format!(
                    "group size {g} does not divide channel width {}",
                    self.channels
                )));
            }
        }
        if self.dilations.iter().any(|&d| d == 0 || d % 2 == 0) {
            return Err(CoreError::Config(format!(
                "dilation rates {:?} must be odd and positive",
                self.dilations
            )));
        }
        self.backbone.validate()
    }

    /// Channel count after interleaving the guidance map into block `i`'s
    /// input: `C + C / g_i`.
    pub fn guided_channels(&self, block: usize) -> usize {
        self.channels + self.channels / self.groups.0[block]
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let int = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| CoreError::Config(format!("`{key}` expects an integer, got `{v}`")))
        };
        match key {
            "channels" => self.channels = int(value)?,
            "branch_channels" => self.branch_channels = int(value)?,
            "dilations" => {
                self.dilations = <[usize; 4]>::try_from(parse_list::<usize>(value, ',')?)
                    .map_err(|_| CoreError::Config("dilations needs 4 entries".into()))?
            }
            "tem_conv" => self.tem_conv = value.parse()?,
            "decoder" => self.decoder = value.parse()?,
            "reverse" => self.reverse = value.parse()?,
            "groups" => self.groups = value.parse()?,
            "backbone.stem" => self.backbone.stem_channels = int(value)?,
            "backbone.stages" => {
                self.backbone.stage_channels = <[usize; 4]>::try_from(parse_list::<usize>(value, ',')?)
                    .map_err(|_| CoreError::Config("backbone.stages needs 4 entries".into()))?
            }
            "init_seed" => {
                self.init_seed = value
                    .trim()
                    .parse()
                    .map_err(|_| CoreError::Config(format!("init_seed expects an integer, got `{value}`")))?
            }
            other => return Err(CoreError::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("channels", self.channels.to_string()),
            ("branch_channels", self.branch_channels.to_string()),
            ("dilations", join(&self.dilations, ",")),
            ("tem_conv", self.tem_conv.to_string()),
            ("decoder", self.decoder.to_string()),
            ("reverse", self.reverse.to_string()),
            ("groups", self.groups.to_string()),
            ("backbone.stem", self.backbone.stem_channels.to_string()),
            ("backbone.stages", join(&self.backbone.stage_channels, ",")),
            ("init_seed", self.init_seed.to_string()),
        ]
    }

    /// Newline-separated `key=value` lines.
    pub fn to_kv_string(&self) -> String {
        self.to_pairs().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Parses `key=value` lines on top of the defaults. Blank lines and `#`
    /// comments are ignored; unknown keys are rejected.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CoreError::Config(format!("expected key=value, got `{line}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
