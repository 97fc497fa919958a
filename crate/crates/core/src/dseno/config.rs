use crate::error::{Error, Result};
use crate::nn::PaddingMode;
use crate::tensor::DType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeConfig {
    pub channels: usize,
    pub reduction: usize,
}

impl SeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.reduction == 0 || self.channels % self.reduction != 0 {
            return Err(Error::Config(format!(
                "SE channels {} must be a positive multiple of reduction {}",
                self.channels, self.reduction
            )));
        }
        Ok(())
    }

    pub fn hidden(&self) -> usize {
        self.channels / self.reduction
    }

    pub fn parameter_count(&self) -> usize {
        let (c, h) = (self.channels, self.hidden());
        2 * c * h + h + c
    }
}

/// What follows the two dilated convolutions of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mixer {
    /// Squeeze-and-excitation channel gate.
    Se(SeConfig),
    /// Nothing: the block is a plain residual dilated-conv pair.
    Plain,
    /// Two biased pointwise convolutions with a GELU between, sized to
    /// replace an `r = 1` SE gate parameter for parameter.
    ParamMatched,
}

impl Mixer {
    pub fn name(&self) -> &'static str {
        match self {
            Mixer::Se(_) => "se",
            Mixer::Plain => "none",
            Mixer::ParamMatched => "pm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel: usize,
    pub bias: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DsBlockConfig {
    pub width: usize,
    /// Tap spacing `[along H, along W]`, shared by both convolutions.
    pub dilation: [usize; 2],
    pub conv1: ConvSpec,
    pub conv2: ConvSpec,
    pub mixer: Mixer,
    pub padding: PaddingMode,
}

impl DsBlockConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::Config("block width must be positive".into()));
        }
        for k in [self.conv1.kernel, self.conv2.kernel] {
            if k % 2 == 0 {
                return Err(Error::EvenKernel { kh: k, kw: k });
            }
        }
        if self.dilation[0] == 0 || self.dilation[1] == 0 {
            return Err(Error::NonPositiveDilation(self.dilation[0], self.dilation[1]));
        }
        if let Mixer::Se(se) = self.mixer {
            se.validate()?;
            if se.channels != self.width {
                return Err(Error::Config(format!(
                    "SE channels {} differ from block width {}",
                    se.channels, self.width
                )));
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        let c = self.width;
        let conv = |s: ConvSpec| c * c * s.kernel * s.kernel + if s.bias { c } else { 0 };
        let mixer = match self.mixer {
            Mixer::Se(se) => se.parameter_count(),
            Mixer::Plain => 0,
            Mixer::ParamMatched => 2 * (c * c + c),
        };
        conv(self.conv1) + conv(self.conv2) + mixer
    }

    /// Receptive-field growth `[along H, along W]` contributed by this block.
    pub fn receptive_growth(&self) -> [usize; 2] {
        let span = (self.conv1.kernel - 1) + (self.conv2.kernel - 1);
        [self.dilation[0] * span, self.dilation[1] * span]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub width: usize,
    pub blocks: Vec<DsBlockConfig>,
    pub proj_hidden: usize,
    /// Whether the data pipeline appends two grid-coordinate channels; they
    /// are already included in `in_channels`.
    pub append_coords: bool,
    pub dtype: DType,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.width == 0 || self.proj_hidden == 0 {
            return Err(Error::Config("channel counts and widths must be positive".into()));
        }
        if self.append_coords && self.in_channels < 3 {
            return Err(Error::Config(format!(
                "in_channels {} cannot hold two coordinate channels plus data",
                self.in_channels
            )));
        }
        if self.blocks.is_empty() {
            return Err(Error::Config("a model needs at least one block".into()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            b.validate()?;
            if b.width != self.width {
                return Err(Error::Config(format!(
                    "block {i} width {} differs from model width {}",
                    b.width, self.width
                )));
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        let (ci, c, co, hp) = (self.in_channels, self.width, self.out_channels, self.proj_hidden);
        let lift = ci * c + c;
        let head = c * hp + hp + hp * co + co;
        lift + self.blocks.iter().map(DsBlockConfig::parameter_count).sum::<usize>() + head
    }

    /// Receptive field `[along H, along W]` of one output point.
    pub fn receptive_field(&self) -> [usize; 2] {
        self.blocks.iter().fold([1, 1], |[a, b], blk| {
            let [gh, gw] = blk.receptive_growth();
            [a + gh, b + gw]
        })
    }

    pub fn dilations(&self) -> (Vec<usize>, Vec<usize>) {
        self.blocks.iter().map(|b| (b.dilation[0], b.dilation[1])).unzip()
    }

    /// Replace every block's mixer.
    pub fn with_mixer(mut self, mixer: Mixer) -> Self {
        self.blocks.iter_mut().for_each(|b| b.mixer = mixer);
        self
    }

    /// Change the latent width, keeping SE reductions.
    pub fn with_width(mut self, width: usize) -> Self {
        self.width = width;
        for b in &mut self.blocks {
            b.width = width;
            if let Mixer::Se(se) = &mut b.mixer {
                se.channels = width;
            }
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(dil: [usize; 2], mixer: Mixer) -> DsBlockConfig {
        DsBlockConfig {
            width: 4,
            dilation: dil,
            conv1: ConvSpec { kernel: 3, bias: true },
            conv2: ConvSpec { kernel: 3, bias: true },
            mixer,
            padding: PaddingMode::Zero,
        }
    }

    #[test]
    fn two_stacked_3x3_see_five_cells() {
        let cfg = ModelConfig {
            in_channels: 1,
            out_channels: 1,
            width: 4,
            blocks: vec![block([1, 1], Mixer::Plain)],
            proj_hidden: 8,
            append_coords: false,
            dtype: DType::F32,
        };
        assert_eq!(cfg.receptive_field(), [5, 5]);
    }

    #[test]
    fn pm_matches_se_at_unit_reduction() {
        let se = block([1, 1], Mixer::Se(SeConfig { channels: 4, reduction: 1 }));
        let pm = block([1, 1], Mixer::ParamMatched);
        assert_eq!(se.parameter_count(), pm.parameter_count());
    }

    #[test]
    fn indivisible_reduction_is_rejected() {
        let b = block([1, 1], Mixer::Se(SeConfig { channels: 4, reduction: 3 }));
        assert!(b.validate().is_err());
    }
}
