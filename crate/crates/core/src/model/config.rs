use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Result};

/// Activation applied after the first convolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    /// Learnable per-channel negative slope.
    Prelu,
    Relu,
    LeakyRelu { slope: f32 },
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "prelu" => Ok(Activation::Prelu),
            "relu" => Ok(Activation::Relu),
            "leaky_relu" | "leaky-relu" => Ok(Activation::LeakyRelu { slope: 0.1 }),
            other => match other.strip_prefix("leaky_relu:") {
                Some(v) => v
                    .parse()
                    .map(|slope| Activation::LeakyRelu { slope })
                    .map_err(|_| format!("bad leaky_relu slope `{v}`")),
                None => Err(format!("unknown activation `{other}` (prelu, relu, leaky_relu[:slope])")),
            },
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Prelu => f.write_str("prelu"),
            Activation::Relu => f.write_str("relu"),
            Activation::LeakyRelu { slope } => write!(f, "leaky_relu:{slope}"),
        }
    }
}

/// Architecture hyperparameters of the plain ELSR network.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Upscaling factor, 2 or 4.
    pub scale: usize,
    /// Intermediate feature channels.
    pub nf: usize,
    /// Number of 3x3 convolutions, head and tail included.
    pub nb_convs: usize,
    pub activation: Activation,
    /// Adds the first conv's output to the last conv's input.
    pub residual: bool,
}

impl ModelConfig {
    pub fn new(scale: usize, nf: usize) -> Self {
        Self {
            scale,
            nf,
            nb_convs: 4,
            activation: Activation::Prelu,
            residual: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale != 2 && self.scale != 4 {
            return Err(invalid("ModelConfig", format!("scale must be 2 or 4, got {}", self.scale)));
        }
        if self.nf == 0 {
            return Err(invalid("ModelConfig", "nf must be at least 1"));
        }
        if self.nb_convs < 2 {
            return Err(invalid(
                "ModelConfig",
                format!("need at least a head and a tail conv, got nb_convs = {}", self.nb_convs),
            ));
        }
        Ok(())
    }

    pub fn tail_channels(&self) -> usize {
        3 * self.scale * self.scale
    }

    /// `(in, out)` channels of each conv in order.
    pub fn conv_channels(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(3, self.nf)];
        for _ in 1..self.nb_convs - 1 {
            out.push((self.nf, self.nf));
        }
        out.push((self.nf, self.tail_channels()));
        out
    }

    /// Parameter names and shapes in archive order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (i, (cin, cout)) in self.conv_channels().into_iter().enumerate() {
            out.push((format!("conv{}.weight", i + 1), vec![cout, cin, 3, 3]));
            out.push((format!("conv{}.bias", i + 1), vec![cout]));
            if i == 0 && self.activation == Activation::Prelu {
                out.push(("prelu.slope".into(), vec![self.nf]));
            }
        }
        out
    }

    pub fn tail_name(&self) -> String {
        format!("conv{}", self.nb_convs)
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::new(4, 6)
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "x{} nf={} convs={} activation={} residual={}",
            self.scale, self.nf, self.nb_convs, self.activation, self.residual
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        let shapes: Vec<Vec<usize>> = c.param_shapes().into_iter().map(|(_, s)| s).collect();
        assert_eq!(
            shapes,
            vec![
                vec![6, 3, 3, 3],
                vec![6],
                vec![6],
                vec![6, 6, 3, 3],
                vec![6],
                vec![6, 6, 3, 3],
                vec![6],
                vec![48, 6, 3, 3],
                vec![48],
            ]
        );
    }

    #[test]
    fn validation() {
        assert!(ModelConfig::new(3, 6).validate().is_err());
        assert!(ModelConfig::new(4, 0).validate().is_err());
        let mut c = ModelConfig::new(2, 8);
        c.nb_convs = 1;
        assert!(c.validate().is_err());
        c.nb_convs = 2;
        c.validate().unwrap();
        assert_eq!(c.conv_channels(), vec![(3, 8), (8, 12)]);
    }

    #[test]
    fn activation_parsing() {
        assert_eq!("prelu".parse::<Activation>().unwrap(), Activation::Prelu);
        assert_eq!(
            "leaky_relu:0.2".parse::<Activation>().unwrap(),
            Activation::LeakyRelu { slope: 0.2 }
        );
        assert!("gelu".parse::<Activation>().is_err());
    }
}
