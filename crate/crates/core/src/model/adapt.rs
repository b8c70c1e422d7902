//! ×2 → ×4 weight adaptation by tiling the tail convolution.
//!
//! With the depth-to-space ordering `out[c, y·r+i, x·r+j] = in[c·r²+i·r+j]`,
//! output pixel `(p, q)` of a ×4 block reads channel `c·16 + p·4 + q`. Pointing
//! that channel at the ×2 channel `c·4 + (p/2)·2 + q/2` makes every ×4 pixel
//! copy the ×2 pixel covering it, i.e. the ×4 output becomes the
//! nearest-neighbour ×2 upsampling of the ×2 output.

use crate::error::{invalid, Error, Result};
use crate::model::archive::WeightArchive;
use crate::model::config::ModelConfig;

/// Index of the ×2 tail channel that ×4 tail channel `dst` copies.
pub fn x4_source_channel(dst: usize) -> usize {
    let (c, rem) = (dst / 16, dst % 16);
    let (p, q) = (rem / 4, rem % 4);
    c * 4 + (p / 2) * 2 + q / 2
}

/// Builds a ×4 archive from a ×2 one. All layers but the tail conv are
/// copied verbatim; the tail weight and bias rows are tiled four times.
pub fn adapt_weights_x2_to_x4(x2: &WeightArchive, target: &ModelConfig) -> Result<WeightArchive> {
    target.validate()?;
    if x2.scale != 2 {
        return Err(invalid("adapt", format!("source archive is x{}, expected x2", x2.scale)));
    }
    if target.scale != 4 {
        return Err(invalid("adapt", format!("target config is x{}, expected x4", target.scale)));
    }
    let tail = target.tail_name();
    let tail_w = format!("{tail}.weight");
    let tail_b = format!("{tail}.bias");

    let mut out = WeightArchive::new(4, x2.nf);
    out.init = Some(format!(
        "x2-adapted from {}",
        x2.init.as_deref().unwrap_or("archive")
    ));
    for (name, shape) in target.param_shapes() {
        let src = x2.get(&name).ok_or_else(|| Error::Archive {
            offset: 0,
            msg: format!("layer `{name}` missing from x2 archive"),
        })?;
        let data = if name == tail_w || name == tail_b {
            let row = if name == tail_w { target.nf * 9 } else { 1 };
            let src_shape = {
                let mut s = shape.clone();
                s[0] = 12;
                s
            };
            if src.shape != src_shape {
                return Err(Error::LayerShape {
                    name,
                    expected: src_shape,
                    found: src.shape.clone(),
                });
            }
            let mut data = Vec::with_capacity(48 * row);
            for dst in 0..48 {
                let s = x4_source_channel(dst);
                data.extend_from_slice(&src.data[s * row..(s + 1) * row]);
            }
            data
        } else {
            if src.shape != shape {
                return Err(Error::LayerShape {
                    name,
                    expected: shape,
                    found: src.shape.clone(),
                });
            }
            src.data.clone()
        };
        out.push(name, shape, data)?;
    }
    Ok(out)
}
