use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

/// 8-bit interleaved RGB image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::ShapeMismatch {
                op: "ImageBuffer::new",
                dim: "data length",
                expected: width * height * 3,
                got: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Copies the `w x h` window whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<ImageBuffer> {
        if x + w > self.width || y + h > self.height {
            return Err(invalid(
                "crop",
                format!("{w}x{h} window at ({x}, {y}) exceeds {}x{} image", self.width, self.height),
            ));
        }
        let mut data = Vec::with_capacity(w * h * 3);
        for row in y..y + h {
            let start = (row * self.width + x) * 3;
            data.extend_from_slice(&self.data[start..start + w * 3]);
        }
        Ok(ImageBuffer {
            width: w,
            height: h,
            data,
        })
    }
}

/// Reads an 8-bit PNG. Grayscale is expanded to three equal channels,
/// palettes are expanded, alpha is dropped; 16-bit images are rejected.
pub fn read_png(path: &Path) -> Result<ImageBuffer> {
    let png_err = |msg: String| Error::Png {
        path: path.to_path_buf(),
        msg,
    };
    let file = File::open(path)?;
    let mut decoder = png::Decoder::new(std::io::BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| png_err(e.to_string()))?;
    let (color, depth) = reader.output_color_type();
    if depth != png::BitDepth::Eight {
        return Err(png_err(format!("unsupported bit depth {depth:?}, only 8-bit PNGs are accepted")));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| png_err("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let raw = &buf[..info.buffer_size()];
    let stride = info.line_size;
    let mut data = Vec::with_capacity(w * h * 3);
    for row in raw.chunks(stride).take(h) {
        match color {
            png::ColorType::Rgb => data.extend_from_slice(&row[..w * 3]),
            png::ColorType::Rgba => row[..w * 4]
                .chunks_exact(4)
                .for_each(|p| data.extend_from_slice(&p[..3])),
            png::ColorType::Grayscale => row[..w].iter().for_each(|&g| data.extend_from_slice(&[g, g, g])),
            png::ColorType::GrayscaleAlpha => row[..w * 2]
                .chunks_exact(2)
                .for_each(|p| data.extend_from_slice(&[p[0], p[0], p[0]])),
            png::ColorType::Indexed => return Err(png_err("palette was not expanded".into())),
        }
    }
    ImageBuffer::new(w, h, data)
}

/// Encodes an 8-bit RGB PNG in memory.
pub fn encode_png(image: &ImageBuffer) -> std::result::Result<Vec<u8>, png::EncodingError> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, image.width as u32, image.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header()?;
        writer.write_image_data(&image.data)?;
        writer.finish()?;
    }
    Ok(out)
}

/// Writes an 8-bit RGB PNG, creating parent directories.
pub fn write_png(image: &ImageBuffer, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let bytes = encode_png(image).map_err(|e| Error::Png {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let mut file = BufWriter::new(File::create(path)?);
    file.write_all(&bytes)?;
    file.flush()?;
    Ok(())
}

/// `[1, 3, H, W]` tensor with values `u8 / 255`.
pub fn to_tensor(image: &ImageBuffer) -> Tensor {
    let (w, h) = (image.width, image.height);
    Tensor::from_fn([1, 3, h, w], |_, c, y, x| image.data[(y * w + x) * 3 + c] as f32 / 255.0)
}

/// Quantizes a `[1, 3, H, W]` tensor: clamp to `[0, 1]`, scale by 255,
/// round half away from zero.
pub fn from_tensor(t: &Tensor) -> Result<ImageBuffer> {
    let [n, c, h, w] = t.shape();
    if n != 1 {
        return Err(Error::ShapeMismatch {
            op: "from_tensor",
            dim: "batch",
            expected: 1,
            got: n,
        });
    }
    if c != 3 {
        return Err(Error::ShapeMismatch {
            op: "from_tensor",
            dim: "channels",
            expected: 3,
            got: c,
        });
    }
    Ok(ImageBuffer::from_fn(w, h, |x, y| {
        let q = |ch| quantize(t.at(0, ch, y, x));
        [q(0), q(1), q(2)]
    }))
}

#[inline]
pub fn quantize(v: f32) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Stacks images of identical size into one `[N, 3, H, W]` tensor.
pub fn batch_to_tensor(images: &[&ImageBuffer]) -> Result<Tensor> {
    let first = images.first().ok_or_else(|| invalid("batch_to_tensor", "empty batch"))?;
    let (w, h) = (first.width, first.height);
    if let Some(bad) = images.iter().find(|i| i.width != w || i.height != h) {
        return Err(invalid(
            "batch_to_tensor",
            format!("mixed sizes {w}x{h} and {}x{}", bad.width, bad.height),
        ));
    }
    Ok(Tensor::from_fn([images.len(), 3, h, w], |n, c, y, x| {
        images[n].data[(y * w + x) * 3 + c] as f32 / 255.0
    }))
}
