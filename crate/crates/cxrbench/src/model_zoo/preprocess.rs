use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor3;

use super::registry::{BackboneSpec, Normalization};

// ImageNet channel statistics used by the caffe/torch conventions.
const CAFFE_BGR_MEAN: [f64; 3] = [103.939, 116.779, 123.68];
const TORCH_RGB_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
const TORCH_RGB_STD: [f64; 3] = [0.229, 0.224, 0.225];

/// Decoded 8-bit raster, 1 (grayscale) or 3 (RGB) channels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width * height * channels);
        assert!(channels == 1 || channels == 3);
        RasterImage {
            width,
            height,
            channels,
            pixels,
        }
    }

    #[inline]
    fn at(&self, y: usize, x: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    /// Mean over all pixel values; the handle used by intensity-threshold
    /// baselines.
    pub fn mean_intensity(&self) -> f64 {
        if self.pixels.is_empty() {
            return 0.0;
        }
        self.pixels.iter().map(|p| f64::from(*p)).sum::<f64>() / self.pixels.len() as f64
    }
}

/// Reads an 8-bit PNG, collapsing alpha if present.
pub fn decode_png(path: &Path) -> Result<RasterImage> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(file);
    let mut reader = decoder.read_info().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Decode {
            path: path.to_path_buf(),
            msg: format!("unsupported bit depth {:?}", info.bit_depth),
        });
    }
    let w = info.width as usize;
    let h = info.height as usize;
    let data = &buf[..info.buffer_size()];
    let (channels, pixels) = match info.color_type {
        png::ColorType::Grayscale => (1, data.to_vec()),
        png::ColorType::GrayscaleAlpha => (1, data.chunks_exact(2).map(|p| p[0]).collect()),
        png::ColorType::Rgb => (3, data.to_vec()),
        png::ColorType::Rgba => (
            3,
            data.chunks_exact(4)
                .flat_map(|p| [p[0], p[1], p[2]])
                .collect(),
        ),
        other => {
            return Err(Error::Decode {
                path: path.to_path_buf(),
                msg: format!("unsupported color type {other:?}"),
            })
        }
    };
    Ok(RasterImage::new(w, h, channels, pixels))
}

/// Bilinear resample to `(out_h, out_w)`. Resizing to the source dims is an
/// exact copy.
pub fn resize_bilinear(img: &RasterImage, out_h: usize, out_w: usize) -> RasterImage {
    if img.height == out_h && img.width == out_w {
        return img.clone();
    }
    let scale_y = img.height as f64 / out_h as f64;
    let scale_x = img.width as f64 / out_w as f64;
    let mut pixels = Vec::with_capacity(out_h * out_w * img.channels);
    for oy in 0..out_h {
        // pixel-center mapping
        let sy = ((oy as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (img.height - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let fy = sy - y0 as f64;
        for ox in 0..out_w {
            let sx = ((ox as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (img.width - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let fx = sx - x0 as f64;
            for c in 0..img.channels {
                let v00 = f64::from(img.at(y0, x0, c));
                let v01 = f64::from(img.at(y0, x1, c));
                let v10 = f64::from(img.at(y1, x0, c));
                let v11 = f64::from(img.at(y1, x1, c));
                let top = v00 + (v01 - v00) * fx;
                let bottom = v10 + (v11 - v10) * fx;
                let v = top + (bottom - top) * fy;
                pixels.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(out_w, out_h, img.channels, pixels)
}

/// Applies a family's input-range convention to a 3-channel raster.
pub fn normalize(img: &RasterImage, convention: Normalization) -> Tensor3 {
    debug_assert_eq!(img.channels, 3);
    Tensor3::from_fn(img.height, img.width, 3, |y, x, c| {
        let v = f64::from(img.at(y, x, c));
        match convention {
            Normalization::ZeroOne => v / 255.0,
            Normalization::TfStyle => v / 127.5 - 1.0,
            Normalization::CaffeStyle => {
                // BGR reorder, then subtract the channel mean
                let bgr = 2 - c;
                f64::from(img.at(y, x, bgr)) - CAFFE_BGR_MEAN[c]
            }
            Normalization::TorchStyle => (v / 255.0 - TORCH_RGB_MEAN[c]) / TORCH_RGB_STD[c],
            Normalization::Passthrough => v,
        }
    })
}

fn replicate_to_rgb(img: &RasterImage) -> RasterImage {
    match img.channels {
        3 => img.clone(),
        1 => RasterImage::new(
            img.width,
            img.height,
            3,
            img.pixels.iter().flat_map(|p| [*p, *p, *p]).collect(),
        ),
        _ => unreachable!(),
    }
}

/// Full input pipeline: resize to the backbone's square resolution,
/// replicate grayscale to three channels, apply the family normalization.
pub fn preprocess(img: &RasterImage, spec: &BackboneSpec) -> Result<Tensor3> {
    if img.pixels.is_empty() {
        return Err(Error::Domain("cannot preprocess an empty image".into()));
    }
    let resized = resize_bilinear(img, spec.input_resolution, spec.input_resolution);
    let rgb = replicate_to_rgb(&resized);
    Ok(normalize(&rgb, spec.normalization))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_zoo::registry::registry_lookup;

    fn gray(w: usize, h: usize, f: impl Fn(usize, usize) -> u8) -> RasterImage {
        let mut pixels = Vec::new();
        for y in 0..h {
            for x in 0..w {
                pixels.push(f(x, y));
            }
        }
        RasterImage::new(w, h, 1, pixels)
    }

    #[test]
    fn grayscale_is_replicated_and_resized_for_densenet() {
        let img = gray(100, 80, |x, y| ((x + y) % 251) as u8);
        let spec = registry_lookup("DenseNet169").unwrap();
        let t = preprocess(&img, spec).unwrap();
        assert_eq!((t.h, t.w, t.c), (224, 224, 3));
        // torch-style normalization differs per channel, so compare the
        // un-normalized replication instead
        let resized = resize_bilinear(&img, 224, 224);
        let rgb = super::replicate_to_rgb(&resized);
        for y in [0, 100, 223] {
            for x in [0, 57, 223] {
                assert_eq!(rgb.at(y, x, 0), rgb.at(y, x, 1));
                assert_eq!(rgb.at(y, x, 1), rgb.at(y, x, 2));
            }
        }
    }

    #[test]
    fn constant_image_under_stub_preprocessing() {
        let img = gray(10, 10, |_, _| 51);
        let spec = registry_lookup("stub").unwrap();
        let t = preprocess(&img, spec).unwrap();
        assert_eq!((t.h, t.w, t.c), (32, 32, 3));
        for v in &t.data {
            assert!((v - 51.0 / 255.0).abs() < 1e-12);
        }
    }

    #[test]
    fn efficientnet_b2_resolution_is_260() {
        let img = gray(64, 48, |x, _| x as u8);
        let spec = registry_lookup("EfficientNetB2").unwrap();
        let t = preprocess(&img, spec).unwrap();
        assert_eq!((t.h, t.w), (260, 260));
    }

    #[test]
    fn same_size_resize_is_identity() {
        let img = gray(32, 32, |x, y| (x * 7 + y * 13) as u8);
        let resized = resize_bilinear(&img, 32, 32);
        assert_eq!(resized, img);
    }

    #[test]
    fn normalization_conventions() {
        let rgb = RasterImage::new(1, 1, 3, vec![255, 0, 102]);
        let zero_one = normalize(&rgb, Normalization::ZeroOne);
        assert_eq!(zero_one.data, vec![1.0, 0.0, 0.4]);
        let tf = normalize(&rgb, Normalization::TfStyle);
        assert!((tf.data[0] - 1.0).abs() < 1e-12);
        assert!((tf.data[1] + 1.0).abs() < 1e-12);
        let caffe = normalize(&rgb, Normalization::CaffeStyle);
        // BGR order: first output channel is the blue input value
        assert!((caffe.data[0] - (102.0 - CAFFE_BGR_MEAN[0])).abs() < 1e-12);
        assert!((caffe.data[2] - (255.0 - CAFFE_BGR_MEAN[2])).abs() < 1e-12);
        let pass = normalize(&rgb, Normalization::Passthrough);
        assert_eq!(pass.data, vec![255.0, 0.0, 102.0]);
    }

    #[test]
    fn undecodable_file_is_a_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("not_a_png.png");
        std::fs::write(&path, b"definitely not a png").unwrap();
        let err = decode_png(&path).unwrap_err();
        assert!(matches!(err, Error::Decode { .. }));
    }

    #[test]
    fn png_round_trip_via_decoder() {
        // encode with the same settings the synthetic generator uses
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let pixels: Vec<u8> = (0..64).map(|i| (i * 4) as u8).collect();
        let mut buf = Vec::new();
        let mut enc = png::Encoder::new(&mut buf, 8, 8);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        enc.write_header().unwrap().write_image_data(&pixels).unwrap();
        std::fs::write(&path, &buf).unwrap();
        let img = decode_png(&path).unwrap();
        assert_eq!(img.pixels, pixels);
        assert_eq!((img.width, img.height, img.channels), (8, 8, 1));
    }
}
