//! PNG heatmaps of scalar fields using the viridis color map.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use thiserror::Error;

use crate::grid::Field;

#[derive(Debug, Error)]
pub enum HeatmapError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("png encoding failed: {0}")]
    Png(#[from] png::EncodingError),
    #[error("field contains non-finite values")]
    NonFinite,
    #[error("scale must be >= 1")]
    BadScale,
}

// polynomial fit of matplotlib's viridis
const VIRIDIS: [[f64; 3]; 7] = [
    [0.277_727_327_223_417_7, 0.005_407_344_544_966_578, 0.334_099_805_335_306_1],
    [0.105_093_043_108_577_4, 1.404_613_529_898_575, 1.384_590_162_594_685],
    [-0.330_861_828_725_556_3, 0.214_847_559_468_213, 0.095_095_163_028_236_59],
    [-4.634_230_498_983_486, -5.799_100_973_351_585, -19.332_440_956_279_87],
    [6.228_269_936_347_081, 14.179_933_366_805_09, 56.690_552_600_681_05],
    [4.776_384_997_670_288, -13.745_145_377_746_01, -65.353_032_633_372_34],
    [-5.435_455_855_934_631, 4.645_852_612_178_535, 26.312_435_249_583_2],
];

/// Viridis color for `t` in `[0, 1]`.
pub fn viridis(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let mut rgb = [0u8; 3];
    for (c, out) in rgb.iter_mut().enumerate() {
        let v = VIRIDIS.iter().rev().fold(0.0, |acc, coef| acc * t + coef[c]);
        *out = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    }
    rgb
}

/// RGB pixels, `scale x scale` per cell, top row = largest `y`.
pub fn rasterize(field: &Field, scale: u32) -> Result<(u32, u32, Vec<u8>), HeatmapError> {
    if scale == 0 {
        return Err(HeatmapError::BadScale);
    }
    if !field.is_finite() {
        return Err(HeatmapError::NonFinite);
    }
    let g = field.grid();
    let (lo, hi) = (field.min(), field.max());
    let span = hi - lo;
    let s = scale as usize;
    let width = g.nx() * s;
    let height = g.ny() * s;
    let mut data = Vec::with_capacity(width * height * 3);
    for py in 0..height {
        let iy = g.ny() - 1 - py / s;
        for px in 0..width {
            let x = field.get(px / s, iy);
            let t = if span > 0.0 { (x - lo) / span } else { 0.0 };
            data.extend_from_slice(&viridis(t));
        }
    }
    Ok((width as u32, height as u32, data))
}

/// Writes `field` as an 8-bit RGB PNG with `min`/`max` text chunks.
pub fn render_heatmap(field: &Field, path: &Path, scale: u32) -> Result<(), HeatmapError> {
    let (w, h, data) = rasterize(field, scale)?;
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, w, h);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    enc.add_text_chunk("min".into(), format!("{}", field.min()))?;
    enc.add_text_chunk("max".into(), format!("{}", field.max()))?;
    let mut writer = enc.write_header()?;
    writer.write_image_data(&data)?;
    writer.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn endpoints_look_like_viridis() {
        let lo = viridis(0.0);
        let hi = viridis(1.0);
        assert!(lo[2] > lo[1] && lo[0] < 90);
        assert!(hi[0] > 200 && hi[1] > 200 && hi[2] < 80);
    }

    #[test]
    fn constant_field_is_one_color() {
        let g = Grid::new(5, 3, 1.0, 1.0).unwrap();
        let (_, _, px) = rasterize(&Field::constant(g, 2.5), 2).unwrap();
        assert!(px.chunks(3).all(|c| c == &px[..3]));
    }

    #[test]
    fn single_hot_cell() {
        let g = Grid::new(2, 2, 1.0, 1.0).unwrap();
        let f = Field::from_values(g, vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let scale = 3;
        let (w, _, px) = rasterize(&f, scale).unwrap();
        let hot = viridis(1.0);
        let hits: Vec<usize> = px
            .chunks(3)
            .enumerate()
            .filter(|(_, c)| *c == hot)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(hits.len(), (scale * scale) as usize);
        // cell (1, 1) is the top-right block
        assert!(hits.iter().all(|&i| i % w as usize >= 3 && (i / w as usize) < 3));
    }

    #[test]
    fn rejects_nan() {
        let g = Grid::new(2, 1, 1.0, 1.0).unwrap();
        let f = Field::from_values(g, vec![0.0, f64::NAN]).unwrap();
        assert!(matches!(rasterize(&f, 1), Err(HeatmapError::NonFinite)));
    }
}
