//! 8-bit PNG renderings. Visualization only: values are rescaled by the map peak.

use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};

use crate::grid::Grid;

use super::pgm::check_heatmap;
use super::IoError;

pub fn heatmap_to_gray8(map: &Grid<f64>) -> Result<GrayImage, IoError> {
    let vmax = check_heatmap(map)?;
    let mut img = GrayImage::new(map.cols() as u32, map.rows() as u32);
    for (r, c, &v) in map.cells() {
        let q = if vmax > 0.0 {
            (255.0 * v / vmax).round() as u8
        } else {
            0
        };
        img.put_pixel(c as u32, r as u32, Luma([q]));
    }
    Ok(img)
}

pub fn write_png8(map: &Grid<f64>, path: &Path) -> Result<(), IoError> {
    heatmap_to_gray8(map)?
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| IoError::Image(format!("{}: {e}", path.display())))
}

/// Blends the heatmap in green over `background`, scaling the map up to the
/// background size with nearest-neighbour sampling.
pub fn overlay(map: &Grid<f64>, background: &RgbImage, opacity: f64) -> Result<RgbImage, IoError> {
    let vmax = check_heatmap(map)?;
    let (w, h) = background.dimensions();
    let mut out = background.clone();
    if map.is_empty() || vmax == 0.0 {
        return Ok(out);
    }
    for (x, y, px) in out.enumerate_pixels_mut() {
        let c = (x as usize * map.cols() / w as usize).min(map.cols() - 1);
        let r = (y as usize * map.rows() / h as usize).min(map.rows() - 1);
        let a = opacity.clamp(0.0, 1.0) * map[(r, c)] / vmax;
        let Rgb([pr, pg, pb]) = *px;
        let mix = |base: u8, target: f64| (f64::from(base) * (1.0 - a) + target * a).round() as u8;
        *px = Rgb([mix(pr, 0.0), mix(pg, 255.0), mix(pb, 0.0)]);
    }
    Ok(out)
}

pub fn read_rgb(path: &Path) -> Result<RgbImage, IoError> {
    Ok(image::open(path)
        .map_err(|e| IoError::Image(format!("{}: {e}", path.display())))?
        .to_rgb8())
}

pub fn write_rgb_png(img: &RgbImage, path: &Path) -> Result<(), IoError> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| IoError::Image(format!("{}: {e}", path.display())))
}
