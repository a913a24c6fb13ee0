// SPDX-License-Identifier: Apache-2.0

//! PNG and JPEG decoding into grayscale images.

use std::path::Path;

use topsurf_core::GrayscaleImage;

use crate::error::{Error, IoContext, Result};

/// File extensions treated as images, lowercase.
pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Decodes image bytes; color is reduced with the luma weights of
/// [`GrayscaleImage::from_rgb8`].
pub fn decode_gray(bytes: &[u8]) -> Result<GrayscaleImage, String> {
    let img = image::load_from_memory(bytes).map_err(|e| e.to_string())?;
    let result = if img.color().has_color() {
        let rgb = img.to_rgb8();
        GrayscaleImage::from_rgb8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())
    } else {
        let luma = img.to_luma8();
        GrayscaleImage::from_luma8(luma.width() as usize, luma.height() as usize, luma.as_raw())
    };
    result.map_err(|e| e.to_string())
}

pub fn load_gray(path: &Path) -> Result<GrayscaleImage> {
    let bytes = std::fs::read(path).at(path)?;
    decode_gray(&bytes).map_err(|msg| Error::format(path, msg))
}

/// MIME type by extension.
pub fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        _ => "application/octet-stream",
    }
}
