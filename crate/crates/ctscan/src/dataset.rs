//! Phantom corpus container.
//!
//! Binary layout (all multi-byte integers little-endian):
//!
//! ```text
//! magic        4 bytes  "CTPH"
//! version      u32      currently 1
//! image_size   u32      pixels per side
//! count        u32      number of records
//! records      count times:
//!   kind         u8     shape code (see ShapeKind::code)
//!   rotation_deg f64
//!   scale        f64
//!   center_row   f64
//!   center_col   f64
//!   aspect       f64
//!   pixels       image_size^2 bytes, row-major, 0 or 1
//! ```

use crate::error::{Error, Result};
use crate::image::Image;
use crate::phantoms::{ShapeKind, ShapeSpec};
use std::io::{Read, Write};
use std::path::Path;

pub const DATASET_MAGIC: &[u8; 4] = b"CTPH";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub image_size: usize,
    pub records: Vec<(Image, ShapeSpec)>,
}

impl Dataset {
    pub fn new(image_size: usize, records: Vec<(Image, ShapeSpec)>) -> Result<Self> {
        for (img, _) in &records {
            if img.size() != image_size {
                return Err(Error::Domain(format!(
                    "record image size {} does not match dataset size {image_size}",
                    img.size()
                )));
            }
        }
        Ok(Dataset {
            image_size,
            records,
        })
    }

    pub fn images(&self) -> Vec<Image> {
        self.records.iter().map(|(img, _)| img.clone()).collect()
    }

    pub fn specs(&self) -> Vec<ShapeSpec> {
        self.records.iter().map(|(_, s)| s.clone()).collect()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(DATASET_MAGIC)?;
        w.write_all(&DATASET_VERSION.to_le_bytes())?;
        w.write_all(&(self.image_size as u32).to_le_bytes())?;
        w.write_all(&(self.records.len() as u32).to_le_bytes())?;
        for (img, spec) in &self.records {
            w.write_all(&[spec.kind.code()])?;
            for v in [
                spec.rotation_deg,
                spec.scale,
                spec.center.0,
                spec.center.1,
                spec.aspect,
            ] {
                w.write_all(&v.to_le_bytes())?;
            }
            let bytes: Vec<u8> = img
                .pixels()
                .iter()
                .map(|&p| if p > 0.5 { 1u8 } else { 0u8 })
                .collect();
            w.write_all(&bytes)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(Error::Format("not a phantom dataset file".into()));
        }
        let version = read_u32(r)?;
        if version != DATASET_VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset version {version}"
            )));
        }
        let image_size = read_u32(r)? as usize;
        let count = read_u32(r)? as usize;
        let mut records = Vec::with_capacity(count);
        let mut pixels = vec![0u8; image_size * image_size];
        for _ in 0..count {
            let mut code = [0u8; 1];
            r.read_exact(&mut code)?;
            let kind = ShapeKind::from_code(code[0])?;
            let rotation_deg = read_f64(r)?;
            let scale = read_f64(r)?;
            let center = (read_f64(r)?, read_f64(r)?);
            let aspect = read_f64(r)?;
            r.read_exact(&mut pixels)?;
            let mut img = Image::zeros(image_size);
            for (dst, &b) in img.pixels_mut().iter_mut().zip(&pixels) {
                if b > 1 {
                    return Err(Error::Format(format!("pixel byte {b} is not 0 or 1")));
                }
                *dst = b as f64;
            }
            records.push((
                img,
                ShapeSpec {
                    kind,
                    rotation_deg,
                    scale,
                    center,
                    aspect,
                },
            ));
        }
        Dataset::new(image_size, records)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let mut cursor = bytes.as_slice();
        let ds = Self::read_from(&mut cursor)?;
        if !cursor.is_empty() {
            return Err(Error::Format(format!(
                "{} trailing bytes after last record",
                cursor.len()
            )));
        }
        Ok(ds)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
