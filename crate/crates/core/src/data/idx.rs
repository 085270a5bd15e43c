//! IDX image/label files (the MNIST distribution format).
//!
//! Both files start with a big-endian magic number (`0x00000803` for a
//! 3-D `u8` image tensor, `0x00000801` for a 1-D `u8` label vector)
//! followed by big-endian `u32` dimensions and the raw bytes. Files whose
//! first two bytes are the gzip magic are decompressed transparently.

use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::{LabeledDataset, SplitTag};
use crate::error::{ensure, Error, Result};
use crate::numerics::Matrix;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn fail(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.display().to_string(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let end = self.pos + 4;
        if end > self.bytes.len() {
            return Err(self.fail(self.pos, format!("file ends before the {what} field")));
        }
        let v = u32::from_be_bytes(self.bytes[self.pos..end].try_into().expect("4 bytes"));
        self.pos = end;
        Ok(v)
    }

    fn payload(&mut self, len: usize) -> Result<&[u8]> {
        let available = self.bytes.len() - self.pos;
        if available < len {
            return Err(self.fail(
                self.bytes.len(),
                format!("truncated payload: header promises {len} bytes, found {available}"),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        if self.bytes.is_empty() {
            return Err(self.fail(0, "empty file"));
        }
        let got = self.u32("magic number")?;
        if got != expected {
            return Err(self.fail(
                0,
                format!("bad magic number {got:#010x}, expected {expected:#010x}"),
            ));
        }
        Ok(())
    }
}

/// Raw image tensor: `count` images of `rows × cols` bytes.
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<Vec<u8>>,
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    let bytes = read_bytes(path)?;
    let mut cur = Cursor {
        path,
        bytes: &bytes,
        pos: 0,
    };
    cur.magic(IMAGES_MAGIC)?;
    let count = cur.u32("image count")? as usize;
    let rows = cur.u32("row count")? as usize;
    let cols = cur.u32("column count")? as usize;
    let size = rows * cols;
    let payload = cur.payload(count * size)?;
    let pixels = payload.chunks(size.max(1)).take(count).map(<[u8]>::to_vec).collect();
    if cur.pos != bytes.len() {
        return Err(cur.fail(cur.pos, "trailing bytes after the image payload"));
    }
    Ok(IdxImages { rows, cols, pixels })
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_bytes(path)?;
    let mut cur = Cursor {
        path,
        bytes: &bytes,
        pos: 0,
    };
    cur.magic(LABELS_MAGIC)?;
    let count = cur.u32("label count")? as usize;
    let labels = cur.payload(count)?.to_vec();
    if cur.pos != bytes.len() {
        return Err(cur.fail(cur.pos, "trailing bytes after the label payload"));
    }
    Ok(labels)
}

/// Loads an image/label pair. Pixels are scaled to `[0, 1]` and flattened
/// row-major; class names are the distinct label values in ascending order.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if images.pixels.len() != labels.len() {
        return Err(Error::Format {
            path: labels_path.display().to_string(),
            offset: 4,
            message: format!(
                "label count {} does not match image count {} in {}",
                labels.len(),
                images.pixels.len(),
                images_path.display()
            ),
        });
    }
    let mut values: Vec<u8> = labels.clone();
    values.sort_unstable();
    values.dedup();
    let mut id_of = [usize::MAX; 256];
    for (id, &v) in values.iter().enumerate() {
        id_of[v as usize] = id;
    }
    let dim = images.rows * images.cols;
    let mut data = Vec::with_capacity(images.pixels.len() * dim);
    for img in &images.pixels {
        data.extend(img.iter().map(|&p| f64::from(p) / 255.0));
    }
    LabeledDataset::new(
        Matrix::from_vec(images.pixels.len(), dim, data)?,
        labels.iter().map(|&v| id_of[v as usize]).collect(),
        values.iter().map(u8::to_string).collect(),
        SplitTag::Base,
    )
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let gz = path.extension().is_some_and(|e| e == "gz");
    let out = if gz {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        bytes.to_vec()
    };
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes a dataset of `rows × cols` images as an IDX pair (gzipped when a
/// path ends in `.gz`). Features are quantized to `round(255·v)`; class
/// names must parse as `u8`.
pub fn write_idx(
    ds: &LabeledDataset,
    rows: usize,
    cols: usize,
    images_path: &Path,
    labels_path: &Path,
) -> Result<()> {
    ensure!(
        rows * cols == ds.dim(),
        "dataset width {} is not {rows}x{cols}",
        ds.dim()
    );
    let names: Vec<u8> = ds
        .class_names()
        .iter()
        .map(|n| {
            n.parse::<u8>()
                .map_err(|_| Error::contract(format!("class name '{n}' is not a u8 label")))
        })
        .collect::<Result<_>>()?;
    let mut img = Vec::with_capacity(16 + ds.len() * ds.dim());
    img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    for &v in ds.features().as_slice() {
        ensure!((0.0..=1.0).contains(&v), "pixel value {v} outside [0, 1]");
        img.push((v * 255.0).round() as u8);
    }
    let mut lab = Vec::with_capacity(8 + ds.len());
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    lab.extend(ds.labels().iter().map(|&y| names[y]));
    write_bytes(images_path, &img)?;
    write_bytes(labels_path, &lab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut out = magic.to_be_bytes().to_vec();
        for d in dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out
    }

    // Four 2x2 images with hand-picked pixels and labels 3, 1, 3, 0.
    fn fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
        let mut img = header(IMAGES_MAGIC, &[4, 2, 2]);
        img.extend_from_slice(&[0, 255, 51, 102, 255, 0, 0, 0, 1, 2, 3, 4, 128, 128, 128, 128]);
        let mut lab = header(LABELS_MAGIC, &[4]);
        lab.extend_from_slice(&[3, 1, 3, 0]);
        let ip = dir.join("img.idx");
        let lp = dir.join("lab.idx");
        std::fs::write(&ip, img).unwrap();
        std::fs::write(&lp, lab).unwrap();
        (ip, lp)
    }

    #[test]
    fn reads_hand_authored_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path());
        let ds = load_idx(&ip, &lp).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.dim(), 4);
        assert_eq!(ds.features().row(0), &[0.0, 1.0, 0.2, 0.4]);
        assert_eq!(ds.features().get(2, 3), 4.0 / 255.0);
        assert_eq!(ds.class_names(), &["0", "1", "3"]);
        assert_eq!(ds.labels(), &[2, 1, 2, 0]);
    }

    #[test]
    fn gzip_is_transparent() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = fixture(dir.path());
        let plain = load_idx(&ip, &lp).unwrap();
        let gz_img = dir.path().join("img.idx.gz");
        let gz_lab = dir.path().join("lab.idx.gz");
        write_bytes(&gz_img, &std::fs::read(&ip).unwrap()).unwrap();
        write_bytes(&gz_lab, &std::fs::read(&lp).unwrap()).unwrap();
        assert_eq!(load_idx(&gz_img, &gz_lab).unwrap(), plain);
    }

    #[test]
    fn count_mismatch_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, _) = fixture(dir.path());
        let mut lab = header(LABELS_MAGIC, &[3]);
        lab.extend_from_slice(&[1, 2, 3]);
        let lp = dir.path().join("short.idx");
        std::fs::write(&lp, lab).unwrap();
        match load_idx(&ip, &lp) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn empty_and_truncated_files() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty");
        std::fs::write(&empty, []).unwrap();
        assert!(matches!(
            read_idx_labels(&empty),
            Err(Error::Format { offset: 0, .. })
        ));

        let mut img = header(IMAGES_MAGIC, &[2, 2, 2]);
        img.extend_from_slice(&[1, 2, 3]);
        let trunc = dir.path().join("trunc");
        std::fs::write(&trunc, img).unwrap();
        assert!(matches!(
            read_idx_images(&trunc),
            Err(Error::Format { offset: 19, .. })
        ));
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, _) = fixture(dir.path());
        assert!(matches!(
            read_idx_labels(&ip),
            Err(Error::Format { offset: 0, .. })
        ));
    }
}
