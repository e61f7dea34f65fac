//! Dataset loaders and writers: digits CSV, IDX, and binary PGM.
//!
//! Pixels are stored row-major as `f64` in `[0, 1]`.

use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ReadBytesExt};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;
const DIGITS_SIDE: usize = 8;
const DIGITS_MAX: u32 = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct ImageSample {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
    pub label: u8,
}

impl ImageSample {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>, label: u8) -> Self {
        debug_assert_eq!(pixels.len(), height * width);
        Self {
            height,
            width,
            pixels,
            label,
        }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<ImageSample>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(height, width)` of the first sample.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.samples.first().map(|s| (s.height, s.width))
    }

    pub fn count_label(&self, label: u8) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Digits CSV: each row is a label `0..=9` then 64 integers `0..=16`.
pub fn load_digits_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = String::from_utf8(read_file(path)?).map_err(|e| Error::Malformed {
        path: path.into(),
        line: 0,
        reason: e.to_string(),
    })?;
    parse_digits_csv(&text, path)
}

pub fn parse_digits_csv(text: &str, path: &Path) -> Result<Dataset> {
    let malformed = |line: usize, reason: String| Error::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 1 + DIGITS_SIDE * DIGITS_SIDE {
            return Err(malformed(
                line_no,
                format!("expected 65 fields, found {}", fields.len()),
            ));
        }
        let mut values = Vec::with_capacity(fields.len());
        for f in &fields {
            let v: u32 = f
                .parse()
                .map_err(|_| malformed(line_no, format!("not an integer: {f:?}")))?;
            values.push(v);
        }
        if values[0] > 9 {
            return Err(malformed(
                line_no,
                format!("label {} outside 0..=9", values[0]),
            ));
        }
        if let Some(v) = values[1..].iter().find(|&&v| v > DIGITS_MAX) {
            return Err(malformed(line_no, format!("pixel {v} outside 0..=16")));
        }
        let pixels = values[1..]
            .iter()
            .map(|&v| v as f64 / DIGITS_MAX as f64)
            .collect();
        samples.push(ImageSample::new(
            DIGITS_SIDE,
            DIGITS_SIDE,
            pixels,
            values[0] as u8,
        ));
    }
    Ok(Dataset {
        samples,
        class_names: (0..10).map(|d| d.to_string()).collect(),
    })
}

/// Inverse of [`load_digits_csv`] for 8×8 images whose pixels are multiples of 1/16.
pub fn write_digits_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for s in &ds.samples {
        if s.height != DIGITS_SIDE || s.width != DIGITS_SIDE {
            return Err(Error::ShapeMismatch(format!(
                "digits CSV holds 8x8 images, got {}x{}",
                s.height, s.width
            )));
        }
        out.push_str(&s.label.to_string());
        for p in &s.pixels {
            out.push(',');
            out.push_str(&((p * DIGITS_MAX as f64).round() as u32).to_string());
        }
        out.push('\n');
    }
    fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}

fn read_magic(cur: &mut Cursor<Vec<u8>>, path: &Path, expected: u32) -> Result<()> {
    let found = cur
        .read_u32::<BigEndian>()
        .map_err(|_| Error::TruncatedFile(path.into()))?;
    if found != expected {
        return Err(Error::BadMagic {
            path: path.into(),
            found,
            expected,
        });
    }
    Ok(())
}

fn read_dim(cur: &mut Cursor<Vec<u8>>, path: &Path) -> Result<usize> {
    cur.read_u32::<BigEndian>()
        .map(|v| v as usize)
        .map_err(|_| Error::TruncatedFile(path.into()))
}

/// Big-endian IDX image and label files, pixels scaled by 1/255.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let mut images = Cursor::new(read_file(ip)?);
    read_magic(&mut images, ip, IDX_IMAGE_MAGIC)?;
    let count = read_dim(&mut images, ip)?;
    let rows = read_dim(&mut images, ip)?;
    let cols = read_dim(&mut images, ip)?;

    let mut labels = Cursor::new(read_file(lp)?);
    read_magic(&mut labels, lp, IDX_LABEL_MAGIC)?;
    let n_labels = read_dim(&mut labels, lp)?;
    if n_labels != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: n_labels,
        });
    }

    let mut pixel_bytes = vec![0u8; count * rows * cols];
    images
        .read_exact(&mut pixel_bytes)
        .map_err(|_| Error::TruncatedFile(ip.into()))?;
    let mut label_bytes = vec![0u8; count];
    labels
        .read_exact(&mut label_bytes)
        .map_err(|_| Error::TruncatedFile(lp.into()))?;

    let samples = if rows * cols == 0 {
        Vec::new()
    } else {
        pixel_bytes
            .chunks_exact(rows * cols)
            .zip(label_bytes)
            .map(|(px, label)| {
                ImageSample::new(
                    rows,
                    cols,
                    px.iter().map(|&b| b as f64 / 255.0).collect(),
                    label,
                )
            })
            .collect()
    };
    let n_classes = samples
        .iter()
        .map(|s| s.label as usize + 1)
        .max()
        .unwrap_or(0);
    Ok(Dataset {
        samples,
        class_names: (0..n_classes).map(|c| c.to_string()).collect(),
    })
}

/// Reads one binary `P5` PGM with maxval 255.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let unsupported = |reason: &str| Error::UnsupportedPgm {
        path: path.into(),
        reason: reason.into(),
    };
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let magic = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(unsupported(&format!(
            "magic {magic:?}, only binary P5 is supported"
        )));
    }
    let mut pos = 2;
    let mut header = [0usize; 3];
    for field in header.iter_mut() {
        // whitespace and comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(unsupported("malformed header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| unsupported("malformed header"))?;
    }
    let [width, height, maxval] = header;
    if maxval != 255 {
        return Err(unsupported(&format!(
            "maxval {maxval}, only 255 is supported"
        )));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(unsupported("malformed header"));
    }
    pos += 1;
    let data = &bytes[pos..];
    if data.len() < width * height {
        return Err(Error::TruncatedFile(path.into()));
    }
    let pixels = data[..width * height]
        .iter()
        .map(|&b| b as f64 / 255.0)
        .collect();
    Ok((height, width, pixels))
}

/// Writes `img` as binary PGM, rounding pixels to the nearest of 256 levels.
pub fn write_pgm(img: &ImageSample, path: impl AsRef<Path>) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(
        img.pixels
            .iter()
            .map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}

/// Loads every `*.pgm` in `dir` (sorted by name); the label comes from the
/// first `(prefix, label)` entry of `class_map` that prefixes the file name.
pub fn load_pgm_dir(dir: impl AsRef<Path>, class_map: &[(String, u8)]) -> Result<Dataset> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")));
    paths.sort();
    let mut samples = Vec::with_capacity(paths.len());
    for p in paths {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let label = class_map
            .iter()
            .find(|(prefix, _)| name.starts_with(prefix.as_str()))
            .map(|(_, l)| *l)
            .ok_or_else(|| Error::UnknownClassPrefix(p.clone()))?;
        let (h, w, pixels) = read_pgm(&p)?;
        samples.push(ImageSample::new(h, w, pixels, label));
    }
    let mut names: Vec<(u8, String)> = class_map.iter().map(|(p, l)| (*l, p.clone())).collect();
    names.sort();
    names.dedup_by_key(|(l, _)| *l);
    Ok(Dataset {
        samples,
        class_names: names.into_iter().map(|(_, n)| n).collect(),
    })
}

/// Block-average downsampling by integer factors.
pub fn resize_area(img: &ImageSample, out_h: usize, out_w: usize) -> Result<ImageSample> {
    if out_h == 0
        || out_w == 0
        || !img.height.is_multiple_of(out_h)
        || !img.width.is_multiple_of(out_w)
    {
        return Err(Error::NonIntegerFactor {
            from_h: img.height,
            from_w: img.width,
            to_h: out_h,
            to_w: out_w,
        });
    }
    let (fy, fx) = (img.height / out_h, img.width / out_w);
    let area = (fy * fx) as f64;
    let mut pixels = Vec::with_capacity(out_h * out_w);
    for oy in 0..out_h {
        for ox in 0..out_w {
            let mut sum = 0.0;
            for y in oy * fy..(oy + 1) * fy {
                for x in ox * fx..(ox + 1) * fx {
                    sum += img.at(y, x);
                }
            }
            pixels.push(sum / area);
        }
    }
    Ok(ImageSample::new(out_h, out_w, pixels, img.label))
}

/// Balanced two-class train/test split with labels remapped `a → 0`, `b → 1`.
///
/// The train set holds `n_per_class` images of each class; the test set holds
/// `n_test` images, split evenly (class `a` takes the odd one). Sampling is
/// without replacement and train and test never share an image.
pub fn binary_subset(
    ds: &Dataset,
    class_a: u8,
    class_b: u8,
    n_per_class: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (test_a, test_b) = (n_test - n_test / 2, n_test / 2);
    let mut train = Vec::with_capacity(2 * n_per_class);
    let mut test = Vec::with_capacity(n_test);
    for (class, new_label, n_eval) in [(class_a, 0u8, test_a), (class_b, 1u8, test_b)] {
        let mut idx: Vec<usize> = (0..ds.samples.len())
            .filter(|&i| ds.samples[i].label == class)
            .collect();
        let needed = n_per_class + n_eval;
        if idx.len() < needed {
            return Err(Error::InsufficientSamples {
                class,
                available: idx.len(),
                needed,
            });
        }
        idx.shuffle(&mut rng);
        let relabel = |i: &usize| ImageSample {
            label: new_label,
            ..ds.samples[*i].clone()
        };
        train.extend(idx[..n_per_class].iter().map(relabel));
        test.extend(idx[n_per_class..needed].iter().map(relabel));
    }
    let name = |c: u8| {
        ds.class_names
            .get(c as usize)
            .cloned()
            .unwrap_or_else(|| c.to_string())
    };
    let class_names = vec![name(class_a), name(class_b)];
    Ok((
        Dataset {
            samples: train,
            class_names: class_names.clone(),
        },
        Dataset {
            samples: test,
            class_names,
        },
    ))
}
