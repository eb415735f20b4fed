//! Seeded observation streams: synthetic 2D generators, IDX-backed image
//! data, and the mid-run mutation combinator used by the non-stationary
//! experiment.
//!
//! Every stream is a pure function of its spec: two streams built from
//! equal specs emit bit-identical sequences.

use std::path::{Path, PathBuf};

use crate::error::{Result, VdsomError};
use crate::rng::SplitMix64;

/// Seed perturbation applied when drawing evaluation batches, so held-out
/// data never disturbs or repeats the training sequence.
pub const EVAL_SEED_SALT: u64 = 0x7fb5_d329_728e_a185;

/// Description of an observation source. Equal specs produce equal streams.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamSpec {
    /// Two interleaving half-circles in the plane.
    Moons { noise_std: f64, seed: u64 },
    /// Two concentric circles; the inner radius is `inner_factor`.
    Circles {
        noise_std: f64,
        inner_factor: f64,
        seed: u64,
    },
    /// Images from an IDX unsigned-byte tensor, sampled uniformly with
    /// replacement.
    IdxFile { path: PathBuf, seed: u64 },
    /// First child for steps 1..=switch_step, second child afterwards.
    Mutate {
        switch_step: u64,
        first: Box<StreamSpec>,
        second: Box<StreamSpec>,
    },
}

impl StreamSpec {
    pub fn moons(noise_std: f64, seed: u64) -> Self {
        StreamSpec::Moons { noise_std, seed }
    }

    pub fn circles(noise_std: f64, inner_factor: f64, seed: u64) -> Self {
        StreamSpec::Circles {
            noise_std,
            inner_factor,
            seed,
        }
    }

    pub fn idx_file(path: impl Into<PathBuf>, seed: u64) -> Self {
        StreamSpec::IdxFile {
            path: path.into(),
            seed,
        }
    }

    pub fn mutate(first: StreamSpec, second: StreamSpec, switch_step: u64) -> Self {
        StreamSpec::Mutate {
            switch_step,
            first: Box::new(first),
            second: Box::new(second),
        }
    }

    /// Same source with every seed xored by `salt`; used for held-out
    /// evaluation batches.
    pub fn with_salted_seed(&self, salt: u64) -> StreamSpec {
        match self {
            StreamSpec::Moons { noise_std, seed } => StreamSpec::Moons {
                noise_std: *noise_std,
                seed: seed ^ salt,
            },
            StreamSpec::Circles {
                noise_std,
                inner_factor,
                seed,
            } => StreamSpec::Circles {
                noise_std: *noise_std,
                inner_factor: *inner_factor,
                seed: seed ^ salt,
            },
            StreamSpec::IdxFile { path, seed } => StreamSpec::IdxFile {
                path: path.clone(),
                seed: seed ^ salt,
            },
            StreamSpec::Mutate {
                switch_step,
                first,
                second,
            } => StreamSpec::Mutate {
                switch_step: *switch_step,
                first: Box::new(first.with_salted_seed(salt)),
                second: Box::new(second.with_salted_seed(salt)),
            },
        }
    }

    /// Phase boundaries: (first step of the phase, spec active during it),
    /// flattening nested mutations. A non-mutating spec is a single phase
    /// starting at step 1.
    pub fn phases(&self) -> Vec<(u64, &StreamSpec)> {
        fn walk<'a>(spec: &'a StreamSpec, offset: u64, out: &mut Vec<(u64, &'a StreamSpec)>) {
            match spec {
                StreamSpec::Mutate {
                    switch_step,
                    first,
                    second,
                } => {
                    let boundary = offset.saturating_add(*switch_step);
                    if *switch_step > 0 {
                        let mark = out.len();
                        walk(first, offset, out);
                        // phases of `first` that would start past the
                        // boundary never get to emit
                        let live = out[mark..]
                            .iter()
                            .take_while(|(start, _)| *start <= boundary)
                            .count();
                        out.truncate(mark + live);
                    }
                    if boundary < u64::MAX {
                        walk(second, boundary, out);
                    }
                }
                other => out.push((offset + 1, other)),
            }
        }
        let mut out = Vec::new();
        walk(self, 0, &mut out);
        out
    }
}

/// Point on the two-moons curves before noise: branch 0 is the upper unit
/// half-circle, branch 1 its shifted reflection.
fn moons_point(branch: usize, t: f64) -> [f64; 2] {
    if branch == 0 {
        [t.cos(), t.sin()]
    } else {
        [1.0 - t.cos(), 0.5 - t.sin()]
    }
}

/// One two-moons sample: fair branch coin, arc position uniform on [0, pi],
/// isotropic Gaussian noise. Draw order: coin, t, then two noise normals.
pub fn sample_moons(rng: &mut SplitMix64, noise_std: f64) -> [f64; 2] {
    let branch = usize::from(rng.unit() >= 0.5);
    let t = std::f64::consts::PI * rng.unit();
    let [x, y] = moons_point(branch, t);
    [x + noise_std * rng.normal(), y + noise_std * rng.normal()]
}

/// One two-circles sample: fair radius coin (1 or `inner_factor`), angle
/// uniform on [0, 2*pi), isotropic Gaussian noise.
pub fn sample_circles(rng: &mut SplitMix64, noise_std: f64, inner_factor: f64) -> [f64; 2] {
    let radius = if rng.unit() < 0.5 { 1.0 } else { inner_factor };
    let angle = 2.0 * std::f64::consts::PI * rng.unit();
    [
        radius * angle.cos() + noise_std * rng.normal(),
        radius * angle.sin() + noise_std * rng.normal(),
    ]
}

/// A materialized IDX unsigned-byte image tensor, pixels rescaled to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// count * rows * cols values, image-major then row-major.
    pub pixels: Vec<f64>,
}

impl IdxImages {
    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.pixels[i * d..(i + 1) * d]
    }
}

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(VdsomError::IdxParse {
            offset: bytes.len(),
            message: format!("truncated: need {end} header bytes, file has {}", bytes.len()),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parses an IDX unsigned-byte 3D tensor (the (Fashion-)MNIST image
/// container): big-endian magic 0x00000803, three big-endian u32
/// dimensions, then count*rows*cols pixel bytes mapped to [0, 1] by p/255.
pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| VdsomError::io(path, e))?;
    parse_idx_images(&bytes)
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(VdsomError::IdxParse {
            offset: 0,
            message: format!("unexpected magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}"),
        });
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let rows = read_be_u32(bytes, 8)? as usize;
    let cols = read_be_u32(bytes, 12)? as usize;
    let total = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| VdsomError::IdxParse {
            offset: 4,
            message: format!("dimensions {count}x{rows}x{cols} overflow"),
        })?;
    let data = &bytes[16..];
    if data.len() != total {
        return Err(VdsomError::IdxParse {
            offset: 16,
            message: format!("expected {total} pixel bytes, found {}", data.len()),
        });
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: data.iter().map(|&p| p as f64 / 255.0).collect(),
    })
}

/// Serializes images (values in [0, 1], one Vec per image of length
/// rows*cols) to IDX bytes; the inverse of [`parse_idx_images`] up to the
/// byte quantization `round(v * 255)`.
pub fn idx_image_bytes(rows: usize, cols: usize, images: &[Vec<f64>]) -> Result<Vec<u8>> {
    let dim = rows * cols;
    let mut out = Vec::with_capacity(16 + images.len() * dim);
    out.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    for image in images {
        if image.len() != dim {
            return Err(VdsomError::DimensionMismatch {
                expected: dim,
                got: image.len(),
            });
        }
        out.extend(image.iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    }
    Ok(out)
}

pub fn write_idx_images(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    images: &[Vec<f64>],
) -> Result<()> {
    let path = path.as_ref();
    let bytes = idx_image_bytes(rows, cols, images)?;
    std::fs::write(path, bytes).map_err(|e| VdsomError::io(path, e))
}

/// A running observation source. Single consumer; build independent
/// streams (distinct seeds) for concurrent runs.
#[derive(Debug, Clone)]
pub enum ObservationStream {
    Moons {
        rng: SplitMix64,
        noise_std: f64,
    },
    Circles {
        rng: SplitMix64,
        noise_std: f64,
        inner_factor: f64,
    },
    Idx {
        images: IdxImages,
        rng: SplitMix64,
    },
    Mutate {
        first: Box<ObservationStream>,
        second: Box<ObservationStream>,
        switch_step: u64,
        emitted: u64,
    },
}

impl ObservationStream {
    /// Builds the stream described by `spec`, validating its parameters and
    /// materializing any file-backed data.
    pub fn from_spec(spec: &StreamSpec) -> Result<Self> {
        match spec {
            StreamSpec::Moons { noise_std, seed } => {
                validate_noise(*noise_std)?;
                Ok(ObservationStream::Moons {
                    rng: SplitMix64::new(*seed),
                    noise_std: *noise_std,
                })
            }
            StreamSpec::Circles {
                noise_std,
                inner_factor,
                seed,
            } => {
                validate_noise(*noise_std)?;
                if !(*inner_factor > 0.0 && *inner_factor < 1.0) {
                    return Err(VdsomError::InvalidArgument(format!(
                        "inner_factor must lie in (0, 1), got {inner_factor}"
                    )));
                }
                Ok(ObservationStream::Circles {
                    rng: SplitMix64::new(*seed),
                    noise_std: *noise_std,
                    inner_factor: *inner_factor,
                })
            }
            StreamSpec::IdxFile { path, seed } => {
                let images = load_idx_images(path)?;
                if images.count == 0 || images.dim() == 0 {
                    return Err(VdsomError::InvalidArgument(format!(
                        "idx file {} holds no sampleable images",
                        path.display()
                    )));
                }
                Ok(ObservationStream::Idx {
                    images,
                    rng: SplitMix64::new(*seed),
                })
            }
            StreamSpec::Mutate {
                switch_step,
                first,
                second,
            } => {
                let first = ObservationStream::from_spec(first)?;
                let second = ObservationStream::from_spec(second)?;
                if first.dim() != second.dim() {
                    return Err(VdsomError::DimensionMismatch {
                        expected: first.dim(),
                        got: second.dim(),
                    });
                }
                Ok(ObservationStream::Mutate {
                    first: Box::new(first),
                    second: Box::new(second),
                    switch_step: *switch_step,
                    emitted: 0,
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ObservationStream::Moons { .. } | ObservationStream::Circles { .. } => 2,
            ObservationStream::Idx { images, .. } => images.dim(),
            ObservationStream::Mutate { first, .. } => first.dim(),
        }
    }

    /// Emits the next observation.
    pub fn next_observation(&mut self) -> Vec<f64> {
        match self {
            ObservationStream::Moons { rng, noise_std } => sample_moons(rng, *noise_std).to_vec(),
            ObservationStream::Circles {
                rng,
                noise_std,
                inner_factor,
            } => sample_circles(rng, *noise_std, *inner_factor).to_vec(),
            ObservationStream::Idx { images, rng } => images.image(rng.index(images.count)).to_vec(),
            ObservationStream::Mutate {
                first,
                second,
                switch_step,
                emitted,
            } => {
                *emitted += 1;
                if *emitted <= *switch_step {
                    first.next_observation()
                } else {
                    second.next_observation()
                }
            }
        }
    }

    /// Draws `len` observations into a batch.
    pub fn take_batch(&mut self, len: usize) -> Vec<Vec<f64>> {
        (0..len).map(|_| self.next_observation()).collect()
    }
}

fn validate_noise(noise_std: f64) -> Result<()> {
    if noise_std < 0.0 || !noise_std.is_finite() {
        return Err(VdsomError::InvalidArgument(format!(
            "noise_std must be nonnegative and finite, got {noise_std}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moons_formula_points() {
        assert_eq!(moons_point(0, 0.0), [1.0, 0.0]);
        let [x, y] = moons_point(1, std::f64::consts::FRAC_PI_2);
        assert!((x - 1.0).abs() < 1e-15);
        assert!((y + 0.5).abs() < 1e-15);
    }

    #[test]
    fn noise_free_moons_lie_on_curves() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..500 {
            let [x, y] = sample_moons(&mut rng, 0.0);
            let on_first = (x * x + y * y - 1.0).abs();
            let on_second = ((x - 1.0).powi(2) + (y - 0.5).powi(2) - 1.0).abs();
            assert!(on_first < 1e-12 || on_second < 1e-12, "({x}, {y})");
        }
    }

    #[test]
    fn noise_free_circles_have_exact_radii() {
        let mut rng = SplitMix64::new(12);
        let mut seen_inner = false;
        let mut seen_outer = false;
        for _ in 0..500 {
            let [x, y] = sample_circles(&mut rng, 0.0, 0.5);
            let r = (x * x + y * y).sqrt();
            if (r - 1.0).abs() < 1e-12 {
                seen_outer = true;
            } else if (r - 0.5).abs() < 1e-12 {
                seen_inner = true;
            } else {
                panic!("radius {r} on neither circle");
            }
        }
        assert!(seen_inner && seen_outer);
    }

    #[test]
    fn noisy_outer_circle_radius_rarely_escapes() {
        let mut rng = SplitMix64::new(13);
        let mut outer = 0u32;
        let mut inside_band = 0u32;
        for _ in 0..10_000 {
            let [x, y] = sample_circles(&mut rng, 0.05, 0.5);
            let r = (x * x + y * y).sqrt();
            if r > 0.75 {
                outer += 1;
                if (0.8..=1.2).contains(&r) {
                    inside_band += 1;
                }
            }
        }
        assert!(outer > 4000);
        assert!(inside_band as f64 / outer as f64 > 0.99);
    }

    #[test]
    fn idx_parses_hand_built_tensor() {
        let bytes = [
            0x00, 0x00, 0x08, 0x03, // magic
            0x00, 0x00, 0x00, 0x01, // count 1
            0x00, 0x00, 0x00, 0x02, // rows 2
            0x00, 0x00, 0x00, 0x02, // cols 2
            0, 255, 128, 0,
        ];
        let images = parse_idx_images(&bytes).unwrap();
        assert_eq!((images.count, images.dim()), (1, 4));
        assert_eq!(images.image(0), &[0.0, 1.0, 128.0 / 255.0, 0.0]);
    }

    #[test]
    fn idx_rejects_label_magic() {
        let bytes = [0x00, 0x00, 0x08, 0x01, 0, 0, 0, 0];
        match parse_idx_images(&bytes) {
            Err(VdsomError::IdxParse { offset: 0, message }) => {
                assert!(message.contains("unexpected magic"), "{message}");
            }
            other => panic!("expected magic error, got {other:?}"),
        }
    }

    #[test]
    fn idx_rejects_empty_and_truncated() {
        assert!(parse_idx_images(&[]).is_err());
        let mut bytes = vec![0x00, 0x00, 0x08, 0x03];
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&[7; 3]); // needs 8
        match parse_idx_images(&bytes) {
            Err(VdsomError::IdxParse { offset: 16, .. }) => {}
            other => panic!("expected truncation at 16, got {other:?}"),
        }
    }

    #[test]
    fn idx_round_trips_bytes() {
        let images = vec![
            vec![0.0, 1.0, 128.0 / 255.0, 0.0],
            vec![0.25, 0.5, 0.75, 1.0],
            vec![17.0 / 255.0, 0.0, 1.0, 200.0 / 255.0],
        ];
        let bytes = idx_image_bytes(2, 2, &images).unwrap();
        let parsed = parse_idx_images(&bytes).unwrap();
        let again = idx_image_bytes(parsed.rows, parsed.cols, &(0..parsed.count)
            .map(|i| parsed.image(i).to_vec())
            .collect::<Vec<_>>())
        .unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn streams_reproduce_bit_exactly() {
        let spec = StreamSpec::mutate(
            StreamSpec::moons(0.05, 42),
            StreamSpec::circles(0.05, 0.5, 43),
            10,
        );
        let mut a = ObservationStream::from_spec(&spec).unwrap();
        let mut b = ObservationStream::from_spec(&spec).unwrap();
        for _ in 0..50 {
            let xa = a.next_observation();
            let xb = b.next_observation();
            assert_eq!(
                xa.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                xb.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn mutate_switches_at_boundary() {
        // noise-free moons vs circles are distinguishable by curve membership
        let on_moons = |p: &[f64]| {
            let (x, y) = (p[0], p[1]);
            (x * x + y * y - 1.0).abs() < 1e-9 && y >= -1e-9
                || ((x - 1.0).powi(2) + (y - 0.5).powi(2) - 1.0).abs() < 1e-9
        };
        let spec = StreamSpec::mutate(
            StreamSpec::moons(0.0, 1),
            StreamSpec::circles(0.0, 0.5, 2),
            3,
        );
        let mut stream = ObservationStream::from_spec(&spec).unwrap();
        for step in 1..=8 {
            let x = stream.next_observation();
            if step <= 3 {
                assert!(on_moons(&x), "step {step} should come from moons");
            }
        }

        // switch at zero: everything from the second child
        let spec = StreamSpec::mutate(
            StreamSpec::moons(0.0, 1),
            StreamSpec::circles(0.0, 0.5, 2),
            0,
        );
        let mut stream = ObservationStream::from_spec(&spec).unwrap();
        let mut reference = ObservationStream::from_spec(&StreamSpec::circles(0.0, 0.5, 2)).unwrap();
        for _ in 0..5 {
            assert_eq!(stream.next_observation(), reference.next_observation());
        }

        // sentinel max: never switches
        let spec = StreamSpec::mutate(
            StreamSpec::moons(0.0, 1),
            StreamSpec::circles(0.0, 0.5, 2),
            u64::MAX,
        );
        let mut stream = ObservationStream::from_spec(&spec).unwrap();
        let mut reference = ObservationStream::from_spec(&StreamSpec::moons(0.0, 1)).unwrap();
        for _ in 0..5 {
            assert_eq!(stream.next_observation(), reference.next_observation());
        }
    }

    #[test]
    fn mutate_requires_equal_dims() {
        let dir = std::env::temp_dir().join("vdsom_data_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tiny.idx");
        write_idx_images(&path, 1, 3, &[vec![0.0, 0.5, 1.0]]).unwrap();
        let spec = StreamSpec::mutate(
            StreamSpec::moons(0.0, 1),
            StreamSpec::idx_file(&path, 2),
            5,
        );
        assert!(ObservationStream::from_spec(&spec).is_err());
    }

    #[test]
    fn phases_flatten_mutations() {
        let spec = StreamSpec::mutate(
            StreamSpec::moons(0.0, 1),
            StreamSpec::circles(0.0, 0.5, 2),
            7500,
        );
        let phases = spec.phases();
        assert_eq!(phases.len(), 2);
        assert_eq!(phases[0].0, 1);
        assert_eq!(phases[1].0, 7501);
        assert!(matches!(phases[0].1, StreamSpec::Moons { .. }));
        assert!(matches!(phases[1].1, StreamSpec::Circles { .. }));

        let plain = StreamSpec::moons(0.0, 1);
        assert_eq!(plain.phases(), vec![(1, &plain)]);
    }
}
