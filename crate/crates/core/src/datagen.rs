//! Synthetic calibration problems and their file formats.
//!
//! A calibration problem carries the model covariance matrix `M`, the
//! measured covariance matrix `V`, and (for synthetic data) the ground-truth
//! gain vector used to build `V = G·M·G^H + noise`. Matrices are stored
//! column-major so the per-antenna kernels can borrow contiguous columns.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const MAGIC: &[u8; 4] = b"AXCP";
const FORMAT_VERSION: u16 = 1;
const FLAG_TRUE_GAINS: u16 = 0x0001;
const HEADER_LEN: u64 = 4 + 2 + 2 + 4 + 8;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {found:02x?} at offset 0 (expected {MAGIC:02x?})")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported format version {found} at offset 4")]
    BadVersion { found: u16 },
    #[error("truncated payload: needed {expected} bytes, file ends at offset {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("dimension mismatch: header declares {declared} antennas but payload holds {available} bytes past offset {offset}")]
    DimensionMismatch {
        declared: u32,
        available: u64,
        offset: u64,
    },
    #[error("trailing bytes past offset {offset}")]
    TrailingBytes { offset: u64 },
}

/// Dense square complex matrix, column-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[col * self.n + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[col * self.n + row] = v;
    }

    /// Borrows column `col` as a contiguous slice.
    #[inline]
    pub fn column(&self, col: usize) -> &[Complex64] {
        &self.data[col * self.n..(col + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `|A − A^H|_F / |A|_F`, zero for an exactly Hermitian matrix.
    pub fn hermitian_mismatch(&self) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.n {
            for i in 0..self.n {
                let d = self.get(i, j) - self.get(j, i).conj();
                acc += d.norm_sqr();
            }
        }
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            0.0
        } else {
            acc.sqrt() / norm
        }
    }
}

/// A calibration problem: model covariances `M`, measured covariances `V`,
/// optional ground-truth gains, and the noise scale used to build `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProblem {
    pub p: usize,
    pub model: ComplexMatrix,
    pub measured: ComplexMatrix,
    pub true_gains: Option<Vec<Complex64>>,
    pub noise_sigma: f64,
}

impl CalibrationProblem {
    /// Frobenius residual `‖V − G M G^H‖_F / ‖V‖_F` for a gain vector.
    pub fn relative_residual(&self, gains: &[Complex64]) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.p {
            for i in 0..self.p {
                let fitted = gains[i] * self.model.get(i, j) * gains[j].conj();
                acc += (self.measured.get(i, j) - fitted).norm_sqr();
            }
        }
        let denom = self.measured.frobenius_norm();
        if denom == 0.0 {
            acc.sqrt()
        } else {
            acc.sqrt() / denom
        }
    }
}

/// Generates a synthetic calibration problem.
///
/// The model covariance is a sum of `rank` point-source terms
/// `σ_k · a_k·a_k^H` with unit-modulus random-phase steering vectors and
/// geometrically decaying source powers, plus small diagonal loading — a
/// random positive-semidefinite Hermitian matrix whose columns all carry
/// comparable energy. It is rescaled so its largest entry magnitude is 0.5,
/// which keeps every downstream fixed-point signal inside the datapath
/// formats. Ground-truth gains have magnitudes drawn uniformly from
/// `[1-gain_spread, 1+gain_spread]` and uniform phases. The measured
/// covariance is `G·M·G^H` plus Hermitian Gaussian noise of scale
/// `noise_sigma`. Deterministic for a given seed.
pub fn synthesize(
    p: usize,
    gain_spread: f64,
    noise_sigma: f64,
    rank: usize,
    seed: u64,
) -> Result<CalibrationProblem, DatagenError> {
    if p < 1 {
        return Err(DatagenError::InvalidDimensions(format!(
            "antenna count {p} must be >= 1"
        )));
    }
    if rank < 1 {
        return Err(DatagenError::InvalidDimensions(format!(
            "rank {rank} must be >= 1"
        )));
    }
    if !(0.0..1.0).contains(&gain_spread) {
        return Err(DatagenError::InvalidDimensions(format!(
            "gain spread {gain_spread} must be in [0, 1)"
        )));
    }
    if noise_sigma < 0.0 {
        return Err(DatagenError::InvalidDimensions(format!(
            "noise sigma {noise_sigma} must be >= 0"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rank = rank.min(p);

    // Steering phases, drawn in a fixed order for reproducibility.
    let mut factors = vec![Complex64::new(0.0, 0.0); p * rank];
    for v in factors.iter_mut() {
        *v = Complex64::from_polar(1.0, std::f64::consts::TAU * rng.random::<f64>());
    }

    // M = Σ_k a_k·a_k^H + loading: `rank` equal-power point sources. Few
    // sources give a strongly contracting calibration problem (fast
    // convergence); many sources couple the per-antenna least-squares
    // problems and slow it down. Only the upper triangle is computed; the
    // lower triangle mirrors it so Hermitian symmetry is exact in IEEE
    // terms.
    let mut model = ComplexMatrix::zeros(p);
    for i in 0..p {
        for j in i..p {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..rank {
                acc += factors[k * p + i] * factors[k * p + j].conj();
            }
            model.set(i, j, acc);
        }
    }
    let mean_diag = (0..p).map(|i| model.get(i, i).re).sum::<f64>() / p as f64;
    let loading = 0.1 * mean_diag;
    for i in 0..p {
        let d = model.get(i, i);
        model.set(i, i, Complex64::new(d.re + loading, 0.0));
    }
    let mut max_abs: f64 = 0.0;
    for i in 0..p {
        for j in i..p {
            max_abs = max_abs.max(model.get(i, j).norm());
        }
    }
    let scale = 0.5 / max_abs;
    for i in 0..p {
        for j in i..p {
            let v = model.get(i, j) * scale;
            model.set(i, j, v);
            if i != j {
                model.set(j, i, v.conj());
            }
        }
    }

    let mut gains = vec![Complex64::new(0.0, 0.0); p];
    for g in gains.iter_mut() {
        let mag = 1.0 - gain_spread + 2.0 * gain_spread * rng.random::<f64>();
        let phase = std::f64::consts::TAU * rng.random::<f64>();
        *g = Complex64::from_polar(mag, phase);
    }

    // V = G·M·G^H, again upper triangle plus mirror; diagonal forced real.
    let mut measured = ComplexMatrix::zeros(p);
    for i in 0..p {
        for j in i..p {
            if i == j {
                let v = gains[i].norm_sqr() * model.get(i, i).re;
                measured.set(i, i, Complex64::new(v, 0.0));
            } else {
                let v = gains[i] * model.get(i, j) * gains[j].conj();
                measured.set(i, j, v);
                measured.set(j, i, v.conj());
            }
        }
    }
    if noise_sigma > 0.0 {
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..p {
            for j in i..p {
                if i == j {
                    let n: f64 = rng.sample(StandardNormal);
                    let d = measured.get(i, i);
                    measured.set(i, i, Complex64::new(d.re + noise_sigma * n, 0.0));
                } else {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    let n = Complex64::new(re, im) * (noise_sigma * inv_sqrt2);
                    let v = measured.get(i, j) + n;
                    measured.set(i, j, v);
                    measured.set(j, i, v.conj());
                }
            }
        }
    }

    Ok(CalibrationProblem {
        p,
        model,
        measured,
        true_gains: Some(gains),
        noise_sigma,
    })
}

fn write_matrix<W: Write>(w: &mut W, m: &ComplexMatrix) -> io::Result<()> {
    for z in m.as_slice() {
        w.write_f64::<LittleEndian>(z.re)?;
        w.write_f64::<LittleEndian>(z.im)?;
    }
    Ok(())
}

/// Serialises a problem into the binary container
/// (`AXCP` magic, version, flags, antenna count, noise sigma, then
/// column-major complex-double payloads for M, V and optional gains,
/// little-endian throughout).
pub fn save_problem(problem: &CalibrationProblem, path: &Path) -> Result<(), DatagenError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u16::<LittleEndian>(FORMAT_VERSION)?;
    let flags = if problem.true_gains.is_some() {
        FLAG_TRUE_GAINS
    } else {
        0
    };
    w.write_u16::<LittleEndian>(flags)?;
    w.write_u32::<LittleEndian>(problem.p as u32)?;
    w.write_f64::<LittleEndian>(problem.noise_sigma)?;
    write_matrix(&mut w, &problem.model)?;
    write_matrix(&mut w, &problem.measured)?;
    if let Some(g) = &problem.true_gains {
        for z in g {
            w.write_f64::<LittleEndian>(z.re)?;
            w.write_f64::<LittleEndian>(z.im)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses a problem file, reporting byte offsets on malformed input.
pub fn load_problem(path: &Path) -> Result<CalibrationProblem, DatagenError> {
    let file = File::open(path)?;
    let file_len = file.metadata()?.len();
    let mut r = BufReader::new(file);

    if file_len < HEADER_LEN {
        return Err(DatagenError::Truncated {
            expected: HEADER_LEN,
            actual: file_len,
        });
    }
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DatagenError::BadMagic { found: magic });
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(DatagenError::BadVersion { found: version });
    }
    let flags = r.read_u16::<LittleEndian>()?;
    let p = r.read_u32::<LittleEndian>()?;
    let noise_sigma = r.read_f64::<LittleEndian>()?;
    if p == 0 {
        return Err(DatagenError::InvalidDimensions(
            "antenna count 0 in header".into(),
        ));
    }

    let n = p as u64;
    let has_gains = flags & FLAG_TRUE_GAINS != 0;
    let matrix_bytes = n * n * 16;
    let expected = HEADER_LEN + 2 * matrix_bytes + if has_gains { n * 16 } else { 0 };
    if file_len < expected {
        return Err(DatagenError::DimensionMismatch {
            declared: p,
            available: file_len - HEADER_LEN.min(file_len),
            offset: file_len,
        });
    }
    if file_len > expected {
        return Err(DatagenError::TrailingBytes { offset: expected });
    }

    let p = p as usize;
    let read_matrix = |r: &mut BufReader<File>| -> Result<ComplexMatrix, DatagenError> {
        let mut m = ComplexMatrix::zeros(p);
        for v in m.data.iter_mut() {
            let re = r.read_f64::<LittleEndian>()?;
            let im = r.read_f64::<LittleEndian>()?;
            *v = Complex64::new(re, im);
        }
        Ok(m)
    };
    let model = read_matrix(&mut r)?;
    let measured = read_matrix(&mut r)?;
    let true_gains = if has_gains {
        let mut g = vec![Complex64::new(0.0, 0.0); p];
        for v in g.iter_mut() {
            let re = r.read_f64::<LittleEndian>()?;
            let im = r.read_f64::<LittleEndian>()?;
            *v = Complex64::new(re, im);
        }
        Some(g)
    } else {
        None
    };

    Ok(CalibrationProblem {
        p,
        model,
        measured,
        true_gains,
        noise_sigma,
    })
}

/// CSV export for interoperability: one row per matrix entry
/// (`matrix,row,col,re,im`), with the gains emitted as `matrix = "g"`.
pub fn export_problem_csv(problem: &CalibrationProblem, path: &Path) -> Result<(), DatagenError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(["matrix", "row", "col", "re", "im"]).map_err(csv_io)?;
    let mut dump = |name: &str, m: &ComplexMatrix| -> Result<(), DatagenError> {
        for col in 0..m.size() {
            for row in 0..m.size() {
                let z = m.get(row, col);
                w.write_record([
                    name.to_string(),
                    row.to_string(),
                    col.to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                ])
                .map_err(csv_io)?;
            }
        }
        Ok(())
    };
    dump("M", &problem.model)?;
    dump("V", &problem.measured)?;
    if let Some(g) = &problem.true_gains {
        for (row, z) in g.iter().enumerate() {
            w.write_record([
                "g".to_string(),
                row.to_string(),
                "0".to_string(),
                z.re.to_string(),
                z.im.to_string(),
            ])
            .map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> DatagenError {
    DatagenError::Io(io::Error::other(e))
}
