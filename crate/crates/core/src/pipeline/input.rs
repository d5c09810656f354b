use std::fmt;
use std::str::FromStr;

use super::record::GroundStateRecord;
use crate::ae::TensorBuffer;
use crate::error::{Error, Result};

/// Which part of a ground state the autoencoder sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InputKind {
    /// Central-bond entanglement spectrum, `(1, chi_max)`.
    Es,
    /// Central `Lambda Gamma Lambda` as a `d`-channel `chi_max x chi_max` image.
    Theta,
    /// `C_SF` with rows as channels, `(L, L)`.
    Csf,
}

impl InputKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Es => "es",
            Self::Theta => "theta",
            Self::Csf => "csf",
        }
    }

    /// Shape of the exported buffer, spatial extents padded to multiples of 4.
    pub fn shape(self, chi_max: usize, d: usize, length: usize) -> Vec<usize> {
        let p = |n: usize| n.div_ceil(4) * 4;
        match self {
            Self::Es => vec![1, p(chi_max)],
            Self::Theta => vec![d, p(chi_max), p(chi_max)],
            Self::Csf => vec![length, p(length)],
        }
    }

    pub fn shape_of(self, record: &GroundStateRecord) -> Vec<usize> {
        self.shape(record.chi_max, record.n_max + 1, record.length)
    }
}

impl fmt::Display for InputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InputKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "es" => Ok(Self::Es),
            "theta" => Ok(Self::Theta),
            "csf" => Ok(Self::Csf),
            _ => Err(Error::Config(format!("unknown input kind {s:?} (es, theta, csf)"))),
        }
    }
}

fn normalize_max_abs(data: &mut [f64]) {
    let m = data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m > 0.0 {
        data.iter_mut().for_each(|x| *x /= m);
    }
}

/// Autoencoder input for one record. Spectra are used raw; Theta images and
/// correlator matrices are scaled by their largest absolute entry.
pub fn extract_input(record: &GroundStateRecord, kind: InputKind) -> Result<TensorBuffer> {
    let shape = kind.shape_of(record);
    match kind {
        InputKind::Es => {
            let s = record.central_spectrum()?;
            let mut data = vec![0.0; shape[1]];
            let n = s.len().min(record.chi_max);
            data[..n].copy_from_slice(&s[..n]);
            TensorBuffer::new(shape, data)
        }
        InputKind::Theta => {
            let theta = record.central_theta.as_ref().ok_or_else(|| Error::RecordIncomplete("central theta".into()))?;
            let (cl, d, cr) = theta.dim();
            let (h, w) = (shape[1], shape[2]);
            if d != shape[0] || cl > h || cr > w {
                return Err(Error::Shape(format!("theta {:?} does not fit image {shape:?}", theta.dim())));
            }
            let mut data = vec![0.0; d * h * w];
            for ((a, s, b), &x) in theta.indexed_iter() {
                data[(s * h + a) * w + b] = x;
            }
            normalize_max_abs(&mut data);
            TensorBuffer::new(shape, data)
        }
        InputKind::Csf => {
            let c = record.corr_sf.as_ref().ok_or_else(|| Error::RecordIncomplete("C_SF matrix".into()))?;
            let (l, w) = (shape[0], shape[1]);
            if c.nrows() != l {
                return Err(Error::Shape(format!("C_SF is {}x{}, record has L={l}", c.nrows(), c.ncols())));
            }
            let mut data = vec![0.0; l * w];
            for ((i, j), &x) in c.indexed_iter() {
                data[i * w + j] = x;
            }
            normalize_max_abs(&mut data);
            TensorBuffer::new(shape, data)
        }
    }
}
