//! Binary model files.
//!
//! Layout (little-endian): magic `DANOM`, `u16` format version, `u8` model
//! kind, `u8` fusion scheme, `u64` input dimension, preprocessing state,
//! detector payload, then a trailing `u64` checksum (the first eight bytes
//! of the SHA-256 digest of everything before it). Floats are stored as raw
//! IEEE-754 bits, so a loaded model scores bit-identically.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::gmm::{Covariance, GmmModel};
use super::ocsvm::SvmModel;
use super::pca::PcaBasis;
use super::vae::{Dense, VaeModel, VaeParams, VaeTraining};
use super::{Detector, ModelKind, OneClassModel, Preprocessing, Standardizer};
use crate::error::{Error, Result};
use crate::fusion::FusionScheme;

pub const MAGIC: &[u8; 5] = b"DANOM";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = MAGIC.len() + 2;

fn checksum(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fn bool(&mut self, v: bool) {
        self.u8(v as u8);
    }
    fn vec(&mut self, v: &[f64]) {
        self.usize(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::ModelFormat("payload ends early".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::ModelFormat("length overflows usize".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::ModelFormat(format!("invalid flag byte {b}"))),
        }
    }
    fn vec(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(Error::ModelFormat("vector length exceeds payload".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }
}

fn kind_tag(kind: ModelKind) -> u8 {
    match kind {
        ModelKind::Gmm => 0,
        ModelKind::Svm => 1,
        ModelKind::Vae => 2,
    }
}

fn write_preprocessing(w: &mut Writer, p: &Preprocessing) {
    w.bool(p.l2_normalize);
    w.bool(p.standardizer.is_some());
    if let Some(s) = &p.standardizer {
        w.vec(&s.mean);
        w.vec(&s.scale);
    }
    w.bool(p.pca.is_some());
    if let Some(pca) = &p.pca {
        w.vec(&pca.mean);
        w.usize(pca.components.len());
        pca.components.iter().for_each(|c| w.vec(c));
        w.vec(&pca.eigenvalues);
    }
}

fn read_preprocessing(r: &mut Reader) -> Result<Preprocessing> {
    let l2_normalize = r.bool()?;
    let standardizer = if r.bool()? {
        Some(Standardizer {
            mean: r.vec()?,
            scale: r.vec()?,
        })
    } else {
        None
    };
    let pca = if r.bool()? {
        let mean = r.vec()?;
        let rows = r.usize()?;
        let components = (0..rows).map(|_| r.vec()).collect::<Result<_>>()?;
        Some(PcaBasis {
            mean,
            components,
            eigenvalues: r.vec()?,
        })
    } else {
        None
    };
    Ok(Preprocessing {
        l2_normalize,
        standardizer,
        pca,
    })
}

fn write_dense(w: &mut Writer, l: &Dense) {
    w.usize(l.n_in);
    w.usize(l.n_out);
    w.vec(&l.w);
    w.vec(&l.b);
}

fn read_dense(r: &mut Reader) -> Result<Dense> {
    Ok(Dense {
        n_in: r.usize()?,
        n_out: r.usize()?,
        w: r.vec()?,
        b: r.vec()?,
    })
}

fn write_detector(w: &mut Writer, d: &Detector) {
    match d {
        Detector::Gmm(m) => {
            w.usize(m.weights.len());
            for k in 0..m.weights.len() {
                w.f64(m.weights[k]);
                w.vec(&m.means[k]);
                match &m.covariances[k] {
                    Covariance::Diagonal(v) => {
                        w.u8(0);
                        w.vec(v);
                    }
                    Covariance::Full { matrix, .. } => {
                        w.u8(1);
                        w.vec(matrix);
                    }
                }
            }
        }
        Detector::Svm(m) => {
            w.f64(m.rho);
            w.f64(m.gamma);
            w.f64(m.nu);
            w.usize(m.n_train);
            w.usize(m.alphas.len());
            for (a, sv) in m.alphas.iter().zip(&m.support_vectors) {
                w.f64(*a);
                w.vec(sv);
            }
        }
        Detector::Vae(m) => {
            let t = &m.training;
            w.usize(t.epochs);
            w.usize(t.batch_size);
            w.f64(t.learning_rate);
            w.u64(t.seed);
            for l in m.params.layers() {
                write_dense(w, l);
            }
        }
    }
}

fn read_detector(r: &mut Reader, tag: u8) -> Result<Detector> {
    match tag {
        0 => {
            let k = r.usize()?;
            let mut m = GmmModel {
                weights: Vec::new(),
                means: Vec::new(),
                covariances: Vec::new(),
            };
            for _ in 0..k {
                m.weights.push(r.f64()?);
                let mean = r.vec()?;
                let cov = match r.u8()? {
                    0 => Covariance::Diagonal(r.vec()?),
                    1 => Covariance::full(r.vec()?, mean.len())?,
                    t => return Err(Error::ModelFormat(format!("unknown covariance tag {t}"))),
                };
                m.means.push(mean);
                m.covariances.push(cov);
            }
            Ok(Detector::Gmm(m))
        }
        1 => {
            let rho = r.f64()?;
            let gamma = r.f64()?;
            let nu = r.f64()?;
            let n_train = r.usize()?;
            let n_sv = r.usize()?;
            let mut alphas = Vec::new();
            let mut support_vectors = Vec::new();
            for _ in 0..n_sv {
                alphas.push(r.f64()?);
                support_vectors.push(r.vec()?);
            }
            Ok(Detector::Svm(SvmModel {
                support_vectors,
                alphas,
                rho,
                gamma,
                nu,
                n_train,
            }))
        }
        2 => {
            let training = VaeTraining {
                epochs: r.usize()?,
                batch_size: r.usize()?,
                learning_rate: r.f64()?,
                seed: r.u64()?,
            };
            let params = VaeParams {
                encoder: read_dense(r)?,
                mu_head: read_dense(r)?,
                logvar_head: read_dense(r)?,
                decoder: read_dense(r)?,
                output: read_dense(r)?,
            };
            params.validate()?;
            Ok(Detector::Vae(VaeModel { params, training }))
        }
        t => Err(Error::ModelFormat(format!("unknown model kind tag {t}"))),
    }
}

pub fn to_bytes(model: &OneClassModel) -> Vec<u8> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(MAGIC);
    w.u16(FORMAT_VERSION);
    w.u8(kind_tag(model.kind()));
    w.u8(model.scheme.tag());
    w.usize(model.input_dim);
    write_preprocessing(&mut w, &model.preprocessing);
    write_detector(&mut w, &model.detector);
    let sum = checksum(&w.buf);
    w.u64(sum);
    w.buf
}

pub fn from_bytes(bytes: &[u8]) -> Result<OneClassModel> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::ModelFormat("not a model file (bad magic)".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Checksum);
    }
    let version = u16::from_le_bytes([bytes[5], bytes[6]]);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    if bytes.len() < HEADER_LEN + 8 {
        return Err(Error::Checksum);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    if checksum(body) != u64::from_le_bytes(tail.try_into().expect("8 bytes")) {
        return Err(Error::Checksum);
    }

    let mut r = Reader {
        buf: body,
        pos: HEADER_LEN,
    };
    let kind = r.u8()?;
    let scheme = FusionScheme::from_tag(r.u8()?)
        .ok_or_else(|| Error::ModelFormat("unknown fusion scheme tag".into()))?;
    let input_dim = r.usize()?;
    let preprocessing = read_preprocessing(&mut r)?;
    let detector = read_detector(&mut r, kind)?;
    if r.pos != body.len() {
        return Err(Error::ModelFormat("trailing bytes after payload".into()));
    }
    Ok(OneClassModel {
        scheme,
        input_dim,
        preprocessing,
        detector,
    })
}

pub fn save_model(model: &OneClassModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<OneClassModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
