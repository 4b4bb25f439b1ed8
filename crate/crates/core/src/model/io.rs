//! Binary model file.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes   "CFSMODEL"
//! version    u16
//! width      u8        scalar width in bytes (4 = f32, 8 = f64)
//! schema     str       hex SHA-256 of the training schema
//! classes    u32 n, then n x str
//! features   u32 n, then per feature:
//!              u8 0, lo: scalar, inv_width: scalar     (scaled continuous)
//!              u8 1, u32 m, then m x str               (one-hot categorical)
//! layers     u32 n, then per layer:
//!              u32 inputs, u32 outputs, weights (outputs*inputs scalars, row-major), bias
//! checksum   32 bytes  SHA-256 of every preceding byte
//! ```
//!
//! `str` is a `u32` byte length followed by UTF-8 bytes. Scalars are stored
//! in their native width so a round trip is bit-exact.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Dense, Encoder, FeatureEncoding, Model};
use crate::error::ModelError;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"CFSMODEL";
pub const FORMAT_VERSION: u16 = 1;
const CHECKSUM_LEN: usize = 32;

impl<T: Scalar> Model<T> {
    /// Hex SHA-256 of the serialised model.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(T::WIDTH);
        put_str(&mut out, &self.schema_hash);
        put_u32(&mut out, self.classes.len());
        for c in &self.classes {
            put_str(&mut out, c);
        }
        let feats = self.encoder.features();
        put_u32(&mut out, feats.len());
        for f in feats {
            match f {
                FeatureEncoding::Scaled { lo, inv_width } => {
                    out.push(0);
                    lo.write_le(&mut out);
                    inv_width.write_le(&mut out);
                }
                FeatureEncoding::OneHot { categories } => {
                    out.push(1);
                    put_u32(&mut out, categories.len());
                    for c in categories {
                        put_str(&mut out, c);
                    }
                }
            }
        }
        put_u32(&mut out, self.layers.len());
        for l in &self.layers {
            put_u32(&mut out, l.inputs);
            put_u32(&mut out, l.outputs);
            for w in l.weights.iter().chain(&l.bias) {
                w.write_le(&mut out);
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(ModelError::Corrupt("missing magic header".into()));
        }
        let mut r = Reader {
            buf: bytes,
            pos: MAGIC.len(),
        };
        let version = u16::from_le_bytes([r.byte()?, r.byte()?]);
        if version != FORMAT_VERSION {
            return Err(ModelError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let width = r.byte()?;
        if width != T::WIDTH {
            return Err(ModelError::ScalarMismatch {
                found: width,
                expected: T::WIDTH,
            });
        }
        if bytes.len() < r.pos + CHECKSUM_LEN {
            return Err(ModelError::Corrupt("file truncated".into()));
        }
        let body_end = bytes.len() - CHECKSUM_LEN;
        if Sha256::digest(&bytes[..body_end]).as_slice() != &bytes[body_end..] {
            return Err(ModelError::Corrupt("checksum mismatch (truncated or modified file)".into()));
        }
        r.buf = &bytes[..body_end];

        let schema_hash = r.string()?;
        let n_classes = r.u32()?;
        let classes = (0..n_classes).map(|_| r.string()).collect::<Result<Vec<_>, _>>()?;
        let n_features = r.u32()?;
        let mut features = Vec::with_capacity(n_features.min(1 << 16));
        for _ in 0..n_features {
            features.push(match r.byte()? {
                0 => FeatureEncoding::Scaled {
                    lo: r.scalar()?,
                    inv_width: r.scalar()?,
                },
                1 => {
                    let m = r.u32()?;
                    FeatureEncoding::OneHot {
                        categories: (0..m).map(|_| r.string()).collect::<Result<_, _>>()?,
                    }
                }
                tag => return Err(ModelError::Corrupt(format!("unknown feature tag {tag}"))),
            });
        }
        let n_layers = r.u32()?;
        if n_layers != 3 {
            return Err(ModelError::Corrupt(format!("expected 3 layers, found {n_layers}")));
        }
        let mut layer = || -> Result<Dense<T>, ModelError> {
            let inputs = r.u32()?;
            let outputs = r.u32()?;
            let n = inputs
                .checked_mul(outputs)
                .ok_or_else(|| ModelError::Corrupt("layer size overflow".into()))?;
            let weights = (0..n).map(|_| r.scalar()).collect::<Result<Vec<_>, _>>()?;
            let bias = (0..outputs).map(|_| r.scalar()).collect::<Result<Vec<_>, _>>()?;
            Ok(Dense {
                inputs,
                outputs,
                weights,
                bias,
            })
        };
        let layers = [layer()?, layer()?, layer()?];
        if r.pos != r.buf.len() {
            return Err(ModelError::Corrupt("trailing bytes after last layer".into()));
        }
        Model::from_parts(Encoder::new(features), layers, classes, schema_hash)
            .map_err(|e| ModelError::Corrupt(e.to_string()))
    }
}

pub fn save_model<T: Scalar>(model: &Model<T>, path: &Path) -> Result<(), ModelError> {
    fs::write(path, model.to_bytes()).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<Model<T>, ModelError> {
    let bytes = fs::read(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Model::from_bytes(&bytes)
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| ModelError::Corrupt("unexpected end of file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn byte(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize, ModelError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self) -> Result<String, ModelError> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| ModelError::Corrupt("invalid UTF-8 string".into()))
    }

    fn scalar<T: Scalar>(&mut self) -> Result<T, ModelError> {
        Ok(T::read_le(self.take(T::WIDTH as usize)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dense;
    use crate::schema::{FeatureSchema, FeatureSpec};

    fn model() -> Model<f64> {
        let s = FeatureSchema::new(vec![
            FeatureSpec::continuous("a").with_range(-1.0, 3.0),
            FeatureSpec::categorical("c", ["u", "v", "w"]),
        ])
        .unwrap();
        let enc = Encoder::from_schema(&s).unwrap();
        let mut layers = [Dense::zeros(4, 16), Dense::zeros(16, 20), Dense::zeros(20, 2)];
        let mut k = 0.0;
        for l in &mut layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                k += 1.0;
                *w = (k * 0.37f64).sin() / 3.0;
            }
        }
        Model::from_parts(enc, layers, vec!["neg".into(), "pos".into()], s.hash()).unwrap()
    }

    #[test]
    fn bytes_round_trip() {
        let m = model();
        let back = Model::<f64>::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn truncation_detected() {
        let bytes = model().to_bytes();
        for cut in [0, 5, 11, bytes.len() / 2, bytes.len() - 1] {
            let err = Model::<f64>::from_bytes(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, ModelError::Corrupt(_)), "cut {cut}: {err}");
        }
    }

    #[test]
    fn flipped_byte_detected() {
        let mut bytes = model().to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(Model::<f64>::from_bytes(&bytes), Err(ModelError::Corrupt(_))));
    }

    #[test]
    fn version_and_width_checked() {
        let mut bytes = model().to_bytes();
        bytes[8] = 9;
        assert!(matches!(
            Model::<f64>::from_bytes(&bytes),
            Err(ModelError::VersionMismatch { found: 9, .. })
        ));
        let bytes = model().to_bytes();
        assert!(matches!(
            Model::<f32>::from_bytes(&bytes),
            Err(ModelError::ScalarMismatch { found: 8, expected: 4 })
        ));
    }
}
