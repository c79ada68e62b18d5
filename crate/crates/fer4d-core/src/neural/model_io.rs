//! Binary model persistence. Little-endian throughout: the magic
//! `FER4DMDL`, a format version, a model-kind tag and its hyperparameters,
//! then the parameter tensors as shape headers followed by raw f64 data.
//! Round-trips are bit-exact.

use super::bilstm::{BiLstmConfig, BiLstmModel};
use super::convnet::{ConvNetConfig, ConvNetModel};
use super::tensor::Tensor;
use super::{DifferentiableClassifier, NeuralError};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"FER4DMDL";
const VERSION: u32 = 1;

const KIND_CONVNET: u32 = 0;
const KIND_BILSTM: u32 = 1;

/// Either trainable model, for storage and pipeline plumbing.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    ConvNet(ConvNetModel),
    BiLstm(BiLstmModel),
}

impl From<ConvNetModel> for Model {
    fn from(m: ConvNetModel) -> Self {
        Model::ConvNet(m)
    }
}

impl From<BiLstmModel> for Model {
    fn from(m: BiLstmModel) -> Self {
        Model::BiLstm(m)
    }
}

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }

    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }

    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }

    fn tensor(&mut self, t: &Tensor) -> std::io::Result<()> {
        self.u32(t.shape.len() as u32)?;
        for &d in &t.shape {
            self.u64(d as u64)?;
        }
        for &v in &t.data {
            self.f64(v)?;
        }
        Ok(())
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn u32(&mut self) -> Result<u32, NeuralError> {
        let mut buf = [0u8; 4];
        self.0
            .read_exact(&mut buf)
            .map_err(|e| NeuralError::BadModelFile(e.to_string()))?;
        Ok(u32::from_le_bytes(buf))
    }

    fn u64(&mut self) -> Result<u64, NeuralError> {
        let mut buf = [0u8; 8];
        self.0
            .read_exact(&mut buf)
            .map_err(|e| NeuralError::BadModelFile(e.to_string()))?;
        Ok(u64::from_le_bytes(buf))
    }

    fn f64(&mut self) -> Result<f64, NeuralError> {
        let mut buf = [0u8; 8];
        self.0
            .read_exact(&mut buf)
            .map_err(|e| NeuralError::BadModelFile(e.to_string()))?;
        Ok(f64::from_le_bytes(buf))
    }

    fn tensor(&mut self) -> Result<Tensor, NeuralError> {
        let ndim = self.u32()? as usize;
        if ndim > 8 {
            return Err(NeuralError::BadModelFile(format!(
                "implausible tensor rank {ndim}"
            )));
        }
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(self.u64()? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(self.f64()?);
        }
        Ok(Tensor { shape, data })
    }
}

/// Serializes a model to `path`.
pub fn save_model(model: &Model, path: &Path) -> Result<(), NeuralError> {
    let file = std::fs::File::create(path)
        .map_err(|e| NeuralError::BadModelFile(format!("{}: {e}", path.display())))?;
    let mut w = Writer(std::io::BufWriter::new(file));
    let io_err = |e: std::io::Error| NeuralError::BadModelFile(e.to_string());
    w.0.write_all(MAGIC).map_err(io_err)?;
    w.u32(VERSION).map_err(io_err)?;
    match model {
        Model::ConvNet(m) => {
            w.u32(KIND_CONVNET).map_err(io_err)?;
            w.u32(m.cfg.in_shape[0] as u32).map_err(io_err)?;
            w.u32(m.cfg.in_shape[1] as u32).map_err(io_err)?;
            w.u32(m.cfg.in_shape[2] as u32).map_err(io_err)?;
            w.u32(m.cfg.filters.len() as u32).map_err(io_err)?;
            for &f in &m.cfg.filters {
                w.u32(f as u32).map_err(io_err)?;
            }
            w.u64(m.cfg.seed).map_err(io_err)?;
            let tensors = m.tensors();
            w.u32(tensors.len() as u32).map_err(io_err)?;
            for t in tensors {
                w.tensor(t).map_err(io_err)?;
            }
        }
        Model::BiLstm(m) => {
            w.u32(KIND_BILSTM).map_err(io_err)?;
            w.u32(m.cfg.input_dim as u32).map_err(io_err)?;
            w.u32(m.cfg.hidden as u32).map_err(io_err)?;
            w.f64(m.cfg.dropout).map_err(io_err)?;
            w.u64(m.cfg.seed).map_err(io_err)?;
            let tensors = m.tensors();
            w.u32(tensors.len() as u32).map_err(io_err)?;
            for t in tensors {
                w.tensor(t).map_err(io_err)?;
            }
        }
    }
    Ok(())
}

/// Loads a model saved by [`save_model`].
pub fn load_model(path: &Path) -> Result<Model, NeuralError> {
    let file = std::fs::File::open(path)
        .map_err(|e| NeuralError::BadModelFile(format!("{}: {e}", path.display())))?;
    let mut r = Reader(std::io::BufReader::new(file));
    let mut magic = [0u8; 8];
    r.0.read_exact(&mut magic)
        .map_err(|e| NeuralError::BadModelFile(e.to_string()))?;
    if &magic != MAGIC {
        return Err(NeuralError::BadModelFile("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(NeuralError::BadModelFile(format!(
            "unsupported format version {version}"
        )));
    }
    let kind = r.u32()?;
    match kind {
        KIND_CONVNET => {
            let in_shape = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
            let n_filters = r.u32()? as usize;
            let mut filters = Vec::with_capacity(n_filters);
            for _ in 0..n_filters {
                filters.push(r.u32()? as usize);
            }
            let seed = r.u64()?;
            let cfg = ConvNetConfig {
                in_shape,
                filters,
                seed,
            };
            let mut model =
                ConvNetModel::new(cfg).map_err(|e| NeuralError::BadModelFile(e.to_string()))?;
            let count = r.u32()? as usize;
            let expected = model.tensors().len();
            if count != expected {
                return Err(NeuralError::BadModelFile(format!(
                    "{count} tensors, expected {expected}"
                )));
            }
            let mut tensors = Vec::with_capacity(count);
            for _ in 0..count {
                tensors.push(r.tensor()?);
            }
            check_shapes(&model.tensors(), &tensors)?;
            let flat: Vec<f64> = tensors.iter().flat_map(|t| t.data.iter().copied()).collect();
            model.set_params_vec(&flat);
            Ok(Model::ConvNet(model))
        }
        KIND_BILSTM => {
            let input_dim = r.u32()? as usize;
            let hidden = r.u32()? as usize;
            let dropout = r.f64()?;
            let seed = r.u64()?;
            let cfg = BiLstmConfig {
                input_dim,
                hidden,
                dropout,
                seed,
            };
            let mut model =
                BiLstmModel::new(cfg).map_err(|e| NeuralError::BadModelFile(e.to_string()))?;
            let count = r.u32()? as usize;
            let expected = model.tensors().len();
            if count != expected {
                return Err(NeuralError::BadModelFile(format!(
                    "{count} tensors, expected {expected}"
                )));
            }
            let mut tensors = Vec::with_capacity(count);
            for _ in 0..count {
                tensors.push(r.tensor()?);
            }
            check_shapes(&model.tensors(), &tensors)?;
            let flat: Vec<f64> = tensors.iter().flat_map(|t| t.data.iter().copied()).collect();
            model.set_params_vec(&flat);
            Ok(Model::BiLstm(model))
        }
        other => Err(NeuralError::BadModelFile(format!(
            "unknown model kind {other}"
        ))),
    }
}

/// Validates that loaded tensor shapes match the freshly constructed model.
fn check_shapes(expected: &[&Tensor], loaded: &[Tensor]) -> Result<(), NeuralError> {
    for (e, l) in expected.iter().zip(loaded) {
        if e.shape != l.shape {
            return Err(NeuralError::BadModelFile(format!(
                "tensor shape {:?} does not match expected {:?}",
                l.shape, e.shape
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::DifferentiableClassifier;
    use super::*;

    #[test]
    fn convnet_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cnn.bin");
        let model = ConvNetModel::new(ConvNetConfig {
            in_shape: [2, 10, 10],
            filters: vec![3],
            seed: 42,
        })
        .unwrap();
        save_model(&Model::ConvNet(model.clone()), &path).unwrap();
        let Model::ConvNet(loaded) = load_model(&path).unwrap() else {
            panic!("wrong kind");
        };
        assert_eq!(loaded.cfg, model.cfg);
        assert_eq!(loaded.params_vec(), model.params_vec());
    }

    #[test]
    fn bilstm_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lstm.bin");
        let model = BiLstmModel::new(BiLstmConfig {
            input_dim: 6,
            hidden: 4,
            dropout: 0.25,
            seed: 1,
        })
        .unwrap();
        save_model(&Model::BiLstm(model.clone()), &path).unwrap();
        let Model::BiLstm(loaded) = load_model(&path).unwrap() else {
            panic!("wrong kind");
        };
        assert_eq!(loaded.cfg, model.cfg);
        assert_eq!(loaded.params_vec(), model.params_vec());
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"NOTMODEL0000").unwrap();
        assert!(matches!(
            load_model(&path),
            Err(NeuralError::BadModelFile(_))
        ));
    }
}
