//! Binary model file.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "LSTMAMP1"
//! 8       4     format version (u32 LE)
//! 12      4     num_layer
//! 16      4     num_hidden
//! 20      4     num_step
//! 24      4     num_feature
//! 28      4     sample_rate
//! 32      8·N   weights, f64 LE, in LstmParams flat order
//! ```

use std::path::Path;

use super::{LstmParams, ModelConfig};
use crate::error::{Error, ModelFileError, Result};

pub const MAGIC: &[u8; 8] = b"LSTMAMP1";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 32;

pub fn model_to_bytes(params: &LstmParams<f64>) -> Result<Vec<u8>> {
    params.check_finite()?;
    let cfg = params.config();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [cfg.num_layer, cfg.num_hidden, cfg.num_step, cfg.num_feature] {
        let v = u32::try_from(v).map_err(|_| Error::invalid("model dimension exceeds u32"))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&cfg.sample_rate.to_le_bytes());
    for w in params.as_slice() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    Ok(out)
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<LstmParams<f64>> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(ModelFileError::BadMagic.into());
    }
    if bytes.len() < HEADER_LEN {
        return Err(ModelFileError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        }
        .into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != FORMAT_VERSION {
        return Err(ModelFileError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        }
        .into());
    }
    let config = ModelConfig {
        num_layer: word(1) as usize,
        num_hidden: word(2) as usize,
        num_step: word(3) as usize,
        num_feature: word(4) as usize,
        sample_rate: word(5),
    };
    config
        .validate()
        .map_err(|e| ModelFileError::InvalidHeader(e.to_string()))?;
    let expected = HEADER_LEN + 8 * config.param_count();
    if bytes.len() < expected {
        return Err(ModelFileError::Truncated {
            expected,
            found: bytes.len(),
        }
        .into());
    }
    if bytes.len() > expected {
        return Err(ModelFileError::TrailingBytes(bytes.len() - expected).into());
    }
    let data: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let params = LstmParams::from_flat(config, data)?;
    if let Some(i) = params.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(ModelFileError::NonFiniteWeight {
            path: params.weight_path(i),
        }
        .into());
    }
    Ok(params)
}

pub fn save_model(path: impl AsRef<Path>, params: &LstmParams<f64>) -> Result<()> {
    let path = path.as_ref();
    let bytes = model_to_bytes(params)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LstmParams<f64>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::forward_window;

    fn sample_params() -> LstmParams<f64> {
        let cfg = ModelConfig {
            num_step: 4,
            num_hidden: 3,
            num_layer: 2,
            num_feature: 2,
            sample_rate: 44_100,
        };
        let data = (0..cfg.param_count()).map(|i| (i as f64 * 0.731).sin()).collect();
        LstmParams::from_flat(cfg, data).unwrap()
    }

    fn err_of(bytes: &[u8]) -> ModelFileError {
        match model_from_bytes(bytes) {
            Err(Error::ModelFile(e)) => e,
            other => panic!("expected model file error, got {other:?}"),
        }
    }

    #[test]
    fn header_layout() {
        let bytes = model_to_bytes(&sample_params()).unwrap();
        assert_eq!(&bytes[..8], b"LSTMAMP1");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &3u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &4u32.to_le_bytes());
        assert_eq!(&bytes[24..28], &2u32.to_le_bytes());
        assert_eq!(&bytes[28..32], &44_100u32.to_le_bytes());
        assert_eq!(bytes.len(), 32 + 8 * sample_params().len());
        assert_eq!(&bytes[32..40], &0.0f64.to_le_bytes());
    }

    #[test]
    fn round_trip_is_bitwise() {
        let p = sample_params();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.lstm");
        save_model(&path, &p).unwrap();
        let q = load_model(&path).unwrap();
        assert_eq!(p.config(), q.config());
        let a: Vec<u64> = p.as_slice().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = q.as_slice().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_errors() {
        let good = model_to_bytes(&sample_params()).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert_eq!(err_of(&bad_magic), ModelFileError::BadMagic);
        assert_eq!(err_of(b"LST"), ModelFileError::BadMagic);

        let mut bad_version = good.clone();
        bad_version[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert_eq!(
            err_of(&bad_version),
            ModelFileError::VersionMismatch { found: 7, expected: 1 }
        );

        assert!(matches!(err_of(&good[..good.len() - 3]), ModelFileError::Truncated { .. }));
        assert!(matches!(err_of(&good[..20]), ModelFileError::Truncated { .. }));

        let mut trailing = good.clone();
        trailing.push(0);
        assert_eq!(err_of(&trailing), ModelFileError::TrailingBytes(1));

        let mut nan = good.clone();
        let at = good.len() - 8;
        nan[at..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert_eq!(
            err_of(&nan),
            ModelFileError::NonFiniteWeight { path: "b_out[0]".into() }
        );

        let mut bad_cfg = good;
        bad_cfg[12..16].copy_from_slice(&3u32.to_le_bytes());
        assert!(matches!(err_of(&bad_cfg), ModelFileError::InvalidHeader(_)));
    }

    #[test]
    fn refuses_to_save_non_finite() {
        let mut p = sample_params();
        p.as_mut_slice()[5] = f64::INFINITY;
        assert!(matches!(model_to_bytes(&p), Err(Error::NonFinite(_))));
    }

    #[test]
    fn loaded_model_enforces_feature_count() {
        let p = model_from_bytes(&model_to_bytes(&sample_params()).unwrap()).unwrap();
        // num_feature = 2: a single-feature window of num_step values is rejected
        assert!(forward_window(&p, &[0.1, 0.2, 0.3, 0.4]).is_err());
        assert!(forward_window(&p, &[0.1; 8]).is_ok());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_model("/nonexistent/dir/m.lstm"), Err(Error::Io { .. })));
    }
}
