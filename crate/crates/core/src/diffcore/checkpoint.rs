//! Binary parameter checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic        8 bytes  "STGEDCKP"
//! version      u32
//! provenance   u32 length + UTF-8 bytes
//! count        u32
//! record*      name (u32 length + UTF-8), ndim u32, dims u64 * ndim, values f64 * prod(dims)
//! ```

use std::io::{Read, Write};

use super::{DiffError, ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"STGEDCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointRecord {
    pub name: String,
    pub value: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub provenance: String,
    pub records: Vec<CheckpointRecord>,
}

impl Checkpoint {
    pub fn from_store(store: &ParamStore, provenance: impl Into<String>) -> Self {
        Self {
            provenance: provenance.into(),
            records: store
                .iter()
                .map(|p| CheckpointRecord {
                    name: p.name.clone(),
                    value: p.value.clone(),
                })
                .collect(),
        }
    }

    /// Copies every record into the parameter of the same name. All parameters of
    /// `store` must be covered, with matching shapes.
    pub fn apply(&self, store: &mut ParamStore) -> Result<(), DiffError> {
        let mut seen = vec![false; store.len()];
        for r in &self.records {
            let id = store
                .find(&r.name)
                .ok_or_else(|| DiffError::Checkpoint(format!("unknown parameter {}", r.name)))?;
            let p = store.get_mut(id);
            if p.value.shape() != r.value.shape() {
                return Err(DiffError::Checkpoint(format!(
                    "parameter {} has shape {:?}, checkpoint has {:?}",
                    r.name,
                    p.value.shape(),
                    r.value.shape()
                )));
            }
            p.value = r.value.clone();
            seen[id.index()] = true;
        }
        if let Some(missing) = store.iter().zip(&seen).find(|(_, s)| !**s) {
            return Err(DiffError::MissingParam(missing.0.name.clone()));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), DiffError> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        write_str(&mut w, &self.provenance)?;
        w.write_all(&len_u32(self.records.len())?.to_le_bytes())?;
        for r in &self.records {
            write_str(&mut w, &r.name)?;
            w.write_all(&len_u32(r.value.shape().len())?.to_le_bytes())?;
            for &d in r.value.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in r.value.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, DiffError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(DiffError::Checkpoint("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(DiffError::Checkpoint(format!("unsupported version {version}")));
        }
        let provenance = read_str(&mut r)?;
        let count = read_u32(&mut r)? as usize;
        let mut records = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name = read_str(&mut r)?;
            let ndim = read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                shape.push(u64::from_le_bytes(b) as usize);
            }
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n.min(1 << 24));
            for _ in 0..n {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                data.push(f64::from_le_bytes(b));
            }
            let value = Tensor::new(shape, data)
                .map_err(|e| DiffError::Checkpoint(format!("record {name}: {e}")))?;
            records.push(CheckpointRecord { name, value });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(DiffError::Checkpoint("trailing bytes after last record".into()));
        }
        Ok(Self { provenance, records })
    }
}

fn len_u32(n: usize) -> Result<u32, DiffError> {
    u32::try_from(n).map_err(|_| DiffError::Checkpoint(format!("length {n} exceeds u32")))
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<(), DiffError> {
    w.write_all(&len_u32(s.len())?.to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, DiffError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, DiffError> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| DiffError::Checkpoint("invalid UTF-8 string".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_store() -> ParamStore {
        let mut store = ParamStore::new();
        store
            .add("enc.w", Tensor::new(vec![2, 3], vec![0.1, -2.5, 3.0, 1e-300, f64::MAX, -0.0]).unwrap())
            .unwrap();
        store.add("dec.b", Tensor::scalar(std::f64::consts::PI)).unwrap();
        store
    }

    #[test]
    fn byte_exact_round_trip() {
        let ck = Checkpoint::from_store(&sample_store(), "stged train --seed 1");
        let bytes = ck.to_bytes();
        let back = Checkpoint::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.provenance, "stged train --seed 1");
        // -0.0 survives bit-for-bit
        assert_eq!(back.records[0].value.data()[5].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn apply_checks_names_and_shapes() {
        let ck = Checkpoint::from_store(&sample_store(), "");
        let mut target = ParamStore::new();
        target.add_zeros("enc.w", &[2, 3]).unwrap();
        assert!(matches!(ck.apply(&mut target), Err(DiffError::Checkpoint(_))));

        let mut target = sample_store();
        target.add_zeros("extra", &[1]).unwrap();
        assert!(matches!(ck.apply(&mut target), Err(DiffError::MissingParam(_))));

        let mut target = ParamStore::new();
        target.add_zeros("enc.w", &[3, 2]).unwrap();
        target.add_zeros("dec.b", &[1]).unwrap();
        assert!(ck.apply(&mut target).is_err());
    }

    #[test]
    fn rejects_truncated_and_trailing() {
        let bytes = Checkpoint::from_store(&sample_store(), "x").to_bytes();
        assert!(Checkpoint::read_from(&bytes[..bytes.len() - 3]).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(Checkpoint::read_from(longer.as_slice()).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(Checkpoint::read_from(bad.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_bits_round_trip(values in proptest::collection::vec(any::<u64>(), 1..20)) {
            let data: Vec<f64> = values.iter().map(|&b| f64::from_bits(b)).collect();
            let n = data.len();
            let ck = Checkpoint {
                provenance: String::new(),
                records: vec![CheckpointRecord { name: "p".into(), value: Tensor::new(vec![n], data).unwrap() }],
            };
            let bytes = ck.to_bytes();
            let back = Checkpoint::read_from(bytes.as_slice()).unwrap();
            prop_assert_eq!(back.to_bytes(), bytes);
        }
    }
}
