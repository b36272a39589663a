//! The GAAW weight archive: named little-endian tensors behind a small
//! fixed header.
//!
//! ```text
//! magic "GAAW" | version u16 | count u32
//! per entry: name_len u16 | name (UTF-8) | dtype u8 | ndim u8 | dims u32×ndim | payload
//! ```
//!
//! `dtype` is 0 for f32 and 1 for IEEE binary16. Entries stay in insertion
//! order and names are unique.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use half::f16;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ghost::{ParamShape, ParamSource};
use crate::graph::Graph;

pub const MAGIC: [u8; 4] = *b"GAAW";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 10;
/// Batch-norm epsilon used when an archive does not carry `*.bn.eps`.
pub const DEFAULT_BN_EPS: f32 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    F32,
    F16,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::F16 => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(DType::F32),
            1 => Ok(DType::F16),
            other => Err(Error::Archive(format!("unknown dtype code {other}"))),
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F16 => 2,
        }
    }
}

/// One named tensor. f16 entries hold values already rounded to binary16,
/// widened to f32.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub dtype: DType,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Entry {
    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn byte_len(&self) -> usize {
        self.numel() * self.dtype.size()
    }
}

#[derive(Debug, Clone, Default)]
pub struct WeightArchive {
    entries: Vec<Entry>,
    index: HashMap<String, usize>,
}

impl PartialEq for WeightArchive {
    fn eq(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                a.name == b.name
                    && a.dtype == b.dtype
                    && a.dims == b.dims
                    && a.data
                        .iter()
                        .map(|v| v.to_bits())
                        .eq(b.data.iter().map(|v| v.to_bits()))
            })
    }
}

fn round_f16(data: Vec<f32>) -> Vec<f32> {
    data.into_iter().map(|v| f16::from_f32(v).to_f32()).collect()
}

impl WeightArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, dims: &[usize], data: Vec<f32>, dtype: DType) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(Error::DuplicateName(name.to_string()));
        }
        if name.len() > u16::MAX as usize || dims.len() > u8::MAX as usize {
            return Err(Error::Archive(format!("name or rank too long for `{name}`")));
        }
        if dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::Archive(format!("dimension too large in `{name}`")));
        }
        let numel: usize = dims.iter().product();
        if numel != data.len() {
            return Err(Error::WeightShape {
                name: name.to_string(),
                expected: dims.to_vec(),
                found: vec![data.len()],
            });
        }
        let data = match dtype {
            DType::F32 => data,
            DType::F16 => round_f16(data),
        };
        self.index.insert(name.to_string(), self.entries.len());
        self.entries.push(Entry {
            name: name.to_string(),
            dtype,
            dims: dims.to_vec(),
            data,
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.index.get(name).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn param_count(&self) -> usize {
        self.entries.iter().map(Entry::numel).sum()
    }

    /// Copy with every entry stored as binary16.
    pub fn to_f16(&self) -> Self {
        self.with_dtype(DType::F16)
    }

    pub fn with_dtype(&self, dtype: DType) -> Self {
        let mut out = Self::new();
        for e in &self.entries {
            out.insert(&e.name, &e.dims, e.data.clone(), dtype)
                .expect("entries of a valid archive stay valid");
        }
        out
    }

    fn remove(&mut self, name: &str) -> Option<Entry> {
        let i = self.index.remove(name)?;
        let e = self.entries.remove(i);
        for v in self.index.values_mut() {
            if *v > i {
                *v -= 1;
            }
        }
        Some(e)
    }

    fn replace_data(&mut self, name: &str, data: Vec<f32>) {
        let i = self.index[name];
        let e = &mut self.entries[i];
        e.dtype = DType::F32;
        e.data = data;
    }

    /// Serialized size in bytes.
    pub fn byte_len(&self) -> usize {
        HEADER_LEN
            + self
                .entries
                .iter()
                .map(|e| 2 + e.name.len() + 2 + 4 * e.dims.len() + e.byte_len())
                .sum::<usize>()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.byte_len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&(e.name.len() as u16).to_le_bytes());
            out.extend_from_slice(e.name.as_bytes());
            out.push(e.dtype.code());
            out.push(e.dims.len() as u8);
            for &d in &e.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            match e.dtype {
                DType::F32 => e.data.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
                DType::F16 => e
                    .data
                    .iter()
                    .for_each(|v| out.extend_from_slice(&f16::from_f32(*v).to_le_bytes())),
            }
        }
        out
    }

    /// Parses an archive exactly as stored; no batch-norm folding.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = r.u16("version")?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let count = r.u32("entry count")?;
        let mut archive = Self::new();
        for i in 0..count {
            let name_len = r.u16("name length")? as usize;
            let name = std::str::from_utf8(r.take(name_len, "name")?)
                .map_err(|_| Error::Archive(format!("entry {i} name is not UTF-8")))?
                .to_string();
            let dtype = DType::from_code(r.u8("dtype")?)?;
            let ndim = r.u8("rank")? as usize;
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(r.u32("dims")? as usize);
            }
            let numel = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .and_then(|n| n.checked_mul(dtype.size()).map(|b| (n, b)))
                .ok_or_else(|| Error::Archive(format!("`{name}` dims overflow")))?;
            let payload = r.take(numel.1, &name)?;
            let data: Vec<f32> = match dtype {
                DType::F32 => payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect(),
                DType::F16 => payload
                    .chunks_exact(2)
                    .map(|c| f16::from_le_bytes(c.try_into().expect("2 bytes")).to_f32())
                    .collect(),
            };
            if archive.index.contains_key(&name) {
                return Err(Error::DuplicateName(name));
            }
            archive.index.insert(name.clone(), archive.entries.len());
            archive.entries.push(Entry {
                name,
                dtype,
                dims,
                data,
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::Archive(format!(
                "{} trailing bytes after the last entry",
                bytes.len() - r.pos
            )));
        }
        Ok(archive)
    }

    /// Folds every `P.bn.{weight,bias,running_mean,running_var}` group into
    /// the convolution `P.weight` / `P.bias`. Returns the folded prefixes.
    pub fn fold_batchnorm(&mut self) -> Result<Vec<String>> {
        let prefixes: Vec<String> = self
            .names()
            .filter_map(|n| n.strip_suffix(".bn.running_var"))
            .map(str::to_string)
            .collect();
        for p in &prefixes {
            let bn = |k: &str| format!("{p}.bn.{k}");
            let w_name = format!("{p}.weight");
            let b_name = format!("{p}.bias");
            let weight = self
                .get(&w_name)
                .ok_or_else(|| Error::MissingWeight(w_name.clone()))?
                .clone();
            let out = *weight.dims.first().unwrap_or(&0);
            let vec_of = |k: &str| -> Result<Vec<f32>> {
                let e = self.get(&bn(k)).ok_or_else(|| Error::MissingWeight(bn(k)))?;
                if e.numel() != out {
                    return Err(Error::WeightShape {
                        name: bn(k),
                        expected: vec![out],
                        found: e.dims.clone(),
                    });
                }
                Ok(e.data.clone())
            };
            let gamma = vec_of("weight")?;
            let beta = vec_of("bias")?;
            let mean = vec_of("running_mean")?;
            let var = vec_of("running_var")?;
            let eps = match self.get(&bn("eps")) {
                Some(e) if e.numel() == 1 => e.data[0],
                Some(e) => {
                    return Err(Error::WeightShape {
                        name: bn("eps"),
                        expected: vec![1],
                        found: e.dims.clone(),
                    })
                }
                None => DEFAULT_BN_EPS,
            };
            let bias = match self.get(&b_name) {
                Some(e) if e.numel() == out => e.data.clone(),
                Some(e) => {
                    return Err(Error::WeightShape {
                        name: b_name,
                        expected: vec![out],
                        found: e.dims.clone(),
                    })
                }
                None => vec![0.0; out],
            };
            let per = weight.numel().checked_div(out).unwrap_or(0);
            let mut w = weight.data;
            let mut b = vec![0.0f32; out];
            for o in 0..out {
                let s = gamma[o] / (var[o] + eps).sqrt();
                w[o * per..(o + 1) * per].iter_mut().for_each(|v| *v *= s);
                b[o] = (bias[o] - mean[o]) * s + beta[o];
            }
            self.replace_data(&w_name, w);
            if self.get(&b_name).is_some() {
                self.replace_data(&b_name, b);
            } else {
                self.insert(&b_name, &[out], b, DType::F32)?;
            }
            for k in [
                "weight",
                "bias",
                "running_mean",
                "running_var",
                "eps",
                "num_batches_tracked",
            ] {
                self.remove(&bn(k));
            }
        }
        Ok(prefixes)
    }

    /// Names the graph consumes that are missing here, and names here the
    /// graph does not consume.
    pub fn diff_manifest(&self, manifest: &[ParamShape]) -> (Vec<String>, Vec<String>) {
        let wanted: HashMap<&str, ()> = manifest.iter().map(|p| (p.name.as_str(), ())).collect();
        let missing = manifest
            .iter()
            .filter(|p| self.get(&p.name).is_none())
            .map(|p| p.name.clone())
            .collect();
        let unused = self
            .names()
            .filter(|n| !wanted.contains_key(n))
            .map(str::to_string)
            .collect();
        (missing, unused)
    }
}

impl ParamSource for WeightArchive {
    fn param(&self, name: &str, dims: &[usize]) -> Result<&[f32]> {
        let e = self.get(name).ok_or_else(|| Error::MissingWeight(name.to_string()))?;
        if e.dims != dims {
            return Err(Error::WeightShape {
                name: name.to_string(),
                expected: dims.to_vec(),
                found: e.dims.clone(),
            });
        }
        Ok(&e.data)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Truncated(format!(
                    "needed {n} bytes for {what} at offset {}, {} left",
                    self.pos,
                    self.bytes.len() - self.pos
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

/// Reads an archive and folds any batch-norm groups.
pub fn read_weights(path: &Path) -> Result<WeightArchive> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut archive = WeightArchive::from_bytes(&bytes)?;
    archive.fold_batchnorm()?;
    Ok(archive)
}

pub fn write_weights(archive: &WeightArchive, path: &Path) -> Result<()> {
    fs::write(path, archive.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Bound of the uniform initializer for a weight of this shape.
pub fn init_bound(shape: &ParamShape) -> f64 {
    1.0 / (shape.fan_in() as f64).sqrt()
}

/// Every manifest entry, weights drawn from U(−1/√fan_in, 1/√fan_in) and
/// biases zero.
pub fn init_random(graph: &Graph, seed: u64) -> WeightArchive {
    init_random_manifest(&graph.manifest(), seed)
}

pub fn init_random_manifest(manifest: &[ParamShape], seed: u64) -> WeightArchive {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut archive = WeightArchive::new();
    for p in manifest {
        let data = if p.name.ends_with(".bias") {
            vec![0.0; p.numel()]
        } else {
            let a = init_bound(p);
            (0..p.numel()).map(|_| rng.gen_range(-a..a) as f32).collect()
        };
        archive
            .insert(&p.name, &p.dims, data, DType::F32)
            .expect("manifest names are unique");
    }
    archive
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_archive_is_header_only() {
        let bytes = WeightArchive::new().to_bytes();
        assert_eq!(bytes, b"GAAW\x01\x00\x00\x00\x00\x00");
        assert_eq!(bytes.len(), HEADER_LEN);
    }

    #[test]
    fn errors_are_distinct() {
        assert!(matches!(
            WeightArchive::from_bytes(b"GAAX\x01\x00\0\0\0\0"),
            Err(Error::BadMagic(_))
        ));
        assert!(matches!(
            WeightArchive::from_bytes(b"GAAW\x01\x00\x01\0\0\0"),
            Err(Error::Truncated(_))
        ));
        let mut a = WeightArchive::new();
        a.insert("x", &[1], vec![1.0], DType::F32).unwrap();
        assert!(matches!(
            a.insert("x", &[1], vec![1.0], DType::F32),
            Err(Error::DuplicateName(_))
        ));
        let mut bytes = a.to_bytes();
        let entry = bytes[HEADER_LEN..].to_vec();
        bytes.extend_from_slice(&entry);
        bytes[6] = 2;
        assert!(matches!(
            WeightArchive::from_bytes(&bytes),
            Err(Error::DuplicateName(_))
        ));
    }

    #[test]
    fn f16_round_trip() {
        let mut a = WeightArchive::new();
        a.insert("w", &[3], vec![0.1, -2.5, 1e-3], DType::F16).unwrap();
        let back = WeightArchive::from_bytes(&a.to_bytes()).unwrap();
        assert_eq!(back, a);
        assert_eq!(back.get("w").unwrap().data[1], -2.5);
    }

    #[test]
    fn fold_into_bias_free_conv() {
        let mut a = WeightArchive::new();
        a.insert("c.weight", &[2, 1, 1, 1], vec![2.0, 3.0], DType::F32).unwrap();
        a.insert("c.bn.weight", &[2], vec![1.0, 2.0], DType::F32).unwrap();
        a.insert("c.bn.bias", &[2], vec![0.5, 0.0], DType::F32).unwrap();
        a.insert("c.bn.running_mean", &[2], vec![0.0, 1.0], DType::F32).unwrap();
        a.insert("c.bn.running_var", &[2], vec![1.0, 4.0], DType::F32).unwrap();
        a.insert("c.bn.eps", &[1], vec![0.0], DType::F32).unwrap();
        assert_eq!(a.fold_batchnorm().unwrap(), vec!["c".to_string()]);
        assert_eq!(a.get("c.weight").unwrap().data, vec![2.0, 3.0]);
        assert_eq!(a.get("c.bias").unwrap().data, vec![0.5, -1.0]);
        assert_eq!(a.len(), 2);
    }
}
