//! Per-clip embedding tables and their on-disk encodings.
//!
//! Binary layout (little-endian throughout):
//!
//! ```text
//! b"OBYEMB01"  u32 dim
//! repeated until EOF: u16 id_len, id_len bytes of UTF-8 clip id, dim x f32
//! ```
//!
//! The CSV encoding is one row per clip, `clip_id,v0,...,v{dim-1}`, with an
//! optional header row whose first field is `clip_id`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"OBYEMB01";

/// Fixed-dimension embedding per clip id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    rows: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            rows: BTreeMap::new(),
        })
    }

    /// Adds a row after checking its length, finiteness and id uniqueness.
    pub fn insert(&mut self, clip_id: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let clip = clip_id.into();
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                clip,
                expected: self.dim,
                found: vector.len(),
            });
        }
        if let Some(index) = vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { clip, index });
        }
        if self.rows.contains_key(&clip) {
            return Err(Error::DuplicateEmbedding(clip));
        }
        self.rows.insert(clip, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, clip_id: &str) -> Option<&[f32]> {
        self.rows.get(clip_id).map(Vec::as_slice)
    }

    /// Row widened to `f64`, or [`Error::MissingEmbedding`].
    pub fn vector(&self, clip_id: &str) -> Result<Vec<f64>> {
        self.get(clip_id)
            .map(|v| v.iter().map(|&x| f64::from(x)).collect())
            .ok_or_else(|| Error::MissingEmbedding(clip_id.to_owned()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.rows.len() * (self.dim * 4 + 16));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for (id, v) in &self.rows {
            let len = u16::try_from(id.len()).expect("clip id longer than 65535 bytes");
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    /// CSV encoding with a header row. `f32` values print in shortest
    /// round-trip form, so reading the CSV back is lossless.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("clip_id");
        for d in 0..self.dim {
            out.push_str(&format!(",v{d}"));
        }
        out.push('\n');
        for (id, v) in &self.rows {
            out.push_str(id);
            for x in v {
                out.push(',');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }
}

fn truncated(what: &str) -> Error {
    Error::MalformedRecord {
        line: 0,
        reason: format!("truncated binary embedding file while reading {what}"),
    }
}

/// Decodes the binary encoding; fails with [`Error::BadMagic`] when the
/// magic prefix is absent.
pub fn load_binary(bytes: &[u8]) -> Result<EmbeddingTable> {
    let body = bytes
        .strip_prefix(MAGIC.as_slice())
        .ok_or(Error::BadMagic)?;
    let (dim_bytes, mut rest) = body
        .split_at_checked(4)
        .ok_or_else(|| truncated("dimension"))?;
    let dim = u32::from_le_bytes(dim_bytes.try_into().unwrap()) as usize;
    let mut table = EmbeddingTable::new(dim)?;
    while !rest.is_empty() {
        let (len, tail) = rest
            .split_at_checked(2)
            .ok_or_else(|| truncated("id length"))?;
        let len = u16::from_le_bytes(len.try_into().unwrap()) as usize;
        let (id, tail) = tail
            .split_at_checked(len)
            .ok_or_else(|| truncated("clip id"))?;
        let id = std::str::from_utf8(id).map_err(|e| Error::MalformedRecord {
            line: 0,
            reason: format!("clip id is not UTF-8: {e}"),
        })?;
        let (payload, tail) = tail
            .split_at_checked(dim * 4)
            .ok_or_else(|| truncated("vector"))?;
        let v = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        table.insert(id, v)?;
        rest = tail;
    }
    Ok(table)
}

/// Decodes the CSV encoding. The dimension comes from the first data row.
pub fn load_csv(text: &str) -> Result<EmbeddingTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut table: Option<EmbeddingTable> = None;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::MalformedRecord {
            line: i + 1,
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if i == 0 && rec.get(0) == Some("clip_id") {
            continue;
        }
        let id = rec.get(0).unwrap_or_default();
        let v = rec
            .iter()
            .skip(1)
            .map(|f| f.parse::<f32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::MalformedRecord {
                line,
                reason: e.to_string(),
            })?;
        let t = match table.as_mut() {
            Some(t) => t,
            None => table.insert(EmbeddingTable::new(v.len())?),
        };
        t.insert(id, v)?;
    }
    table.ok_or(Error::EmptyInput)
}

/// Decodes either encoding, sniffing the binary magic.
pub fn load_embeddings(bytes: &[u8]) -> Result<EmbeddingTable> {
    if bytes.starts_with(MAGIC) {
        return load_binary(bytes);
    }
    match std::str::from_utf8(bytes) {
        Ok(text) => load_csv(text),
        Err(_) => Err(Error::BadMagic),
    }
}

/// Frame-level tokens of one clip from a frozen video encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTokenMatrix {
    pub clip_id: String,
    /// One row per frame, each of the embedding dimension.
    pub tokens: Vec<Vec<f32>>,
}

/// Adaptive max pooling over the frame axis: `out[d] = max_t tokens[t][d]`.
pub fn pool_frames(m: &FrameTokenMatrix) -> Result<Vec<f32>> {
    let first = m.tokens.first().ok_or(Error::EmptyMatrix)?;
    if first.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let mut out = first.clone();
    for row in &m.tokens[1..] {
        if row.len() != out.len() {
            return Err(Error::DimensionMismatch {
                clip: m.clip_id.clone(),
                expected: out.len(),
                found: row.len(),
            });
        }
        for (o, &x) in out.iter_mut().zip(row) {
            *o = o.max(x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn table(rows: &[(&str, Vec<f32>)]) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(rows[0].1.len()).unwrap();
        for (id, v) in rows {
            t.insert(*id, v.clone()).unwrap();
        }
        t
    }

    #[test]
    fn binary_512_three_rows() {
        let mut t = EmbeddingTable::new(512).unwrap();
        for (i, id) in ["a", "b", "c"].iter().enumerate() {
            t.insert(*id, (0..512).map(|d| (d * (i + 1)) as f32 * 0.5).collect())
                .unwrap();
        }
        let bytes = t.to_binary();
        assert_eq!(&bytes[..8], b"OBYEMB01");
        assert_eq!(&bytes[8..12], &512u32.to_le_bytes());
        let back = load_embeddings(&bytes).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back.dim(), 512);
        assert_eq!(back, t);
    }

    #[test]
    fn nan_component_is_rejected() {
        let mut t = EmbeddingTable::new(3).unwrap();
        assert!(matches!(
            t.insert("x", vec![0.0, f32::NAN, 1.0]),
            Err(Error::NonFiniteValue { index: 1, .. })
        ));
        assert!(matches!(
            load_csv("x,1,inf\n"),
            Err(Error::NonFiniteValue { index: 1, .. })
        ));
        // NaN smuggled in through the binary encoding.
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.push(b'z');
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            load_binary(&bytes),
            Err(Error::NonFiniteValue { index: 0, .. })
        ));
    }

    #[test]
    fn dimension_and_magic_errors() {
        assert!(matches!(
            load_csv("a,1,2\nb,1\n"),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1,
                ..
            })
        ));
        assert!(matches!(
            load_binary(b"OBYEMB02\0\0\0\0"),
            Err(Error::BadMagic)
        ));
        assert!(matches!(
            load_embeddings(&[0xff, 0xfe, 0x00]),
            Err(Error::BadMagic)
        ));
        let mut truncated = table(&[("a", vec![1.0, 2.0])]).to_binary();
        truncated.pop();
        assert!(matches!(
            load_binary(&truncated),
            Err(Error::MalformedRecord { .. })
        ));
    }

    #[test]
    fn csv_and_binary_agree_bit_for_bit() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut t = EmbeddingTable::new(17).unwrap();
        for i in 0..25 {
            let v: Vec<f32> = (0..17)
                .map(|_| rng.random_range(-1e3f32..1e3) * rng.random::<f32>().powi(9))
                .collect();
            t.insert(format!("clip{i}"), v).unwrap();
        }
        let from_bin = load_embeddings(&t.to_binary()).unwrap();
        let from_csv = load_embeddings(t.to_csv().as_bytes()).unwrap();
        for (id, v) in t.iter() {
            let bits = |x: &[f32]| x.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(from_bin.get(id).unwrap()), bits(v));
            assert_eq!(bits(from_csv.get(id).unwrap()), bits(v));
        }
    }

    #[test]
    fn pooling_examples() {
        let single = FrameTokenMatrix {
            clip_id: "c".into(),
            tokens: vec![vec![3.0, -1.0]],
        };
        assert_eq!(pool_frames(&single).unwrap(), vec![3.0, -1.0]);
        let two = FrameTokenMatrix {
            clip_id: "c".into(),
            tokens: vec![vec![1.0, -2.0], vec![0.0, 5.0]],
        };
        assert_eq!(pool_frames(&two).unwrap(), vec![1.0, 5.0]);
        let empty = FrameTokenMatrix {
            clip_id: "c".into(),
            tokens: vec![],
        };
        assert!(matches!(pool_frames(&empty), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn pooling_matches_column_scan() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let tokens: Vec<Vec<f32>> = (0..7)
            .map(|_| (0..4).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let mut expected = vec![f32::NEG_INFINITY; 4];
        for d in 0..4 {
            for row in &tokens {
                expected[d] = expected[d].max(row[d]);
            }
        }
        let m = FrameTokenMatrix {
            clip_id: "c".into(),
            tokens,
        };
        assert_eq!(pool_frames(&m).unwrap(), expected);
    }

    proptest! {
        #[test]
        fn pooling_is_permutation_invariant(
            rows in proptest::collection::vec(proptest::collection::vec(-1e6f32..1e6, 5), 1..12),
            rot in 0usize..12,
        ) {
            let mut shuffled = rows.clone();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a = pool_frames(&FrameTokenMatrix { clip_id: "c".into(), tokens: rows }).unwrap();
            let b = pool_frames(&FrameTokenMatrix { clip_id: "c".into(), tokens: shuffled }).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn binary_round_trip(
            rows in proptest::collection::btree_map("[a-z0-9]{1,10}", proptest::collection::vec(-1e30f32..1e30, 3), 1..10)
        ) {
            let mut t = EmbeddingTable::new(3).unwrap();
            for (k, v) in rows {
                t.insert(k, v).unwrap();
            }
            prop_assert_eq!(load_embeddings(&t.to_binary()).unwrap(), t.clone());
            prop_assert_eq!(load_embeddings(t.to_csv().as_bytes()).unwrap(), t);
        }
    }
}
