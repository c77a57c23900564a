//! PEMB binary layout, all integers little-endian:
//!
//! ```text
//! magic "PEMB" | version u32 = 1 | dim u32 | count u64
//! provenance_len u16 | provenance UTF-8
//! count x { id_len u16 | id UTF-8 | token_count u32 | token_count*dim f32 }
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{EmbedError, EmbeddingStore, Result, TokenEmbeddingMatrix};

pub const MAGIC: [u8; 4] = *b"PEMB";
pub const VERSION: u32 = 1;

pub fn load_store(path: &Path) -> Result<EmbeddingStore> {
    let io = |source| EmbedError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut bytes = Vec::new();
    File::open(path)
        .map_err(io)?
        .read_to_end(&mut bytes)
        .map_err(io)?;
    read_store(&bytes)
}

pub fn save_store(store: &EmbeddingStore, path: &Path) -> Result<()> {
    let io = |source| EmbedError::Io {
        path: path.to_path_buf(),
        source,
    };
    let bytes = write_store(store)?;
    let mut writer = BufWriter::new(File::create(path).map_err(io)?);
    writer.write_all(&bytes).map_err(io)?;
    writer.flush().map_err(io)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(EmbedError::Truncated(what))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("slice has length N"))
    }

    fn u16(&mut self, what: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array(what)?))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(what)?))
    }

    fn string(&mut self, what: &'static str) -> Result<String> {
        let len = self.u16(what)? as usize;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| EmbedError::InvalidUtf8(what))
    }
}

/// Parses a whole PEMB image, validating magic, version, row contents and
/// id uniqueness.
pub fn read_store(bytes: &[u8]) -> Result<EmbeddingStore> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.array("magic")?;
    if magic != MAGIC {
        return Err(EmbedError::BadMagic(magic));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(EmbedError::UnsupportedVersion(version));
    }
    let dim = cur.u32("dim")? as usize;
    let count = cur.u64("count")?;
    let provenance = cur.string("provenance")?;
    let mut store = EmbeddingStore::new(dim, provenance)?;
    for _ in 0..count {
        let id = cur.string("record id")?;
        let rows = cur.u32("token count")? as usize;
        let n_bytes = rows
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .ok_or(EmbedError::Truncated("embedding values"))?;
        let raw = cur.take(n_bytes, "embedding values")?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect();
        store.insert(TokenEmbeddingMatrix::new(id, dim, data)?)?;
    }
    let rest = bytes.len() - cur.pos;
    if rest != 0 {
        return Err(EmbedError::TrailingBytes(rest));
    }
    Ok(store)
}

fn push_str(out: &mut Vec<u8>, text: &str, what: &'static str) -> Result<()> {
    let len = u16::try_from(text.len()).map_err(|_| EmbedError::TooLong {
        what,
        len: text.len(),
    })?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    Ok(())
}

/// Serializes the store in insertion order.
pub fn write_store(store: &EmbeddingStore) -> Result<Vec<u8>> {
    let dim = u32::try_from(store.dim())
        .map_err(|_| EmbedError::InvalidConfig("dim exceeds u32".into()))?;
    let payload: usize = store
        .iter()
        .map(|m| 6 + m.sentence_id().len() + 4 * m.data().len())
        .sum();
    let mut out = Vec::with_capacity(22 + store.provenance().len() + payload);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&(store.len() as u64).to_le_bytes());
    push_str(&mut out, store.provenance(), "provenance")?;
    for matrix in store.iter() {
        push_str(&mut out, matrix.sentence_id(), "record id")?;
        let rows = u32::try_from(matrix.rows())
            .map_err(|_| EmbedError::InvalidConfig("token count exceeds u32".into()))?;
        out.extend_from_slice(&rows.to_le_bytes());
        for value in matrix.data() {
            out.extend_from_slice(&value.to_le_bytes());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EmbeddingStore {
        let mut store = EmbeddingStore::new(3, "unit-test").unwrap();
        store
            .insert(
                TokenEmbeddingMatrix::new("a:src", 3, vec![1.0, 2.0, 3.0, -0.5, 0.25, 1e-30])
                    .unwrap(),
            )
            .unwrap();
        store
            .insert(TokenEmbeddingMatrix::new("ক:cand", 3, vec![0.0, 0.0, -1.0]).unwrap())
            .unwrap();
        store
    }

    #[test]
    fn header_layout() {
        let bytes = write_store(&sample()).unwrap();
        assert_eq!(&bytes[..4], b"PEMB");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 2);
        assert_eq!(u16::from_le_bytes(bytes[20..22].try_into().unwrap()), 9);
        assert_eq!(&bytes[22..31], b"unit-test");
        // first record id length, id, token count
        assert_eq!(u16::from_le_bytes(bytes[31..33].try_into().unwrap()), 5);
        assert_eq!(&bytes[33..38], b"a:src");
        assert_eq!(u32::from_le_bytes(bytes[38..42].try_into().unwrap()), 2);
        assert_eq!(f32::from_le_bytes(bytes[42..46].try_into().unwrap()), 1.0);
        let expected_len = 22 + 9 + (2 + 5 + 4 + 24) + (2 + "ক:cand".len() + 4 + 12);
        assert_eq!(bytes.len(), expected_len);
    }

    #[test]
    fn round_trip_is_bitwise() {
        let store = sample();
        let bytes = write_store(&store).unwrap();
        let back = read_store(&bytes).unwrap();
        assert_eq!(back, store);
        assert_eq!(write_store(&back).unwrap(), bytes);
    }

    #[test]
    fn corrupted_inputs() {
        let bytes = write_store(&sample()).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_store(&bad), Err(EmbedError::BadMagic(_))));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(
            read_store(&bad),
            Err(EmbedError::UnsupportedVersion(2))
        ));
        for cut in [0, 3, 10, 21, 30, 40, bytes.len() - 1] {
            assert!(
                matches!(read_store(&bytes[..cut]), Err(EmbedError::Truncated(_))),
                "cut at {cut}"
            );
        }
        let mut bad = bytes.clone();
        bad.push(0);
        assert!(matches!(
            read_store(&bad),
            Err(EmbedError::TrailingBytes(1))
        ));
        let mut bad = bytes.clone();
        bad[8] = 0;
        assert!(matches!(read_store(&bad), Err(EmbedError::ZeroDim)));
    }

    #[test]
    fn duplicate_ids_rejected_on_load() {
        let mut store = EmbeddingStore::new(3, "unit-test").unwrap();
        store
            .insert(TokenEmbeddingMatrix::new("a:src", 3, vec![1.0, 2.0, 3.0]).unwrap())
            .unwrap();
        store
            .insert(TokenEmbeddingMatrix::new("b:src", 3, vec![0.0, 0.0, -1.0]).unwrap())
            .unwrap();
        let mut bytes = write_store(&store).unwrap();
        // rename the second record so it collides with the first
        let second = bytes.windows(5).rposition(|w| w == b"b:src").unwrap();
        bytes[second] = b'a';
        assert!(matches!(read_store(&bytes), Err(EmbedError::DuplicateId(id)) if id == "a:src"));
    }

    #[test]
    fn zero_row_record_rejected() {
        let mut store_bytes = Vec::new();
        store_bytes.extend_from_slice(b"PEMB");
        store_bytes.extend_from_slice(&1u32.to_le_bytes());
        store_bytes.extend_from_slice(&2u32.to_le_bytes());
        store_bytes.extend_from_slice(&1u64.to_le_bytes());
        store_bytes.extend_from_slice(&0u16.to_le_bytes());
        store_bytes.extend_from_slice(&1u16.to_le_bytes());
        store_bytes.push(b'x');
        store_bytes.extend_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            read_store(&store_bytes),
            Err(EmbedError::EmptyMatrix { .. })
        ));
    }
}
