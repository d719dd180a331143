//! Flat binary embedding format: `EMB1`, u32 r, u32 d (little-endian), r·d f64
//! values column-major, then d length-prefixed (u32) UTF-8 tokens.

use std::io::{Read, Write};

use super::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"EMB1";

pub fn write_embeddings<T: Real, W: Write>(m: &EmbeddingMatrix<T>, mut out: W) -> Result<()> {
    out.write_all(EMBEDDING_MAGIC)?;
    out.write_all(&(m.dim() as u32).to_le_bytes())?;
    out.write_all(&(m.vocab_size() as u32).to_le_bytes())?;
    for v in m.values() {
        out.write_all(&v.as_f64().to_le_bytes())?;
    }
    for tok in m.tokens() {
        out.write_all(&(tok.len() as u32).to_le_bytes())?;
        out.write_all(tok.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_embeddings<T: Real, R: Read>(mut input: R) -> Result<EmbeddingMatrix<T>> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != EMBEDDING_MAGIC {
        return Err(Error::Format(format!("bad embedding magic {magic:?}")));
    }
    let r = read_u32(&mut input)? as usize;
    let d = read_u32(&mut input)? as usize;
    let mut values = Vec::with_capacity(r * d);
    let mut b = [0u8; 8];
    for _ in 0..r * d {
        input.read_exact(&mut b)?;
        values.push(T::of(f64::from_le_bytes(b)));
    }
    let mut tokens = Vec::with_capacity(d);
    for _ in 0..d {
        let len = read_u32(&mut input)? as usize;
        let mut s = vec![0u8; len];
        input.read_exact(&mut s)?;
        tokens.push(String::from_utf8(s).map_err(|e| Error::Format(e.to_string()))?);
    }
    EmbeddingMatrix::from_columns(r, d, values, tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_bit_exact() {
        let m = EmbeddingMatrix::from_columns(
            2,
            2,
            vec![1.0f64, 2.0, 3.0, 4.0],
            vec!["<unk>".into(), "héllo".into()],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_embeddings(&m, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"EMB1");
        assert_eq!(&buf[4..8], &2u32.to_le_bytes());
        assert_eq!(&buf[8..12], &2u32.to_le_bytes());
        assert_eq!(&buf[12..20], &1.0f64.to_le_bytes());
        assert_eq!(&buf[36..44], &4.0f64.to_le_bytes());
        assert_eq!(&buf[44..48], &5u32.to_le_bytes());
        assert_eq!(buf.len(), 44 + 4 + 5 + 4 + "héllo".len());
        let back: EmbeddingMatrix<f64> = read_embeddings(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn bad_magic_is_rejected() {
        assert!(matches!(
            read_embeddings::<f64, _>(&b"EMB2\0\0\0\0\0\0\0\0"[..]),
            Err(Error::Format(_))
        ));
    }
}
