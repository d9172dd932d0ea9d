//! Sign quantization and bit-packed binary codes.
//!
//! An embedding becomes a code by taking elementwise signs: coordinate k maps
//! to +1 when it is ≥ 0 (sign(0) = +1) and −1 otherwise. Codes are stored
//! packed, 64 coordinates per machine word, with bit 1 encoding +1 and bit 0
//! encoding −1.
//!
//! # Bit order
//!
//! LSB-first throughout: coordinate 0 is the least significant bit of byte 0
//! (and of word 0), coordinate 8 starts byte 1, and so on. Padding bits past
//! the code length are always zero, so word-wise XOR + popcount gives exact
//! Hamming distances.
//!
//! # Code file format ("DCWB")
//!
//! | Field   | Type                    | Notes                         |
//! |---------|-------------------------|-------------------------------|
//! | magic   | 4 bytes `"DCWB"`        |                               |
//! | version | u32                     | currently 1                   |
//! | count   | u32                     | number of codes               |
//! | bits    | u32                     | code length L                 |
//! | codes   | count × ⌈bits/8⌉ bytes  | LSB-first, padding zero       |
//! | ids     | count × u32             | sample id per code, in order  |
//!
//! All integers little-endian.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fsio::{atomic_write, Reader, Writer};
use crate::net::EmbeddingNet;

const DCWB_MAGIC: &[u8; 4] = b"DCWB";
const DCWB_VERSION: u32 = 1;

/// A bit-packed element of {−1,+1}^L.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryCode {
    words: Vec<u64>,
    bits: usize,
}

impl BinaryCode {
    /// Code length L.
    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Packed words, LSB-first; padding bits beyond L are zero.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// The coordinate at position `k` as +1/−1.
    pub fn get(&self, k: usize) -> i8 {
        debug_assert!(k < self.bits);
        if (self.words[k / 64] >> (k % 64)) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// The packed byte representation used by the DCWB format
    /// (⌈bits/8⌉ bytes, LSB-first).
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.bits.div_ceil(8);
        (0..n)
            .map(|j| ((self.words[j / 8] >> (8 * (j % 8))) & 0xFF) as u8)
            .collect()
    }

    /// Rebuilds a code from its packed bytes, validating length and that all
    /// padding bits are zero.
    pub fn from_bytes(bytes: &[u8], bits: usize) -> Result<BinaryCode> {
        let expect = bits.div_ceil(8);
        if bytes.len() != expect {
            return Err(Error::Data(format!(
                "code needs {expect} bytes for {bits} bits, got {}",
                bytes.len()
            )));
        }
        let mut words = vec![0u64; bits.div_ceil(64)];
        for (j, &b) in bytes.iter().enumerate() {
            words[j / 8] |= (b as u64) << (8 * (j % 8));
        }
        let code = BinaryCode { words, bits };
        if code.padding_is_zero() {
            Ok(code)
        } else {
            Err(Error::Data(format!(
                "code has nonzero padding bits past length {bits}"
            )))
        }
    }

    fn padding_is_zero(&self) -> bool {
        let tail = self.bits % 64;
        if tail == 0 || self.words.is_empty() {
            return true;
        }
        self.words[self.words.len() - 1] >> tail == 0
    }
}

/// Packs a ±1 vector into a [`BinaryCode`] (+1 → bit 1, −1 → bit 0).
pub fn pack(signs: &[i8]) -> Result<BinaryCode> {
    let mut words = vec![0u64; signs.len().div_ceil(64)];
    for (k, &s) in signs.iter().enumerate() {
        match s {
            1 => words[k / 64] |= 1u64 << (k % 64),
            -1 => {}
            other => {
                return Err(Error::Config(format!(
                    "code entry at position {k} is {other}, expected +1 or -1"
                )))
            }
        }
    }
    Ok(BinaryCode {
        words,
        bits: signs.len(),
    })
}

/// Unpacks a [`BinaryCode`] back into its ±1 vector.
pub fn unpack(code: &BinaryCode) -> Vec<i8> {
    (0..code.bits()).map(|k| code.get(k)).collect()
}

/// Signs of an embedding matrix, one code per row (sign(0) = +1).
pub fn encode_embeddings(embeddings: &Array2<f64>) -> Vec<BinaryCode> {
    embeddings
        .rows()
        .into_iter()
        .map(|row| {
            let signs: Vec<i8> = row.iter().map(|&v| if v >= 0.0 { 1 } else { -1 }).collect();
            pack(&signs).expect("signs are ±1 by construction")
        })
        .collect()
}

/// Runs inputs through the network and quantizes the embeddings to codes.
pub fn encode(net: &EmbeddingNet, inputs: &Array2<f64>) -> Result<Vec<BinaryCode>> {
    let embeddings = net.embed(inputs)?;
    Ok(encode_embeddings(&embeddings))
}

/// Writes codes and their sample ids to a DCWB file (atomic).
pub fn write_codes(path: &Path, codes: &[BinaryCode], ids: &[u32]) -> Result<()> {
    if codes.len() != ids.len() {
        return Err(Error::Config(format!(
            "{} codes but {} ids",
            codes.len(),
            ids.len()
        )));
    }
    let bits = codes.first().map_or(0, |c| c.bits());
    for (n, code) in codes.iter().enumerate() {
        if code.bits() != bits {
            return Err(Error::Data(format!(
                "codes have mixed lengths: code {n} has {} bits, expected {bits}",
                code.bits()
            )));
        }
    }
    let mut w = Writer::new(DCWB_MAGIC, DCWB_VERSION);
    w.u32(codes.len() as u32);
    w.u32(bits as u32);
    for code in codes {
        w.buf.extend_from_slice(&code.to_bytes());
    }
    for &id in ids {
        w.u32(id);
    }
    atomic_write(path, &w.buf)
}

/// Reads a DCWB file back into codes and ids, validating magic, version,
/// length consistency, and zero padding.
pub fn read_codes(path: &Path) -> Result<(Vec<BinaryCode>, Vec<u32>)> {
    let buf = std::fs::read(path)?;
    let mut r = Reader::new(&buf, "DCWB");
    r.magic(DCWB_MAGIC)?;
    let version = r.u32()?;
    if version != DCWB_VERSION {
        return Err(Error::Data(format!(
            "unsupported DCWB version {version}, expected {DCWB_VERSION}"
        )));
    }
    let count = r.u32()? as usize;
    let bits = r.u32()? as usize;
    if count > 0 && bits == 0 {
        return Err(Error::Data("code file declares zero-bit codes".into()));
    }
    let bytes_per_code = bits.div_ceil(8);
    let mut codes = Vec::with_capacity(count);
    for _ in 0..count {
        codes.push(BinaryCode::from_bytes(r.bytes(bytes_per_code)?, bits)?);
    }
    let mut ids = Vec::with_capacity(count);
    for _ in 0..count {
        ids.push(r.u32()?);
    }
    r.finish()?;
    Ok((codes, ids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_net, Activation, EmbeddingNet, Layer};
    use ndarray::{array, Array1};
    use proptest::prelude::*;

    #[test]
    fn pack_alternating_is_0x55() {
        let code = pack(&[1, -1, 1, -1, 1, -1, 1, -1]).unwrap();
        assert_eq!(code.to_bytes(), vec![0x55]);
    }

    #[test]
    fn pack_all_minus_one_l12_is_zero_bytes() {
        let code = pack(&[-1; 12]).unwrap();
        assert_eq!(code.to_bytes(), vec![0x00, 0x00]);
    }

    #[test]
    fn pack_rejects_non_sign_entry() {
        assert!(matches!(pack(&[1, 0, -1]), Err(Error::Config(_))));
    }

    #[test]
    fn unpack_round_trips_standard_lengths() {
        for bits in [12usize, 16, 24, 32, 48, 64] {
            let signs: Vec<i8> = (0..bits).map(|k| if k % 3 == 0 { 1 } else { -1 }).collect();
            let code = pack(&signs).unwrap();
            assert_eq!(code.bits(), bits);
            assert_eq!(unpack(&code), signs);
        }
    }

    #[test]
    fn encode_sign_convention_with_zero() {
        // Identity net: embeddings equal inputs. (0.3, −0.7, 0.0) → (+1, −1, +1).
        let net = EmbeddingNet::from_layers(vec![Layer {
            weights: Array2::eye(3),
            biases: Array1::zeros(3),
            activation: Activation::None,
        }])
        .unwrap();
        let codes = encode(&net, &array![[0.3, -0.7, 0.0]]).unwrap();
        assert_eq!(unpack(&codes[0]), vec![1, -1, 1]);
    }

    #[test]
    fn negating_final_layer_negates_codes() {
        let mut net = init_net(&[4, 6, 5], 77).unwrap();
        let inputs = {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(78);
            Array2::from_shape_fn((10, 4), |_| rng.random_range(-2.0..2.0))
        };
        let emb = net.embed(&inputs).unwrap();
        assert!(
            emb.iter().all(|&v| v != 0.0),
            "test premise: no exactly-zero coordinates"
        );
        let codes = encode(&net, &inputs).unwrap();
        let last = net.layers().len() - 1;
        let flipped_layers: Vec<Layer> = net
            .layers()
            .iter()
            .enumerate()
            .map(|(k, l)| {
                if k == last {
                    Layer {
                        weights: l.weights.mapv(|v| -v),
                        biases: l.biases.mapv(|v| -v),
                        activation: l.activation,
                    }
                } else {
                    l.clone()
                }
            })
            .collect();
        net = EmbeddingNet::from_layers(flipped_layers).unwrap();
        let negated = encode(&net, &inputs).unwrap();
        for (a, b) in codes.iter().zip(&negated) {
            let ua = unpack(a);
            let ub = unpack(b);
            assert!(ua.iter().zip(&ub).all(|(x, y)| *x == -*y));
        }
    }

    #[test]
    fn encoding_is_bitwise_stable() {
        let net = init_net(&[3, 8, 16], 79).unwrap();
        let inputs = array![[0.1, -0.2, 0.3], [1.0, 2.0, -3.0]];
        assert_eq!(encode(&net, &inputs).unwrap(), encode(&net, &inputs).unwrap());
    }

    #[test]
    fn code_file_round_trip() {
        let codes: Vec<BinaryCode> = (0..5)
            .map(|n| {
                let signs: Vec<i8> = (0..20).map(|k| if (k + n) % 2 == 0 { 1 } else { -1 }).collect();
                pack(&signs).unwrap()
            })
            .collect();
        let ids: Vec<u32> = vec![3, 1, 4, 1 + 4, 9];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codes.dcwb");
        write_codes(&path, &codes, &ids).unwrap();
        let (codes2, ids2) = read_codes(&path).unwrap();
        assert_eq!(codes, codes2);
        assert_eq!(ids, ids2);
    }

    #[test]
    fn code_file_empty_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codes.dcwb");
        write_codes(&path, &[], &[]).unwrap();
        let (codes, ids) = read_codes(&path).unwrap();
        assert!(codes.is_empty());
        assert!(ids.is_empty());
    }

    #[test]
    fn code_file_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codes.dcwb");
        std::fs::write(&path, b"DCWX\x01\x00\x00\x00").unwrap();
        assert!(matches!(read_codes(&path), Err(Error::Data(_))));
    }

    #[test]
    fn code_file_rejects_truncation() {
        let codes = vec![pack(&[1; 16]).unwrap(), pack(&[-1; 16]).unwrap()];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codes.dcwb");
        write_codes(&path, &codes, &[0, 1]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        match read_codes(&path) {
            Err(Error::Data(msg)) => assert!(msg.contains("truncated"), "{msg}"),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn code_file_rejects_nonzero_padding() {
        let codes = vec![pack(&[-1; 12]).unwrap()];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codes.dcwb");
        write_codes(&path, &codes, &[0]).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Code bytes start after magic(4)+version(4)+count(4)+bits(4) = 16;
        // set a padding bit in the second byte (bits 12..16 are padding).
        bytes[17] = 0x80;
        std::fs::write(&path, &bytes).unwrap();
        match read_codes(&path) {
            Err(Error::Data(msg)) => assert!(msg.contains("padding"), "{msg}"),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn write_rejects_mixed_lengths() {
        let codes = vec![pack(&[1; 8]).unwrap(), pack(&[1; 16]).unwrap()];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("codes.dcwb");
        assert!(matches!(
            write_codes(&path, &codes, &[0, 1]),
            Err(Error::Data(_))
        ));
    }

    proptest! {
        /// unpack(pack(v)) is the identity for arbitrary ±1 vectors.
        #[test]
        fn pack_unpack_identity(v in prop::collection::vec(prop::bool::ANY, 1..130)) {
            let signs: Vec<i8> = v.iter().map(|&b| if b { 1 } else { -1 }).collect();
            let code = pack(&signs).unwrap();
            prop_assert_eq!(unpack(&code), signs);
            prop_assert!(code.padding_is_zero());
        }

        /// to_bytes/from_bytes round-trips and preserves the code exactly.
        #[test]
        fn byte_round_trip(v in prop::collection::vec(prop::bool::ANY, 1..130)) {
            let signs: Vec<i8> = v.iter().map(|&b| if b { 1 } else { -1 }).collect();
            let code = pack(&signs).unwrap();
            let back = BinaryCode::from_bytes(&code.to_bytes(), code.bits()).unwrap();
            prop_assert_eq!(code, back);
        }
    }
}
