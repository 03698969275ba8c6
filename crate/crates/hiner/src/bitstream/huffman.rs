//! Canonical Huffman coding over small integer alphabets. Bits are packed
//! most-significant first.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Longest code the decoder accepts.
pub const MAX_CODE_LEN: u8 = 63;

/// Code lengths per symbol (0 = absent) and the canonical codes they imply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanTable {
    lengths: Vec<u8>,
    codes: Vec<u64>,
}

impl HuffmanTable {
    /// Rebuilds the canonical code from lengths, rejecting sets that violate
    /// the Kraft inequality.
    pub fn from_lengths(lengths: Vec<u8>) -> Result<Self> {
        if let Some(&l) = lengths.iter().find(|&&l| l > MAX_CODE_LEN) {
            return Err(Error::CorruptStream(format!("code length {l} exceeds {MAX_CODE_LEN}")));
        }
        // Kraft sum scaled by 2^MAX_CODE_LEN.
        let kraft: u128 = lengths.iter().filter(|&&l| l > 0).map(|&l| 1u128 << (MAX_CODE_LEN - l)).sum();
        if kraft > 1u128 << MAX_CODE_LEN {
            return Err(Error::CorruptStream("code lengths violate the Kraft inequality".into()));
        }
        let mut order: Vec<usize> = (0..lengths.len()).filter(|&s| lengths[s] > 0).collect();
        order.sort_by_key(|&s| (lengths[s], s));
        let mut codes = vec![0u64; lengths.len()];
        let mut code = 0u64;
        let mut prev_len = 0u8;
        for (i, &s) in order.iter().enumerate() {
            if i > 0 {
                code += 1;
            }
            code <<= lengths[s] - prev_len;
            prev_len = lengths[s];
            codes[s] = code;
        }
        Ok(Self { lengths, codes })
    }

    pub fn lengths(&self) -> &[u8] {
        &self.lengths
    }

    pub fn code(&self, symbol: usize) -> Option<(u64, u8)> {
        match self.lengths.get(symbol) {
            Some(&l) if l > 0 => Some((self.codes[symbol], l)),
            _ => None,
        }
    }

    /// `sum 2^-len` over present symbols.
    pub fn kraft_sum(&self) -> f64 {
        self.lengths.iter().filter(|&&l| l > 0).map(|&l| 0.5f64.powi(l as i32)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.iter().all(|&l| l == 0)
    }
}

/// Optimal code lengths for a histogram. Ties between equal weights go to the
/// lower symbol (leaves) or the earlier merge (internal nodes), so the result
/// is fully deterministic. A lone symbol gets length 1.
pub fn code_lengths(freqs: &[u64]) -> Vec<u8> {
    let mut lengths = vec![0u8; freqs.len()];
    let present: Vec<usize> = (0..freqs.len()).filter(|&s| freqs[s] > 0).collect();
    match present.len() {
        0 => return lengths,
        1 => {
            lengths[present[0]] = 1;
            return lengths;
        }
        _ => {}
    }
    // parent links over leaves then internal nodes
    let mut parent: Vec<usize> = vec![usize::MAX; freqs.len()];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = present.iter().map(|&s| Reverse((freqs[s], s))).collect();
    while heap.len() > 1 {
        let Reverse((wa, a)) = heap.pop().unwrap();
        let Reverse((wb, b)) = heap.pop().unwrap();
        let node = parent.len();
        parent.push(usize::MAX);
        parent[a] = node;
        parent[b] = node;
        heap.push(Reverse((wa + wb, node)));
    }
    for &s in &present {
        let mut depth = 0u8;
        let mut n = s;
        while parent[n] != usize::MAX {
            n = parent[n];
            depth += 1;
        }
        lengths[s] = depth;
    }
    lengths
}

#[derive(Default)]
struct BitWriter {
    bytes: Vec<u8>,
    bits: u64,
}

impl BitWriter {
    fn push(&mut self, code: u64, len: u8) {
        for i in (0..len).rev() {
            if self.bits % 8 == 0 {
                self.bytes.push(0);
            }
            if (code >> i) & 1 == 1 {
                *self.bytes.last_mut().unwrap() |= 0x80 >> (self.bits % 8);
            }
            self.bits += 1;
        }
    }
}

/// Entropy-coded symbols: the payload is padded with zero bits to a whole byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanPayload {
    pub table: HuffmanTable,
    pub bytes: Vec<u8>,
    pub bit_len: u64,
}

pub fn huffman_encode(symbols: &[u16], alphabet_size: usize) -> Result<HuffmanPayload> {
    let mut freqs = vec![0u64; alphabet_size];
    for &s in symbols {
        let slot = freqs
            .get_mut(s as usize)
            .ok_or_else(|| Error::InvalidInput(format!("symbol {s} outside alphabet of {alphabet_size}")))?;
        *slot += 1;
    }
    let table = HuffmanTable::from_lengths(code_lengths(&freqs))?;
    let mut w = BitWriter::default();
    for &s in symbols {
        let (code, len) = table.code(s as usize).expect("every seen symbol has a code");
        w.push(code, len);
    }
    Ok(HuffmanPayload { table, bytes: w.bytes, bit_len: w.bits })
}

pub fn huffman_decode(table: &HuffmanTable, payload: &[u8], bit_len: u64, count: usize) -> Result<Vec<u16>> {
    if bit_len > payload.len() as u64 * 8 {
        return Err(Error::CorruptStream(format!("{bit_len} bits declared but only {} bytes present", payload.len())));
    }
    if count == 0 {
        return if bit_len == 0 { Ok(Vec::new()) } else { Err(Error::CorruptStream("trailing bits".into())) };
    }
    if table.is_empty() {
        return Err(Error::CorruptStream("empty code table for a nonempty tensor".into()));
    }
    // canonical decoding: per length, the first code and where its symbols start
    let max_len = *table.lengths.iter().max().unwrap() as usize;
    let mut by_len = vec![0u64; max_len + 1];
    for &l in table.lengths.iter().filter(|&&l| l > 0) {
        by_len[l as usize] += 1;
    }
    let mut sorted: Vec<usize> = (0..table.lengths.len()).filter(|&s| table.lengths[s] > 0).collect();
    sorted.sort_by_key(|&s| (table.lengths[s], s));
    let mut first = vec![0u64; max_len + 1];
    let mut offset = vec![0u64; max_len + 1];
    let (mut code, mut index) = (0u64, 0u64);
    for l in 1..=max_len {
        code <<= 1;
        first[l] = code;
        offset[l] = index;
        code += by_len[l];
        index += by_len[l];
    }

    let mut out = Vec::with_capacity(count);
    let mut pos = 0u64;
    while out.len() < count {
        let (mut code, mut len) = (0u64, 0usize);
        loop {
            if pos >= bit_len {
                return Err(Error::CorruptStream(format!("ran out of bits after {} of {count} symbols", out.len())));
            }
            let bit = (payload[(pos / 8) as usize] >> (7 - pos % 8)) & 1;
            pos += 1;
            code = (code << 1) | bit as u64;
            len += 1;
            if len > max_len {
                return Err(Error::CorruptStream("bit pattern matches no code".into()));
            }
            if code >= first[len] && code - first[len] < by_len[len] {
                out.push(sorted[(offset[len] + code - first[len]) as usize] as u16);
                break;
            }
        }
    }
    if pos != bit_len {
        return Err(Error::CorruptStream(format!("{} unused bits after the last symbol", bit_len - pos)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cost(freqs: &[u64], lengths: &[u8]) -> u64 {
        freqs.iter().zip(lengths).map(|(&f, &l)| f * l as u64).sum()
    }

    /// Minimum total length over every length assignment satisfying Kraft.
    fn brute_optimal(freqs: &[u64]) -> u64 {
        let present: Vec<u64> = freqs.iter().copied().filter(|&f| f > 0).collect();
        if present.len() <= 1 {
            return present.iter().sum();
        }
        let n = present.len();
        let mut best = u64::MAX;
        let mut lens = vec![1u32; n];
        loop {
            let kraft: f64 = lens.iter().map(|&l| 0.5f64.powi(l as i32)).sum();
            if kraft <= 1.0 + 1e-12 {
                best = best.min(present.iter().zip(&lens).map(|(&f, &l)| f * l as u64).sum());
            }
            let mut i = 0;
            loop {
                if i == n {
                    return best;
                }
                lens[i] += 1;
                if lens[i] < n as u32 {
                    break;
                }
                lens[i] = 1;
                i += 1;
            }
        }
    }

    #[test]
    fn single_symbol_uses_one_bit() {
        let p = huffman_encode(&[5, 5, 5, 5], 256).unwrap();
        assert_eq!(p.table.lengths()[5], 1);
        assert_eq!(p.bit_len, 4);
        assert_eq!(huffman_decode(&p.table, &p.bytes, p.bit_len, 4).unwrap(), vec![5; 4]);
    }

    #[test]
    fn three_symbol_example() {
        let syms = [0u16, 0, 1, 2];
        let p = huffman_encode(&syms, 256).unwrap();
        assert_eq!(&p.table.lengths()[..3], &[1, 2, 2]);
        assert_eq!(p.bit_len, 6);
        assert_eq!(brute_optimal(&[2, 1, 1]), 6);
        assert_eq!(huffman_decode(&p.table, &p.bytes, p.bit_len, 4).unwrap(), syms);
    }

    #[test]
    fn uniform_histogram_is_flat() {
        let syms: Vec<u16> = (0..512).map(|i| (i % 256) as u16).collect();
        let p = huffman_encode(&syms, 256).unwrap();
        assert!(p.table.lengths().iter().all(|&l| l == 8));
        assert_eq!(p.bit_len, 8 * 512);
        assert_eq!(huffman_decode(&p.table, &p.bytes, p.bit_len, 512).unwrap(), syms);
    }

    #[test]
    fn empty_input() {
        let p = huffman_encode(&[], 256).unwrap();
        assert!(p.table.is_empty());
        assert!(p.bytes.is_empty());
        assert_eq!(p.bit_len, 0);
        assert!(huffman_decode(&p.table, &p.bytes, 0, 0).unwrap().is_empty());
    }

    #[test]
    fn canonical_codes_are_msb_first() {
        let t = HuffmanTable::from_lengths(vec![1, 2, 2]).unwrap();
        assert_eq!(t.code(0), Some((0b0, 1)));
        assert_eq!(t.code(1), Some((0b10, 2)));
        assert_eq!(t.code(2), Some((0b11, 2)));
        let p = huffman_encode(&[1, 0, 2, 0], 3).unwrap();
        assert_eq!(p.bytes, vec![0b1001_1000]);
        assert_eq!(p.bit_len, 6);
    }

    #[test]
    fn corrupt_streams_are_detected() {
        let p = huffman_encode(&[0, 1, 2, 2, 2], 4).unwrap();
        assert!(huffman_decode(&p.table, &p.bytes, p.bit_len - 1, 5).is_err());
        assert!(huffman_decode(&p.table, &p.bytes, p.bit_len, 6).is_err());
        assert!(huffman_decode(&p.table, &p.bytes, 64, 5).is_err());
        assert!(HuffmanTable::from_lengths(vec![1, 1, 1]).is_err());
        // incomplete code: pattern 11 is unassigned
        let t = HuffmanTable::from_lengths(vec![1, 2, 0]).unwrap();
        assert!(huffman_decode(&t, &[0b1100_0000], 2, 1).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_and_optimality(freqs in prop::collection::vec(0u64..20, 1..6)) {
            let syms: Vec<u16> = freqs.iter().enumerate().flat_map(|(s, &f)| std::iter::repeat(s as u16).take(f as usize)).collect();
            let p = huffman_encode(&syms, freqs.len()).unwrap();
            prop_assert_eq!(huffman_decode(&p.table, &p.bytes, p.bit_len, syms.len()).unwrap(), syms.clone());
            prop_assert!(p.table.kraft_sum() <= 1.0);
            let present = freqs.iter().filter(|&&f| f > 0).count();
            if present >= 2 {
                prop_assert_eq!(cost(&freqs, p.table.lengths()), brute_optimal(&freqs));
            }
        }
    }
}
