//! Adaptive binary arithmetic coder over index streams.
//!
//! Demonstration only: the operational rate of a stage is taken from the
//! entropy estimator. Each dither bin selects its own adaptive frequency
//! table over the stream's index alphabet, so the coded length approaches
//! the conditional entropy the estimator reports.

use crate::error::{MdqError, Result};

const TOP: u64 = (1 << 32) - 1;
const HALF: u64 = 1 << 31;
const QUARTER: u64 = 1 << 30;
const MAX_TOTAL: u32 = 1 << 16;
/// Largest alphabet the demo coder accepts.
pub const MAX_ALPHABET: usize = 1 << 14;

/// Frequency table with a Fenwick tree for cumulative counts.
#[derive(Clone)]
struct Model {
    tree: Vec<u32>,
    freq: Vec<u32>,
    total: u32,
}

impl Model {
    fn new(size: usize) -> Self {
        let mut m = Self { tree: vec![0; size + 1], freq: vec![0; size], total: 0 };
        for s in 0..size {
            m.add(s, 1);
        }
        m
    }

    fn add(&mut self, s: usize, d: u32) {
        self.freq[s] += d;
        self.total += d;
        let mut i = s + 1;
        while i < self.tree.len() {
            self.tree[i] += d;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of frequencies of symbols `< s`.
    fn cum(&self, s: usize) -> u32 {
        let mut i = s;
        let mut acc = 0;
        while i > 0 {
            acc += self.tree[i];
            i &= i - 1;
        }
        acc
    }

    /// Symbol whose cumulative interval contains `target`.
    fn find(&self, target: u32) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut rem = target;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }

    fn update(&mut self, s: usize) {
        self.add(s, 24);
        if self.total > MAX_TOTAL {
            let halved: Vec<u32> = self.freq.iter().map(|f| f.div_ceil(2)).collect();
            *self = Self { tree: vec![0; self.freq.len() + 1], freq: vec![0; self.freq.len()], total: 0 };
            for (s, f) in halved.into_iter().enumerate() {
                self.add(s, f);
            }
        }
    }
}

struct BitWriter {
    bytes: Vec<u8>,
    acc: u8,
    fill: u8,
}

impl BitWriter {
    fn push(&mut self, bit: bool) {
        self.acc = (self.acc << 1) | bit as u8;
        self.fill += 1;
        if self.fill == 8 {
            self.bytes.push(self.acc);
            self.acc = 0;
            self.fill = 0;
        }
    }

    fn finish(mut self) -> Vec<u8> {
        if self.fill > 0 {
            self.bytes.push(self.acc << (8 - self.fill));
        }
        self.bytes
    }
}

struct Encoder {
    low: u64,
    high: u64,
    pending: u64,
    out: BitWriter,
}

impl Encoder {
    fn emit(&mut self, bit: bool) {
        self.out.push(bit);
        for _ in 0..self.pending {
            self.out.push(!bit);
        }
        self.pending = 0;
    }

    fn encode(&mut self, lo: u32, hi: u32, total: u32) {
        let range = self.high - self.low + 1;
        self.high = self.low + range * hi as u64 / total as u64 - 1;
        self.low += range * lo as u64 / total as u64;
        loop {
            if self.high < HALF {
                self.emit(false);
            } else if self.low >= HALF {
                self.emit(true);
                self.low -= HALF;
                self.high -= HALF;
            } else if self.low >= QUARTER && self.high < 3 * QUARTER {
                self.pending += 1;
                self.low -= QUARTER;
                self.high -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
        }
    }

    fn finish(mut self) -> Vec<u8> {
        self.pending += 1;
        let bit = self.low >= QUARTER;
        self.emit(bit);
        self.out.finish()
    }
}

struct Decoder<'a> {
    low: u64,
    high: u64,
    value: u64,
    bytes: &'a [u8],
    bit: usize,
}

impl<'a> Decoder<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        let mut d = Self { low: 0, high: TOP, value: 0, bytes, bit: 0 };
        for _ in 0..32 {
            d.value = (d.value << 1) | d.next_bit();
        }
        d
    }

    fn next_bit(&mut self) -> u64 {
        let b = self.bytes.get(self.bit / 8).map_or(0, |byte| (byte >> (7 - self.bit % 8)) & 1);
        self.bit += 1;
        b as u64
    }

    fn target(&self, total: u32) -> u32 {
        let range = self.high - self.low + 1;
        (((self.value - self.low + 1) * total as u64 - 1) / range) as u32
    }

    fn consume(&mut self, lo: u32, hi: u32, total: u32) {
        let range = self.high - self.low + 1;
        self.high = self.low + range * hi as u64 / total as u64 - 1;
        self.low += range * lo as u64 / total as u64;
        loop {
            if self.high < HALF {
            } else if self.low >= HALF {
                self.low -= HALF;
                self.high -= HALF;
                self.value -= HALF;
            } else if self.low >= QUARTER && self.high < 3 * QUARTER {
                self.low -= QUARTER;
                self.high -= QUARTER;
                self.value -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
            self.value = (self.value << 1) | self.next_bit();
        }
    }
}

/// A coded index stream and the side information needed to decode it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedStream {
    pub min_index: i64,
    pub alphabet: usize,
    pub contexts: usize,
    pub n: usize,
    pub bytes: Vec<u8>,
}

impl CodedStream {
    pub fn bits_per_sample(&self) -> f64 {
        8.0 * self.bytes.len() as f64 / self.n.max(1) as f64
    }
}

/// Encode `indices` with one adaptive model per context label.
pub fn encode(indices: &[i64], contexts: &[u32], n_contexts: usize) -> Result<CodedStream> {
    if indices.len() != contexts.len() {
        return Err(MdqError::InvalidParameter("indices and contexts differ in length".into()));
    }
    let (min, max) = indices.iter().fold((i64::MAX, i64::MIN), |(a, b), &k| (a.min(k), b.max(k)));
    let alphabet = if indices.is_empty() { 1 } else { (max - min + 1) as usize };
    if alphabet > MAX_ALPHABET {
        return Err(MdqError::InvalidParameter(format!("alphabet of {alphabet} symbols exceeds {MAX_ALPHABET}")));
    }
    if contexts.iter().any(|&c| c as usize >= n_contexts) {
        return Err(MdqError::InvalidParameter("context label out of range".into()));
    }
    let mut models = vec![Model::new(alphabet); n_contexts];
    let mut enc = Encoder { low: 0, high: TOP, pending: 0, out: BitWriter { bytes: Vec::new(), acc: 0, fill: 0 } };
    for (&k, &c) in indices.iter().zip(contexts) {
        let s = (k - min) as usize;
        let m = &mut models[c as usize];
        let lo = m.cum(s);
        enc.encode(lo, lo + m.freq[s], m.total);
        m.update(s);
    }
    Ok(CodedStream { min_index: if indices.is_empty() { 0 } else { min }, alphabet, contexts: n_contexts, n: indices.len(), bytes: enc.finish() })
}

pub fn decode(coded: &CodedStream, contexts: &[u32]) -> Result<Vec<i64>> {
    if contexts.len() != coded.n {
        return Err(MdqError::InvalidParameter("context count does not match stream length".into()));
    }
    let mut models = vec![Model::new(coded.alphabet); coded.contexts];
    let mut dec = Decoder::new(&coded.bytes);
    let mut out = Vec::with_capacity(coded.n);
    for &c in contexts {
        let m = models
            .get_mut(c as usize)
            .ok_or_else(|| MdqError::InvalidParameter("context label out of range".into()))?;
        let s = m.find(dec.target(m.total));
        let lo = m.cum(s);
        dec.consume(lo, lo + m.freq[s], m.total);
        m.update(s);
        out.push(coded.min_index + s as i64);
    }
    Ok(out)
}
