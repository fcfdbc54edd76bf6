//! Shard files and the byte <-> symbol mapping.
//!
//! A shard is a fixed 40-byte header followed by the node's symbols, stripe
//! after stripe, rows in order. All header integers are little-endian.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "GSRC"
//!      4     2  format version (1)
//!      6     2  w
//!      8     4  n
//!     12     4  k
//!     16     4  alpha
//!     20     4  node index, 1-based (parities are k+1..n)
//!     24     8  stripe count
//!     32     8  payload length in bytes
//! ```
//!
//! Symbols are packed high-order first: w=4 puts two symbols in a byte, high
//! nibble first, and rounds each stripe up to whole bytes; w=8 uses one byte;
//! w=16 uses two bytes, big-endian. File bytes are read into symbols the same
//! way, so systematic shards hold plain slices of the input whenever a node's
//! share of a stripe is a whole number of bytes.

use std::fs;
use std::path::Path;

use gsrc::galois::Elem;
use gsrc::layout::CodeParams;

use crate::CliError;

pub const MAGIC: &[u8; 4] = b"GSRC";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShardHeader {
    pub w: u16,
    pub n: u32,
    pub k: u32,
    pub alpha: u32,
    pub node_index: u32,
    pub stripe_count: u64,
    pub payload_len: u64,
}

impl ShardHeader {
    pub fn new(params: &CodeParams, node: usize, stripe_count: u64) -> Self {
        let per_stripe = stripe_bytes(params.w, params.alpha) as u64;
        ShardHeader {
            w: params.w as u16,
            n: params.n as u32,
            k: params.k as u32,
            alpha: params.alpha as u32,
            node_index: node as u32 + 1,
            stripe_count,
            payload_len: stripe_count * per_stripe,
        }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(MAGIC);
        b[4..6].copy_from_slice(&VERSION.to_le_bytes());
        b[6..8].copy_from_slice(&self.w.to_le_bytes());
        b[8..12].copy_from_slice(&self.n.to_le_bytes());
        b[12..16].copy_from_slice(&self.k.to_le_bytes());
        b[16..20].copy_from_slice(&self.alpha.to_le_bytes());
        b[20..24].copy_from_slice(&self.node_index.to_le_bytes());
        b[24..32].copy_from_slice(&self.stripe_count.to_le_bytes());
        b[32..40].copy_from_slice(&self.payload_len.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, String> {
        if b.len() < HEADER_LEN {
            return Err(format!("{} bytes is too short for a shard header", b.len()));
        }
        if &b[0..4] != MAGIC {
            return Err("bad magic, not a shard file".into());
        }
        let u16_at = |o: usize| u16::from_le_bytes(b[o..o + 2].try_into().unwrap());
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let version = u16_at(4);
        if version != VERSION {
            return Err(format!("unsupported shard format version {version}"));
        }
        Ok(ShardHeader {
            w: u16_at(6),
            n: u32_at(8),
            k: u32_at(12),
            alpha: u32_at(16),
            node_index: u32_at(20),
            stripe_count: u64_at(24),
            payload_len: u64_at(32),
        })
    }

    /// Checks the header against the code it is supposed to belong to.
    pub fn check(&self, params: &CodeParams, node: usize) -> Result<(), String> {
        let want = ShardHeader::new(params, node, self.stripe_count);
        if (self.w, self.n, self.k, self.alpha) != (want.w, want.n, want.k, want.alpha) {
            return Err(format!(
                "shard is for (n={}, k={}, alpha={}, w={}), metadata says (n={}, k={}, alpha={}, w={})",
                self.n, self.k, self.alpha, self.w, want.n, want.k, want.alpha, want.w
            ));
        }
        if self.node_index != want.node_index {
            return Err(format!("shard holds node {}, expected node {}", self.node_index, want.node_index));
        }
        if self.payload_len != want.payload_len {
            return Err(format!("payload length {} does not match {} stripes", self.payload_len, self.stripe_count));
        }
        Ok(())
    }
}

/// Bytes per stripe of one node.
pub fn stripe_bytes(w: u8, alpha: usize) -> usize {
    match w {
        4 => alpha.div_ceil(2),
        8 => alpha,
        _ => 2 * alpha,
    }
}

/// Packs symbols high-order first; a trailing odd nibble is padded with zero.
pub fn pack(w: u8, symbols: &[Elem], out: &mut Vec<u8>) {
    match w {
        4 => {
            for pair in symbols.chunks(2) {
                let lo = pair.get(1).copied().unwrap_or(0);
                out.push(((pair[0] << 4) | lo) as u8);
            }
        }
        8 => out.extend(symbols.iter().map(|&s| s as u8)),
        _ => symbols.iter().for_each(|&s| out.extend_from_slice(&s.to_be_bytes())),
    }
}

/// Inverse of [`pack`] for exactly `count` symbols. Missing trailing bytes
/// read as zero.
pub fn unpack(w: u8, bytes: &[u8], count: usize) -> Vec<Elem> {
    let byte = |i: usize| bytes.get(i).copied().unwrap_or(0) as Elem;
    match w {
        4 => (0..count).map(|i| if i % 2 == 0 { byte(i / 2) >> 4 } else { byte(i / 2) & 0xf }).collect(),
        8 => (0..count).map(byte).collect(),
        _ => (0..count).map(|i| (byte(2 * i) << 8) | byte(2 * i + 1)).collect(),
    }
}

/// Number of symbols needed to hold `len` bytes.
pub fn symbols_for_bytes(w: u8, len: usize) -> usize {
    match w {
        4 => 2 * len,
        8 => len,
        _ => len.div_ceil(2),
    }
}

/// A node's shard: header plus unpacked symbols, stripe-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shard {
    pub header: ShardHeader,
    pub symbols: Vec<Elem>,
}

impl Shard {
    pub fn new(params: &CodeParams, node: usize, symbols: Vec<Elem>) -> Self {
        let stripes = symbols.len().checked_div(params.alpha).unwrap_or(0);
        Shard { header: ShardHeader::new(params, node, stripes as u64), symbols }
    }

    pub fn stripe(&self, s: usize) -> &[Elem] {
        let alpha = self.header.alpha as usize;
        &self.symbols[s * alpha..(s + 1) * alpha]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let alpha = self.header.alpha as usize;
        let w = self.header.w as u8;
        let mut out = Vec::with_capacity(HEADER_LEN + self.header.payload_len as usize);
        out.extend_from_slice(&self.header.to_bytes());
        for stripe in self.symbols.chunks(alpha.max(1)) {
            pack(w, stripe, &mut out);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        let header = ShardHeader::from_bytes(bytes)?;
        let (w, alpha) = (header.w as u8, header.alpha as usize);
        if !matches!(w, 4 | 8 | 16) || alpha == 0 {
            return Err(format!("unsupported shard geometry w={w}, alpha={alpha}"));
        }
        let per = stripe_bytes(w, alpha);
        let payload = &bytes[HEADER_LEN..];
        if payload.len() as u64 != header.payload_len || header.payload_len != header.stripe_count * per as u64 {
            return Err(format!(
                "payload is {} bytes, header claims {} for {} stripes",
                payload.len(),
                header.payload_len,
                header.stripe_count
            ));
        }
        let mut symbols = Vec::with_capacity(header.stripe_count as usize * alpha);
        for chunk in payload.chunks(per) {
            symbols.extend(unpack(w, chunk, alpha));
        }
        Ok(Shard { header, symbols })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Shard::from_bytes(&bytes).map_err(|m| CliError::Mismatch(format!("{}: {m}", path.display())))
    }
}

/// File name of a node's shard: `d1.shard`..`dk.shard`, `p1.shard`..`pr.shard`.
pub fn shard_name(k: usize, node: usize) -> String {
    format!("{}.shard", node_label(k, node))
}

/// `d<j>` or `p<l>`, 1-based.
pub fn node_label(k: usize, node: usize) -> String {
    if node < k {
        format!("d{}", node + 1)
    } else {
        format!("p{}", node - k + 1)
    }
}

/// Parses `d3`, `p1` or a plain 1-based node number into a 0-based index.
pub fn parse_node(k: usize, n: usize, s: &str) -> Result<usize, String> {
    let bad = || format!("invalid node {s:?}; use d1..d{k}, p1..p{} or 1..{n}", n - k);
    let (limit, base, num) = if let Some(rest) = s.strip_prefix(['d', 'D']) {
        (k, 0, rest)
    } else if let Some(rest) = s.strip_prefix(['p', 'P']) {
        (n - k, k, rest)
    } else {
        (n, 0, s)
    };
    let i: usize = num.parse().map_err(|_| bad())?;
    if i == 0 || i > limit {
        return Err(bad());
    }
    Ok(base + i - 1)
}
