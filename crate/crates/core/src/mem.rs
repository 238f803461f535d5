//! Byte-addressed memory with explicit valid regions.
//!
//! Addresses are 64-bit and wrap modulo `2^64`. Only bytes inside a declared
//! region may be accessed. Multi-byte accesses are little-endian and need not
//! be aligned.

use std::fmt::Write as _;

use thiserror::Error;

use crate::word::{Width, Word};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemError {
    #[error("address {0:#x} is outside every valid region")]
    OutOfRegion(u64),
    #[error("read of uninitialized byte at {0:#x}")]
    Uninitialized(u64),
    #[error("region {base:#x}+{len} extends past the end of the address space")]
    RegionOverflow { base: u64, len: u64 },
    #[error("hex dump line {line}: {msg}")]
    BadDump { line: usize, msg: String },
}

/// How reads of never-written bytes inside a valid region are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UninitMode {
    /// Reading an uninitialized byte is an error.
    Strict,
    /// Uninitialized bytes read as zero.
    Permissive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Region {
    base: u64,
    data: Vec<u8>,
    init: Vec<bool>,
}

impl Region {
    fn end(&self) -> u128 {
        self.base as u128 + self.data.len() as u128
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Memory {
    regions: Vec<Region>,
    mode: UninitMode,
}

impl Default for Memory {
    fn default() -> Self {
        Memory::new()
    }
}

impl Memory {
    pub fn new() -> Memory {
        Memory {
            regions: Vec::new(),
            mode: UninitMode::Strict,
        }
    }

    pub fn with_mode(mode: UninitMode) -> Memory {
        Memory {
            regions: Vec::new(),
            mode,
        }
    }

    pub fn mode(&self) -> UninitMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: UninitMode) {
        self.mode = mode;
    }

    /// Declares `[base, base + len)` valid. Overlapping or adjacent regions are
    /// merged; bytes already present keep their contents.
    pub fn add_region(&mut self, base: u64, len: u64) -> Result<(), MemError> {
        let end = base as u128 + len as u128;
        if end > 1u128 << 64 {
            return Err(MemError::RegionOverflow { base, len });
        }
        if len == 0 {
            return Ok(());
        }
        let mut new = Region {
            base,
            data: vec![0; len as usize],
            init: vec![false; len as usize],
        };
        let mut kept = Vec::with_capacity(self.regions.len() + 1);
        for r in self.regions.drain(..) {
            if r.end() < new.base as u128 || r.base as u128 > new.end() {
                kept.push(r);
                continue;
            }
            let lo = r.base.min(new.base);
            let hi = r.end().max(new.end());
            let size = (hi - lo as u128) as usize;
            let mut data = vec![0; size];
            let mut init = vec![false; size];
            for src in [&new, &r] {
                let off = (src.base - lo) as usize;
                for i in 0..src.data.len() {
                    if src.init[i] || !init[off + i] {
                        data[off + i] = src.data[i];
                        init[off + i] = src.init[i];
                    }
                }
            }
            new = Region {
                base: lo,
                data,
                init,
            };
        }
        kept.push(new);
        kept.sort_by_key(|r| r.base);
        self.regions = kept;
        Ok(())
    }

    /// Declares a region and initializes it with `bytes`.
    pub fn add_region_bytes(&mut self, base: u64, bytes: &[u8]) -> Result<(), MemError> {
        self.add_region(base, bytes.len() as u64)?;
        self.write_bytes(base, bytes)
    }

    /// Valid regions as `(base, len)` pairs in address order.
    pub fn regions(&self) -> Vec<(u64, u64)> {
        self.regions
            .iter()
            .map(|r| (r.base, r.data.len() as u64))
            .collect()
    }

    fn locate(&self, addr: u64) -> Option<(usize, usize)> {
        let idx = self.regions.partition_point(|r| r.base <= addr);
        if idx == 0 {
            return None;
        }
        let r = &self.regions[idx - 1];
        let off = (addr - r.base) as usize;
        (off < r.data.len()).then_some((idx - 1, off))
    }

    /// True when every byte of `[addr, addr + len)` (mod `2^64`) is valid.
    pub fn is_valid(&self, addr: u64, len: u64) -> bool {
        (0..len).all(|i| self.locate(addr.wrapping_add(i)).is_some())
    }

    /// `None` if the address is invalid, `Some(None)` if it is uninitialized.
    pub fn byte_state(&self, addr: u64) -> Option<Option<u8>> {
        let (r, off) = self.locate(addr)?;
        let reg = &self.regions[r];
        Some(reg.init[off].then_some(reg.data[off]))
    }

    pub fn load8(&self, addr: u64) -> Result<u8, MemError> {
        let (r, off) = self.locate(addr).ok_or(MemError::OutOfRegion(addr))?;
        let reg = &self.regions[r];
        if !reg.init[off] && self.mode == UninitMode::Strict {
            return Err(MemError::Uninitialized(addr));
        }
        Ok(reg.data[off])
    }

    pub fn store8(&mut self, addr: u64, v: u8) -> Result<(), MemError> {
        let (r, off) = self.locate(addr).ok_or(MemError::OutOfRegion(addr))?;
        let reg = &mut self.regions[r];
        reg.data[off] = v;
        reg.init[off] = true;
        Ok(())
    }

    /// Reads `len` bytes; fails at the first invalid or (strict mode)
    /// uninitialized byte.
    pub fn read_bytes(&self, addr: u64, len: usize) -> Result<Vec<u8>, MemError> {
        if let Some((r, off)) = self.locate(addr) {
            let reg = &self.regions[r];
            if off + len <= reg.data.len()
                && (self.mode == UninitMode::Permissive
                    || reg.init[off..off + len].iter().all(|&b| b))
            {
                return Ok(reg.data[off..off + len].to_vec());
            }
        }
        for i in 0..len as u64 {
            let a = addr.wrapping_add(i);
            if self.locate(a).is_none() {
                return Err(MemError::OutOfRegion(a));
            }
        }
        (0..len)
            .map(|i| self.load8(addr.wrapping_add(i as u64)))
            .collect()
    }

    /// Writes bytes. On failure nothing is written.
    pub fn write_bytes(&mut self, addr: u64, bytes: &[u8]) -> Result<(), MemError> {
        if let Some((r, off)) = self.locate(addr) {
            let reg = &mut self.regions[r];
            if off + bytes.len() <= reg.data.len() {
                reg.data[off..off + bytes.len()].copy_from_slice(bytes);
                reg.init[off..off + bytes.len()]
                    .iter_mut()
                    .for_each(|b| *b = true);
                return Ok(());
            }
        }
        for i in 0..bytes.len() as u64 {
            let a = addr.wrapping_add(i);
            if self.locate(a).is_none() {
                return Err(MemError::OutOfRegion(a));
            }
        }
        for (i, b) in bytes.iter().enumerate() {
            self.store8(addr.wrapping_add(i as u64), *b)?;
        }
        Ok(())
    }

    /// Little-endian load of a `width`-bit word.
    pub fn load(&self, addr: u64, width: Width) -> Result<Word, MemError> {
        let n = width.bytes();
        if let Some((r, off)) = self.locate(addr) {
            let reg = &self.regions[r];
            if off + n <= reg.data.len()
                && (self.mode == UninitMode::Permissive
                    || reg.init[off..off + n].iter().all(|&b| b))
            {
                return Ok(Word::from_le_bytes(width, &reg.data[off..off + n]));
            }
        }
        let bytes = self.read_bytes(addr, width.bytes())?;
        Ok(Word::from_le_bytes(width, &bytes))
    }

    /// Little-endian store of a word.
    pub fn store(&mut self, addr: u64, w: &Word) -> Result<(), MemError> {
        let n = w.width().bytes();
        if let Some((r, off)) = self.locate(addr) {
            let reg = &mut self.regions[r];
            if off + n <= reg.data.len() {
                let limbs = w.limbs();
                for i in 0..n {
                    reg.data[off + i] = (limbs[i / 8] >> (8 * (i % 8))) as u8;
                    reg.init[off + i] = true;
                }
                return Ok(());
            }
        }
        self.write_bytes(addr, &w.to_le_bytes())
    }

    /// Textual dump: one line per 16 bytes of each region,
    /// `addr: bb bb ..` in lowercase hex, `--` for uninitialized bytes.
    pub fn to_hex_dump(&self) -> String {
        let mut out = String::new();
        for r in &self.regions {
            for (chunk, start) in r.data.chunks(16).zip((0..).step_by(16)) {
                let _ = write!(out, "{:016x}:", r.base + start as u64);
                for (i, b) in chunk.iter().enumerate() {
                    if r.init[start + i] {
                        let _ = write!(out, " {b:02x}");
                    } else {
                        out.push_str(" --");
                    }
                }
                out.push('\n');
            }
        }
        out
    }

    /// Parses the format produced by [`Memory::to_hex_dump`]. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn from_hex_dump(text: &str) -> Result<Memory, MemError> {
        let mut mem = Memory::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| MemError::BadDump {
                line: n + 1,
                msg: msg.to_string(),
            };
            let (addr, rest) = line.split_once(':').ok_or_else(|| bad("missing ':'"))?;
            let addr = u64::from_str_radix(addr.trim().trim_start_matches("0x"), 16)
                .map_err(|_| bad("bad address"))?;
            let cells: Vec<&str> = rest.split_whitespace().collect();
            mem.add_region(addr, cells.len() as u64)?;
            for (i, c) in cells.iter().enumerate() {
                if *c == "--" {
                    continue;
                }
                let b = u8::from_str_radix(c, 16).map_err(|_| bad("bad byte"))?;
                mem.store8(addr.wrapping_add(i as u64), b)?;
            }
        }
        Ok(mem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unaligned_little_endian() {
        let mut m = Memory::new();
        m.add_region(0x1000, 16).unwrap();
        m.store(0x1003, &Word::from_u64(Width::W32, 0xdeadbeef))
            .unwrap();
        assert_eq!(m.load8(0x1003).unwrap(), 0xef);
        assert_eq!(m.load8(0x1006).unwrap(), 0xde);
        assert_eq!(m.load(0x1003, Width::W32).unwrap().low_u64(), 0xdeadbeef);
    }

    #[test]
    fn out_of_region_reports_first_bad_byte() {
        let mut m = Memory::new();
        m.add_region(0x1000, 8).unwrap();
        assert_eq!(
            m.load(0x1004, Width::W64),
            Err(MemError::OutOfRegion(0x1008))
        );
        assert_eq!(m.load8(0xfff), Err(MemError::OutOfRegion(0xfff)));
    }

    #[test]
    fn strict_and_permissive_uninit() {
        let mut m = Memory::new();
        m.add_region(0, 4).unwrap();
        assert_eq!(m.load8(2), Err(MemError::Uninitialized(2)));
        m.set_mode(UninitMode::Permissive);
        assert_eq!(m.load8(2), Ok(0));
    }

    #[test]
    fn regions_merge_and_keep_contents() {
        let mut m = Memory::new();
        m.add_region_bytes(10, &[1, 2, 3]).unwrap();
        m.add_region(13, 2).unwrap();
        m.add_region(8, 3).unwrap();
        assert_eq!(m.regions(), vec![(8, 7)]);
        assert_eq!(m.byte_state(11), Some(Some(2)));
        assert_eq!(m.byte_state(8), Some(None));
        assert!(m.add_region(u64::MAX, 2).is_err());
        assert!(m.add_region(u64::MAX, 1).is_ok());
    }

    #[test]
    fn address_wraps() {
        let mut m = Memory::new();
        m.add_region(u64::MAX - 1, 2).unwrap();
        m.add_region(0, 2).unwrap();
        m.store(u64::MAX - 1, &Word::from_u64(Width::W32, 0x04030201))
            .unwrap();
        assert_eq!(m.load8(1).unwrap(), 4);
    }

    #[test]
    fn hex_dump_round_trip() {
        let mut m = Memory::new();
        m.add_region(0x20, 20).unwrap();
        m.write_bytes(0x21, &[0xab; 18]).unwrap();
        let text = m.to_hex_dump();
        assert!(text.starts_with("0000000000000020: -- ab ab"));
        assert_eq!(Memory::from_hex_dump(&text).unwrap(), m);
    }
}
