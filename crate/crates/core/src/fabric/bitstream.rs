// SPDX-License-Identifier: Apache-2.0

//! Per-context configuration and its bitstream encoding.
//!
//! Scan order: CLBs row-major; inside a CLB each BLE in slot order holds
//! its 2^k LUT bits (truth-table order), the FF enable bit, the FF init
//! bit, then one crossbar select per LUT input. A select is
//! [`FabricArch::select_bits`] wide, least significant bit first, and
//! encodes 0 = open, `1 + p` = CLB input pin `p`, `1 + inputs + j` =
//! feedback from BLE `j`. All connection-block switch bits follow, then all
//! switch-box bits, in switch-id order (see [`super::rrg`]). A set switch
//! bit means the switch conducts.
//!
//! The binary dump is a 16-byte little-endian header `{b"FCFG", arch hash
//! u32, context id u32, bit length u32}` followed by the bits packed
//! least significant bit first.

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::arch::FabricArch;
use crate::primitives::ContextId;

pub const MAGIC: [u8; 4] = *b"FCFG";
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitstreamError {
    #[error("bitstream too short for its header")]
    Truncated,
    #[error("bad magic {0:02x?}")]
    Magic([u8; 4]),
    #[error("context id {0} is not 1 or 2")]
    Context(u32),
    #[error("payload holds {got} bytes, header needs {expected}")]
    Payload { expected: usize, got: usize },
    #[error("bitstream has {got} bits, architecture needs {expected}")]
    Length { expected: usize, got: usize },
    #[error("architecture hash {got:#010x} does not match {expected:#010x}")]
    ArchMismatch { expected: u32, got: u32 },
    #[error("BLE {ble}: select code {code} out of range")]
    Select { ble: usize, code: usize },
}

/// Source of one LUT input inside a CLB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputSel {
    Open,
    /// CLB input pin.
    Pin(usize),
    /// Output of BLE slot `j` of the same CLB.
    Feedback(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BleConfig {
    pub lut: Vec<bool>,
    pub registered: bool,
    pub ff_init: bool,
    pub inputs: Vec<InputSel>,
}

impl BleConfig {
    pub fn empty(k: usize) -> BleConfig {
        BleConfig {
            lut: vec![false; 1 << k],
            registered: false,
            ff_init: false,
            inputs: vec![InputSel::Open; k],
        }
    }
}

/// Complete configuration of one context.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FabricConfig {
    /// Indexed `clb * n + slot`, CLBs row-major.
    pub bles: Vec<BleConfig>,
    /// Conducting flag per switch id.
    pub switches: Vec<bool>,
}

impl FabricConfig {
    /// Unconfigured fabric: constant-0 LUTs, open selects, no switch on.
    pub fn empty(arch: &FabricArch) -> FabricConfig {
        FabricConfig {
            bles: vec![BleConfig::empty(arch.k); arch.clb_count() * arch.n],
            switches: vec![false; arch.cb_switch_count() + arch.sb_switch_count()],
        }
    }

    pub fn to_bits(&self, arch: &FabricArch) -> Vec<bool> {
        let sw = arch.select_bits();
        let mut bits = Vec::with_capacity(arch.bitstream_len());
        for ble in &self.bles {
            bits.extend_from_slice(&ble.lut);
            bits.push(ble.registered);
            bits.push(ble.ff_init);
            for sel in &ble.inputs {
                let code = match *sel {
                    InputSel::Open => 0,
                    InputSel::Pin(p) => 1 + p,
                    InputSel::Feedback(j) => 1 + arch.inputs + j,
                };
                bits.extend((0..sw).map(|i| code >> i & 1 == 1));
            }
        }
        bits.extend_from_slice(&self.switches);
        bits
    }

    pub fn from_bits(arch: &FabricArch, bits: &[bool]) -> Result<FabricConfig, BitstreamError> {
        if bits.len() != arch.bitstream_len() {
            return Err(BitstreamError::Length {
                expected: arch.bitstream_len(),
                got: bits.len(),
            });
        }
        let sw = arch.select_bits();
        let lut_len = 1 << arch.k;
        let mut pos = 0;
        let mut take = |n: usize| {
            let s = &bits[pos..pos + n];
            pos += n;
            s
        };
        let mut bles = Vec::with_capacity(arch.clb_count() * arch.n);
        for ble in 0..arch.clb_count() * arch.n {
            let lut = take(lut_len).to_vec();
            let flags = take(2);
            let mut inputs = Vec::with_capacity(arch.k);
            for _ in 0..arch.k {
                let code = take(sw)
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (i, &b)| acc | (usize::from(b) << i));
                inputs.push(match code {
                    0 => InputSel::Open,
                    c if c <= arch.inputs => InputSel::Pin(c - 1),
                    c if c <= arch.inputs + arch.n => InputSel::Feedback(c - 1 - arch.inputs),
                    code => return Err(BitstreamError::Select { ble, code }),
                });
            }
            bles.push(BleConfig {
                lut,
                registered: flags[0],
                ff_init: flags[1],
                inputs,
            });
        }
        let switches = take(arch.cb_switch_count() + arch.sb_switch_count()).to_vec();
        Ok(FabricConfig { bles, switches })
    }

    /// Short hex digest of the encoded configuration.
    pub fn digest(&self, arch: &FabricArch) -> String {
        let bytes = pack_bits(&self.to_bits(arch));
        let d = Sha256::digest(&bytes);
        d[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

/// Ordered configuration bits of one context.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bitstream {
    pub arch_hash: u32,
    pub context: ContextId,
    pub bits: Vec<bool>,
}

impl Bitstream {
    pub fn new(arch: &FabricArch, config: &FabricConfig, context: ContextId) -> Bitstream {
        Bitstream {
            arch_hash: arch.hash(),
            context,
            bits: config.to_bits(arch),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Decodes the configuration, checking it was made for `arch`.
    pub fn load(&self, arch: &FabricArch) -> Result<FabricConfig, BitstreamError> {
        if self.arch_hash != arch.hash() {
            return Err(BitstreamError::ArchMismatch {
                expected: arch.hash(),
                got: self.arch_hash,
            });
        }
        FabricConfig::from_bits(arch, &self.bits)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.bits.len().div_ceil(8));
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.arch_hash.to_le_bytes());
        out.extend_from_slice(&self.context.number().to_le_bytes());
        out.extend_from_slice(&(self.bits.len() as u32).to_le_bytes());
        out.extend(pack_bits(&self.bits));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Bitstream, BitstreamError> {
        if bytes.len() < HEADER_LEN {
            return Err(BitstreamError::Truncated);
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(BitstreamError::Magic(magic));
        }
        let arch_hash = word(4);
        let ctx = word(8);
        let context = ContextId::from_number(ctx).ok_or(BitstreamError::Context(ctx))?;
        let len = word(12) as usize;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != len.div_ceil(8) {
            return Err(BitstreamError::Payload {
                expected: len.div_ceil(8),
                got: payload.len(),
            });
        }
        let bits = (0..len).map(|i| payload[i / 8] >> (i % 8) & 1 == 1).collect();
        Ok(Bitstream {
            arch_hash,
            context,
            bits,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> FabricArch {
        FabricArch::parse("[grid]\nwidth = 2\nheight = 2\n[clb]\nn = 2\nk = 3\ninputs = 4\n[routing]\nchannel_width = 2\n")
            .unwrap()
    }

    #[test]
    fn empty_fabric_length_is_documented_formula() {
        let a = small();
        let bits = FabricConfig::empty(&a).to_bits(&a);
        let ble = 8 + 2 + 3 * 3; // select choices 1 + 4 + 2 = 7 -> 3 bits
        assert_eq!(bits.len(), 4 * 2 * ble + a.cb_switch_count() + a.sb_switch_count());
        assert!(bits.iter().all(|&b| !b));
    }

    #[test]
    fn bytes_round_trip() {
        let a = small();
        let mut cfg = FabricConfig::empty(&a);
        cfg.bles[3].lut[5] = true;
        cfg.bles[3].inputs[1] = InputSel::Feedback(1);
        cfg.bles[0].inputs[0] = InputSel::Pin(3);
        cfg.switches[7] = true;
        let bs = Bitstream::new(&a, &cfg, ContextId::Two);
        let bytes = bs.to_bytes();
        assert_eq!(&bytes[..4], b"FCFG");
        let back = Bitstream::from_bytes(&bytes).unwrap();
        assert_eq!(back, bs);
        assert_eq!(back.load(&a).unwrap(), cfg);
    }

    #[test]
    fn header_errors() {
        assert_eq!(Bitstream::from_bytes(b"FCFG"), Err(BitstreamError::Truncated));
        let a = small();
        let mut bytes = Bitstream::new(&a, &FabricConfig::empty(&a), ContextId::One).to_bytes();
        bytes[8] = 3;
        assert_eq!(Bitstream::from_bytes(&bytes), Err(BitstreamError::Context(3)));
        bytes[0] = b'X';
        assert!(matches!(Bitstream::from_bytes(&bytes), Err(BitstreamError::Magic(_))));
    }

    #[test]
    fn wrong_arch_is_rejected() {
        let a = small();
        let bs = Bitstream::new(&a, &FabricConfig::empty(&a), ContextId::One);
        let mut b = a.clone();
        b.channel_width = 3;
        assert!(matches!(bs.load(&b), Err(BitstreamError::ArchMismatch { .. })));
    }

    #[test]
    fn out_of_range_select_is_rejected() {
        let a = small();
        let mut bits = FabricConfig::empty(&a).to_bits(&a);
        // First select of BLE 0 set to code 7.
        for i in 0..3 {
            bits[8 + 2 + i] = true;
        }
        assert_eq!(
            FabricConfig::from_bits(&a, &bits),
            Err(BitstreamError::Select { ble: 0, code: 7 })
        );
    }
}
