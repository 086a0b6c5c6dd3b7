//! Behavioral models of the built-in designs under verification.
//!
//! Three designs share one transaction-level interface: a 32-bit ALU, a
//! SECDED codec (Hamming check bits over 32 data bits plus an overall parity
//! bit), and an 8-bit ADC quantizer. Each step is a pure function of the
//! stimulus record, so any number of tests can drive a design concurrently.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stimulus::{FieldSpec, FieldValue, StimulusRecord};

/// Selector for the built-in designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DuvKind {
    Alu,
    Ecc,
    Adc,
}

impl DuvKind {
    pub fn name(&self) -> &'static str {
        match self {
            DuvKind::Alu => "alu",
            DuvKind::Ecc => "ecc",
            DuvKind::Adc => "adc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "alu" => Ok(DuvKind::Alu),
            "ecc" => Ok(DuvKind::Ecc),
            "adc" => Ok(DuvKind::Adc),
            other => Err(Error::Config(format!("unknown duv `{other}`"))),
        }
    }

    /// Randomizable stimulus fields of this design, in canonical order.
    pub fn field_specs(&self) -> Vec<FieldSpec> {
        match self {
            DuvKind::Alu => vec![
                FieldSpec::int("op", 0, 7),
                FieldSpec::int("a", 0, u32::MAX as i64),
                FieldSpec::int("b", 0, u32::MAX as i64),
            ],
            DuvKind::Ecc => vec![
                FieldSpec::int("data", 0, u32::MAX as i64),
                FieldSpec::int("flips", 0, 2),
                FieldSpec::int("pos1", 0, 38),
                FieldSpec::int("pos2", 0, 38),
            ],
            DuvKind::Adc => vec![
                FieldSpec::real("vin", 0.0, 1.0),
                FieldSpec::real("vref", 0.8, 1.2),
            ],
        }
    }

    /// Apply one stimulus record to the design. The outputs are checked
    /// against the model invariants and then discarded; functional coverage
    /// is measured on the stimulus itself.
    pub fn step(&self, rec: &StimulusRecord) -> Result<()> {
        match self {
            DuvKind::Alu => {
                let op = AluOp::from_index(int_field(rec, 0)? as u8);
                let a = int_field(rec, 1)? as u32;
                let b = int_field(rec, 2)? as u32;
                let t = alu_step(op, a, b);
                debug_assert_eq!(t.zero, t.result == 0);
                Ok(())
            }
            DuvKind::Ecc => {
                let data = int_field(rec, 0)? as u32;
                let flips = int_field(rec, 1)?;
                let pos1 = int_field(rec, 2)? as u8;
                let pos2 = int_field(rec, 3)? as u8;
                let mut cw = ecc_encode(data);
                match flips {
                    0 => {}
                    1 => cw = cw.flip(pos1),
                    _ => {
                        // A double injection must corrupt two distinct bits.
                        let second = if pos2 == pos1 { (pos2 + 1) % 39 } else { pos2 };
                        cw = cw.flip(pos1).flip(second);
                    }
                }
                let (decoded, status) = ecc_decode(cw);
                match flips {
                    0 => debug_assert!(decoded == data && status == EccDecodeStatus::Ok),
                    1 => debug_assert!(decoded == data && status == EccDecodeStatus::Corrected),
                    _ => debug_assert_eq!(status, EccDecodeStatus::DetectedDouble),
                }
                Ok(())
            }
            DuvKind::Adc => {
                let vin = real_field(rec, 0)?;
                let vref = real_field(rec, 1)?;
                adc_sample(vin, vref).map(|_| ())
            }
        }
    }
}

fn int_field(rec: &StimulusRecord, idx: usize) -> Result<i64> {
    match rec.values.get(idx) {
        Some(FieldValue::Int(v)) => Ok(*v),
        _ => Err(Error::Data(format!("record field {idx} is not an integer"))),
    }
}

fn real_field(rec: &StimulusRecord, idx: usize) -> Result<f64> {
    match rec.values.get(idx) {
        Some(FieldValue::Real(v)) => Ok(*v),
        _ => Err(Error::Data(format!("record field {idx} is not a real"))),
    }
}

/// ALU opcodes, encoded 0..=7 in the `op` stimulus field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AluOp {
    Add,
    Sub,
    And,
    Or,
    Xor,
    Sll,
    Srl,
    Mul,
}

impl AluOp {
    pub fn from_index(i: u8) -> Self {
        match i & 7 {
            0 => AluOp::Add,
            1 => AluOp::Sub,
            2 => AluOp::And,
            3 => AluOp::Or,
            4 => AluOp::Xor,
            5 => AluOp::Sll,
            6 => AluOp::Srl,
            _ => AluOp::Mul,
        }
    }
}

/// Result of one ALU operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AluTransaction {
    pub op: AluOp,
    pub a: u32,
    pub b: u32,
    pub result: u32,
    pub carry: bool,
    pub zero: bool,
}

/// Execute one ALU operation with wraparound 32-bit arithmetic. Carry is the
/// unsigned overflow for ADD, the borrow for SUB, and the high-word overflow
/// for MUL; shifts use `b mod 32`.
pub fn alu_step(op: AluOp, a: u32, b: u32) -> AluTransaction {
    let (result, carry) = match op {
        AluOp::Add => a.overflowing_add(b),
        AluOp::Sub => a.overflowing_sub(b),
        AluOp::And => (a & b, false),
        AluOp::Or => (a | b, false),
        AluOp::Xor => (a ^ b, false),
        AluOp::Sll => (a.wrapping_shl(b), false),
        AluOp::Srl => (a.wrapping_shr(b), false),
        AluOp::Mul => {
            let wide = u64::from(a) * u64::from(b);
            (wide as u32, wide > u64::from(u32::MAX))
        }
    };
    AluTransaction {
        op,
        a,
        b,
        result,
        carry,
        zero: result == 0,
    }
}

/// 39-bit SECDED codeword.
///
/// Bit layout: bit 0 holds the overall parity; bits 1..=38 form a Hamming
/// code with check bits at positions 1, 2, 4, 8, 16 and 32 and the 32 data
/// bits filling the remaining positions in ascending order (data bit 0 at
/// position 3).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EccCodeword(u64);

const CODEWORD_BITS: u8 = 39;
const CODEWORD_MASK: u64 = (1u64 << CODEWORD_BITS) - 1;

impl EccCodeword {
    pub fn from_bits(bits: u64) -> Self {
        EccCodeword(bits & CODEWORD_MASK)
    }

    pub fn bits(&self) -> u64 {
        self.0
    }

    pub fn flip(&self, pos: u8) -> Self {
        debug_assert!(pos < CODEWORD_BITS);
        EccCodeword(self.0 ^ (1u64 << pos))
    }
}

/// Decode outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EccDecodeStatus {
    Ok,
    Corrected,
    DetectedDouble,
}

fn is_check_position(pos: u8) -> bool {
    pos.is_power_of_two()
}

/// Encode 32 data bits into a SECDED codeword.
pub fn ecc_encode(data: u32) -> EccCodeword {
    let mut cw: u64 = 0;
    let mut di = 0;
    for pos in 1..CODEWORD_BITS {
        if !is_check_position(pos) {
            if (data >> di) & 1 == 1 {
                cw |= 1u64 << pos;
            }
            di += 1;
        }
    }
    for k in 0..6u8 {
        let check_pos = 1u8 << k;
        let mut parity = 0u64;
        for pos in 1..CODEWORD_BITS {
            if pos & check_pos != 0 {
                parity ^= (cw >> pos) & 1;
            }
        }
        if parity == 1 {
            cw |= 1u64 << check_pos;
        }
    }
    if (cw.count_ones() & 1) == 1 {
        cw |= 1;
    }
    EccCodeword(cw)
}

fn extract_data(cw: u64) -> u32 {
    let mut data = 0u32;
    let mut di = 0;
    for pos in 1..CODEWORD_BITS {
        if !is_check_position(pos) {
            if (cw >> pos) & 1 == 1 {
                data |= 1u32 << di;
            }
            di += 1;
        }
    }
    data
}

/// Decode a codeword: a clean word reads back as-is, any single-bit flip is
/// repaired, and any double-bit flip is reported as detected (the returned
/// data is then deterministic but unspecified).
pub fn ecc_decode(cw: EccCodeword) -> (u32, EccDecodeStatus) {
    let bits = cw.bits();
    let mut syndrome: u8 = 0;
    for k in 0..6u8 {
        let mask = 1u8 << k;
        let mut parity = 0u64;
        for pos in 1..CODEWORD_BITS {
            if pos & mask != 0 {
                parity ^= (bits >> pos) & 1;
            }
        }
        if parity == 1 {
            syndrome |= mask;
        }
    }
    let parity_odd = (bits.count_ones() & 1) == 1;
    match (syndrome, parity_odd) {
        (0, false) => (extract_data(bits), EccDecodeStatus::Ok),
        (0, true) => (extract_data(bits), EccDecodeStatus::Corrected),
        (s, true) => {
            let repaired = if s < CODEWORD_BITS {
                bits ^ (1u64 << s)
            } else {
                bits
            };
            (extract_data(repaired), EccDecodeStatus::Corrected)
        }
        (_, false) => (extract_data(bits), EccDecodeStatus::DetectedDouble),
    }
}

/// One ADC conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcSample {
    pub vin: f64,
    pub vref: f64,
    pub code: u8,
}

/// Quantize `vin` against `vref` to an 8-bit code using round-half-up, with
/// clamping at both rails.
pub fn adc_sample(vin: f64, vref: f64) -> Result<AdcSample> {
    if !vref.is_finite() || vref <= 0.0 {
        return Err(Error::Domain(format!("vref must be positive, got {vref}")));
    }
    let scaled = (255.0 * vin / vref + 0.5).floor();
    // Saturating float-to-int cast also maps a NaN input to code 0.
    let code = scaled.clamp(0.0, 255.0) as u8;
    Ok(AdcSample { vin, vref, code })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn alu_add_small() {
        let t = alu_step(AluOp::Add, 1, 2);
        assert_eq!((t.result, t.carry, t.zero), (3, false, false));
    }

    #[test]
    fn alu_add_wraparound() {
        let t = alu_step(AluOp::Add, 0xFFFF_FFFF, 1);
        assert_eq!((t.result, t.carry, t.zero), (0, true, true));
    }

    #[test]
    fn alu_sub_borrow() {
        let t = alu_step(AluOp::Sub, 3, 5);
        assert_eq!(t.result, 3u32.wrapping_sub(5));
        assert!(t.carry);
    }

    #[test]
    fn alu_shift_uses_low_five_bits() {
        assert_eq!(alu_step(AluOp::Sll, 1, 33).result, 2);
        assert_eq!(alu_step(AluOp::Srl, 4, 34).result, 1);
    }

    proptest! {
        #[test]
        fn alu_add_is_wrapping_add(a: u32, b: u32) {
            prop_assert_eq!(alu_step(AluOp::Add, a, b).result, a.wrapping_add(b));
        }

        #[test]
        fn alu_xor_self_is_zero(a: u32) {
            let t = alu_step(AluOp::Xor, a, a);
            prop_assert_eq!(t.result, 0);
            prop_assert!(t.zero);
        }

        #[test]
        fn alu_sub_self_is_zero(a: u32) {
            prop_assert_eq!(alu_step(AluOp::Sub, a, a).result, 0);
        }
    }

    #[test]
    fn ecc_zero_maps_to_zero() {
        assert_eq!(ecc_encode(0).bits(), 0);
    }

    /// Parity-check matrix oracle: every Hamming parity group and the
    /// overall parity of a valid codeword must be even. This recomputes the
    /// groups from the position numbering alone, independent of the encoder.
    fn assert_valid_by_h_matrix(cw: EccCodeword) {
        let bits = cw.bits();
        for k in 0..6u8 {
            let mut parity = 0u64;
            for pos in 0..CODEWORD_BITS {
                if pos & (1 << k) != 0 {
                    parity ^= (bits >> pos) & 1;
                }
            }
            assert_eq!(parity, 0, "parity group {k} is odd");
        }
        assert_eq!(bits.count_ones() & 1, 0, "overall parity is odd");
    }

    #[test]
    fn ecc_check_bits_satisfy_h_matrix() {
        assert_valid_by_h_matrix(ecc_encode(0x0000_0001));
        let mut rng = crate::stimulus::RngState::new(17);
        for _ in 0..100 {
            assert_valid_by_h_matrix(ecc_encode(rng.next_u64() as u32));
        }
    }

    #[test]
    fn ecc_round_trip_random_words() {
        let mut rng = crate::stimulus::RngState::new(23);
        for _ in 0..1000 {
            let d = rng.next_u64() as u32;
            let (back, status) = ecc_decode(ecc_encode(d));
            assert_eq!(back, d);
            assert_eq!(status, EccDecodeStatus::Ok);
        }
    }

    #[test]
    fn ecc_corrects_every_single_flip() {
        let mut rng = crate::stimulus::RngState::new(29);
        for _ in 0..20 {
            let d = rng.next_u64() as u32;
            let cw = ecc_encode(d);
            for pos in 0..CODEWORD_BITS {
                let (back, status) = ecc_decode(cw.flip(pos));
                assert_eq!(status, EccDecodeStatus::Corrected, "flip at {pos}");
                assert_eq!(back, d, "flip at {pos}");
            }
        }
    }

    #[test]
    fn ecc_detects_every_double_flip() {
        let mut rng = crate::stimulus::RngState::new(31);
        for _ in 0..5 {
            let d = rng.next_u64() as u32;
            let cw = ecc_encode(d);
            let mut pairs = 0;
            for p in 0..CODEWORD_BITS {
                for q in (p + 1)..CODEWORD_BITS {
                    let (_, status) = ecc_decode(cw.flip(p).flip(q));
                    assert_eq!(status, EccDecodeStatus::DetectedDouble, "flips {p},{q}");
                    pairs += 1;
                }
            }
            assert_eq!(pairs, 741);
        }
    }

    #[test]
    fn adc_rails_and_midpoint() {
        assert_eq!(adc_sample(0.0, 1.0).unwrap().code, 0);
        assert_eq!(adc_sample(1.0, 1.0).unwrap().code, 255);
        assert_eq!(adc_sample(0.5, 1.0).unwrap().code, 128);
        assert_eq!(adc_sample(-4.0, 1.0).unwrap().code, 0);
        assert_eq!(adc_sample(9.0, 1.0).unwrap().code, 255);
    }

    #[test]
    fn adc_rejects_bad_vref() {
        assert!(adc_sample(0.5, 0.0).is_err());
        assert!(adc_sample(0.5, -1.0).is_err());
        assert!(adc_sample(0.5, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn adc_monotone_in_vin(v1 in 0.0f64..=1.0, v2 in 0.0f64..=1.0, vref in 0.8f64..=1.2) {
            let (lo, hi) = if v1 <= v2 { (v1, v2) } else { (v2, v1) };
            let c_lo = adc_sample(lo, vref).unwrap().code;
            let c_hi = adc_sample(hi, vref).unwrap().code;
            prop_assert!(c_lo <= c_hi);
        }
    }
}
