//! Shipped verification plans for the built-in designs: covergroups that are
//! deliberately hard to close by random stimulus alone, plus the default
//! regression sizing for each design.

use std::collections::BTreeMap;

use crate::coverage::{BinDef, CoverGroupDef};
use crate::duv::DuvKind;

/// Default number of tests in the original regression.
pub fn default_tests(duv: DuvKind) -> usize {
    match duv {
        DuvKind::Alu => 100,
        DuvKind::Adc => 200,
        DuvKind::Ecc => 50,
    }
}

/// Default transactions per test.
pub const DEFAULT_TRANSACTIONS: usize = 50;

fn bin(name: &str, when: &[(&str, f64, f64)]) -> BinDef {
    let mut map = BTreeMap::new();
    for &(field, lo, hi) in when {
        map.insert(field.to_string(), (lo, hi));
    }
    BinDef {
        name: name.to_string(),
        when: map,
    }
}

/// Exact six-decimal grid point from integer micro-units.
fn micro(u: i64) -> f64 {
    u as f64 / 1e6
}

/// Shipped covergroup for a design.
pub fn covergroup(duv: DuvKind) -> CoverGroupDef {
    match duv {
        DuvKind::Alu => alu_covergroup(),
        DuvKind::Ecc => ecc_covergroup(),
        DuvKind::Adc => adc_covergroup(),
    }
}

/// ALU: one bin per opcode plus corner-value crosses with operand windows
/// far too narrow for random stimulus to land in.
fn alu_covergroup() -> CoverGroupDef {
    let umax = u32::MAX as f64;
    let op_names = ["add", "sub", "and", "or", "xor", "sll", "srl", "mul"];
    let mut bins: Vec<BinDef> = op_names
        .iter()
        .enumerate()
        .map(|(i, name)| bin(&format!("op_{name}"), &[("op", i as f64, i as f64)]))
        .collect();
    bins.extend([
        bin(
            "add_carry_max",
            &[("op", 0.0, 0.0), ("a", 4294967040.0, umax), ("b", 4294967040.0, umax)],
        ),
        bin(
            "add_zero_zero",
            &[("op", 0.0, 0.0), ("a", 0.0, 0.0), ("b", 0.0, 0.0)],
        ),
        bin(
            "sub_underflow_edge",
            &[("op", 1.0, 1.0), ("a", 0.0, 15.0), ("b", 4294967280.0, umax)],
        ),
        bin(
            "sub_match_window",
            &[("op", 1.0, 1.0), ("a", 4096.0, 4351.0), ("b", 4096.0, 4351.0)],
        ),
        bin(
            "and_all_ones",
            &[("op", 2.0, 2.0), ("a", umax, umax), ("b", umax, umax)],
        ),
        bin(
            "and_low_bytes",
            &[("op", 2.0, 2.0), ("a", 0.0, 255.0), ("b", 0.0, 255.0)],
        ),
        bin(
            "or_high_nibbles",
            &[("op", 3.0, 3.0), ("a", 4026531840.0, umax), ("b", 4026531840.0, umax)],
        ),
        bin(
            "or_low_halves",
            &[("op", 3.0, 3.0), ("a", 0.0, 65535.0), ("b", 0.0, 65535.0)],
        ),
        bin(
            "xor_alt_halves",
            &[
                ("op", 4.0, 4.0),
                ("a", 2863267840.0, 2863333375.0),
                ("b", 1431633920.0, 1431699455.0),
            ],
        ),
        bin(
            "xor_msb_both",
            &[("op", 4.0, 4.0), ("a", 2147483648.0, umax), ("b", 2147483648.0, umax)],
        ),
        bin("sll_wrap_window", &[("op", 5.0, 5.0), ("b", 4294967264.0, umax)]),
        bin(
            "sll_low_a_high_shift",
            &[("op", 5.0, 5.0), ("a", 0.0, 1023.0), ("b", 24.0, 31.0)],
        ),
        bin(
            "srl_msb_window",
            &[("op", 6.0, 6.0), ("a", 2147483648.0, 2147487743.0), ("b", 0.0, 3.0)],
        ),
        bin(
            "mul_wide_operands",
            &[("op", 7.0, 7.0), ("a", 65536.0, umax), ("b", 65536.0, umax)],
        ),
        bin("mul_by_zero_a", &[("op", 7.0, 7.0), ("a", 0.0, 0.0)]),
        bin("srl_zero_a", &[("op", 6.0, 6.0), ("a", 0.0, 0.0), ("b", 0.0, 31.0)]),
    ]);
    CoverGroupDef { bins }
}

/// ECC: the error-free case, the detected-double case, and one bin per
/// single-flip position.
fn ecc_covergroup() -> CoverGroupDef {
    let mut bins = vec![
        bin("no_error", &[("flips", 0.0, 0.0)]),
        bin("double_detected", &[("flips", 2.0, 2.0)]),
    ];
    for pos in 0..39 {
        bins.push(bin(
            &format!("flip_pos_{pos:02}"),
            &[("flips", 1.0, 1.0), ("pos1", pos as f64, pos as f64)],
        ));
    }
    CoverGroupDef { bins }
}

/// ADC: sixteen input bands plus two rail crosses that pair an extreme input
/// with an opposing reference, which random stimulus essentially never does.
fn adc_covergroup() -> CoverGroupDef {
    let mut bins = Vec::new();
    for band in 0..16i64 {
        let lo = micro(band * 62_500);
        let hi = if band == 15 {
            1.0
        } else {
            micro((band + 1) * 62_500 - 1)
        };
        bins.push(bin(&format!("band_{band:02}"), &[("vin", lo, hi)]));
    }
    bins.push(bin(
        "rail_low",
        &[("vin", 0.0, micro(1_900)), ("vref", 1.15, 1.2)],
    ));
    bins.push(bin(
        "rail_high",
        &[("vin", micro(999_000), 1.0), ("vref", 0.8, 0.81)],
    ));
    CoverGroupDef { bins }
}
