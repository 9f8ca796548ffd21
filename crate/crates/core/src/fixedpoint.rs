//! Bit-accurate signed fixed-point arithmetic with configurable word and
//! fraction lengths.
//!
//! A [`FixedScalar`] stores a two's-complement integer `raw` together with a
//! [`FixedFormat`]; its real value is `raw * 2^(-frac_len)`. Operations take
//! an explicit output format, compute the exact wide-integer result, then
//! rescale (round-to-nearest-even) and saturate into the output format.
//! Saturation never errors: it is counted in a [`QuantStats`] accumulator so
//! callers can assert that a given run stayed inside its analytic dynamic
//! range.
//!
//! Word lengths up to 64 bits are supported so that guarded accumulators can
//! be modelled exactly; datapath signals themselves are far narrower.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from format construction and structural misuse.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FixedPointError {
    #[error("word length {0} outside 1..=64")]
    InvalidWordLength(u32),
    #[error("fraction length {frac_len} not below word length {word_len}")]
    InvalidFracLength { word_len: u32, frac_len: u32 },
    #[error("cannot truncate {bits} low bits of a {word_len}-bit word")]
    TruncationOutOfRange { bits: u32, word_len: u32 },
    #[error("cannot quantize non-finite value {0}")]
    NonFinite(f64),
    #[error("raw value {raw} does not fit a {word_len}-bit word")]
    RawOutOfRange { raw: i64, word_len: u32 },
    #[error("operand formats differ: {0}/{1} vs {2}/{3}")]
    FormatMismatch(u32, u32, u32, u32),
}

/// Signed fixed-point format: total word length and fraction length in bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedFormat {
    word_len: u32,
    frac_len: u32,
}

impl FixedFormat {
    /// Builds a format after checking `1 <= word_len <= 64` and
    /// `frac_len < word_len`.
    pub fn new(word_len: u32, frac_len: u32) -> Result<Self, FixedPointError> {
        if word_len == 0 || word_len > 64 {
            return Err(FixedPointError::InvalidWordLength(word_len));
        }
        if frac_len >= word_len {
            return Err(FixedPointError::InvalidFracLength { word_len, frac_len });
        }
        Ok(Self { word_len, frac_len })
    }

    pub fn word_len(&self) -> u32 {
        self.word_len
    }

    pub fn frac_len(&self) -> u32 {
        self.frac_len
    }

    /// Largest representable raw code: `2^(word_len-1) - 1`.
    pub fn max_raw(&self) -> i64 {
        ((1i128 << (self.word_len - 1)) - 1) as i64
    }

    /// Smallest representable raw code: `-2^(word_len-1)`.
    pub fn min_raw(&self) -> i64 {
        (-(1i128 << (self.word_len - 1))) as i64
    }

    /// Value of one LSB, `2^(-frac_len)`.
    pub fn resolution(&self) -> f64 {
        (-(self.frac_len as f64)).exp2()
    }

    pub fn max_value(&self) -> f64 {
        self.max_raw() as f64 * self.resolution()
    }

    pub fn min_value(&self) -> f64 {
        self.min_raw() as f64 * self.resolution()
    }
}

/// Rounding mode used when a real value or a wider intermediate is reduced
/// into a format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Rounding {
    /// Round to nearest, ties to even (the default).
    #[default]
    NearestEven,
    /// Round toward negative infinity.
    Floor,
}

/// Counters accumulated by quantisation and arithmetic.
///
/// `saturations` counts every output that had to be clamped to its format
/// bounds; a run whose dynamic range fits its formats reports zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantStats {
    pub quantizations: u64,
    pub saturations: u64,
}

impl QuantStats {
    pub fn merge(&mut self, other: &QuantStats) {
        self.quantizations += other.quantizations;
        self.saturations += other.saturations;
    }
}

/// A signed fixed-point value: two's-complement `raw` in a [`FixedFormat`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedScalar {
    raw: i64,
    fmt: FixedFormat,
}

impl FixedScalar {
    /// Wraps a raw code, checking it fits the format's word length.
    pub fn from_raw(raw: i64, fmt: FixedFormat) -> Result<Self, FixedPointError> {
        if raw < fmt.min_raw() || raw > fmt.max_raw() {
            return Err(FixedPointError::RawOutOfRange {
                raw,
                word_len: fmt.word_len,
            });
        }
        Ok(Self { raw, fmt })
    }

    pub fn zero(fmt: FixedFormat) -> Self {
        Self { raw: 0, fmt }
    }

    pub fn raw(&self) -> i64 {
        self.raw
    }

    pub fn format(&self) -> FixedFormat {
        self.fmt
    }

    /// Real value `raw * 2^(-frac_len)`.
    ///
    /// Exact as long as `|raw| <= 2^53`, which holds for every format this
    /// crate constructs (the widest accumulator is 55 bits; its raw magnitude
    /// is bounded by 2^53 only when guard sizing is honoured — the conversion
    /// rounds to nearest otherwise).
    pub fn value(&self) -> f64 {
        self.raw as f64 * self.fmt.resolution()
    }
}

fn clamp_to_format(wide: i128, fmt: FixedFormat, stats: &mut QuantStats) -> i64 {
    let max = fmt.max_raw() as i128;
    let min = fmt.min_raw() as i128;
    if wide > max {
        stats.saturations += 1;
        max as i64
    } else if wide < min {
        stats.saturations += 1;
        min as i64
    } else {
        wide as i64
    }
}

/// Right-shifts `v` by `shift` bits, rounding the discarded fraction to
/// nearest with ties to even. `shift == 0` is the identity.
fn shift_right_round(v: i128, shift: u32, mode: Rounding) -> i128 {
    if shift == 0 {
        return v;
    }
    debug_assert!(shift < 127);
    let floor = v >> shift;
    match mode {
        Rounding::Floor => floor,
        Rounding::NearestEven => {
            let rem = v - (floor << shift);
            let half = 1i128 << (shift - 1);
            if rem > half || (rem == half && floor & 1 == 1) {
                floor + 1
            } else {
                floor
            }
        }
    }
}

/// Rescales a raw value carrying `from_frac` fraction bits into `fmt`,
/// rounding and saturating as needed.
fn rescale(wide: i128, from_frac: u32, fmt: FixedFormat, mode: Rounding, stats: &mut QuantStats) -> FixedScalar {
    let raw = if from_frac >= fmt.frac_len {
        shift_right_round(wide, from_frac - fmt.frac_len, mode)
    } else {
        let up = fmt.frac_len - from_frac;
        match wide.checked_shl(up) {
            Some(w) => w,
            // Magnitudes this large saturate anyway; substitute a sign carrier.
            None => {
                if wide >= 0 {
                    i128::MAX
                } else {
                    i128::MIN
                }
            }
        }
    };
    FixedScalar {
        raw: clamp_to_format(raw, fmt, stats),
        fmt,
    }
}

/// Quantises a finite real number into `fmt`.
///
/// Returns the nearest representable value under `mode`, saturating at the
/// format bounds. Non-finite inputs clamp to zero and are counted as
/// saturations; use [`try_quantize`] when that should be an error instead.
pub fn quantize(x: f64, fmt: FixedFormat, mode: Rounding, stats: &mut QuantStats) -> FixedScalar {
    stats.quantizations += 1;
    if !x.is_finite() {
        stats.saturations += 1;
        return FixedScalar::zero(fmt);
    }
    // Multiplying by a power of two is exact in IEEE 754, so the rounding
    // below acts on the true scaled value.
    let scaled = x * (fmt.frac_len as f64).exp2();
    let raw = match mode {
        Rounding::NearestEven => scaled.round_ties_even(),
        Rounding::Floor => scaled.floor(),
    };
    // f64 -> i128 casts saturate in Rust, matching the clamp that follows.
    FixedScalar {
        raw: clamp_to_format(raw as i128, fmt, stats),
        fmt,
    }
}

/// [`quantize`] that rejects non-finite input.
pub fn try_quantize(x: f64, fmt: FixedFormat, mode: Rounding, stats: &mut QuantStats) -> Result<FixedScalar, FixedPointError> {
    if !x.is_finite() {
        return Err(FixedPointError::NonFinite(x));
    }
    Ok(quantize(x, fmt, mode, stats))
}

/// Forces the `bits` lowest raw bits to zero (truncation toward −∞ in
/// value); the format is unchanged.
pub fn truncate_lsb(x: FixedScalar, bits: u32) -> Result<FixedScalar, FixedPointError> {
    if bits >= x.fmt.word_len {
        return Err(FixedPointError::TruncationOutOfRange {
            bits,
            word_len: x.fmt.word_len,
        });
    }
    if bits == 0 {
        return Ok(x);
    }
    let mask = !((1i64 << bits) - 1);
    Ok(FixedScalar {
        raw: x.raw & mask,
        fmt: x.fmt,
    })
}

/// Multiplies two fixed-point scalars: exact integer product, then rescale
/// (round-to-nearest-even) and saturate into `out_fmt`.
pub fn fx_mul(a: FixedScalar, b: FixedScalar, out_fmt: FixedFormat, stats: &mut QuantStats) -> FixedScalar {
    let wide = a.raw as i128 * b.raw as i128;
    rescale(wide, a.fmt.frac_len + b.fmt.frac_len, out_fmt, Rounding::NearestEven, stats)
}

/// Adds two fixed-point scalars after aligning binary points exactly, then
/// rescales and saturates into `out_fmt`.
pub fn fx_add(a: FixedScalar, b: FixedScalar, out_fmt: FixedFormat, stats: &mut QuantStats) -> FixedScalar {
    let frac = a.fmt.frac_len.max(b.fmt.frac_len);
    let wa = (a.raw as i128) << (frac - a.fmt.frac_len);
    let wb = (b.raw as i128) << (frac - b.fmt.frac_len);
    rescale(wa + wb, frac, out_fmt, Rounding::NearestEven, stats)
}

/// `a - b` with the same alignment rules as [`fx_add`].
pub fn fx_sub(a: FixedScalar, b: FixedScalar, out_fmt: FixedFormat, stats: &mut QuantStats) -> FixedScalar {
    let frac = a.fmt.frac_len.max(b.fmt.frac_len);
    let wa = (a.raw as i128) << (frac - a.fmt.frac_len);
    let wb = (b.raw as i128) << (frac - b.fmt.frac_len);
    rescale(wa - wb, frac, out_fmt, Rounding::NearestEven, stats)
}

/// Complex fixed-point value; both parts share one format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedComplex {
    re: FixedScalar,
    im: FixedScalar,
}

impl FixedComplex {
    pub fn new(re: FixedScalar, im: FixedScalar) -> Result<Self, FixedPointError> {
        if re.fmt != im.fmt {
            return Err(FixedPointError::FormatMismatch(
                re.fmt.word_len,
                re.fmt.frac_len,
                im.fmt.word_len,
                im.fmt.frac_len,
            ));
        }
        Ok(Self { re, im })
    }

    pub fn quantize(re: f64, im: f64, fmt: FixedFormat, mode: Rounding, stats: &mut QuantStats) -> Self {
        Self {
            re: quantize(re, fmt, mode, stats),
            im: quantize(im, fmt, mode, stats),
        }
    }

    pub fn re(&self) -> FixedScalar {
        self.re
    }

    pub fn im(&self) -> FixedScalar {
        self.im
    }

    pub fn value(&self) -> (f64, f64) {
        (self.re.value(), self.im.value())
    }
}

/// Complex product via four real multipliers:
/// `(a.re·b.re − a.im·b.im, a.re·b.im + a.im·b.re)`.
///
/// The four products are exact; the single rounding happens in the adders
/// that produce `out_fmt`.
pub fn cx_mul(a: FixedComplex, b: FixedComplex, out_fmt: FixedFormat, stats: &mut QuantStats) -> FixedComplex {
    let prod_fmt = product_format(a.re.fmt, b.re.fmt);
    let rr = fx_mul(a.re, b.re, prod_fmt, stats);
    let ii = fx_mul(a.im, b.im, prod_fmt, stats);
    let ri = fx_mul(a.re, b.im, prod_fmt, stats);
    let ir = fx_mul(a.im, b.re, prod_fmt, stats);
    FixedComplex {
        re: fx_sub(rr, ii, out_fmt, stats),
        im: fx_add(ri, ir, out_fmt, stats),
    }
}

/// Complex sum in `out_fmt`.
pub fn cx_add(a: FixedComplex, b: FixedComplex, out_fmt: FixedFormat, stats: &mut QuantStats) -> FixedComplex {
    FixedComplex {
        re: fx_add(a.re, b.re, out_fmt, stats),
        im: fx_add(a.im, b.im, out_fmt, stats),
    }
}

/// Squared magnitude `re² + im²` through two squarers and one adder.
pub fn cx_sq_norm(a: FixedComplex, out_fmt: FixedFormat, stats: &mut QuantStats) -> FixedScalar {
    let prod_fmt = product_format(a.re.fmt, a.re.fmt);
    let rr = fx_mul(a.re, a.re, prod_fmt, stats);
    let ii = fx_mul(a.im, a.im, prod_fmt, stats);
    fx_add(rr, ii, out_fmt, stats)
}

/// Format holding the exact product of values in `a` and `b`
/// (word lengths add, fraction lengths add), capped at 64 bits.
pub fn product_format(a: FixedFormat, b: FixedFormat) -> FixedFormat {
    let word = (a.word_len + b.word_len).min(64);
    FixedFormat {
        word_len: word,
        frac_len: (a.frac_len + b.frac_len).min(word - 1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fmt(w: u32, f: u32) -> FixedFormat {
        FixedFormat::new(w, f).unwrap()
    }

    fn fx(raw: i64, w: u32, f: u32) -> FixedScalar {
        FixedScalar::from_raw(raw, fmt(w, f)).unwrap()
    }

    /// Independent oracle: the representable value nearest to `x`, ties to
    /// the even raw code, found by scanning every code point.
    fn quantize_oracle(x: f64, fm: FixedFormat) -> i64 {
        let mut best = fm.min_raw();
        let mut best_err = f64::INFINITY;
        for raw in fm.min_raw()..=fm.max_raw() {
            let err = (raw as f64 * fm.resolution() - x).abs();
            if err < best_err || (err == best_err && raw % 2 == 0) {
                best = raw;
                best_err = err;
            }
        }
        best
    }

    #[test]
    fn quantize_zero_is_raw_zero() {
        let mut st = QuantStats::default();
        for (w, f) in [(4, 2), (8, 0), (18, 16), (64, 40)] {
            assert_eq!(quantize(0.0, fmt(w, f), Rounding::NearestEven, &mut st).raw(), 0);
        }
        assert_eq!(st.saturations, 0);
    }

    #[test]
    fn quantize_exact_value() {
        let mut st = QuantStats::default();
        let q = quantize(0.75, fmt(4, 2), Rounding::NearestEven, &mut st);
        assert_eq!(q.raw(), 3);
        assert_eq!(q.value(), 0.75);
        assert_eq!(st.saturations, 0);
    }

    #[test]
    fn quantize_saturates_at_format_max() {
        // fmt(4,2) spans [-2, 1.75] in steps of 0.25.
        let mut st = QuantStats::default();
        let q = quantize(1.3, fmt(4, 2), Rounding::NearestEven, &mut st);
        assert_eq!(q.raw(), 5); // nearest code point, 1.25
        assert_eq!(q.raw(), quantize_oracle(1.3, fmt(4, 2)));
        assert_eq!(st.saturations, 0);
        let sat = quantize(2.6, fmt(4, 2), Rounding::NearestEven, &mut st);
        assert_eq!(sat.raw(), 7);
        assert_eq!(sat.value(), 1.75);
        assert_eq!(sat.raw(), quantize_oracle(2.6, fmt(4, 2)));
        assert_eq!(st.saturations, 1);
        let bot = quantize(-9.0, fmt(4, 2), Rounding::NearestEven, &mut st);
        assert_eq!(bot.value(), -2.0);
        assert_eq!(st.saturations, 2);
    }

    #[test]
    fn quantize_matches_enumeration_oracle_exhaustively() {
        let mut st = QuantStats::default();
        for (w, f) in [(4, 2), (5, 0), (6, 5), (3, 1)] {
            let fm = fmt(w, f);
            // Sweep a dense set of inputs across and beyond the range.
            let lo = fm.min_value() - 1.0;
            let hi = fm.max_value() + 1.0;
            let steps = 4001;
            for k in 0..=steps {
                let x = lo + (hi - lo) * k as f64 / steps as f64;
                let got = quantize(x, fm, Rounding::NearestEven, &mut st).raw();
                assert_eq!(got, quantize_oracle(x, fm), "x={x} fmt={w}/{f}");
            }
        }
    }

    #[test]
    fn quantize_nonfinite() {
        let mut st = QuantStats::default();
        assert!(try_quantize(f64::NAN, fmt(8, 4), Rounding::NearestEven, &mut st).is_err());
        assert!(try_quantize(f64::INFINITY, fmt(8, 4), Rounding::NearestEven, &mut st).is_err());
    }

    #[test]
    fn truncate_identity_and_masking() {
        let x = fx(0b0101, 8, 3);
        assert_eq!(truncate_lsb(x, 0).unwrap().raw(), 0b0101);
        let y = fx(0b0111, 8, 3);
        assert_eq!(truncate_lsb(y, 2).unwrap().raw(), 0b0100);
    }

    #[test]
    fn truncate_negative_two_complement() {
        // All-ones raw (-1) with the low 3 bits cleared is -8.
        let x = fx(-1, 8, 3);
        assert_eq!(truncate_lsb(x, 3).unwrap().raw(), -8);
    }

    #[test]
    fn truncate_out_of_range_errors() {
        let x = fx(1, 4, 1);
        assert!(matches!(
            truncate_lsb(x, 4),
            Err(FixedPointError::TruncationOutOfRange { .. })
        ));
    }

    #[test]
    fn mul_by_exact_one_is_identity() {
        let mut st = QuantStats::default();
        let f88 = fmt(8, 4);
        let one = quantize(1.0, f88, Rounding::NearestEven, &mut st);
        assert_eq!(one.raw(), 16);
        for raw in -8..=7 {
            let x = fx(raw, 8, 4);
            assert_eq!(fx_mul(one, x, f88, &mut st).raw(), raw);
        }
        assert_eq!(st.saturations, 0);
    }

    #[test]
    fn mul_half_by_half() {
        let mut st = QuantStats::default();
        let f = fmt(8, 2);
        let half = quantize(0.5, f, Rounding::NearestEven, &mut st);
        let q = fx_mul(half, half, f, &mut st);
        assert_eq!(q.raw(), 1);
        assert_eq!(q.value(), 0.25);
    }

    /// Wide-integer reference for `fx_mul`: exact product in i128, floor/RNE
    /// reduction done with explicit remainder arithmetic, clamped bounds.
    fn mul_oracle(a: i64, fa: u32, b: i64, fb: u32, out: FixedFormat) -> i64 {
        let exact = a as i128 * b as i128; // frac = fa + fb
        let from = fa + fb;
        let raw = if from >= out.frac_len() {
            let s = from - out.frac_len();
            if s == 0 {
                exact
            } else {
                let q = exact.div_euclid(1i128 << s);
                let r = exact.rem_euclid(1i128 << s);
                let half = 1i128 << (s - 1);
                if r > half || (r == half && q % 2 != 0) {
                    q + 1
                } else {
                    q
                }
            }
        } else {
            exact << (out.frac_len() - from)
        };
        raw.clamp(out.min_raw() as i128, out.max_raw() as i128) as i64
    }

    fn add_oracle(a: i64, fa: u32, b: i64, fb: u32, out: FixedFormat) -> i64 {
        let f = fa.max(fb);
        let exact = ((a as i128) << (f - fa)) + ((b as i128) << (f - fb));
        mul_oracle_from_wide(exact, f, out)
    }

    fn mul_oracle_from_wide(exact: i128, from: u32, out: FixedFormat) -> i64 {
        let raw = if from >= out.frac_len() {
            let s = from - out.frac_len();
            if s == 0 {
                exact
            } else {
                let q = exact.div_euclid(1i128 << s);
                let r = exact.rem_euclid(1i128 << s);
                let half = 1i128 << (s - 1);
                if r > half || (r == half && q % 2 != 0) {
                    q + 1
                } else {
                    q
                }
            }
        } else {
            exact << (out.frac_len() - from)
        };
        raw.clamp(out.min_raw() as i128, out.max_raw() as i128) as i64
    }

    #[test]
    fn mul_add_truncate_match_wide_integer_oracle_exhaustively() {
        // Every operand pair for every format with word_len <= 6, against a
        // handful of output formats.
        for w in 1..=6u32 {
            for f in 0..w {
                let fa = fmt(w, f);
                for (ow, of) in [(w, f), (8, 4.min(7)), (4, 2), (12, 6)] {
                    let out = fmt(ow, of);
                    for ra in fa.min_raw()..=fa.max_raw() {
                        for rb in fa.min_raw()..=fa.max_raw() {
                            let a = fx(ra, w, f);
                            let b = fx(rb, w, f);
                            let mut st = QuantStats::default();
                            assert_eq!(
                                fx_mul(a, b, out, &mut st).raw(),
                                mul_oracle(ra, f, rb, f, out),
                                "mul {ra}*{rb} fmt {w}/{f} out {ow}/{of}"
                            );
                            assert_eq!(
                                fx_add(a, b, out, &mut st).raw(),
                                add_oracle(ra, f, rb, f, out),
                                "add {ra}+{rb} fmt {w}/{f} out {ow}/{of}"
                            );
                        }
                        for k in 0..w {
                            let got = truncate_lsb(fx(ra, w, f), k).unwrap().raw();
                            assert_eq!(got, (ra >> k) << k, "trunc {ra} k={k}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn eight_bit_formats_match_oracle_exhaustively() {
        let w = 8u32;
        for f in [0u32, 3, 7] {
            let fa = fmt(w, f);
            let out = fmt(w, f);
            for ra in fa.min_raw()..=fa.max_raw() {
                for rb in fa.min_raw()..=fa.max_raw() {
                    let a = fx(ra, w, f);
                    let b = fx(rb, w, f);
                    let mut st = QuantStats::default();
                    assert_eq!(fx_mul(a, b, out, &mut st).raw(), mul_oracle(ra, f, rb, f, out));
                    assert_eq!(fx_add(a, b, out, &mut st).raw(), add_oracle(ra, f, rb, f, out));
                }
            }
        }
    }

    #[test]
    fn cx_identities() {
        let mut st = QuantStats::default();
        let f = fmt(12, 8);
        let one = FixedComplex::quantize(1.0, 0.0, f, Rounding::NearestEven, &mut st);
        let i = FixedComplex::quantize(0.0, 1.0, f, Rounding::NearestEven, &mut st);
        let z = FixedComplex::quantize(0.625, -0.25, f, Rounding::NearestEven, &mut st);
        let id = cx_mul(one, z, f, &mut st);
        assert_eq!(id.value(), z.value());
        let ii = cx_mul(i, i, f, &mut st);
        assert_eq!(ii.value(), (-1.0, 0.0));
    }

    #[test]
    fn cx_sq_norm_exact_rational() {
        // (3/4)^2 = 9/16 is exact with >= 4 fraction bits.
        let mut st = QuantStats::default();
        let f = fmt(12, 8);
        let z = FixedComplex::quantize(0.75, 0.0, f, Rounding::NearestEven, &mut st);
        let n = cx_sq_norm(z, fmt(16, 8), &mut st);
        assert_eq!(n.value(), 9.0 / 16.0);
        let zc = FixedComplex::quantize(0.5, 0.75, f, Rounding::NearestEven, &mut st);
        let nc = cx_sq_norm(zc, fmt(16, 8), &mut st);
        assert_eq!(nc.value(), 0.25 + 9.0 / 16.0);
        assert_eq!(st.saturations, 0);
    }

    proptest! {
        #[test]
        fn quantize_value_roundtrip_is_identity(raw in -(1i64 << 17)..(1i64 << 17)) {
            // quantize(value(x), fmt(x)) == x for every representable x.
            let fm = fmt(18, 16);
            let x = FixedScalar::from_raw(raw, fm).unwrap();
            let mut st = QuantStats::default();
            let q = quantize(x.value(), fm, Rounding::NearestEven, &mut st);
            prop_assert_eq!(q, x);
            prop_assert_eq!(st.saturations, 0);
        }

        #[test]
        fn truncation_floors_within_one_step(raw in -(1i64 << 15)..(1i64 << 15), k in 0u32..12) {
            let fm = fmt(16, 10);
            let x = FixedScalar::from_raw(raw, fm).unwrap();
            let t = truncate_lsb(x, k).unwrap();
            prop_assert!(t.value() <= x.value());
            prop_assert!((x.value() - t.value()).abs() < (k as f64 - 10.0).exp2());
        }

        #[test]
        fn mul_matches_oracle_randomised_wide(
            ra in -(1i64 << 20)..(1i64 << 20),
            rb in -(1i64 << 20)..(1i64 << 20),
            of in 0u32..20,
        ) {
            let fa = fmt(22, 12);
            let out = fmt(24, of);
            let a = FixedScalar::from_raw(ra, fa).unwrap();
            let b = FixedScalar::from_raw(rb, fa).unwrap();
            let mut st = QuantStats::default();
            prop_assert_eq!(fx_mul(a, b, out, &mut st).raw(), mul_oracle(ra, 12, rb, 12, out));
        }
    }
}
