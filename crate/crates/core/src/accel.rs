//! Heterogeneous two-core accelerator model.
//!
//! Both cores evaluate the calibration kernels through a bit-accurate
//! fixed-point datapath. The element-wise product stage multiplies the
//! model-entry buses (`h` and `t` carrying the real and imaginary parts)
//! with the gain-feedback signal (the divider output, carried at the full
//! 28-bit signal budget — the recursion state needs its precision, or the
//! convergence metric floors at the feedback quantisation step). The
//! square-accumulate stage squares the real and imaginary z parts (buses
//! `e_sac`, `f_sac`); the multiply-accumulate stage forms the conjugated
//! products of measured entries (`e_mac`) and z values (`f_mac`).
//! Accumulators carry enough guard bits that accumulation is exact; the
//! closing division runs in double precision on both cores. The approximate
//! core differs from the accurate one only by truncating low bits of the
//! SAC/MAC multiplier inputs.
//!
//! The switching run executes the first `n_ax` iterations on the
//! approximate core and the rest on the accurate core. Energy savings
//! follow from per-iteration core powers under the equal-frequency
//! assumption, and the design-space exploration searches, per candidate
//! truncation vector, for the largest `n_ax` that still passes quality
//! acceptance.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::CalibrationProblem;
use crate::fixedpoint::{
    fx_add, fx_mul, fx_sub, product_format, quantize, truncate_lsb, FixedFormat, FixedScalar,
    QuantStats, Rounding,
};
use crate::stefcal::{quality_acceptance, run, Backend, CoreTag, RunTrace, StefcalError};

#[derive(Debug, Error)]
pub enum AccelError {
    #[error("invalid datapath: {0}")]
    InvalidDatapath(String),
    #[error("invalid energy model: {0}")]
    InvalidEnergyModel(String),
    #[error("calibration failed: {0}")]
    Stefcal(#[from] StefcalError),
    #[error("fixed-point: {0}")]
    FixedPoint(#[from] crate::fixedpoint::FixedPointError),
}

/// One datapath input bus: its fixed-point format plus the number of low
/// bits the approximate core truncates before the multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalPath {
    pub word_len: u32,
    pub frac_len: u32,
    pub truncate_bits: u32,
}

impl SignalPath {
    pub fn format(&self) -> Result<FixedFormat, AccelError> {
        FixedFormat::new(self.word_len, self.frac_len).map_err(AccelError::from)
    }
}

/// Signal widths may not exceed this many bits in a datapath core.
pub const MAX_SIGNAL_BITS: u32 = 28;

/// Per-signal formats and truncation levels of one core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatapathConfig {
    /// Element-wise product bus carrying real model-covariance parts.
    pub h: SignalPath,
    /// Element-wise product bus carrying imaginary model-covariance parts.
    pub t: SignalPath,
    /// Square-accumulate input, real z part.
    pub e_sac: SignalPath,
    /// Square-accumulate input, imaginary z part.
    pub f_sac: SignalPath,
    /// Multiply-accumulate input carrying measured-covariance entries.
    pub e_mac: SignalPath,
    /// Multiply-accumulate input carrying z values.
    pub f_mac: SignalPath,
    /// Divider-output signal feeding the gains back into the element-wise
    /// product. Never truncated: it is the recursion state.
    pub g_feedback: SignalPath,
    /// Guard bits added to the accumulator words (ceil(log2(P)) for the
    /// target antenna count).
    pub accumulator_guard_bits: u32,
}

fn path(word_len: u32, frac_len: u32, truncate_bits: u32) -> SignalPath {
    SignalPath {
        word_len,
        frac_len,
        truncate_bits,
    }
}

impl DatapathConfig {
    /// The accurate core: signal widths (18, 18, 21, 20, 23, 24), no
    /// truncation, with the gain feedback at the full 28-bit signal budget.
    /// The fraction lengths are this model's documented choice, sized so
    /// that generator-normalised signals keep a 2x transient headroom:
    /// model entries within ±1, z parts and measured entries within ±2,
    /// gains within ±8.
    pub fn accurate() -> Self {
        Self {
            h: path(18, 17, 0),
            t: path(18, 17, 0),
            e_sac: path(21, 19, 0),
            f_sac: path(20, 18, 0),
            e_mac: path(23, 21, 0),
            f_mac: path(24, 22, 0),
            g_feedback: path(28, 24, 0),
            accumulator_guard_bits: 7,
        }
    }

    /// The approximate core: accurate widths with (0, 0, 8, 8, 8, 12) input
    /// bits truncated on (h, t, e_sac, f_sac, e_mac, f_mac).
    pub fn approximate() -> Self {
        Self::accurate().with_truncation([0, 0, 8, 8, 8, 12])
    }

    /// Same formats, different truncation vector
    /// (h, t, e_sac, f_sac, e_mac, f_mac order).
    pub fn with_truncation(&self, bits: [u32; 6]) -> Self {
        let mut dp = *self;
        dp.h.truncate_bits = bits[0];
        dp.t.truncate_bits = bits[1];
        dp.e_sac.truncate_bits = bits[2];
        dp.f_sac.truncate_bits = bits[3];
        dp.e_mac.truncate_bits = bits[4];
        dp.f_mac.truncate_bits = bits[5];
        dp
    }

    pub fn truncation(&self) -> [u32; 6] {
        [
            self.h.truncate_bits,
            self.t.truncate_bits,
            self.e_sac.truncate_bits,
            self.f_sac.truncate_bits,
            self.e_mac.truncate_bits,
            self.f_mac.truncate_bits,
        ]
    }

    pub fn total_truncated_bits(&self) -> u32 {
        self.truncation().iter().sum()
    }

    fn signals(&self) -> [(&'static str, SignalPath); 7] {
        [
            ("h", self.h),
            ("t", self.t),
            ("e_sac", self.e_sac),
            ("f_sac", self.f_sac),
            ("e_mac", self.e_mac),
            ("f_mac", self.f_mac),
            ("g_feedback", self.g_feedback),
        ]
    }

    pub fn validate(&self) -> Result<(), AccelError> {
        for (name, s) in self.signals() {
            if s.word_len == 0 || s.word_len > MAX_SIGNAL_BITS {
                return Err(AccelError::InvalidDatapath(format!(
                    "signal {name}: word length {} outside 1..={MAX_SIGNAL_BITS}",
                    s.word_len
                )));
            }
            if s.frac_len >= s.word_len {
                return Err(AccelError::InvalidDatapath(format!(
                    "signal {name}: fraction length {} not below word length {}",
                    s.frac_len, s.word_len
                )));
            }
            if s.truncate_bits >= s.word_len {
                return Err(AccelError::InvalidDatapath(format!(
                    "signal {name}: truncating {} bits of a {}-bit word",
                    s.truncate_bits, s.word_len
                )));
            }
        }
        if self.g_feedback.truncate_bits != 0 {
            return Err(AccelError::InvalidDatapath(
                "the gain-feedback signal cannot be truncated".into(),
            ));
        }
        // Accumulators must stay addressable by the 64-bit raw carrier.
        let sac = self.sac_accumulator_format();
        let mac = self.mac_accumulator_format();
        if sac.is_err() || mac.is_err() {
            return Err(AccelError::InvalidDatapath(
                "accumulator format exceeds 64 bits".into(),
            ));
        }
        Ok(())
    }

    /// Accumulator for the squared z parts: wide enough for both exact
    /// squarer outputs after binary-point alignment, plus guard bits.
    pub fn sac_accumulator_format(&self) -> Result<FixedFormat, AccelError> {
        let frac = (2 * self.e_sac.frac_len).max(2 * self.f_sac.frac_len);
        let e_aligned = 2 * self.e_sac.word_len + (frac - 2 * self.e_sac.frac_len);
        let f_aligned = 2 * self.f_sac.word_len + (frac - 2 * self.f_sac.frac_len);
        let word = e_aligned.max(f_aligned) + self.accumulator_guard_bits;
        FixedFormat::new(word, frac).map_err(AccelError::from)
    }

    /// Accumulator for the conjugated products: exact product width plus
    /// guard bits.
    pub fn mac_accumulator_format(&self) -> Result<FixedFormat, AccelError> {
        let word = self.e_mac.word_len + self.f_mac.word_len + self.accumulator_guard_bits;
        let frac = self.e_mac.frac_len + self.f_mac.frac_len;
        FixedFormat::new(word, frac).map_err(AccelError::from)
    }
}

/// Fixed-point datapath backend for the calibration kernels.
#[derive(Debug, Clone)]
pub struct FixedBackend {
    dp: DatapathConfig,
    tag: CoreTag,
    h_fmt: FixedFormat,
    t_fmt: FixedFormat,
    g_fmt: FixedFormat,
    e_sac_fmt: FixedFormat,
    f_sac_fmt: FixedFormat,
    e_mac_fmt: FixedFormat,
    f_mac_fmt: FixedFormat,
    pe_out_fmt: FixedFormat,
    sac_acc_fmt: FixedFormat,
    mac_acc_fmt: FixedFormat,
    stats: QuantStats,
}

/// Builds a datapath backend. The core tag is inferred from the truncation
/// vector: untruncated datapaths are labelled accurate.
pub fn make_backend(dp: &DatapathConfig) -> Result<FixedBackend, AccelError> {
    dp.validate()?;
    let m_wide = product_format(dp.h.format()?, dp.g_feedback.format()?);
    let t_wide = product_format(dp.t.format()?, dp.g_feedback.format()?);
    let pe_word = m_wide.word_len().max(t_wide.word_len());
    let pe_frac = m_wide.frac_len().max(t_wide.frac_len());
    // One extra integer bit so the cross-term adder cannot wrap.
    let pe_out_fmt =
        FixedFormat::new((pe_word + 1).min(64), pe_frac).map_err(AccelError::from)?;
    Ok(FixedBackend {
        dp: *dp,
        tag: if dp.total_truncated_bits() == 0 {
            CoreTag::Accurate
        } else {
            CoreTag::Approximate
        },
        h_fmt: dp.h.format()?,
        t_fmt: dp.t.format()?,
        g_fmt: dp.g_feedback.format()?,
        e_sac_fmt: dp.e_sac.format()?,
        f_sac_fmt: dp.f_sac.format()?,
        e_mac_fmt: dp.e_mac.format()?,
        f_mac_fmt: dp.f_mac.format()?,
        pe_out_fmt,
        sac_acc_fmt: dp.sac_accumulator_format()?,
        mac_acc_fmt: dp.mac_accumulator_format()?,
        stats: QuantStats::default(),
    })
}

impl FixedBackend {
    pub fn stats(&self) -> QuantStats {
        self.stats
    }

    pub fn config(&self) -> &DatapathConfig {
        &self.dp
    }

    /// Quantises onto a bus and applies its configured input truncation.
    fn bus(&mut self, x: f64, fmt: FixedFormat, trunc: u32) -> FixedScalar {
        let q = quantize(x, fmt, Rounding::NearestEven, &mut self.stats);
        if trunc == 0 {
            q
        } else {
            truncate_lsb(q, trunc).expect("validated truncation")
        }
    }
}

impl Backend for FixedBackend {
    fn begin_iteration(&mut self, _iteration: usize) {}

    fn z_column(&mut self, m_col: &[Complex64], g_prev: &[Complex64], out: &mut [Complex64]) {
        // (a+bi)(c+di) computed by four multipliers; products and the final
        // adds are exact in the widened product format, so the f64 carrier
        // holds the z values losslessly.
        let (h_fmt, h_tr) = (self.h_fmt, self.dp.h.truncate_bits);
        let (t_fmt, t_tr) = (self.t_fmt, self.dp.t.truncate_bits);
        let g_fmt = self.g_fmt;
        let h_prod = product_format(h_fmt, g_fmt);
        let t_prod = product_format(t_fmt, g_fmt);
        let out_fmt = self.pe_out_fmt;
        for ((m, g), o) in m_col.iter().zip(g_prev).zip(out.iter_mut()) {
            let mr = self.bus(m.re, h_fmt, h_tr);
            let mi = self.bus(m.im, t_fmt, t_tr);
            let gr = self.bus(g.re, g_fmt, 0);
            let gi = self.bus(g.im, g_fmt, 0);
            let rr = fx_mul(mr, gr, h_prod, &mut self.stats);
            let ii = fx_mul(mi, gi, t_prod, &mut self.stats);
            let ri = fx_mul(mr, gi, h_prod, &mut self.stats);
            let ir = fx_mul(mi, gr, t_prod, &mut self.stats);
            let re = fx_sub(rr, ii, out_fmt, &mut self.stats);
            let im = fx_add(ri, ir, out_fmt, &mut self.stats);
            *o = Complex64::new(re.value(), im.value());
        }
    }

    fn mac(&mut self, v_col: &[Complex64], z_col: &[Complex64]) -> Complex64 {
        // conj(v)·z = (vr·zr + vi·zi) + i(vr·zi − vi·zr)
        let (v_fmt, v_tr) = (self.e_mac_fmt, self.dp.e_mac.truncate_bits);
        let (z_fmt, z_tr) = (self.f_mac_fmt, self.dp.f_mac.truncate_bits);
        let prod = product_format(v_fmt, z_fmt);
        let acc_fmt = self.mac_acc_fmt;
        let mut acc_re = FixedScalar::zero(acc_fmt);
        let mut acc_im = FixedScalar::zero(acc_fmt);
        for (v, z) in v_col.iter().zip(z_col) {
            let vr = self.bus(v.re, v_fmt, v_tr);
            let vi = self.bus(v.im, v_fmt, v_tr);
            let zr = self.bus(z.re, z_fmt, z_tr);
            let zi = self.bus(z.im, z_fmt, z_tr);
            let rr = fx_mul(vr, zr, prod, &mut self.stats);
            let ii = fx_mul(vi, zi, prod, &mut self.stats);
            let ri = fx_mul(vr, zi, prod, &mut self.stats);
            let ir = fx_mul(vi, zr, prod, &mut self.stats);
            acc_re = fx_add(acc_re, fx_add(rr, ii, acc_fmt, &mut self.stats), acc_fmt, &mut self.stats);
            acc_im = fx_add(acc_im, fx_sub(ri, ir, acc_fmt, &mut self.stats), acc_fmt, &mut self.stats);
        }
        Complex64::new(acc_re.value(), acc_im.value())
    }

    fn sac(&mut self, z_col: &[Complex64]) -> f64 {
        let (re_fmt, re_tr) = (self.e_sac_fmt, self.dp.e_sac.truncate_bits);
        let (im_fmt, im_tr) = (self.f_sac_fmt, self.dp.f_sac.truncate_bits);
        let re_prod = product_format(re_fmt, re_fmt);
        let im_prod = product_format(im_fmt, im_fmt);
        let acc_fmt = self.sac_acc_fmt;
        let mut acc = FixedScalar::zero(acc_fmt);
        for z in z_col {
            let zr = self.bus(z.re, re_fmt, re_tr);
            let zi = self.bus(z.im, im_fmt, im_tr);
            let sq_re = fx_mul(zr, zr, re_prod, &mut self.stats);
            let sq_im = fx_mul(zi, zi, im_prod, &mut self.stats);
            acc = fx_add(acc, fx_add(sq_re, sq_im, acc_fmt, &mut self.stats), acc_fmt, &mut self.stats);
        }
        acc.value()
    }

    fn core_tag(&self) -> CoreTag {
        self.tag
    }

    fn denominator_floor(&self) -> f64 {
        self.sac_acc_fmt.resolution()
    }
}

/// Two cores with an iteration-indexed switch: iterations `1..=n_ax` run on
/// the approximate datapath, the rest on the accurate one.
#[derive(Debug, Clone)]
pub struct SwitchingBackend {
    accurate: FixedBackend,
    approximate: FixedBackend,
    n_ax: usize,
    on_approximate: bool,
}

impl SwitchingBackend {
    pub fn new(dp_acc: &DatapathConfig, dp_ax: &DatapathConfig, n_ax: usize) -> Result<Self, AccelError> {
        Ok(Self {
            accurate: make_backend(dp_acc)?,
            approximate: make_backend(dp_ax)?,
            n_ax,
            on_approximate: false,
        })
    }

    fn active(&mut self) -> &mut FixedBackend {
        if self.on_approximate {
            &mut self.approximate
        } else {
            &mut self.accurate
        }
    }

    pub fn stats(&self) -> QuantStats {
        let mut s = self.accurate.stats();
        s.merge(&self.approximate.stats());
        s
    }
}

impl Backend for SwitchingBackend {
    fn begin_iteration(&mut self, iteration: usize) {
        self.on_approximate = iteration <= self.n_ax;
        self.active().begin_iteration(iteration);
    }

    fn z_column(&mut self, m_col: &[Complex64], g_prev: &[Complex64], out: &mut [Complex64]) {
        self.active().z_column(m_col, g_prev, out)
    }

    fn mac(&mut self, v_col: &[Complex64], z_col: &[Complex64]) -> Complex64 {
        self.active().mac(v_col, z_col)
    }

    fn sac(&mut self, z_col: &[Complex64]) -> f64 {
        self.active().sac(z_col)
    }

    fn core_tag(&self) -> CoreTag {
        if self.on_approximate {
            self.approximate.core_tag()
        } else {
            self.accurate.core_tag()
        }
    }

    fn denominator_floor(&self) -> f64 {
        if self.on_approximate {
            self.approximate.denominator_floor()
        } else {
            self.accurate.denominator_floor()
        }
    }
}

/// Runs the two-core schedule and returns its trace (tagged per iteration).
pub fn run_hetero(
    problem: &CalibrationProblem,
    cfg: &crate::stefcal::StefcalConfig,
    dp_acc: &DatapathConfig,
    dp_ax: &DatapathConfig,
    n_ax: usize,
    reference: Option<&RunTrace>,
) -> Result<RunTrace, AccelError> {
    let mut backend = SwitchingBackend::new(dp_acc, dp_ax, n_ax)?;
    run(problem, cfg, &mut backend, reference).map_err(AccelError::from)
}

/// Per-iteration core powers and iteration split of a heterogeneous run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub p_acc_mw: f64,
    pub p_ax_mw: f64,
    pub n_acc: u64,
    pub n_ax: u64,
    /// Both cores run at the same clock, so per-iteration energies reduce to
    /// powers. The savings formula below is only valid under this flag.
    pub equal_frequency: bool,
}

/// Energy figures in power·iteration units (unit iteration time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// Accurate-only energy `E_a`.
    pub accurate_only: f64,
    /// Heterogeneous energy `E_h`.
    pub heterogeneous: f64,
    /// Overall savings `S_E = (E_a − E_h)/E_a`.
    pub savings: f64,
}

/// Overall energy savings of the two-core schedule:
/// `S_E = (P_acc − P_ax)·N_ax / (P_acc·N_acc)` at equal frequency.
pub fn energy_savings(model: &EnergyModel) -> Result<EnergyBreakdown, AccelError> {
    if !(model.p_acc_mw > 0.0) {
        return Err(AccelError::InvalidEnergyModel(format!(
            "accurate-core power {} must be positive",
            model.p_acc_mw
        )));
    }
    if model.p_ax_mw < 0.0 {
        return Err(AccelError::InvalidEnergyModel(format!(
            "approximate-core power {} must be non-negative",
            model.p_ax_mw
        )));
    }
    if model.n_ax > model.n_acc {
        return Err(AccelError::InvalidEnergyModel(format!(
            "approximate iterations {} exceed total iterations {}",
            model.n_ax, model.n_acc
        )));
    }
    if !model.equal_frequency {
        return Err(AccelError::InvalidEnergyModel(
            "power-based savings require the equal-frequency assumption".into(),
        ));
    }
    let e_a = model.p_acc_mw * model.n_acc as f64;
    let e_h = model.p_ax_mw * model.n_ax as f64
        + model.p_acc_mw * (model.n_acc - model.n_ax) as f64;
    let savings = (model.p_acc_mw - model.p_ax_mw) * model.n_ax as f64
        / (model.p_acc_mw * model.n_acc as f64);
    Ok(EnergyBreakdown {
        accurate_only: e_a,
        heterogeneous: e_h,
        savings,
    })
}

/// Approximate-core power estimate as a function of the truncation vector:
/// linear in the total truncated bits, calibrated to two anchors (zero
/// truncation at the accurate-core power, and a reference truncation level
/// at its synthesised power). Values between and beyond the anchors are an
/// interpolation, not synthesis results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub p_acc_mw: f64,
    pub anchor_truncated_bits: u32,
    pub anchor_power_mw: f64,
}

impl PowerModel {
    /// Anchors from the synthesised cores: 3.55 mW untruncated, 2.08 mW at
    /// the 36-bit reference truncation.
    pub fn default_anchors() -> Self {
        Self {
            p_acc_mw: 3.55,
            anchor_truncated_bits: 36,
            anchor_power_mw: 2.08,
        }
    }

    pub fn power_for(&self, truncation: [u32; 6]) -> f64 {
        let total: u32 = truncation.iter().sum();
        let slope = (self.p_acc_mw - self.anchor_power_mw) / self.anchor_truncated_bits as f64;
        (self.p_acc_mw - slope * total as f64).max(0.0)
    }
}

/// One explored design point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsePoint {
    pub truncation: [u32; 6],
    /// Largest approximate-iteration count passing quality acceptance.
    pub n_ax: usize,
    pub p_ax_mw: f64,
    pub s_e: f64,
}

/// Explores candidate truncation vectors: for each candidate, finds by
/// bisection the largest `n_ax` whose two-core run passes quality acceptance
/// against the accurate-core reference, prices the core with the power
/// model, and ranks points by savings. Bisection assumes acceptance is
/// monotone in `n_ax` (more approximate iterations never help quality).
pub fn explore_dse(
    problem: &CalibrationProblem,
    cfg: &crate::stefcal::StefcalConfig,
    dp_acc: &DatapathConfig,
    candidates: &[[u32; 6]],
    power: &PowerModel,
) -> Result<Vec<DsePoint>, AccelError> {
    let mut reference_backend = make_backend(dp_acc)?;
    let reference = run(problem, cfg, &mut reference_backend, None)?;
    if !reference.converged() {
        return Err(AccelError::Stefcal(StefcalError::NumericFailure {
            iteration: reference.iterations(),
        }));
    }
    let n_ref = reference.iterations();

    let mut points: Vec<(usize, DsePoint)> = candidates
        .par_iter()
        .enumerate()
        .map(|(idx, trunc)| -> Result<(usize, DsePoint), AccelError> {
            let dp_ax = dp_acc.with_truncation(*trunc);
            // A run that diverges under truncation simply fails acceptance.
            let accepts = |n_ax: usize| -> Result<bool, AccelError> {
                match run_hetero(problem, cfg, dp_acc, &dp_ax, n_ax, Some(&reference)) {
                    Ok(trace) => Ok(quality_acceptance(&trace, &reference).accepted),
                    Err(AccelError::Stefcal(_)) => Ok(false),
                    Err(other) => Err(other),
                }
            };
            // n_ax = 0 reproduces the reference run, so the bracket below is
            // always valid.
            let mut lo = 0usize;
            let mut hi = n_ref;
            if accepts(hi)? {
                lo = hi;
            } else {
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if accepts(mid)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            let p_ax = power.power_for(*trunc);
            let breakdown = energy_savings(&EnergyModel {
                p_acc_mw: power.p_acc_mw,
                p_ax_mw: p_ax,
                n_acc: n_ref as u64,
                n_ax: lo as u64,
                equal_frequency: true,
            })?;
            Ok((
                idx,
                DsePoint {
                    truncation: *trunc,
                    n_ax: lo,
                    p_ax_mw: p_ax,
                    s_e: breakdown.savings,
                },
            ))
        })
        .collect::<Result<_, _>>()?;

    points.sort_by(|a, b| {
        b.1.s_e
            .partial_cmp(&a.1.s_e)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    Ok(points.into_iter().map(|(_, p)| p).collect())
}
