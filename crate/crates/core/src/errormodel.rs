//! Statistical error injection at the calibration kernel outputs.
//!
//! Every iteration, each configured kernel site draws a gating decision:
//! inject when a uniform draw falls below the error rate *and* the iteration
//! is still inside the approximate-iteration budget. During an injected
//! iteration every element the site produces is perturbed multiplicatively
//! by `1 + ε`, where `ε = (EP·n + EM)/100` with `n` standard normal — a
//! Gaussian error relative to the kernel output. An unlimited budget gives
//! the plain statistical model; a finite budget restricts injection to the
//! initial iterations.
//!
//! Gating uses a uniform stream independent of the Gaussian stream so the
//! two can be reasoned about separately under reconfiguration.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stefcal::{Backend, CoreTag};

#[derive(Debug, Error)]
pub enum ErrorModelError {
    #[error("error rate {0} outside [0, 100]")]
    InvalidErrorRate(f64),
    #[error("error predictability {0} must be >= 0")]
    InvalidErrorPredictability(f64),
    #[error("injection site set is empty")]
    NoSites,
    #[error("percent budget requires a reference iteration count")]
    UnresolvedBudget,
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Kernel output an injection can target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionSite {
    ZKernel,
    MacKernel,
    SacKernel,
}

impl std::fmt::Display for InjectionSite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InjectionSite::ZKernel => write!(f, "z"),
            InjectionSite::MacKernel => write!(f, "mac"),
            InjectionSite::SacKernel => write!(f, "sac"),
        }
    }
}

const ALL_SITES: [InjectionSite; 3] = [
    InjectionSite::ZKernel,
    InjectionSite::MacKernel,
    InjectionSite::SacKernel,
];

/// Approximate-iteration budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum NaxBudget {
    /// No limit: every iteration is eligible (the plain statistical model).
    Unlimited,
    /// At most this many initial iterations are eligible.
    Iterations(usize),
    /// Percentage of a reference run's iteration count.
    PercentOfReference(f64),
}

impl NaxBudget {
    /// Resolves the budget to an absolute iteration cut-off.
    pub fn resolve(&self, reference_iterations: Option<usize>) -> Result<Option<usize>, ErrorModelError> {
        match self {
            NaxBudget::Unlimited => Ok(None),
            NaxBudget::Iterations(n) => Ok(Some(*n)),
            NaxBudget::PercentOfReference(pct) => {
                let n = reference_iterations.ok_or(ErrorModelError::UnresolvedBudget)?;
                Ok(Some(((pct / 100.0) * n as f64).floor() as usize))
            }
        }
    }
}

/// Parameters of one injection experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModelConfig {
    /// Error mean, percent of the kernel output.
    pub em: f64,
    /// Error predictability: standard deviation of the relative error, percent.
    pub ep: f64,
    /// Error rate: percent of iterations receiving injection.
    pub er: f64,
    pub n_ax: NaxBudget,
    pub sites: BTreeSet<InjectionSite>,
    pub seed: u64,
}

impl ErrorModelConfig {
    /// Statistical model over the Z kernel with unlimited budget.
    pub fn sam(em: f64, ep: f64, er: f64, seed: u64) -> Self {
        Self {
            em,
            ep,
            er,
            n_ax: NaxBudget::Unlimited,
            sites: BTreeSet::from([InjectionSite::ZKernel]),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ErrorModelError> {
        if !(0.0..=100.0).contains(&self.er) {
            return Err(ErrorModelError::InvalidErrorRate(self.er));
        }
        if self.ep < 0.0 || !self.ep.is_finite() {
            return Err(ErrorModelError::InvalidErrorPredictability(self.ep));
        }
        if self.sites.is_empty() {
            return Err(ErrorModelError::NoSites);
        }
        Ok(())
    }

    /// Wraps a backend with this injection model. A percent budget needs the
    /// reference run's iteration count.
    pub fn wrap<B: Backend>(
        &self,
        inner: B,
        reference_iterations: Option<usize>,
    ) -> Result<InjectingBackend<B>, ErrorModelError> {
        self.validate()?;
        let budget = self.n_ax.resolve(reference_iterations)?;
        Ok(InjectingBackend {
            inner,
            injector: ErrorInjector::new(self.clone(), budget),
        })
    }
}

/// Gating record for one (iteration, site) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionDecision {
    pub iteration: usize,
    pub site: InjectionSite,
    pub inject: bool,
    /// Uniform gate draw compared against ER/100.
    pub gate_draw: f64,
    /// First relative error drawn at this site during the iteration
    /// (elements after the first draw independently); `None` unless injecting.
    pub epsilon_g: Option<f64>,
}

/// Relative error draw `(EP·n + EM)/100`, `n ~ N(0, 1)`.
pub fn draw_epsilon<R: Rng>(em: f64, ep: f64, rng: &mut R) -> f64 {
    let n: f64 = rng.sample(StandardNormal);
    (ep * n + em) / 100.0
}

/// Applies a relative error to a kernel output: `K·(1 + ε)`.
pub fn apply_injection(value: Complex64, epsilon_g: f64) -> Complex64 {
    value * (1.0 + epsilon_g)
}

/// Decision logic and RNG streams for one wrapped run.
#[derive(Debug, Clone)]
pub struct ErrorInjector {
    cfg: ErrorModelConfig,
    budget: Option<usize>,
    gate_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    log: Vec<InjectionDecision>,
    // Index into `log` for the current iteration, per site, in ALL_SITES order.
    current: [Option<usize>; 3],
}

impl ErrorInjector {
    pub fn new(cfg: ErrorModelConfig, budget: Option<usize>) -> Self {
        let gate_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        Self {
            cfg,
            budget,
            gate_rng,
            noise_rng,
            log: Vec::new(),
            current: [None; 3],
        }
    }

    /// Draws the gating decisions for iteration `i`, one per configured site.
    pub fn begin_iteration(&mut self, iteration: usize) {
        self.current = [None; 3];
        let within_budget = self.budget.is_none_or(|b| iteration <= b);
        for (slot, site) in ALL_SITES.iter().enumerate() {
            if !self.cfg.sites.contains(site) {
                continue;
            }
            let gate_draw = self.gate_rng.random::<f64>();
            let inject = gate_draw < self.cfg.er / 100.0 && within_budget;
            self.current[slot] = Some(self.log.len());
            self.log.push(InjectionDecision {
                iteration,
                site: *site,
                inject,
                gate_draw,
                epsilon_g: None,
            });
        }
    }

    fn site_slot(site: InjectionSite) -> usize {
        ALL_SITES.iter().position(|s| *s == site).unwrap()
    }

    /// Whether the current iteration injects at `site`.
    fn site_injecting(&self, site: InjectionSite) -> bool {
        self.current[Self::site_slot(site)]
            .map(|idx| self.log[idx].inject)
            .unwrap_or(false)
    }

    /// Draws one per-element epsilon for an injecting site, recording the
    /// first draw of the iteration in the decision log.
    fn next_epsilon(&mut self, site: InjectionSite) -> f64 {
        let idx = self.current[Self::site_slot(site)].expect("site gated this iteration");
        let eps = draw_epsilon(self.cfg.em, self.cfg.ep, &mut self.noise_rng);
        self.log[idx].epsilon_g.get_or_insert(eps);
        eps
    }

    pub fn injected_now(&self) -> bool {
        self.current
            .iter()
            .flatten()
            .any(|idx| self.log[*idx].inject)
    }

    pub fn decisions(&self) -> &[InjectionDecision] {
        &self.log
    }

    /// Audit export: `i,site,inject,epsilon_g`.
    pub fn write_decision_csv<W: Write>(&self, mut w: W) -> Result<(), ErrorModelError> {
        writeln!(w, "i,site,inject,epsilon_g")?;
        for d in &self.log {
            let eps = d.epsilon_g.map(|e| e.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{}", d.iteration, d.site, d.inject, eps)?;
        }
        Ok(())
    }

    pub fn write_decision_csv_path(&self, path: &Path) -> Result<(), ErrorModelError> {
        let f = std::fs::File::create(path)?;
        self.write_decision_csv(std::io::BufWriter::new(f))
    }
}

/// Backend wrapper perturbing kernel outputs per the injection model.
#[derive(Debug, Clone)]
pub struct InjectingBackend<B: Backend> {
    inner: B,
    injector: ErrorInjector,
}

impl<B: Backend> InjectingBackend<B> {
    pub fn injector(&self) -> &ErrorInjector {
        &self.injector
    }

    pub fn into_parts(self) -> (B, ErrorInjector) {
        (self.inner, self.injector)
    }
}

impl<B: Backend> Backend for InjectingBackend<B> {
    fn begin_iteration(&mut self, iteration: usize) {
        self.inner.begin_iteration(iteration);
        self.injector.begin_iteration(iteration);
    }

    fn z_column(&mut self, m_col: &[Complex64], g_prev: &[Complex64], out: &mut [Complex64]) {
        self.inner.z_column(m_col, g_prev, out);
        if self.injector.site_injecting(InjectionSite::ZKernel) {
            for v in out.iter_mut() {
                let eps = self.injector.next_epsilon(InjectionSite::ZKernel);
                *v = apply_injection(*v, eps);
            }
        }
    }

    fn mac(&mut self, v_col: &[Complex64], z_col: &[Complex64]) -> Complex64 {
        let out = self.inner.mac(v_col, z_col);
        if self.injector.site_injecting(InjectionSite::MacKernel) {
            apply_injection(out, self.injector.next_epsilon(InjectionSite::MacKernel))
        } else {
            out
        }
    }

    fn sac(&mut self, z_col: &[Complex64]) -> f64 {
        let out = self.inner.sac(z_col);
        if self.injector.site_injecting(InjectionSite::SacKernel) {
            out * (1.0 + self.injector.next_epsilon(InjectionSite::SacKernel))
        } else {
            out
        }
    }

    fn core_tag(&self) -> CoreTag {
        self.inner.core_tag()
    }

    fn error_injected(&self) -> bool {
        self.injector.injected_now()
    }

    fn denominator_floor(&self) -> f64 {
        self.inner.denominator_floor()
    }
}
