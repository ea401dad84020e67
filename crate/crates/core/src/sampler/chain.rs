use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::store::{PosteriorStore, RunReport, StoreBuilder};
use super::{gibbs_variance, SamplerConfig};
use crate::design::{AssembledModel, CrossprodPlan, DesignBlock, EffectKind};
use crate::families::{Family, ParamVector};
use crate::linalg::{Cholesky, Symbolic};
use crate::special::LN_SQRT_2PI;
use crate::{Error, Result};

const MAX_HALVINGS: usize = 30;
const ABORT_WINDOW: usize = 200;
const ABORT_LIMIT: usize = 100;

/// Current values of everything the chain tracks.
#[derive(Debug, Clone)]
pub struct ChainState {
    /// Sampled coefficients per parameter and block.
    pub coefs: Vec<Vec<Vec<f64>>>,
    /// Smoothing variance per parameter and block (unused for flat blocks).
    pub tau2: Vec<Vec<f64>>,
    /// Cached predictors per parameter.
    pub eta: Vec<Vec<f64>>,
    pub theta: Vec<ParamVector>,
    pub loglik: f64,
    pub iteration: usize,
    pub clamp_events: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockStats {
    pub proposals: u64,
    pub accepted: u64,
    pub aborted: u64,
    pub jittered: u64,
}

impl BlockStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

/// An IWLS proposal together with everything needed to accept it.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub param: usize,
    pub block: usize,
    pub draw: Vec<f64>,
    /// Mean of the forward proposal density.
    pub mean: Vec<f64>,
    /// log q(draw | current).
    pub forward: f64,
    /// log q(current | draw); `None` when the proposal is rejected outright.
    pub reverse: Option<f64>,
    pub loglik: f64,
    eta: Vec<f64>,
    theta_k: Vec<f64>,
    score: Vec<f64>,
    weight: Vec<f64>,
    clamps: u64,
}

impl Proposal {
    /// log-likelihood at the proposal is finite and the reverse density
    /// could be formed.
    pub fn is_valid(&self) -> bool {
        self.reverse.is_some() && self.loglik.is_finite()
    }
}

struct BlockWork {
    symbolic: Arc<Symbolic>,
    plan: CrossprodPlan,
    q: Option<Array2<f64>>,
    penalty: Array2<f64>,
    penalized: bool,
    rank: usize,
    hyper: (f64, f64),
}

struct Working {
    score: Vec<f64>,
    weight: Vec<f64>,
}

/// Gaussian approximation N(mean, P⁻¹) of one block's full conditional.
struct Approx {
    mean: Vec<f64>,
    chol: Cholesky,
    jittered: bool,
}

impl Approx {
    fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.mean.len() as f64;
        0.5 * self.chol.log_det() - d * LN_SQRT_2PI - 0.5 * self.chol.mahalanobis(x, &self.mean)
    }
}

pub struct Sampler<'m> {
    model: &'m AssembledModel,
    y: &'m [f64],
    log_y: Vec<f64>,
    family: Family,
    config: SamplerConfig,
    work: Vec<Vec<BlockWork>>,
    state: ChainState,
    cache: Vec<Option<Working>>,
    rng: ChaCha8Rng,
    stats: Vec<Vec<BlockStats>>,
    aborts: Vec<Vec<VecDeque<bool>>>,
    audits: usize,
    max_audit_diff: f64,
}

impl<'m> Sampler<'m> {
    pub fn new(model: &'m AssembledModel, y: &'m [f64], config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let family = model.family;
        let n = model.n_obs();
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} responses for a design with {n} rows",
                y.len()
            )));
        }
        if model.predictors.len() != family.n_params() {
            return Err(Error::DimensionMismatch(format!(
                "{} predictors for the {} family",
                model.predictors.len(),
                family
            )));
        }
        let start = family.moment_start(y)?;
        let start_eta = family.eta_from_params(&start);

        let mut work = Vec::new();
        let mut coefs = Vec::new();
        let mut tau2 = Vec::new();
        for (k, pred) in model.predictors.iter().enumerate() {
            let mut wk = Vec::new();
            let mut ck = Vec::new();
            for blk in &pred.blocks {
                let d = blk.dim();
                wk.push(BlockWork {
                    symbolic: Arc::new(Symbolic::dense(d)),
                    plan: blk.raw_design().crossprod_plan(),
                    q: blk.constraint().map(|c| c.matrix().clone()),
                    penalty: blk.effective_penalty().clone(),
                    penalized: blk.is_penalized(),
                    rank: blk.penalty_rank(),
                    hyper: blk.hyper(),
                });
                let mut g = vec![0.0; d];
                if let (EffectKind::Fixed, Some(name)) = (blk.kind(), blk.coef_names().first()) {
                    if name == "(Intercept)" {
                        g[0] = start_eta[k];
                    }
                }
                ck.push(g);
            }
            tau2.push(vec![config.tau2_start; pred.blocks.len()]);
            work.push(wk);
            coefs.push(ck);
        }
        let stats = model
            .predictors
            .iter()
            .map(|p| vec![BlockStats::default(); p.blocks.len()])
            .collect();
        let aborts = model
            .predictors
            .iter()
            .map(|p| vec![VecDeque::with_capacity(ABORT_WINDOW); p.blocks.len()])
            .collect();
        let mut sampler = Self {
            model,
            y,
            log_y: y.iter().map(|v| v.ln()).collect(),
            family,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            work,
            state: ChainState {
                coefs,
                tau2,
                eta: Vec::new(),
                theta: Vec::new(),
                loglik: 0.0,
                iteration: 0,
                clamp_events: 0,
            },
            cache: (0..family.n_params()).map(|_| None).collect(),
            stats,
            aborts,
            audits: 0,
            max_audit_diff: 0.0,
        };
        sampler.resync();
        if !sampler.state.loglik.is_finite() {
            return Err(Error::Numerical("log-likelihood at the starting values is not finite".into()));
        }
        Ok(sampler)
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn stats(&self) -> &[Vec<BlockStats>] {
        &self.stats
    }

    fn block(&self, k: usize, j: usize) -> &'m DesignBlock {
        &self.model.predictors[k].blocks[j]
    }

    /// Recomputes predictors from the coefficients, returning the largest
    /// deviation from the cached values.
    fn resync(&mut self) -> f64 {
        let n = self.y.len();
        let mut diff: f64 = 0.0;
        let mut etas = Vec::with_capacity(self.family.n_params());
        for (k, pred) in self.model.predictors.iter().enumerate() {
            let mut eta = vec![0.0; n];
            for (j, blk) in pred.blocks.iter().enumerate() {
                blk.raw_design().add_mul_to(&blk.expand(&self.state.coefs[k][j]), &mut eta);
            }
            if let Some(old) = self.state.eta.get(k) {
                for (a, b) in eta.iter().zip(old) {
                    diff = diff.max((a - b).abs());
                }
            }
            etas.push(eta);
        }
        self.state.eta = etas;
        let mut buf = vec![0.0; self.family.n_params()];
        self.state.theta = (0..n)
            .map(|i| {
                for (k, e) in buf.iter_mut().enumerate() {
                    *e = self.state.eta[k][i];
                }
                self.family.params_from_eta(&buf).0
            })
            .collect();
        self.state.loglik = self
            .y
            .iter()
            .zip(&self.state.theta)
            .map(|(&y, t)| self.family.log_density_unchecked(y, t))
            .sum();
        self.cache.iter_mut().for_each(|c| *c = None);
        diff
    }

    /// Overwrites one block's coefficients (the predictors follow).
    pub fn set_block(&mut self, k: usize, j: usize, gamma: &[f64]) {
        assert_eq!(gamma.len(), self.state.coefs[k][j].len());
        self.state.coefs[k][j] = gamma.to_vec();
        self.resync();
    }

    pub fn set_tau2(&mut self, k: usize, j: usize, tau2: f64) {
        self.state.tau2[k][j] = tau2;
    }

    fn ensure_working(&mut self, k: usize) {
        if self.cache[k].is_some() {
            return;
        }
        let n = self.y.len();
        let mut score = Vec::with_capacity(n);
        let mut weight = Vec::with_capacity(n);
        for ((&y, &ly), t) in self.y.iter().zip(&self.log_y).zip(&self.state.theta) {
            let ker = self.family.kernel_with_log(y, ly, t, k);
            score.push(ker.score);
            weight.push(ker.weight);
        }
        self.cache[k] = Some(Working { score, weight });
    }

    /// IWLS approximation at coefficients with block fit `fit = Z̃γ`.
    fn approximate(&self, k: usize, j: usize, fit: &[f64], score: &[f64], weight: &[f64]) -> Option<Approx> {
        let blk = self.block(k, j);
        let bw = &self.work[k][j];
        let z = blk.raw_design();
        let r: Vec<f64> = fit.iter().zip(score).zip(weight).map(|((f, v), w)| w * f + v).collect();
        let raw_rhs = Array1::from(z.t_mul_vec(&r));
        let raw_xwx = bw.plan.apply(weight);
        let (mut p, rhs) = match &bw.q {
            Some(q) => (q.t().dot(&raw_xwx).dot(q), q.t().dot(&raw_rhs)),
            None => (raw_xwx, raw_rhs),
        };
        if bw.penalized {
            p.scaled_add(1.0 / self.state.tau2[k][j], &bw.penalty);
        }
        let (chol, jittered) = bw.symbolic.factor_dense_with_jitter(&p).ok()?;
        let mean = chol.solve(rhs.as_slice().expect("contiguous"));
        if mean.iter().any(|m| !m.is_finite()) {
            return None;
        }
        Some(Approx { mean, chol, jittered })
    }

    fn penalty_quad(&self, k: usize, j: usize, gamma: &[f64]) -> f64 {
        let bw = &self.work[k][j];
        if !bw.penalized {
            return 0.0;
        }
        let g = Array1::from(gamma.to_vec());
        g.dot(&bw.penalty.dot(&g))
    }

    /// IWLS proposal for block `j` of parameter `k`. With `noise` the
    /// standard-normal vector is supplied by the caller; otherwise it is
    /// drawn from the chain's generator. `Err` means the forward
    /// factorization failed even after jitter.
    pub fn propose(&mut self, k: usize, j: usize, noise: Option<&[f64]>) -> Result<Proposal> {
        self.propose_inner(k, j, Target::Noise(noise))
    }

    /// Evaluates the forward and reverse proposal densities for moving to
    /// `target`.
    pub fn propose_to(&mut self, k: usize, j: usize, target: &[f64]) -> Result<Proposal> {
        self.propose_inner(k, j, Target::Point(target))
    }

    fn propose_inner(&mut self, k: usize, j: usize, target: Target<'_>) -> Result<Proposal> {
        self.ensure_working(k);
        let blk = self.block(k, j);
        let d = blk.dim();
        let gamma = self.state.coefs[k][j].clone();
        let beta = blk.expand(&gamma);
        let z = blk.raw_design();
        let fit = z.mul_vec(&beta);
        let working = self.cache[k].as_ref().expect("working cache");
        let fwd = self
            .approximate(k, j, &fit, &working.score, &working.weight)
            .ok_or_else(|| Error::Numerical(format!("proposal precision of block '{}' not positive definite", blk.label())))?;
        if fwd.jittered {
            self.stats[k][j].jittered += 1;
        }
        let draw = match target {
            Target::Point(t) => {
                assert_eq!(t.len(), d);
                t.to_vec()
            }
            Target::Noise(Some(z)) => {
                assert_eq!(z.len(), d);
                fwd.chol.whiten_inverse(&fwd.mean, z)
            }
            Target::Noise(None) => {
                let z: Vec<f64> = (0..d).map(|_| self.rng.sample(StandardNormal)).collect();
                fwd.chol.whiten_inverse(&fwd.mean, &z)
            }
        };
        let forward = fwd.log_density(&draw);

        let beta_new = blk.expand(&draw);
        let delta: Vec<f64> = beta_new.iter().zip(&beta).map(|(a, b)| a - b).collect();
        let dfit = z.mul_vec(&delta);
        let link = self.family.link(k);
        let n = self.y.len();
        let mut eta = Vec::with_capacity(n);
        let mut theta_k = Vec::with_capacity(n);
        let mut score = Vec::with_capacity(n);
        let mut weight = Vec::with_capacity(n);
        let mut loglik = 0.0;
        let mut clamps = 0u64;
        for i in 0..n {
            let e = self.state.eta[k][i] + dfit[i];
            let (v, clamped) = link.response(e);
            clamps += clamped as u64;
            let mut t = self.state.theta[i];
            t = t.with(k, v);
            let ker = self.family.kernel_with_log(self.y[i], self.log_y[i], &t, k);
            loglik += ker.log_density;
            eta.push(e);
            theta_k.push(v);
            score.push(ker.score);
            weight.push(ker.weight);
        }
        let mut proposal = Proposal {
            param: k,
            block: j,
            draw,
            mean: fwd.mean.clone(),
            forward,
            reverse: None,
            loglik,
            eta,
            theta_k,
            score,
            weight,
            clamps,
        };
        let usable = loglik.is_finite() && proposal.score.iter().chain(&proposal.weight).all(|v| v.is_finite());
        if usable {
            let fit_new: Vec<f64> = fit.iter().zip(&dfit).map(|(a, b)| a + b).collect();
            if let Some(rev) = self.approximate(k, j, &fit_new, &proposal.score, &proposal.weight) {
                if rev.jittered {
                    self.stats[k][j].jittered += 1;
                }
                proposal.reverse = Some(rev.log_density(&gamma));
            }
        }
        Ok(proposal)
    }

    /// Log acceptance probability of a valid proposal.
    pub fn log_acceptance(&self, p: &Proposal) -> f64 {
        let Some(reverse) = p.reverse else {
            return f64::NEG_INFINITY;
        };
        if !p.loglik.is_finite() {
            return f64::NEG_INFINITY;
        }
        let (k, j) = (p.param, p.block);
        let tau2 = self.state.tau2[k][j];
        let old = &self.state.coefs[k][j];
        let prior = -(self.penalty_quad(k, j, &p.draw) - self.penalty_quad(k, j, old)) / (2.0 * tau2);
        p.loglik - self.state.loglik + prior + reverse - p.forward
    }

    /// Metropolis–Hastings decision; on acceptance the state and caches
    /// move to the proposal.
    pub fn mh_accept(&mut self, p: Proposal) -> bool {
        let (k, j) = (p.param, p.block);
        self.stats[k][j].proposals += 1;
        self.state.clamp_events += p.clamps;
        let log_alpha = self.log_acceptance(&p);
        let u: f64 = self.rng.random();
        if !(log_alpha >= 0.0 || u.ln() < log_alpha) {
            return false;
        }
        self.stats[k][j].accepted += 1;
        self.commit(p);
        true
    }

    fn commit(&mut self, p: Proposal) {
        let k = p.param;
        let j = p.block;
        for (t, &v) in self.state.theta.iter_mut().zip(&p.theta_k) {
            *t = t.with(k, v);
        }
        self.state.eta[k] = p.eta;
        self.state.loglik = p.loglik;
        self.state.coefs[k][j] = p.draw;
        for (m, c) in self.cache.iter_mut().enumerate() {
            *c = None;
            if m == k {
                *c = Some(Working {
                    score: p.score.clone(),
                    weight: p.weight.clone(),
                });
            }
        }
    }

    /// Damped IWLS steps towards the penalized posterior mode at the
    /// current variances, at most `sweeps` passes over all blocks. Every
    /// step is halved until the penalized log-posterior does not decrease.
    /// Returns the number of sweeps performed.
    pub fn warm_up(&mut self, sweeps: usize) -> usize {
        let order: Vec<(usize, usize)> = self
            .model
            .predictors
            .iter()
            .enumerate()
            .flat_map(|(k, p)| (0..p.blocks.len()).map(move |j| (k, j)))
            .collect();
        let objective = |s: &Self, k: usize, j: usize, loglik: f64, gamma: &[f64]| {
            if s.work[k][j].penalized {
                loglik - s.penalty_quad(k, j, gamma) / (2.0 * s.state.tau2[k][j])
            } else {
                loglik
            }
        };
        let mut done = 0;
        for _ in 0..sweeps {
            done += 1;
            let mut gain = 0.0;
            for &(k, j) in &order {
                let current = self.state.coefs[k][j].clone();
                let before = objective(self, k, j, self.state.loglik, &current);
                let zero = vec![0.0; current.len()];
                let Ok(mut p) = self.propose(k, j, Some(&zero)) else {
                    continue;
                };
                for _ in 0..MAX_HALVINGS {
                    let after = objective(self, k, j, p.loglik, &p.draw);
                    if after.is_finite() && after >= before {
                        gain += after - before;
                        self.commit(p);
                        break;
                    }
                    let half: Vec<f64> = p.draw.iter().zip(&current).map(|(a, b)| 0.5 * (a + b)).collect();
                    match self.propose_to(k, j, &half) {
                        Ok(next) => p = next,
                        Err(_) => break,
                    }
                }
            }
            if gain <= 1e-8 * (1.0 + self.state.loglik.abs()) {
                break;
            }
        }
        for s in self.stats.iter_mut().flatten() {
            *s = BlockStats::default();
        }
        done
    }

    /// Gibbs update of one block's smoothing variance.
    pub fn update_variance(&mut self, k: usize, j: usize) {
        let bw = &self.work[k][j];
        if !bw.penalized {
            return;
        }
        let (a, b, rank) = (bw.hyper.0, bw.hyper.1, bw.rank);
        let quad = self.penalty_quad(k, j, &self.state.coefs[k][j]).max(0.0);
        self.state.tau2[k][j] = gibbs_variance(quad, rank, a, b, &mut self.rng);
    }

    fn record_abort(&mut self, k: usize, j: usize, aborted: bool) -> Result<()> {
        let window = &mut self.aborts[k][j];
        if window.len() == ABORT_WINDOW {
            window.pop_front();
        }
        window.push_back(aborted);
        if window.iter().filter(|a| **a).count() > ABORT_LIMIT {
            return Err(Error::SamplerAborted(format!(
                "block '{}' of parameter '{}': more than {ABORT_LIMIT} of the last {ABORT_WINDOW} proposals failed",
                self.block(k, j).label(),
                self.model.predictors[k].param
            )));
        }
        Ok(())
    }

    /// One full sweep: every coefficient block, then every variance.
    pub fn sweep(&mut self) -> Result<()> {
        let mut order: Vec<(usize, usize)> = self
            .model
            .predictors
            .iter()
            .enumerate()
            .flat_map(|(k, p)| (0..p.blocks.len()).map(move |j| (k, j)))
            .collect();
        if self.config.random_scan {
            order.shuffle(&mut self.rng);
        }
        for &(k, j) in &order {
            match self.propose(k, j, None) {
                Ok(p) => {
                    let aborted = p.reverse.is_none() && p.loglik.is_finite();
                    if aborted {
                        self.stats[k][j].aborted += 1;
                    }
                    self.mh_accept(p);
                    self.record_abort(k, j, aborted)?;
                }
                Err(_) => {
                    self.stats[k][j].proposals += 1;
                    self.stats[k][j].aborted += 1;
                    self.record_abort(k, j, true)?;
                }
            }
        }
        for &(k, j) in &order {
            self.update_variance(k, j);
        }
        self.state.iteration += 1;
        if self.state.iteration.is_multiple_of(self.config.audit_every) {
            self.audit();
        }
        Ok(())
    }

    /// Compares cached predictors with a full recomputation and resyncs.
    pub fn audit(&mut self) -> f64 {
        let diff = self.resync();
        self.audits += 1;
        self.max_audit_diff = self.max_audit_diff.max(diff);
        diff
    }

    pub fn run(mut self) -> Result<PosteriorStore> {
        let started = Instant::now();
        let mut builder = StoreBuilder::new(self.model, self.config.n_retained());
        let cfg = self.config.clone();
        self.warm_up(cfg.warmup);
        for it in 1..=cfg.iterations {
            self.sweep()?;
            if it > cfg.burn_in && (it - cfg.burn_in).is_multiple_of(cfg.thin) {
                builder.push(&self.state);
            }
        }
        if !cfg.iterations.is_multiple_of(cfg.audit_every) {
            self.audit();
        }
        let report = RunReport {
            family: self.family,
            iterations: cfg.iterations,
            burn_in: cfg.burn_in,
            thin: cfg.thin,
            seed: cfg.seed,
            n_obs: self.y.len(),
            stats: self
                .model
                .predictors
                .iter()
                .zip(&self.stats)
                .flat_map(|(p, s)| {
                    p.blocks
                        .iter()
                        .zip(s)
                        .map(move |(b, st)| (format!("{}.{}", p.param, b.label()), st.clone()))
                })
                .collect(),
            clamp_events: self.state.clamp_events,
            audits: self.audits,
            max_audit_diff: self.max_audit_diff,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        };
        Ok(builder.finish(report))
    }
}

enum Target<'a> {
    Noise(Option<&'a [f64]>),
    Point(&'a [f64]),
}
