//! Nested uniform-design search over `(log2 C, log2 gamma)` maximizing
//! cross-validated G-mean.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{binary_counts, stratified_kfold_labels, Dataset};
use crate::error::{Error, Result};
use crate::kernel_solver::{class_weights_from_counts, smo_train, SvmModel, SvmParams};
use crate::metrics::{measures, ConfusionMatrix};
use crate::scalar::Scalar;

pub const DEFAULT_INNER_FOLDS: usize = 5;
const FIRST_STAGE_SIZE: usize = 9;
const LATTICE_GENERATOR: usize = 4;

/// Closed interval on a log2 axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn at(&self, fraction: f64) -> f64 {
        self.lo + fraction * self.width()
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn is_degenerate(&self) -> bool {
        !(self.lo.is_finite() && self.hi.is_finite() && self.hi > self.lo)
    }

    /// Interval of half the width centered at `center`, kept inside `self`.
    fn halved_around(&self, center: f64) -> Range {
        let half = self.width() / 4.0;
        Range::new(self.clamp(center - half), self.clamp(center + half))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBounds {
    pub log2_c: Range,
    pub log2_gamma: Range,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            log2_c: Range::new(-5.0, 15.0),
            log2_gamma: Range::new(-15.0, 3.0),
        }
    }
}

impl SearchBounds {
    pub fn contains(&self, p: Candidate) -> bool {
        self.log2_c.contains(p.log2_c) && self.log2_gamma.contains(p.log2_gamma)
    }

    fn validate(&self) -> Result<()> {
        if self.log2_c.is_degenerate() || self.log2_gamma.is_degenerate() {
            return Err(Error::InvalidArgument(format!("degenerate search bounds {self:?}")));
        }
        Ok(())
    }
}

/// A point of the search domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub log2_c: f64,
    pub log2_gamma: f64,
}

impl Candidate {
    pub fn new(log2_c: f64, log2_gamma: f64) -> Self {
        Self { log2_c, log2_gamma }
    }

    pub fn c(&self) -> f64 {
        self.log2_c.exp2()
    }

    pub fn gamma(&self) -> f64 {
        self.log2_gamma.exp2()
    }

    /// Solver parameters for a training set with the given class counts.
    ///
    /// Weighted mode spreads `C` by inverse class size; otherwise both
    /// classes share `C`.
    pub fn params<T: Scalar>(
        &self,
        template: &SvmParams<T>,
        weighted: bool,
        n_pos: usize,
        n_neg: usize,
    ) -> Result<SvmParams<T>> {
        let base = T::of(self.c());
        let (c_pos, c_neg) = if weighted {
            class_weights_from_counts(n_pos, n_neg, base)?
        } else {
            (base, base)
        };
        let mut p = *template;
        p.c_pos = c_pos;
        p.c_neg = c_neg;
        p.kernel.gamma = T::of(self.gamma());
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    First,
    Second,
}

impl Stage {
    fn as_str(self) -> &'static str {
        match self {
            Stage::First => "first",
            Stage::Second => "second",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UdDesign {
    pub stage: Stage,
    pub points: Vec<Candidate>,
    /// Region the design covers.
    pub bounds: SearchBounds,
}

/// Builds a uniform design over `bounds`.
///
/// The first stage is the 9-point good-lattice design with generator 4.
/// The second stage covers half of each range around `center`: the center
/// itself plus four diagonal points a quarter of the halved range away,
/// clamped to `bounds`.
pub fn ud_points(stage: Stage, bounds: &SearchBounds, center: Option<Candidate>) -> Result<UdDesign> {
    bounds.validate()?;
    match stage {
        Stage::First => {
            let n = FIRST_STAGE_SIZE as f64;
            let points = (0..FIRST_STAGE_SIZE)
                .map(|i| {
                    let u = (i as f64 + 0.5) / n;
                    let v = ((i * LATTICE_GENERATOR) % FIRST_STAGE_SIZE) as f64 + 0.5;
                    Candidate::new(bounds.log2_c.at(u), bounds.log2_gamma.at(v / n))
                })
                .collect();
            Ok(UdDesign {
                stage,
                points,
                bounds: *bounds,
            })
        }
        Stage::Second => {
            let center = center.ok_or_else(|| {
                Error::InvalidArgument("second-stage design needs a center".into())
            })?;
            let center = Candidate::new(
                bounds.log2_c.clamp(center.log2_c),
                bounds.log2_gamma.clamp(center.log2_gamma),
            );
            let dc = bounds.log2_c.width() / 8.0;
            let dg = bounds.log2_gamma.width() / 8.0;
            let mut points = vec![center];
            for (sc, sg) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                points.push(Candidate::new(
                    bounds.log2_c.clamp(center.log2_c + sc * dc),
                    bounds.log2_gamma.clamp(center.log2_gamma + sg * dg),
                ));
            }
            Ok(UdDesign {
                stage,
                points,
                bounds: SearchBounds {
                    log2_c: bounds.log2_c.halved_around(center.log2_c),
                    log2_gamma: bounds.log2_gamma.halved_around(center.log2_gamma),
                },
            })
        }
    }
}

/// Binary training routine used by searches and the multilevel driver.
pub trait Trainer<T: Scalar>: Sync {
    fn train(&self, data: &Dataset<T>, rows: &[usize], params: &SvmParams<T>) -> Result<SvmModel<T>>;
}

impl<T, F> Trainer<T> for F
where
    T: Scalar,
    F: Fn(&Dataset<T>, &[usize], &SvmParams<T>) -> Result<SvmModel<T>> + Sync,
{
    fn train(&self, data: &Dataset<T>, rows: &[usize], params: &SvmParams<T>) -> Result<SvmModel<T>> {
        self(data, rows, params)
    }
}

/// Plain SMO without instance weights.
#[derive(Debug, Clone, Copy, Default)]
pub struct SmoTrainer;

impl<T: Scalar> Trainer<T> for SmoTrainer {
    fn train(&self, data: &Dataset<T>, rows: &[usize], params: &SvmParams<T>) -> Result<SvmModel<T>> {
        smo_train(data, rows, params, None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig<T> {
    pub bounds: SearchBounds,
    pub folds: usize,
    /// Inverse-class-size penalties when true.
    pub weighted: bool,
    /// Solver settings other than `C` and `gamma`.
    pub template: SvmParams<T>,
    /// Class sizes used for weighting in place of the counts of the rows
    /// being trained on.
    pub class_counts: Option<(usize, usize)>,
}

impl<T: Scalar> SearchConfig<T> {
    pub fn new(weighted: bool) -> Self {
        Self {
            bounds: SearchBounds::default(),
            folds: DEFAULT_INNER_FOLDS,
            weighted,
            template: SvmParams::standard(T::one(), T::one()),
            class_counts: None,
        }
    }

    /// Solver parameters for `candidate` on training rows with the given
    /// class counts.
    pub fn params_for(&self, candidate: Candidate, n_pos: usize, n_neg: usize) -> Result<SvmParams<T>> {
        let (p, n) = self.class_counts.unwrap_or((n_pos, n_neg));
        candidate.params(&self.template, self.weighted, p, n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub stage: Stage,
    pub candidate: Candidate,
    /// Cross-validated G-mean; `None` when training or scoring failed.
    pub gmean: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult<T> {
    pub best: Candidate,
    /// Parameters for the full search rows at the best candidate.
    pub best_params: SvmParams<T>,
    pub best_gmean: f64,
    /// Every distinct candidate in evaluation order.
    pub evaluations: Vec<Evaluation>,
    /// Region covered by the last stage, for later local re-searches.
    pub final_bounds: SearchBounds,
}

impl<T: Scalar> SearchResult<T> {
    /// `stage,log2_c,log2_gamma,gmean` lines, empty G-mean for failures.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("stage,log2_c,log2_gamma,gmean\n");
        for e in &self.evaluations {
            let g = e.gmean.map(|g| format!("{g:.6}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{}",
                e.stage.as_str(),
                e.candidate.log2_c,
                e.candidate.log2_gamma,
                g
            );
        }
        out
    }
}

/// G-mean of the pooled out-of-fold confusion matrix.
pub fn cross_validated_gmean<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    candidate: Candidate,
    config: &SearchConfig<T>,
    trainer: &dyn Trainer<T>,
    seed: u64,
) -> Result<f64> {
    cross_validated_gmean_with(data, rows, &[], candidate, config, trainer, seed)
}

/// Like [`cross_validated_gmean`], but `holdout` rows are never trained on:
/// they are dealt round-robin (after a seeded shuffle) into the test folds.
pub fn cross_validated_gmean_with<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    holdout: &[usize],
    candidate: Candidate,
    config: &SearchConfig<T>,
    trainer: &dyn Trainer<T>,
    seed: u64,
) -> Result<f64> {
    let labels: Vec<i32> = rows.iter().map(|&r| data.labels()[r]).collect();
    let split = stratified_kfold_labels(&labels, config.folds, seed)?;
    let mut extra = holdout.to_vec();
    extra.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut cm = ConfusionMatrix::default();
    for fold in 0..config.folds {
        let train: Vec<usize> = split.train_rows(fold).into_iter().map(|i| rows[i]).collect();
        let mut test: Vec<usize> = split.test_rows(fold).into_iter().map(|i| rows[i]).collect();
        test.extend(extra.iter().skip(fold).step_by(config.folds));
        let (n_pos, n_neg) = binary_counts(data.labels(), &train);
        let params = config.params_for(candidate, n_pos, n_neg)?;
        let model = trainer.train(data, &train, &params)?;
        for (p, &r) in model.predict_rows(data, &test)?.into_iter().zip(&test) {
            cm.record(p, data.labels()[r])?;
        }
    }
    Ok(measures(&cm)?.gmean)
}

/// Whether `a` beats `b`: higher G-mean, then smaller C, then smaller gamma.
fn better(a: (f64, Candidate), b: (f64, Candidate)) -> bool {
    if a.0 != b.0 {
        return a.0 > b.0;
    }
    if a.1.log2_c != b.1.log2_c {
        return a.1.log2_c < b.1.log2_c;
    }
    a.1.log2_gamma < b.1.log2_gamma
}

/// Evaluates `design` points not already in `evaluations`, in order.
fn evaluate_design<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    design: &UdDesign,
    config: &SearchConfig<T>,
    holdout: &[usize],
    trainer: &dyn Trainer<T>,
    seed: u64,
    evaluations: &mut Vec<Evaluation>,
) {
    let mut fresh: Vec<Candidate> = Vec::new();
    for &p in &design.points {
        if !evaluations.iter().any(|e| e.candidate == p) && !fresh.contains(&p) {
            fresh.push(p);
        }
    }
    let results: Vec<Result<f64>> = fresh
        .par_iter()
        .map(|&p| cross_validated_gmean_with(data, rows, holdout, p, config, trainer, seed))
        .collect();
    for (candidate, result) in fresh.into_iter().zip(results) {
        let (gmean, error) = match result {
            Ok(g) => (Some(g), None),
            Err(e) => {
                log::debug!("candidate {candidate:?} failed: {e}");
                (None, Some(e.to_string()))
            }
        };
        evaluations.push(Evaluation {
            stage: design.stage,
            candidate,
            gmean,
            error,
        });
    }
}

fn best_of(evaluations: &[Evaluation]) -> Option<(f64, Candidate)> {
    let mut best: Option<(f64, Candidate)> = None;
    for e in evaluations {
        if let Some(g) = e.gmean {
            if best.map_or(true, |b| better((g, e.candidate), b)) {
                best = Some((g, e.candidate));
            }
        }
    }
    best
}

fn finish<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    config: &SearchConfig<T>,
    evaluations: Vec<Evaluation>,
    final_bounds: SearchBounds,
) -> Result<SearchResult<T>> {
    let (best_gmean, best) = best_of(&evaluations).ok_or_else(|| {
        let first = evaluations
            .iter()
            .find_map(|e| e.error.clone())
            .unwrap_or_default();
        Error::SearchFailed(first)
    })?;
    let (n_pos, n_neg) = binary_counts(data.labels(), rows);
    let best_params = config.params_for(best, n_pos, n_neg)?;
    Ok(SearchResult {
        best,
        best_params,
        best_gmean,
        evaluations,
        final_bounds,
    })
}

/// Two-stage search: 9 lattice points over `config.bounds`, then 5 points
/// over the halved region around the first-stage winner.
pub fn nested_ud_search<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    config: &SearchConfig<T>,
    trainer: &dyn Trainer<T>,
    seed: u64,
) -> Result<SearchResult<T>> {
    check_search_rows(data, rows, config.folds)?;
    let first = ud_points(Stage::First, &config.bounds, None)?;
    let mut evaluations = Vec::with_capacity(14);
    evaluate_design(data, rows, &first, config, &[], trainer, seed, &mut evaluations);
    let (_, winner) = best_of(&evaluations).ok_or_else(|| {
        Error::SearchFailed(evaluations.iter().find_map(|e| e.error.clone()).unwrap_or_default())
    })?;
    let second = ud_points(Stage::Second, &config.bounds, Some(winner))?;
    evaluate_design(data, rows, &second, config, &[], trainer, seed, &mut evaluations);
    finish(data, rows, config, evaluations, second.bounds)
}

/// Single second-stage design over `bounds` around `center`. Rows in
/// `holdout` only ever appear in test folds.
pub fn local_ud_search<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    holdout: &[usize],
    center: Candidate,
    bounds: &SearchBounds,
    config: &SearchConfig<T>,
    trainer: &dyn Trainer<T>,
    seed: u64,
) -> Result<SearchResult<T>> {
    check_search_rows(data, rows, config.folds)?;
    let design = ud_points(Stage::Second, bounds, Some(center))?;
    let mut evaluations = Vec::with_capacity(5);
    evaluate_design(data, rows, &design, config, holdout, trainer, seed, &mut evaluations);
    finish(data, rows, config, evaluations, design.bounds)
}

fn check_search_rows<T: Scalar>(data: &Dataset<T>, rows: &[usize], folds: usize) -> Result<()> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("folds = {folds}, need at least 2")));
    }
    let (n_pos, n_neg) = binary_counts(data.labels(), rows);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    if n_pos + n_neg != rows.len() {
        return Err(Error::InvalidArgument("search needs labels in {-1, +1}".into()));
    }
    Ok(())
}

/// Nested search followed by a fit on all `rows` with the winner.
pub fn search_and_fit<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    config: &SearchConfig<T>,
    trainer: &dyn Trainer<T>,
    seed: u64,
) -> Result<(SvmModel<T>, SearchResult<T>)> {
    let search = nested_ud_search(data, rows, config, trainer, seed)?;
    let model = trainer.train(data, rows, &search.best_params)?;
    Ok((model, search))
}
