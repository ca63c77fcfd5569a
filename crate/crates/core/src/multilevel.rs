//! Multilevel training: per-class coarsening over kNN graphs, a searched
//! SVM at the coarsest level, and support-vector-guided refinement back up
//! to the finest level.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{binary_counts, Dataset, NEGATIVE, POSITIVE};
use crate::error::{Error, Result};
use crate::kernel_solver::{SvmModel, SvmParams};
use crate::knn_graph::{build_aknn, AknnGraph, KnnMode, DEFAULT_K};
use crate::metrics::{accumulate, measures};
use crate::model_select::{
    local_ud_search, search_and_fit, Candidate, SearchBounds, SearchConfig, SearchResult, Trainer,
};
use crate::scalar::Scalar;
use crate::seeds;

#[derive(Debug, Clone, PartialEq)]
pub struct MlConfig<T> {
    pub k: usize,
    pub knn_mode: KnnMode,
    /// Minimum fraction of a class kept at each coarsening step.
    pub ratio_floor: f64,
    pub coarsest_size_target: usize,
    /// Classes at or below this size are copied unchanged to coarser levels.
    pub minority_floor: usize,
    /// Same-class neighbors added around each projected support vector.
    pub refine_neighbors: usize,
    pub partition_cap: usize,
    /// Refinement sets larger than this reuse the incoming parameters.
    pub search_cap: usize,
    /// Keep the projected coarse model when the retrained one scores a
    /// lower G-mean on the fine level.
    pub guard_refinement: bool,
    pub search: SearchConfig<T>,
}

impl<T: Scalar> MlConfig<T> {
    pub fn new(weighted: bool) -> Self {
        Self {
            k: DEFAULT_K,
            knn_mode: KnnMode::Auto,
            ratio_floor: 0.5,
            coarsest_size_target: 500,
            minority_floor: 300,
            refine_neighbors: 5,
            partition_cap: 10_000,
            search_cap: 5_000,
            guard_refinement: true,
            search: SearchConfig::new(weighted),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio_floor >= 0.5 && self.ratio_floor < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "ratio_floor = {} must lie in [0.5, 1)",
                self.ratio_floor
            )));
        }
        if self.k == 0 || self.coarsest_size_target == 0 || self.minority_floor == 0 {
            return Err(Error::InvalidArgument(
                "k, coarsest_size_target and minority_floor must be positive".into(),
            ));
        }
        if self.partition_cap < 2 {
            return Err(Error::InvalidArgument("partition_cap must be at least 2".into()));
        }
        Ok(())
    }
}

/// One level of the hierarchy. Point ids are dataset row ids; coarser levels
/// hold subsets of finer ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Level<T> {
    pub pos_rows: Vec<usize>,
    pub neg_rows: Vec<usize>,
    /// `None` for a class with fewer than two points.
    pub graph_pos: Option<AknnGraph<T>>,
    pub graph_neg: Option<AknnGraph<T>>,
    /// Each point's representative at the next coarser level; identity at the coarsest.
    pub parent_map: BTreeMap<usize, usize>,
}

impl<T: Scalar> Level<T> {
    pub fn len(&self) -> usize {
        self.pos_rows.len() + self.neg_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All rows, ascending.
    pub fn rows(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = self.pos_rows.iter().chain(&self.neg_rows).copied().collect();
        rows.sort_unstable();
        rows
    }

    fn graph_for(&self, class: i32) -> Option<&AknnGraph<T>> {
        if class == POSITIVE {
            self.graph_pos.as_ref()
        } else {
            self.graph_neg.as_ref()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy<T> {
    /// Finest first.
    pub levels: Vec<Level<T>>,
    pub ratio_floor: f64,
    pub coarsest_size_target: usize,
    pub minority_floor: usize,
}

impl<T: Scalar> Hierarchy<T> {
    pub fn coarsest(&self) -> &Level<T> {
        self.levels.last().expect("hierarchy has at least one level")
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// Representative of finest-level `row` at the coarsest level.
    pub fn coarsest_representative(&self, row: usize) -> Option<usize> {
        let mut id = row;
        for level in &self.levels[..self.levels.len() - 1] {
            id = *level.parent_map.get(&id)?;
        }
        Some(id)
    }
}

/// Result of coarsening one class graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Coarsening {
    /// Selected row ids, ascending.
    pub selected: Vec<usize>,
    /// Every graph row id to its representative row id.
    pub parent_map: BTreeMap<usize, usize>,
    /// Size of the independent set before the coverage extension.
    pub independent_set_size: usize,
}

/// Selects a maximal independent set of the symmetrized graph in seeded
/// random order, extends it by decreasing degree (ties by row id) up to
/// `ceil(ratio_floor * l)` points, and maps every other point to its nearest
/// selected neighbor.
pub fn coarsen_class<T: Scalar>(graph: &AknnGraph<T>, ratio_floor: f64, seed: u64) -> Result<Coarsening> {
    let l = graph.len();
    if l == 0 {
        return Err(Error::Empty("kNN graph".into()));
    }
    let sym = graph.symmetrized();
    let mut order: Vec<usize> = (0..l).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut selected = vec![false; l];
    let mut blocked = vec![false; l];
    for &u in &order {
        if !blocked[u] {
            selected[u] = true;
            blocked[u] = true;
            for nb in &sym[u] {
                blocked[nb.node] = true;
            }
        }
    }
    let independent_set_size = selected.iter().filter(|&&s| s).count();

    let floor = ((ratio_floor * l as f64).ceil() as usize).min(l);
    if independent_set_size < floor {
        let mut rest: Vec<usize> = (0..l).filter(|&u| !selected[u]).collect();
        rest.sort_by_key(|&u| (std::cmp::Reverse(sym[u].len()), graph.node_ids[u]));
        for &u in rest.iter().take(floor - independent_set_size) {
            selected[u] = true;
        }
    }

    let mut parent_map = BTreeMap::new();
    for u in 0..l {
        let parent = if selected[u] {
            u
        } else {
            // maximality leaves every unselected node a selected neighbor
            sym[u]
                .iter()
                .filter(|nb| selected[nb.node])
                .min_by(|a, b| {
                    a.dist
                        .partial_cmp(&b.dist)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(graph.node_ids[a.node].cmp(&graph.node_ids[b.node]))
                })
                .map(|nb| nb.node)
                .ok_or(Error::UnknownNode(graph.node_ids[u]))?
        };
        parent_map.insert(graph.node_ids[u], graph.node_ids[parent]);
    }
    let mut selected: Vec<usize> = (0..l).filter(|&u| selected[u]).map(|u| graph.node_ids[u]).collect();
    selected.sort_unstable();
    Ok(Coarsening {
        selected,
        parent_map,
        independent_set_size,
    })
}

fn class_graph<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    config: &MlConfig<T>,
    seed: u64,
) -> Result<Option<AknnGraph<T>>> {
    if rows.len() < 2 {
        return Ok(None);
    }
    let k = config.k.min(rows.len() - 1);
    build_aknn(data, rows, k, config.knn_mode, seed).map(Some)
}

/// Coarsens each class independently until the total size is at most
/// `2 * coarsest_size_target` or no class shrinks.
pub fn build_hierarchy<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    config: &MlConfig<T>,
    seed: u64,
) -> Result<Hierarchy<T>> {
    config.validate()?;
    let mut pos_rows = Vec::new();
    let mut neg_rows = Vec::new();
    for &r in rows {
        if data.missing().row(r).iter().any(|&m| m) {
            return Err(Error::MissingValues);
        }
        match data.labels()[r] {
            POSITIVE => pos_rows.push(r),
            NEGATIVE => neg_rows.push(r),
            other => return Err(Error::Label(other)),
        }
    }
    if pos_rows.is_empty() || neg_rows.is_empty() {
        return Err(Error::SingleClass);
    }
    pos_rows.sort_unstable();
    pos_rows.dedup();
    neg_rows.sort_unstable();
    neg_rows.dedup();

    let mut levels = Vec::new();
    let mut depth = 0u64;
    loop {
        let level_seed = seeds::derive(seed, depth);
        let graph_pos = class_graph(data, &pos_rows, config, seeds::derive(level_seed, 1))?;
        let graph_neg = class_graph(data, &neg_rows, config, seeds::derive(level_seed, 2))?;
        let mut level = Level {
            pos_rows,
            neg_rows,
            graph_pos,
            graph_neg,
            parent_map: BTreeMap::new(),
        };
        let identity = |level: &mut Level<T>| {
            for r in level.rows() {
                level.parent_map.insert(r, r);
            }
        };
        if level.len() <= 2 * config.coarsest_size_target {
            identity(&mut level);
            levels.push(level);
            break;
        }

        let mut next = [Vec::new(), Vec::new()];
        let mut shrank = false;
        for (slot, (rows, graph, salt)) in [
            (&level.pos_rows, &level.graph_pos, 3),
            (&level.neg_rows, &level.graph_neg, 4),
        ]
        .into_iter()
        .enumerate()
        {
            match graph {
                Some(g) if rows.len() > config.minority_floor => {
                    let c = coarsen_class(g, config.ratio_floor, seeds::derive(level_seed, salt))?;
                    shrank |= c.selected.len() < rows.len();
                    next[slot] = c.selected;
                    level.parent_map.extend(c.parent_map);
                }
                _ => {
                    next[slot] = rows.clone();
                    level.parent_map.extend(rows.iter().map(|&r| (r, r)));
                }
            }
        }
        if !shrank {
            level.parent_map.clear();
            identity(&mut level);
            levels.push(level);
            break;
        }
        log::debug!(
            "level {depth}: {}+{} -> {}+{}",
            level.pos_rows.len(),
            level.neg_rows.len(),
            next[0].len(),
            next[1].len()
        );
        levels.push(level);
        let [p, n] = next;
        pos_rows = p;
        neg_rows = n;
        depth += 1;
    }
    Ok(Hierarchy {
        levels,
        ratio_floor: config.ratio_floor,
        coarsest_size_target: config.coarsest_size_target,
        minority_floor: config.minority_floor,
    })
}

/// Model and parameter state handed from one level to the next finer one.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelModel<T> {
    pub model: SvmModel<T>,
    pub params: SvmParams<T>,
    pub candidate: Candidate,
    /// Region the candidate was chosen from.
    pub bounds: SearchBounds,
}

/// Nested search and fit on the coarsest level.
pub fn train_coarsest<T: Scalar>(
    data: &Dataset<T>,
    hierarchy: &Hierarchy<T>,
    config: &MlConfig<T>,
    trainer: &dyn Trainer<T>,
    seed: u64,
) -> Result<(LevelModel<T>, SearchResult<T>)> {
    let rows = hierarchy.coarsest().rows();
    let (model, search) = search_and_fit(data, &rows, &config.search, trainer, seed)?;
    Ok((
        LevelModel {
            model,
            params: search.best_params,
            candidate: search.best,
            bounds: search.final_bounds,
        },
        search,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement<T> {
    pub next: LevelModel<T>,
    /// Size of the refinement training set.
    pub training_size: usize,
    pub searched: bool,
    /// True when the coarse model was kept: a single-class set, or a
    /// retrained model that lost to it under the refinement guard.
    pub fell_back: bool,
}

/// Refinement training set: fine points represented by coarse support
/// vectors plus their nearest same-class neighbors, trimmed to
/// `partition_cap` points closest to the coarse decision boundary.
pub fn refinement_set<T: Scalar>(
    data: &Dataset<T>,
    fine: &Level<T>,
    coarse_model: &SvmModel<T>,
    config: &MlConfig<T>,
) -> Result<Vec<usize>> {
    let svs: BTreeSet<usize> = coarse_model.sv_indices.iter().copied().collect();
    let mut set = BTreeSet::new();
    for (class, graph) in [(POSITIVE, fine.graph_for(POSITIVE)), (NEGATIVE, fine.graph_for(NEGATIVE))] {
        let rows = if class == POSITIVE { &fine.pos_rows } else { &fine.neg_rows };
        for (local, &r) in rows.iter().enumerate() {
            let parent = fine.parent_map.get(&r).ok_or(Error::UnknownNode(r))?;
            if !svs.contains(parent) {
                continue;
            }
            set.insert(r);
            if let Some(g) = graph {
                debug_assert_eq!(g.node_ids[local], r);
                for nb in g.adjacency[local].iter().take(config.refine_neighbors) {
                    set.insert(g.node_ids[nb.node]);
                }
            }
        }
    }
    let mut rows: Vec<usize> = set.into_iter().collect();
    if rows.len() > config.partition_cap {
        let scores = coarse_model.decision_rows(data, &rows)?;
        let mut keyed: Vec<(T, usize)> = scores.into_iter().map(|s| s.abs()).zip(rows).collect();
        keyed.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        rows = keyed.into_iter().take(config.partition_cap).map(|(_, r)| r).collect();
        rows.sort_unstable();
    }
    Ok(rows)
}

/// Retrains on the refinement set of `fine`, re-searching locally around
/// the incoming parameters when the set is small enough. Fine points
/// outside the set take part in scoring the local candidates.
pub fn refine_level<T: Scalar>(
    data: &Dataset<T>,
    fine: &Level<T>,
    coarse: &LevelModel<T>,
    config: &MlConfig<T>,
    trainer: &dyn Trainer<T>,
    seed: u64,
) -> Result<Refinement<T>> {
    let rows = refinement_set(data, fine, &coarse.model, config)?;
    let (n_pos, n_neg) = binary_counts(data.labels(), &rows);
    if n_pos == 0 || n_neg == 0 {
        log::warn!(
            "refinement set of {} points has a single class; keeping the coarse model",
            rows.len()
        );
        return Ok(Refinement {
            next: coarse.clone(),
            training_size: rows.len(),
            searched: false,
            fell_back: true,
        });
    }
    let mut search = config.search.clone();
    search.class_counts = Some((fine.pos_rows.len(), fine.neg_rows.len()));
    let can_search = rows.len() <= config.search_cap && n_pos.min(n_neg) >= config.search.folds;
    let (candidate, bounds, searched) = if can_search {
        let in_set: BTreeSet<usize> = rows.iter().copied().collect();
        let outside: Vec<usize> = fine.rows().into_iter().filter(|r| !in_set.contains(r)).collect();
        let r = local_ud_search(
            data,
            &rows,
            &outside,
            coarse.candidate,
            &coarse.bounds,
            &search,
            trainer,
            seed,
        )?;
        (r.best, r.final_bounds, true)
    } else {
        (coarse.candidate, coarse.bounds, false)
    };
    let params = search.params_for(candidate, n_pos, n_neg)?;
    let model = trainer.train(data, &rows, &params)?;
    if config.guard_refinement {
        let fine_rows = fine.rows();
        let refined = training_gmean(data, &fine_rows, &model).unwrap_or(0.0);
        let projected = training_gmean(data, &fine_rows, &coarse.model).unwrap_or(0.0);
        if refined < projected {
            log::debug!("refined G-mean {refined:.4} below projected {projected:.4}; keeping coarse model");
            return Ok(Refinement {
                next: coarse.clone(),
                training_size: rows.len(),
                searched,
                fell_back: true,
            });
        }
    }
    Ok(Refinement {
        next: LevelModel {
            model,
            params,
            candidate,
            bounds,
        },
        training_size: rows.len(),
        searched,
        fell_back: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub level: usize,
    pub training_size: usize,
    pub n_sv: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlTrainResult<T> {
    /// Model for the finest level.
    pub final_model: SvmModel<T>,
    /// Coarsest level first.
    pub per_level: Vec<LevelStats>,
    /// Parameters used at each level, aligned with `per_level`.
    pub params_used: Vec<SvmParams<T>>,
    pub coarsest_search: SearchResult<T>,
    /// `(positive, negative)` sizes per level, finest first.
    pub level_sizes: Vec<(usize, usize)>,
}

impl<T> MlTrainResult<T> {
    /// `level,n_points,n_sv,seconds` lines, coarsest first.
    pub fn telemetry_csv(&self) -> String {
        let mut out = String::from("level,n_points,n_sv,seconds\n");
        for s in &self.per_level {
            let _ = writeln!(out, "{},{},{},{:.3}", s.level, s.training_size, s.n_sv, s.seconds);
        }
        out
    }
}

/// Full multilevel training on `rows`: hierarchy, coarsest search, and
/// refinement up to the finest level.
pub fn ml_train<T: Scalar>(
    data: &Dataset<T>,
    rows: &[usize],
    config: &MlConfig<T>,
    trainer: &dyn Trainer<T>,
    seed: u64,
) -> Result<MlTrainResult<T>> {
    let start = Instant::now();
    let hierarchy = build_hierarchy(data, rows, config, seeds::derive(seed, 10))?;
    let (mut current, coarsest_search) =
        train_coarsest(data, &hierarchy, config, trainer, seeds::derive(seed, 11))?;
    let top = hierarchy.depth() - 1;
    let mut per_level = vec![LevelStats {
        level: top,
        training_size: hierarchy.coarsest().len(),
        n_sv: current.model.n_sv(),
        seconds: start.elapsed().as_secs_f64(),
    }];
    let mut params_used = vec![current.params];
    for index in (0..top).rev() {
        let t = Instant::now();
        let refinement = refine_level(
            data,
            &hierarchy.levels[index],
            &current,
            config,
            trainer,
            seeds::derive(seed, 100 + index as u64),
        )?;
        current = refinement.next;
        per_level.push(LevelStats {
            level: index,
            training_size: refinement.training_size,
            n_sv: current.model.n_sv(),
            seconds: t.elapsed().as_secs_f64(),
        });
        params_used.push(current.params);
    }
    Ok(MlTrainResult {
        final_model: current.model,
        per_level,
        params_used,
        coarsest_search,
        level_sizes: hierarchy
            .levels
            .iter()
            .map(|l| (l.pos_rows.len(), l.neg_rows.len()))
            .collect(),
    })
}

/// Training-set G-mean of `model` on `rows`.
pub fn training_gmean<T: Scalar>(data: &Dataset<T>, rows: &[usize], model: &SvmModel<T>) -> Result<f64> {
    let predicted = model.predict_rows(data, rows)?;
    let actual: Vec<i32> = rows.iter().map(|&r| data.labels()[r]).collect();
    Ok(measures(&accumulate(&predicted, &actual)?)?.gmean)
}
