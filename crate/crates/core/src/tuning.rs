//! Parameter grids, grid evaluation, supervised and unsupervised tuning,
//! and the stability-vs-accuracy correlation experiment.
//!
//! Evaluation parallelizes over images with rayon and collects results in
//! index order, so outputs are bitwise independent of the worker count.
//! Each image is loaded once per grid pass; tuples sharing an `(n, sigma)`
//! group reuse the same filtered signal, which is bitwise identical to
//! invoking [`crate::estimate`] per tuple because both paths share the same
//! filtering and pooling code.

use std::collections::BTreeMap;
use std::collections::HashMap;

use rayon::prelude::*;

use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::estimators::{pool, pooled_source, IlluminantEstimate, ParameterTuple};
use crate::metrics::{angular_error, green_std, median, pearson, DifferencePair};
use crate::provider::ImageProvider;

/// An ordered, deduplicated list of estimator configurations.
///
/// Order is canonical: ascending derivative order, then norm with infinity
/// last, then sigma. Tie-breaks during tuning resolve to the earliest tuple
/// in this order, so results are reproducible for a given grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    tuples: Vec<ParameterTuple>,
}

impl ParameterGrid {
    /// Sorts into canonical order and drops duplicates. Empty input is an
    /// error: a grid must offer at least one configuration.
    pub fn from_tuples(mut tuples: Vec<ParameterTuple>) -> Result<Self> {
        if tuples.is_empty() {
            return Err(Error::InvalidParameter("parameter grid is empty".into()));
        }
        tuples.sort_by_key(|t| t.sort_key());
        tuples.dedup_by_key(|t| t.sort_key());
        Ok(Self { tuples })
    }

    pub fn tuples(&self) -> &[ParameterTuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn index_of(&self, tuple: &ParameterTuple) -> Option<usize> {
        self.tuples
            .binary_search_by_key(&tuple.sort_key(), |t| t.sort_key())
            .ok()
    }
}

/// Cartesian product of the given parameter values, in canonical order.
pub fn build_grid(
    n_values: &[u8],
    p_values: &[f64],
    sigma_values: &[f64],
) -> Result<ParameterGrid> {
    if n_values.is_empty() || p_values.is_empty() || sigma_values.is_empty() {
        return Err(Error::InvalidParameter(
            "grid axes must each contain at least one value".into(),
        ));
    }
    let mut tuples = Vec::with_capacity(n_values.len() * p_values.len() * sigma_values.len());
    for &n in n_values {
        for &p in p_values {
            for &sigma in sigma_values {
                tuples.push(ParameterTuple::new(n, p, sigma)?);
            }
        }
    }
    ParameterGrid::from_tuples(tuples)
}

pub fn default_n_values() -> Vec<u8> {
    vec![0, 1, 2]
}

pub fn default_p_values() -> Vec<f64> {
    let mut p: Vec<f64> = (1..=12).map(f64::from).collect();
    p.extend([15.0, 20.0, f64::INFINITY]);
    p
}

pub fn default_sigma_values() -> Vec<f64> {
    vec![0.0, 1.0, 2.0, 3.0, 5.0, 7.0, 9.0]
}

/// The default 315-tuple search grid (3 orders x 15 norms x 7 scales),
/// dense enough to cover the optima reported for the public benchmarks.
pub fn default_grid() -> ParameterGrid {
    build_grid(
        &default_n_values(),
        &default_p_values(),
        &default_sigma_values(),
    )
    .expect("default grid values are valid")
}

/// Per-method grids for the correlation experiment. Methods whose identity
/// depends on a free sigma get only nonzero sigmas, so their tuples do not
/// duplicate the shades-of-gray family; single-tuple methods (gray_world,
/// white_patch) are covered implicitly as shades-of-gray members.
pub fn default_method_grids(
    p_values: &[f64],
    sigma_values: &[f64],
) -> Result<Vec<(String, ParameterGrid)>> {
    let nonzero: Vec<f64> = sigma_values.iter().copied().filter(|&s| s != 0.0).collect();
    let mut grids = vec![(
        "shades_of_gray".to_string(),
        build_grid(&[0], p_values, &[0.0])?,
    )];
    if !nonzero.is_empty() {
        grids.push((
            "general_gray_world".to_string(),
            build_grid(&[0], p_values, &nonzero)?,
        ));
        grids.push((
            "gray_edge_1".to_string(),
            build_grid(&[1], p_values, &nonzero)?,
        ));
        grids.push((
            "gray_edge_2".to_string(),
            build_grid(&[2], p_values, &nonzero)?,
        ));
    }
    Ok(grids)
}

/// All grid estimates for one dataset: cell `[tuple][image]` holds the
/// estimate, or `None` where pooling found zero signal.
#[derive(Debug, Clone)]
pub struct GridEstimates {
    grid: ParameterGrid,
    image_ids: Vec<String>,
    cells: Vec<Option<IlluminantEstimate>>,
}

impl GridEstimates {
    pub fn grid(&self) -> &ParameterGrid {
        &self.grid
    }

    pub fn image_ids(&self) -> &[String] {
        &self.image_ids
    }

    pub fn n_images(&self) -> usize {
        self.image_ids.len()
    }

    pub fn cell(&self, tuple_index: usize, image_index: usize) -> Option<IlluminantEstimate> {
        self.cells[tuple_index * self.n_images() + image_index]
    }

    pub fn tuple_row(&self, tuple_index: usize) -> &[Option<IlluminantEstimate>] {
        let n = self.n_images();
        &self.cells[tuple_index * n..(tuple_index + 1) * n]
    }

    pub fn zero_signal_count(&self, tuple_index: usize) -> usize {
        self.tuple_row(tuple_index)
            .iter()
            .filter(|c| c.is_none())
            .count()
    }

    /// Angular errors against index-aligned ground truths.
    pub fn errors_against(&self, ground_truth: &[IlluminantEstimate]) -> Result<EvaluatedGrid> {
        if ground_truth.len() != self.n_images() {
            return Err(Error::InvalidInput(format!(
                "{} ground truths for {} images",
                ground_truth.len(),
                self.n_images()
            )));
        }
        let n = self.n_images();
        let errors = self
            .cells
            .iter()
            .enumerate()
            .map(|(flat, cell)| cell.map(|e| angular_error(&e, &ground_truth[flat % n])))
            .collect();
        Ok(EvaluatedGrid {
            grid: self.grid.clone(),
            image_ids: self.image_ids.clone(),
            errors,
        })
    }
}

/// Angular-error matrix `[tuple][image]`; `None` marks an estimate that
/// produced zero signal and is excluded from all summaries.
#[derive(Debug, Clone)]
pub struct EvaluatedGrid {
    grid: ParameterGrid,
    image_ids: Vec<String>,
    errors: Vec<Option<f64>>,
}

impl EvaluatedGrid {
    /// Assembles a matrix directly, validating shape and values; useful for
    /// re-summarizing persisted results.
    pub fn new(
        grid: ParameterGrid,
        image_ids: Vec<String>,
        errors: Vec<Option<f64>>,
    ) -> Result<Self> {
        if errors.len() != grid.len() * image_ids.len() {
            return Err(Error::InvalidInput(format!(
                "error matrix has {} cells, expected {} tuples x {} images",
                errors.len(),
                grid.len(),
                image_ids.len()
            )));
        }
        if let Some(bad) = errors
            .iter()
            .flatten()
            .find(|v| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "angular errors must be finite and >= 0, got {bad}"
            )));
        }
        Ok(Self {
            grid,
            image_ids,
            errors,
        })
    }

    pub fn grid(&self) -> &ParameterGrid {
        &self.grid
    }

    pub fn image_ids(&self) -> &[String] {
        &self.image_ids
    }

    pub fn n_images(&self) -> usize {
        self.image_ids.len()
    }

    pub fn error(&self, tuple_index: usize, image_index: usize) -> Option<f64> {
        self.errors[tuple_index * self.n_images() + image_index]
    }

    pub fn tuple_row(&self, tuple_index: usize) -> &[Option<f64>] {
        let n = self.n_images();
        &self.errors[tuple_index * n..(tuple_index + 1) * n]
    }

    /// Non-missing errors of one tuple, in image order.
    pub fn tuple_errors(&self, tuple_index: usize) -> Vec<f64> {
        self.tuple_row(tuple_index)
            .iter()
            .flatten()
            .copied()
            .collect()
    }
}

/// Runs every grid tuple over every image. Images are processed in
/// parallel and loaded exactly once each; within an image, tuples sharing
/// a filtered signal reuse it.
pub fn compute_estimates<P: ImageProvider + ?Sized>(
    provider: &P,
    grid: &ParameterGrid,
) -> Result<GridEstimates> {
    let n_images = provider.len();
    if n_images == 0 {
        return Err(Error::InvalidInput("dataset has no images".into()));
    }

    // Tuple indices grouped by shared (n, sigma) signal; BTreeMap for a
    // deterministic iteration order.
    let mut groups: BTreeMap<(u8, u64), Vec<usize>> = BTreeMap::new();
    for (i, t) in grid.tuples().iter().enumerate() {
        groups
            .entry((t.n(), t.sigma().to_bits()))
            .or_default()
            .push(i);
    }

    let per_image: Vec<Vec<Option<IlluminantEstimate>>> = (0..n_images)
        .into_par_iter()
        .map(|image_index| {
            let (image, mask) = provider.load(image_index)?;
            let mut row = vec![None; grid.len()];
            for indices in groups.values() {
                let source = pooled_source(&image, &grid.tuples()[indices[0]])
                    .map_err(|e| Error::for_record(provider.image_id(image_index), e))?;
                for &ti in indices {
                    match pool(&source, &mask, grid.tuples()[ti].p()) {
                        Ok(e) => row[ti] = Some(e),
                        Err(Error::ZeroSignal) => row[ti] = None,
                        Err(e) => return Err(Error::for_record(provider.image_id(image_index), e)),
                    }
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut cells = vec![None; grid.len() * n_images];
    for (image_index, row) in per_image.iter().enumerate() {
        for (tuple_index, cell) in row.iter().enumerate() {
            cells[tuple_index * n_images + image_index] = *cell;
        }
    }
    let zero_signals = cells.iter().filter(|c| c.is_none()).count();
    if zero_signals > 0 {
        log::warn!(
            "{zero_signals} of {} grid cells produced zero signal and are excluded",
            cells.len()
        );
    }
    Ok(GridEstimates {
        grid: grid.clone(),
        image_ids: (0..n_images)
            .map(|i| provider.image_id(i).to_string())
            .collect(),
        cells,
    })
}

/// Estimates plus errors in one pass; the composition of
/// [`compute_estimates`] and [`GridEstimates::errors_against`].
pub fn evaluate_grid<P: ImageProvider + ?Sized>(
    provider: &P,
    ground_truth: &[IlluminantEstimate],
    grid: &ParameterGrid,
) -> Result<EvaluatedGrid> {
    compute_estimates(provider, grid)?.errors_against(ground_truth)
}

/// Outcome of a tuning pass: the selected tuple and the criterion value of
/// every tuple (`None` where the tuple was skipped).
#[derive(Debug, Clone)]
pub struct TuningResult {
    pub chosen: ParameterTuple,
    pub chosen_index: usize,
    pub criterion_value: f64,
    pub per_tuple_log: Vec<(ParameterTuple, Option<f64>)>,
}

/// Picks the tuple minimizing the median angular error over all images.
pub fn tune_supervised(eval: &EvaluatedGrid) -> Result<TuningResult> {
    let all: Vec<usize> = (0..eval.n_images()).collect();
    tune_supervised_subset(eval, &all)
}

/// Same criterion restricted to a training subset of image indices; the
/// cross-validation loop uses this per fold.
pub fn tune_supervised_subset(
    eval: &EvaluatedGrid,
    image_indices: &[usize],
) -> Result<TuningResult> {
    if image_indices.is_empty() {
        return Err(Error::InvalidInput("training subset is empty".into()));
    }
    if let Some(&bad) = image_indices.iter().find(|&&i| i >= eval.n_images()) {
        return Err(Error::InvalidInput(format!(
            "training index {bad} out of range for {} images",
            eval.n_images()
        )));
    }
    let mut log_rows = Vec::with_capacity(eval.grid().len());
    let mut best: Option<(usize, f64)> = None;
    for (ti, tuple) in eval.grid().tuples().iter().enumerate() {
        let row = eval.tuple_row(ti);
        let errors: Vec<f64> = image_indices.iter().filter_map(|&i| row[i]).collect();
        if errors.is_empty() {
            log::warn!("tuple {tuple} produced no usable errors on the training set; skipped");
            log_rows.push((*tuple, None));
            continue;
        }
        let m = median(&errors)?;
        log_rows.push((*tuple, Some(m)));
        // Strict < keeps the first minimal tuple on ties.
        if best.is_none_or(|(_, v)| m < v) {
            best = Some((ti, m));
        }
    }
    let (chosen_index, criterion_value) = best.ok_or_else(|| {
        Error::Degenerate("every tuple was skipped during supervised tuning".into())
    })?;
    Ok(TuningResult {
        chosen: eval.grid().tuples()[chosen_index],
        chosen_index,
        criterion_value,
        per_tuple_log: log_rows,
    })
}

/// Maps each dataset image (by index) to a fold. Construction validates a
/// genuine partition: every image exactly once, every fold non-empty.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    k: usize,
}

impl FoldAssignment {
    pub fn new(fold_of: Vec<usize>) -> Result<Self> {
        if fold_of.is_empty() {
            return Err(Error::Folds("fold assignment covers no images".into()));
        }
        let k = fold_of.iter().max().unwrap() + 1;
        let mut counts = vec![0usize; k];
        for &f in &fold_of {
            counts[f] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Folds(format!("fold {empty} is empty")));
        }
        Ok(Self { fold_of, k })
    }

    /// Uses the fold column of the records; every record must have one.
    pub fn from_records(records: &[DatasetRecord]) -> Result<Self> {
        let fold_of = records
            .iter()
            .map(|r| {
                r.fold.ok_or_else(|| {
                    Error::Folds(format!("record '{}' has no fold index", r.image_id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(fold_of)
    }

    /// Matches a fold file against the dataset's image ids; the pairs must
    /// cover each id exactly once and reference nothing else.
    pub fn from_pairs(pairs: &[(String, usize)], image_ids: &[String]) -> Result<Self> {
        let mut by_id: HashMap<&str, usize> = HashMap::with_capacity(pairs.len());
        for (id, fold) in pairs {
            if by_id.insert(id.as_str(), *fold).is_some() {
                return Err(Error::Folds(format!("image '{id}' assigned twice")));
            }
        }
        let fold_of = image_ids
            .iter()
            .map(|id| {
                by_id
                    .remove(id.as_str())
                    .ok_or_else(|| Error::Folds(format!("image '{id}' has no fold assignment")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(extra) = by_id.keys().next() {
            return Err(Error::Folds(format!(
                "fold file references unknown image '{extra}'"
            )));
        }
        Self::new(fold_of)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_images(&self) -> usize {
        self.fold_of.len()
    }

    pub fn fold_of(&self, image_index: usize) -> usize {
        self.fold_of[image_index]
    }

    pub fn indices_in(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn indices_outside(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }
}

/// The tuple selected for one fold and its training criterion value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldChoice {
    pub fold: usize,
    pub tuple: ParameterTuple,
    pub criterion_value: f64,
}

/// Cross-validation outcome: per-fold choices plus every image's test
/// error under the tuple chosen by the other folds.
#[derive(Debug, Clone)]
pub struct CrossValResult {
    pub fold_choices: Vec<FoldChoice>,
    pub image_ids: Vec<String>,
    /// Indexed like the dataset; `None` where the chosen tuple produced
    /// zero signal on that image.
    pub test_errors: Vec<Option<f64>>,
}

impl CrossValResult {
    /// The concatenated test errors over all folds, in dataset order.
    pub fn combined(&self) -> Vec<f64> {
        self.test_errors.iter().flatten().copied().collect()
    }
}

/// K-fold protocol over a precomputed error matrix: tune on the images
/// outside each fold, evaluate the choice on the fold itself. A test image
/// can never influence its own fold's choice because tuning only sees the
/// complement's columns.
pub fn cross_validate_evaluated(
    eval: &EvaluatedGrid,
    folds: &FoldAssignment,
) -> Result<CrossValResult> {
    if folds.n_images() != eval.n_images() {
        return Err(Error::Folds(format!(
            "fold assignment covers {} images, dataset has {}",
            folds.n_images(),
            eval.n_images()
        )));
    }
    if folds.k() < 2 {
        return Err(Error::Folds(format!(
            "cross-validation needs at least 2 folds, got {}",
            folds.k()
        )));
    }
    let mut fold_choices = Vec::with_capacity(folds.k());
    let mut test_errors = vec![None; eval.n_images()];
    for fold in 0..folds.k() {
        let train = folds.indices_outside(fold);
        let tuned = tune_supervised_subset(eval, &train)?;
        for i in folds.indices_in(fold) {
            test_errors[i] = eval.error(tuned.chosen_index, i);
        }
        fold_choices.push(FoldChoice {
            fold,
            tuple: tuned.chosen,
            criterion_value: tuned.criterion_value,
        });
    }
    Ok(CrossValResult {
        fold_choices,
        image_ids: eval.image_ids().to_vec(),
        test_errors,
    })
}

/// End-to-end cross-validation from a provider.
pub fn cross_validate<P: ImageProvider + ?Sized>(
    provider: &P,
    ground_truth: &[IlluminantEstimate],
    folds: &FoldAssignment,
    grid: &ParameterGrid,
) -> Result<CrossValResult> {
    let eval = evaluate_grid(provider, ground_truth, grid)?;
    cross_validate_evaluated(&eval, folds)
}

/// Unsupervised tuning: picks the tuple whose estimates have the smallest
/// sample standard deviation of green chromaticity.
///
/// The provider interface carries no ground truth, so this tuner cannot
/// read labels even in principle. A tuple is skipped once zero-signal
/// failures reach half the dataset; if every tuple is skipped the search
/// fails rather than returning a guess.
pub fn tune_green_stability<P: ImageProvider + ?Sized>(
    provider: &P,
    grid: &ParameterGrid,
) -> Result<TuningResult> {
    if provider.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "green-stability tuning needs at least 2 images, got {}",
            provider.len()
        )));
    }
    let estimates = compute_estimates(provider, grid)?;
    tune_green_stability_estimates(&estimates)
}

/// The selection step of [`tune_green_stability`], reusable when the grid
/// estimates already exist.
pub fn tune_green_stability_estimates(estimates: &GridEstimates) -> Result<TuningResult> {
    let n = estimates.n_images();
    let mut log_rows = Vec::with_capacity(estimates.grid().len());
    let mut best: Option<(usize, f64)> = None;
    for (ti, tuple) in estimates.grid().tuples().iter().enumerate() {
        let usable: Vec<IlluminantEstimate> =
            estimates.tuple_row(ti).iter().flatten().copied().collect();
        let failures = n - usable.len();
        if failures * 2 >= n {
            log::warn!("tuple {tuple} hit zero signal on {failures} of {n} images; skipped");
            log_rows.push((*tuple, None));
            continue;
        }
        let sigma = green_std(&usable)?;
        log_rows.push((*tuple, Some(sigma)));
        if best.is_none_or(|(_, v)| sigma < v) {
            best = Some((ti, sigma));
        }
    }
    let (chosen_index, criterion_value) = best.ok_or_else(|| {
        Error::Degenerate("every tuple was skipped during green-stability tuning".into())
    })?;
    Ok(TuningResult {
        chosen: estimates.grid().tuples()[chosen_index],
        chosen_index,
        criterion_value,
        per_tuple_log: log_rows,
    })
}

/// Stability and accuracy of every usable tuple of one method, plus the
/// difference pairs over all unordered tuple combinations.
#[derive(Debug, Clone)]
pub struct MethodPairs {
    pub method: String,
    /// (tuple, green-chromaticity std, median angular error).
    pub tuple_stats: Vec<(ParameterTuple, f64, f64)>,
    pub pairs: Vec<DifferencePair>,
}

/// Pooled correlation-experiment outcome.
#[derive(Debug, Clone)]
pub struct CorrelationOutcome {
    pub methods: Vec<MethodPairs>,
    pub pooled: Vec<DifferencePair>,
    pub pearson: f64,
}

/// For every method grid, pairs each tuple's green-chromaticity std with
/// its median angular error, forms all unordered difference pairs, pools
/// the pairs across methods, and correlates the pooled set.
pub fn correlation_experiment<P: ImageProvider + ?Sized>(
    provider: &P,
    ground_truth: &[IlluminantEstimate],
    method_grids: &[(String, ParameterGrid)],
) -> Result<CorrelationOutcome> {
    let mut methods = Vec::new();
    let mut pooled = Vec::new();
    for (name, grid) in method_grids {
        let estimates = compute_estimates(provider, grid)?;
        let eval = estimates.errors_against(ground_truth)?;
        let n = estimates.n_images();

        let mut tuple_stats = Vec::new();
        for (ti, tuple) in grid.tuples().iter().enumerate() {
            let usable: Vec<IlluminantEstimate> =
                estimates.tuple_row(ti).iter().flatten().copied().collect();
            if (n - usable.len()) * 2 >= n || usable.len() < 2 {
                log::warn!("{name}: tuple {tuple} unusable (zero-signal failures); dropped");
                continue;
            }
            let errors = eval.tuple_errors(ti);
            let sigma = green_std(&usable)?;
            let m = median(&errors)?;
            tuple_stats.push((*tuple, sigma, m));
        }

        if tuple_stats.len() < 2 {
            log::warn!("{name}: fewer than 2 usable tuples; method dropped");
            continue;
        }
        let mut pairs = Vec::with_capacity(tuple_stats.len() * (tuple_stats.len() - 1) / 2);
        for i in 0..tuple_stats.len() {
            for j in (i + 1)..tuple_stats.len() {
                pairs.push(DifferencePair {
                    delta_sigma: tuple_stats[i].1 - tuple_stats[j].1,
                    delta_m: tuple_stats[i].2 - tuple_stats[j].2,
                });
            }
        }
        pooled.extend_from_slice(&pairs);
        methods.push(MethodPairs {
            method: name.clone(),
            tuple_stats,
            pairs,
        });
    }
    if pooled.len() < 2 {
        return Err(Error::Degenerate(format!(
            "correlation needs at least 2 pooled difference pairs, got {}",
            pooled.len()
        )));
    }
    let xs: Vec<f64> = pooled.iter().map(|p| p.delta_sigma).collect();
    let ys: Vec<f64> = pooled.iter().map(|p| p.delta_m).collect();
    let r = pearson(&xs, &ys)?;
    Ok(CorrelationOutcome {
        methods,
        pooled,
        pearson: r,
    })
}
