//! Hyperparameter grids, k-fold splits and cross-validated model selection.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::eval::roc;
use crate::nn::{tumor_scores, train, ArchitectureSpec, LabeledBatch, PoolKind, TrainConfig};
use crate::regularizers::{Method, RegularizerConfig, RegularizerKind, SamplerSettings};
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// The eight λ decades shared by WD, FN-DD and FN-SS.
pub const LAMBDAS: [f64; 8] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2];
pub const DROPOUT_LAMBDAS: [f64; 2] = [1e-4, 1e-2];
pub const DROPOUT_RATES: [f64; 4] = [0.1, 0.25, 0.5, 0.75];
pub const POOLINGS: [PoolKind; 2] = [PoolKind::Max, PoolKind::Average];
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub method: Method,
    pub lambda: f64,
    pub dropout: Option<f64>,
    pub pooling: PoolKind,
}

impl Candidate {
    pub fn new(method: Method, lambda: f64, dropout: Option<f64>, pooling: PoolKind) -> Self {
        Candidate { method, lambda, dropout, pooling }
    }

    pub fn label(&self) -> String {
        match self.dropout {
            Some(r) => format!("{} λ={:e} R_DO={} {}", self.method, self.lambda, r, self.pooling.name()),
            None => format!("{} λ={:e} {}", self.method, self.lambda, self.pooling.name()),
        }
    }

    pub fn regularizer(&self, ctx: &RegContext) -> Result<RegularizerConfig> {
        let kind = match self.method {
            Method::WeightDecay => RegularizerKind::WeightDecay,
            Method::WeightDecayDropout => RegularizerKind::WeightDecayDropout {
                rate: self.dropout.ok_or_else(|| Error::Config("WD+DO candidate without a dropout rate".into()))?,
            },
            Method::FunctionNormData => RegularizerKind::FunctionNormData {
                set: ctx
                    .fn_set
                    .clone()
                    .ok_or_else(|| Error::Config("FN-DD needs a regularization set".into()))?,
            },
            Method::FunctionNormSampled => {
                RegularizerKind::FunctionNormSampled { samples: ctx.fn_samples, sampler: ctx.sampler.clone() }
            }
        };
        let reg = RegularizerConfig { lambda: self.lambda, kind };
        reg.validate()?;
        Ok(reg)
    }
}

/// Method-specific inputs that are not part of the grid.
#[derive(Clone, Debug, Default)]
pub struct RegContext {
    pub fn_set: Option<Arc<Vec<Vec<f64>>>>,
    pub fn_samples: usize,
    pub sampler: SamplerSettings,
}

/// Sixteen candidates per method: 8 λ × 2 poolings, or for WD+DO
/// 2 λ × 4 dropout rates × 2 poolings.
pub fn enumerate_grid(method: Method) -> Vec<Candidate> {
    let mut out = Vec::with_capacity(16);
    for pooling in POOLINGS {
        match method {
            Method::WeightDecayDropout => {
                for lambda in DROPOUT_LAMBDAS {
                    for rate in DROPOUT_RATES {
                        out.push(Candidate::new(method, lambda, Some(rate), pooling));
                    }
                }
            }
            _ => out.extend(LAMBDAS.iter().map(|&l| Candidate::new(method, l, None, pooling))),
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit {
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FoldSplit {
    /// Indices outside fold `k`.
    pub fn training(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> =
            self.folds.iter().enumerate().filter(|(j, _)| *j != k).flat_map(|(_, f)| f.iter().copied()).collect();
        idx.sort_unstable();
        idx
    }
}

/// Seeded shuffle, then contiguous chunks; the first `n mod k` folds get one
/// extra element.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 || n < k {
        return Err(Error::InvalidArgument(format!("cannot split {n} items into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, Stream::Folds));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for j in 0..k {
        let len = base + usize::from(j < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(FoldSplit { folds, seed })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult {
    pub candidates: Vec<Candidate>,
    /// Per candidate, per fold validation AUC; `None` for failed candidates.
    pub table: Vec<Option<Vec<f64>>>,
    pub means: Vec<Option<f64>>,
    pub winner: usize,
}

impl SelectionResult {
    pub fn best(&self) -> &Candidate {
        &self.candidates[self.winner]
    }
}

/// Winner = highest mean AUC; exact ties go to the smaller λ, then max
/// pooling, then the smaller dropout rate, then grid order.
pub fn select(candidates: &[Candidate], table: &[Option<Vec<f64>>]) -> Result<SelectionResult> {
    if candidates.len() != table.len() {
        return Err(Error::InvalidArgument(format!(
            "{} candidates but {} table rows",
            candidates.len(),
            table.len()
        )));
    }
    let means: Vec<Option<f64>> = table
        .iter()
        .map(|row| row.as_ref().filter(|r| !r.is_empty()).map(|r| r.iter().sum::<f64>() / r.len() as f64))
        .collect();
    let rank = |i: usize| {
        let c = &candidates[i];
        (c.lambda, u8::from(c.pooling != PoolKind::Max), c.dropout.unwrap_or(0.0), i)
    };
    let mut winner: Option<usize> = None;
    for (i, m) in means.iter().enumerate() {
        let Some(m) = *m else { continue };
        winner = match winner {
            None => Some(i),
            Some(w) => {
                let mw = means[w].unwrap();
                let better = m > mw || (m == mw && rank(i).partial_cmp(&rank(w)) == Some(std::cmp::Ordering::Less));
                Some(if better { i } else { w })
            }
        };
    }
    let winner = winner.ok_or_else(|| Error::Empty("every configuration failed cross-validation".into()))?;
    Ok(SelectionResult { candidates: candidates.to_vec(), table: table.to_vec(), means, winner })
}

/// Runs `evaluate(candidate, train_indices, validation_indices)` for every
/// (candidate, fold) pair. A candidate with any failing fold is logged and
/// excluded. Jobs run on the current rayon pool; results are assembled in
/// grid order, so the outcome does not depend on scheduling.
pub fn cross_validate_with<F>(candidates: &[Candidate], split: &FoldSplit, evaluate: F) -> Result<SelectionResult>
where
    F: Fn(&Candidate, &[usize], &[usize]) -> Result<f64> + Sync,
{
    let k = split.folds.len();
    let jobs: Vec<(usize, usize)> = (0..candidates.len()).flat_map(|c| (0..k).map(move |f| (c, f))).collect();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(c, f)| evaluate(&candidates[c], &split.training(f), &split.folds[f]))
        .collect();
    let mut table = Vec::with_capacity(candidates.len());
    for (c, chunk) in results.chunks(k).enumerate() {
        let mut row = Vec::with_capacity(k);
        let mut failed = false;
        for (f, r) in chunk.iter().enumerate() {
            match r {
                Ok(auc) => row.push(*auc),
                Err(e) => {
                    log::warn!("{} failed on fold {}: {e}", candidates[c].label(), f + 1);
                    failed = true;
                    break;
                }
            }
        }
        table.push((!failed).then_some(row));
    }
    select(candidates, &table)
}

/// Everything needed to train one candidate on a subset of patches.
#[derive(Clone, Debug)]
pub struct CvSettings {
    pub arch: ArchitectureSpec,
    pub train: TrainConfig,
    pub reg: RegContext,
}

/// Validation AUC of `candidate` trained on `train_idx` and scored on
/// `val_idx`.
pub fn fold_auc(
    settings: &CvSettings,
    data: &LabeledBatch<'_>,
    candidate: &Candidate,
    train_idx: &[usize],
    val_idx: &[usize],
) -> Result<f64> {
    let mut arch = settings.arch.clone();
    arch.set_pooling(candidate.pooling);
    let mut config = settings.train.clone();
    config.momentum = candidate.method.default_momentum();
    let reg = candidate.regularizer(&settings.reg)?;
    let outcome = train(&arch, &data.subset(train_idx), &config, &reg)?;
    let val = data.subset(val_idx);
    let scores = tumor_scores(&outcome.params, &val.inputs)?;
    roc(&scores, &val.labels)?
        .auc
        .ok_or_else(|| Error::Empty("validation fold contains a single class".into()))
}

pub fn cross_validate(
    data: &LabeledBatch<'_>,
    candidates: &[Candidate],
    split: &FoldSplit,
    settings: &CvSettings,
) -> Result<SelectionResult> {
    if split.folds.iter().flatten().any(|&i| i >= data.len()) {
        return Err(Error::InvalidArgument("fold split does not match the dataset".into()));
    }
    cross_validate_with(candidates, split, |c, tr, va| fold_auc(settings, data, c, tr, va))
}

/// `method,lambda,dropout,pooling,auc1..aucK,mean` rows; failed candidates
/// carry `failed` in place of numbers.
pub fn write_table(result: &SelectionResult) -> String {
    let k = result.table.iter().flatten().map(|r| r.len()).max().unwrap_or(0);
    let mut out = String::from("method,lambda,dropout,pooling");
    for f in 1..=k {
        let _ = write!(out, ",auc{f}");
    }
    out.push_str(",mean\n");
    for (c, row) in result.candidates.iter().zip(&result.table) {
        let dropout = c.dropout.map_or_else(|| "-".to_string(), |r| r.to_string());
        let _ = write!(out, "{},{:e},{},{}", c.method, c.lambda, dropout, c.pooling.name());
        match row {
            Some(aucs) => {
                for a in aucs {
                    let _ = write!(out, ",{a:.6}");
                }
                let _ = write!(out, ",{:.6}", aucs.iter().sum::<f64>() / aucs.len() as f64);
            }
            None => {
                for _ in 0..=k {
                    out.push_str(",failed");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Parses a table written by [`write_table`] and re-runs [`select`] on it.
pub fn read_table(text: &str) -> Result<SelectionResult> {
    let mut candidates = Vec::new();
    let mut table = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Format(format!("selection table line {}: {what}", n + 1));
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() < 6 {
            return Err(bad("too few columns"));
        }
        let method: Method = cells[0].parse().map_err(|_| bad("method"))?;
        let lambda: f64 = cells[1].parse().map_err(|_| bad("lambda"))?;
        let dropout = match cells[2] {
            "-" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad("dropout"))?),
        };
        let pooling: PoolKind = cells[3].parse().map_err(|_| bad("pooling"))?;
        candidates.push(Candidate::new(method, lambda, dropout, pooling));
        let folds = &cells[4..cells.len() - 1];
        if folds.iter().any(|c| *c == "failed") {
            table.push(None);
        } else {
            let aucs: Result<Vec<f64>> = folds.iter().map(|c| c.parse::<f64>().map_err(|_| bad("auc"))).collect();
            table.push(Some(aucs?));
        }
    }
    select(&candidates, &table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes_and_values() {
        for m in Method::ALL {
            assert_eq!(enumerate_grid(m).len(), 16, "{m}");
        }
        let wddo = enumerate_grid(Method::WeightDecayDropout);
        assert!(wddo.contains(&Candidate::new(Method::WeightDecayDropout, 1e-4, Some(0.25), PoolKind::Max)));
        let ss = enumerate_grid(Method::FunctionNormSampled);
        let mut lambdas: Vec<f64> = ss.iter().map(|c| c.lambda).collect();
        lambdas.dedup();
        lambdas.sort_by(f64::total_cmp);
        lambdas.dedup();
        assert_eq!(lambdas, LAMBDAS.to_vec());
    }

    #[test]
    fn fold_sizes() {
        let s = kfold_split(10, 5, 1).unwrap();
        assert!(s.folds.iter().all(|f| f.len() == 2));
        let s = kfold_split(11, 5, 1).unwrap();
        let sizes: Vec<usize> = s.folds.iter().map(|f| f.len()).collect();
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
        assert_eq!(kfold_split(11, 5, 1).unwrap(), s);
        assert!(kfold_split(3, 5, 1).is_err());
    }

    #[test]
    fn folds_partition_indices() {
        for n in 5..40 {
            for k in 2..=5 {
                let s = kfold_split(n, k, n as u64).unwrap();
                let mut all: Vec<usize> = s.folds.concat();
                all.sort_unstable();
                assert_eq!(all, (0..n).collect::<Vec<_>>());
                let (lo, hi) = s.folds.iter().fold((usize::MAX, 0), |(a, b), f| (a.min(f.len()), b.max(f.len())));
                assert!(hi - lo <= 1);
                assert_eq!(s.training(0).len(), n - s.folds[0].len());
            }
        }
    }

    #[test]
    fn tie_breaks() {
        let c = vec![
            Candidate::new(Method::WeightDecay, 1e-2, None, PoolKind::Average),
            Candidate::new(Method::WeightDecay, 1e-3, None, PoolKind::Average),
            Candidate::new(Method::WeightDecay, 1e-3, None, PoolKind::Max),
            Candidate::new(Method::WeightDecay, 1e-4, None, PoolKind::Max),
        ];
        let t = vec![Some(vec![0.5, 1.0]), Some(vec![1.0, 0.5]), Some(vec![0.75, 0.75]), None];
        assert_eq!(select(&c, &t).unwrap().winner, 2);
        let t = vec![Some(vec![0.95]), Some(vec![0.9]), Some(vec![0.9]), Some(vec![0.1])];
        assert_eq!(select(&c, &t).unwrap().winner, 0);
        assert!(select(&c, &[None, None, None, None]).is_err());
    }

    #[test]
    fn failed_folds_exclude_candidates() {
        let c = enumerate_grid(Method::WeightDecay);
        let split = kfold_split(20, 5, 3).unwrap();
        let r = cross_validate_with(&c, &split, |cand, tr, va| {
            assert_eq!(tr.len() + va.len(), 20);
            if cand.lambda > 1.0 {
                Err(Error::Diverged { epoch: 1, step: 0, detail: "test".into() })
            } else {
                Ok(0.5 + cand.lambda.log10() / 100.0)
            }
        })
        .unwrap();
        assert_eq!(r.table.len(), 16);
        assert_eq!(r.table.iter().flatten().map(|row| row.len()).sum::<usize>(), 12 * 5);
        assert_eq!(r.best().lambda, 1.0);
        assert_eq!(r.best().pooling, PoolKind::Max);
        let back = read_table(&write_table(&r)).unwrap();
        assert_eq!(back.winner, r.winner);
        assert_eq!(back.candidates, r.candidates);
    }
}
