//! Per-pair error table for a finished build.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::build::load_pairs;
use crate::error::Result;
use crate::io::{load_mask, load_rgb8};
use crate::metrics::{fmse, mse, psnr_from_mse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub pair: String,
    pub mse: f64,
    pub fmse: f64,
    pub psnr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub pairs: usize,
    pub mean_mse: f64,
    pub mean_fmse: f64,
    /// Mean over pairs with finite PSNR.
    pub mean_psnr: f64,
    pub identical_pairs: usize,
}

pub fn evaluate_output(out_dir: &Path) -> Result<Vec<PairMetrics>> {
    let pairs = load_pairs(out_dir)?;
    pairs
        .par_iter()
        .map(|p| {
            let comp = load_rgb8(&out_dir.join(&p.composite))?;
            let gt = load_rgb8(&out_dir.join(&p.ground_truth))?;
            let mask = load_mask(&out_dir.join(&p.mask))?;
            let m = mse(&comp, &gt)?;
            Ok(PairMetrics {
                pair: p.composite.clone(),
                mse: m,
                fmse: fmse(&comp, &gt, &mask)?,
                psnr: psnr_from_mse(m),
            })
        })
        .collect()
}

pub fn summarize(rows: &[PairMetrics]) -> MetricsSummary {
    let n = rows.len().max(1) as f64;
    let finite: Vec<f64> = rows.iter().map(|r| r.psnr).filter(|p| p.is_finite()).collect();
    MetricsSummary {
        pairs: rows.len(),
        mean_mse: rows.iter().map(|r| r.mse).sum::<f64>() / n,
        mean_fmse: rows.iter().map(|r| r.fmse).sum::<f64>() / n,
        mean_psnr: if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        },
        identical_pairs: rows.len() - finite.len(),
    }
}

/// Tab-separated table: a header, one row per pair, then a `mean` row.
pub fn format_table(rows: &[PairMetrics]) -> String {
    let mut s = String::from("pair\tmse\tfmse\tpsnr\n");
    for r in rows {
        let _ = writeln!(s, "{}\t{:.4}\t{:.4}\t{}", r.pair, r.mse, r.fmse, fmt_psnr(r.psnr));
    }
    let sum = summarize(rows);
    let _ = writeln!(
        s,
        "mean\t{:.4}\t{:.4}\t{}",
        sum.mean_mse,
        sum.mean_fmse,
        fmt_psnr(sum.mean_psnr)
    );
    s
}

fn fmt_psnr(p: f64) -> String {
    if p.is_finite() {
        format!("{p:.3}")
    } else {
        "inf".to_string()
    }
}
