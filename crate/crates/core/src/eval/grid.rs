use rayon::prelude::*;

use super::{student_config, train_student};
use crate::data::{CondensedSet, Dataset};
use crate::error::{Error, Result};
use crate::nn::{Arch, Norm, Pooling};
use crate::tensor::Activation;
use crate::train::accuracy;

fn product(depths: &[usize], widths: &[usize], norms: &[Norm], acts: &[Activation], pools: &[Pooling]) -> Vec<Arch> {
    let mut out = Vec::new();
    for &depth in depths {
        for &width in widths {
            for &norm in norms {
                for &activation in acts {
                    for &pooling in pools {
                        out.push(Arch {
                            depth,
                            width,
                            kernel: 5,
                            norm,
                            activation,
                            pooling,
                        });
                    }
                }
            }
        }
    }
    out
}

/// 48 architectures: depth {2, 3}, width {16, 32}, norm {none, batch},
/// activation {relu, leaky}, pooling {none, max, mean}.
pub fn small_grid() -> Vec<Arch> {
    product(
        &[2, 3],
        &[16, 32],
        &[Norm::None, Norm::Batch],
        &[Activation::Relu, Activation::LeakyRelu],
        &[Pooling::None, Pooling::Max, Pooling::Mean],
    )
}

/// 432 architectures: depth 1-4, width {32, 64, 128}, four norms, three
/// activations, three poolings.
pub fn full_grid() -> Vec<Arch> {
    product(
        &[1, 2, 3, 4],
        &[32, 64, 128],
        &[Norm::None, Norm::Batch, Norm::Layer, Norm::Instance],
        &[Activation::Sigmoid, Activation::Relu, Activation::LeakyRelu],
        &[Pooling::None, Pooling::Max, Pooling::Mean],
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridEntry {
    pub arch: Arch,
    pub accuracy: f64,
}

/// Trains one student per architecture and ranks them by test accuracy,
/// best first; equal accuracies keep grid order.
pub fn grid_search(c: &CondensedSet, test: &Dataset, grid: &[Arch], seed: u64) -> Result<Vec<GridEntry>> {
    if grid.is_empty() {
        return Err(Error::Config("architecture grid is empty".into()));
    }
    let cfg = student_config(c.len(), seed);
    let mut ranked = grid
        .par_iter()
        .map(|&arch| {
            let (net, _) = train_student(c, arch, &cfg)?;
            Ok(GridEntry {
                arch,
                accuracy: accuracy(&net, test)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy));
    Ok(ranked)
}
