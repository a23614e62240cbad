use std::collections::HashSet;

use crate::nn::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModalityGroup {
    pub name: String,
    pub indices: Vec<usize>,
}

/// Disjoint, exhaustive assignment of feature columns to named modalities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModalityPartition {
    groups: Vec<ModalityGroup>,
    total_dims: usize,
}

impl ModalityPartition {
    pub fn new(groups: Vec<ModalityGroup>, total_dims: usize) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::Config(format!(
                "a modality partition needs at least 2 groups, got {}",
                groups.len()
            )));
        }
        let mut seen = HashSet::with_capacity(total_dims);
        for g in &groups {
            if g.indices.is_empty() {
                return Err(Error::Config(format!("modality '{}' is empty", g.name)));
            }
            for &i in &g.indices {
                if i >= total_dims {
                    return Err(Error::Config(format!(
                        "modality '{}' references feature {i} but only {total_dims} exist",
                        g.name
                    )));
                }
                if !seen.insert(i) {
                    return Err(Error::Config(format!("feature {i} assigned to more than one modality")));
                }
            }
        }
        if seen.len() != total_dims {
            let missing = (0..total_dims).find(|i| !seen.contains(i)).unwrap_or(0);
            return Err(Error::Config(format!("feature {missing} is not assigned to any modality")));
        }
        Ok(Self { groups, total_dims })
    }

    pub fn groups(&self) -> &[ModalityGroup] {
        &self.groups
    }

    pub fn num_modalities(&self) -> usize {
        self.groups.len()
    }

    pub fn total_dims(&self) -> usize {
        self.total_dims
    }

    pub fn group_dims(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.indices.len()).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.groups.iter().map(|g| g.name.as_str()).collect()
    }

    /// Splits one sample into its per-modality sub-vectors, in group order.
    pub fn partition_sample(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.total_dims {
            return Err(Error::dim("partition_sample", self.total_dims, x.len()));
        }
        Ok(self
            .groups
            .iter()
            .map(|g| g.indices.iter().map(|&i| x[i]).collect())
            .collect())
    }

    /// Inverse of [`partition_sample`](Self::partition_sample).
    pub fn reassemble(&self, parts: &[Vec<f64>]) -> Result<Vec<f64>> {
        if parts.len() != self.groups.len() {
            return Err(Error::dim("reassemble", self.groups.len(), parts.len()));
        }
        let mut x = vec![0.0; self.total_dims];
        for (g, part) in self.groups.iter().zip(parts) {
            if part.len() != g.indices.len() {
                return Err(Error::dim("reassemble", g.indices.len(), part.len()));
            }
            for (&i, &v) in g.indices.iter().zip(part) {
                x[i] = v;
            }
        }
        Ok(x)
    }

    /// Column blocks of a `[B x total_dims]` batch, one per modality.
    pub fn split_batch(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        if x.cols() != self.total_dims {
            return Err(Error::dim("partition batch", self.total_dims, x.cols()));
        }
        Ok(self.groups.iter().map(|g| x.select_cols(&g.indices)).collect())
    }

    /// Keeps only the listed groups (by position) and renumbers their features
    /// densely. Returns the new partition together with the original feature
    /// indices it covers, in new-index order.
    pub fn restrict(&self, keep: &[usize]) -> Result<(ModalityPartition, Vec<usize>)> {
        let mut columns = Vec::new();
        let mut groups = Vec::with_capacity(keep.len());
        for &k in keep {
            let g = self
                .groups
                .get(k)
                .ok_or_else(|| Error::Config(format!("no modality at position {k}")))?;
            let start = columns.len();
            columns.extend_from_slice(&g.indices);
            groups.push(ModalityGroup {
                name: g.name.clone(),
                indices: (start..columns.len()).collect(),
            });
        }
        let total = columns.len();
        Ok((ModalityPartition::new(groups, total)?, columns))
    }

    /// Merges groups: each entry of `merges` lists the positions of groups that
    /// form one new modality. Every existing group must appear exactly once.
    pub fn merge(&self, merges: &[Vec<usize>]) -> Result<ModalityPartition> {
        let mut used = vec![false; self.groups.len()];
        let mut groups = Vec::with_capacity(merges.len());
        for set in merges {
            let mut indices = Vec::new();
            let mut names = Vec::new();
            for &k in set {
                if k >= used.len() || std::mem::replace(&mut used[k], true) {
                    return Err(Error::Config(format!("invalid or repeated group position {k} in merge")));
                }
                indices.extend_from_slice(&self.groups[k].indices);
                names.push(self.groups[k].name.as_str());
            }
            indices.sort_unstable();
            groups.push(ModalityGroup {
                name: names.join("+"),
                indices,
            });
        }
        if used.iter().any(|u| !u) {
            return Err(Error::Config("merge must use every group".into()));
        }
        ModalityPartition::new(groups, self.total_dims)
    }
}
