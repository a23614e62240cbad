use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{ModalityGroup, ModalityPartition};
use crate::{Error, Result};

/// Groups features by a `(feature_name, group_name)` map. Groups appear in the
/// order their names first occur in the map.
pub fn natural_partition(
    feature_names: &[String],
    group_map: &[(String, String)],
) -> Result<ModalityPartition> {
    let position: HashMap<&str, usize> = feature_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut assigned: Vec<Option<&str>> = vec![None; feature_names.len()];
    let mut groups: Vec<ModalityGroup> = Vec::new();
    for (feature, group) in group_map {
        let &i = position
            .get(feature.as_str())
            .ok_or_else(|| Error::Config(format!("modality map names unknown feature '{feature}'")))?;
        if let Some(prev) = assigned[i] {
            return Err(Error::Config(format!(
                "feature '{feature}' assigned twice (to '{prev}' and '{group}')"
            )));
        }
        assigned[i] = Some(group);
        match groups.iter_mut().find(|g| &g.name == group) {
            Some(g) => g.indices.push(i),
            None => groups.push(ModalityGroup {
                name: group.clone(),
                indices: vec![i],
            }),
        }
    }
    if let Some(i) = assigned.iter().position(Option::is_none) {
        return Err(Error::Config(format!(
            "feature '{}' is not assigned to any modality",
            feature_names[i]
        )));
    }
    for g in &mut groups {
        g.indices.sort_unstable();
    }
    ModalityPartition::new(groups, feature_names.len())
}

/// Seeded shuffle of `0..dims` dealt into `groups` near-equal modalities
/// (sizes differ by at most one; the first `dims % groups` are larger).
pub fn random_partition(dims: usize, groups: usize, seed: u64) -> Result<ModalityPartition> {
    if groups < 2 || dims < groups {
        return Err(Error::Config(format!(
            "cannot split {dims} features into {groups} random modalities"
        )));
    }
    let mut order: Vec<usize> = (0..dims).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = dims / groups;
    let extra = dims % groups;
    let mut out = Vec::with_capacity(groups);
    let mut start = 0;
    for k in 0..groups {
        let size = base + usize::from(k < extra);
        let mut indices = order[start..start + size].to_vec();
        indices.sort_unstable();
        out.push(ModalityGroup {
            name: format!("random{}", k + 1),
            indices,
        });
        start += size;
    }
    ModalityPartition::new(out, dims)
}
