//! Collapsing multi-label (overlapping) annotations into single labels.

use crate::error::{Error, Result};
use crate::types::LabelMap;

/// One binary mask per class; a pixel may be set in several masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiLabelMap {
    height: usize,
    width: usize,
    masks: Vec<Vec<bool>>,
}

impl MultiLabelMap {
    pub fn new(height: usize, width: usize, masks: Vec<Vec<bool>>) -> Result<Self> {
        if let Some(m) = masks.iter().find(|m| m.len() != height * width) {
            return Err(Error::DimMismatch(format!(
                "mask has {} entries, expected {height}x{width}",
                m.len()
            )));
        }
        Ok(Self {
            height,
            width,
            masks,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.masks.len()
    }

    pub fn mask(&self, class: usize) -> &[bool] {
        &self.masks[class]
    }
}

/// Classes ordered rarest first (ascending frequency, ties by index).
pub fn rarity_priority(frequencies: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..frequencies.len()).collect();
    order.sort_by(|&a, &b| frequencies[a].total_cmp(&frequencies[b]).then(a.cmp(&b)));
    order
}

/// Each pixel takes the set class that appears earliest in `priority`;
/// pixels set in no mask become `background_id`.
pub fn resolve_overlaps(multi: &MultiLabelMap, priority: &[usize], background_id: usize) -> Result<LabelMap> {
    let c = multi.num_classes();
    let mut seen = vec![false; c];
    if priority.len() != c || priority.iter().any(|&p| p >= c || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::InvalidArgument(format!(
            "priority {priority:?} is not a permutation of 0..{c}"
        )));
    }
    if background_id >= c {
        return Err(Error::InvalidArgument(format!(
            "background id {background_id} out of range"
        )));
    }
    let labels = (0..multi.height * multi.width)
        .map(|p| {
            priority
                .iter()
                .copied()
                .find(|&k| multi.masks[k][p])
                .unwrap_or(background_id) as u8
        })
        .collect();
    LabelMap::new(multi.height, multi.width, labels)
}
