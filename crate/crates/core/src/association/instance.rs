use std::collections::BTreeMap;

use crate::geometry::InstanceVoxelGrid;
use crate::label_fusion::SemanticBelief;

/// One semantic object: a class belief and its voxel occupancy.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub id: u32,
    pub belief: SemanticBelief,
    pub grid: InstanceVoxelGrid,
    pub created_at: u64,
    pub last_seen: u64,
}

/// Instances keyed by id. Ids start at 1 and are never reused.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceMap {
    instances: BTreeMap<u32, Instance>,
    next_id: u32,
    voxel_length: f64,
    band: f64,
    n_classes: usize,
}

impl InstanceMap {
    pub fn new(voxel_length: f64, n_classes: usize) -> Self {
        Self::with_band(voxel_length, voxel_length, n_classes)
    }

    /// Map whose instance grids use a custom surface band.
    pub fn with_band(voxel_length: f64, band: f64, n_classes: usize) -> Self {
        assert!(voxel_length > 0.0, "voxel_length must be positive");
        assert!(n_classes > 0, "at least one class");
        Self {
            instances: BTreeMap::new(),
            next_id: 1,
            voxel_length,
            band,
            n_classes,
        }
    }

    pub fn voxel_length(&self) -> f64 {
        self.voxel_length
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn next_id(&self) -> u32 {
        self.next_id
    }

    pub fn get(&self, id: u32) -> Option<&Instance> {
        self.instances.get(&id)
    }

    pub fn get_mut(&mut self, id: u32) -> Option<&mut Instance> {
        self.instances.get_mut(&id)
    }

    /// Instances in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Instance> {
        self.instances.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Instance> {
        self.instances.values_mut()
    }

    pub fn ids(&self) -> Vec<u32> {
        self.instances.keys().copied().collect()
    }

    /// Empty grid with this map's resolution and band.
    pub fn empty_grid(&self) -> InstanceVoxelGrid {
        InstanceVoxelGrid::with_band(self.voxel_length, self.band)
    }

    /// Inserts a new instance under a fresh id.
    pub fn insert(&mut self, belief: SemanticBelief, grid: InstanceVoxelGrid, frame: u64) -> u32 {
        assert_eq!(belief.n_classes(), self.n_classes, "class count mismatch");
        let id = self.next_id;
        self.next_id += 1;
        self.instances.insert(
            id,
            Instance {
                id,
                belief,
                grid,
                created_at: frame,
                last_seen: frame,
            },
        );
        id
    }

    pub fn remove(&mut self, id: u32) -> Option<Instance> {
        self.instances.remove(&id)
    }

    /// Sum of voxel counts over instances.
    pub fn voxel_count(&self) -> usize {
        self.instances.values().map(|i| i.grid.len()).sum()
    }
}
