//! Two-dimensional PCA views of the learned representations.

mod pca;
mod snapshot;

pub use pca::{pca_top2, Pca};
pub use snapshot::{
    export_snapshots, run_with_snapshots, snapshot_rows, snapshots_csv, SnapshotRecord, SnapshotRun,
    DEFAULT_SNAPSHOT_STEPS,
};
