use std::path::Path;
use std::str::FromStr;

use super::metrics::Metrics;
use super::trials::{run_trials, Cell, CellResult, ExperimentData, Grouping, TrialSettings};
use crate::model::ModalityPartition;
use crate::{Error, Result};

/// Predefined comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Noise modality on vs off.
    Noise,
    /// Cooperative vs classifier-only optimization of `L_C`.
    Cooperative,
    /// MLPs on single modalities and CN vs MLP on every pair and on all modalities.
    Modalities,
    /// Natural vs random modality divisions.
    Grouping,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Noise, Suite::Cooperative, Suite::Modalities, Suite::Grouping];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Noise => "noise",
            Suite::Cooperative => "coop",
            Suite::Modalities => "modalities",
            Suite::Grouping => "grouping",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite '{s}' (expected noise, coop, modalities, or grouping)")))
    }
}

/// Natural-group positions split into two contiguous blocks with feature
/// counts as even as possible (ties favour the larger first block).
pub fn natural_two_groups(partition: &ModalityPartition) -> Vec<Vec<usize>> {
    let dims = partition.group_dims();
    let total: usize = dims.iter().sum();
    let mut best = (usize::MAX, 1);
    let mut left = 0;
    for split in 1..dims.len() {
        left += dims[split - 1];
        let gap = left.abs_diff(total - left);
        if gap <= best.0 {
            best = (gap, split);
        }
    }
    let m = dims.len();
    vec![(0..best.1).collect(), (best.1..m).collect()]
}

/// Cells of one suite for a dataset with the given natural partition.
pub fn suite_cells(suite: Suite, partition: &ModalityPartition) -> Vec<Cell> {
    let m = partition.num_modalities();
    let names = partition.names();
    let label = |keep: &[usize]| keep.iter().map(|&k| names[k]).collect::<Vec<_>>().join("+");
    match suite {
        Suite::Noise => vec![
            Cell::consensus("cn-noise"),
            Cell {
                noise: false,
                ..Cell::consensus("cn-no-noise")
            },
        ],
        Suite::Cooperative => vec![
            Cell {
                cooperative: false,
                ..Cell::consensus("cn-non-coop")
            },
            Cell::consensus("cn-coop"),
        ],
        Suite::Modalities => {
            let mut cells = Vec::new();
            for (k, name) in names.iter().enumerate() {
                cells.push(Cell {
                    modalities: Some(vec![k]),
                    ..Cell::mlp(format!("mlp({name})"))
                });
            }
            if m > 2 {
                for a in 0..m {
                    for b in a + 1..m {
                        let keep = vec![a, b];
                        let tag = label(&keep);
                        cells.push(Cell {
                            modalities: Some(keep.clone()),
                            ..Cell::mlp(format!("mlp({tag})"))
                        });
                        cells.push(Cell {
                            modalities: Some(keep),
                            ..Cell::consensus(format!("cn({tag})"))
                        });
                    }
                }
            }
            cells.push(Cell::mlp("mlp(all)"));
            cells.push(Cell::consensus("cn(all)"));
            cells
        }
        Suite::Grouping => {
            let dims = partition.total_dims();
            let mut cells: Vec<Cell> = [3, 2, 4]
                .into_iter()
                .filter(|&k| k <= dims)
                .map(|k| Cell {
                    grouping: Grouping::Random(k),
                    ..Cell::consensus(format!("random-{k}"))
                })
                .collect();
            if m > 2 {
                cells.push(Cell {
                    grouping: Grouping::Merged(natural_two_groups(partition)),
                    ..Cell::consensus("natural-2")
                });
            }
            cells.push(Cell::consensus(format!("natural-{m}")));
            cells
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub cells: Vec<CellResult>,
}

/// Runs every cell with the same trial seeds, so trial `t` of every cell uses
/// the same split.
pub fn run_ablation(data: &ExperimentData, settings: &TrialSettings, cells: &[Cell]) -> Result<AblationResult> {
    if cells.is_empty() {
        return Err(Error::Config("ablation grid has no cells".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for c in cells {
        if !seen.insert(c.id.as_str()) {
            return Err(Error::Config(format!("duplicate cell id '{}'", c.id)));
        }
    }
    let mut results = Vec::with_capacity(cells.len());
    for cell in cells {
        log::info!("running cell '{}'", cell.id);
        results.push(run_trials(data, settings, cell)?);
    }
    Ok(AblationResult { cells: results })
}

impl AblationResult {
    pub fn cell(&self, id: &str) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.cell.id == id)
    }

    /// `cell_id,metric,mean,std,n` with one row per cell and metric.
    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["cell_id", "metric", "mean", "std", "n"]).map_err(csv_err)?;
        for c in &self.cells {
            for (name, s) in Metrics::NAMES.iter().zip(c.summaries()) {
                w.write_record([
                    c.cell.id.clone(),
                    name.to_string(),
                    s.mean.to_string(),
                    s.std.to_string(),
                    s.n.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        into_string(w)
    }

    /// Long format: `cell_id,trial,seed,split_hash,status,metric,value`.
    /// Aborted trials have status `aborted`, metric `error`, and the message as value.
    pub fn trials_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["cell_id", "trial", "seed", "split_hash", "status", "metric", "value"])
            .map_err(csv_err)?;
        for c in &self.cells {
            let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
            for r in &c.reports {
                for (name, v) in Metrics::NAMES.iter().zip(r.metrics.values()) {
                    rows.push((
                        r.trial,
                        vec![
                            c.cell.id.clone(),
                            r.trial.to_string(),
                            r.seed.to_string(),
                            format!("{:016x}", r.split_hash),
                            "ok".into(),
                            name.to_string(),
                            v.to_string(),
                        ],
                    ));
                }
            }
            for f in &c.failures {
                rows.push((
                    f.trial,
                    vec![
                        c.cell.id.clone(),
                        f.trial.to_string(),
                        f.seed.to_string(),
                        String::new(),
                        "aborted".into(),
                        "error".into(),
                        f.error.clone(),
                    ],
                ));
            }
            rows.sort_by_key(|(t, _)| *t);
            for (_, row) in rows {
                w.write_record(&row).map_err(csv_err)?;
            }
        }
        into_string(w)
    }

    pub fn write(&self, summary_path: impl AsRef<Path>, trials_path: impl AsRef<Path>) -> Result<()> {
        write_text(summary_path.as_ref(), &self.summary_csv()?)?;
        write_text(trials_path.as_ref(), &self.trials_csv()?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::State(format!("csv encoding failed: {e}"))
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::State(format!("csv flush failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::State(e.to_string()))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModalityGroup;

    fn partition(sizes: &[usize]) -> ModalityPartition {
        let mut start = 0;
        let groups = sizes
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let g = ModalityGroup {
                    name: format!("g{i}"),
                    indices: (start..start + s).collect(),
                };
                start += s;
                g
            })
            .collect();
        ModalityPartition::new(groups, start).unwrap()
    }

    #[test]
    fn modality_suite_has_eleven_rows_for_three_modalities() {
        let cells = suite_cells(Suite::Modalities, &partition(&[2, 2, 2]));
        assert_eq!(cells.len(), 11);
        let ids: Vec<&str> = cells.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(&ids[..3], &["mlp(g0)", "mlp(g1)", "mlp(g2)"]);
        assert_eq!(&ids[9..], &["mlp(all)", "cn(all)"]);
    }

    #[test]
    fn two_group_merge_balances_features() {
        assert_eq!(natural_two_groups(&partition(&[4, 4, 4])), vec![vec![0, 1], vec![2]]);
        assert_eq!(natural_two_groups(&partition(&[5, 3, 3])), vec![vec![0], vec![1, 2]]);
    }

    #[test]
    fn grouping_suite_names() {
        let ids: Vec<String> = suite_cells(Suite::Grouping, &partition(&[3, 3, 3]))
            .into_iter()
            .map(|c| c.id)
            .collect();
        assert_eq!(ids, ["random-3", "random-2", "random-4", "natural-2", "natural-3"]);
    }

    #[test]
    fn suite_names_parse() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("tables".parse::<Suite>().is_err());
    }
}
