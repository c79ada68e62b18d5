//! Decision-level collaboration of per-stream, per-view class probabilities,
//! subject-independent fold construction, and accuracy/confusion reporting.
//!
//! The collaborative score of sample `n` and class `l` over a view set is
//! the view-average of the summed stream probabilities:
//! `C(n,l) = (1/|views|) * sum_views sum_streams p(n, stream, view, l)`.
//! With both streams active each row sums to 2; predictions take the argmax,
//! so no renormalization is applied.

use crate::mesh::{Expression, CLASS_COUNT};
use crate::render::ProfileTag;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// The two collaborating probability sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stream {
    /// Dynamic-image classifier scores.
    Dynamic,
    /// Landmark-sequence classifier scores.
    Landmark,
}

impl Stream {
    pub const ALL: [Stream; 2] = [Stream::Dynamic, Stream::Landmark];

    pub fn name(self) -> &'static str {
        match self {
            Stream::Dynamic => "DI",
            Stream::Landmark => "LI",
        }
    }

    pub fn parse(s: &str) -> Option<Stream> {
        match s {
            "DI" => Some(Stream::Dynamic),
            "LI" => Some(Stream::Landmark),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("score cube has no slice for stream {stream} view {view}")]
    MissingSlice { stream: &'static str, view: &'static str },
    #[error("{subjects} subjects cannot fill {k} folds")]
    TooFewSubjects { subjects: usize, k: usize },
    #[error("prediction and truth lengths differ")]
    LengthMismatch,
    #[error("report is missing cell {0}")]
    MissingCell(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Per-sample, per-stream, per-view class probabilities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreCube {
    pub n_samples: usize,
    slices: Vec<(Stream, ProfileTag, Vec<[f64; CLASS_COUNT]>)>,
}

impl ScoreCube {
    pub fn new(n_samples: usize) -> ScoreCube {
        ScoreCube {
            n_samples,
            slices: Vec::new(),
        }
    }

    /// Installs the probability rows of one (stream, view) slice.
    pub fn set_slice(
        &mut self,
        stream: Stream,
        view: ProfileTag,
        rows: Vec<[f64; CLASS_COUNT]>,
    ) -> Result<(), FusionError> {
        if rows.len() != self.n_samples {
            return Err(FusionError::InvalidInput(format!(
                "slice has {} rows for {} samples",
                rows.len(),
                self.n_samples
            )));
        }
        if let Some(existing) = self.slice_mut(stream, view) {
            *existing = rows;
        } else {
            self.slices.push((stream, view, rows));
        }
        Ok(())
    }

    pub fn slice(&self, stream: Stream, view: ProfileTag) -> Option<&Vec<[f64; CLASS_COUNT]>> {
        self.slices
            .iter()
            .find(|(s, v, _)| *s == stream && *v == view)
            .map(|(_, _, rows)| rows)
    }

    fn slice_mut(
        &mut self,
        stream: Stream,
        view: ProfileTag,
    ) -> Option<&mut Vec<[f64; CLASS_COUNT]>> {
        self.slices
            .iter_mut()
            .find(|(s, v, _)| *s == stream && *v == view)
            .map(|(_, _, rows)| rows)
    }

    /// Slices in insertion order, for serialization.
    pub fn slices(&self) -> &[(Stream, ProfileTag, Vec<[f64; CLASS_COUNT]>)] {
        &self.slices
    }
}

/// N x 6 collaborative score matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    pub rows: Vec<[f64; CLASS_COUNT]>,
}

/// Argmax decision for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Expression,
    pub score: f64,
}

/// View-averaged, stream-summed scores over the requested subsets.
pub fn collaborate(
    cube: &ScoreCube,
    streams: &[Stream],
    views: &[ProfileTag],
) -> Result<ProbMatrix, FusionError> {
    if streams.is_empty() || views.is_empty() {
        return Err(FusionError::InvalidInput(
            "streams and views must be non-empty".into(),
        ));
    }
    let mut rows = vec![[0.0f64; CLASS_COUNT]; cube.n_samples];
    for &view in views {
        for &stream in streams {
            let slice = cube
                .slice(stream, view)
                .ok_or(FusionError::MissingSlice {
                    stream: stream.name(),
                    view: view.name(),
                })?;
            for (row, probs) in rows.iter_mut().zip(slice) {
                for (acc, p) in row.iter_mut().zip(probs) {
                    *acc += p;
                }
            }
        }
    }
    let inv = 1.0 / views.len() as f64;
    for row in rows.iter_mut() {
        for v in row.iter_mut() {
            *v *= inv;
        }
    }
    Ok(ProbMatrix { rows })
}

/// Per-row argmax; ties go to the lowest class index.
pub fn predict(matrix: &ProbMatrix) -> Vec<Prediction> {
    matrix
        .rows
        .iter()
        .map(|row| {
            let mut best = 0usize;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            Prediction {
                label: Expression::from_index(best).unwrap(),
                score: row[best],
            }
        })
        .collect()
}

/// One fold's subject partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// All folds of one cross-validation run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub folds: Vec<Fold>,
}

impl FoldSplit {
    /// Asserts subject-disjointness inside every fold.
    pub fn check_disjoint(&self) -> Result<(), FusionError> {
        for (i, fold) in self.folds.iter().enumerate() {
            let mut seen = std::collections::HashSet::new();
            for id in fold.train.iter().chain(&fold.val).chain(&fold.test) {
                if !seen.insert(id) {
                    return Err(FusionError::InvalidInput(format!(
                        "fold {i}: subject {id} appears in more than one part"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Rotates shuffled subjects through `k` folds with 60/20/20 proportions by
/// subject count (validation and test get `round(0.2 n)` subjects each,
/// training keeps the remainder).
///
/// Fold `f` starts its test window at position `floor(f * n / k)` of the
/// shuffled circle, so the windows advance uniformly: when `k * round(0.2n)`
/// is a multiple of `n` (for example five folds, or ten folds of ten
/// subjects) every subject appears in test the same number of times —
/// exactly once per rotation cycle of `n / round(0.2n)` folds.
pub fn make_folds(subjects: &[String], k: usize, seed: u64) -> Result<FoldSplit, FusionError> {
    let n = subjects.len();
    if k == 0 || n < k {
        return Err(FusionError::TooFewSubjects { subjects: n, k });
    }
    let n_test = ((0.2 * n as f64).round() as usize).max(1);
    let n_val = n_test;
    if n_test + n_val >= n {
        return Err(FusionError::TooFewSubjects { subjects: n, k });
    }
    let mut shuffled: Vec<String> = subjects.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let offset = f * n / k;
        let pick = |start: usize, len: usize| -> Vec<String> {
            (0..len)
                .map(|i| shuffled[(offset + start + i) % n].clone())
                .collect()
        };
        let test = pick(0, n_test);
        let val = pick(n_test, n_val);
        let train = pick(n_test + n_val, n - n_test - n_val);
        folds.push(Fold { train, val, test });
    }
    let split = FoldSplit { folds };
    split.check_disjoint()?;
    Ok(split)
}

/// 6 x 6 confusion counts, rows indexed by truth, columns by prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[usize; CLASS_COUNT]; CLASS_COUNT],
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..CLASS_COUNT).map(|i| self.counts[i][i]).sum()
    }

    /// Row-normalized rates; rows with no observations stay all-zero.
    pub fn normalized(&self) -> [[f64; CLASS_COUNT]; CLASS_COUNT] {
        let mut out = [[0.0; CLASS_COUNT]; CLASS_COUNT];
        for (row, counts) in out.iter_mut().zip(&self.counts) {
            let total: usize = counts.iter().sum();
            if total > 0 {
                for (o, &c) in row.iter_mut().zip(counts) {
                    *o = c as f64 / total as f64;
                }
            }
        }
        out
    }
}

/// Accuracy plus confusion matrix of a prediction run.
pub fn evaluate(
    predictions: &[Prediction],
    truth: &[Expression],
) -> Result<(f64, ConfusionMatrix), FusionError> {
    if predictions.len() != truth.len() {
        return Err(FusionError::LengthMismatch);
    }
    if predictions.is_empty() {
        return Err(FusionError::InvalidInput("nothing to evaluate".into()));
    }
    let mut counts = [[0usize; CLASS_COUNT]; CLASS_COUNT];
    let mut correct = 0usize;
    for (pred, &actual) in predictions.iter().zip(truth) {
        counts[actual.index()][pred.label.index()] += 1;
        if pred.label == actual {
            correct += 1;
        }
    }
    Ok((
        correct as f64 / truth.len() as f64,
        ConfusionMatrix { counts },
    ))
}

/// The three collaborator settings of the accuracy table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CollabSetting {
    Landmark,
    Dynamic,
    Both,
}

impl CollabSetting {
    pub const ALL: [CollabSetting; 3] =
        [CollabSetting::Landmark, CollabSetting::Dynamic, CollabSetting::Both];

    pub fn streams(self) -> &'static [Stream] {
        match self {
            CollabSetting::Landmark => &[Stream::Landmark],
            CollabSetting::Dynamic => &[Stream::Dynamic],
            CollabSetting::Both => &[Stream::Landmark, Stream::Dynamic],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CollabSetting::Landmark => "Landmark Images",
            CollabSetting::Dynamic => "Dynamic Images",
            CollabSetting::Both => "Landmark and Dynamic Images",
        }
    }
}

/// The seven view combinations of the accuracy table, in row order.
pub const VIEW_COMBOS: [&[ProfileTag]; 7] = [
    &[ProfileTag::Lp],
    &[ProfileTag::Fp],
    &[ProfileTag::Rp],
    &[ProfileTag::Rp, ProfileTag::Fp],
    &[ProfileTag::Lp, ProfileTag::Fp],
    &[ProfileTag::Rp, ProfileTag::Lp],
    &[ProfileTag::Rp, ProfileTag::Fp, ProfileTag::Lp],
];

pub fn combo_label(combo: &[ProfileTag]) -> String {
    combo
        .iter()
        .map(|t| t.name())
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Published full-collaboration accuracies on the licensed BU-4DFE
/// benchmark. Reference values only: the synthetic data here cannot
/// reproduce them.
pub const BU4DFE_REFERENCE_ACCURACY: [(CollabSetting, f64); 3] = [
    (CollabSetting::Landmark, 88.80),
    (CollabSetting::Dynamic, 84.70),
    (CollabSetting::Both, 96.70),
];

/// One accuracy cell of the report grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportCell {
    pub setting: CollabSetting,
    pub views: Vec<ProfileTag>,
    pub accuracy: f64,
}

/// The 3 x 7 accuracy grid with per-setting best-combination markers.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub cells: Vec<ReportCell>,
}

/// Assembles the full grid; every (setting, combination) cell must be
/// present in `lookup` or the missing cell is named.
pub fn report_table(
    lookup: impl Fn(CollabSetting, &[ProfileTag]) -> Option<f64>,
) -> Result<ReportTable, FusionError> {
    let mut cells = Vec::with_capacity(21);
    for setting in CollabSetting::ALL {
        for combo in VIEW_COMBOS {
            let accuracy = lookup(setting, combo).ok_or_else(|| {
                FusionError::MissingCell(format!("{} / {}", setting.label(), combo_label(combo)))
            })?;
            cells.push(ReportCell {
                setting,
                views: combo.to_vec(),
                accuracy,
            });
        }
    }
    Ok(ReportTable { cells })
}

impl ReportTable {
    pub fn cell(&self, setting: CollabSetting, combo: &[ProfileTag]) -> Option<&ReportCell> {
        self.cells
            .iter()
            .find(|c| c.setting == setting && c.views == combo)
    }

    /// Best accuracy within one collaborator setting.
    pub fn best_for(&self, setting: CollabSetting) -> f64 {
        self.cells
            .iter()
            .filter(|c| c.setting == setting)
            .map(|c| c.accuracy)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Plain-text rendering in table-row order, best combination per
    /// setting starred.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<28}  {:<14}  {:>12}\n",
            "Collaborator(s)", "View(s)", "Accuracy (%)"
        ));
        out.push_str(&"-".repeat(60));
        out.push('\n');
        for setting in CollabSetting::ALL {
            let best = self.best_for(setting);
            for (i, combo) in VIEW_COMBOS.iter().enumerate() {
                let cell = self.cell(setting, combo).expect("cell checked at build");
                let mark = if cell.accuracy == best { " *" } else { "" };
                let name = if i == 0 { setting.label() } else { "" };
                out.push_str(&format!(
                    "{:<28}  {:<14}  {:>10.2}{}\n",
                    name,
                    combo_label(combo),
                    cell.accuracy * 100.0,
                    mark
                ));
            }
            out.push_str(&"-".repeat(60));
            out.push('\n');
        }
        out.push_str(
            "Reference (licensed BU-4DFE benchmark, RP + FP + LP): Landmark 88.80, \
             Dynamic 84.70, Combined 96.70. Synthetic data; values not comparable.\n",
        );
        out
    }

    /// CSV rendering: `setting,views,accuracy`.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("collaborators,views,accuracy\n");
        for cell in &self.cells {
            out.push_str(&format!(
                "{},{},{}\n",
                cell.setting.label().replace(' ', "_"),
                combo_label(&cell.views).replace(' ', ""),
                cell.accuracy
            ));
        }
        out
    }
}
