//! Visual-word codebook, clip documents and scene corpora.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Cell grid and direction quantization that define a scene's codebook.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    pub cells_x: usize,
    pub cells_y: usize,
    pub directions: usize,
    /// Side of a square cell in pixels.
    pub cell_pixels: usize,
}

/// A codebook entry: cell column, cell row and direction bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VisualWord {
    pub id: usize,
    pub cx: usize,
    pub cy: usize,
    pub d: usize,
}

impl GridSpec {
    pub fn new(
        cells_x: usize,
        cells_y: usize,
        directions: usize,
        cell_pixels: usize,
    ) -> Result<Self> {
        if cells_x == 0 || cells_y == 0 || directions == 0 || cell_pixels == 0 {
            return Err(Error::domain("grid dimensions must all be at least 1"));
        }
        Ok(Self {
            cells_x,
            cells_y,
            directions,
            cell_pixels,
        })
    }

    /// Codebook size `cells_x * cells_y * directions`.
    pub fn vocab_size(&self) -> usize {
        self.cells_x * self.cells_y * self.directions
    }

    pub fn num_cells(&self) -> usize {
        self.cells_x * self.cells_y
    }

    /// Row-major word index `(cy * cells_x + cx) * directions + d`.
    pub fn word_index(&self, cx: usize, cy: usize, d: usize) -> Result<usize> {
        if cx >= self.cells_x || cy >= self.cells_y || d >= self.directions {
            return Err(Error::domain(format!(
                "word coordinates ({cx},{cy},{d}) outside grid {}x{}x{}",
                self.cells_x, self.cells_y, self.directions
            )));
        }
        Ok(self.index_unchecked(cx, cy, d))
    }

    #[inline]
    pub(crate) fn index_unchecked(&self, cx: usize, cy: usize, d: usize) -> usize {
        (cy * self.cells_x + cx) * self.directions + d
    }

    pub fn word_coords(&self, id: usize) -> Result<VisualWord> {
        if id >= self.vocab_size() {
            return Err(Error::domain(format!(
                "word id {id} outside codebook of size {}",
                self.vocab_size()
            )));
        }
        Ok(self.coords_unchecked(id))
    }

    #[inline]
    pub(crate) fn coords_unchecked(&self, id: usize) -> VisualWord {
        let d = id % self.directions;
        let cell = id / self.directions;
        VisualWord {
            id,
            cx: cell % self.cells_x,
            cy: cell / self.cells_x,
            d,
        }
    }

    /// Unit vector of direction bin `d` (angle `2πd / directions`).
    pub fn direction_vector(&self, d: usize) -> [f64; 2] {
        let angle = 2.0 * PI * d as f64 / self.directions as f64;
        [libm::cos(angle), libm::sin(angle)]
    }

    /// Nearest direction bin of a motion vector.
    pub fn direction_bin(&self, v: [f64; 2]) -> usize {
        let angle = libm::atan2(v[1], v[0]);
        let step = 2.0 * PI / self.directions as f64;
        let bin = libm::round(angle / step) as i64;
        bin.rem_euclid(self.directions as i64) as usize
    }
}

/// Category of a labelled behaviour: the canonical encoding of its tag set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CategoryId(pub String);

impl core::fmt::Display for CategoryId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Behaviour annotation of a clip: a set of activity tags. Every distinct tag
/// combination is its own category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorLabel {
    tags: BTreeSet<String>,
    category: CategoryId,
}

impl BehaviorLabel {
    pub fn from_tags<I, S>(tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tags: BTreeSet<String> = tags.into_iter().map(Into::into).collect();
        let joined: Vec<&str> = tags.iter().map(String::as_str).collect();
        let category = CategoryId(if joined.is_empty() {
            "none".to_string()
        } else {
            joined.join("+")
        });
        Self { tags, category }
    }

    pub fn tags(&self) -> &BTreeSet<String> {
        &self.tags
    }

    pub fn category(&self) -> &CategoryId {
        &self.category
    }
}

/// Bag of visual words for one clip, stored as sorted `(word, count)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipDocument {
    pub clip_id: String,
    pub scene_id: String,
    counts: Vec<(usize, u32)>,
}

impl ClipDocument {
    /// Builds a document from arbitrary `(word, count)` pairs. Duplicate words
    /// are merged and zero counts dropped.
    pub fn from_counts<I>(
        clip_id: impl Into<String>,
        scene_id: impl Into<String>,
        counts: I,
    ) -> Self
    where
        I: IntoIterator<Item = (usize, u32)>,
    {
        let mut merged: BTreeMap<usize, u32> = BTreeMap::new();
        for (w, c) in counts {
            if c > 0 {
                *merged.entry(w).or_insert(0) += c;
            }
        }
        Self {
            clip_id: clip_id.into(),
            scene_id: scene_id.into(),
            counts: merged.into_iter().collect(),
        }
    }

    pub fn empty(clip_id: impl Into<String>, scene_id: impl Into<String>) -> Self {
        Self {
            clip_id: clip_id.into(),
            scene_id: scene_id.into(),
            counts: Vec::new(),
        }
    }

    /// Sorted, strictly positive `(word, count)` pairs.
    pub fn counts(&self) -> &[(usize, u32)] {
        &self.counts
    }

    /// Total number of words `N_j`.
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        match self.counts.last() {
            Some(&(w, _)) if w >= grid.vocab_size() => Err(Error::domain(format!(
                "clip {} of scene {} uses word {w} outside codebook of size {}",
                self.clip_id,
                self.scene_id,
                grid.vocab_size()
            ))),
            _ => Ok(()),
        }
    }
}

/// All clips of one scene together with optional behaviour annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneCorpus {
    pub scene_id: String,
    pub grid: GridSpec,
    /// Clips used to learn the scene's topic model.
    pub training_clips: Vec<ClipDocument>,
    /// Clips used for query, classification and summarization.
    pub semantic_clips: Vec<ClipDocument>,
    pub annotations: BTreeMap<String, BehaviorLabel>,
}

impl SceneCorpus {
    pub fn new(
        scene_id: impl Into<String>,
        grid: GridSpec,
        training_clips: Vec<ClipDocument>,
        semantic_clips: Vec<ClipDocument>,
        annotations: BTreeMap<String, BehaviorLabel>,
    ) -> Result<Self> {
        let scene_id = scene_id.into();
        let mut seen = BTreeSet::new();
        for clip in training_clips.iter().chain(&semantic_clips) {
            clip.validate(&grid)?;
            if clip.scene_id != scene_id {
                return Err(Error::domain(format!(
                    "clip {} belongs to scene {}, not {scene_id}",
                    clip.clip_id, clip.scene_id
                )));
            }
            if !seen.insert(clip.clip_id.as_str()) {
                return Err(Error::domain(format!(
                    "duplicate clip id {} in scene {scene_id}",
                    clip.clip_id
                )));
            }
        }
        if let Some(unknown) = annotations.keys().find(|k| !seen.contains(k.as_str())) {
            return Err(Error::domain(format!(
                "annotation for unknown clip {unknown} in scene {scene_id}"
            )));
        }
        Ok(Self {
            scene_id,
            grid,
            training_clips,
            semantic_clips,
            annotations,
        })
    }

    pub fn label(&self, clip_id: &str) -> Option<&BehaviorLabel> {
        self.annotations.get(clip_id)
    }

    pub fn is_annotated(&self) -> bool {
        !self.annotations.is_empty()
    }
}

/// Per-cell mean motion for one frame; `None` marks cells without flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub cells_x: usize,
    pub cells_y: usize,
    /// Row-major by cell row, then column.
    pub vectors: Vec<Option<[f64; 2]>>,
}

impl FlowField {
    pub fn zeros(cells_x: usize, cells_y: usize) -> Self {
        Self {
            cells_x,
            cells_y,
            vectors: alloc::vec![Some([0.0, 0.0]); cells_x * cells_y],
        }
    }

    pub fn set(&mut self, cx: usize, cy: usize, v: [f64; 2]) {
        self.vectors[cy * self.cells_x + cx] = Some(v);
    }
}

/// Quantizes one frame of cell flow: every cell whose motion magnitude exceeds
/// `magnitude_threshold` contributes one word in its nearest direction bin.
pub fn quantize_motion(
    clip_id: &str,
    scene_id: &str,
    flow: &FlowField,
    grid: &GridSpec,
    magnitude_threshold: f64,
) -> Result<ClipDocument> {
    quantize_clip(
        clip_id,
        scene_id,
        core::slice::from_ref(flow),
        grid,
        magnitude_threshold,
    )
}

/// Accumulates the words of several frames into one clip document.
pub fn quantize_clip(
    clip_id: &str,
    scene_id: &str,
    frames: &[FlowField],
    grid: &GridSpec,
    magnitude_threshold: f64,
) -> Result<ClipDocument> {
    let mut words = Vec::new();
    for flow in frames {
        if flow.cells_x != grid.cells_x
            || flow.cells_y != grid.cells_y
            || flow.vectors.len() != grid.num_cells()
        {
            return Err(Error::domain(format!(
                "flow field {}x{} does not match grid {}x{}",
                flow.cells_x, flow.cells_y, grid.cells_x, grid.cells_y
            )));
        }
        for (cell, v) in flow.vectors.iter().enumerate() {
            let Some(v) = v else { continue };
            let mag = libm::hypot(v[0], v[1]);
            if mag > magnitude_threshold {
                let d = grid.direction_bin(*v);
                words.push((
                    grid.index_unchecked(cell % grid.cells_x, cell / grid.cells_x, d),
                    1,
                ));
            }
        }
    }
    Ok(ClipDocument::from_counts(clip_id, scene_id, words))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn origin_maps_to_zero() {
        for g in [
            GridSpec::new(1, 1, 1, 1).unwrap(),
            GridSpec::new(4, 3, 8, 5).unwrap(),
        ] {
            assert_eq!(g.word_index(0, 0, 0).unwrap(), 0);
        }
    }

    #[test]
    fn worked_index_and_full_bijection() {
        let g = GridSpec::new(4, 3, 8, 5).unwrap();
        assert_eq!(g.word_index(1, 2, 3).unwrap(), 75);
        // Enumerate the full codebook; every id must be hit exactly once.
        let mut seen = vec![false; g.vocab_size()];
        for cy in 0..3 {
            for cx in 0..4 {
                for d in 0..8 {
                    let id = g.word_index(cx, cy, d).unwrap();
                    assert!(!seen[id]);
                    seen[id] = true;
                    let w = g.word_coords(id).unwrap();
                    assert_eq!((w.cx, w.cy, w.d), (cx, cy, d));
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn out_of_range_is_domain_error() {
        let g = GridSpec::new(4, 3, 8, 5).unwrap();
        assert!(g.word_index(4, 0, 0).is_err());
        assert!(g.word_index(0, 3, 0).is_err());
        assert!(g.word_index(0, 0, 8).is_err());
        assert!(g.word_coords(96).is_err());
        assert!(GridSpec::new(0, 3, 8, 5).is_err());
    }

    proptest! {
        #[test]
        fn coords_round_trip(na in 1usize..12, nb in 1usize..12, nm in 1usize..12, seed in 0usize..10_000) {
            let g = GridSpec::new(na, nb, nm, 5).unwrap();
            let id = seed % g.vocab_size();
            let w = g.word_coords(id).unwrap();
            prop_assert_eq!(g.word_index(w.cx, w.cy, w.d).unwrap(), id);
        }

        #[test]
        fn quantized_count_equals_moving_cells(
            vx in proptest::collection::vec(-2.0f64..2.0, 12),
            vy in proptest::collection::vec(-2.0f64..2.0, 12),
            thr in 0.0f64..1.5,
        ) {
            let g = GridSpec::new(4, 3, 8, 5).unwrap();
            let mut flow = FlowField::zeros(4, 3);
            let mut moving = 0u64;
            for i in 0..12 {
                flow.set(i % 4, i / 4, [vx[i], vy[i]]);
                if libm::hypot(vx[i], vy[i]) > thr { moving += 1; }
            }
            let doc = quantize_motion("c", "s", &flow, &g, thr).unwrap();
            prop_assert_eq!(doc.total(), moving);
        }
    }

    #[test]
    fn zero_flow_is_empty() {
        let g = GridSpec::new(4, 3, 8, 5).unwrap();
        let doc = quantize_motion("c", "s", &FlowField::zeros(4, 3), &g, 0.0).unwrap();
        assert!(doc.is_empty());
    }

    #[test]
    fn axis_and_diagonal_bins() {
        let g = GridSpec::new(4, 3, 8, 5).unwrap();
        let mut flow = FlowField::zeros(4, 3);
        flow.set(2, 1, [1.0, 0.0]);
        let doc = quantize_motion("c", "s", &flow, &g, 0.0).unwrap();
        assert_eq!(doc.counts(), &[(g.word_index(2, 1, 0).unwrap(), 1)]);

        // Oracle: nearest of the 8 bin vectors by enumeration.
        let v = [1.0, 1.0];
        let best = (0..8)
            .min_by(|&a, &b| {
                let da = g.direction_vector(a);
                let db = g.direction_vector(b);
                let ea =
                    (da[0] - v[0] / 2f64.sqrt()).powi(2) + (da[1] - v[1] / 2f64.sqrt()).powi(2);
                let eb =
                    (db[0] - v[0] / 2f64.sqrt()).powi(2) + (db[1] - v[1] / 2f64.sqrt()).powi(2);
                ea.total_cmp(&eb)
            })
            .unwrap();
        assert_eq!(best, 1);
        let mut flow = FlowField::zeros(4, 3);
        flow.set(0, 0, v);
        let doc = quantize_motion("c", "s", &flow, &g, 0.0).unwrap();
        assert_eq!(g.word_coords(doc.counts()[0].0).unwrap().d, best);
    }

    #[test]
    fn flow_dimension_mismatch() {
        let g = GridSpec::new(4, 3, 8, 5).unwrap();
        assert!(quantize_motion("c", "s", &FlowField::zeros(3, 3), &g, 0.0).is_err());
    }

    #[test]
    fn missing_cells_contribute_nothing() {
        let g = GridSpec::new(2, 1, 8, 5).unwrap();
        let flow = FlowField {
            cells_x: 2,
            cells_y: 1,
            vectors: vec![None, Some([0.0, 2.0])],
        };
        let doc = quantize_motion("c", "s", &flow, &g, 0.0).unwrap();
        assert_eq!(doc.counts(), &[(g.word_index(1, 0, 2).unwrap(), 1)]);
    }

    #[test]
    fn labels_from_equal_tag_sets_share_category() {
        let a = BehaviorLabel::from_tags(["left", "tram"]);
        let b = BehaviorLabel::from_tags(["tram", "left", "left"]);
        assert_eq!(a.category(), b.category());
        assert_ne!(a.category(), BehaviorLabel::from_tags(["left"]).category());
    }

    #[test]
    fn corpus_rejects_duplicate_ids() {
        let g = GridSpec::new(2, 2, 2, 5).unwrap();
        let c = ClipDocument::from_counts("a", "s", [(1, 2)]);
        let err = SceneCorpus::new("s", g, vec![c.clone()], vec![c], BTreeMap::new());
        assert!(err.is_err());
        let bad = ClipDocument::from_counts("b", "s", [(8, 1)]);
        assert!(SceneCorpus::new("s", g, vec![bad], vec![], BTreeMap::new()).is_err());
    }
}
