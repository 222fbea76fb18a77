use std::path::Path;
use std::sync::OnceLock;

use proptest::prelude::*;
use scenemesh::artifact::{self, Artifact};
use scenemesh::core::{ClipDocument, GridSpec, SceneCorpus};
use scenemesh::formats::*;
use scenemesh::pipeline::{model_path, AFFINITY, CLUSTERING, STBS, WORLD_INDEX};
use scenemesh::{Pipeline, PipelineConfig, PipelineError, Stage};

/// A run taken as far as the shared bases.
fn run_dir() -> &'static Path {
    static RUN: OnceLock<tempfile::TempDir> = OnceLock::new();
    RUN.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            run_dir: tmp.path().to_path_buf(),
            ..PipelineConfig::default()
        };
        let p = Pipeline::new(cfg).unwrap();
        for stage in [
            Stage::Gen,
            Stage::Train,
            Stage::Affinity,
            Stage::Cluster,
            Stage::Stb,
        ] {
            p.run(stage).unwrap();
        }
        tmp
    })
    .path()
}

fn reencode<T: serde::Serialize>(a: &Artifact<T>, path: &Path) {
    let bytes = artifact::encode(&a.kind, &a.config_hash, &a.payload);
    assert_eq!(bytes, std::fs::read(path).unwrap(), "{}", path.display());
}

fn scene_ids() -> Vec<String> {
    let index = artifact::load::<WorldIndex>(&run_dir().join(WORLD_INDEX), KIND_WORLD).unwrap();
    index
        .payload
        .scenes
        .into_iter()
        .map(|s| s.scene_id)
        .collect()
}

#[test]
fn corpus_round_trips() {
    for id in scene_ids() {
        let path = run_dir().join(format!("world/{id}.json"));
        let a = artifact::load::<CorpusDto>(&path, KIND_CORPUS).unwrap();
        let core = a.payload.to_core().unwrap();
        assert_eq!(CorpusDto::from(&core), a.payload);
        reencode(&a, &path);
    }
}

#[test]
fn model_round_trips() {
    for id in scene_ids() {
        let path = run_dir().join(model_path(&id));
        let a = artifact::load::<ModelDto>(&path, KIND_MODEL).unwrap();
        let core = a.payload.to_core().unwrap();
        assert_eq!(ModelDto::new(&core, &a.payload.elbo_trace), a.payload);
        reencode(&a, &path);
    }
}

#[test]
fn affinity_and_clustering_round_trip() {
    let path = run_dir().join(AFFINITY);
    let a = artifact::load::<AffinityDto>(&path, KIND_AFFINITY).unwrap();
    let core = a.payload.to_core().unwrap();
    assert_eq!(AffinityDto::new(&core, a.payload.tau), a.payload);
    reencode(&a, &path);

    let path = run_dir().join(CLUSTERING);
    let c = artifact::load::<ClusteringDto>(&path, KIND_CLUSTERING).unwrap();
    let core = c.payload.to_core().unwrap();
    assert_eq!(
        ClusteringDto::new(&core, c.payload.rand_index_vs_truth),
        c.payload
    );
    reencode(&c, &path);
}

#[test]
fn bases_keep_provenance() {
    let path = run_dir().join(STBS);
    let a = artifact::load::<StbSetDto>(&path, KIND_STBS).unwrap();
    for dto in a.payload.scm.iter().chain([&a.payload.fm]) {
        let core = dto.to_core().unwrap();
        assert_eq!(core.provenance, dto.provenance);
        assert_eq!(StbDto::from(&core), *dto);
    }
    reencode(&a, &path);
}

#[test]
fn truncated_artifact_is_a_parse_error() {
    let path = run_dir().join(CLUSTERING);
    let bytes = std::fs::read(&path).unwrap();
    for cut in [0, 1, bytes.len() / 2, bytes.len() - 3] {
        let err =
            artifact::decode::<ClusteringDto>(&path, &bytes[..cut], KIND_CLUSTERING).unwrap_err();
        assert!(
            matches!(err, PipelineError::Parse { .. }),
            "cut {cut}: {err}"
        );
        assert_eq!(err.exit_code(), 3);
    }
}

#[test]
fn version_is_checked() {
    let path = run_dir().join(AFFINITY);
    let text = std::fs::read_to_string(&path).unwrap();
    let bumped = text.replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
    let err = artifact::decode::<AffinityDto>(&path, bumped.as_bytes(), KIND_AFFINITY).unwrap_err();
    assert!(matches!(
        err,
        PipelineError::Version {
            found: 2,
            expected: 1,
            ..
        }
    ));
    let err = artifact::decode::<AffinityDto>(&path, text.as_bytes(), KIND_MODEL).unwrap_err();
    assert!(matches!(err, PipelineError::Kind { .. }));
}

#[test]
fn invalid_payload_fails_validation() {
    let path = run_dir().join(AFFINITY);
    let mut a = artifact::load::<AffinityDto>(&path, KIND_AFFINITY).unwrap();
    a.payload.values.pop();
    assert!(a.payload.to_core().is_err());
}

fn corpus_strategy() -> impl Strategy<Value = CorpusDto> {
    let clip = |prefix: &'static str| {
        prop::collection::vec(
            (
                prop::collection::vec((0usize..160, 1u32..9), 1..12),
                prop::option::of(prop::sample::subsequence(
                    vec!["walk", "turn", "stop"],
                    1..3,
                )),
            ),
            1..6,
        )
        .prop_map(move |clips| {
            clips
                .into_iter()
                .enumerate()
                .map(|(i, (counts, tags))| (format!("{prefix}{i}"), counts, tags))
                .collect::<Vec<_>>()
        })
    };
    (clip("t"), clip("s")).prop_map(|(training, semantic)| {
        let grid = GridSpec::new(5, 4, 8, 5).unwrap();
        let docs = |v: &Vec<(String, Vec<(usize, u32)>, Option<Vec<&str>>)>| {
            v.iter()
                .map(|(id, counts, _)| {
                    ClipDocument::from_counts(id.clone(), "p", counts.iter().copied())
                })
                .collect::<Vec<_>>()
        };
        let annotations = training
            .iter()
            .chain(&semantic)
            .filter_map(|(id, _, tags)| {
                tags.as_ref().map(|t| {
                    (
                        id.clone(),
                        scenemesh::core::BehaviorLabel::from_tags(t.iter().copied()),
                    )
                })
            })
            .collect();
        let corpus =
            SceneCorpus::new("p", grid, docs(&training), docs(&semantic), annotations).unwrap();
        CorpusDto::from(&corpus)
    })
}

proptest! {
    #[test]
    fn corpus_dto_round_trips(dto in corpus_strategy()) {
        let bytes = artifact::encode(KIND_CORPUS, "h", &dto);
        let back = artifact::decode::<CorpusDto>(Path::new("p.json"), &bytes, KIND_CORPUS).unwrap();
        prop_assert_eq!(&back.payload, &dto);
        let core = back.payload.to_core().unwrap();
        prop_assert_eq!(CorpusDto::from(&core), dto);
    }
}
