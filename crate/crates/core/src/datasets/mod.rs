//! Dataset construction: manifests, weather expansion, validation sets,
//! crop datasets, synthetic scenes and KITTI labels.

mod build;
mod kitti;
mod manifest;
mod scene;

pub use build::{
    build_validation_sets, cropify_dataset, extend_dataset, generate_corpus, validation_set_names, CorpusSpec,
    MANIFEST_NAME,
};
pub use kitti::{format_kitti_labels, parse_kitti_labels, parse_kitti_str, ClassTable};
pub use manifest::{
    emit_manifest, parse_manifest, read_manifest, resolve, write_manifest, Manifest, SampleRecord, Split, Variant,
};
pub use scene::{generate_scene, ObjectClass, SceneObject, SceneSpec, OBJECT_GAP, PLACEMENT_TRIES};
