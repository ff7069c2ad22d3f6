use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::kitti::{format_kitti_labels, ClassTable};
use super::manifest::{read_manifest, write_manifest, Manifest, SampleRecord, Split, Variant};
use super::scene::{generate_scene, SceneSpec};
use crate::imaging::{decode_ppm, split_crops, write_ppm};
use crate::rng::{derive, CounterRng};
use crate::weathergen::{apply_weather, sample_intensity, AdversityTier, Condition, IntensityRange, WeatherSpec};
use crate::{CropGrid, Error, Image, Result};

pub const MANIFEST_NAME: &str = "manifest.jsonl";

/// Names of the ten validation sets, `normal` first.
pub fn validation_set_names() -> Vec<String> {
    let mut names = vec!["normal".to_string()];
    for c in Condition::ADVERSE {
        for tier in AdversityTier::ALL {
            names.push(format!("{}_{}", c.name(), tier.name()));
        }
    }
    names
}

fn read_bytes(id: &str, path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Data(format!("record {id}: cannot read {}: {e}", path.display())))
}

fn read_image(id: &str, path: &Path) -> Result<(Vec<u8>, Image)> {
    let bytes = read_bytes(id, path)?;
    let img = decode_ppm(&bytes).map_err(|e| Error::Data(format!("record {id}: {}: {e}", path.display())))?;
    Ok((bytes, img))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn check_unique(records: &[SampleRecord]) -> Result<()> {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::Data(format!("duplicate record id {}", r.id)));
        }
    }
    Ok(())
}

fn require_clear(r: &SampleRecord) -> Result<()> {
    if r.variant != Variant::Clear {
        return Err(Error::Data(format!("record {} is {}, expected clear", r.id, r.variant.name())));
    }
    Ok(())
}

/// Copies a record's label file to `dest` (relative to `out_dir`) if it has one.
fn copy_labels(m: &Manifest, r: &SampleRecord, out_dir: &Path, dest: PathBuf) -> Result<Option<PathBuf>> {
    match m.labels(r) {
        Some(src) => {
            write_bytes(&out_dir.join(&dest), &read_bytes(&r.id, &src)?)?;
            Ok(Some(dest))
        }
        None => Ok(None),
    }
}

/// Four records per clear image: the original plus fog, rain and snow at
/// intensities drawn from `[0.2, 1.0]`. All four share one label file.
pub fn extend_dataset(clear_manifest: &Path, out_dir: &Path, seed: u64) -> Result<Manifest> {
    let m = read_manifest(clear_manifest)?;
    check_unique(&m.records)?;
    let per_image: Vec<Vec<SampleRecord>> = m
        .records
        .par_iter()
        .map(|r| {
            require_clear(r)?;
            let (bytes, img) = read_image(&r.id, &m.image(r))?;
            let clear_path = PathBuf::from(format!("images/{}.ppm", r.id));
            write_bytes(&out_dir.join(&clear_path), &bytes)?;
            let labels = copy_labels(&m, r, out_dir, PathBuf::from(format!("labels/{}.txt", r.id)))?;
            let mut out = vec![SampleRecord::clear(r.id.clone(), clear_path.clone(), labels.clone(), r.split)];
            for c in Condition::ADVERSE {
                let key = format!("{}/{}", r.id, c.name());
                let t = sample_intensity(IntensityRange::Train, derive(seed, &key));
                let spec = WeatherSpec::new(c, t, derive(seed, &format!("{key}/weather")))?;
                let path = PathBuf::from(format!("images/{}_{}.ppm", r.id, c.name()));
                write_ppm(&apply_weather(&img, &spec)?, out_dir.join(&path))?;
                out.push(SampleRecord {
                    id: format!("{}_{}", r.id, c.name()),
                    image_path: path,
                    variant: Variant::from_condition(c),
                    intensity: t,
                    tier: None,
                    clear_ref: clear_path.clone(),
                    labels_path: labels.clone(),
                    split: r.split,
                });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let records: Vec<SampleRecord> = per_image.into_iter().flatten().collect();
    write_manifest(&out_dir.join(MANIFEST_NAME), &records)?;
    Ok(Manifest {
        base: out_dir.to_path_buf(),
        records,
    })
}

/// The ten validation sets under `out_dir/<set>/`. Adverse sets point at
/// the `normal` set's images and labels.
pub fn build_validation_sets(clear_test_manifest: &Path, out_dir: &Path, seed: u64) -> Result<Vec<(String, PathBuf)>> {
    let m = read_manifest(clear_test_manifest)?;
    if m.records.is_empty() {
        return Err(Error::Data(format!("{} has no records", clear_test_manifest.display())));
    }
    check_unique(&m.records)?;
    let normal_dir = out_dir.join("normal");
    let normal: Vec<(SampleRecord, Image)> = m
        .records
        .par_iter()
        .map(|r| {
            require_clear(r)?;
            let (bytes, img) = read_image(&r.id, &m.image(r))?;
            let path = PathBuf::from(format!("images/{}.ppm", r.id));
            write_bytes(&normal_dir.join(&path), &bytes)?;
            let labels = copy_labels(&m, r, &normal_dir, PathBuf::from(format!("labels/{}.txt", r.id)))?;
            Ok((SampleRecord::clear(format!("{}_normal", r.id), path, labels, Split::Val), img))
        })
        .collect::<Result<_>>()?;
    let normal_manifest = normal_dir.join(MANIFEST_NAME);
    write_manifest(&normal_manifest, &normal.iter().map(|(r, _)| r.clone()).collect::<Vec<_>>())?;
    let mut sets = vec![("normal".to_string(), normal_manifest)];
    for c in Condition::ADVERSE {
        for tier in AdversityTier::ALL {
            let set = format!("{}_{}", c.name(), tier.name());
            let dir = out_dir.join(&set);
            let records: Vec<SampleRecord> = m
                .records
                .par_iter()
                .zip(&normal)
                .map(|(src, (clear, img))| {
                    let key = format!("{}/{set}", src.id);
                    let t = sample_intensity(tier, derive(seed, &key));
                    let spec = WeatherSpec::new(c, t, derive(seed, &format!("{key}/weather")))?;
                    let path = PathBuf::from(format!("images/{}.ppm", src.id));
                    write_ppm(&apply_weather(img, &spec)?, dir.join(&path))?;
                    let up = |p: &Path| Path::new("../normal").join(p);
                    Ok(SampleRecord {
                        id: format!("{}_{set}", src.id),
                        image_path: path,
                        variant: Variant::from_condition(c),
                        intensity: t,
                        tier: Some(tier),
                        clear_ref: up(&clear.image_path),
                        labels_path: clear.labels_path.as_deref().map(up),
                        split: Split::Val,
                    })
                })
                .collect::<Result<_>>()?;
            let path = dir.join(MANIFEST_NAME);
            write_manifest(&path, &records)?;
            sets.push((set, path));
        }
    }
    Ok(sets)
}

fn canonical(path: &Path, id: &str) -> Result<PathBuf> {
    std::fs::canonicalize(path).map_err(|e| Error::Data(format!("record {id}: cannot resolve {}: {e}", path.display())))
}

fn crop_and_write(id: &str, src: &Path, grid: &CropGrid, out_dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let (_, img) = read_image(id, src)?;
    grid.check_image(img.width(), img.height())
        .map_err(|e| Error::Dimension(format!("record {id}: {e}")))?;
    split_crops(&img, grid)?
        .iter()
        .enumerate()
        .map(|(k, crop)| {
            let rel = PathBuf::from(format!("{stem}_c{k}.ppm"));
            write_ppm(crop, out_dir.join(&rel))?;
            Ok(rel)
        })
        .collect()
}

/// Every record becomes `grid.count()` crop records. Crop `k` pairs with
/// crop `k` of its clear reference; references that are not themselves
/// records of the manifest are cropped into `refs/`. Crop records carry
/// no labels.
pub fn cropify_dataset(manifest: &Path, grid: &CropGrid, out_dir: &Path) -> Result<Manifest> {
    let m = read_manifest(manifest)?;
    check_unique(&m.records)?;
    let mut own: HashMap<PathBuf, &str> = HashMap::new();
    for r in m.records.iter().filter(|r| r.variant == Variant::Clear) {
        own.insert(canonical(&m.image(r), &r.id)?, r.id.as_str());
    }
    // Clear references that live outside the manifest, with unique stems.
    let mut refs: BTreeMap<PathBuf, String> = BTreeMap::new();
    let mut ref_order: Vec<(PathBuf, String, String)> = Vec::new();
    let mut stems: HashSet<String> = HashSet::new();
    let mut ref_of: Vec<Option<PathBuf>> = Vec::with_capacity(m.records.len());
    for r in &m.records {
        let key = canonical(&m.clear_ref(r), &r.id)?;
        if own.contains_key(&key) {
            ref_of.push(None);
            continue;
        }
        if !refs.contains_key(&key) {
            let base = r.clear_ref.file_stem().and_then(|s| s.to_str()).unwrap_or("ref").to_string();
            let mut stem = base.clone();
            let mut n = 1;
            while !stems.insert(stem.clone()) {
                stem = format!("{base}_{n}");
                n += 1;
            }
            refs.insert(key.clone(), stem.clone());
            ref_order.push((key.clone(), stem, r.id.clone()));
        }
        ref_of.push(Some(key));
    }
    ref_order
        .par_iter()
        .map(|(path, stem, id)| crop_and_write(id, path, grid, out_dir, &format!("refs/{stem}")).map(|_| ()))
        .collect::<Result<Vec<()>>>()?;
    let per_record: Vec<Vec<SampleRecord>> = m
        .records
        .par_iter()
        .zip(&ref_of)
        .map(|(r, ext)| {
            let crops = crop_and_write(&r.id, &m.image(r), grid, out_dir, &format!("images/{}", r.id))?;
            let ref_stem = match ext {
                Some(key) => format!("refs/{}", refs[key]),
                None => {
                    let key = canonical(&m.clear_ref(r), &r.id)?;
                    format!("images/{}", own[&key])
                }
            };
            Ok(crops
                .into_iter()
                .enumerate()
                .map(|(k, image_path)| {
                    let clear_ref = if r.variant == Variant::Clear {
                        image_path.clone()
                    } else {
                        PathBuf::from(format!("{ref_stem}_c{k}.ppm"))
                    };
                    SampleRecord {
                        id: format!("{}_c{k}", r.id),
                        image_path,
                        variant: r.variant,
                        intensity: r.intensity,
                        tier: r.tier,
                        clear_ref,
                        labels_path: None,
                        split: r.split,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let records: Vec<SampleRecord> = per_record.into_iter().flatten().collect();
    write_manifest(&out_dir.join(MANIFEST_NAME), &records)?;
    Ok(Manifest {
        base: out_dir.to_path_buf(),
        records,
    })
}

/// Settings for a synthetic scene corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    /// Each scene holds between 1 and `max_objects` objects.
    pub max_objects: usize,
    pub seed: u64,
    pub id_prefix: String,
    pub split: Split,
}

/// Writes `count` scenes with KITTI labels and a clear manifest under `out_dir`.
pub fn generate_corpus(spec: &CorpusSpec, out_dir: &Path) -> Result<Manifest> {
    if spec.max_objects == 0 {
        return Err(Error::Config("max_objects must be at least 1".into()));
    }
    let table = ClassTable::default();
    let records: Vec<SampleRecord> = (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let id = format!("{}{i:04}", spec.id_prefix);
            let seed = derive(spec.seed, &id);
            let n = 1 + CounterRng::at(seed, 0) as usize % spec.max_objects;
            let (img, boxes) = generate_scene(&SceneSpec::random(seed, spec.width, spec.height, n))?;
            let image_path = PathBuf::from(format!("images/{id}.ppm"));
            let labels_path = PathBuf::from(format!("labels/{id}.txt"));
            write_ppm(&img, out_dir.join(&image_path))?;
            write_bytes(&out_dir.join(&labels_path), format_kitti_labels(&boxes, &table)?.as_bytes())?;
            Ok(SampleRecord::clear(id, image_path, Some(labels_path), spec.split))
        })
        .collect::<Result<_>>()?;
    write_manifest(&out_dir.join(MANIFEST_NAME), &records)?;
    Ok(Manifest {
        base: out_dir.to_path_buf(),
        records,
    })
}
