use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean_average_precision, Detection, Detector, GtBox, CLASS_CAR, CLASS_PEDESTRIAN};
use crate::datasets::{parse_kitti_labels, read_manifest, ClassTable};
use crate::imaging::{mse, read_ppm};
use crate::wunet::WUNet;
use crate::{Error, Result};

pub const IOU_THRESHOLD: f64 = 0.5;

/// Metrics of one validation set under one pipeline variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetReport {
    pub set: String,
    /// Pipeline label, e.g. `raw` or `wunet`.
    pub variant: String,
    pub images: usize,
    /// Mean per-image RGB MSE against the clear reference.
    pub mse: f64,
    pub per_class_ap: BTreeMap<u32, f64>,
    pub map: f64,
}

/// Where detections come from.
pub enum DetectionSource<'a> {
    Detector(&'a dyn Detector),
    /// Precomputed detections keyed by record id.
    Precomputed(&'a [Detection]),
}

fn set_name(manifest: &Path) -> String {
    manifest
        .parent()
        .and_then(|p| p.file_name())
        .and_then(|s| s.to_str())
        .unwrap_or("set")
        .to_string()
}

/// Runs the optional denoiser and the detector over every record of a
/// validation-set manifest.
pub fn evaluate_set(
    manifest: &Path,
    model: Option<&WUNet>,
    source: DetectionSource<'_>,
    table: &ClassTable,
    variant: &str,
) -> Result<SetReport> {
    let m = read_manifest(manifest)?;
    struct PerImage {
        mse: f64,
        gts: Vec<GtBox>,
        dets: Vec<Detection>,
    }
    let rows: Vec<PerImage> = m
        .records
        .par_iter()
        .map(|r| {
            let labels = m
                .labels(r)
                .ok_or_else(|| Error::Data(format!("record {} has no labels to evaluate against", r.id)))?;
            let input = read_ppm(m.image(r)).map_err(|e| Error::Data(format!("record {}: {e}", r.id)))?;
            let clear = read_ppm(m.clear_ref(r))
                .map_err(|e| Error::Data(format!("record {}: clear reference: {e}", r.id)))?;
            let out = match model {
                Some(net) => net.forward_image(&input)?,
                None => input,
            };
            let gts = parse_kitti_labels(&labels, table)?;
            let dets = match &source {
                DetectionSource::Detector(d) => d.detect(&out, &r.id)?,
                DetectionSource::Precomputed(all) => all.iter().filter(|d| d.image_id == r.id).cloned().collect(),
            };
            Ok(PerImage {
                mse: mse(&out, &clear)?,
                gts,
                dets,
            })
        })
        .collect::<Result<_>>()?;
    let mut gts = Vec::new();
    let mut dets = Vec::new();
    let mut total = 0.0;
    for (r, row) in m.records.iter().zip(rows) {
        total += row.mse;
        gts.extend(row.gts.into_iter().map(|g| (r.id.clone(), g)));
        dets.extend(row.dets);
    }
    let result = mean_average_precision(&dets, &gts, IOU_THRESHOLD)?;
    Ok(SetReport {
        set: set_name(manifest),
        variant: variant.to_string(),
        images: m.records.len(),
        mse: if m.records.is_empty() { 0.0 } else { total / m.records.len() as f64 },
        per_class_ap: result.per_class,
        map: result.map,
    })
}

pub const REPORT_HEADER: &str = "set,images,mse,map,ap_car,ap_pedestrian";

/// CSV text for `reports`; a class without ground truth leaves its cell empty.
pub fn format_report(reports: &[SetReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    let cell = |r: &SetReport, c: u32| r.per_class_ap.get(&c).map(|v| format!("{v:.6}")).unwrap_or_default();
    for r in reports {
        writeln!(
            out,
            "{}/{},{},{:.6},{:.6},{},{}",
            r.set,
            r.variant,
            r.images,
            r.mse,
            r.map,
            cell(r, CLASS_CAR),
            cell(r, CLASS_PEDESTRIAN)
        )
        .expect("write to String");
    }
    out
}

#[derive(Serialize)]
struct ReportMeta {
    ap_interpolation: &'static str,
    iou_threshold: f64,
    mse_space: &'static str,
    rows: usize,
}

/// Writes the CSV report and a `<name>.meta.json` sidecar describing how
/// its numbers were computed.
pub fn emit_report(reports: &[SetReport], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, format_report(reports)).map_err(|e| Error::io(path, e))?;
    let meta = ReportMeta {
        ap_interpolation: "all-points",
        iou_threshold: IOU_THRESHOLD,
        mse_space: "rgb",
        rows: reports.len(),
    };
    let meta_path = path.with_extension("meta.json");
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(&meta_path, text + "\n").map_err(|e| Error::io(&meta_path, e))
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let d: Detection = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        d.validate().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(d);
    }
    Ok(out)
}

pub fn write_detections(path: &Path, dets: &[Detection]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for d in dets {
        let line = serde_json::to_string(d).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(set: &str, variant: &str) -> SetReport {
        SetReport {
            set: set.into(),
            variant: variant.into(),
            images: 4,
            mse: 0.0125,
            per_class_ap: [(CLASS_CAR, 0.75)].into_iter().collect(),
            map: 0.75,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        assert_eq!(format_report(&[]), format!("{REPORT_HEADER}\n"));
    }

    #[test]
    fn rows_are_fixed_precision() {
        let text = format_report(&[report("fog_high", "wunet")]);
        assert_eq!(text.lines().nth(1).unwrap(), "fog_high/wunet,4,0.012500,0.750000,0.750000,");
    }

    #[test]
    fn emission_is_repeatable() {
        let dir = tempfile::tempdir().unwrap();
        let reports = vec![report("normal", "raw"), report("normal", "wunet")];
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        emit_report(&reports, &a).unwrap();
        emit_report(&reports, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert!(dir.path().join("a.meta.json").exists());
    }

    #[test]
    fn detections_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let dets = vec![Detection {
            image_id: "x".into(),
            class_id: 1,
            bbox: super::super::BBox::new(1.0, 2.0, 4.0, 12.0),
            confidence: 0.3,
        }];
        write_detections(&p, &dets).unwrap();
        assert_eq!(read_detections(&p).unwrap(), dets);
    }
}
