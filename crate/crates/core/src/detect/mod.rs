//! Detection scoring: boxes, IoU, AP/mAP, the contrast-blob detector and
//! per-set evaluation reports.

mod ap;
mod blob;
mod boxes;
mod eval;

pub use ap::{
    average_precision, confidence_order, match_detections, mean, mean_average_precision, MapResult, MatchOutcome,
    IGNORE_OVERLAP,
};
pub use blob::{box_mean, BlobDetector, Detector, DetectorRegistry, CLASS_CAR, CLASS_PEDESTRIAN};
pub use boxes::{iou, BBox, Detection, GtBox};
pub use eval::{
    emit_report, evaluate_set, format_report, read_detections, write_detections, DetectionSource, SetReport,
    IOU_THRESHOLD, REPORT_HEADER,
};
