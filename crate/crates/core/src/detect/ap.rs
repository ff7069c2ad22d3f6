use std::collections::{BTreeMap, HashMap};

use super::{iou, Detection, GtBox};
use crate::{Error, Result};

/// Fraction of a detection's area that must fall inside an ignore region
/// for an unmatched detection to be discarded instead of counted as FP.
pub const IGNORE_OVERLAP: f64 = 0.5;

/// Outcome of matching one detection, in confidence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOutcome {
    TruePositive,
    FalsePositive,
    Ignored,
}

/// Detection indices sorted by descending confidence; ties keep input order.
pub fn confidence_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence));
    order
}

/// Greedy VOC matching. Returns outcomes aligned with [`confidence_order`].
pub fn match_detections(dets: &[Detection], gts: &[(String, GtBox)], iou_thresh: f64) -> Result<Vec<MatchOutcome>> {
    let mut by_image: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, (image, gt)) in gts.iter().enumerate() {
        gt.bbox.validate()?;
        by_image.entry(image.as_str()).or_default().push(i);
    }
    let mut matched = vec![false; gts.len()];
    let mut out = Vec::with_capacity(dets.len());
    for i in confidence_order(dets) {
        let d = &dets[i];
        d.validate()?;
        let candidates = by_image.get(d.image_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let mut best: Option<(usize, f64)> = None;
        for &g in candidates {
            let gt = &gts[g].1;
            if gt.ignore || matched[g] {
                continue;
            }
            let o = iou(&d.bbox, &gt.bbox)?;
            if best.map_or(true, |(_, b)| o > b) {
                best = Some((g, o));
            }
        }
        let outcome = match best {
            Some((g, o)) if o >= iou_thresh => {
                matched[g] = true;
                MatchOutcome::TruePositive
            }
            _ => {
                let area = d.bbox.area();
                let inside = candidates
                    .iter()
                    .map(|&g| &gts[g].1)
                    .filter(|gt| gt.ignore)
                    .any(|gt| gt.bbox.intersection(&d.bbox) >= IGNORE_OVERLAP * area);
                if inside {
                    MatchOutcome::Ignored
                } else {
                    MatchOutcome::FalsePositive
                }
            }
        };
        out.push(outcome);
    }
    Ok(out)
}

/// All-points interpolated average precision for a single class.
///
/// `gts` pairs every box with its image id; ignore regions may be mixed in.
/// With no positive ground truth the result is 0 if there are detections
/// and 1 otherwise.
pub fn average_precision(dets: &[Detection], gts: &[(String, GtBox)], iou_thresh: f64) -> Result<f64> {
    let npos = gts.iter().filter(|(_, g)| !g.ignore).count();
    let outcomes = match_detections(dets, gts, iou_thresh)?;
    if npos == 0 {
        if dets.is_empty() {
            log::debug!("average precision of an empty class taken as 1");
            return Ok(1.0);
        }
        return Ok(0.0);
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut recall = vec![0.0];
    let mut precision = vec![0.0];
    for o in outcomes {
        match o {
            MatchOutcome::TruePositive => tp += 1,
            MatchOutcome::FalsePositive => fp += 1,
            MatchOutcome::Ignored => continue,
        }
        recall.push(tp as f64 / npos as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    recall.push(1.0);
    precision.push(0.0);
    for i in (0..precision.len() - 1).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    for i in 1..recall.len() {
        if recall[i] != recall[i - 1] {
            ap += (recall[i] - recall[i - 1]) * precision[i];
        }
    }
    Ok(ap)
}

/// Per-class AP and their unweighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MapResult {
    pub per_class: BTreeMap<u32, f64>,
    pub map: f64,
}

/// Mean of per-class AP over every class with at least one positive box.
///
/// Ignore regions apply to all classes. Detections of classes without
/// ground truth are not scored.
pub fn mean_average_precision(dets: &[Detection], gts: &[(String, GtBox)], iou_thresh: f64) -> Result<MapResult> {
    let mut classes: Vec<u32> = gts.iter().filter(|(_, g)| !g.ignore).map(|(_, g)| g.class_id).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.is_empty() {
        return Err(Error::Contract("mAP needs at least one ground-truth box".into()));
    }
    let mut per_class = BTreeMap::new();
    for &c in &classes {
        let d: Vec<Detection> = dets.iter().filter(|d| d.class_id == c).cloned().collect();
        let g: Vec<(String, GtBox)> = gts
            .iter()
            .filter(|(_, g)| g.ignore || g.class_id == c)
            .cloned()
            .collect();
        per_class.insert(c, average_precision(&d, &g, iou_thresh)?);
    }
    let map = mean(per_class.values().copied())?;
    Ok(MapResult { per_class, map })
}

/// Unweighted mean of per-class AP values.
pub fn mean(aps: impl IntoIterator<Item = f64>) -> Result<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for a in aps {
        sum += a;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Contract("mAP over zero classes".into()));
    }
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::BBox;

    fn det(image: &str, class_id: u32, b: [f64; 4], confidence: f64) -> Detection {
        Detection {
            image_id: image.into(),
            class_id,
            bbox: BBox::new(b[0], b[1], b[2], b[3]),
            confidence,
        }
    }

    fn gt(image: &str, class_id: u32, b: [f64; 4]) -> (String, GtBox) {
        (image.into(), GtBox::new(class_id, BBox::new(b[0], b[1], b[2], b[3])))
    }

    #[test]
    fn perfect_detections_give_one() {
        let gts = vec![gt("a", 0, [0.0, 0.0, 10.0, 10.0]), gt("b", 0, [5.0, 5.0, 9.0, 9.0])];
        let dets = vec![det("a", 0, [0.0, 0.0, 10.0, 10.0], 0.9), det("b", 0, [5.0, 5.0, 9.0, 9.0], 0.4)];
        assert_eq!(average_precision(&dets, &gts, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn tp_fp_tp_is_five_sixths() {
        let gts = vec![gt("a", 0, [0.0, 0.0, 10.0, 10.0]), gt("a", 0, [20.0, 0.0, 30.0, 10.0])];
        let dets = vec![
            det("a", 0, [0.0, 0.0, 10.0, 10.0], 0.9),
            det("a", 0, [40.0, 40.0, 50.0, 50.0], 0.8),
            det("a", 0, [20.0, 0.0, 30.0, 10.0], 0.7),
        ];
        let ap = average_precision(&dets, &gts, 0.5).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12, "{ap}");
    }

    #[test]
    fn duplicate_detection_is_false_positive() {
        let gts = vec![gt("a", 0, [0.0, 0.0, 10.0, 10.0])];
        let dets = vec![det("a", 0, [0.0, 0.0, 10.0, 10.0], 0.9), det("a", 0, [0.0, 0.0, 10.0, 10.0], 0.8)];
        let outcomes = match_detections(&dets, &gts, 0.5).unwrap();
        assert_eq!(outcomes, vec![MatchOutcome::TruePositive, MatchOutcome::FalsePositive]);
    }

    #[test]
    fn other_image_never_matches() {
        let gts = vec![gt("a", 0, [0.0, 0.0, 10.0, 10.0])];
        let dets = vec![det("b", 0, [0.0, 0.0, 10.0, 10.0], 0.9)];
        assert_eq!(average_precision(&dets, &gts, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn empty_cases() {
        assert_eq!(average_precision(&[], &[], 0.5).unwrap(), 1.0);
        let dets = vec![det("a", 0, [0.0, 0.0, 1.0, 1.0], 0.5)];
        assert_eq!(average_precision(&dets, &[], 0.5).unwrap(), 0.0);
    }

    #[test]
    fn ignore_region_discards_unmatched_detection() {
        let mut gts = vec![gt("a", 0, [0.0, 0.0, 10.0, 10.0])];
        gts.push(("a".into(), GtBox::ignore_region(BBox::new(50.0, 50.0, 80.0, 80.0))));
        let dets = vec![
            det("a", 0, [55.0, 55.0, 65.0, 65.0], 0.95),
            det("a", 0, [0.0, 0.0, 10.0, 10.0], 0.9),
        ];
        assert_eq!(average_precision(&dets, &gts, 0.5).unwrap(), 1.0);
        // Mostly outside the region: counted.
        let dets = vec![
            det("a", 0, [75.0, 75.0, 95.0, 95.0], 0.95),
            det("a", 0, [0.0, 0.0, 10.0, 10.0], 0.9),
        ];
        assert!(average_precision(&dets, &gts, 0.5).unwrap() < 1.0);
    }

    #[test]
    fn equal_confidence_ties_keep_input_order() {
        let dets = vec![
            det("a", 0, [0.0, 0.0, 1.0, 1.0], 0.5),
            det("a", 0, [0.0, 0.0, 1.0, 1.0], 0.7),
            det("a", 0, [0.0, 0.0, 1.0, 1.0], 0.5),
        ];
        assert_eq!(confidence_order(&dets), vec![1, 0, 2]);
    }

    #[test]
    fn map_examples() {
        let gts = vec![gt("a", 0, [0.0, 0.0, 10.0, 10.0]), gt("a", 1, [20.0, 0.0, 30.0, 10.0])];
        let dets = vec![det("a", 0, [0.0, 0.0, 10.0, 10.0], 0.9)];
        let r = mean_average_precision(&dets, &gts, 0.5).unwrap();
        assert_eq!(r.per_class[&0], 1.0);
        assert_eq!(r.per_class[&1], 0.0);
        assert_eq!(r.map, 0.5);
        let single = mean_average_precision(&dets, &gts[..1], 0.5).unwrap();
        assert_eq!(single.map, single.per_class[&0]);
        assert!((mean([5.0 / 6.0, 1.0, 0.5]).unwrap() - 0.777_777_777_777_8).abs() < 1e-12);
        assert!(matches!(mean_average_precision(&dets, &[], 0.5), Err(Error::Contract(_))));
    }
}
