use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detect::{BBox, GtBox, CLASS_CAR, CLASS_PEDESTRIAN};
use crate::{Error, Result};

/// Maps KITTI class strings to class ids. Unlisted classes are dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTable {
    pub classes: BTreeMap<String, u32>,
}

impl Default for ClassTable {
    fn default() -> Self {
        Self {
            classes: [("Car".to_string(), CLASS_CAR), ("Pedestrian".to_string(), CLASS_PEDESTRIAN)]
                .into_iter()
                .collect(),
        }
    }
}

impl ClassTable {
    pub fn id(&self, name: &str) -> Option<u32> {
        self.classes.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.classes.iter().find(|(_, &v)| v == id).map(|(k, _)| k.as_str())
    }
}

pub fn parse_kitti_str(text: &str, path: &Path, table: &ClassTable) -> Result<Vec<GtBox>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        if fields.len() < 8 {
            return Err(err(format!("expected at least 8 fields, found {}", fields.len())));
        }
        let mut c = [0.0f64; 4];
        for (slot, f) in c.iter_mut().zip(&fields[4..8]) {
            *slot = f.parse().map_err(|_| err(format!("bad coordinate {f:?}")))?;
        }
        let bbox = BBox::new(c[0], c[1], c[2], c[3]);
        if !bbox.is_valid() {
            return Err(err(format!("degenerate box {c:?}")));
        }
        if fields[0] == "DontCare" {
            out.push(GtBox::ignore_region(bbox));
        } else if let Some(id) = table.id(fields[0]) {
            out.push(GtBox::new(id, bbox));
        }
    }
    Ok(out)
}

pub fn parse_kitti_labels(path: &Path, table: &ClassTable) -> Result<Vec<GtBox>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kitti_str(&text, path, table)
}

/// KITTI label text for `boxes`; 3-D fields are written as zeros.
pub fn format_kitti_labels(boxes: &[GtBox], table: &ClassTable) -> Result<String> {
    let mut out = String::new();
    for b in boxes {
        let name = if b.ignore {
            "DontCare"
        } else {
            table
                .name(b.class_id)
                .ok_or_else(|| Error::Config(format!("class id {} has no name", b.class_id)))?
        };
        let r = &b.bbox;
        writeln!(
            out,
            "{name} 0.00 0 0.00 {:.2} {:.2} {:.2} {:.2} 0.00 0.00 0.00 0.00 0.00 0.00 0.00",
            r.left, r.top, r.right, r.bottom
        )
        .expect("write to String");
    }
    Ok(out)
}
