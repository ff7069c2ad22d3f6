use serde::{Deserialize, Serialize};

use crate::detect::{BBox, GtBox, CLASS_CAR, CLASS_PEDESTRIAN};
use crate::rng::{derive, CounterRng};
use crate::weathergen::noise::ValueNoise;
use crate::{ColorSpace, Error, Image, Result};

/// Free pixels required between any two objects.
pub const OBJECT_GAP: f64 = 6.0;
/// Whole-layout attempts before giving up.
pub const PLACEMENT_TRIES: usize = 100;
const MARGIN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Car,
    Pedestrian,
}

impl ObjectClass {
    pub fn class_id(self) -> u32 {
        match self {
            ObjectClass::Car => CLASS_CAR,
            ObjectClass::Pedestrian => CLASS_PEDESTRIAN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class: ObjectClass,
    /// Integer pixel box; `right`/`bottom` exclusive.
    pub bbox: BBox,
    /// Gray level of the filled rectangle.
    pub fill: f32,
}

/// A synthetic road scene. With an empty `objects` list, `n_objects`
/// objects are placed at random from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub n_objects: usize,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
}

impl SceneSpec {
    pub fn random(seed: u64, width: usize, height: usize, n_objects: usize) -> Self {
        Self {
            seed,
            width,
            height,
            n_objects,
            objects: Vec::new(),
        }
    }
}

fn separated(a: &BBox, b: &BBox) -> bool {
    let grown = BBox::new(a.left - OBJECT_GAP, a.top - OBJECT_GAP, a.right + OBJECT_GAP, a.bottom + OBJECT_GAP);
    grown.intersection(b) == 0.0
}

fn place(spec: &SceneSpec) -> Result<Vec<SceneObject>> {
    let mut rng = CounterRng::new(derive(spec.seed, "objects"));
    for _ in 0..PLACEMENT_TRIES {
        if let Some(layout) = try_layout(spec, &mut rng) {
            return Ok(layout);
        }
    }
    Err(Error::Config(format!(
        "could not place {} objects in a {}x{} scene after {PLACEMENT_TRIES} tries",
        spec.n_objects, spec.width, spec.height
    )))
}

fn try_layout(spec: &SceneSpec, rng: &mut CounterRng) -> Option<Vec<SceneObject>> {
    let mut placed: Vec<SceneObject> = Vec::with_capacity(spec.n_objects);
    for _ in 0..spec.n_objects {
        let class = if rng.next_f64() < 0.6 { ObjectClass::Car } else { ObjectClass::Pedestrian };
        let (w, h) = match class {
            ObjectClass::Car => (rng.range_inclusive(10, 18), rng.range_inclusive(6, 10)),
            ObjectClass::Pedestrian => (rng.range_inclusive(3, 5), rng.range_inclusive(10, 16)),
        };
        let dark = rng.next_f64() < 0.5;
        let fill = if dark { rng.uniform(0.0, 0.05) } else { rng.uniform(0.9, 1.0) } as f32;
        if w + 2 * MARGIN > spec.width || h + 2 * MARGIN > spec.height {
            return None;
        }
        let x = rng.range_inclusive(MARGIN, spec.width - MARGIN - w);
        let y = rng.range_inclusive(MARGIN, spec.height - MARGIN - h);
        let bbox = BBox::new(x as f64, y as f64, (x + w) as f64, (y + h) as f64);
        if !placed.iter().all(|o| separated(&o.bbox, &bbox)) {
            return None;
        }
        placed.push(SceneObject { class, bbox, fill });
    }
    Some(placed)
}

fn check_object(o: &SceneObject, width: usize, height: usize) -> Result<()> {
    let b = &o.bbox;
    let integral = [b.left, b.top, b.right, b.bottom].iter().all(|v| v.fract() == 0.0);
    if !b.is_valid() || !integral || b.left < 0.0 || b.top < 0.0 || b.right > width as f64 || b.bottom > height as f64 {
        return Err(Error::Config(format!("object box {b:?} is not an integer box inside {width}x{height}")));
    }
    if !(0.0..=1.0).contains(&o.fill) {
        return Err(Error::Config(format!("object fill {} outside [0, 1]", o.fill)));
    }
    Ok(())
}

/// Renders the scene and returns it with its exact ground-truth boxes.
///
/// The background is low-amplitude value noise around 0.45 with a faint
/// per-channel tint; objects are flat gray rectangles.
pub fn generate_scene(spec: &SceneSpec) -> Result<(Image, Vec<GtBox>)> {
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 {
        return Err(Error::Config("scene needs a positive size".into()));
    }
    let objects = if spec.objects.is_empty() { place(spec)? } else { spec.objects.clone() };
    for o in &objects {
        check_object(o, w, h)?;
    }
    let noise = ValueNoise::new(derive(spec.seed, "background"), 16.0, 2);
    let tint = {
        let mut rng = CounterRng::new(derive(spec.seed, "tint"));
        [0; 3].map(|_| rng.uniform(-0.02, 0.02))
    };
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let base = 0.45 + 0.1 * (noise.at(x, y) - 0.5);
            data.extend(tint.iter().map(|t| (base + t) as f32));
        }
    }
    for o in &objects {
        let b = o.bbox;
        for y in b.top as usize..b.bottom as usize {
            for x in b.left as usize..b.right as usize {
                data[(y * w + x) * 3..(y * w + x) * 3 + 3].fill(o.fill);
            }
        }
    }
    let img = Image::new(w, h, data, ColorSpace::Rgb)?;
    let boxes = objects.iter().map(|o| GtBox::new(o.class.class_id(), o.bbox)).collect();
    Ok((img, boxes))
}
