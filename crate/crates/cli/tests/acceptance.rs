//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the binary exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use wunet_core::autodiff::{Graph, Tensor, Var};
use wunet_core::datasets::{
    build_validation_sets, cropify_dataset, extend_dataset, generate_corpus, generate_scene, write_manifest,
    ClassTable, CorpusSpec, SampleRecord, SceneSpec, Split, MANIFEST_NAME,
};
use wunet_core::detect::{average_precision, evaluate_set, BBox, BlobDetector, Detection, DetectionSource, GtBox};
use wunet_core::imaging::{decode_ppm, encode_ppm, hsv_to_rgb, join_crops, mse, rgb_to_hsv, split_crops, write_ppm};
use wunet_core::rng::{derive, unit_f64, CounterRng};
use wunet_core::weathergen::{apply_fog, apply_weather, Condition, WeatherSpec};
use wunet_core::wunet::{build_model, train, Sample, TrainConfig, WUNet, WUNetConfig};
use wunet_core::{ColorSpace, CropGrid, Image};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    /// A limit stated as a target is reported but not enforced.
    hard_limit: bool,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn minutes(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "dataset arithmetic", limit: minutes(1), hard_limit: true, run: dataset_arithmetic },
        Criterion { id: 2, name: "gradient suite", limit: minutes(1), hard_limit: true, run: gradient_suite },
        Criterion { id: 3, name: "AP oracle equivalence", limit: minutes(1), hard_limit: true, run: ap_oracle },
        Criterion { id: 4, name: "tiling and color invariants", limit: minutes(1), hard_limit: true, run: tiling_color },
        Criterion { id: 5, name: "training sanity", limit: minutes(10), hard_limit: false, run: training_sanity },
        Criterion { id: 6, name: "fog_high detection recovery", limit: minutes(15), hard_limit: true, run: detection_recovery },
        Criterion { id: 7, name: "crop-mode equivalence", limit: minutes(1), hard_limit: true, run: crop_equivalence },
        Criterion { id: 8, name: "adversity monotonicity", limit: minutes(1), hard_limit: true, run: adversity_monotonicity },
        Criterion { id: 9, name: "pipeline determinism", limit: minutes(5), hard_limit: true, run: determinism },
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.map_or(true, |o| o == c.id)) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let took = start.elapsed();
        let over = took > c.limit;
        let (status, detail) = match outcome {
            Ok(d) if over && c.hard_limit => ("FAIL", format!("{d}; exceeded {:?}", c.limit)),
            Ok(d) if over => ("PASS", format!("{d}; over the {:?} target", c.limit)),
            Ok(d) => ("PASS", d),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {} {status} {}: {detail} ({:.1}s)", c.id, c.name, took.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn random_image(rng: &mut CounterRng, w: usize, h: usize) -> Image {
    Image::new(w, h, (0..w * h * 3).map(|_| rng.next_f64() as f32).collect(), ColorSpace::Rgb).unwrap()
}

fn quantized(img: &Image) -> Image {
    decode_ppm(&encode_ppm(img).unwrap()).unwrap()
}

// ---------------------------------------------------------------- 1

fn dataset_arithmetic() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let mut rng = CounterRng::new(1);
    write_ppm(&random_image(&mut rng, 8, 2), root.join("src.ppm")).map_err(|e| e.to_string())?;
    let mut counts = Vec::new();
    for (name, n, split) in [("train", 6699, Split::Train), ("test", 782, Split::Test)] {
        let records: Vec<SampleRecord> =
            (0..n).map(|i| SampleRecord::clear(format!("{name}{i:05}"), "src.ppm", None, split)).collect();
        let clear = root.join(format!("{name}.jsonl"));
        write_manifest(&clear, &records).map_err(|e| e.to_string())?;
        let ext = extend_dataset(&clear, &root.join(format!("{name}_ext")), 3).map_err(|e| e.to_string())?;
        let grid = CropGrid::new(4, 2, 2, 1);
        let crops = cropify_dataset(&root.join(format!("{name}_ext")).join(MANIFEST_NAME), &grid, &root.join(format!("{name}_crops")))
            .map_err(|e| e.to_string())?;
        counts.push((ext.records.len(), crops.records.len()));
    }
    ensure(counts == vec![(26796, 214368), (3128, 25024)], || format!("counts {counts:?}"))?;
    Ok(format!("extended 26796/3128, cropped 214368/25024"))
}

// ---------------------------------------------------------------- 2

const FD_STEP: f64 = 1e-3;

type Build = dyn Fn(&mut Graph<f64>, &[Var]) -> Var;

fn fd_check(inputs: &[Tensor<f64>], build: &Build) -> f64 {
    let eval = |ts: &[Tensor<f64>]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = ts.iter().map(|t| g.leaf(t)).collect();
        let l = build(&mut g, &vars);
        g.value(l)[0]
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t)).collect();
    let loss = build(&mut g, &vars);
    g.backward(loss).unwrap();
    let mut worst = 0.0f64;
    for (k, t) in inputs.iter().enumerate().filter(|(_, t)| t.requires_grad()) {
        let analytic = g.grad(vars[k]).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.numel()]);
        let mut probe = inputs.to_vec();
        let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
        for i in 0..t.numel() {
            let orig = probe[k].data()[i];
            probe[k].data_mut()[i] = orig + FD_STEP;
            let up = eval(&probe);
            probe[k].data_mut()[i] = orig - FD_STEP;
            let down = eval(&probe);
            probe[k].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            diff += (analytic[i] - numeric).powi(2);
            na += analytic[i] * analytic[i];
            nn += numeric * numeric;
        }
        worst = worst.max(diff.sqrt() / na.sqrt().max(nn.sqrt()).max(1e-12));
    }
    worst
}

fn uniform(rng: &mut CounterRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
}

fn p(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
    Tensor::parameter(shape.to_vec(), data).unwrap()
}

fn with_mse(g: &mut Graph<f64>, out: Var, seed: u64) -> Var {
    let shape = g.shape(out).to_vec();
    let mut rng = CounterRng::new(seed);
    let n = shape.iter().product();
    let t = g.input(shape, uniform(&mut rng, n), false).unwrap();
    g.mse_loss(out, t).unwrap()
}

fn gradient_suite() -> Outcome {
    let mut report = Vec::new();
    let mut failures = Vec::new();
    type Case = fn(&mut CounterRng) -> (Vec<Tensor<f64>>, Box<Build>);
    let cases: Vec<(&str, Case)> = vec![
        ("conv2d", |r| {
            let ins = vec![p(&[2, 2, 4, 4], uniform(r, 64)), p(&[3, 2, 3, 3], uniform(r, 54)), p(&[3], uniform(r, 3))];
            (ins, Box::new(|g: &mut Graph<f64>, v: &[Var]| {
                let y = g.conv2d(v[0], v[1], v[2]).unwrap();
                with_mse(g, y, 1)
            }))
        }),
        ("maxpool2", |r| {
            // Distinct values 0.05 apart keep the argmax stable under the probe.
            let vals: Vec<f64> = r.permutation(32).into_iter().map(|k| k as f64 * 0.05 - 0.8).collect();
            (vec![p(&[1, 2, 4, 4], vals)], Box::new(|g: &mut Graph<f64>, v: &[Var]| {
                let y = g.maxpool2(v[0]).unwrap();
                with_mse(g, y, 2)
            }))
        }),
        ("upsample_nn2", |r| {
            (vec![p(&[1, 2, 2, 3], uniform(r, 12))], Box::new(|g: &mut Graph<f64>, v: &[Var]| {
                let y = g.upsample_nn2(v[0]).unwrap();
                with_mse(g, y, 3)
            }))
        }),
        ("concat_channels", |r| {
            (vec![p(&[2, 1, 2, 2], uniform(r, 8)), p(&[2, 2, 2, 2], uniform(r, 16))], Box::new(|g: &mut Graph<f64>, v: &[Var]| {
                let y = g.concat_channels(v[0], v[1]).unwrap();
                with_mse(g, y, 4)
            }))
        }),
        ("relu", |r| {
            let vals = (0..12).map(|_| {
                let m = r.uniform(0.05, 1.0);
                if r.next_f64() < 0.5 { -m } else { m }
            }).collect();
            (vec![p(&[1, 3, 2, 2], vals)], Box::new(|g: &mut Graph<f64>, v: &[Var]| {
                let y = g.relu(v[0]);
                with_mse(g, y, 5)
            }))
        }),
        ("sigmoid", |r| {
            (vec![p(&[1, 3, 2, 2], uniform(r, 12).into_iter().map(|x| 3.0 * x).collect())], Box::new(|g: &mut Graph<f64>, v: &[Var]| {
                let y = g.sigmoid(v[0]);
                with_mse(g, y, 6)
            }))
        }),
        ("add+sum", |r| {
            (vec![p(&[2, 3], uniform(r, 6)), p(&[2, 3], uniform(r, 6))], Box::new(|g: &mut Graph<f64>, v: &[Var]| {
                let a = g.add(v[0], v[1]).unwrap();
                let s = g.sigmoid(a);
                g.sum(s)
            }))
        }),
        ("mse", |r| {
            (vec![p(&[1, 2, 3, 3], uniform(r, 18)), p(&[1, 2, 3, 3], uniform(r, 18))], Box::new(|g: &mut Graph<f64>, v: &[Var]| {
                g.mse_loss(v[0], v[1]).unwrap()
            }))
        }),
    ];
    for (name, case) in cases {
        let mut worst = 0.0f64;
        for seed in 0..5u64 {
            let mut rng = CounterRng::new(derive(seed, name));
            let (inputs, build) = case(&mut rng);
            worst = worst.max(fd_check(&inputs, build.as_ref()));
        }
        if !(worst < 1e-4) {
            failures.push(format!("{name} {worst:.2e}"));
        }
        report.push(format!("{name} {worst:.1e}"));
    }
    ensure(failures.is_empty(), || format!("relative error over 1e-4: {}", failures.join(", ")))?;
    Ok(format!("worst relative error per op over 5 seeds: {}", report.join(", ")))
}

// ---------------------------------------------------------------- 3

fn ap_instance(seed: u64) -> (Vec<Detection>, Vec<(String, GtBox)>) {
    let mut r = CounterRng::new(derive(seed, "ap"));
    let rbox = |r: &mut CounterRng| {
        let (l, t) = (r.range_inclusive(0, 8) as f64, r.range_inclusive(0, 8) as f64);
        BBox::new(l, t, l + r.range_inclusive(1, 5) as f64, t + r.range_inclusive(1, 5) as f64)
    };
    let img = |r: &mut CounterRng| ["a", "b"][r.range_inclusive(0, 1)].to_string();
    let gts: Vec<(String, GtBox)> = (0..r.range_inclusive(0, 4))
        .map(|_| {
            let i = img(&mut r);
            let b = rbox(&mut r);
            (i, if r.next_f64() < 0.15 { GtBox::ignore_region(b) } else { GtBox::new(0, b) })
        })
        .collect();
    let dets = (0..r.range_inclusive(0, 6))
        .map(|_| {
            let i = img(&mut r);
            let bbox = if !gts.is_empty() && r.next_f64() < 0.5 {
                let g = gts[r.range_inclusive(0, gts.len() - 1)].1.bbox;
                let dx = r.range_inclusive(0, 2) as f64 - 1.0;
                BBox::new(g.left + dx, g.top, g.right + dx, g.bottom)
            } else {
                rbox(&mut r)
            };
            Detection { image_id: i, class_id: 0, bbox, confidence: r.range_inclusive(1, 5) as f64 / 5.0 }
        })
        .collect();
    (dets, gts)
}

/// Every cutoff of the confidence ranking scored from scratch; AP is the
/// area under the best precision available at or beyond each recall.
fn ap_brute_force(dets: &[Detection], gts: &[(String, GtBox)]) -> f64 {
    let inter = |a: &BBox, b: &BBox| {
        (a.right.min(b.right) - a.left.max(b.left)).max(0.0) * (a.bottom.min(b.bottom) - a.top.max(b.top)).max(0.0)
    };
    let area = |b: &BBox| (b.right - b.left) * (b.bottom - b.top);
    let npos = gts.iter().filter(|g| !g.1.ignore).count();
    if npos == 0 {
        return if dets.is_empty() { 1.0 } else { 0.0 };
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 && dets[order[j - 1]].confidence < dets[order[j]].confidence {
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    let mut points = Vec::new();
    for k in 1..=order.len() {
        let mut used = vec![false; gts.len()];
        let (mut tp, mut fp) = (0usize, 0usize);
        for &i in &order[..k] {
            let d = &dets[i];
            let (mut best, mut best_iou) = (None, -1.0);
            for (gi, (im, g)) in gts.iter().enumerate() {
                if *im == d.image_id && !g.ignore && !used[gi] {
                    let o = inter(&d.bbox, &g.bbox);
                    let iou = o / (area(&d.bbox) + area(&g.bbox) - o);
                    if iou > best_iou {
                        best_iou = iou;
                        best = Some(gi);
                    }
                }
            }
            if best_iou >= 0.5 {
                used[best.unwrap()] = true;
                tp += 1;
            } else if !gts.iter().any(|(im, g)| *im == d.image_id && g.ignore && inter(&d.bbox, &g.bbox) >= 0.5 * area(&d.bbox)) {
                fp += 1;
            }
        }
        if tp + fp > 0 {
            points.push((tp as f64 / npos as f64, tp as f64 / (tp + fp) as f64));
        }
    }
    let mut levels: Vec<f64> = points.iter().map(|p| p.0).filter(|&r| r > 0.0).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let (mut ap, mut prev) = (0.0, 0.0);
    for r in levels {
        ap += (r - prev) * points.iter().filter(|p| p.0 >= r).map(|p| p.1).fold(0.0, f64::max);
        prev = r;
    }
    ap
}

fn ap_oracle() -> Outcome {
    let n = 2000;
    let mut worst = 0.0f64;
    for seed in 0..n {
        let (dets, gts) = ap_instance(seed);
        let got = average_precision(&dets, &gts, 0.5).map_err(|e| e.to_string())?;
        let want = ap_brute_force(&dets, &gts);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() < 1e-9, || format!("instance {seed}: {got} vs oracle {want}"))?;
    }
    Ok(format!("{n} instances, max |diff| {worst:.1e}"))
}

// ---------------------------------------------------------------- 4

fn tiling_color() -> Outcome {
    let mut rng = CounterRng::new(4);
    let mut hsv_err = 0.0f32;
    for i in 0..100 {
        let (cols, rows) = (rng.range_inclusive(1, 5), rng.range_inclusive(1, 4));
        let (cw, ch) = (rng.range_inclusive(1, 12), rng.range_inclusive(1, 9));
        let img = random_image(&mut rng, cols * cw, rows * ch);
        let grid = CropGrid::new(cols, rows, cw, ch);
        let back = join_crops(&split_crops(&img, &grid).unwrap(), &grid).unwrap();
        ensure(back == img, || format!("image {i}: join(split) differs"))?;
        let rt = hsv_to_rgb(&rgb_to_hsv(&img).unwrap()).unwrap();
        for (a, b) in rt.data().iter().zip(img.data()) {
            hsv_err = hsv_err.max((a - b).abs());
        }
        let q = quantized(&img);
        ensure(quantized(&q) == q, || format!("image {i}: PPM round trip not exact"))?;
        ensure(encode_ppm(&q).unwrap() == encode_ppm(&img).unwrap(), || format!("image {i}: requantization changed bytes"))?;
    }
    ensure(hsv_err < 1e-6, || format!("HSV round-trip error {hsv_err:e}"))?;
    Ok(format!("100 images, HSV max error {hsv_err:.1e}"))
}

// ---------------------------------------------------------------- 5

fn fog_samples(first: u64, n: u64, t_lo: f64, t_hi: f64) -> Vec<Sample> {
    (first..first + n)
        .map(|s| {
            let (clear, _) = generate_scene(&SceneSpec::random(derive(s, "scene"), 64, 32, 1 + s as usize % 3)).unwrap();
            let clear = quantized(&clear);
            let t = t_lo + (t_hi - t_lo) * unit_f64(derive(s, "intensity"));
            Sample { input: quantized(&apply_fog(&clear, t, derive(s, "fog")).unwrap()), target: clear }
        })
        .collect()
}

fn training_sanity() -> Outcome {
    let train_set = fog_samples(0, 64, 0.5, 1.0);
    let test_set = fog_samples(10_000, 16, 0.5, 1.0);
    let baseline = test_set.iter().map(|s| mse(&s.input, &s.target).unwrap()).sum::<f64>() / test_set.len() as f64;
    let cfg = WUNetConfig { depth: 2, base_channels: 8, input_size: (64, 32), ..WUNetConfig::default() };
    let tcfg = TrainConfig { epochs: 100, batch_size: 24, lr: 0.01, seed: 5, checkpoint_dir: None };
    let run = || {
        let mut m = build_model(&cfg, 5).unwrap();
        let out = train(&mut m, &train_set, &test_set, &tcfg).unwrap();
        (out, m)
    };
    let (a, ma) = run();
    let (b, mb) = run();
    ensure(a.log == b.log && ma == mb, || "two runs with one seed diverged".into())?;
    let best = a.log[a.best_epoch - 1].test_mse;
    ensure(best <= a.log[0].test_mse, || "best checkpoint worse than epoch 1".into())?;
    ensure(best <= 0.5 * baseline, || format!("test MSE {best:.5} vs identity {baseline:.5}"))?;
    Ok(format!("test MSE {best:.5} = {:.1}% of identity baseline {baseline:.5} (epoch {}), deterministic", 100.0 * best / baseline, a.best_epoch))
}

// ---------------------------------------------------------------- 6

fn detection_recovery() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let spec = CorpusSpec {
        count: 32,
        width: 64,
        height: 32,
        max_objects: 3,
        seed: 6,
        id_prefix: "held".into(),
        split: Split::Test,
    };
    generate_corpus(&spec, &root.join("clear")).map_err(|e| e.to_string())?;
    let sets = build_validation_sets(&root.join("clear").join(MANIFEST_NAME), &root.join("val"), 6).map_err(|e| e.to_string())?;
    let set = |name: &str| sets.iter().find(|(n, _)| n == name).map(|(_, p)| p.clone()).ok_or(format!("no {name} set"));

    let train_set = fog_samples(20_000, 128, 0.5, 1.0);
    let test_set = fog_samples(30_000, 16, 0.5, 1.0);
    let cfg = WUNetConfig { depth: 2, base_channels: 8, input_size: (64, 32), ..WUNetConfig::default() };
    let tcfg = TrainConfig { epochs: 150, batch_size: 8, lr: 0.002, seed: 6, checkpoint_dir: None };
    let mut model = build_model(&cfg, 6).map_err(|e| e.to_string())?;
    train(&mut model, &train_set, &test_set, &tcfg).map_err(|e| e.to_string())?;

    let detector = BlobDetector::default();
    let table = ClassTable::default();
    let eval = |name: &str, m: Option<&WUNet>| -> Result<f64, String> {
        let variant = if m.is_some() { "wunet" } else { "raw" };
        evaluate_set(&set(name)?, m, DetectionSource::Detector(&detector), &table, variant)
            .map(|r| r.map)
            .map_err(|e| e.to_string())
    };
    let clear = eval("normal", None)?;
    let raw = eval("fog_high", None)?;
    let denoised = eval("fog_high", Some(&model))?;
    let summary = format!("mAP clear {clear:.3}, denoised fog_high {denoised:.3}, raw fog_high {raw:.3}");
    ensure(clear >= denoised && denoised > raw, || format!("ordering broken: {summary}"))?;
    ensure(denoised - raw >= 0.5 * (clear - raw), || format!("recovered under half the gap: {summary}"))?;
    Ok(format!("{summary}; recovered {:.0}% of the gap", 100.0 * (denoised - raw) / (clear - raw)))
}

// ---------------------------------------------------------------- 7

fn crop_equivalence() -> Outcome {
    let grid = CropGrid::new(2, 2, 32, 16);
    let cfg = WUNetConfig {
        depth: 2,
        base_channels: 8,
        crop_mode: true,
        crop_grid: Some(grid),
        input_size: (64, 32),
        ..WUNetConfig::default()
    };
    let model = build_model(&cfg, 7).map_err(|e| e.to_string())?;
    let mut rng = CounterRng::new(7);
    for i in 0..20 {
        let img = random_image(&mut rng, 64, 32);
        let whole = model.forward_image(&img).unwrap();
        let manual: Vec<Image> = split_crops(&img, &grid)
            .unwrap()
            .iter()
            .map(|c| model.forward_tiles(std::slice::from_ref(c)).unwrap().remove(0))
            .collect();
        ensure(join_crops(&manual, &grid).unwrap() == whole, || format!("input {i}: crop batch differs from manual tiling"))?;
    }
    Ok("20 inputs bitwise equal".into())
}

// ---------------------------------------------------------------- 8

fn adversity_monotonicity() -> Outcome {
    let ts = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut summary = Vec::new();
    for c in Condition::ADVERSE {
        let mut mean = [0.0f64; 5];
        for s in 0..20u64 {
            let (clear, _) = generate_scene(&SceneSpec::random(derive(s, "mono"), 64, 32, 2)).unwrap();
            let mut prev = -1.0;
            for (k, &t) in ts.iter().enumerate() {
                let img = apply_weather(&clear, &WeatherSpec::new(c, t, derive(s, c.name())).unwrap()).unwrap();
                let e = mse(&img, &clear).unwrap();
                ensure(e >= prev, || format!("{c} image {s}: MSE {e} at t={t} below {prev}"))?;
                prev = e;
                mean[k] += e / 20.0;
            }
        }
        summary.push(format!("{c} {:.4}..{:.4}", mean[0], mean[4]));
    }
    Ok(format!("20 images nondecreasing; mean MSE {}", summary.join(", ")))
}

// ---------------------------------------------------------------- 9

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "config.json" {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn pipeline(root: &Path) -> Result<(), String> {
    let s = |p: PathBuf| p.display().to_string();
    let steps: Vec<(PathBuf, Vec<String>)> = vec![
        (root.join("train_scenes"), vec!["scene-gen".into(), "--count".into(), "16".into(), "--prefix".into(), "tr".into()]),
        (root.join("test_scenes"), vec!["scene-gen".into(), "--count".into(), "8".into(), "--prefix".into(), "te".into(), "--split".into(), "test".into()]),
        (root.join("ext"), vec!["dataset".into(), "extend".into(), "--manifest".into(), s(root.join("train_scenes").join(MANIFEST_NAME))]),
        (root.join("val"), vec!["dataset".into(), "valsets".into(), "--manifest".into(), s(root.join("test_scenes").join(MANIFEST_NAME))]),
        (root.join("crops"), vec!["dataset".into(), "cropify".into(), "--manifest".into(), s(root.join("ext").join(MANIFEST_NAME)), "--cols".into(), "2".into(), "--rows".into(), "2".into()]),
        (root.join("model"), vec!["train".into(), "--train".into(), s(root.join("ext").join(MANIFEST_NAME)), "--test".into(), s(root.join("val/fog_high").join(MANIFEST_NAME)), "--config".into(), s(root.join("train.json"))]),
        (root.join("runs/blob"), vec!["eval".into(), "--sets".into(), s(root.join("val")), "--model".into(), s(root.join("model/best.wun"))]),
        (root.join("summary"), vec!["report".into(), "--runs".into(), s(root.join("runs"))]),
    ];
    std::fs::create_dir_all(root).unwrap();
    std::fs::write(root.join("train.json"), r#"{"model": {"depth": 1, "base_channels": 4}, "train": {"epochs": 2, "batch_size": 16, "lr": 0.001}}"#).unwrap();
    for (out, args) in steps {
        let mut argv = vec!["wunet".to_string(), "--seed".into(), "11".into(), "--out-dir".into(), s(out)];
        argv.extend(args);
        let code = wunet_cli::run(argv.clone());
        ensure(code == 0, || format!("{argv:?} exited {code}"))?;
    }
    Ok(())
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline(&a)?;
    pipeline(&b)?;
    let (fa, fb) = (files_under(&a), files_under(&b));
    ensure(fa == fb, || "runs produced different file sets".into())?;
    let mut kinds = [0usize; 4];
    for f in &fa {
        let same = std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap();
        ensure(same, || format!("{} differs", f.display()))?;
        match f.extension().and_then(|e| e.to_str()) {
            Some("jsonl") => kinds[0] += 1,
            Some("ppm") => kinds[1] += 1,
            Some("csv") => kinds[2] += 1,
            _ => kinds[3] += 1,
        }
    }
    ensure(kinds[0] > 0 && kinds[1] > 0 && kinds[2] > 0, || format!("missing artifact kinds {kinds:?}"))?;
    Ok(format!(
        "{} files identical: {} manifests, {} images, {} CSVs, {} other",
        fa.len(),
        kinds[0],
        kinds[1],
        kinds[2],
        kinds[3]
    ))
}
