use std::path::Path;

use privcam_core::pipeline::{io, plan_items, run_batch, run_dataset, scan_dataset, JobConfig, Manifest, RunReport, Status};
use privcam_core::synthetic::{street_scene, write_fixture_tree, FixtureFrame};
use privcam_core::{apply_variant, CameraConfig, Error, Split, Variant};

fn tree(root: &Path, n: usize, w: usize, h: usize) -> Vec<FixtureFrame> {
    let frames: Vec<_> = (0..n)
        .map(|i| {
            let split = if i % 2 == 0 { Split::Train } else { Split::Val };
            FixtureFrame::new(split, if i % 3 == 2 { "hanover" } else { "erfurt" }, i)
        })
        .collect();
    write_fixture_tree(root, &frames, w, h, Some(41)).unwrap();
    frames
}

fn config(variant: Variant, out: &Path) -> JobConfig {
    let mut cfg = JobConfig::new(CameraConfig::tele_80mm(), variant, out);
    cfg.k = 12;
    cfg
}

fn walk(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            walk(&p, out);
        } else {
            out.push(p);
        }
    }
}

#[test]
fn variant_c_output_is_reencoded_input() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    tree(&root, 2, 48, 24);
    let items = scan_dataset(&root, &Split::ALL).unwrap();
    let cfg = config(Variant::C, &dir.path().join("out"));
    let m = run_batch(&items, &cfg).unwrap();
    assert_eq!(m.failed(), 0);
    for (item, rec) in items.iter().zip(&m.records) {
        let bytes = std::fs::read(&item.image_path).unwrap();
        let reencoded = io::encode_png(&io::decode_rgb8(&bytes).unwrap()).unwrap();
        assert_eq!(rec.output_sha256.as_deref(), Some(io::sha256_hex(&reencoded).as_str()));
        assert_eq!(rec.input_sha256.as_deref(), Some(io::sha256_hex(&bytes).as_str()));
        assert!(rec.disparity_sha256.is_none());
    }
}

#[test]
fn reruns_are_identical_modulo_timing() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    tree(&root, 4, 64, 32);
    let items = scan_dataset(&root, &Split::ALL).unwrap();
    let strip = |m: &Manifest| m.records.iter().map(|r| r.without_timing()).collect::<Vec<_>>();
    let a = run_batch(&items, &config(Variant::BG, &dir.path().join("a"))).unwrap();
    let b = run_batch(&items, &config(Variant::BG, &dir.path().join("b"))).unwrap();
    assert_eq!(strip(&a), strip(&b));
    for r in &a.records {
        let t = r.timing.as_ref().expect("timing recorded");
        assert!(t.elapsed_ms > 0.0 && t.megapixels_per_s > 0.0);
        assert!(r.valid_disparity_fraction.unwrap() < 1.0);
    }
    let text = std::fs::read_to_string(dir.path().join("a/manifest.jsonl")).unwrap();
    assert_eq!(Manifest::read_jsonl(&text).unwrap(), a.records);
}

#[test]
fn one_bad_item_is_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    tree(&root, 10, 32, 16);
    let mut items = scan_dataset(&root, &Split::ALL).unwrap();
    assert_eq!(items.len(), 10);
    std::fs::write(items[3].disparity_path.as_ref().unwrap(), b"\x89PNG truncated").unwrap();
    items.swap(0, 9);
    let m = run_batch(&items, &config(Variant::B, &dir.path().join("out"))).unwrap();
    assert_eq!((m.succeeded(), m.failed()), (9, 1));
    assert_eq!(m.records[3].status, Status::Error);
    assert!(m.records[3].error.as_deref().unwrap().contains("disparity"));
    assert!(m.records[3].output_path.is_none());
    let ids: Vec<_> = m.records.iter().map(|r| r.frame_id.clone()).collect();
    let expected: Vec<_> = items.iter().map(|i| i.frame_id.clone()).collect();
    assert_eq!(ids, expected);
}

#[test]
fn skipped_items_are_reported_not_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    let mut frames: Vec<_> = (0..3).map(|i| FixtureFrame::new(Split::Train, "ulm", i)).collect();
    frames[1].with_disparity = false;
    frames[2].with_camera = false;
    write_fixture_tree(&root, &frames, 32, 16, None).unwrap();
    let out = dir.path().join("out");
    let (m, report) = run_dataset(&root, &[Split::Train], &config(Variant::B, &out)).unwrap();
    assert_eq!(m.records.len(), 1);
    assert_eq!(report.skipped.len(), 2);
    assert_eq!(m.records.len(), 3 - report.skipped.len());
    assert!(report.skipped[0].reason.contains("disparity"));
    assert!(report.skipped[1].reason.contains("camera"));
    let on_disk: RunReport = serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(on_disk, report);

    // the same tree under G needs no sidecars
    let (m, report) = run_dataset(&root, &[Split::Train], &config(Variant::G, &dir.path().join("g"))).unwrap();
    assert_eq!((m.records.len(), report.skipped.len()), (3, 0));
}

#[test]
fn unwritable_output_is_fatal_before_processing() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    tree(&root, 2, 16, 16);
    let items = scan_dataset(&root, &Split::ALL).unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let err = run_batch(&items, &config(Variant::G, &blocker.join("out"))).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert_eq!(err.exit_code(), 3);
    assert!(matches!(run_batch(&[], &config(Variant::G, &dir.path().join("o"))), Err(Error::Data(_))));
}

#[test]
fn no_partial_files_remain() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    tree(&root, 3, 32, 16);
    let out = dir.path().join("out");
    let items = scan_dataset(&root, &Split::ALL).unwrap();
    let (ready, _) = plan_items(items, &config(Variant::BG, &out));
    run_batch(&ready, &config(Variant::BG, &out)).unwrap();
    let mut files = Vec::new();
    walk(&out, &mut files);
    assert_eq!(files.len(), 3 + 1);
    assert!(files.iter().all(|p| !p.to_string_lossy().contains(".part")));
    assert!(files.iter().any(|p| p.ends_with("leftImg8bit_BG/val/erfurt/erfurt_000000_000020_leftImg8bit.png")));
}

fn sobel_energy(gray: &[f32], w: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
    let at = |x: usize, y: usize| f64::from(gray[y * w + x]);
    let mut e = 0.0;
    let mut n = 0usize;
    for y in y0 + 1..y1 - 1 {
        for x in x0 + 1..x1 - 1 {
            let gx = at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)
                - at(x - 1, y - 1) - 2.0 * at(x - 1, y) - at(x - 1, y + 1);
            let gy = at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)
                - at(x - 1, y - 1) - 2.0 * at(x, y - 1) - at(x + 1, y - 1);
            e += gx * gx + gy * gy;
            n += 1;
        }
    }
    e / n as f64
}

#[test]
fn bg_keeps_far_edges_sharper_than_near() {
    let (w, h) = (256, 128);
    let scene = street_scene(w, h, 1);
    let out = apply_variant(&scene.image, Some(&scene.depth), &CameraConfig::tele_80mm(), Variant::BG, 32).unwrap();
    let gray = out.plane(0);
    let inset = |b: privcam_core::synthetic::SceneBox| (b.x0 + 2, b.y0 + 2, b.x1 - 2, b.y1 - 2);
    let (nx0, ny0, nx1, ny1) = inset(scene.near_box);
    let (fx0, fy0, fx1, fy1) = inset(scene.far_box);
    let near = sobel_energy(&gray, w, nx0, ny0, nx1, ny1);
    let far = sobel_energy(&gray, w, fx0, fy0, fx1, fy1);
    assert!(near / far < 1.0, "near {near} far {far}");

    // the near box loses far more of its own edge energy than the far box
    let src = privcam_core::to_grayscale(&scene.image, &Default::default()).unwrap().plane(0);
    let near_kept = near / sobel_energy(&src, w, nx0, ny0, nx1, ny1);
    let far_kept = far / sobel_energy(&src, w, fx0, fy0, fx1, fy1);
    assert!(near_kept < 0.1 * far_kept, "kept near {near_kept} far {far_kept}");
}
