//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use latentlab_core::bev;
use latentlab_core::camera::{self, CameraModel};
use latentlab_core::config::PipelineConfig;
use latentlab_core::decode::{self, DecodeInputs, DecodeSpec};
use latentlab_core::grid::{self};
use latentlab_core::heatmap::{self, Heatmap};
use latentlab_core::loss::{self, LossInputs, LossWeights};
use latentlab_core::metrics::{self, ClassSets};
use latentlab_core::mix::{self, MixSpec, RegionIndex};
use latentlab_core::{CylinderGridSpec, GridDims, Label, Point, PointCloud, VoxelIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[path = "../../core/tests/support/mod.rs"]
mod support;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn random_cloud(n: usize, rng: &mut impl Rng) -> PointCloud {
    let points = (0..n)
        .map(|_| {
            Point::new(
                rng.gen_range(-55.0..55.0),
                rng.gen_range(-55.0..55.0),
                rng.gen_range(-3.5..2.0),
                rng.gen(),
            )
        })
        .collect();
    let labels = (0..n)
        .map(|_| Label::new(rng.gen_range(0..20), rng.gen_range(0..8)))
        .collect();
    PointCloud::with_labels(points, labels).unwrap()
}

fn mix_conservation() -> Outcome {
    let start = Instant::now();
    let grid = CylinderGridSpec::default();
    let mut points = 0usize;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // log-uniform sizes in [1e3, 1e5]
        let mut size = || 10f64.powf(rng.gen_range(3.0..=5.0)).round() as usize;
        let (na, nb) = (size(), size());
        let a = random_cloud(na, &mut rng);
        let b = random_cloud(nb, &mut rng);
        points += na + nb;
        let spec = MixSpec {
            p_cylmix: 1.0,
            seed,
            ..MixSpec::default()
        };
        let out = mix::cylinder_mix(a, b, &grid, &spec).map_err(|e| e.to_string())?;
        check!(
            out.first.len() + out.second.len() == na + nb,
            "seed {seed}: sizes do not add up"
        );
        let set = |c: &PointCloud| -> BTreeSet<(u32, u32)> {
            c.provenance()
                .unwrap()
                .iter()
                .map(|p| (p.frame, p.index))
                .collect()
        };
        let (s1, s2) = (set(&out.first), set(&out.second));
        check!(
            s1.len() == out.first.len() && s2.len() == out.second.len(),
            "seed {seed}: duplicate provenance"
        );
        check!(s1.is_disjoint(&s2), "seed {seed}: halves overlap");
        let all: BTreeSet<(u32, u32)> = (0..na as u32)
            .map(|i| (0, i))
            .chain((0..nb as u32).map(|i| (1, i)))
            .collect();
        check!(
            s1.union(&s2).copied().collect::<BTreeSet<_>>() == all,
            "seed {seed}: union is not the input"
        );
    }
    let took = start.elapsed();
    check!(took < Duration::from_secs(30), "took {took:?}");
    Ok(format!("200 pairs, {points} points, {took:.2?}"))
}

fn checkerboard() -> Outcome {
    let mut checked = 0usize;
    for (rx, ry, rz) in iproduct(8) {
        for (x, y, z) in iproduct_dims(rx, ry, rz) {
            let m = mix::mix_membership(RegionIndex { x, y, z });
            let neighbours = [
                (x + 1 < rx).then(|| RegionIndex { x: x + 1, y, z }),
                (y + 1 < ry).then(|| RegionIndex { x, y: y + 1, z }),
                (z + 1 < rz).then(|| RegionIndex { x, y, z: z + 1 }),
            ];
            for n in neighbours.into_iter().flatten() {
                check!(
                    mix::mix_membership(n) != m,
                    "R=({rx},{ry},{rz}) r=({x},{y},{z}) -> {n:?}"
                );
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} adjacent region pairs"))
}

fn iproduct(max: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    iproduct_dims(max, max, max).map(|(a, b, c)| (a + 1, b + 1, c + 1))
}

fn iproduct_dims(x: usize, y: usize, z: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..x).flat_map(move |a| (0..y).flat_map(move |b| (0..z).map(move |c| (a, b, c))))
}

fn heatmap_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let dims = (rng.gen_range(1..64), rng.gen_range(1..64));
        let h = rng.gen_range(0.0..=(dims.0 - 1) as f64);
        let w = rng.gen_range(0.0..=(dims.1 - 1) as f64);
        let r = rng.gen_range(0.3..20.0);
        let map = heatmap::point_heatmap(h, w, r, dims).map_err(|e| e.to_string())?;
        for m in 0..dims.0 {
            for n in 0..dims.1 {
                let d2 = (m as f64 - h).powi(2) + (n as f64 - w).powi(2);
                worst = worst.max((map.get(m, n) - support::gaussian(d2, r)).abs());
            }
        }
    }
    check!(worst <= 1e-6, "max deviation {worst:e}");
    for r in 1..=10 {
        let map = heatmap::point_heatmap(20.0, 20.0, r as f64, (41, 41)).unwrap();
        check!(map.get(20, 20) == 1.0, "peak {} for R={r}", map.get(20, 20));
        let rim = map.get(20 + r, 20);
        check!((rim - (-2.0f64).exp()).abs() <= 1e-9, "rim {rim} for R={r}");
    }
    Ok(format!("max deviation {worst:e}; peak 1, rim exp(-2)"))
}

fn golden_defaults() -> Outcome {
    let c = PipelineConfig::default();
    let g = &c.grid;
    check!(g.dims == GridDims::new(480, 360, 32), "grid {:?}", g.dims);
    check!(
        (g.rho_min, g.rho_max, g.z_min, g.z_max) == (3.0, 50.0, -3.0, 1.5),
        "bounds"
    );
    check!(
        (g.phi_min, g.phi_max) == (-std::f64::consts::PI, std::f64::consts::PI),
        "phi range"
    );
    check!(
        c.mix.regions == GridDims::new(4, 4, 2),
        "regions {:?}",
        c.mix.regions
    );
    check!(c.mix.p_cylmix == 0.25, "p_cylmix {}", c.mix.p_cylmix);
    check!(
        c.heatmap.r_corner == 5.0 && c.heatmap.p_center == 0.25,
        "heatmap {:?}",
        c.heatmap
    );
    check!(
        c.loss
            == LossWeights {
                mu_hm: 100.0,
                mu_os: 10.0,
                mu_fm: 1.0
            },
        "loss {:?}",
        c.loss
    );
    check!(
        PipelineConfig::parse("").map_err(|e| e.to_string())? == c,
        "empty config file differs"
    );
    check!(
        PipelineConfig::parse(&c.to_text()).map_err(|e| e.to_string())? == c,
        "text round trip"
    );
    Ok(
        "grid 480,360,32; rho 3..50; z -3..1.5; regions 4,4,2; p 0.25; R 5; P 1/4; mu 100,10,1"
            .into(),
    )
}

fn bev_pooling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..100 {
        let dims = GridDims::new(
            rng.gen_range(1..=8),
            rng.gen_range(1..=8),
            rng.gen_range(1..=8),
        );
        let c = rng.gen_range(1..=4);
        let n = rng.gen_range(0..=2000);
        let idx: Vec<VoxelIndex> = (0..n)
            .map(|_| {
                VoxelIndex::new(
                    rng.gen_range(0..dims.x),
                    rng.gen_range(0..dims.y),
                    rng.gen_range(0..dims.z),
                )
            })
            .collect();
        let f: Vec<f32> = (0..n * c).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let got = bev::bev_max_pool(&f, c, &idx, dims).map_err(|e| e.to_string())?;
        check!(
            got.data() == &support::bev_brute_force(&f, c, &idx, dims)[..],
            "case {case} differs"
        );
        if case < 20 {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let f2: Vec<f32> = order
                .iter()
                .flat_map(|&i| f[i * c..(i + 1) * c].to_vec())
                .collect();
            let i2: Vec<VoxelIndex> = order.iter().map(|&i| idx[i]).collect();
            check!(
                bev::bev_max_pool(&f2, c, &i2, dims).unwrap() == got,
                "case {case}: shuffle changes result"
            );
        }
    }
    Ok("100 instances exact, 20 shuffles invariant".into())
}

fn pq_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (things, stuff, ignore) = ([1u32, 2], [3u32], [0u32]);
    let sets = ClassSets::new(things, stuff, ignore).unwrap();
    for case in 0..100 {
        let gt = support::random_panoptic(&mut rng, 16, 4, 5);
        let pred = support::perturb(&mut rng, &gt, 16, 4);
        let r = metrics::panoptic_quality(&pred, &gt, &sets).map_err(|e| e.to_string())?;
        let (rows, pq) = support::pq_oracle(&pred, &gt, &things, &stuff, &ignore);
        let got: Vec<_> = r
            .per_class
            .iter()
            .map(|c| (c.class, c.pq, c.sq, c.rq, c.tp, c.fp, c.fn_))
            .collect();
        check!(
            got == rows && r.pq == pq,
            "case {case}: {got:?} vs {rows:?}"
        );
        let perfect = metrics::panoptic_quality(&gt, &gt, &sets).unwrap();
        check!(
            perfect.pq == 1.0 && perfect.per_class.iter().all(|c| c.pq == 1.0),
            "case {case}: pred = gt gives {}",
            perfect.pq
        );
    }
    Ok("100 maps equal to exhaustive matching; pred = gt gives 1.0".into())
}

fn projection() -> Outcome {
    let cam = CameraModel::pinhole(100.0, 50.0, 40.0, (80, 100));
    let pts = [
        Point::new(0.0, 0.0, 2.0, 0.0),
        Point::new(0.8, 0.5, 2.0, 0.0),
        Point::new(-1.0, -0.4, 5.0, 0.0),
        Point::new(0.0, 0.0, -2.0, 0.0),
        Point::new(10.0, 0.0, 2.0, 0.0),
        Point::new(0.25, 0.75, 50.0, 0.0),
    ];
    let got: Vec<_> = camera::project_points(&pts, &cam)
        .pairs
        .iter()
        .map(|p| (p.point, p.h, p.w))
        .collect();
    let want = [(0, 40, 50), (1, 65, 90), (2, 32, 30), (5, 42, 51)];
    check!(got == want, "f=100 fixture: {got:?}");

    // KITTI-style axes: camera z is LiDAR x
    let calib = latentlab_core::io::parse_calibration(
        "P2: 500 0 620 0 0 500 188 0 0 0 1 0\nTr: 0 -1 0 0 0 0 -1 0 1 0 0 0\n",
        2,
    )
    .map_err(|e| e.to_string())?;
    let kitti = CameraModel::from_calibration(&calib, (376, 1241), 2).unwrap();
    let got: Vec<_> = camera::project_points(&[Point::new(10.0, 2.0, -1.0, 0.0)], &kitti)
        .pairs
        .iter()
        .map(|p| (p.h, p.w))
        .collect();
    // u = 500 * (-2) / 10 + 620 = 520, v = 500 * 1 / 10 + 188 = 238
    check!(got == [(238, 520)], "calibrated fixture: {got:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let behind: Vec<Point> = (0..20_000)
        .map(|_| {
            Point::new(
                rng.gen_range(-50.0..0.0),
                rng.gen_range(-50.0..50.0),
                rng.gen_range(-5.0..5.0),
                0.0,
            )
        })
        .collect();
    check!(
        camera::project_points(&behind, &kitti).pairs.is_empty(),
        "a point behind the camera projected"
    );
    Ok("fixtures exact; 20000 behind-camera points excluded".into())
}

fn loss_checks() -> Outcome {
    let v = vec![0.25f32, -1.0, 3.5, 0.0];
    let off = vec![0.5f32; 8];
    let gt = [0u32, 1, 0, 1];
    let logits = [1000.0f32, 0.0, 0.0, 1000.0, 1000.0, 0.0, 0.0, 1000.0];
    let perfect = LossInputs {
        sem_logits: &logits,
        num_classes: 2,
        sem_gt: &gt,
        ignore: &[],
        hm_pred: &v,
        hm_gt: &v,
        os_pred: &off,
        os_gt: &off,
        fm_pred: &v,
        fm_gt: &v,
    };
    let b =
        loss::segmentation_loss(&perfect, &LossWeights::default()).map_err(|e| e.to_string())?;
    check!(
        b.sem == 0.0 && b.hm == 0.0 && b.os == 0.0 && b.fm == 0.0 && b.total == 0.0,
        "perfect fit: {b:?}"
    );

    for c in [2usize, 5, 19, 20] {
        let logits = vec![-0.3f32; 7 * c];
        let gt: Vec<u32> = (0..7).map(|i| (i % c) as u32).collect();
        let ce = loss::cross_entropy(&logits, c, &gt, &[]).map_err(|e| e.to_string())?;
        check!((ce - (c as f64).ln()).abs() <= 1e-9, "C={c}: {ce}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let cells = 30;
        let r = |n: usize, rng: &mut ChaCha8Rng| {
            (0..n)
                .map(|_| rng.gen_range(-2.0f32..2.0))
                .collect::<Vec<_>>()
        };
        let logits = r(cells * 3, &mut rng);
        let gt: Vec<u32> = (0..cells).map(|_| rng.gen_range(0..3)).collect();
        let (hp, hg, op, og, fp, fg) = (
            r(cells, &mut rng),
            r(cells, &mut rng),
            r(2 * cells, &mut rng),
            r(2 * cells, &mut rng),
            r(cells, &mut rng),
            r(cells, &mut rng),
        );
        let inputs = LossInputs {
            sem_logits: &logits,
            num_classes: 3,
            sem_gt: &gt,
            ignore: &[],
            hm_pred: &hp,
            hm_gt: &hg,
            os_pred: &op,
            os_gt: &og,
            fm_pred: &fp,
            fm_gt: &fg,
        };
        let w = LossWeights::default();
        let b = loss::segmentation_loss(&inputs, &w).unwrap();
        let want = b.sem + w.mu_hm * b.hm + w.mu_os * b.os + w.mu_fm * b.fm;
        check!(
            (b.total - want).abs() <= 1e-12,
            "total {} vs {}",
            b.total,
            want
        );
    }
    Ok("perfect fit 0; uniform CE = ln C; weighted total".into())
}

fn panoptic_decode() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let spec = DecodeSpec {
        nms_kernel: 3,
        center_threshold: 0.1,
        top_k: 100,
    };
    for case in 0..50 {
        let vals: Vec<f64> = (0..64)
            .map(|_| (rng.gen_range(0..11) as f64) / 10.0)
            .collect();
        let hm = Heatmap::from_values(8, 8, vals).unwrap();
        let centers = decode::find_centers(&hm, &spec).map_err(|e| e.to_string())?;
        let pos: Vec<_> = centers.iter().map(|c| (c.h, c.w)).collect();
        check!(
            pos == support::oracle_centers(&hm, &spec),
            "case {case}: centers differ"
        );

        let sem: Vec<u32> = (0..64).map(|_| rng.gen_range(0..4)).collect();
        let offsets: Vec<f32> = (0..128).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let fore: Vec<f32> = (0..64).map(|_| rng.gen_range(0.0..1.0)).collect();
        let inputs = DecodeInputs {
            dims: (8, 8),
            sem: &sem,
            offsets: &offsets,
            fore_mask: &fore,
        };
        let map =
            decode::assign_instances(&inputs, &centers, &[1, 2]).map_err(|e| e.to_string())?;
        check!(
            map.inst() == &support::oracle_assign(&inputs, &centers, &[1, 2])[..],
            "case {case}: assignment differs"
        );
        for _ in 0..3 {
            let again = decode::assign_instances(
                &inputs,
                &decode::find_centers(&hm, &spec).unwrap(),
                &[1, 2],
            )
            .unwrap();
            check!(again == map, "case {case}: repeated run differs");
        }
    }
    Ok("50 fixtures equal to brute force, repeatable".into())
}

fn performance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let a = random_cloud(120_000, &mut rng);
    let b = random_cloud(120_000, &mut rng);
    let grid = CylinderGridSpec::default();
    let spec = MixSpec {
        p_cylmix: 1.0,
        ..MixSpec::default()
    };
    let mut runs = Vec::new();
    for _ in 0..5 {
        let (a, b) = (a.clone(), b.clone());
        let start = Instant::now();
        let va = grid::voxelize(a.points(), &grid).unwrap();
        let vb = grid::voxelize(b.points(), &grid).unwrap();
        let out = mix::cylinder_mix(a, b, &grid, &spec).unwrap();
        runs.push(start.elapsed());
        std::hint::black_box((va, vb, out));
    }
    runs.sort();
    let median = runs[runs.len() / 2];
    check!(
        median < Duration::from_millis(100),
        "median {median:?} over {runs:?}"
    );
    Ok(format!("median {median:.2?} for 2 x 120k points"))
}

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn pipeline_determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_latentlab");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(exe)
            .args(args)
            .env("RUST_LOG", "warn")
            .output()
            .map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(String::from_utf8_lossy(&out.stderr).trim().to_string())
        }
    };
    let d = data.to_str().unwrap();
    run(&["synth", "--out", d, "--frames", "5", "--seed", "11"])?;
    let outs = [tmp.path().join("run1"), tmp.path().join("run2")];
    for (o, jobs) in outs.iter().zip(["1", "4"]) {
        run(&[
            "pipeline",
            "--data",
            d,
            "--out",
            o.to_str().unwrap(),
            "--ratio",
            "0.5",
            "--p",
            "1",
            "--seed",
            "7",
            "--jobs",
            jobs,
        ])?;
    }
    let (a, b) = (files(&outs[0]), files(&outs[1]));
    check!(a.keys().eq(b.keys()), "file sets differ");
    check!(a.keys().any(|k| k.starts_with("mixed")), "no mixed outputs");
    for (k, v) in &a {
        check!(&b[k] == v, "{k} differs");
    }
    let bytes: usize = a.values().map(Vec::len).sum();
    Ok(format!("{} files, {bytes} bytes identical", a.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("cylinder-mix conservation", mix_conservation),
        ("checkerboard property", checkerboard),
        ("heatmap formula", heatmap_formula),
        ("default parameters", golden_defaults),
        ("bev pooling oracle", bev_pooling),
        ("panoptic quality oracle", pq_oracle),
        ("projection correctness", projection),
        ("loss checks", loss_checks),
        ("panoptic decode oracle", panoptic_decode),
        ("voxelize + mix performance", performance),
        ("pipeline determinism", pipeline_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
