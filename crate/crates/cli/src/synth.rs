//! Small synthetic SemanticKITTI-style scenes: a road plane, two building
//! walls and a few cars and pedestrians placed in front of the camera.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use latentlab_core::{io, Label, Point, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ROAD: u32 = 40;
pub const BUILDING: u32 = 50;
pub const CAR: u32 = 10;
pub const PERSON: u32 = 30;

/// LiDAR (x forward, y left, z up) to camera (x right, y down, z forward),
/// with a 500 px focal length on a 376 x 1241 image.
pub const CALIBRATION: &str = "\
P0: 5.0e2 0 6.2e2 0 0 5.0e2 1.88e2 0 0 0 1 0
P1: 5.0e2 0 6.2e2 0 0 5.0e2 1.88e2 0 0 0 1 0
P2: 5.0e2 0 6.2e2 0 0 5.0e2 1.88e2 0 0 0 1 0
P3: 5.0e2 0 6.2e2 0 0 5.0e2 1.88e2 0 0 0 1 0
Tr: 0 -1 0 0 0 0 -1 0 1 0 0 0
";

pub const IMAGE_SIZE: (usize, usize) = (376, 1241);

pub fn frame_name(i: usize) -> String {
    format!("{i:06}")
}

/// One scene with roughly `n` points.
pub fn scene(n: usize, rng: &mut impl Rng) -> PointCloud {
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut push = |p: Point, l: Label| {
        points.push(p);
        labels.push(l);
    };

    let n_objects = rng.gen_range(2..=4);
    let per_object = n / 10;
    let n_ground = n.saturating_sub(per_object * n_objects) * 2 / 3;
    let n_walls = n.saturating_sub(per_object * n_objects + n_ground);

    for _ in 0..n_ground {
        let rho: f32 = rng.gen_range(3.5..45.0);
        let phi: f32 = rng.gen_range(-std::f32::consts::PI..std::f32::consts::PI);
        let z = -1.7 + rng.gen_range(-0.03..0.03);
        push(
            Point::new(rho * phi.cos(), rho * phi.sin(), z, rng.gen()),
            Label::new(ROAD, 0),
        );
    }
    for k in 0..n_walls {
        let side = if k % 2 == 0 { 1.0 } else { -1.0 };
        let x = rng.gen_range(-30.0..40.0);
        let y = side * (12.0 + rng.gen_range(-0.2..0.2));
        push(
            Point::new(x, y, rng.gen_range(-1.7..1.4), rng.gen()),
            Label::new(BUILDING, 0),
        );
    }
    for inst in 1..=n_objects as u32 {
        let (class, half) = if rng.gen_bool(0.7) {
            (CAR, [2.0f32, 0.9, 0.75])
        } else {
            (PERSON, [0.3f32, 0.3, 0.85])
        };
        let cx = rng.gen_range(7.0..25.0);
        let cy = rng.gen_range(-0.3..0.3) * cx;
        let cz = -1.7 + half[2];
        for _ in 0..per_object {
            let d = [
                rng.gen_range(-half[0]..half[0]),
                rng.gen_range(-half[1]..half[1]),
                rng.gen_range(-half[2]..half[2]),
            ];
            push(
                Point::new(cx + d[0], cy + d[1], cz + d[2], rng.gen()),
                Label::new(class, inst),
            );
        }
    }
    PointCloud::with_labels(points, labels).expect("labels align")
}

/// Writes `velodyne/*.bin`, `labels/*.label` and `calib.txt` under `out`.
pub fn write_dataset(out: &Path, frames: usize, points: usize, seed: u64) -> Result<()> {
    let velodyne = out.join("velodyne");
    let labels = out.join("labels");
    for d in [&velodyne, &labels] {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..frames {
        let cloud = scene(points, &mut rng);
        let name = frame_name(i);
        io::write_scan(velodyne.join(format!("{name}.bin")), &cloud)?;
        io::write_labels(
            labels.join(format!("{name}.label")),
            cloud.labels().expect("labeled"),
        )?;
    }
    io::write_atomic(out.join("calib.txt"), CALIBRATION.as_bytes())?;
    Ok(())
}
