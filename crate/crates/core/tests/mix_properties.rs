use std::collections::BTreeSet;

use latentlab_core::mix::{self, MixSpec, RegionIndex};
use latentlab_core::{CylinderGridSpec, GridDims, Label, Point, PointCloud, Provenance};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

mod support;

fn cloud(n: usize, rng: &mut impl Rng) -> PointCloud {
    let points = (0..n)
        .map(|_| {
            Point::new(
                rng.gen_range(-60.0..60.0),
                rng.gen_range(-60.0..60.0),
                rng.gen_range(-4.0..3.0),
                rng.gen(),
            )
        })
        .collect();
    let labels = (0..n)
        .map(|_| Label::new(rng.gen_range(0..30), rng.gen_range(0..5)))
        .collect();
    PointCloud::with_labels(points, labels).unwrap()
}

fn always() -> MixSpec {
    MixSpec {
        p_cylmix: 1.0,
        ..MixSpec::default()
    }
}

#[test]
fn output_matches_oracle_partition() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = CylinderGridSpec::default();
    for _ in 0..10 {
        let a = cloud(rng.gen_range(100..3000), &mut rng);
        let b = cloud(rng.gen_range(100..3000), &mut rng);
        let out = mix::cylinder_mix(a.clone(), b.clone(), &grid, &always()).unwrap();
        assert!(out.applied);
        let mut want1 = Vec::new();
        let mut want2 = Vec::new();
        for (src, c) in [(0u32, &a), (1, &b)] {
            for (i, p) in c.points().iter().enumerate() {
                let prov = Provenance {
                    frame: src,
                    index: i as u32,
                };
                if oracle_member(p, &grid, always().regions) {
                    want1.push(prov);
                } else {
                    want2.push(prov);
                }
            }
        }
        assert_eq!(out.first.provenance().unwrap(), &want1[..]);
        assert_eq!(out.second.provenance().unwrap(), &want2[..]);
    }
}

#[test]
fn checkerboard_parity_flip() {
    for rx in 0..9 {
        for ry in 0..9 {
            for rz in 0..9 {
                let m = mix::mix_membership(RegionIndex {
                    x: rx,
                    y: ry,
                    z: rz,
                });
                assert_eq!(m, (rx + ry + rz) % 2 == 1);
                assert_ne!(
                    m,
                    mix::mix_membership(RegionIndex {
                        x: rx + 1,
                        y: ry,
                        z: rz
                    })
                );
                assert_ne!(
                    m,
                    mix::mix_membership(RegionIndex {
                        x: rx,
                        y: ry + 1,
                        z: rz
                    })
                );
                assert_ne!(
                    m,
                    mix::mix_membership(RegionIndex {
                        x: rx,
                        y: ry,
                        z: rz + 1
                    })
                );
            }
        }
    }
}

#[test]
fn gate_is_deterministic_and_near_its_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = cloud(50, &mut rng);
    let b = cloud(50, &mut rng);
    let grid = CylinderGridSpec::default();
    let mut applied = 0;
    for seed in 0..2000 {
        let spec = MixSpec {
            seed,
            ..MixSpec::default()
        };
        let x = mix::cylinder_mix(a.clone(), b.clone(), &grid, &spec).unwrap();
        let y = mix::cylinder_mix(a.clone(), b.clone(), &grid, &spec).unwrap();
        assert_eq!(x, y);
        applied += x.applied as usize;
    }
    // binomial(2000, 0.25): mean 500, sd ~19.4
    assert!((400..600).contains(&applied), "{applied}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conservation_and_label_fidelity(seed in any::<u64>(), na in 0usize..400, nb in 0usize..400,
                                       rx in 1usize..6, ry in 1usize..6, rz in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = cloud(na, &mut rng);
        let b = cloud(nb, &mut rng);
        let spec = MixSpec { regions: GridDims::new(rx, ry, rz), p_cylmix: 1.0, seed };
        let out = mix::cylinder_mix(a.clone(), b.clone(), &CylinderGridSpec::default(), &spec).unwrap();
        prop_assert_eq!(out.first.len() + out.second.len(), na + nb);

        let mut seen = BTreeSet::new();
        for c in [&out.first, &out.second] {
            let prov = c.provenance().unwrap();
            for (k, pr) in prov.iter().enumerate() {
                prop_assert!(seen.insert((pr.frame, pr.index)));
                let src = if pr.frame == 0 { &a } else { &b };
                let i = pr.index as usize;
                prop_assert_eq!(c.points()[k], src.points()[i]);
                prop_assert_eq!(c.labels().unwrap()[k], src.labels().unwrap()[i]);
            }
        }
        prop_assert_eq!(seen.len(), na + nb);
    }

    #[test]
    fn swapping_inputs_swaps_sources(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = cloud(300, &mut rng);
        let b = cloud(300, &mut rng);
        let grid = CylinderGridSpec::default();
        let ab = mix::cylinder_mix(a.clone(), b.clone(), &grid, &always()).unwrap();
        let ba = mix::cylinder_mix(b, a, &grid, &always()).unwrap();
        // a point's half depends only on its position, never on its source
        let count = |c: &PointCloud, f: u32| c.provenance().unwrap().iter().filter(|p| p.frame == f).count();
        prop_assert_eq!(count(&ab.first, 0), count(&ba.first, 1));
        prop_assert_eq!(count(&ab.first, 1), count(&ba.first, 0));
    }
}
