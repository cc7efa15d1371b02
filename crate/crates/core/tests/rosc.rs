//! ROSC recursion on systems whose sets are known in closed form, and the
//! one-step property checked by sampling.

use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rosc_core::rosc::{compute_family, compute_oracle_family, FamilyConfig};
use rosc_core::setgeom::VertexModels;
use rosc_core::sysid::{assemble_data, compute_model_set, model_set_contains, Trajectory};
use rosc_core::{HPolytope, Zonotope};

fn interval(lo: f64, hi: f64) -> HPolytope {
    HPolytope::from_box(&array![lo], &array![hi]).unwrap()
}

fn upper(h: &HPolytope) -> f64 {
    h.support(array![1.0].view()).unwrap().unwrap()
}

fn lower(h: &HPolytope) -> f64 {
    -h.support(array![-1.0].view()).unwrap().unwrap()
}

/// x⁺ = a x + b u + w, |x| ≤ 10, |u| ≤ 1, |w| ≤ 0.1. From `[−t, t]` one step
/// back is `|x| ≤ min(10, (t − 0.1 + |b|) / |a|)`.
#[test]
fn scalar_oracle_matches_closed_form() {
    let (a, b) = (1.2, 1.0);
    let w = Zonotope::new(array![0.0], array![[0.1]]).unwrap();
    let fam = compute_oracle_family(&array![[a]], &array![[b]], &interval(-0.5, 0.5), &interval(-10.0, 10.0), &interval(-1.0, 1.0), &w, 12)
        .unwrap();
    let mut t = 0.5f64;
    for j in 1..=12 {
        t = ((t - 0.1 + b) / a).min(10.0);
        let level = fam.set(j).unwrap();
        assert!((upper(level) - t).abs() <= 1e-9, "level {j}: {} vs {t}", upper(level));
        assert!((lower(level) + t).abs() <= 1e-9);
    }
}

fn scalar_cfg() -> FamilyConfig<f64> {
    FamilyConfig::new(interval(-10.0, 10.0), interval(-1.0, 1.0), Zonotope::new(array![0.0], array![[0.1]]).unwrap()).unwrap()
}

#[test]
fn data_driven_levels_inside_every_model_oracle() {
    let models = VertexModels::new(vec![(array![[1.1]], array![[0.9]]), (array![[1.3]], array![[1.1]])]).unwrap();
    let cfg = scalar_cfg();
    let terminal = Zonotope::new(array![0.0], array![[0.5]]).unwrap();
    let fam = compute_family(&models, &terminal, &cfg, 8).unwrap();
    assert_eq!(fam.len(), 8);
    for (a, b) in models.vertices() {
        let oracle =
            compute_oracle_family(a, b, &terminal.to_hpoly().unwrap(), &cfg.state_constraints, &cfg.input_constraints, &cfg.disturbance, 8)
                .unwrap();
        for j in 1..=8 {
            let p = fam.projected(j).unwrap();
            let o = oracle.set(j).unwrap();
            assert!(p.support(array![1.0].view()).unwrap() <= upper(o) + 1e-9);
            assert!(-p.support(array![-1.0].view()).unwrap() >= lower(o) - 1e-9);
        }
    }
}

/// Every (x, u) in a level's inner zonotope must send x into the previous
/// projected level for every vertex model and every disturbance vertex.
#[test]
fn inner_levels_are_robust_one_step_controllable() {
    let a1 = array![[0.8, 0.3], [0.1, 0.9]];
    let b1 = array![[0.0], [1.0]];
    let a2 = array![[0.85, 0.25], [0.15, 0.95]];
    let b2 = array![[0.1], [0.9]];
    let models = VertexModels::new(vec![(a1, b1), (a2, b2)]).unwrap();
    let x = HPolytope::from_box(&array![-5.0, -5.0], &array![5.0, 5.0]).unwrap();
    let u = HPolytope::from_box(&array![-1.0], &array![1.0]).unwrap();
    let w = Zonotope::new(array![0.0, 0.0], Array2::eye(2) * 0.02).unwrap();
    let cfg = FamilyConfig::new(x, u, w.clone()).unwrap();
    let terminal = Zonotope::new(array![0.0, 0.0], Array2::eye(2) * 0.5).unwrap();
    let fam = compute_family(&models, &terminal, &cfg, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for j in 1..=fam.len() {
        let prev = fam.projected(j - 1).unwrap().to_hpoly().unwrap();
        let inner = &fam.level(j).unwrap().inner;
        for _ in 0..300 {
            let z = inner.sample(&mut rng);
            let (xs, us) = (z.slice(ndarray::s![..2]).to_owned(), z.slice(ndarray::s![2..]).to_owned());
            assert!(cfg.input_constraints.contains_point(us.view(), 1e-9).unwrap());
            for (a, b) in models.vertices() {
                let nominal = a.dot(&xs) + b.dot(&us);
                for s in [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]] {
                    let next = &nominal + &w.point_at(&Array1::from(s.to_vec()));
                    assert!(prev.contains_point(next.view(), 1e-8).unwrap(), "level {j}");
                }
            }
        }
    }
}

#[test]
fn model_set_contains_the_generating_system() {
    let a = array![[0.9, 0.2], [-0.1, 0.8]];
    let b = array![[0.5], [1.0]];
    let w = Zonotope::new(array![0.0, 0.0], Array2::eye(2) * 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut states = vec![array![1.0, -1.0]];
    let mut inputs = Vec::new();
    for _ in 0..12 {
        let uk = array![rng.gen_range(-1.0..1.0)];
        let next = a.dot(states.last().unwrap()) + b.dot(&uk) + w.sample(&mut rng);
        inputs.push(uk);
        states.push(next);
    }
    let traj = Trajectory::from_samples(&states, &inputs).unwrap();
    let ms = compute_model_set(&assemble_data(&[traj]).unwrap(), &w).unwrap();
    let ab = ndarray::concatenate![ndarray::Axis(1), a, b];
    assert!(model_set_contains(&ms, &ab, 1e-8).unwrap());
    // a clearly wrong model is rejected
    let wrong = &ab + 0.5;
    assert!(!model_set_contains(&ms, &wrong, 1e-8).unwrap());
}
