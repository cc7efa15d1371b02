//! The true plant: simulation and excitation-data collection.

use ndarray::Array1;
use rand::Rng;
use rosc_core::sysid::{assemble_data, check_rank};
use rosc_core::{HPolytope, Trajectory, Zonotope};

use crate::config::{DataConfig, DisturbanceMode, Plant};
use crate::HarnessError;

/// Rank-condition retries before collection gives up.
pub const MAX_COLLECTION_ATTEMPTS: usize = 100;
const MAX_REJECTIONS: usize = 10_000;

/// `Ax + Bu + w`.
pub fn simulate_plant(plant: &Plant, x: &Array1<f64>, u: &Array1<f64>, w: &Array1<f64>) -> Array1<f64> {
    plant.a.dot(x) + plant.b.dot(u) + w
}

/// Uniform sample of a bounded polytope by rejection from its bounding box.
pub fn sample_polytope<R: Rng + ?Sized>(p: &HPolytope, rng: &mut R) -> Result<Array1<f64>, HarnessError> {
    let (lo, hi) = p.bounding_box()?;
    sample_box_in(&lo, &hi, p, rng)
}

fn sample_box_in<R: Rng + ?Sized>(lo: &Array1<f64>, hi: &Array1<f64>, p: &HPolytope, rng: &mut R) -> Result<Array1<f64>, HarnessError> {
    for _ in 0..MAX_REJECTIONS {
        let x: Array1<f64> = lo.iter().zip(hi.iter()).map(|(&l, &h)| if l < h { rng.gen_range(l..=h) } else { l }).collect();
        if p.contains_point(x.view(), 0.0)? {
            return Ok(x);
        }
    }
    Err(HarnessError::Pipeline {
        stage: "sampling",
        message: "rejection sampling found no point in the set".into(),
    })
}

pub fn sample_disturbance<R: Rng + ?Sized>(w: &Zonotope, mode: DisturbanceMode, rng: &mut R) -> Array1<f64> {
    match mode {
        DisturbanceMode::Uniform => w.sample(rng),
        DisturbanceMode::Vertex => w.sample_vertex(rng),
        DisturbanceMode::Zero => w.center().clone(),
    }
}

/// `N_t` trajectories of `N_s` steps under uniform excitation over `U` and
/// uniform disturbances over `W`, redrawn until the data matrix has full
/// row rank.
pub fn collect_trajectories<R: Rng + ?Sized>(plant: &Plant, data: &DataConfig, rng: &mut R) -> Result<Vec<Trajectory>, HarnessError> {
    let lo = Array1::from(data.initial_lo.clone());
    let hi = Array1::from(data.initial_hi.clone());
    for attempt in 1..=MAX_COLLECTION_ATTEMPTS {
        let mut trajs = Vec::with_capacity(data.trajectories);
        for _ in 0..data.trajectories {
            let mut xs = vec![sample_box_in(&lo, &hi, &plant.x, rng)?];
            let mut us = Vec::with_capacity(data.samples);
            for _ in 0..data.samples {
                let u = sample_polytope(&plant.u, rng)?;
                let w = plant.w.sample(rng);
                let next = simulate_plant(plant, xs.last().expect("nonempty"), &u, &w);
                us.push(u);
                xs.push(next);
            }
            trajs.push(Trajectory::from_samples(&xs, &us)?);
        }
        if check_rank(&assemble_data(&trajs)?) {
            if attempt > 1 {
                log::info!("rank condition met after {attempt} attempts");
            }
            return Ok(trajs);
        }
    }
    Err(HarnessError::Pipeline {
        stage: "collect",
        message: format!("rank condition not met in {MAX_COLLECTION_ATTEMPTS} attempts"),
    })
}
