//! Data matrices and the set of models consistent with noisy data.
//!
//! For trajectories of `x⁺ = A x + B u + w` with `w ∈ W`, every `[A B]`
//! that could have produced the data lies in
//!
//! ```text
//!   M_AB = (X₊ − M_w) · [X₋; U₋]†
//! ```
//!
//! where `M_w` is the matrix zonotope of all noise sequences.

use std::io::{Read, Write};

use ndarray::{concatenate, s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::linalg::rank;
use crate::optim::right_pinv;
use crate::setgeom::{matrix_zonotope_vertices, MatrixZonotope, VertexModels, Zonotope, DEFAULT_VERTEX_CAP};
use crate::{Error, Real, Result};

/// Relative pivot threshold for the persistency-of-excitation check.
pub const RANK_TOL: f64 = 1e-10;

/// Default generator budget before sign enumeration (`2^8` vertex models).
pub const DEFAULT_MAX_GENERATORS: usize = 8;

/// One recorded run: `N_s` inputs and the `N_s + 1` states they connect.
/// Samples are stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    states: Array2<T>,
    inputs: Array2<T>,
}

impl<T: Real> Trajectory<T> {
    /// `states` is `n × (N_s+1)`, `inputs` is `m × N_s`.
    pub fn new(states: Array2<T>, inputs: Array2<T>) -> Result<Self> {
        if states.ncols() != inputs.ncols() + 1 {
            return Err(Error::InvalidArgument(format!(
                "trajectory has {} states for {} inputs; expected one more state than inputs",
                states.ncols(),
                inputs.ncols()
            )));
        }
        if inputs.ncols() == 0 || states.nrows() == 0 || inputs.nrows() == 0 {
            return Err(Error::InvalidArgument("trajectory needs at least one step".into()));
        }
        if !crate::linalg::is_finite(states.iter().chain(inputs.iter())) {
            return Err(Error::NonFinite("trajectory"));
        }
        Ok(Self { states, inputs })
    }

    pub fn from_samples(states: &[Array1<T>], inputs: &[Array1<T>]) -> Result<Self> {
        let stack = |v: &[Array1<T>]| -> Result<Array2<T>> {
            let views: Vec<_> = v.iter().map(|x| x.view().insert_axis(Axis(1))).collect();
            if views.is_empty() {
                return Err(Error::InvalidArgument("trajectory needs at least one step".into()));
            }
            concatenate(Axis(1), &views).map_err(|_| Error::Data("ragged trajectory samples".into()))
        };
        Self::new(stack(states)?, stack(inputs)?)
    }

    pub fn states(&self) -> &Array2<T> {
        &self.states
    }

    pub fn inputs(&self) -> &Array2<T> {
        &self.inputs
    }

    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state_dim(&self) -> usize {
        self.states.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrices<T> {
    pub x_minus: Array2<T>,
    pub x_plus: Array2<T>,
    pub u_minus: Array2<T>,
}

impl<T: Real> DataMatrices<T> {
    /// Total number of samples `T`.
    pub fn num_samples(&self) -> usize {
        self.x_minus.ncols()
    }

    pub fn state_dim(&self) -> usize {
        self.x_minus.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.u_minus.nrows()
    }

    /// `[X₋; U₋]`, `(n+m) × T`.
    pub fn regressor(&self) -> Array2<T> {
        concatenate![Axis(0), self.x_minus, self.u_minus]
    }
}

/// Stacks the trajectories one after another, time ascending.
pub fn assemble_data<T: Real>(trajs: &[Trajectory<T>]) -> Result<DataMatrices<T>> {
    let first = trajs
        .first()
        .ok_or_else(|| Error::InvalidArgument("no trajectories".into()))?;
    let (n, m) = (first.state_dim(), first.input_dim());
    if trajs.iter().any(|t| t.state_dim() != n || t.input_dim() != m) {
        return Err(Error::Data("trajectories have different state or input dimensions".into()));
    }
    let xm: Vec<_> = trajs.iter().map(|t| t.states.slice(s![.., ..-1])).collect();
    let xp: Vec<_> = trajs.iter().map(|t| t.states.slice(s![.., 1..])).collect();
    let um: Vec<_> = trajs.iter().map(|t| t.inputs.view()).collect();
    Ok(DataMatrices {
        x_minus: concatenate(Axis(1), &xm).expect("consistent rows"),
        x_plus: concatenate(Axis(1), &xp).expect("consistent rows"),
        u_minus: concatenate(Axis(1), &um).expect("consistent rows"),
    })
}

/// Persistency of excitation: `[X₋; U₋]` has full row rank `n + m`.
pub fn check_rank<T: Real>(d: &DataMatrices<T>) -> bool {
    let k = d.state_dim() + d.input_dim();
    d.num_samples() >= k && rank(d.regressor().view(), T::lit(RANK_TOL)) == k
}

/// `M_w`: all `n × T` noise sequences whose columns lie in `W`.
///
/// Generator `i·T + t` carries the `i`-th generator of `W` in column `t`.
pub fn build_noise_matrix_zonotope<T: Real>(w: &Zonotope<T>, t: usize) -> Result<MatrixZonotope<T>> {
    if t == 0 {
        return Err(Error::InvalidArgument("noise horizon must be at least 1".into()));
    }
    let n = w.dim();
    let center = Array2::from_shape_fn((n, t), |(r, _)| w.center()[r]);
    let mut gens = Vec::with_capacity(w.num_generators() * t);
    for g in w.generators().columns() {
        for k in 0..t {
            let mut m = Array2::zeros((n, t));
            m.column_mut(k).assign(&g);
            gens.push(m);
        }
    }
    MatrixZonotope::new(center, gens)
}

/// Matrix zonotope of models consistent with the data, plus where it came
/// from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ModelSet<T> {
    pub mz: MatrixZonotope<T>,
    pub disturbance: Zonotope<T>,
    pub reduced: bool,
    /// Generator count before any order reduction.
    pub original_generators: usize,
}

impl<T: Real> ModelSet<T> {
    pub fn state_dim(&self) -> usize {
        self.mz.shape().0
    }

    pub fn input_dim(&self) -> usize {
        self.mz.shape().1 - self.mz.shape().0
    }

    /// Over-approximating order reduction; a larger model set only makes
    /// the ROSC sets smaller, so inner approximations stay sound.
    pub fn reduce(&self, target: usize) -> Result<Self> {
        if self.mz.num_generators() <= target {
            return Ok(self.clone());
        }
        Ok(Self {
            mz: self.mz.reduce_order(target)?,
            disturbance: self.disturbance.clone(),
            reduced: true,
            original_generators: self.original_generators,
        })
    }
}

pub fn compute_model_set<T: Real>(d: &DataMatrices<T>, w: &Zonotope<T>) -> Result<ModelSet<T>> {
    let n = d.state_dim();
    crate::error::check_dim("disturbance dimension", n, w.dim())?;
    let pinv = right_pinv(&d.regressor())?;
    let t = d.num_samples();
    let center = (&d.x_plus - &w.center().view().insert_axis(Axis(1))).dot(&pinv);
    // A generator with the single nonzero column g at time k maps to the
    // outer product g ⊗ pinv[k, :].
    let mut gens = Vec::with_capacity(w.num_generators() * t);
    for g in w.generators().columns() {
        for k in 0..t {
            let row = pinv.row(k);
            gens.push(Array2::from_shape_fn((n, pinv.ncols()), |(r, c)| g[r] * row[c]));
        }
    }
    let original_generators = gens.len();
    Ok(ModelSet {
        mz: MatrixZonotope::new(center, gens)?,
        disturbance: w.clone(),
        reduced: false,
        original_generators,
    })
}

/// Whether `ab = [A B]` is consistent with the data, up to `tol` in the
/// entrywise residual.
pub fn model_set_contains<T: Real>(ms: &ModelSet<T>, ab: &Array2<T>, tol: T) -> Result<bool> {
    ms.mz.contains(ab, tol)
}

/// Reduces to at most `max_generators` (plus boxed entries) and
/// sign-enumerates the result.
pub fn extract_vertex_models<T: Real>(ms: &ModelSet<T>, max_generators: usize) -> Result<VertexModels<T>> {
    let reduced = ms.reduce(max_generators)?;
    matrix_zonotope_vertices(&reduced.mz, DEFAULT_VERTEX_CAP.max(max_generators))
}

/// Writes trajectories as CSV with header `t,x_1..x_n,u_1..u_m,traj_id`.
/// The terminal state row of each trajectory leaves the `u` fields empty.
pub fn write_trajectories_csv<T: Real, W: Write>(trajs: &[Trajectory<T>], out: W) -> Result<()> {
    let first = trajs
        .first()
        .ok_or_else(|| Error::InvalidArgument("no trajectories".into()))?;
    let (n, m) = (first.state_dim(), first.input_dim());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=m).map(|i| format!("u_{i}")));
    header.push("traj_id".into());
    w.write_record(&header).map_err(csv_err)?;
    for (id, tr) in trajs.iter().enumerate() {
        if tr.state_dim() != n || tr.input_dim() != m {
            return Err(Error::Data("trajectories have different dimensions".into()));
        }
        for k in 0..=tr.len() {
            let mut rec = vec![k.to_string()];
            rec.extend(tr.states.column(k).iter().map(|v| v.to_string()));
            if k < tr.len() {
                rec.extend(tr.inputs.column(k).iter().map(|v| v.to_string()));
            } else {
                rec.extend(std::iter::repeat_n(String::new(), m));
            }
            rec.push(id.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

pub fn read_trajectories_csv<T: Real, R: Read>(input: R) -> Result<Vec<Trajectory<T>>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    let n = header.iter().filter(|h| h.starts_with("x_")).count();
    let m = header.iter().filter(|h| h.starts_with("u_")).count();
    if header.len() != n + m + 2 || header.get(0) != Some("t") || header.get(n + m + 1) != Some("traj_id") {
        return Err(Error::Data("trajectory CSV header must be t,x_1..x_n,u_1..u_m,traj_id".into()));
    }
    let parse = |s: &str| -> Result<T> {
        s.trim()
            .parse::<f64>()
            .map(T::lit)
            .map_err(|_| Error::Data(format!("bad number {s:?} in trajectory CSV")))
    };

    // (trajectory id, states, inputs) of the trajectory being read
    type Pending<T> = Option<(String, Vec<Array1<T>>, Vec<Array1<T>>)>;
    let mut out = Vec::new();
    let mut cur: Pending<T> = None;
    let mut finish = |c: Pending<T>| -> Result<()> {
        if let Some((_, xs, us)) = c {
            out.push(Trajectory::from_samples(&xs, &us)?);
        }
        Ok(())
    };
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let id = rec[n + m + 1].to_string();
        if cur.as_ref().is_none_or(|(cid, _, _)| *cid != id) {
            finish(cur.take())?;
            cur = Some((id, Vec::new(), Vec::new()));
        }
        let (_, xs, us) = cur.as_mut().expect("set above");
        let x: Array1<T> = (1..=n).map(|i| parse(&rec[i])).collect::<Result<_>>()?;
        xs.push(x);
        if rec[n + 1].trim().is_empty() {
            continue;
        }
        if xs.len() != us.len() + 1 {
            return Err(Error::Data("input row after the terminal state of a trajectory".into()));
        }
        let u: Array1<T> = (n + 1..=n + m).map(|i| parse(&rec[i])).collect::<Result<_>>()?;
        us.push(u);
    }
    finish(cur.take())?;
    if out.is_empty() {
        return Err(Error::Data("trajectory CSV has no rows".into()));
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn short() -> Trajectory<f64> {
        Trajectory::new(array![[0.0, 1.0, 2.0], [0.5, 1.5, 2.5]], array![[10.0, 11.0]]).unwrap()
    }

    #[test]
    fn single_trajectory_matrices() {
        let d = assemble_data(&[short()]).unwrap();
        assert_eq!(d.num_samples(), 2);
        assert_eq!(d.x_minus, array![[0.0, 1.0], [0.5, 1.5]]);
        assert_eq!(d.x_plus, array![[1.0, 2.0], [1.5, 2.5]]);
        assert_eq!(d.u_minus, array![[10.0, 11.0]]);
    }

    #[test]
    fn malformed_trajectories() {
        assert!(Trajectory::new(array![[0.0, 1.0]], array![[1.0, 2.0]]).is_err());
        assert!(assemble_data::<f64>(&[]).is_err());
        let other = Trajectory::new(array![[0.0, 1.0]], array![[1.0]]).unwrap();
        assert!(assemble_data(&[short(), other]).is_err());
    }

    #[test]
    fn rank_cases() {
        // T = 2 < n + m = 3
        assert!(!check_rank(&assemble_data(&[short()]).unwrap()));
        let dup = Trajectory::new(Array2::from_elem((2, 6), 1.0), Array2::from_elem((1, 5), 1.0)).unwrap();
        assert!(!check_rank(&assemble_data(&[dup]).unwrap()));
    }

    #[test]
    fn noise_layout() {
        let w = Zonotope::new(array![0.0], array![[0.3]]).unwrap();
        let mw = build_noise_matrix_zonotope(&w, 2).unwrap();
        assert_eq!(mw.generators(), &[array![[0.3, 0.0]], array![[0.0, 0.3]]]);
        assert_eq!(mw.center(), &array![[0.0, 0.0]]);
        assert!(build_noise_matrix_zonotope(&w, 0).is_err());
    }

    #[test]
    fn model_set_and_vertices() {
        // x⁺ = 0.5x + u, exactly recorded; W = Z(0, 0.01)
        let tr = Trajectory::<f64>::new(array![[1.0, 0.5, 1.25, 0.625]], array![[0.0, 1.0, 0.0]]).unwrap();
        let d = assemble_data(&[tr]).unwrap();
        assert!(check_rank(&d));
        let w = Zonotope::new(array![0.0], array![[0.01]]).unwrap();
        let ms = compute_model_set(&d, &w).unwrap();
        assert_eq!(ms.original_generators, 3);
        assert!((ms.mz.center() - &array![[0.5, 1.0]]).iter().all(|v| v.abs() < 1e-12));
        assert!(model_set_contains(&ms, &array![[0.5, 1.0]], 1e-9).unwrap());
        assert!(!model_set_contains(&ms, &array![[0.6, 1.0]], 1e-9).unwrap());

        let vm = extract_vertex_models(&ms, 8).unwrap();
        assert_eq!(vm.len(), 8);
        let point = ModelSet { mz: MatrixZonotope::new(array![[0.5, 1.0]], vec![]).unwrap(), ..ms };
        let vm = extract_vertex_models(&point, 8).unwrap();
        assert_eq!(vm.vertices(), &[(array![[0.5]], array![[1.0]])]);
    }

    #[test]
    fn csv_round_trip() {
        let trajs = vec![short(), Trajectory::new(array![[0.1, 0.2], [0.3, 1.0 / 3.0]], array![[-2.5]]).unwrap()];
        let mut buf = Vec::new();
        write_trajectories_csv(&trajs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x_1,x_2,u_1,traj_id\n0,0,0.5,10,0\n"));
        assert!(text.contains("\n2,2,2.5,,0\n"));
        let back: Vec<Trajectory<f64>> = read_trajectories_csv(buf.as_slice()).unwrap();
        assert_eq!(back, trajs);
        assert!(read_trajectories_csv::<f64, _>("a,b\n1,2\n".as_bytes()).is_err());
    }
}
