//! Straight-flow filtering: state interpolation, the coupled velocity
//! stack, distance scaling, and the Euler integrator.
//!
//! One filtering pass runs `K` velocity modules in order, `N` times, for
//! `T = K * N` sub-steps; each sub-step moves the patch by `(d / T)` times
//! the current module's velocity, where `d` is the scalar the distance net
//! inferred on the pass entry state. High-noise inputs repeat the whole
//! pass, re-evaluating `d` on each pass's (less noisy) entry state.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::geometry::{
    bounding_sphere, extract_patch_indexed, farthest_point_sample, stitch_assignments,
    Patch, PointCloud, SpatialIndex, KNN_INDEX_THRESHOLD,
};
use crate::nn::{decode_nets, encode_nets, ModelBundle, Net};
use crate::vec3;
use crate::Result;

/// Default number of coupled velocity modules.
pub const DEFAULT_COUPLINGS: usize = 2;
/// Default number of Euler passes over the stack.
pub const DEFAULT_EULER_STEPS: usize = 3;
/// Default whole-pipeline repetitions (raise to 2-3 for 2-3% noise).
pub const DEFAULT_REPEATS: usize = 1;
/// Default patch size.
pub const DEFAULT_PATCH_K: usize = 256;
/// Patch seeds are chosen so the total patch capacity is this multiple of
/// the cloud size; overlapping patches keep every point covered.
pub const COVERAGE_FACTOR: f64 = 3.0;

/// Ordered list of coupled velocity modules.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityStack {
    modules: Vec<Net>,
}

impl VelocityStack {
    /// Validates that every module maps `n x 3` points to `n x 3` velocities.
    pub fn new(modules: Vec<Net>) -> Result<Self> {
        if modules.is_empty() {
            return Err(Error::InvalidConfig(
                "velocity stack needs at least one module".into(),
            ));
        }
        for m in &modules {
            if m.in_width() != 3 || m.out_width() != 3 {
                return Err(Error::ShapeMismatch(
                    "velocity modules map 3-wide points to 3-wide velocities".into(),
                ));
            }
        }
        Ok(VelocityStack { modules })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.modules.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    #[inline]
    pub fn modules(&self) -> &[Net] {
        &self.modules
    }

    #[inline]
    pub fn module(&self, k: usize) -> &Net {
        &self.modules[k]
    }
}

/// Integrator configuration. `total_steps` per pass is `couplings *
/// euler_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterConfig {
    pub couplings: usize,
    pub euler_steps: usize,
    pub repeats: usize,
    pub patch_k: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            couplings: DEFAULT_COUPLINGS,
            euler_steps: DEFAULT_EULER_STEPS,
            repeats: DEFAULT_REPEATS,
            patch_k: DEFAULT_PATCH_K,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.couplings == 0 {
            return Err(Error::InvalidConfig("couplings must be at least 1".into()));
        }
        if self.euler_steps == 0 {
            return Err(Error::InvalidConfig("euler steps must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        if self.patch_k < 8 {
            return Err(Error::InvalidConfig("patch size must be at least 8".into()));
        }
        Ok(())
    }

    /// `T`, the number of sub-steps in one pass.
    #[inline]
    pub fn total_steps(&self) -> usize {
        self.couplings * self.euler_steps
    }
}

/// Ordered patch-state snapshots, one per Euler sub-step plus the initial
/// state, all in the normalized patch frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<[f64; 3]>>,
    /// Nominal fractional times, `i / (T * repeats)`.
    pub step_times: Vec<f64>,
}

/// Element-wise `(1 - t) * x0 + t * x1`.
pub fn interpolate(x0: &[[f64; 3]], x1: &[[f64; 3]], t: f64) -> Result<Vec<[f64; 3]>> {
    if x0.len() != x1.len() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "interpolation endpoints hold {} and {} points",
            x0.len(),
            x1.len()
        )));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeOutOfRange(t));
    }
    let a = 1.0 - t;
    Ok(x0
        .iter()
        .zip(x1)
        .map(|(&p0, &p1)| {
            [
                a * p0[0] + t * p1[0],
                a * p0[1] + t * p1[1],
                a * p0[2] + t * p1[2],
            ]
        })
        .collect())
}

/// Velocity module forward pass: displacement per unit time in the
/// normalized patch frame.
pub fn velocity_forward(net: &Net, state: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
    let (out, _) = net.forward(state)?;
    Ok(out.to_points())
}

/// Distance module forward pass: a scalar strictly inside `(0, 1)`.
pub fn distance_forward(net: &Net, state: &[[f64; 3]]) -> Result<f64> {
    let (out, _) = net.forward(state)?;
    if out.rows() != 1 || out.cols() != 1 {
        return Err(Error::ShapeMismatch(
            "distance net must produce a single scalar".into(),
        ));
    }
    Ok(out.get(0, 0))
}

/// One sub-step: `state + (d / total_steps) * v_k(state)`.
///
/// With `d = 1` this is the unscaled coupled Euler update.
pub fn coupled_step(
    stack: &VelocityStack,
    state: &[[f64; 3]],
    k: usize,
    total_steps: usize,
    d: f64,
) -> Result<Vec<[f64; 3]>> {
    if k >= stack.len() {
        return Err(Error::IndexOutOfBounds {
            index: k,
            len: stack.len(),
        });
    }
    if total_steps == 0 {
        return Err(Error::InvalidConfig("total steps must be at least 1".into()));
    }
    if !(d > 0.0 && d <= 1.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "distance scalar {d} outside (0, 1]"
        )));
    }
    let v = velocity_forward(stack.module(k), state)?;
    let h = d / total_steps as f64;
    Ok(state
        .iter()
        .zip(&v)
        .map(|(&p, &vi)| vec3::add(p, vec3::scale(vi, h)))
        .collect())
}

enum DistanceSource<'a> {
    Net(&'a Net),
    Fixed(f64),
}

fn integrate(
    stack: &VelocityStack,
    d_source: DistanceSource<'_>,
    patch: &Patch,
    config: &FilterConfig,
) -> Result<(Patch, Trajectory)> {
    config.validate()?;
    if stack.len() != config.couplings {
        return Err(Error::InvalidConfig(alloc::format!(
            "stack holds {} modules but config couples {}",
            stack.len(),
            config.couplings
        )));
    }
    let t_steps = config.total_steps();
    let denom = (t_steps * config.repeats) as f64;
    let mut state = patch.points().to_vec();
    let mut states = Vec::with_capacity(t_steps * config.repeats + 1);
    states.push(state.clone());

    for _ in 0..config.repeats {
        let d = match d_source {
            DistanceSource::Net(dm) => distance_forward(dm, &state)?,
            DistanceSource::Fixed(v) => v,
        };
        let h = d / t_steps as f64;
        for _ in 0..config.euler_steps {
            for k in 0..config.couplings {
                let v = velocity_forward(stack.module(k), &state)?;
                for (p, vi) in state.iter_mut().zip(&v) {
                    *p = vec3::add(*p, vec3::scale(*vi, h));
                }
                states.push(state.clone());
            }
        }
    }

    let step_times = (0..states.len()).map(|i| i as f64 / denom).collect();
    let filtered = patch.with_points(state)?;
    Ok((
        filtered,
        Trajectory {
            states,
            step_times,
        },
    ))
}

/// Filters one normalized patch with distance scaling, returning the final
/// patch and the full trajectory.
pub fn filter_patch(
    stack: &VelocityStack,
    dm: &Net,
    patch: &Patch,
    config: &FilterConfig,
) -> Result<(Patch, Trajectory)> {
    integrate(stack, DistanceSource::Net(dm), patch, config)
}

/// [`filter_patch`] without a distance net (`d = 1`), i.e. the plain
/// coupled Euler scheme. Useful for trajectory diagnostics.
pub fn filter_patch_unscaled(
    stack: &VelocityStack,
    patch: &Patch,
    config: &FilterConfig,
) -> Result<(Patch, Trajectory)> {
    integrate(stack, DistanceSource::Fixed(1.0), patch, config)
}

/// Recombines a trajectory through the summed full-update form:
/// `final = initial + sum over sub-steps of (d_pass / T) * v_k(state)`,
/// re-evaluating every velocity (and each pass's distance scalar) from the
/// recorded states. Agrees with the sequential result to within float
/// reassociation error.
pub fn summed_final(
    stack: &VelocityStack,
    dm: Option<&Net>,
    traj: &Trajectory,
    config: &FilterConfig,
) -> Result<Vec<[f64; 3]>> {
    config.validate()?;
    let t_steps = config.total_steps();
    let expected = t_steps * config.repeats + 1;
    if traj.states.len() != expected {
        return Err(Error::ShapeMismatch(alloc::format!(
            "trajectory has {} states, config implies {expected}",
            traj.states.len()
        )));
    }
    let n = traj.states[0].len();
    let mut total = vec![[0.0f64; 3]; n];
    for pass in 0..config.repeats {
        let entry = &traj.states[pass * t_steps];
        let d = match dm {
            Some(net) => distance_forward(net, entry)?,
            None => 1.0,
        };
        let h = d / t_steps as f64;
        for s in 0..t_steps {
            let k = s % config.couplings;
            let state = &traj.states[pass * t_steps + s];
            let v = velocity_forward(stack.module(k), state)?;
            for (acc, vi) in total.iter_mut().zip(&v) {
                *acc = vec3::add(*acc, vec3::scale(*vi, h));
            }
        }
    }
    Ok(traj.states[0]
        .iter()
        .zip(&total)
        .map(|(&p, &dsum)| vec3::add(p, dsum))
        .collect())
}

/// Mean path-length-to-chord ratio over points that moved.
///
/// Exactly 1 for perfectly straight per-point paths; points whose net
/// displacement is below `1e-12` are excluded. Errors when every point is
/// stationary.
pub fn straightness(traj: &Trajectory) -> Result<f64> {
    if traj.states.len() < 2 {
        return Err(Error::InvalidConfig(
            "straightness needs at least 2 trajectory states".into(),
        ));
    }
    let n = traj.states[0].len();
    let mut sum = 0.0;
    let mut included = 0usize;
    for i in 0..n {
        let start = traj.states[0][i];
        let end = traj.states[traj.states.len() - 1][i];
        let chord = vec3::dist(end, start);
        if chord <= 1e-12 {
            continue;
        }
        let mut path = 0.0;
        for w in traj.states.windows(2) {
            path += vec3::dist(w[1][i], w[0][i]);
        }
        // Mathematically path >= chord; guard the last-ulp case.
        sum += (path / chord).max(1.0);
        included += 1;
    }
    if included == 0 {
        return Err(Error::DegenerateTrajectory);
    }
    Ok(sum / included as f64)
}

/// Seeds and normalized patches covering the whole cloud.
///
/// Seed count is `ceil(|cloud| * COVERAGE_FACTOR / patch_k)` via farthest
/// point sampling from index 0; if overlap still leaves points uncovered,
/// extra patches are seeded at the lowest uncovered indices.
pub fn plan_patches(cloud: &PointCloud, patch_k: usize) -> Result<(Vec<usize>, Vec<Patch>)> {
    let n = cloud.len();
    if n < patch_k {
        return Err(Error::CloudTooSmall {
            points: n,
            patch_k,
        });
    }
    let index = (n > KNN_INDEX_THRESHOLD).then(|| SpatialIndex::build(cloud.points()));
    let m = (((n as f64) * COVERAGE_FACTOR / patch_k as f64).ceil() as usize).clamp(1, n);
    let mut seeds = farthest_point_sample(cloud, m, 0)?;
    let mut patches: Vec<Patch> = Vec::with_capacity(seeds.len());
    let mut covered = vec![false; n];
    for &s in &seeds {
        let patch = extract_patch_indexed(cloud, index.as_ref(), s, patch_k)?;
        for &i in patch.member_indices() {
            covered[i] = true;
        }
        patches.push(patch);
    }
    for i in 0..n {
        if !covered[i] {
            let patch = extract_patch_indexed(cloud, index.as_ref(), i, patch_k)?;
            for &j in patch.member_indices() {
                covered[j] = true;
            }
            seeds.push(i);
            patches.push(patch);
        }
    }
    Ok((seeds, patches))
}

/// Everything produced by one whole-cloud filtering run.
pub struct CloudFilterResult {
    pub cloud: PointCloud,
    pub seeds: Vec<usize>,
    pub patches: Vec<Patch>,
    pub trajectories: Vec<Trajectory>,
    /// Per cloud point: `(patch, slot)` its output position came from.
    pub assignments: Vec<(usize, usize)>,
}

/// Filters a whole cloud: farthest-point seeds, per-patch integration, and
/// nearest-seed stitching. Output point order and count match the input;
/// the result is deterministic and independent of patch processing order.
pub fn filter_cloud(
    stack: &VelocityStack,
    dm: &Net,
    cloud: &PointCloud,
    config: &FilterConfig,
) -> Result<PointCloud> {
    Ok(filter_cloud_detailed(stack, dm, cloud, config)?.cloud)
}

/// [`filter_cloud`] keeping patches, trajectories and point assignments.
pub fn filter_cloud_detailed(
    stack: &VelocityStack,
    dm: &Net,
    cloud: &PointCloud,
    config: &FilterConfig,
) -> Result<CloudFilterResult> {
    config.validate()?;
    let (seeds, patches) = plan_patches(cloud, config.patch_k)?;
    let mut filtered = Vec::with_capacity(patches.len());
    let mut trajectories = Vec::with_capacity(patches.len());
    for patch in &patches {
        let (f, traj) = filter_patch(stack, dm, patch, config)?;
        filtered.push(f);
        trajectories.push(traj);
    }
    let assignments = stitch_assignments(cloud, &seeds, &filtered)?;
    let points = assignments
        .iter()
        .map(|&(pi, slot)| filtered[pi].denormalize(filtered[pi].points()[slot]))
        .collect();
    Ok(CloudFilterResult {
        cloud: PointCloud::new(points)?,
        seeds,
        patches: filtered,
        trajectories,
        assignments,
    })
}

/// A velocity stack, an optional distance net, and the integrator defaults
/// baked into a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub stack: VelocityStack,
    pub distance: Option<Net>,
    pub euler_steps: usize,
    pub patch_k: usize,
}

impl Model {
    pub fn couplings(&self) -> usize {
        self.stack.len()
    }

    /// Total scalar parameter count across all nets.
    pub fn param_count(&self) -> usize {
        let stack: usize = self.stack.modules().iter().map(Net::param_count).sum();
        stack + self.distance.as_ref().map_or(0, Net::param_count)
    }

    /// Integrator configuration carried by the model, with the caller's
    /// repeat count.
    pub fn filter_config(&self, repeats: usize) -> FilterConfig {
        FilterConfig {
            couplings: self.couplings(),
            euler_steps: self.euler_steps,
            repeats,
            patch_k: self.patch_k,
        }
    }

    /// Serializes to the binary model format (`vm0..vmK-1` then `dm`).
    pub fn encode(&self) -> Vec<u8> {
        let mut nets: Vec<(alloc::string::String, Net)> = self
            .stack
            .modules()
            .iter()
            .enumerate()
            .map(|(i, m)| (alloc::format!("vm{i}"), m.clone()))
            .collect();
        if let Some(dm) = &self.distance {
            nets.push(("dm".into(), dm.clone()));
        }
        encode_nets(&ModelBundle {
            couplings: self.stack.len() as u32,
            euler_steps: self.euler_steps as u32,
            patch_k: self.patch_k as u32,
            nets,
        })
    }

    /// Parses the binary model format.
    pub fn decode(bytes: &[u8]) -> Result<Model> {
        let bundle = decode_nets(bytes)?;
        let k = bundle.couplings as usize;
        if k == 0 {
            return Err(Error::Malformed("model has zero couplings".into()));
        }
        if bundle.nets.len() != k && bundle.nets.len() != k + 1 {
            return Err(Error::Malformed(alloc::format!(
                "model declares {k} couplings but holds {} nets",
                bundle.nets.len()
            )));
        }
        let mut nets = bundle.nets.into_iter();
        let mut modules = Vec::with_capacity(k);
        for i in 0..k {
            let (name, net) = nets.next().expect("count checked");
            if name != alloc::format!("vm{i}") {
                return Err(Error::Malformed(alloc::format!(
                    "expected net vm{i}, found {name}"
                )));
            }
            modules.push(net);
        }
        let distance = match nets.next() {
            Some((name, net)) if name == "dm" => Some(net),
            Some((name, _)) => {
                return Err(Error::Malformed(alloc::format!(
                    "expected net dm, found {name}"
                )))
            }
            None => None,
        };
        let stack = VelocityStack::new(modules)
            .map_err(|e| Error::Malformed(alloc::format!("{e}")))?;
        if let Some(dm) = &distance {
            if dm.in_width() != 3 {
                return Err(Error::Malformed(
                    "distance net must consume 3-wide input".into(),
                ));
            }
        }
        Ok(Model {
            stack,
            distance,
            euler_steps: bundle.euler_steps as usize,
            patch_k: bundle.patch_k as usize,
        })
    }
}

/// Scale expressing a cloud-level noise fraction in a patch frame:
/// `sigma * cloud_bounding_radius / patch_scale`.
pub fn patch_frame_sigma(sigma_fraction: f64, cloud: &PointCloud, patch: &Patch) -> f64 {
    sigma_fraction * bounding_sphere(cloud).radius / patch.scale()
}

#[cfg(test)]
mod tests;
