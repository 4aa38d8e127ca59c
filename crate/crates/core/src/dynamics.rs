//! Constraint-preserving symplectic time integration.
//!
//! Curved systems use RATTLE on the quadric constraint: the position-stage
//! Lagrange multiplier is a scalar solved by Newton with analytic derivative,
//! the velocity-stage multiplier is linear and solved exactly. Flat systems
//! use Stormer-Verlet, with an exact magnetic rotation inserted for the
//! monopole extension (s != 0).

use crate::error::{Error, Result};
use crate::geometry::{AmbientPoint, PhasePoint, SpaceSpec};
use crate::linalg;
use crate::potentials::SystemSpec;
use crate::real::Real;

#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig<T: Real> {
    pub dt: T,
    pub n_steps: usize,
    /// Tolerance of the position-stage Newton solve, relative to `R0^2`.
    pub newton_tol: T,
    pub newton_max_iter: usize,
    /// Record a sample every this many steps (the initial and final states
    /// are always recorded).
    pub record_every: usize,
}

impl<T: Real> IntegratorConfig<T> {
    pub fn new(dt: T, n_steps: usize) -> Result<Self> {
        let cfg = IntegratorConfig {
            dt,
            n_steps,
            newton_tol: T::of(1e-12),
            newton_max_iter: 50,
            record_every: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }

    pub fn with_newton(mut self, tol: T, max_iter: usize) -> Self {
        self.newton_tol = tol;
        self.newton_max_iter = max_iter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) {
            return Err(Error::Invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.newton_tol > T::zero()) {
            return Err(Error::Invalid("newton_tol must be > 0".into()));
        }
        Ok(())
    }
}

/// One recorded state with its diagnostics.
#[derive(Debug, Clone)]
pub struct Sample<T: Real> {
    pub t: T,
    pub ph: PhasePoint<T>,
    pub energy: T,
    pub surface_res: T,
    pub tangency_res: T,
}

/// Time-ordered samples of a constrained trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub samples: Vec<Sample<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn initial_energy(&self) -> T {
        self.samples[0].energy
    }

    pub fn max_energy_drift(&self) -> (T, T) {
        let e0 = self.initial_energy();
        let abs = self
            .samples
            .iter()
            .map(|s| (s.energy - e0).abs())
            .fold(T::zero(), T::max);
        (abs, abs / e0.abs().max(T::of(1e-30)))
    }

    pub fn max_surface_residual(&self) -> T {
        self.samples
            .iter()
            .map(|s| s.surface_res)
            .fold(T::zero(), T::max)
    }

    pub fn max_tangency_residual(&self) -> T {
        self.samples
            .iter()
            .map(|s| s.tangency_res)
            .fold(T::zero(), T::max)
    }
}

/// Ambient force `F = -eta grad V` at `q`.
fn force<T: Real>(system: &SystemSpec<T>, space: &SpaceSpec<T>, q: &AmbientPoint<T>) -> Result<Vec<T>> {
    let g = system.gradient_curved(q)?;
    let d = space.dim;
    let mut f: Vec<T> = g.iter().map(|&v| -v).collect();
    f[d] = -space.epsilon() * g[d];
    Ok(f)
}

/// One RATTLE step on the quadric.
pub fn step_constrained<T: Real>(
    system: &SystemSpec<T>,
    ph: &PhasePoint<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<PhasePoint<T>> {
    let space = system.space()?;
    let f0 = force(system, space, &ph.q)?;
    step_constrained_cached(system, space, ph, &f0, cfg).map(|(ph, _)| ph)
}

/// RATTLE step reusing the force at the current point; returns the force at
/// the new point for the next step.
fn step_constrained_cached<T: Real>(
    system: &SystemSpec<T>,
    space: &SpaceSpec<T>,
    ph: &PhasePoint<T>,
    f0: &[T],
    cfg: &IntegratorConfig<T>,
) -> Result<(PhasePoint<T>, Vec<T>)> {
    let h = cfg.dt;
    let half_h = T::half() * h;
    let d = space.dim;
    let eps = space.epsilon();
    let r0_sq = space.r0 * space.r0;

    let xv = ph.q.ambient();
    let pv = ph.momentum_ambient();

    // Position stage: X' = A - (h^2/2) Lambda X with g(X') = 0, Newton in Lambda.
    let kappa = half_h * h;
    let mut a = vec![T::zero(); d + 1];
    for i in 0..=d {
        a[i] = xv[i] + h * pv[i] + half_h * h * f0[i];
    }
    let mut lambda = T::zero();
    let tol = cfg.newton_tol * r0_sq;
    let mut residual = T::zero();
    let mut converged = false;
    for _ in 0..cfg.newton_max_iter {
        let xn = linalg::add_scaled(&a, -kappa * lambda, &xv);
        residual = space.metric_dot(&xn, &xn) - eps * r0_sq;
        if residual.abs() <= tol {
            converged = true;
            break;
        }
        let dphi = -T::two() * kappa * space.metric_dot(&xn, &xv);
        if dphi == T::zero() {
            break;
        }
        lambda -= residual / dphi;
    }
    if !converged {
        return Err(Error::NewtonDivergence {
            residual: residual.as_f64(),
            iters: cfg.newton_max_iter,
        });
    }
    let xn = linalg::add_scaled(&a, -kappa * lambda, &xv);
    let qn = AmbientPoint {
        x: xn[..d].to_vec(),
        x0: xn[d],
    };
    if qn.x0 <= T::zero() {
        return Err(Error::NewtonDivergence {
            residual: qn.x0.as_f64(),
            iters: 0,
        });
    }

    // Velocity stage: linear multiplier restoring <X', P'> = 0.
    let fn_ = force(system, space, &qn)?;
    let mut w = vec![T::zero(); d + 1];
    for i in 0..=d {
        w[i] = pv[i] + half_h * (f0[i] - lambda * xv[i]) + half_h * fn_[i];
    }
    let lam_v = space.metric_dot(&xn, &w) / (half_h * eps * r0_sq);
    let pn = linalg::add_scaled(&w, -half_h * lam_v, &xn);

    Ok((
        PhasePoint {
            q: qn,
            p: pn[..d].to_vec(),
            p0: pn[d],
        },
        fn_,
    ))
}

/// Integrate a curved system, recording diagnostics.
pub fn simulate<T: Real>(
    system: &SystemSpec<T>,
    ph0: &PhasePoint<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<Trajectory<T>> {
    cfg.validate()?;
    let space = system.space()?;
    let mut samples = Vec::with_capacity(cfg.n_steps / cfg.record_every + 2);
    let record = |samples: &mut Vec<Sample<T>>, k: usize, ph: &PhasePoint<T>| -> Result<()> {
        samples.push(Sample {
            t: T::from_usize(k).unwrap() * cfg.dt,
            ph: ph.clone(),
            energy: system.hamiltonian(ph)?,
            surface_res: space.surface_residual(&ph.q),
            tangency_res: space.tangency_residual(ph),
        });
        Ok(())
    };
    let mut ph = ph0.clone();
    record(&mut samples, 0, &ph)?;
    let mut f = force(system, space, &ph.q).map_err(|e| e.at_step(0))?;
    for k in 0..cfg.n_steps {
        let (next, fnext) =
            step_constrained_cached(system, space, &ph, &f, cfg).map_err(|e| e.at_step(k))?;
        ph = next;
        f = fnext;
        if (k + 1) % cfg.record_every == 0 || k + 1 == cfg.n_steps {
            record(&mut samples, k + 1, &ph).map_err(|e| e.at_step(k))?;
        }
    }
    Ok(Trajectory { samples })
}

/// Flat-trajectory sample.
#[derive(Debug, Clone)]
pub struct FlatSample<T: Real> {
    pub t: T,
    pub x: Vec<T>,
    pub p: Vec<T>,
    pub energy: T,
}

#[derive(Debug, Clone)]
pub struct FlatTrajectory<T: Real> {
    pub samples: Vec<FlatSample<T>>,
}

impl<T: Real> FlatTrajectory<T> {
    pub fn initial_energy(&self) -> T {
        self.samples[0].energy
    }

    pub fn max_energy_drift(&self) -> (T, T) {
        let e0 = self.initial_energy();
        let abs = self
            .samples
            .iter()
            .map(|s| (s.energy - e0).abs())
            .fold(T::zero(), T::max);
        (abs, abs / e0.abs().max(T::of(1e-30)))
    }
}

/// One flat step: Stormer-Verlet, with an exact rotation around the monopole
/// field inserted at the midpoint when the system carries `s != 0` (d = 3).
/// The stored momentum is the kinetic momentum.
pub fn step_flat<T: Real>(
    system: &SystemSpec<T>,
    x: &[T],
    p: &[T],
    cfg: &IntegratorConfig<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let h = cfg.dt;
    let half_h = T::half() * h;
    let s = system.monopole_charge();
    if s == T::zero() {
        let g = system.gradient_flat(x)?;
        let p_half = linalg::add_scaled(p, -half_h, &g);
        let xn = linalg::add_scaled(x, h, &p_half);
        let gn = system.gradient_flat(&xn)?;
        let pn = linalg::add_scaled(&p_half, -half_h, &gn);
        Ok((xn, pn))
    } else {
        if x.len() != 3 {
            return Err(Error::Unsupported(
                "monopole dynamics requires d = 3".into(),
            ));
        }
        // kick - half drift - rotate - half drift - kick
        let g = system.gradient_flat(x)?;
        let mut v = linalg::add_scaled(p, -half_h, &g);
        let x_mid = linalg::add_scaled(x, half_h, &v);
        v = rotate_monopole(&x_mid, &v, s, h)?;
        let xn = linalg::add_scaled(&x_mid, half_h, &v);
        let gn = system.gradient_flat(&xn)?;
        let pn = linalg::add_scaled(&v, -half_h, &gn);
        Ok((xn, pn))
    }
}

/// Exact Rodrigues rotation of `v` by the monopole field `B = s x/|x|^3`
/// over time `h` (|v| is preserved).
fn rotate_monopole<T: Real>(x: &[T], v: &[T], s: T, h: T) -> Result<Vec<T>> {
    let r = linalg::norm(x);
    if r <= T::of(crate::potentials::R_FLOOR_FLAT) {
        return Err(Error::OriginSingularity {
            r: r.as_f64(),
            floor: crate::potentials::R_FLOOR_FLAT,
        });
    }
    let b_mag = s / (r * r);
    let angle = -b_mag * h; // vdot = v x B rotates v about B by -|B| h
    let axis: Vec<T> = x.iter().map(|&xi| xi / r).collect();
    let (sin_a, cos_a) = angle.sin_cos();
    let k_cross_v = linalg::cross3(&axis, v);
    let k_dot_v = linalg::dot(&axis, v);
    let mut out = vec![T::zero(); 3];
    for i in 0..3 {
        out[i] = v[i] * cos_a + k_cross_v[i] * sin_a + axis[i] * k_dot_v * (T::one() - cos_a);
    }
    Ok(out)
}

pub fn simulate_flat<T: Real>(
    system: &SystemSpec<T>,
    x0: &[T],
    p0: &[T],
    cfg: &IntegratorConfig<T>,
) -> Result<FlatTrajectory<T>> {
    cfg.validate()?;
    if x0.len() != system.dim() || p0.len() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            got: x0.len(),
        });
    }
    let mut samples = Vec::with_capacity(cfg.n_steps / cfg.record_every + 2);
    let mut x = x0.to_vec();
    let mut p = p0.to_vec();
    let record = |samples: &mut Vec<FlatSample<T>>, k: usize, x: &[T], p: &[T]| -> Result<()> {
        samples.push(FlatSample {
            t: T::from_usize(k).unwrap() * cfg.dt,
            x: x.to_vec(),
            p: p.to_vec(),
            energy: system.hamiltonian_flat(x, p)?,
        });
        Ok(())
    };
    record(&mut samples, 0, &x, &p)?;
    for k in 0..cfg.n_steps {
        let (xn, pn) = step_flat(system, &x, &p, cfg).map_err(|e| e.at_step(k))?;
        x = xn;
        p = pn;
        if (k + 1) % cfg.record_every == 0 || k + 1 == cfg.n_steps {
            record(&mut samples, k + 1, &x, &p).map_err(|e| e.at_step(k))?;
        }
    }
    Ok(FlatTrajectory { samples })
}

/// A detected phase-space return.
#[derive(Debug, Clone, Copy)]
pub struct ReturnEvent<T: Real> {
    pub time: T,
    pub distance: T,
}

/// Scaled phase distance between two curved phase points:
/// `sqrt(|dX|^2/pos_scale^2 + |dP|^2/mom_scale^2)` in ambient coordinates.
pub fn phase_distance<T: Real>(
    a: &PhasePoint<T>,
    b: &PhasePoint<T>,
    pos_scale: T,
    mom_scale: T,
) -> T {
    let dx = linalg::sub(&a.q.ambient(), &b.q.ambient());
    let dp = linalg::sub(&a.momentum_ambient(), &b.momentum_ambient());
    (linalg::norm_sq(&dx) / (pos_scale * pos_scale) + linalg::norm_sq(&dp) / (mom_scale * mom_scale))
        .sqrt()
}

pub fn flat_phase_distance<T: Real>(
    xa: &[T],
    pa: &[T],
    xb: &[T],
    pb: &[T],
    pos_scale: T,
    mom_scale: T,
) -> T {
    let dx = linalg::sub(xa, xb);
    let dp = linalg::sub(pa, pb);
    (linalg::norm_sq(&dx) / (pos_scale * pos_scale) + linalg::norm_sq(&dp) / (mom_scale * mom_scale))
        .sqrt()
}

/// Earliest `t > t_min` where the distance series has a local minimum below
/// `threshold`. The minimum is refined by quadratic interpolation of the
/// three bracketing samples.
pub fn find_first_return<T: Real>(
    series: &[(T, T)],
    t_min: T,
    threshold: T,
) -> Result<ReturnEvent<T>> {
    let mut best = T::infinity();
    let mut best_t = T::zero();
    for i in 1..series.len().saturating_sub(1) {
        let (t, d) = series[i];
        if d < best {
            best = d;
            best_t = t;
        }
        if t <= t_min {
            continue;
        }
        let dm = series[i - 1].1;
        let dp = series[i + 1].1;
        if d <= dm && d <= dp && d < threshold {
            // quadratic refinement around the minimum
            let tm = series[i - 1].0;
            let tp = series[i + 1].0;
            let denom = (dm - T::two() * d + dp).max(T::of(1e-300));
            let mut shift = T::half() * (dm - dp) / denom;
            let hw = T::half() * (tp - tm);
            if shift.abs() > T::one() {
                shift = T::zero();
            }
            let t_ref = t + shift * hw;
            let d_ref = d - T::of(0.25) * (dm - dp) * shift;
            return Ok(ReturnEvent {
                time: t_ref,
                distance: d_ref,
            });
        }
    }
    Err(Error::NoReturnFound {
        threshold: threshold.as_f64(),
        best: best.as_f64(),
        at: best_t.as_f64(),
    })
}

/// Scan a curved trajectory for the earliest return to its initial point.
pub fn find_period_return<T: Real>(
    traj: &Trajectory<T>,
    space: &SpaceSpec<T>,
    t_min: T,
    threshold: T,
) -> Result<ReturnEvent<T>> {
    let ph0 = &traj.samples[0].ph;
    let mom_scale = linalg::norm(&ph0.momentum_ambient()).max(T::of(1e-9));
    let series: Vec<(T, T)> = traj
        .samples
        .iter()
        .map(|s| (s.t, phase_distance(&s.ph, ph0, space.r0, mom_scale)))
        .collect();
    find_first_return(&series, t_min, threshold)
}

pub fn find_period_return_flat<T: Real>(
    traj: &FlatTrajectory<T>,
    t_min: T,
    threshold: T,
) -> Result<ReturnEvent<T>> {
    let s0 = &traj.samples[0];
    let pos_scale = linalg::norm(&s0.x).max(T::one());
    let mom_scale = linalg::norm(&s0.p).max(T::of(1e-9));
    let series: Vec<(T, T)> = traj
        .samples
        .iter()
        .map(|s| {
            (
                s.t,
                flat_phase_distance(&s.x, &s.p, &s0.x, &s0.p, pos_scale, mom_scale),
            )
        })
        .collect();
    find_first_return(&series, t_min, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::PotentialTerm;
    use approx::assert_relative_eq;

    fn higgs_system(eps: crate::geometry::Curvature) -> SystemSpec<f64> {
        let space = SpaceSpec::new(eps, 2, 1.0).unwrap();
        SystemSpec::curved(space, vec![PotentialTerm::curved_higgs(1.0)]).unwrap()
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let sys = higgs_system(crate::geometry::Curvature::Sphere);
        let space = sys.space().unwrap();
        let q = space.lift_to_surface(&[0.0, 0.0]).unwrap();
        let ph = PhasePoint::new(space, q, vec![0.0, 0.0], 0.0).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 1).unwrap();
        let next = step_constrained(&sys, &ph, &cfg).unwrap();
        for (a, b) in next.q.ambient().iter().zip(ph.q.ambient()) {
            assert!((a - b).abs() <= 1e-14);
        }
        for (a, b) in next.momentum_ambient().iter().zip(ph.momentum_ambient()) {
            assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn free_particle_great_circle() {
        for curv in [
            crate::geometry::Curvature::Sphere,
            crate::geometry::Curvature::Pseudosphere,
        ] {
            let space = SpaceSpec::new(curv, 2, 1.0).unwrap();
            let sys = SystemSpec::curved(space.clone(), vec![]).unwrap();
            let ph = PhasePoint::from_spatial(&space, &[0.3, -0.1], &[0.2, 0.5]).unwrap();
            let cfg = IntegratorConfig::new(1e-3, 5000).unwrap().with_record_every(50);
            let traj = simulate(&sys, &ph, &cfg).unwrap();
            // speed stays exactly constant (up to round-off accumulation)
            let (_, rel) = traj.max_energy_drift();
            assert!(rel < 1e-12, "speed drift {rel}");
            assert!(traj.max_surface_residual() < 1e-12);
            assert!(traj.max_tangency_residual() < 1e-12);
        }
        // planarity on the sphere: motion stays in span(X0, P0)
        let space = SpaceSpec::sphere(2, 1.0).unwrap();
        let sys = SystemSpec::curved(space.clone(), vec![]).unwrap();
        let ph = PhasePoint::from_spatial(&space, &[0.3, -0.1], &[0.2, 0.5]).unwrap();
        let n = linalg::cross3(&ph.q.ambient(), &ph.momentum_ambient());
        let cfg = IntegratorConfig::new(1e-3, 2000).unwrap().with_record_every(100);
        let traj = simulate(&sys, &ph, &cfg).unwrap();
        for s in &traj.samples {
            assert!(linalg::dot(&s.ph.q.ambient(), &n).abs() < 1e-12);
        }
    }

    #[test]
    fn reversibility() {
        let sys = higgs_system(crate::geometry::Curvature::Sphere);
        let space = sys.space().unwrap();
        let ph0 = PhasePoint::from_spatial(space, &[0.4, 0.1], &[0.3, 0.2]).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 1000).unwrap();
        let fwd = simulate(&sys, &ph0, &cfg).unwrap();
        let end = fwd.samples.last().unwrap().ph.clone();
        let flipped = PhasePoint {
            q: end.q.clone(),
            p: end.p.iter().map(|v| -v).collect(),
            p0: -end.p0,
        };
        let back = simulate(&sys, &flipped, &cfg).unwrap();
        let ret = back.samples.last().unwrap().ph.clone();
        let unflipped = PhasePoint {
            q: ret.q.clone(),
            p: ret.p.iter().map(|v| -v).collect(),
            p0: -ret.p0,
        };
        let dist = phase_distance(&unflipped, &ph0, 1.0, 1.0);
        assert!(dist < 1e-10, "reversibility distance {dist}");
    }

    #[test]
    fn simulate_zero_steps_single_sample() {
        let sys = higgs_system(crate::geometry::Curvature::Sphere);
        let space = sys.space().unwrap();
        let ph = PhasePoint::from_spatial(space, &[0.2, 0.0], &[0.0, 0.3]).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 0).unwrap();
        let traj = simulate(&sys, &ph, &cfg).unwrap();
        assert_eq!(traj.samples.len(), 1);
    }

    #[test]
    fn flat_free_particle_exact_drift() {
        let sys = SystemSpec::flat(2, vec![]).unwrap();
        let cfg = IntegratorConfig::new(0.25, 1).unwrap();
        let (x, p) = step_flat(&sys, &[1.0, 2.0], &[0.5, -0.25], &cfg).unwrap();
        assert_eq!(x, vec![1.125, 1.9375]);
        assert_eq!(p, vec![0.5, -0.25]);
    }

    #[test]
    fn flat_oscillator_period_return() {
        let sys = SystemSpec::flat(2, vec![PotentialTerm::flat_oscillator(1.0)]).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 7000).unwrap();
        let traj = simulate_flat(&sys, &[1.0, 0.0], &[0.0, 0.4], &cfg).unwrap();
        let ev = find_period_return_flat(&traj, 1.0, 1e-3).unwrap();
        assert_relative_eq!(ev.time, 2.0 * std::f64::consts::PI, epsilon = 1e-3);
        assert!(ev.distance <= 1e-5, "return distance {}", ev.distance);
    }

    #[test]
    fn flat_kepler_circular_radius_stays_bounded() {
        // Second-order shadow dynamics displaces the circular orbit by
        // O(dt^2); at dt = 1e-3 the radius stays within ~1e-6 of r = 1.
        let sys = SystemSpec::flat(2, vec![PotentialTerm::flat_kepler(1.0)]).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 10_000).unwrap().with_record_every(10);
        let traj = simulate_flat(&sys, &[1.0, 0.0], &[0.0, 1.0], &cfg).unwrap();
        let max_dev = traj
            .samples
            .iter()
            .map(|s| (linalg::norm(&s.x) - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(max_dev <= 1e-6, "radius deviation {max_dev}");
        // angular momentum is exact for the central force
        let l0 = traj.samples[0].x[0] * traj.samples[0].p[1]
            - traj.samples[0].x[1] * traj.samples[0].p[0];
        for s in &traj.samples {
            let l = s.x[0] * s.p[1] - s.x[1] * s.p[0];
            assert!((l - l0).abs() < 1e-13);
        }
    }

    #[test]
    fn monopole_rotation_preserves_speed() {
        let sys = SystemSpec::flat(
            3,
            vec![
                PotentialTerm::flat_kepler(1.0),
                PotentialTerm::monopole_centrifugal(0.25),
            ],
        )
        .unwrap();
        let cfg = IntegratorConfig::new(1e-3, 20_000).unwrap().with_record_every(100);
        let traj = simulate_flat(&sys, &[1.0, 0.0, 0.1], &[0.0, 0.9, 0.05], &cfg).unwrap();
        let (_, rel) = traj.max_energy_drift();
        assert!(rel < 1e-5, "monopole energy drift {rel}");
    }

    #[test]
    fn second_order_convergence() {
        let sys = higgs_system(crate::geometry::Curvature::Sphere);
        let space = sys.space().unwrap();
        let ph = PhasePoint::from_spatial(space, &[0.4, 0.0], &[0.1, 0.45]).unwrap();
        let drift_at = |dt: f64, n: usize| {
            let cfg = IntegratorConfig::new(dt, n).unwrap().with_record_every(10);
            let traj = simulate(&sys, &ph, &cfg).unwrap();
            traj.max_energy_drift().1
        };
        let d1 = drift_at(2e-3, 5000);
        let d2 = drift_at(1e-3, 10000);
        let ratio = d1 / d2;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "convergence ratio {ratio} (drifts {d1}, {d2})"
        );
    }
}
