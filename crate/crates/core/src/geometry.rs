//! Ambient-space representation of the sphere and pseudosphere.
//!
//! Both surfaces are the quadric `eps * x.x + x0^2 = R0^2` inside R^{d+1},
//! with `eps = +1` (sphere) or `eps = -1` (upper sheet of the two-sheet
//! hyperboloid). All pairings use the ambient metric
//! `eta = diag(1, ..., 1, eps)`, which makes the constraint read
//! `<X, X>_eta = eps * R0^2` and induces a positive-definite metric on the
//! surface for either sign.
//!
//! Phase points carry the velocity-form momentum `P = Xdot`, so the tangency
//! constraint is `<X, P>_eta = 0` and the kinetic energy is
//! `<P, P>_eta / 2`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::linalg;
use crate::real::Real;

/// Sign of the ambient curvature term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    /// `eps = +1`: sphere.
    Sphere,
    /// `eps = -1`: pseudosphere (upper hyperboloid sheet, `x0 >= R0`).
    Pseudosphere,
}

impl Curvature {
    pub fn sign<T: Real>(self) -> T {
        match self {
            Curvature::Sphere => T::one(),
            Curvature::Pseudosphere => -T::one(),
        }
    }

    pub fn from_sign(s: i8) -> Result<Self> {
        match s {
            1 => Ok(Curvature::Sphere),
            -1 => Ok(Curvature::Pseudosphere),
            other => Err(Error::Invalid(format!(
                "curvature sign must be +1 or -1, got {other}"
            ))),
        }
    }
}

/// The quadric surface: curvature sign, spatial dimension and radius.
#[derive(Debug, Clone)]
pub struct SpaceSpec<T: Real> {
    pub curvature: Curvature,
    pub dim: usize,
    pub r0: T,
    /// Relative constraint tolerance used when validating points.
    pub ctol: T,
}

pub const DEFAULT_CTOL: f64 = 1e-10;

impl<T: Real> SpaceSpec<T> {
    pub fn new(curvature: Curvature, dim: usize, r0: T) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Invalid(format!("dimension must be >= 2, got {dim}")));
        }
        if !(r0 > T::zero()) {
            return Err(Error::Invalid(format!("radius must be > 0, got {r0}")));
        }
        Ok(SpaceSpec {
            curvature,
            dim,
            r0,
            ctol: T::of(DEFAULT_CTOL),
        })
    }

    pub fn with_ctol(mut self, ctol: T) -> Self {
        self.ctol = ctol;
        self
    }

    pub fn sphere(dim: usize, r0: T) -> Result<Self> {
        Self::new(Curvature::Sphere, dim, r0)
    }

    pub fn pseudosphere(dim: usize, r0: T) -> Result<Self> {
        Self::new(Curvature::Pseudosphere, dim, r0)
    }

    pub fn epsilon(&self) -> T {
        self.curvature.sign()
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim + 1
    }

    /// Pairing `a.b (spatial) + eps * a0 * b0` for ambient vectors ordered as
    /// (spatial components..., 0-component).
    pub fn metric_dot(&self, a: &[T], b: &[T]) -> T {
        debug_assert_eq!(a.len(), self.ambient_dim());
        debug_assert_eq!(b.len(), self.ambient_dim());
        let d = self.dim;
        linalg::dot(&a[..d], &b[..d]) + self.epsilon() * a[d] * b[d]
    }

    /// Lift spatial coordinates onto the surface: `x0 = sqrt(R0^2 - eps x.x)`.
    ///
    /// For the sphere the spatial point must lie strictly inside the north
    /// chart `x.x < R0^2`.
    pub fn lift_to_surface(&self, x: &[T]) -> Result<AmbientPoint<T>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let xx = linalg::norm_sq(x);
        let r0_sq = self.r0 * self.r0;
        let arg = r0_sq - self.epsilon() * xx;
        if arg <= T::zero() {
            return Err(Error::ChartViolation {
                norm2: xx.as_f64(),
                r0_sq: r0_sq.as_f64(),
            });
        }
        Ok(AmbientPoint {
            x: x.to_vec(),
            x0: arg.sqrt(),
        })
    }

    /// Remove the eta-normal component: `v - (<X,v> / <X,X>) X`.
    pub fn tangent_project(&self, q: &AmbientPoint<T>, v: &[T]) -> Vec<T> {
        let xv = q.ambient();
        let num = self.metric_dot(&xv, v);
        let den = self.epsilon() * self.r0 * self.r0;
        linalg::add_scaled(v, -num / den, &xv)
    }

    /// `|eps x.x + x0^2 - R0^2|`.
    pub fn surface_residual(&self, q: &AmbientPoint<T>) -> T {
        (self.epsilon() * linalg::norm_sq(&q.x) + q.x0 * q.x0 - self.r0 * self.r0).abs()
    }

    /// `|x.p + eps x0 p0|`.
    pub fn tangency_residual(&self, ph: &PhasePoint<T>) -> T {
        (linalg::dot(&ph.q.x, &ph.p) + self.epsilon() * ph.q.x0 * ph.p0).abs()
    }

    /// Scale used for the tangency tolerance: `max(1, |p| R0)`.
    pub fn tangency_scale(&self, ph: &PhasePoint<T>) -> T {
        T::one().max(linalg::norm(&ph.p) * self.r0)
    }
}

/// A point of the ambient space lying on the quadric.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientPoint<T: Real> {
    pub x: Vec<T>,
    pub x0: T,
}

impl<T: Real> AmbientPoint<T> {
    /// Validating constructor.
    pub fn new(space: &SpaceSpec<T>, x: Vec<T>, x0: T) -> Result<Self> {
        if x.len() != space.dim {
            return Err(Error::DimensionMismatch {
                expected: space.dim,
                got: x.len(),
            });
        }
        let q = AmbientPoint { x, x0 };
        let res = space.surface_residual(&q);
        let tol = space.ctol * space.r0 * space.r0;
        if res > tol {
            return Err(Error::Invalid(format!(
                "point off the surface: residual {:.3e} > {:.3e}",
                res.as_f64(),
                tol.as_f64()
            )));
        }
        if space.curvature == Curvature::Pseudosphere && q.x0 < space.r0 * (T::one() - space.ctol)
        {
            return Err(Error::Invalid(
                "pseudosphere point below the upper sheet (x0 < R0)".into(),
            ));
        }
        Ok(q)
    }

    /// Coordinates as one ambient vector (spatial..., x0).
    pub fn ambient(&self) -> Vec<T> {
        let mut v = self.x.clone();
        v.push(self.x0);
        v
    }
}

/// Position/momentum pair on the constrained phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint<T: Real> {
    pub q: AmbientPoint<T>,
    pub p: Vec<T>,
    pub p0: T,
}

impl<T: Real> PhasePoint<T> {
    /// Validating constructor (surface + tangency).
    pub fn new(space: &SpaceSpec<T>, q: AmbientPoint<T>, p: Vec<T>, p0: T) -> Result<Self> {
        if p.len() != space.dim {
            return Err(Error::DimensionMismatch {
                expected: space.dim,
                got: p.len(),
            });
        }
        let ph = PhasePoint { q, p, p0 };
        let res = space.tangency_residual(&ph);
        let tol = space.ctol * space.tangency_scale(&ph);
        if res > tol {
            return Err(Error::Invalid(format!(
                "momentum not tangent: residual {:.3e} > {:.3e}",
                res.as_f64(),
                tol.as_f64()
            )));
        }
        Ok(ph)
    }

    /// Lift spatial data: `x0` from the surface equation, `p0` from tangency
    /// (`p0 = -(x.p)/(eps x0)`).
    pub fn from_spatial(space: &SpaceSpec<T>, x: &[T], p: &[T]) -> Result<Self> {
        let q = space.lift_to_surface(x)?;
        if p.len() != space.dim {
            return Err(Error::DimensionMismatch {
                expected: space.dim,
                got: p.len(),
            });
        }
        let p0 = -linalg::dot(&q.x, p) / (space.epsilon() * q.x0);
        Ok(PhasePoint {
            q,
            p: p.to_vec(),
            p0,
        })
    }

    pub fn momentum_ambient(&self) -> Vec<T> {
        let mut v = self.p.clone();
        v.push(self.p0);
        v
    }

    /// Kinetic energy `<P, P>_eta / 2`.
    pub fn kinetic(&self, space: &SpaceSpec<T>) -> T {
        let pv = self.momentum_ambient();
        T::half() * space.metric_dot(&pv, &pv)
    }
}

/// Default fraction of `R0` bounding the random-position chart cap.
pub const DEFAULT_CHART_CAP: f64 = 0.5;

/// Deterministic random phase point: position uniform in the spatial ball of
/// radius `cap * R0`, Gaussian ambient momentum tangent-projected.
pub fn random_phase_point_capped<T: Real>(
    space: &SpaceSpec<T>,
    seed: u64,
    momentum_scale: T,
    cap: T,
) -> PhasePoint<T> {
    assert!(momentum_scale > T::zero(), "momentum_scale must be > 0");
    assert!(
        cap > T::zero() && (space.curvature == Curvature::Pseudosphere || cap < T::one()),
        "chart cap must be in (0, 1) on the sphere"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = space.dim;
    let unit = Uniform::new(0.0f64, 1.0f64);

    // Direction from normalized Gaussians, radius ~ U^(1/d) for ball uniformity.
    let dir: Vec<f64> = (0..d)
        .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let radius = unit.sample(&mut rng).powf(1.0 / d as f64);
    let x: Vec<T> = dir
        .iter()
        .map(|&v| cap * space.r0 * T::of(v / dn * radius))
        .collect();
    let q = space
        .lift_to_surface(&x)
        .expect("capped point is inside the chart");

    let raw: Vec<T> = (0..=d)
        .map(|_| {
            momentum_scale
                * T::of(<StandardNormal as Distribution<f64>>::sample(
                    &StandardNormal,
                    &mut rng,
                ))
        })
        .collect();
    let tangent = space.tangent_project(&q, &raw);
    let (p, p0) = (tangent[..d].to_vec(), tangent[d]);
    PhasePoint { q, p, p0 }
}

/// [`random_phase_point_capped`] with the default chart cap.
pub fn random_phase_point<T: Real>(
    space: &SpaceSpec<T>,
    seed: u64,
    momentum_scale: T,
) -> PhasePoint<T> {
    random_phase_point_capped(space, seed, momentum_scale, T::of(DEFAULT_CHART_CAP))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn s2() -> SpaceSpec<f64> {
        SpaceSpec::sphere(2, 1.0).unwrap()
    }

    fn h2() -> SpaceSpec<f64> {
        SpaceSpec::pseudosphere(2, 1.0).unwrap()
    }

    #[test]
    fn metric_dot_unit_zero_axis() {
        let a = vec![0.0, 0.0, 1.0];
        assert_eq!(s2().metric_dot(&a, &a), 1.0);
        assert_eq!(h2().metric_dot(&a, &a), -1.0);
    }

    #[test]
    fn metric_dot_signature_hand_value() {
        // (3, 0, 4) paired with itself on the pseudosphere: 9 - 16 = -7
        let sp = SpaceSpec::<f64>::pseudosphere(2, 1.0).unwrap();
        let a = vec![3.0, 0.0, 4.0];
        assert_eq!(sp.metric_dot(&a, &a), -7.0);
    }

    #[test]
    fn lift_345_triples() {
        let q = s2().lift_to_surface(&[0.6, 0.0]).unwrap();
        assert_relative_eq!(q.x0, 0.8, max_relative = 1e-15);
        let q = h2().lift_to_surface(&[0.75, 0.0]).unwrap();
        assert_relative_eq!(q.x0, 1.25, max_relative = 1e-15);
    }

    #[test]
    fn lift_pole() {
        let q = s2().lift_to_surface(&[0.0, 0.0]).unwrap();
        assert_eq!(q.x0, 1.0);
    }

    #[test]
    fn lift_outside_chart_fails() {
        assert!(matches!(
            s2().lift_to_surface(&[1.1, 0.0]),
            Err(Error::ChartViolation { .. })
        ));
        // any spatial point lifts on the pseudosphere
        assert!(h2().lift_to_surface(&[10.0, -3.0]).is_ok());
    }

    #[test]
    fn tangent_project_annihilates_normal() {
        for sp in [s2(), h2()] {
            let q = sp.lift_to_surface(&[0.3, -0.4]).unwrap();
            let out = sp.tangent_project(&q, &q.ambient());
            assert!(linalg::norm(&out) < 1e-14);
        }
    }

    #[test]
    fn tangent_project_pole_hand_value() {
        let sp = s2();
        let q = sp.lift_to_surface(&[0.0, 0.0]).unwrap();
        let out = sp.tangent_project(&q, &[1.0, 0.0, 1.0]);
        assert_eq!(out, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn tangent_project_idempotent() {
        for sp in [s2(), h2()] {
            let q = sp.lift_to_surface(&[0.5, 0.2]).unwrap();
            let v = vec![0.3, -1.2, 0.7];
            let once = sp.tangent_project(&q, &v);
            let twice = sp.tangent_project(&q, &once);
            for (a, b) in once.iter().zip(&twice) {
                assert_relative_eq!(a, b, max_relative = 1e-14, epsilon = 1e-16);
            }
        }
    }

    #[test]
    fn random_phase_point_deterministic_and_valid() {
        for sp in [s2(), h2()] {
            let a = random_phase_point(&sp, 42, 0.5);
            let b = random_phase_point(&sp, 42, 0.5);
            assert_eq!(a, b);
            assert!(sp.surface_residual(&a.q) <= 1e-12 * sp.r0 * sp.r0);
            assert!(sp.tangency_residual(&a) <= 1e-12 * sp.tangency_scale(&a));
            let c = random_phase_point(&sp, 43, 0.5);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn from_spatial_satisfies_tangency() {
        for sp in [s2(), h2()] {
            let ph = PhasePoint::from_spatial(&sp, &[0.3, 0.1], &[0.4, -0.9]).unwrap();
            assert!(sp.tangency_residual(&ph) <= 1e-15);
        }
    }

    #[test]
    fn dimension_and_radius_validation() {
        assert!(SpaceSpec::<f64>::sphere(1, 1.0).is_err());
        assert!(SpaceSpec::<f64>::sphere(2, 0.0).is_err());
        assert!(SpaceSpec::<f64>::sphere(2, -1.0).is_err());
    }
}
