//! Potential terms (curved and flat), their analytic ambient gradients, and
//! the system Hamiltonian.
//!
//! Curved terms are functions of the ambient coordinates `(x, x0)` evaluated
//! on the quadric; their gradients are the unprojected ambient gradients,
//! ordered `(d/dx..., d/dx0)`. Flat terms live on R^d.

use crate::error::{Error, Result};
use crate::geometry::{AmbientPoint, PhasePoint, SpaceSpec};
use crate::linalg;
use crate::real::Real;

/// Relative floor on `|x0|` below which the curved `1/x0` potentials refuse
/// to evaluate (approach to the sphere's equator).
pub const X0_FLOOR: f64 = 1e-9;
/// Relative floor on `|x|` for the curved Coulomb-type centers.
pub const R_FLOOR_CURVED: f64 = 1e-9;
/// Absolute floor on `|x|` for flat Coulomb-type centers.
pub const R_FLOOR_FLAT: f64 = 1e-12;

const T_SYM_TOL: f64 = 1e-12;
const T_INVOL_TOL: f64 = 1e-10;

/// Symmetric involutive anisotropy matrix: `T^2 = Id`, `T != Id`.
///
/// The unchecked constructor exists for negative-control experiments that
/// deliberately break the involution; such a matrix is marked exempt and
/// skips validation at evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub struct TMatrix<T: Real> {
    dim: usize,
    data: Vec<T>, // row-major dim x dim
    exempt: bool,
}

impl<T: Real> TMatrix<T> {
    pub fn new(dim: usize, data: Vec<T>) -> Result<Self> {
        let t = TMatrix {
            dim,
            data,
            exempt: false,
        };
        t.validate()?;
        Ok(t)
    }

    /// Skip validation; evaluation will not re-check this matrix.
    pub fn new_unchecked(dim: usize, data: Vec<T>) -> Self {
        TMatrix {
            dim,
            data,
            exempt: true,
        }
    }

    pub fn diag(entries: &[T]) -> Result<Self> {
        let dim = entries.len();
        let mut data = vec![T::zero(); dim * dim];
        for (i, &e) in entries.iter().enumerate() {
            data[i * dim + i] = e;
        }
        Self::new(dim, data)
    }

    pub fn diag_unchecked(entries: &[T]) -> Self {
        let dim = entries.len();
        let mut data = vec![T::zero(); dim * dim];
        for (i, &e) in entries.iter().enumerate() {
            data[i * dim + i] = e;
        }
        Self::new_unchecked(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_exempt(&self) -> bool {
        self.exempt
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    /// Check symmetry, involution `T^2 = Id` and nontriviality `T != Id`.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim;
        if self.data.len() != n * n {
            return Err(Error::InvalidT(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                self.data.len()
            )));
        }
        let mut asym = T::zero();
        for i in 0..n {
            for j in 0..n {
                asym = asym.max((self.entry(i, j) - self.entry(j, i)).abs());
            }
        }
        if asym > T::of(T_SYM_TOL) {
            return Err(Error::InvalidT(format!(
                "not symmetric: max |T - T'| = {:.3e}",
                asym.as_f64()
            )));
        }
        let mut invol = T::zero();
        let mut dist_id = T::zero();
        for i in 0..n {
            for j in 0..n {
                let mut s = T::zero();
                for k in 0..n {
                    s += self.entry(i, k) * self.entry(k, j);
                }
                let id = if i == j { T::one() } else { T::zero() };
                invol = invol.max((s - id).abs());
                dist_id = dist_id.max((self.entry(i, j) - id).abs());
            }
        }
        if invol > T::of(T_INVOL_TOL) {
            return Err(Error::InvalidT(format!(
                "involution broken: max |T^2 - Id| = {:.3e}",
                invol.as_f64()
            )));
        }
        if dist_id <= T::of(T_INVOL_TOL) {
            return Err(Error::InvalidT(
                "T = Id is excluded (trivial anisotropy)".into(),
            ));
        }
        Ok(())
    }

    fn check(&self) -> Result<()> {
        if self.exempt {
            Ok(())
        } else {
            self.validate()
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.entry(i, j) * x[j]).sum())
            .collect()
    }

    /// `x . T x`
    pub fn quad_form(&self, x: &[T]) -> T {
        linalg::dot(x, &self.mul_vec(x))
    }
}

/// Coupling constants shared by the potential terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Couplings<T: Real> {
    /// Base oscillator strength omega^2.
    pub omega2: T,
    /// Anisotropy strength Delta omega^2.
    pub d_omega2: T,
    /// Field strength epsilon_el.
    pub eps_el: T,
    /// Kepler coupling gamma.
    pub gamma: T,
    /// Monopole charge s (flat MICZ extension; 0 by default).
    pub s: T,
}

impl<T: Real> Default for Couplings<T> {
    fn default() -> Self {
        Couplings {
            omega2: T::zero(),
            d_omega2: T::zero(),
            eps_el: T::zero(),
            gamma: T::zero(),
            s: T::zero(),
        }
    }
}

impl<T: Real> Couplings<T> {
    pub fn validate(&self) -> Result<()> {
        if self.omega2 < T::zero() {
            return Err(Error::Invalid(format!(
                "omega2 must be >= 0, got {}",
                self.omega2
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TermKind {
    CurvedHiggs,
    CurvedAnisotropic,
    CurvedNonlinear,
    CurvedKepler,
    CurvedStark,
    CurvedCos,
    CurvedKeplerDeformed,
    FlatOscillator,
    FlatAnisotropic,
    FlatQuartic,
    FlatKepler,
    FlatLinear,
    FlatCos,
    MonopoleCentrifugal,
}

impl TermKind {
    pub fn is_curved(self) -> bool {
        matches!(
            self,
            TermKind::CurvedHiggs
                | TermKind::CurvedAnisotropic
                | TermKind::CurvedNonlinear
                | TermKind::CurvedKepler
                | TermKind::CurvedStark
                | TermKind::CurvedCos
                | TermKind::CurvedKeplerDeformed
        )
    }

    pub fn needs_t_matrix(self) -> bool {
        matches!(
            self,
            TermKind::CurvedAnisotropic
                | TermKind::CurvedNonlinear
                | TermKind::FlatAnisotropic
                | TermKind::FlatQuartic
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            TermKind::CurvedHiggs => "curved_higgs",
            TermKind::CurvedAnisotropic => "curved_anisotropic",
            TermKind::CurvedNonlinear => "curved_nonlinear",
            TermKind::CurvedKepler => "curved_kepler",
            TermKind::CurvedStark => "curved_stark",
            TermKind::CurvedCos => "curved_cos",
            TermKind::CurvedKeplerDeformed => "curved_kepler_deformed",
            TermKind::FlatOscillator => "flat_oscillator",
            TermKind::FlatAnisotropic => "flat_anisotropic",
            TermKind::FlatQuartic => "flat_quartic",
            TermKind::FlatKepler => "flat_kepler",
            TermKind::FlatLinear => "flat_linear",
            TermKind::FlatCos => "flat_cos",
            TermKind::MonopoleCentrifugal => "monopole_centrifugal",
        }
    }
}

/// One tagged potential term with its couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTerm<T: Real> {
    pub kind: TermKind,
    pub couplings: Couplings<T>,
    pub t: Option<TMatrix<T>>,
    /// Distinguished axis for Stark/cos-type terms, 0-based; defaults to the
    /// last spatial coordinate.
    pub axis: Option<usize>,
}

impl<T: Real> PotentialTerm<T> {
    pub fn new(kind: TermKind, couplings: Couplings<T>) -> Self {
        PotentialTerm {
            kind,
            couplings,
            t: None,
            axis: None,
        }
    }

    pub fn with_t(mut self, t: TMatrix<T>) -> Self {
        self.t = Some(t);
        self
    }

    pub fn with_axis(mut self, axis: usize) -> Self {
        self.axis = Some(axis);
        self
    }

    pub fn curved_higgs(omega2: T) -> Self {
        Self::new(
            TermKind::CurvedHiggs,
            Couplings {
                omega2,
                ..Couplings::default()
            },
        )
    }

    pub fn curved_anisotropic(d_omega2: T, t: TMatrix<T>) -> Self {
        Self::new(
            TermKind::CurvedAnisotropic,
            Couplings {
                d_omega2,
                ..Couplings::default()
            },
        )
        .with_t(t)
    }

    pub fn curved_nonlinear(eps_el: T, t: TMatrix<T>) -> Self {
        Self::new(
            TermKind::CurvedNonlinear,
            Couplings {
                eps_el,
                ..Couplings::default()
            },
        )
        .with_t(t)
    }

    pub fn curved_kepler(gamma: T) -> Self {
        Self::new(
            TermKind::CurvedKepler,
            Couplings {
                gamma,
                ..Couplings::default()
            },
        )
    }

    pub fn curved_stark(eps_el: T) -> Self {
        Self::new(
            TermKind::CurvedStark,
            Couplings {
                eps_el,
                ..Couplings::default()
            },
        )
    }

    pub fn curved_cos(d_omega2: T) -> Self {
        Self::new(
            TermKind::CurvedCos,
            Couplings {
                d_omega2,
                ..Couplings::default()
            },
        )
    }

    pub fn curved_kepler_deformed(d_omega2: T, eps_el: T) -> Self {
        Self::new(
            TermKind::CurvedKeplerDeformed,
            Couplings {
                d_omega2,
                eps_el,
                ..Couplings::default()
            },
        )
    }

    pub fn flat_oscillator(omega2: T) -> Self {
        Self::new(
            TermKind::FlatOscillator,
            Couplings {
                omega2,
                ..Couplings::default()
            },
        )
    }

    pub fn flat_anisotropic(d_omega2: T) -> Self {
        Self::new(
            TermKind::FlatAnisotropic,
            Couplings {
                d_omega2,
                ..Couplings::default()
            },
        )
    }

    pub fn flat_quartic(eps_el: T) -> Self {
        Self::new(
            TermKind::FlatQuartic,
            Couplings {
                eps_el,
                ..Couplings::default()
            },
        )
    }

    pub fn flat_kepler(gamma: T) -> Self {
        Self::new(
            TermKind::FlatKepler,
            Couplings {
                gamma,
                ..Couplings::default()
            },
        )
    }

    pub fn flat_linear(eps_el: T) -> Self {
        Self::new(
            TermKind::FlatLinear,
            Couplings {
                eps_el,
                ..Couplings::default()
            },
        )
    }

    pub fn flat_cos(d_omega2: T) -> Self {
        Self::new(
            TermKind::FlatCos,
            Couplings {
                d_omega2,
                ..Couplings::default()
            },
        )
    }

    pub fn monopole_centrifugal(s: T) -> Self {
        Self::new(
            TermKind::MonopoleCentrifugal,
            Couplings {
                s,
                ..Couplings::default()
            },
        )
    }

    fn axis_for(&self, dim: usize) -> usize {
        self.axis.unwrap_or(dim - 1)
    }

    fn t_matrix(&self) -> Result<&TMatrix<T>> {
        self.t
            .as_ref()
            .ok_or_else(|| Error::InvalidT(format!("{} requires a T matrix", self.kind.name())))
    }

    /// Value of a curved term at an on-surface point.
    pub fn value_curved(&self, space: &SpaceSpec<T>, q: &AmbientPoint<T>) -> Result<T> {
        let c = &self.couplings;
        match self.kind {
            TermKind::CurvedHiggs => v_curved_higgs(space, q, c),
            TermKind::CurvedAnisotropic => {
                let t = self.t_matrix()?;
                v_curved_anisotropic(space, q, c, t)
            }
            TermKind::CurvedNonlinear => {
                let t = self.t_matrix()?;
                v_curved_nonlinear(space, q, c, t)
            }
            TermKind::CurvedKepler => v_curved_kepler(space, q, c),
            TermKind::CurvedStark => Ok(v_curved_stark(space, q, c, self.axis_for(space.dim))),
            TermKind::CurvedCos => v_curved_cos(space, q, c, self.axis_for(space.dim)),
            TermKind::CurvedKeplerDeformed => {
                v_curved_kepler_deformed(space, q, c, self.axis_for(space.dim))
            }
            TermKind::MonopoleCentrifugal => {
                let r2 = linalg::norm_sq(&q.x);
                let floor = T::of(R_FLOOR_CURVED) * space.r0;
                if r2.sqrt() <= floor {
                    return Err(Error::OriginSingularity {
                        r: r2.sqrt().as_f64(),
                        floor: floor.as_f64(),
                    });
                }
                Ok(T::half() * c.s * c.s * q.x0 * q.x0 / (space.r0 * space.r0 * r2))
            }
            _ => Err(Error::Unsupported(format!(
                "{} is a flat term; evaluate it with value_flat",
                self.kind.name()
            ))),
        }
    }

    /// Ambient gradient `(d/dx..., d/dx0)` of a curved term (unprojected).
    pub fn gradient_curved(&self, space: &SpaceSpec<T>, q: &AmbientPoint<T>) -> Result<Vec<T>> {
        let c = &self.couplings;
        let d = space.dim;
        let x = &q.x;
        let x0 = q.x0;
        let r0 = space.r0;
        let mut g = vec![T::zero(); d + 1];
        match self.kind {
            TermKind::CurvedHiggs => {
                check_x0(space, q)?;
                let w2r2 = c.omega2 * r0 * r0;
                let x02 = x0 * x0;
                for i in 0..d {
                    g[i] = w2r2 * x[i] / x02;
                }
                g[d] = -w2r2 * linalg::norm_sq(x) / (x02 * x0);
            }
            TermKind::CurvedAnisotropic => {
                let t = self.t_matrix()?;
                t.check()?;
                let tx = t.mul_vec(x);
                for i in 0..d {
                    g[i] = c.d_omega2 * tx[i];
                }
            }
            TermKind::CurvedNonlinear => {
                let t = self.t_matrix()?;
                t.check()?;
                check_x0(space, q)?;
                let u = linalg::norm_sq(x);
                let tau = t.quad_form(x);
                let tx = t.mul_vec(x);
                let x02 = x0 * x0;
                let f = (r0 * r0 + x02) / (x02 * x02);
                let fp = -(T::of(4.0) * r0 * r0 + T::two() * x02) / (x02 * x02 * x0);
                let pref = c.eps_el * r0 * r0;
                for i in 0..d {
                    g[i] = pref * f * T::two() * (x[i] * tau + u * tx[i]);
                }
                g[d] = pref * fp * u * tau;
            }
            TermKind::CurvedKepler => {
                let r = check_r_curved(space, q)?;
                let pref = c.gamma / r0;
                for i in 0..d {
                    g[i] = pref * x0 * x[i] / (r * r * r);
                }
                g[d] = -pref / r;
            }
            TermKind::CurvedStark => {
                let a = self.axis_for(d);
                g[a] = c.eps_el * x0 / r0;
                g[d] = c.eps_el * x[a] / r0;
            }
            TermKind::CurvedCos => {
                let r = check_r_curved(space, q)?;
                let a = self.axis_for(d);
                let half_dw2 = T::half() * c.d_omega2;
                let r3 = r * r * r;
                for i in 0..d {
                    let delta = if i == a { T::one() } else { T::zero() };
                    g[i] = half_dw2 * (delta / r - x[a] * x[i] / r3);
                }
            }
            TermKind::CurvedKeplerDeformed => {
                let r = check_r_curved(space, q)?;
                let a = self.axis_for(d);
                let eps = space.epsilon();
                let half_dw2 = T::half() * c.d_omega2;
                let r3 = r * r * r;
                let r0_sq = r0 * r0;
                for i in 0..d {
                    let delta = if i == a { T::one() } else { T::zero() };
                    g[i] = half_dw2 * (delta / r - x[a] * x[i] / r3 + eps * x0 * delta / r0_sq)
                        + c.eps_el * x0 * delta / r0;
                }
                g[d] = half_dw2 * eps * x[a] / r0_sq + c.eps_el * x[a] / r0;
            }
            TermKind::MonopoleCentrifugal => {
                let r = check_r_curved(space, q)?;
                let r2 = r * r;
                let s2 = c.s * c.s;
                let r0_sq = r0 * r0;
                for i in 0..d {
                    g[i] = -s2 * x0 * x0 * x[i] / (r0_sq * r2 * r2);
                }
                g[d] = s2 * x0 / (r0_sq * r2);
            }
            _ => {
                return Err(Error::Unsupported(format!(
                    "{} is a flat term; use gradient_flat",
                    self.kind.name()
                )))
            }
        }
        Ok(g)
    }

    /// Value of a flat term at `x`.
    pub fn value_flat(&self, x: &[T]) -> Result<T> {
        let c = &self.couplings;
        let d = x.len();
        match self.kind {
            TermKind::FlatOscillator => Ok(T::half() * c.omega2 * linalg::norm_sq(x)),
            TermKind::FlatAnisotropic => {
                let p = half_dim(d)?;
                let mut s = T::zero();
                for i in 0..p {
                    s += x[i] * x[i] - x[i + p] * x[i + p];
                }
                Ok(T::half() * c.d_omega2 * s)
            }
            TermKind::FlatQuartic => {
                let p = half_dim(d)?;
                let mut s = T::zero();
                for i in 0..p {
                    s += x[i].powi(4) - x[i + p].powi(4);
                }
                Ok(-T::two() * c.eps_el * s)
            }
            TermKind::FlatKepler => {
                let r = check_r_flat(x)?;
                Ok(-c.gamma / r)
            }
            TermKind::FlatLinear => Ok(c.eps_el * x[self.axis_for(d)]),
            TermKind::FlatCos => {
                let r = check_r_flat(x)?;
                Ok(c.d_omega2 / T::of(4.0) * x[self.axis_for(d)] / r)
            }
            TermKind::MonopoleCentrifugal => {
                let r = check_r_flat(x)?;
                Ok(T::half() * c.s * c.s / (r * r))
            }
            _ => Err(Error::Unsupported(format!(
                "{} is a curved term; use value_curved",
                self.kind.name()
            ))),
        }
    }

    /// Gradient of a flat term.
    pub fn gradient_flat(&self, x: &[T]) -> Result<Vec<T>> {
        let c = &self.couplings;
        let d = x.len();
        let mut g = vec![T::zero(); d];
        match self.kind {
            TermKind::FlatOscillator => {
                for i in 0..d {
                    g[i] = c.omega2 * x[i];
                }
            }
            TermKind::FlatAnisotropic => {
                let p = half_dim(d)?;
                for i in 0..p {
                    g[i] = c.d_omega2 * x[i];
                    g[i + p] = -c.d_omega2 * x[i + p];
                }
            }
            TermKind::FlatQuartic => {
                let p = half_dim(d)?;
                let eight = T::of(8.0);
                for i in 0..p {
                    g[i] = -eight * c.eps_el * x[i] * x[i] * x[i];
                    g[i + p] = eight * c.eps_el * x[i + p] * x[i + p] * x[i + p];
                }
            }
            TermKind::FlatKepler => {
                let r = check_r_flat(x)?;
                let r3 = r * r * r;
                for i in 0..d {
                    g[i] = c.gamma * x[i] / r3;
                }
            }
            TermKind::FlatLinear => {
                g[self.axis_for(d)] = c.eps_el;
            }
            TermKind::FlatCos => {
                let r = check_r_flat(x)?;
                let a = self.axis_for(d);
                let quarter_dw2 = c.d_omega2 / T::of(4.0);
                let r3 = r * r * r;
                for i in 0..d {
                    let delta = if i == a { T::one() } else { T::zero() };
                    g[i] = quarter_dw2 * (delta / r - x[a] * x[i] / r3);
                }
            }
            TermKind::MonopoleCentrifugal => {
                let r = check_r_flat(x)?;
                let r4 = r * r * r * r;
                let s2 = c.s * c.s;
                for i in 0..d {
                    g[i] = -s2 * x[i] / r4;
                }
            }
            _ => {
                return Err(Error::Unsupported(format!(
                    "{} is a curved term; use gradient_curved",
                    self.kind.name()
                )))
            }
        }
        Ok(g)
    }
}

fn half_dim(d: usize) -> Result<usize> {
    if d % 2 != 0 {
        return Err(Error::Invalid(format!(
            "oscillator-side term needs an even dimension 2p, got {d}"
        )));
    }
    Ok(d / 2)
}

fn check_x0<T: Real>(space: &SpaceSpec<T>, q: &AmbientPoint<T>) -> Result<()> {
    let floor = T::of(X0_FLOOR) * space.r0;
    if q.x0.abs() <= floor {
        return Err(Error::EquatorSingularity {
            x0_abs: q.x0.abs().as_f64(),
            floor: floor.as_f64(),
        });
    }
    Ok(())
}

fn check_r_curved<T: Real>(space: &SpaceSpec<T>, q: &AmbientPoint<T>) -> Result<T> {
    let r = linalg::norm(&q.x);
    let floor = T::of(R_FLOOR_CURVED) * space.r0;
    if r <= floor {
        return Err(Error::OriginSingularity {
            r: r.as_f64(),
            floor: floor.as_f64(),
        });
    }
    Ok(r)
}

fn check_r_flat<T: Real>(x: &[T]) -> Result<T> {
    let r = linalg::norm(x);
    let floor = T::of(R_FLOOR_FLAT);
    if r <= floor {
        return Err(Error::OriginSingularity {
            r: r.as_f64(),
            floor: floor.as_f64(),
        });
    }
    Ok(r)
}

/// Higgs oscillator: `(omega^2 R0^2 / 2) x.x / x0^2`.
pub fn v_curved_higgs<T: Real>(
    space: &SpaceSpec<T>,
    q: &AmbientPoint<T>,
    c: &Couplings<T>,
) -> Result<T> {
    check_x0(space, q)?;
    Ok(T::half() * c.omega2 * space.r0 * space.r0 * linalg::norm_sq(&q.x) / (q.x0 * q.x0))
}

/// Anisotropic deformation: `(d_omega^2 / 2) x.Tx`.
pub fn v_curved_anisotropic<T: Real>(
    _space: &SpaceSpec<T>,
    q: &AmbientPoint<T>,
    c: &Couplings<T>,
    t: &TMatrix<T>,
) -> Result<T> {
    t.check()?;
    Ok(T::half() * c.d_omega2 * t.quad_form(&q.x))
}

/// Nonlinear curved deformation:
/// `eps_el R0^2 (R0^2 + x0^2)/x0^4 (x.x)(x.Tx)`.
pub fn v_curved_nonlinear<T: Real>(
    space: &SpaceSpec<T>,
    q: &AmbientPoint<T>,
    c: &Couplings<T>,
    t: &TMatrix<T>,
) -> Result<T> {
    t.check()?;
    check_x0(space, q)?;
    let x02 = q.x0 * q.x0;
    let f = (space.r0 * space.r0 + x02) / (x02 * x02);
    Ok(c.eps_el * space.r0 * space.r0 * f * linalg::norm_sq(&q.x) * t.quad_form(&q.x))
}

/// Curved Kepler/Coulomb: `-(gamma/R0) x0/|x|`.
pub fn v_curved_kepler<T: Real>(
    space: &SpaceSpec<T>,
    q: &AmbientPoint<T>,
    c: &Couplings<T>,
) -> Result<T> {
    let r = check_r_curved(space, q)?;
    Ok(-c.gamma / space.r0 * q.x0 / r)
}

/// Curved Stark term: `eps_el (x0/R0) x_axis`.
pub fn v_curved_stark<T: Real>(
    space: &SpaceSpec<T>,
    q: &AmbientPoint<T>,
    c: &Couplings<T>,
    axis: usize,
) -> T {
    c.eps_el * q.x0 / space.r0 * q.x[axis]
}

/// Curved cos(theta) term: `(d_omega^2 / 2) x_axis/|x|`.
pub fn v_curved_cos<T: Real>(
    space: &SpaceSpec<T>,
    q: &AmbientPoint<T>,
    c: &Couplings<T>,
    axis: usize,
) -> Result<T> {
    let r = check_r_curved(space, q)?;
    Ok(T::half() * c.d_omega2 * q.x[axis] / r)
}

/// Combined Kepler deformation:
/// `(d_omega^2/2)(x_a/|x| + eps x0 x_a/R0^2) + eps_el x0 x_a / R0`.
pub fn v_curved_kepler_deformed<T: Real>(
    space: &SpaceSpec<T>,
    q: &AmbientPoint<T>,
    c: &Couplings<T>,
    axis: usize,
) -> Result<T> {
    let r = check_r_curved(space, q)?;
    let z = q.x[axis];
    let eps = space.epsilon();
    Ok(
        T::half() * c.d_omega2 * (z / r + eps * q.x0 * z / (space.r0 * space.r0))
            + c.eps_el * q.x0 * z / space.r0,
    )
}

/// Which side a system lives on.
#[derive(Debug, Clone)]
pub enum Geometry<T: Real> {
    Curved(SpaceSpec<T>),
    Flat { dim: usize },
}

impl<T: Real> Geometry<T> {
    pub fn dim(&self) -> usize {
        match self {
            Geometry::Curved(s) => s.dim,
            Geometry::Flat { dim } => *dim,
        }
    }
}

/// A Hamiltonian system: geometry plus a sum of potential terms.
#[derive(Debug, Clone)]
pub struct SystemSpec<T: Real> {
    pub geometry: Geometry<T>,
    pub terms: Vec<PotentialTerm<T>>,
}

impl<T: Real> SystemSpec<T> {
    pub fn curved(space: SpaceSpec<T>, terms: Vec<PotentialTerm<T>>) -> Result<Self> {
        for term in &terms {
            if !term.kind.is_curved() && term.kind != TermKind::MonopoleCentrifugal {
                return Err(Error::Invalid(format!(
                    "flat term {} in a curved system",
                    term.kind.name()
                )));
            }
            term.couplings.validate()?;
            if let Some(t) = &term.t {
                if t.dim() != space.dim {
                    return Err(Error::DimensionMismatch {
                        expected: space.dim,
                        got: t.dim(),
                    });
                }
            }
            if let Some(a) = term.axis {
                if a >= space.dim {
                    return Err(Error::Invalid(format!(
                        "axis {a} out of range for dimension {}",
                        space.dim
                    )));
                }
            }
        }
        Ok(SystemSpec {
            geometry: Geometry::Curved(space),
            terms,
        })
    }

    pub fn flat(dim: usize, terms: Vec<PotentialTerm<T>>) -> Result<Self> {
        if dim < 1 {
            return Err(Error::Invalid("flat dimension must be >= 1".into()));
        }
        for term in &terms {
            if term.kind.is_curved() {
                return Err(Error::Invalid(format!(
                    "curved term {} in a flat system",
                    term.kind.name()
                )));
            }
            term.couplings.validate()?;
            if term.kind.needs_t_matrix() && dim % 2 != 0 {
                return Err(Error::Invalid(format!(
                    "{} needs an even dimension",
                    term.kind.name()
                )));
            }
            if let Some(a) = term.axis {
                if a >= dim {
                    return Err(Error::Invalid(format!(
                        "axis {a} out of range for dimension {dim}"
                    )));
                }
            }
        }
        Ok(SystemSpec {
            geometry: Geometry::Flat { dim },
            terms,
        })
    }

    pub fn space(&self) -> Result<&SpaceSpec<T>> {
        match &self.geometry {
            Geometry::Curved(s) => Ok(s),
            Geometry::Flat { .. } => Err(Error::Invalid("system is flat".into())),
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.geometry, Geometry::Flat { .. })
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    /// Base oscillator strength, if the system carries an oscillator term.
    pub fn base_omega2(&self) -> T {
        self.terms
            .iter()
            .find(|t| matches!(t.kind, TermKind::CurvedHiggs | TermKind::FlatOscillator))
            .map(|t| t.couplings.omega2)
            .unwrap_or_else(T::zero)
    }

    /// Monopole charge carried by a MonopoleCentrifugal term, else 0.
    pub fn monopole_charge(&self) -> T {
        self.terms
            .iter()
            .find(|t| t.kind == TermKind::MonopoleCentrifugal)
            .map(|t| t.couplings.s)
            .unwrap_or_else(T::zero)
    }

    pub fn potential_curved(&self, q: &AmbientPoint<T>) -> Result<T> {
        let space = self.space()?;
        let mut v = T::zero();
        for term in &self.terms {
            v += term.value_curved(space, q)?;
        }
        Ok(v)
    }

    /// Summed ambient gradient of all terms.
    pub fn gradient_curved(&self, q: &AmbientPoint<T>) -> Result<Vec<T>> {
        let space = self.space()?;
        let mut g = vec![T::zero(); space.dim + 1];
        for term in &self.terms {
            let tg = term.gradient_curved(space, q)?;
            for (gi, ti) in g.iter_mut().zip(&tg) {
                *gi += *ti;
            }
        }
        Ok(g)
    }

    pub fn potential_flat(&self, x: &[T]) -> Result<T> {
        let mut v = T::zero();
        for term in &self.terms {
            v += term.value_flat(x)?;
        }
        Ok(v)
    }

    pub fn gradient_flat(&self, x: &[T]) -> Result<Vec<T>> {
        let mut g = vec![T::zero(); x.len()];
        for term in &self.terms {
            let tg = term.gradient_flat(x)?;
            for (gi, ti) in g.iter_mut().zip(&tg) {
                *gi += *ti;
            }
        }
        Ok(g)
    }

    /// Total energy of a curved phase point: `<P,P>_eta/2 + sum of terms`.
    pub fn hamiltonian(&self, ph: &PhasePoint<T>) -> Result<T> {
        let space = self.space()?;
        Ok(ph.kinetic(space) + self.potential_curved(&ph.q)?)
    }

    /// Total flat energy `p.p/2 + sum of terms`.
    ///
    /// For a monopole system (`s != 0`) `p` is the kinetic (gauge-invariant)
    /// momentum, so no vector-potential shift appears here; the matched
    /// `s^2/(2 x^2)` centrifugal term enters through the term list.
    pub fn hamiltonian_flat(&self, x: &[T], p: &[T]) -> Result<T> {
        Ok(T::half() * linalg::norm_sq(p) + self.potential_flat(x)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sphere(d: usize) -> SpaceSpec<f64> {
        SpaceSpec::sphere(d, 1.0).unwrap()
    }

    fn q_345(space: &SpaceSpec<f64>) -> AmbientPoint<f64> {
        space.lift_to_surface(&[0.6, 0.0]).unwrap()
    }

    #[test]
    fn higgs_hand_values() {
        let sp = sphere(2);
        let c = Couplings {
            omega2: 1.0,
            ..Couplings::default()
        };
        let q = q_345(&sp);
        assert_relative_eq!(
            v_curved_higgs(&sp, &q, &c).unwrap(),
            0.28125,
            max_relative = 1e-14
        );
        let hp = SpaceSpec::pseudosphere(2, 1.0).unwrap();
        let q = hp.lift_to_surface(&[0.75, 0.0]).unwrap();
        assert_relative_eq!(
            v_curved_higgs(&hp, &q, &c).unwrap(),
            0.18,
            max_relative = 1e-14
        );
        let pole = sp.lift_to_surface(&[0.0, 0.0]).unwrap();
        assert_eq!(v_curved_higgs(&sp, &pole, &c).unwrap(), 0.0);
    }

    #[test]
    fn anisotropic_hand_value_and_invalid_t() {
        let sp = sphere(2);
        let t = TMatrix::diag(&[1.0, -1.0]).unwrap();
        let c = Couplings {
            d_omega2: 1.0,
            ..Couplings::default()
        };
        let q = sp.lift_to_surface(&[0.3, 0.4]).unwrap();
        assert_relative_eq!(
            v_curved_anisotropic(&sp, &q, &c, &t).unwrap(),
            -0.035,
            max_relative = 1e-14
        );
        // T = Id violates the nontriviality condition
        assert!(TMatrix::diag(&[1.0, 1.0]).is_err());
        // broken involution rejected unless exempt
        assert!(TMatrix::diag(&[1.0, -0.9]).is_err());
        let broken = TMatrix::diag_unchecked(&[1.0, -0.9]);
        assert!(v_curved_anisotropic(&sp, &q, &c, &broken).is_ok());
    }

    #[test]
    fn nonlinear_hand_value() {
        let sp = sphere(2);
        let t = TMatrix::diag(&[1.0, -1.0]).unwrap();
        let c = Couplings {
            eps_el: 1.0,
            ..Couplings::default()
        };
        let q = q_345(&sp);
        assert_relative_eq!(
            v_curved_nonlinear(&sp, &q, &c, &t).unwrap(),
            0.51890625,
            max_relative = 1e-12
        );
        let zero = Couplings::default();
        assert_eq!(v_curved_nonlinear(&sp, &q, &zero, &t).unwrap(), 0.0);
    }

    #[test]
    fn kepler_hand_value_and_singularity() {
        let sp = sphere(2);
        let c = Couplings {
            gamma: 1.0,
            ..Couplings::default()
        };
        let q = q_345(&sp);
        assert_relative_eq!(
            v_curved_kepler(&sp, &q, &c).unwrap(),
            -4.0 / 3.0,
            max_relative = 1e-14
        );
        let pole = sp.lift_to_surface(&[0.0, 0.0]).unwrap();
        assert!(matches!(
            v_curved_kepler(&sp, &pole, &c),
            Err(Error::OriginSingularity { .. })
        ));
    }

    #[test]
    fn stark_cos_deformed_hand_values() {
        let sp = sphere(3);
        let q = sp.lift_to_surface(&[0.0, 0.0, 0.6]).unwrap();
        let c = Couplings {
            d_omega2: 2.0,
            eps_el: 1.0,
            ..Couplings::default()
        };
        assert_relative_eq!(v_curved_stark(&sp, &q, &c, 2), 0.48, max_relative = 1e-14);
        assert_relative_eq!(
            v_curved_cos(&sp, &q, &c, 2).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            v_curved_kepler_deformed(&sp, &q, &c, 2).unwrap(),
            1.96,
            max_relative = 1e-14
        );
        // dropping the anisotropy reduces the deformed term to the Stark term
        let c2 = Couplings {
            eps_el: 1.0,
            ..Couplings::default()
        };
        assert_relative_eq!(
            v_curved_kepler_deformed(&sp, &q, &c2, 2).unwrap(),
            v_curved_stark(&sp, &q, &c2, 2),
            max_relative = 1e-14
        );
    }

    #[test]
    fn flat_term_hand_values() {
        let aniso = PotentialTerm::flat_anisotropic(1.0);
        assert_relative_eq!(
            aniso.value_flat(&[0.3, 0.4]).unwrap(),
            -0.035,
            max_relative = 1e-14
        );
        let quartic = PotentialTerm::flat_quartic(1.0);
        assert_eq!(quartic.value_flat(&[1.0, 1.0]).unwrap(), 0.0);
        let cos = PotentialTerm::flat_cos(4.0);
        assert_relative_eq!(
            cos.value_flat(&[0.0, 0.0, 0.5]).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        let lin = PotentialTerm::flat_linear(0.7);
        let g = lin.gradient_flat(&[0.2, 0.3, 0.4]).unwrap();
        assert_eq!(g, vec![0.0, 0.0, 0.7]);
    }

    #[test]
    fn hamiltonian_kinetic_and_additivity() {
        let sp = sphere(2);
        // free particle with unit tangent momentum at the pole
        let sys = SystemSpec::curved(sp.clone(), vec![]).unwrap();
        let q = sp.lift_to_surface(&[0.0, 0.0]).unwrap();
        let ph = PhasePoint::new(&sp, q, vec![1.0, 0.0], 0.0).unwrap();
        assert_relative_eq!(sys.hamiltonian(&ph).unwrap(), 0.5, max_relative = 1e-15);

        // Higgs oscillator at the pole with zero momentum
        let sys = SystemSpec::curved(sp.clone(), vec![PotentialTerm::curved_higgs(1.0)]).unwrap();
        let q = sp.lift_to_surface(&[0.0, 0.0]).unwrap();
        let ph = PhasePoint::new(&sp, q, vec![0.0, 0.0], 0.0).unwrap();
        assert_eq!(sys.hamiltonian(&ph).unwrap(), 0.0);

        // additivity over terms
        let t = TMatrix::diag(&[1.0, -1.0]).unwrap();
        let terms = vec![
            PotentialTerm::curved_higgs(1.0),
            PotentialTerm::curved_anisotropic(0.5, t.clone()),
        ];
        let sys = SystemSpec::curved(sp.clone(), terms.clone()).unwrap();
        let ph = PhasePoint::from_spatial(&sp, &[0.3, 0.2], &[0.1, -0.4]).unwrap();
        let total = sys.hamiltonian(&ph).unwrap();
        let c = Couplings {
            omega2: 1.0,
            ..Couplings::default()
        };
        let c2 = Couplings {
            d_omega2: 0.5,
            ..Couplings::default()
        };
        let byhand = ph.kinetic(&sp)
            + v_curved_higgs(&sp, &ph.q, &c).unwrap()
            + v_curved_anisotropic(&sp, &ph.q, &c2, &t).unwrap();
        assert_relative_eq!(total, byhand, max_relative = 1e-15);
    }

    #[test]
    fn higgs_gradient_vanishes_at_pole() {
        let sp = sphere(2);
        let term = PotentialTerm::curved_higgs(1.0);
        let pole = sp.lift_to_surface(&[0.0, 0.0]).unwrap();
        let g = term.gradient_curved(&sp, &pole).unwrap();
        assert_eq!(&g[..2], &[0.0, 0.0]);
    }

    #[test]
    fn curved_terms_reject_flat_eval_and_vice_versa() {
        let term = PotentialTerm::curved_higgs(1.0);
        assert!(term.value_flat(&[0.1, 0.2]).is_err());
        let term = PotentialTerm::flat_kepler(1.0);
        let sp = sphere(2);
        let q = q_345(&sp);
        assert!(term.value_curved(&sp, &q).is_err());
    }
}
