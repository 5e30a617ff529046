//! Single-actuator control.
//!
//! A passively loaded actuator of effective mass `m` obeys
//!
//! ```text
//! ℓ̈ + Σ cᵢ ℓ⁽ⁱ⁺¹⁾ + Σ (kᵢ/m) ℓ⁽ⁱ⁺¹⁾ = a_c + Σ c̃ᵢ a_c⁽ⁱ⁻¹⁾
//! ```
//!
//! and is driven by the closed-loop feed-forward controller
//!
//! ```text
//! ẋ   = A x + B e
//! a_c = ℓ̈_r + (k₀/m) ℓ̇_r + C x + D [e, ė, …, e⁽ˡ⁻¹⁾]
//! ```
//!
//! Errors are always `e = reference − actual`, so stabilizing gains in `D`
//! are positive.

use nalgebra::{Complex, DMatrix, DVector, RowDVector};

use crate::error::{check_len, Error, Result};
use crate::poly::{characteristic_polynomial, Poly};

/// Coefficients of the linear actuator ODE.
///
/// `c[0]` is `c₂`, `k[0]` is `k₀` and `c_tilde[0]` is `c̃₂`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActuatorModel {
    pub c: Vec<f64>,
    pub k: Vec<f64>,
    pub c_tilde: Vec<f64>,
}

impl ActuatorModel {
    /// Only the back-EMF term: `f = f_c − k₀ ℓ̇`.
    pub fn ideal(k0: f64) -> Self {
        Self {
            c: Vec::new(),
            k: vec![k0],
            c_tilde: Vec::new(),
        }
    }

    pub fn k0(&self) -> f64 {
        self.k.first().copied().unwrap_or(0.0)
    }

    pub fn is_ideal(&self) -> bool {
        self.c.iter().all(|v| *v == 0.0)
            && self.k.iter().skip(1).all(|v| *v == 0.0)
            && self.c_tilde.iter().all(|v| *v == 0.0)
    }

    /// Plant polynomials `(P, Q)` with `P(s) ℓ = Q(s) a_c` for load mass `m`
    /// (`f64::INFINITY` for a clamped actuator).
    pub fn passive_load_polynomials(&self, m: f64) -> (Poly, Poly) {
        let inv_m = if m.is_infinite() { 0.0 } else { 1.0 / m };
        let deg = (2 + self.c.len()).max(self.k.len());
        let mut p = vec![0.0; deg + 1];
        p[2] = 1.0;
        for (i, c) in self.c.iter().enumerate() {
            // cᵢ multiplies ℓ⁽ⁱ⁺¹⁾, list starts at i = 2
            p[i + 3] += c;
        }
        for (i, k) in self.k.iter().enumerate() {
            p[i + 1] += k * inv_m;
        }
        let mut q = vec![1.0];
        q.extend(self.c_tilde.iter().copied());
        (Poly(p), Poly(q))
    }
}

/// Actuator constants shared by every actuator of a robot.
#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorParams {
    /// Effective no-load mass.
    pub m0: f64,
    pub model: ActuatorModel,
}

impl ActuatorParams {
    pub fn ideal(m0: f64, k0: f64) -> Self {
        Self {
            m0,
            model: ActuatorModel::ideal(k0),
        }
    }

    pub fn k0(&self) -> f64 {
        self.model.k0()
    }
}

/// A value and its first few time derivatives, `[y, ẏ, ÿ, …]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeStack(pub Vec<f64>);

impl DerivativeStack {
    pub fn order(&self, i: usize) -> f64 {
        self.0.get(i).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// State-space controller `(A, B, C, D)` with the actuator constants it was
/// tuned for.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: RowDVector<f64>,
    pub k0: f64,
    pub m0: f64,
}

impl ControllerGains {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: RowDVector<f64>,
        d: RowDVector<f64>,
        k0: f64,
        m0: f64,
    ) -> Result<Self> {
        let s = a.nrows();
        check_len("A columns", s, a.ncols())?;
        check_len("B", s, b.len())?;
        check_len("C", s, c.len())?;
        if d.is_empty() {
            return Err(Error::InvalidParameter("derivative order l must be >= 1".into()));
        }
        if !(k0 >= 0.0) || !(m0 >= 0.0) {
            return Err(Error::InvalidParameter(format!("k0 = {k0}, m0 = {m0}")));
        }
        Ok(Self { a, b, c, d, k0, m0 })
    }

    /// Internal state dimension `s`.
    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    /// Derivative order `l`.
    pub fn order(&self) -> usize {
        self.d.len()
    }

    /// Zero-order-hold discretization `(Φ, Γ)` over `dt`:
    /// `x' = Φ x + Γ e`.
    pub fn discretize(&self, dt: f64) -> (DMatrix<f64>, DVector<f64>) {
        let s = self.states();
        if s == 0 {
            return (DMatrix::zeros(0, 0), DVector::zeros(0));
        }
        let mut aug = DMatrix::zeros(s + 1, s + 1);
        aug.view_mut((0, 0), (s, s)).copy_from(&(&self.a * dt));
        aug.view_mut((0, s), (s, 1)).copy_from(&(&self.b * dt));
        let e = aug.exp();
        (
            e.view((0, 0), (s, s)).into_owned(),
            e.view((0, s), (s, 1)).column(0).into_owned(),
        )
    }

    /// `C x + D e_stack`, the homogeneous part of the command.
    pub fn feedback(&self, x: &DVector<f64>, error: &DerivativeStack) -> Result<f64> {
        check_len("controller state", self.states(), x.len())?;
        check_len("error stack", self.order(), error.len())?;
        let cx = if self.states() == 0 { 0.0 } else { (&self.c * x)[0] };
        let de: f64 = self.d.iter().zip(&error.0).map(|(d, e)| d * e).sum();
        Ok(cx + de)
    }
}

/// PD controller: `a_c = ℓ̈_r + (k₀/m) ℓ̇_r + Kp e + Kd ė`.
pub fn pd_gains(kp: f64, kd: f64, k0: f64, m0: f64) -> Result<ControllerGains> {
    if !(kp > 0.0) || !(kd > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "PD gains must be positive (kp = {kp}, kd = {kd})"
        )));
    }
    pd_gains_unchecked(kp, kd, k0, m0)
}

/// PD gains without the positivity check; used to build deliberately
/// unstable controllers for analysis.
pub fn pd_gains_unchecked(kp: f64, kd: f64, k0: f64, m0: f64) -> Result<ControllerGains> {
    ControllerGains::new(
        DMatrix::zeros(0, 0),
        DVector::zeros(0),
        RowDVector::zeros(0),
        RowDVector::from_vec(vec![kp, kd]),
        k0,
        m0,
    )
}

/// Open-loop command force `f_c = m ℓ̈_r + k₀ ℓ̇_r`.
pub fn open_loop_command(gains: &ControllerGains, m: f64, reference: &DerivativeStack) -> Result<f64> {
    if !(m >= gains.m0) || !m.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "load mass {m} must be finite and at least m0 = {}",
            gains.m0
        )));
    }
    Ok(m * reference.order(2) + gains.k0 * reference.order(1))
}

/// One control tick: returns `(a_c, x')`.
///
/// `a_c` uses the state before the update; the state then advances by the
/// exact zero-order-hold discretization of `ẋ = A x + B e` over `dt`.
pub fn feedforward_step(
    gains: &ControllerGains,
    x: &DVector<f64>,
    error: &DerivativeStack,
    reference: &DerivativeStack,
    m: f64,
    dt: f64,
) -> Result<(f64, DVector<f64>)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt = {dt}")));
    }
    if reference.len() < 3 {
        return Err(Error::DimensionMismatch {
            what: "reference stack (needs value, rate and acceleration)",
            expected: 3,
            got: reference.len(),
        });
    }
    let (phi, gamma) = gains.discretize(dt);
    feedforward_step_discrete(gains, &phi, &gamma, x, error, reference, m)
}

/// [`feedforward_step`] with a precomputed discretization.
pub fn feedforward_step_discrete(
    gains: &ControllerGains,
    phi: &DMatrix<f64>,
    gamma: &DVector<f64>,
    x: &DVector<f64>,
    error: &DerivativeStack,
    reference: &DerivativeStack,
    m: f64,
) -> Result<(f64, DVector<f64>)> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("load mass {m}")));
    }
    let drag = if m.is_infinite() { 0.0 } else { gains.k0 / m };
    let a_c = reference.order(2) + drag * reference.order(1) + gains.feedback(x, error)?;
    let next = if gains.states() == 0 {
        x.clone()
    } else {
        phi * x + gamma * error.order(0)
    };
    Ok((a_c, next))
}

/// Closed-loop characteristic polynomial of the passively loaded actuator
/// with the controller in the loop.
///
/// With `P(s) ℓ = Q(s) a_c` and `a_c = K(s) e`, the loop closes on
/// `P(s)·det(sI − A) + Q(s)·[det(sI − A + BC) − det(sI − A) + D(s)·det(sI − A)]`.
pub fn closed_loop_polynomial(gains: &ControllerGains, model: &ActuatorModel, m: f64) -> Result<Poly> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("load mass {m}")));
    }
    let (p, q) = model.passive_load_polynomials(m);
    let lead = p.coeff(p.degree());
    if lead.abs() < 1e-300 {
        return Err(Error::IllPosedModel(format!(
            "leading coefficient of the actuator ODE vanishes at m = {m}"
        )));
    }
    let det_a = characteristic_polynomial(&gains.a);
    let det_abc = characteristic_polynomial(&(&gains.a - &gains.b * &gains.c));
    let d_poly = Poly(gains.d.iter().copied().collect());
    let controller = det_abc.sub(&det_a).add(&d_poly.mul(&det_a));
    let chi = p.mul(&det_a).add(&q.mul(&controller));
    let scale = chi.0.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let chi = chi.trimmed(1e-14 * scale);
    if chi.coeff(chi.degree()) == 0.0 {
        return Err(Error::IllPosedModel("closed-loop polynomial vanishes".into()));
    }
    Ok(chi)
}

/// Closed-loop poles for load mass `m`.
pub fn closed_loop_poles(
    gains: &ControllerGains,
    model: &ActuatorModel,
    m: f64,
) -> Result<Vec<Complex<f64>>> {
    Ok(closed_loop_polynomial(gains, model, m)?.roots())
}

/// Stability margin required by [`stability_check`].
pub const STABILITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MassStability {
    pub mass: f64,
    pub poles: Vec<Complex<f64>>,
    pub max_real: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub entries: Vec<MassStability>,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.stable)
    }

    pub fn worst_real_part(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.max_real)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// The mass sweep used to vet a controller: `m₀, 2m₀, 10m₀, ∞` (nonpositive
/// entries dropped).
pub fn standard_masses(m0: f64) -> Vec<f64> {
    [m0, 2.0 * m0, 10.0 * m0]
        .into_iter()
        .filter(|m| *m > 0.0)
        .chain(std::iter::once(f64::INFINITY))
        .collect()
}

/// Eigenvalue test of the closed loop for every load mass in `masses`.
/// Passes iff every pole has real part below `−1e-9`.
pub fn stability_check(
    gains: &ControllerGains,
    model: &ActuatorModel,
    masses: &[f64],
) -> Result<StabilityReport> {
    let mut entries = Vec::with_capacity(masses.len());
    for &mass in masses {
        let poles = closed_loop_poles(gains, model, mass)?;
        let max_real = poles.iter().map(|p| p.re).fold(f64::NEG_INFINITY, f64::max);
        entries.push(MassStability {
            mass,
            stable: max_real < -STABILITY_MARGIN,
            max_real,
            poles,
        });
    }
    Ok(StabilityReport { entries })
}

/// Time series from [`simulate_single_actuator`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SingleActuatorTrace {
    pub t: Vec<f64>,
    pub ell: Vec<f64>,
    /// `e = ℓ_r − ℓ`.
    pub error: Vec<f64>,
    pub a_c: Vec<f64>,
    /// `m a_c`; NaN for a clamped actuator.
    pub f_c: Vec<f64>,
}

/// Closed-loop simulation of one actuator carrying a passive load `m`.
///
/// The plant `P(s) ℓ = Q(s) a_c` is realized in controllable canonical form
/// and advanced exactly over each control tick with `a_c` held. `reference`
/// returns `[ℓ_r, ℓ̇_r, ℓ̈_r, …]` (at least three entries) and
/// `initial = [ℓ, ℓ̇]` sets the starting actuator state.
pub fn simulate_single_actuator(
    gains: &ControllerGains,
    model: &ActuatorModel,
    m: f64,
    reference: &dyn Fn(f64) -> DerivativeStack,
    initial: [f64; 2],
    dt: f64,
    duration: f64,
) -> Result<SingleActuatorTrace> {
    if !(dt > 0.0) || !(duration >= 0.0) {
        return Err(Error::InvalidParameter(format!("dt = {dt}, duration = {duration}")));
    }
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("load mass {m}")));
    }
    let (p, q) = model.passive_load_polynomials(m);
    let order = p.degree();
    let lead = p.coeff(order);
    if lead.abs() < 1e-300 {
        return Err(Error::IllPosedModel(format!("leading coefficient vanishes at m = {m}")));
    }
    if q.degree() >= order {
        return Err(Error::IllPosedModel("actuator response is not strictly proper".into()));
    }

    // controllable canonical form
    let mut a_p = DMatrix::zeros(order, order);
    for i in 0..order - 1 {
        a_p[(i, i + 1)] = 1.0;
    }
    for j in 0..order {
        a_p[(order - 1, j)] = -p.coeff(j) / lead;
    }
    let mut b_p = DVector::zeros(order);
    b_p[order - 1] = 1.0 / lead;
    let c_out = RowDVector::from_fn(order, |_, j| q.coeff(j));

    // exact ZOH step of the plant
    let mut aug = DMatrix::zeros(order + 1, order + 1);
    aug.view_mut((0, 0), (order, order)).copy_from(&(&a_p * dt));
    aug.view_mut((0, order), (order, 1)).copy_from(&(&b_p * dt));
    let e = aug.exp();
    let plant_phi = e.view((0, 0), (order, order)).into_owned();
    let plant_gamma: DVector<f64> = e.view((0, order), (order, 1)).column(0).into_owned();

    // output derivative maps C A^i
    let l = gains.order();
    let mut out_maps = Vec::with_capacity(l);
    let mut row = c_out.clone();
    for _ in 0..l {
        out_maps.push(row.clone());
        row = &row * &a_p;
    }

    // initial state matching ℓ and ℓ̇ (solve the 2×order system in the least-norm sense)
    let mut z = DVector::zeros(order);
    {
        let rows = 2.min(order);
        let mut map = DMatrix::zeros(rows, order);
        let mut r = c_out.clone();
        for i in 0..rows {
            map.row_mut(i).copy_from(&r);
            r = &r * &a_p;
        }
        let target = DVector::from_column_slice(&initial[..rows]);
        if let Ok(sol) = map.svd(true, true).solve(&target, 1e-14) {
            z = sol;
        }
    }

    let (phi, gamma) = gains.discretize(dt);
    let mut x = DVector::zeros(gains.states());
    let steps = (duration / dt).round() as usize;
    let mut trace = SingleActuatorTrace::default();
    for k in 0..=steps {
        let t = k as f64 * dt;
        let reference_t = reference(t);
        if reference_t.len() < 3.max(l) {
            return Err(Error::DimensionMismatch {
                what: "reference stack",
                expected: 3.max(l),
                got: reference_t.len(),
            });
        }
        let derivs: Vec<f64> = out_maps.iter().map(|m| (m * &z)[0]).collect();
        let err = DerivativeStack((0..l).map(|i| reference_t.order(i) - derivs[i]).collect());
        let (a_c, x_next) = feedforward_step_discrete(gains, &phi, &gamma, &x, &err, &reference_t, m)?;

        trace.t.push(t);
        trace.ell.push(derivs[0]);
        trace.error.push(err.order(0));
        trace.a_c.push(a_c);
        trace.f_c.push(if m.is_finite() { m * a_c } else { f64::NAN });

        z = &plant_phi * &z + &plant_gamma * a_c;
        x = x_next;
        if z.iter().chain(x.iter()).any(|v| !v.is_finite() || v.abs() > 1e9) {
            return Err(Error::NumericBlowup { t });
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sorted_real(poles: &[Complex<f64>]) -> Vec<f64> {
        let mut r: Vec<f64> = poles.iter().map(|p| p.re).collect();
        r.sort_by(f64::total_cmp);
        r
    }

    #[test]
    fn pd_critical_damping_poles() {
        let g = pd_gains(4.0, 4.0, 0.0, 0.1).unwrap();
        let poles = closed_loop_poles(&g, &ActuatorModel::ideal(0.0), 1.0).unwrap();
        assert_eq!(poles.len(), 2);
        for p in poles {
            // double root: companion eigenvalues split by ~sqrt(eps)
            assert!((p.re + 2.0).abs() < 1e-6 && p.im.abs() < 1e-6);
        }
    }

    #[test]
    fn back_emf_adds_damping() {
        let g = pd_gains(4.0, 4.0, 0.5, 0.1).unwrap();
        let chi = closed_loop_polynomial(&g, &ActuatorModel::ideal(0.5), 1.0).unwrap();
        assert_eq!(chi.0.len(), 3);
        assert_relative_eq!(chi.0[0], 4.0);
        assert_relative_eq!(chi.0[1], 4.5);
        assert_relative_eq!(chi.0[2], 1.0);
    }

    #[test]
    fn undamped_pd_is_marginal() {
        let g = pd_gains_unchecked(1.0, 0.0, 0.0, 0.1).unwrap();
        let report = stability_check(&g, &ActuatorModel::ideal(0.0), &standard_masses(0.1)).unwrap();
        assert!(!report.passed());
        for e in &report.entries {
            assert!(e.max_real.abs() < 1e-12);
            for p in &e.poles {
                assert_relative_eq!(p.im.abs(), 1.0, epsilon = 1e-12);
            }
        }
        assert!(pd_gains(1.0, 0.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn negative_stiffness_fails_everywhere() {
        let g = pd_gains_unchecked(-1.0, 2.0, 0.3, 0.1).unwrap();
        let report = stability_check(&g, &ActuatorModel::ideal(0.3), &standard_masses(0.1)).unwrap();
        assert!(report.entries.iter().all(|e| !e.stable));
    }

    #[test]
    fn integral_state_changes_the_polynomial() {
        // PID-like: ẋ = e, a_c = Ki x + Kp e + Kd ė → s³ + Kd s² + Kp s + Ki
        let g = ControllerGains::new(
            DMatrix::zeros(1, 1),
            DVector::from_vec(vec![1.0]),
            RowDVector::from_vec(vec![2.0]),
            RowDVector::from_vec(vec![5.0, 3.0]),
            0.0,
            0.1,
        )
        .unwrap();
        let chi = closed_loop_polynomial(&g, &ActuatorModel::ideal(0.0), 1.0).unwrap();
        let expected = [2.0, 5.0, 3.0, 1.0];
        for (a, b) in chi.0.iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        // Routh-Hurwitz for cubic: 3·5 > 2 → stable
        let report = stability_check(&g, &ActuatorModel::ideal(0.0), &[1.0]).unwrap();
        assert!(report.passed());
        assert_eq!(sorted_real(&report.entries[0].poles).len(), 3);
    }

    #[test]
    fn open_loop_cases() {
        let g = pd_gains(4.0, 4.0, 0.5, 0.2).unwrap();
        let r = DerivativeStack(vec![0.0, 2.0, 1.0]);
        assert_relative_eq!(open_loop_command(&g, 2.0, &r).unwrap(), 3.0);
        let zero = DerivativeStack(vec![1.0, 0.0, 0.0]);
        assert_eq!(open_loop_command(&g, 2.0, &zero).unwrap(), 0.0);
        let g0 = pd_gains(4.0, 4.0, 0.0, 0.2).unwrap();
        let unit = DerivativeStack(vec![0.0, 0.0, 1.0]);
        assert_relative_eq!(open_loop_command(&g0, 0.2, &unit).unwrap(), 0.2);
        assert!(open_loop_command(&g, 0.1, &unit).is_err());
    }

    #[test]
    fn feedforward_pd_arithmetic() {
        let g = pd_gains(4.0, 4.0, 0.0, 0.1).unwrap();
        let x = DVector::zeros(0);
        let (a_c, _) = feedforward_step(
            &g,
            &x,
            &DerivativeStack(vec![0.1, 0.0]),
            &DerivativeStack(vec![0.0, 0.0, 0.0]),
            1.0,
            1e-3,
        )
        .unwrap();
        assert_relative_eq!(a_c, 0.4, epsilon = 1e-15);
    }

    #[test]
    fn pure_feed_forward_when_error_vanishes() {
        let g = pd_gains(4.0, 4.0, 0.5, 0.1).unwrap();
        let r = DerivativeStack(vec![1.0, 2.0, 3.0]);
        let (a_c, _) = feedforward_step(&g, &DVector::zeros(0), &DerivativeStack(vec![0.0, 0.0]), &r, 2.0, 1e-3)
            .unwrap();
        assert_relative_eq!(a_c, 3.0 + 0.25 * 2.0);
        assert_relative_eq!(a_c, open_loop_command(&g, 2.0, &r).unwrap() / 2.0);
    }

    #[test]
    fn integrator_state_grows_linearly() {
        let g = ControllerGains::new(
            DMatrix::zeros(1, 1),
            DVector::from_vec(vec![1.0]),
            RowDVector::from_vec(vec![1.0]),
            RowDVector::from_vec(vec![4.0, 4.0]),
            0.0,
            0.1,
        )
        .unwrap();
        let x = DVector::from_vec(vec![0.3]);
        let (_, next) = feedforward_step(
            &g,
            &x,
            &DerivativeStack(vec![0.2, 0.0]),
            &DerivativeStack(vec![0.0; 3]),
            1.0,
            0.01,
        )
        .unwrap();
        // x(dt) = x + dt·e for A = 0
        assert_relative_eq!(next[0], 0.3 + 0.01 * 0.2, epsilon = 1e-15);
    }

    #[test]
    fn feedforward_rejects_bad_inputs() {
        let g = pd_gains(4.0, 4.0, 0.0, 0.1).unwrap();
        let x = DVector::zeros(0);
        let ok = DerivativeStack(vec![0.0; 3]);
        assert!(feedforward_step(&g, &x, &DerivativeStack(vec![0.0]), &ok, 1.0, 1e-3).is_err());
        assert!(feedforward_step(&g, &x, &DerivativeStack(vec![0.0; 2]), &ok, 1.0, 0.0).is_err());
        assert!(feedforward_step(&g, &x, &DerivativeStack(vec![0.0; 2]), &DerivativeStack(vec![0.0; 2]), 1.0, 1e-3).is_err());
    }

    #[test]
    fn equilibrium_stays_put() {
        let g = pd_gains(4.0, 4.0, 0.5, 0.1).unwrap();
        let reference = |_t: f64| DerivativeStack(vec![1.0, 0.0, 0.0]);
        let tr = simulate_single_actuator(&g, &ActuatorModel::ideal(0.5), 1.0, &reference, [1.0, 0.0], 1e-3, 2.0)
            .unwrap();
        assert!(tr.error.iter().all(|e| e.abs() <= 1e-12));
    }

    #[test]
    fn ill_posed_model() {
        let g = pd_gains(4.0, 4.0, 0.0, 0.1).unwrap();
        // highest listed term only through k, vanishing for a clamped actuator
        let model = ActuatorModel {
            c: vec![0.0],
            k: vec![0.0, 0.0, 1.0],
            c_tilde: vec![],
        };
        assert!(matches!(
            closed_loop_polynomial(&g, &model, f64::INFINITY),
            Err(Error::IllPosedModel(_))
        ));
    }
}
