//! Force distribution: choosing actuator forces `f` that realize a wrench.
//!
//! The admissible set `C` keeps every cable tension `f₀ − f` above `t_min` and
//! every command `f + f_b` within `±f_cmd_max`. Both are per-component
//! bounds on `f`:
//!
//! ```text
//! lo = −f_cmd_max − f_b
//! hi = min(f₀ − t_min, f_cmd_max − f_b)
//! ```
//!
//! [`distribute`] returns the minimum-norm `f` with `Λᵀf = τ` and
//! `lo ≤ f ≤ hi`. It runs a dual active-set iteration (Goldfarb-Idnani with an
//! identity Hessian): start from the unconstrained minimizer `f = 0`, add the
//! equality rows, then repeatedly add the most violated bound, dropping
//! previously active bounds whose multipliers would turn negative. Each
//! iterate solves the equality-constrained least-norm problem for the current
//! active set, so KKT conditions hold on exit; a violated bound that is
//! linearly dependent on the active set with nothing left to drop proves
//! infeasibility.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::manifold::{ActuatorVector, Cotangent};

/// Iteration cap for the active-set loop.
pub const MAX_ACTIVE_SET_ITERATIONS: usize = 200;

/// Slack allowed by [`in_constraint_set`] for rounding in the bound algebra.
pub const CONSTRAINT_TOL: f64 = 1e-9;

/// Minimum cable tension and command-force limits, per actuator.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceConstraints {
    t_min: DVector<f64>,
    f_cmd_max: DVector<f64>,
}

impl ForceConstraints {
    pub fn new(t_min: Vec<f64>, f_cmd_max: Vec<f64>) -> Result<Self> {
        check_len("f_cmd_max", t_min.len(), f_cmd_max.len())?;
        if let Some(t) = t_min.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_min {t} must be finite and >= 0")));
        }
        if let Some(f) = f_cmd_max.iter().find(|f| !(**f > 0.0)) {
            return Err(Error::InvalidParameter(format!("f_cmd_max {f} must be > 0")));
        }
        Ok(Self {
            t_min: DVector::from_vec(t_min),
            f_cmd_max: DVector::from_vec(f_cmd_max),
        })
    }

    /// Same limits on every actuator.
    pub fn uniform(n: usize, t_min: f64, f_cmd_max: f64) -> Result<Self> {
        Self::new(vec![t_min; n], vec![f_cmd_max; n])
    }

    /// `t_min = 0`, no command limit.
    pub fn slack_allowed(n: usize) -> Self {
        Self {
            t_min: DVector::zeros(n),
            f_cmd_max: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn n(&self) -> usize {
        self.t_min.len()
    }

    pub fn t_min(&self) -> &DVector<f64> {
        &self.t_min
    }

    pub fn f_cmd_max(&self) -> &DVector<f64> {
        &self.f_cmd_max
    }

    /// Per-component bounds `(lo, hi)` on `f`.
    pub fn bounds(&self, fb: &ActuatorVector, f0: &ActuatorVector) -> Result<(DVector<f64>, DVector<f64>)> {
        check_len("f_b", self.n(), fb.len())?;
        check_len("f_0", self.n(), f0.len())?;
        let lo = DVector::from_fn(self.n(), |k, _| -self.f_cmd_max[k] - fb[k]);
        let hi = DVector::from_fn(self.n(), |k, _| {
            (f0[k] - self.t_min[k]).min(self.f_cmd_max[k] - fb[k])
        });
        Ok((lo, hi))
    }
}

/// Whether commanding `f + f_b` is permitted: tensions `f₀ − f ≥ t_min` and
/// `|f + f_b| ≤ f_cmd_max`, each up to [`CONSTRAINT_TOL`].
pub fn in_constraint_set(
    con: &ForceConstraints,
    f: &ActuatorVector,
    fb: &ActuatorVector,
    f0: &ActuatorVector,
) -> Result<bool> {
    let n = con.n();
    check_len("f", n, f.len())?;
    check_len("f_b", n, fb.len())?;
    check_len("f_0", n, f0.len())?;
    Ok((0..n).all(|k| {
        f0[k] - f[k] >= con.t_min[k] - CONSTRAINT_TOL
            && (f[k] + fb[k]).abs() <= con.f_cmd_max[k] + CONSTRAINT_TOL
    }))
}

/// `F(τ, f_b, f₀)`: the minimum-norm admissible `f` with `Λᵀf = τ`.
pub fn distribute(
    lambda: &DMatrix<f64>,
    tau: &Cotangent,
    fb: &ActuatorVector,
    f0: &ActuatorVector,
    con: &ForceConstraints,
) -> Result<ActuatorVector> {
    match solve(lambda, tau, fb, f0, con)? {
        Outcome::Optimal(f) => Ok(f),
        Outcome::Infeasible => Err(Error::Infeasible),
    }
}

/// Whether `(τ, f_b, f₀)` lies in the wrench set.
pub fn wrench_feasible(
    lambda: &DMatrix<f64>,
    tau: &Cotangent,
    fb: &ActuatorVector,
    f0: &ActuatorVector,
    con: &ForceConstraints,
) -> Result<bool> {
    Ok(matches!(solve(lambda, tau, fb, f0, con)?, Outcome::Optimal(_)))
}

enum Outcome {
    Optimal(ActuatorVector),
    Infeasible,
}

fn solve(
    lambda: &DMatrix<f64>,
    tau: &Cotangent,
    fb: &ActuatorVector,
    f0: &ActuatorVector,
    con: &ForceConstraints,
) -> Result<Outcome> {
    let n = lambda.nrows();
    check_len("constraints", n, con.n())?;
    check_len("wrench", lambda.ncols(), tau.len())?;
    if n < lambda.ncols() {
        return Err(Error::RankDeficient(format!(
            "{n} actuators for {} degrees of freedom",
            lambda.ncols()
        )));
    }
    let sv = lambda.singular_values();
    if !(sv.min() > 1e-10 * sv.max().max(1.0)) {
        return Err(Error::RankDeficient("actuator Jacobian".into()));
    }
    let (lo, hi) = con.bounds(fb, f0)?;
    if (0..n).any(|k| hi[k] < lo[k]) {
        return Ok(Outcome::Infeasible);
    }
    let problem = LeastNormQp::new(lambda.transpose(), tau.0.clone(), lo, hi);
    match problem.solve()? {
        Some(mut f) => {
            // snap onto the box; the iterate is within tolerance already
            for k in 0..n {
                f[k] = f[k].clamp(problem.lo[k], problem.hi[k]);
            }
            Ok(Outcome::Optimal(ActuatorVector(f)))
        }
        None => Ok(Outcome::Infeasible),
    }
}

/// `min ½‖x‖²` subject to `A x = b` and `lo ≤ x ≤ hi`.
struct LeastNormQp {
    a: DMatrix<f64>,
    b: DVector<f64>,
    lo: DVector<f64>,
    hi: DVector<f64>,
    tol: f64,
}

/// Constraint `i < m` is equality row `i`; after that come `x_k ≥ lo_k` and
/// `x_k ≤ hi_k` for each `k`, interleaved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Equality(usize),
    Lower(usize),
    Upper(usize),
}

impl LeastNormQp {
    fn new(a: DMatrix<f64>, b: DVector<f64>, lo: DVector<f64>, hi: DVector<f64>) -> Self {
        let scale = b
            .iter()
            .chain(lo.iter())
            .chain(hi.iter())
            .filter(|v| v.is_finite())
            .fold(1.0f64, |m, v| m.max(v.abs()));
        Self {
            a,
            b,
            lo,
            hi,
            tol: 1e-12 * scale,
        }
    }

    fn kinds(&self) -> impl Iterator<Item = Kind> + '_ {
        let m = self.a.nrows();
        let n = self.a.ncols();
        (0..m)
            .map(Kind::Equality)
            .chain((0..n).flat_map(|k| [Kind::Lower(k), Kind::Upper(k)]))
    }

    /// Normal `nᵢ` and right-hand side so the constraint reads `nᵢ·x − rhs ≥ 0`
    /// (or `= 0` for equalities).
    fn normal(&self, kind: Kind) -> (DVector<f64>, f64) {
        let n = self.a.ncols();
        match kind {
            Kind::Equality(i) => (self.a.row(i).transpose(), self.b[i]),
            Kind::Lower(k) => (unit(n, k, 1.0), self.lo[k]),
            Kind::Upper(k) => (unit(n, k, -1.0), -self.hi[k]),
        }
    }

    fn is_finite(&self, kind: Kind) -> bool {
        match kind {
            Kind::Equality(_) => true,
            Kind::Lower(k) => self.lo[k].is_finite(),
            Kind::Upper(k) => self.hi[k].is_finite(),
        }
    }

    /// Next constraint to add: the first inactive equality, else the most
    /// violated bound (lowest index on ties).
    fn pick(&self, x: &DVector<f64>, active: &[Active]) -> Option<(Kind, DVector<f64>, f64)> {
        let is_active = |k: Kind| active.iter().any(|a| a.kind == k);
        for kind in self.kinds() {
            if let Kind::Equality(_) = kind {
                if !is_active(kind) {
                    let (nrm, rhs) = self.normal(kind);
                    // orient so the current value is not positive
                    return if nrm.dot(x) - rhs > 0.0 {
                        Some((kind, -nrm, -rhs))
                    } else {
                        Some((kind, nrm, rhs))
                    };
                }
            }
        }
        let mut best: Option<(Kind, f64)> = None;
        for kind in self.kinds() {
            if matches!(kind, Kind::Equality(_)) || !self.is_finite(kind) || is_active(kind) {
                continue;
            }
            let (nrm, rhs) = self.normal(kind);
            let violation = rhs - nrm.dot(x);
            if violation > self.tol && best.is_none_or(|(_, v)| violation > v) {
                best = Some((kind, violation));
            }
        }
        best.map(|(kind, _)| {
            let (nrm, rhs) = self.normal(kind);
            (kind, nrm, rhs)
        })
    }

    fn solve(&self) -> Result<Option<DVector<f64>>> {
        let n = self.a.ncols();
        let mut x = DVector::zeros(n);
        let mut active: Vec<Active> = Vec::new();
        let mut iterations = 0;

        while let Some((kind, np, rhs)) = self.pick(&x, &active) {
            let mut u_p = 0.0;
            loop {
                iterations += 1;
                if iterations > MAX_ACTIVE_SET_ITERATIONS {
                    return Err(Error::IterationLimit(MAX_ACTIVE_SET_ITERATIONS));
                }
                let (z, r) = directions(&active, &np);

                // largest dual step before an active bound's multiplier hits zero
                let mut drop: Option<(usize, f64)> = None;
                for (j, act) in active.iter().enumerate() {
                    if matches!(act.kind, Kind::Equality(_)) || r[j] <= 1e-14 {
                        continue;
                    }
                    let t = act.multiplier / r[j];
                    if drop.is_none_or(|(_, best)| t < best) {
                        drop = Some((j, t));
                    }
                }

                if z.norm() <= 1e-12 * np.norm() {
                    // dependent on the active set: only a dual step is possible
                    let Some((j, t)) = drop else {
                        return Ok(None);
                    };
                    for (act, rj) in active.iter_mut().zip(r.iter()) {
                        act.multiplier -= t * rj;
                    }
                    u_p += t;
                    active.remove(j);
                    continue;
                }

                let slack = np.dot(&x) - rhs;
                let t_full = -slack / z.dot(&np);
                let (t, partial) = match drop {
                    Some((j, t2)) if t2 < t_full => (t2, Some(j)),
                    _ => (t_full, None),
                };
                x += &z * t;
                for (act, rj) in active.iter_mut().zip(r.iter()) {
                    act.multiplier -= t * rj;
                }
                u_p += t;
                match partial {
                    Some(j) => {
                        active.remove(j);
                    }
                    None => {
                        active.push(Active {
                            kind,
                            normal: np.clone(),
                            multiplier: u_p,
                        });
                        break;
                    }
                }
            }
        }

        let residual = (&self.a * &x - &self.b).amax();
        if residual > 1e-9 * (1.0 + self.b.amax()) {
            return Err(Error::RankDeficient(format!(
                "equality residual {residual:e} after active-set solve"
            )));
        }
        Ok(Some(x))
    }
}

#[derive(Debug, Clone)]
struct Active {
    kind: Kind,
    normal: DVector<f64>,
    multiplier: f64,
}

fn unit(n: usize, k: usize, sign: f64) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[k] = sign;
    v
}

/// Primal step `z` (component of `np` orthogonal to the active normals) and
/// dual step `r` (its coefficients on them).
fn directions(active: &[Active], np: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    if active.is_empty() {
        return (np.clone(), DVector::zeros(0));
    }
    let cols: Vec<DVector<f64>> = active.iter().map(|a| a.normal.clone()).collect();
    let nmat = DMatrix::from_columns(&cols);
    let gram = nmat.transpose() * &nmat;
    let rhs = nmat.transpose() * np;
    let r = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .unwrap_or_else(|_| DVector::zeros(active.len())),
    };
    let z = np - nmat * &r;
    (z, r)
}
