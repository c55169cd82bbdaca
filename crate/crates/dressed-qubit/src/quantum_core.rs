//! Spin-1 operator algebra, bare ↔ dressed basis changes, exact unitary steps
//! for small Hermitian matrices, and the robust-qubit condition checker.
//!
//! The bare basis is ordered `(|+1⟩, |0⟩, |−1⟩)`. The dressed basis is ordered
//! `(|B⟩, |D⟩, |0⟩)` with `|B⟩ = (|+1⟩+|−1⟩)/√2` and `|D⟩ = (|+1⟩−|−1⟩)/√2`.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = Complex64;
/// A 3×3 complex operator (angular-frequency units when it is a Hamiltonian).
pub type Op3 = Matrix3<C64>;
/// Raw amplitudes of a three-level state.
pub type Amp3 = Vector3<C64>;

/// Tolerance on Σ|a_i|² − 1 for a state to count as normalized.
pub const NORM_TOL: f64 = 1e-10;
/// Relative tolerance on max|H − H†| / max|H| for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-12;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Which basis a [`StateVector`]'s amplitudes refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// `(|+1⟩, |0⟩, |−1⟩)`.
    Bare,
    /// `(|B⟩, |D⟩, |0⟩)`.
    Dressed,
}

/// A normalized three-component state tagged with its basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    amplitudes: Amp3,
    basis: Basis,
}

impl StateVector {
    /// Wraps amplitudes, rejecting vectors whose norm deviates from one.
    pub fn new(amplitudes: Amp3, basis: Basis) -> Result<Self> {
        let norm_sq = amplitudes.norm_squared();
        if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self { amplitudes, basis })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(amplitudes: Amp3, basis: Basis) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized { norm_sq: norm * norm });
        }
        Ok(Self {
            amplitudes: amplitudes / C64::from(norm),
            basis,
        })
    }

    /// The `k`-th basis vector of `basis`.
    pub fn basis_state(k: usize, basis: Basis) -> Self {
        let mut amplitudes = Amp3::zeros();
        amplitudes[k] = ONE;
        Self { amplitudes, basis }
    }

    /// Bare `|+1⟩`.
    pub fn plus_one() -> Self {
        Self::basis_state(0, Basis::Bare)
    }

    /// Bare `|0⟩`.
    pub fn zero() -> Self {
        Self::basis_state(1, Basis::Bare)
    }

    /// Bare `|−1⟩`.
    pub fn minus_one() -> Self {
        Self::basis_state(2, Basis::Bare)
    }

    /// Bright state `|B⟩` (dressed tag).
    pub fn bright() -> Self {
        Self::basis_state(0, Basis::Dressed)
    }

    /// Dark state `|D⟩` (dressed tag).
    pub fn dark() -> Self {
        Self::basis_state(1, Basis::Dressed)
    }

    /// `|ψ±⟩ = (|0⟩ ± |B⟩)/√2` (dressed tag).
    pub fn psi(sign: f64) -> Self {
        let s = C64::from(FRAC_1_SQRT_2);
        Self {
            amplitudes: Amp3::new(s * sign.signum(), ZERO, s),
            basis: Basis::Dressed,
        }
    }

    pub fn amplitudes(&self) -> &Amp3 {
        &self.amplitudes
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    /// Amplitudes expressed in the bare basis regardless of the tag.
    pub fn bare_amplitudes(&self) -> Amp3 {
        match self.basis {
            Basis::Bare => self.amplitudes,
            Basis::Dressed => dressed_transform().adjoint() * self.amplitudes,
        }
    }

    /// `⟨self|other⟩`, converting bases as needed.
    pub fn inner(&self, other: &StateVector) -> C64 {
        if self.basis == other.basis {
            self.amplitudes.dotc(&other.amplitudes)
        } else {
            self.bare_amplitudes().dotc(&other.bare_amplitudes())
        }
    }
}

/// Standard spin-1 matrices `(Sx, Sy, Sz)` in the bare basis.
pub fn spin1_operators() -> (Op3, Op3, Op3) {
    let s = C64::from(FRAC_1_SQRT_2);
    let is = I * FRAC_1_SQRT_2;
    #[rustfmt::skip]
    let sx = Op3::new(
        ZERO, s, ZERO,
        s, ZERO, s,
        ZERO, s, ZERO,
    );
    #[rustfmt::skip]
    let sy = Op3::new(
        ZERO, -is, ZERO,
        is, ZERO, -is,
        ZERO, is, ZERO,
    );
    let sz = Op3::from_diagonal(&Amp3::new(ONE, ZERO, -ONE));
    (sx, sy, sz)
}

/// `Sz` in the bare basis.
pub fn sz() -> Op3 {
    spin1_operators().2
}

/// Λ-transition operator `|+1⟩⟨0| + |−1⟩⟨0| + h.c.` (= √2·Sx).
///
/// Drive terms use this operator so that a Rabi frequency Ω is the
/// single-transition Rabi frequency of each `|0⟩ ↔ |±1⟩` line.
pub fn lambda_transition() -> Op3 {
    #[rustfmt::skip]
    let x = Op3::new(
        ZERO, ONE, ZERO,
        ONE, ZERO, ONE,
        ZERO, ONE, ZERO,
    );
    x
}

/// Unitary `T` with rows `⟨B|, ⟨D|, ⟨0|` expressed in the bare basis, so that
/// dressed amplitudes are `T · bare`.
pub fn dressed_transform() -> Op3 {
    let s = C64::from(FRAC_1_SQRT_2);
    #[rustfmt::skip]
    let t = Op3::new(
        s, ZERO, s,
        s, ZERO, -s,
        ZERO, ONE, ZERO,
    );
    t
}

/// Expresses a bare-basis operator in the dressed basis.
pub fn operator_to_dressed(op: &Op3) -> Op3 {
    let t = dressed_transform();
    t * op * t.adjoint()
}

/// Expresses a dressed-basis operator in the bare basis.
pub fn operator_from_dressed(op: &Op3) -> Op3 {
    let t = dressed_transform();
    t.adjoint() * op * t
}

/// Changes a normalized state to the dressed basis.
pub fn to_dressed(state: &StateVector) -> Result<StateVector> {
    check_norm(state)?;
    Ok(match state.basis {
        Basis::Dressed => *state,
        Basis::Bare => StateVector {
            amplitudes: dressed_transform() * state.amplitudes,
            basis: Basis::Dressed,
        },
    })
}

/// Changes a normalized state to the bare basis.
pub fn from_dressed(state: &StateVector) -> Result<StateVector> {
    check_norm(state)?;
    Ok(match state.basis {
        Basis::Bare => *state,
        Basis::Dressed => StateVector {
            amplitudes: dressed_transform().adjoint() * state.amplitudes,
            basis: Basis::Bare,
        },
    })
}

fn check_norm(state: &StateVector) -> Result<()> {
    let norm_sq = state.amplitudes.norm_squared();
    if (norm_sq - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm_sq });
    }
    Ok(())
}

/// Largest entry modulus of a matrix.
pub fn max_abs(m: &Op3) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `max|M − M†|`.
pub fn hermitian_deviation(m: &Op3) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// True when `max|M − M†| ≤ HERMITIAN_TOL · max|M|`.
pub fn is_hermitian(m: &Op3) -> bool {
    hermitian_deviation(m) <= HERMITIAN_TOL * max_abs(m)
}

/// Exact `U = exp(−i·H·dt)` for Hermitian `H` via eigendecomposition.
pub fn hermitian_unitary_step(h: &Op3, dt: f64) -> Result<Op3> {
    let deviation = hermitian_deviation(h);
    if deviation > HERMITIAN_TOL * max_abs(h) {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(unitary_step_unchecked(h, dt))
}

/// `exp(−i·H·dt)` without the Hermiticity check (hot loops build H Hermitian
/// by construction). Only the Hermitian part of `h` is used.
pub(crate) fn unitary_step_unchecked(h: &Op3, dt: f64) -> Op3 {
    let herm = (h + h.adjoint()) * C64::from(0.5);
    let eig = herm.symmetric_eigen();
    let v = eig.eigenvectors;
    let phases = Amp3::from_fn(|k, _| C64::from_polar(1.0, -eig.eigenvalues[k] * dt));
    let mut scaled = v;
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[k];
    }
    scaled * v.adjoint()
}

/// Diagnostic report for a candidate robust two-state subspace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessReport {
    /// `max_{i,j} |⟨R_i|Sz|R_j⟩|` — zero when magnetic noise cannot act inside.
    pub max_sz_matrix_element: f64,
    /// `|⟨R_1|H_d|R_1⟩ − ⟨R_2|H_d|R_2⟩|` — zero when no relative phase builds up.
    pub eigenvalue_spread_in_r: f64,
    /// `|⟨R_1|H_d|R_2⟩|` — zero when the subspace states are stationary.
    pub offdiagonal_leakage: f64,
    /// `min_i |λ^⊥ − λ_i^R|`, the gap protecting the subspace.
    pub min_gap_nu: f64,
}

impl RobustnessReport {
    /// Both robustness conditions hold within `tol`.
    pub fn is_robust(&self, tol: f64) -> bool {
        self.max_sz_matrix_element <= tol
            && self.eigenvalue_spread_in_r <= tol
            && self.offdiagonal_leakage <= tol
    }
}

/// Checks the two robust-qubit conditions for the subspace spanned by
/// `robust_states` under the bare-basis driving Hamiltonian `h_d`.
pub fn verify_robust_conditions(robust_states: [StateVector; 2], h_d: &Op3, tol: f64) -> Result<RobustnessReport> {
    let r: [Amp3; 2] = robust_states.map(|s| s.bare_amplitudes());
    for v in &r {
        let norm_sq = v.norm_squared();
        if (norm_sq - 1.0).abs() > tol.max(NORM_TOL) {
            return Err(Error::NotNormalized { norm_sq });
        }
    }
    let overlap = r[0].dotc(&r[1]).norm();
    if overlap > tol.max(NORM_TOL) {
        return Err(crate::error::invalid(
            "robust_states",
            format!("states are not orthogonal (|⟨R1|R2⟩| = {overlap:e})"),
        ));
    }
    let sz = sz();
    let mut max_sz = 0.0_f64;
    for a in &r {
        for b in &r {
            max_sz = max_sz.max(a.dotc(&(sz * b)).norm());
        }
    }
    let e = |a: &Amp3, b: &Amp3| a.dotc(&(h_d * b));
    let l1 = e(&r[0], &r[0]).re;
    let l2 = e(&r[1], &r[1]).re;
    let leak = e(&r[0], &r[1]).norm();
    // Complement of an orthonormal pair in C³: conj(a × b).
    let perp = r[0].cross(&r[1]).map(|z| z.conj());
    let perp = perp / C64::from(perp.norm());
    let l_perp = e(&perp, &perp).re;
    Ok(RobustnessReport {
        max_sz_matrix_element: max_sz,
        eigenvalue_spread_in_r: (l1 - l2).abs(),
        offdiagonal_leakage: leak,
        min_gap_nu: (l_perp - l1).abs().min((l_perp - l2).abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn commutator(a: &Op3, b: &Op3) -> Op3 {
        a * b - b * a
    }

    /// Independent oracle: scaling-and-squaring Taylor series for exp(−iHdt).
    fn series_exp(h: &Op3, dt: f64) -> Op3 {
        let a = h * C64::new(0.0, -dt);
        let norm = max_abs(&a) * 3.0;
        let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
        let scaled = a / C64::from(2f64.powi(squarings as i32));
        let mut term = Op3::identity();
        let mut sum = Op3::identity();
        for k in 1..30 {
            term = term * scaled / C64::from(k as f64);
            sum += term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    fn eq6(rabi: f64, delta: f64) -> Op3 {
        let (sx, _, _) = spin1_operators();
        (sx * sx * C64::from(6.0) - Op3::identity() * C64::from(4.0)) * C64::from(-rabi * rabi / delta)
    }

    #[test]
    fn commutation_relations() {
        let (sx, sy, sz) = spin1_operators();
        assert!(max_abs(&(commutator(&sx, &sy) - sz * I)) < 1e-14);
        assert!(max_abs(&(commutator(&sy, &sz) - sx * I)) < 1e-14);
        assert!(max_abs(&(commutator(&sz, &sx) - sy * I)) < 1e-14);
    }

    #[test]
    fn sz_maps_bright_to_dark() {
        let b = StateVector::bright().bare_amplitudes();
        let d = StateVector::dark().bare_amplitudes();
        assert!((sz() * b - d).norm() < 1e-15);
        assert!((sz() * StateVector::plus_one().bare_amplitudes() - StateVector::plus_one().bare_amplitudes()).norm() < 1e-15);
    }

    #[test]
    fn sx_squared_spectrum_has_dark_null_vector() {
        let (sx, _, _) = spin1_operators();
        let sx2 = sx * sx;
        let mut ev: Vec<f64> = sx2.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0]).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14 && (ev[2] - 1.0).abs() < 1e-14);
        let d = StateVector::dark().bare_amplitudes();
        assert!((sx2 * d).norm() < 1e-15);
    }

    #[test]
    fn dressed_examples() {
        let p1 = to_dressed(&StateVector::plus_one()).unwrap();
        let s = FRAC_1_SQRT_2;
        assert!((p1.amplitudes()[0].re - s).abs() < 1e-15 && (p1.amplitudes()[1].re - s).abs() < 1e-15);
        let z = to_dressed(&StateVector::zero()).unwrap();
        assert!((z.amplitudes()[2] - ONE).norm() < 1e-15);
        let psi = from_dressed(&StateVector::psi(1.0)).unwrap();
        let expect = Amp3::new(C64::from(0.5), C64::from(s), C64::from(0.5));
        assert!((psi.amplitudes() - expect).norm() < 1e-15);
    }

    #[test]
    fn unnormalized_rejected() {
        assert!(StateVector::new(Amp3::new(ONE, ONE, ZERO), Basis::Bare).is_err());
        let bad = StateVector { amplitudes: Amp3::new(ONE, ONE, ZERO), basis: Basis::Bare };
        assert!(to_dressed(&bad).is_err());
    }

    #[test]
    fn unitary_step_examples() {
        let u = hermitian_unitary_step(&Op3::zeros(), 0.7).unwrap();
        assert!(max_abs(&(u - Op3::identity())) < 1e-15);
        let w = 3.3;
        let dt = 0.41;
        let u = hermitian_unitary_step(&(sz() * C64::from(w)), dt).unwrap();
        let expect = Op3::from_diagonal(&Amp3::new(C64::from_polar(1.0, -w * dt), ONE, C64::from_polar(1.0, w * dt)));
        assert!(max_abs(&(u - expect)) < 1e-14);
        let mut non_herm = Op3::zeros();
        non_herm[(0, 1)] = ONE;
        assert!(hermitian_unitary_step(&non_herm, 1.0).is_err());
    }

    #[test]
    fn unitary_step_degenerate_spectrum() {
        let h = eq6(2.0, 1.0);
        let u = hermitian_unitary_step(&h, 0.3).unwrap();
        assert!(max_abs(&(u - series_exp(&h, 0.3))) < 1e-12);
    }

    #[test]
    fn eq6_spectrum_and_eigenvectors() {
        let (rabi, delta) = (70.0, 500.0);
        let h = eq6(rabi, delta);
        let s = rabi * rabi / delta;
        for (state, val) in [
            (StateVector::bright(), -2.0 * s),
            (StateVector::zero(), -2.0 * s),
            (StateVector::dark(), 4.0 * s),
        ] {
            let v = state.bare_amplitudes();
            assert!((h * v - v * C64::from(val)).norm() < 1e-12 * s);
        }
    }

    #[test]
    fn robust_condition_examples() {
        let (rabi, delta) = (70.0, 500.0);
        let s = rabi * rabi / delta;
        let h = eq6(rabi, delta);
        let r = verify_robust_conditions([StateVector::zero(), StateVector::bright()], &h, 1e-12).unwrap();
        assert!(r.max_sz_matrix_element < 1e-15);
        assert!(r.eigenvalue_spread_in_r < 1e-12);
        assert!((r.min_gap_nu - 6.0 * s).abs() < 1e-10);
        assert!(r.is_robust(1e-10));

        let r = verify_robust_conditions([StateVector::plus_one(), StateVector::minus_one()], &h, 1e-12).unwrap();
        assert!((r.max_sz_matrix_element - 1.0).abs() < 1e-15);

        let r = verify_robust_conditions([StateVector::zero(), StateVector::dark()], &h, 1e-12).unwrap();
        assert!((r.eigenvalue_spread_in_r - 6.0 * s).abs() < 1e-10);
        assert!(!r.is_robust(1e-6));
    }

    fn arb_c64() -> impl Strategy<Value = C64> {
        (-1.0..1.0_f64, -1.0..1.0_f64).prop_map(|(a, b)| C64::new(a, b))
    }

    fn arb_state() -> impl Strategy<Value = StateVector> {
        (arb_c64(), arb_c64(), arb_c64())
            .prop_filter("nonzero", |(a, b, c)| a.norm() + b.norm() + c.norm() > 1e-3)
            .prop_map(|(a, b, c)| StateVector::normalized(Amp3::new(a, b, c), Basis::Bare).unwrap())
    }

    fn arb_hermitian() -> impl Strategy<Value = Op3> {
        proptest::collection::vec(arb_c64(), 9).prop_map(|v| {
            let m = Op3::from_iterator(v.into_iter()) * C64::from(20.0);
            (m + m.adjoint()) * C64::from(0.5)
        })
    }

    proptest! {
        #[test]
        fn basis_round_trip(state in arb_state()) {
            let back = from_dressed(&to_dressed(&state).unwrap()).unwrap();
            prop_assert!((back.amplitudes() - state.amplitudes()).norm() < 1e-12);
            let d = to_dressed(&state).unwrap();
            prop_assert!((d.amplitudes().norm_squared() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn unitary_matches_series_oracle(h in arb_hermitian(), dt in 0.0..0.5_f64) {
            let u = hermitian_unitary_step(&h, dt).unwrap();
            prop_assert!(max_abs(&(u - series_exp(&h, dt))) < 1e-10);
            prop_assert!(max_abs(&(u.adjoint() * u - Op3::identity())) < 1e-12);
        }

        #[test]
        fn norm_preserved_per_step(h in arb_hermitian(), state in arb_state(), dt in 0.0..1.0_f64) {
            let u = hermitian_unitary_step(&h, dt).unwrap();
            let out = u * state.amplitudes();
            prop_assert!((out.norm_squared() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn norm_drift_over_many_steps() {
        let (sx, sy, sz) = spin1_operators();
        let h = sx * C64::from(3.1) + sy * C64::from(-1.7) + sz * sz * C64::from(0.9);
        let u = hermitian_unitary_step(&h, 0.013).unwrap();
        let mut psi = StateVector::psi(1.0).bare_amplitudes();
        for _ in 0..1_000_000 {
            psi = u * psi;
        }
        assert!((psi.norm_squared() - 1.0).abs() < 1e-6);
    }
}
