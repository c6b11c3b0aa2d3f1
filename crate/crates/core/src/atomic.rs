//! Static atomic data for 138Ba+ and exact angular-momentum algebra.
//!
//! Magnetic quantum numbers are stored doubled (`two_mj = 2·m_J`) so that
//! half-integer projections stay exact and selection rules are integer
//! comparisons.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quartet::{QuartetState, NORM_TOLERANCE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manifold {
    /// 6S1/2 ground doublet.
    SHalf,
    /// 6P1/2 excited doublet.
    PHalf,
    /// 5D3/2 metastable quartet.
    DThreeHalf,
}

impl Manifold {
    pub const fn two_j(self) -> i32 {
        match self {
            Manifold::SHalf | Manifold::PHalf => 1,
            Manifold::DThreeHalf => 3,
        }
    }

    pub const fn dim(self) -> usize {
        (self.two_j() + 1) as usize
    }

    /// Sublevels in ascending m_J order.
    pub fn states(self) -> impl Iterator<Item = ZeemanState> {
        let two_j = self.two_j();
        (0..=two_j).map(move |k| ZeemanState {
            manifold: self,
            two_mj: -two_j + 2 * k,
        })
    }

    fn label(self) -> &'static str {
        match self {
            Manifold::SHalf => "s",
            Manifold::PHalf => "p",
            Manifold::DThreeHalf => "d",
        }
    }
}

/// One magnetic sublevel `|manifold, m_J⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ZeemanState {
    manifold: Manifold,
    two_mj: i32,
}

impl ZeemanState {
    pub fn new(manifold: Manifold, two_mj: i32) -> Result<Self> {
        let two_j = manifold.two_j();
        if two_mj.abs() > two_j || (two_mj - two_j).rem_euclid(2) != 0 {
            return Err(Error::domain(format!(
                "2·m_J = {two_mj} is not a sublevel of a J = {two_j}/2 manifold"
            )));
        }
        Ok(ZeemanState { manifold, two_mj })
    }

    pub fn s(two_mj: i32) -> Self {
        Self::new(Manifold::SHalf, two_mj).expect("invalid S sublevel")
    }

    pub fn p(two_mj: i32) -> Self {
        Self::new(Manifold::PHalf, two_mj).expect("invalid P sublevel")
    }

    pub fn d(two_mj: i32) -> Self {
        Self::new(Manifold::DThreeHalf, two_mj).expect("invalid D sublevel")
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn two_mj(&self) -> i32 {
        self.two_mj
    }

    pub fn mj(&self) -> f64 {
        f64::from(self.two_mj) / 2.0
    }

    /// Position of this sublevel in the ascending-m_J basis of its manifold.
    pub fn index(&self) -> usize {
        ((self.two_mj + self.manifold.two_j()) / 2) as usize
    }

    /// Inverse of [`ZeemanState::index`].
    pub fn from_index(manifold: Manifold, index: usize) -> Result<Self> {
        let two_mj = 2 * index as i32 - manifold.two_j();
        Self::new(manifold, two_mj)
    }

    /// Reflection m_J → −m_J.
    pub fn mirrored(&self) -> Self {
        ZeemanState {
            manifold: self.manifold,
            two_mj: -self.two_mj,
        }
    }
}

impl fmt::Display for ZeemanState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.two_mj >= 0 { "+" } else { "-" };
        write!(f, "{}_{}{}/2", self.manifold.label(), sign, self.two_mj.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    SigmaPlus,
    SigmaMinus,
    Pi,
}

impl Polarization {
    pub const ALL: [Polarization; 3] = [Polarization::SigmaPlus, Polarization::SigmaMinus, Polarization::Pi];

    /// Change of 2·m_J on absorption (lower → upper).
    pub const fn delta_two_m(self) -> i32 {
        match self {
            Polarization::SigmaPlus => 2,
            Polarization::SigmaMinus => -2,
            Polarization::Pi => 0,
        }
    }

    pub fn from_delta_two_m(delta: i32) -> Option<Self> {
        match delta {
            2 => Some(Polarization::SigmaPlus),
            -2 => Some(Polarization::SigmaMinus),
            0 => Some(Polarization::Pi),
            _ => None,
        }
    }

    pub const fn index(self) -> usize {
        match self {
            Polarization::SigmaPlus => 0,
            Polarization::SigmaMinus => 1,
            Polarization::Pi => 2,
        }
    }

    pub const fn mirrored(self) -> Self {
        match self {
            Polarization::SigmaPlus => Polarization::SigmaMinus,
            Polarization::SigmaMinus => Polarization::SigmaPlus,
            Polarization::Pi => Polarization::Pi,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Polarization::SigmaPlus => "sigma_plus",
            Polarization::SigmaMinus => "sigma_minus",
            Polarization::Pi => "pi",
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Atomic constants. `mu_b` is fixed at the round 1.4 MHz/G value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AtomConstants {
    /// Bohr magneton in Hz/G.
    pub mu_b: f64,
    pub g_s: f64,
    pub g_p: f64,
    pub g_d: f64,
    /// P1/2 lifetime in s.
    pub p_lifetime: f64,
    /// D3/2 lifetime in s.
    pub d_lifetime: f64,
    /// Ratio of P1/2 decays into S1/2 versus D3/2.
    pub branching_s_over_d: f64,
}

impl Default for AtomConstants {
    fn default() -> Self {
        AtomConstants {
            mu_b: 1.4e6,
            g_s: 2.0,
            g_p: 2.0 / 3.0,
            g_d: 4.0 / 5.0,
            p_lifetime: 7.86e-9,
            d_lifetime: 80.0,
            branching_s_over_d: 3.0,
        }
    }
}

impl AtomConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mu_b", self.mu_b),
            ("g_s", self.g_s),
            ("g_p", self.g_p),
            ("g_d", self.g_d),
            ("p_lifetime", self.p_lifetime),
            ("d_lifetime", self.d_lifetime),
            ("branching_s_over_d", self.branching_s_over_d),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("atomic constant `{name}` must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn g_factor(&self, manifold: Manifold) -> f64 {
        match manifold {
            Manifold::SHalf => self.g_s,
            Manifold::PHalf => self.g_p,
            Manifold::DThreeHalf => self.g_d,
        }
    }

    /// P1/2 decay rate Γ in rad/s.
    pub fn p_linewidth(&self) -> f64 {
        1.0 / self.p_lifetime
    }

    /// Fraction of P1/2 decays landing in `lower`; the S and D fractions sum to 1.
    pub fn branching_fraction(&self, lower: Manifold) -> f64 {
        let r = self.branching_s_over_d;
        match lower {
            Manifold::SHalf => r / (1.0 + r),
            Manifold::DThreeHalf => 1.0 / (1.0 + r),
            Manifold::PHalf => 0.0,
        }
    }

    /// Linear Zeeman shift of a sublevel, in Hz.
    pub fn zeeman_shift(&self, state: ZeemanState, b_gauss: f64) -> f64 {
        self.g_factor(state.manifold) * self.mu_b * b_gauss * state.mj()
    }

    /// Frequency gap between adjacent sublevels of `manifold`, in Hz.
    ///
    /// For the S doublet this is the full doublet splitting 2·μ_B·B.
    pub fn zeeman_splitting(&self, manifold: Manifold, b_gauss: f64) -> Result<f64> {
        if !(b_gauss >= 0.0) || !b_gauss.is_finite() {
            return Err(Error::domain(format!("field must be finite and ≥ 0 G, got {b_gauss}")));
        }
        Ok(self.g_factor(manifold) * self.mu_b * b_gauss)
    }
}

fn factorial(n: i32) -> f64 {
    debug_assert!(n >= 0);
    (1..=n).fold(1.0, |acc, k| acc * f64::from(k))
}

/// Clebsch–Gordan coefficient ⟨j1 m1; j2 m2 | j m⟩ from the Racah formula,
/// Condon–Shortley phase convention. All arguments are doubled.
pub fn clebsch_gordan(two_j1: i32, two_m1: i32, two_j2: i32, two_m2: i32, two_j: i32, two_m: i32) -> f64 {
    if two_m1 + two_m2 != two_m {
        return 0.0;
    }
    if two_m1.abs() > two_j1 || two_m2.abs() > two_j2 || two_m.abs() > two_j {
        return 0.0;
    }
    if two_j < (two_j1 - two_j2).abs() || two_j > two_j1 + two_j2 || (two_j1 + two_j2 + two_j) % 2 != 0 {
        return 0.0;
    }
    // Every combination below is an integer once the triangle and parity checks pass.
    let h = |x: i32| x / 2;
    let prefactor = (f64::from(two_j + 1)
        * factorial(h(two_j + two_j1 - two_j2))
        * factorial(h(two_j - two_j1 + two_j2))
        * factorial(h(two_j1 + two_j2 - two_j))
        / factorial(h(two_j1 + two_j2 + two_j) + 1))
        .sqrt()
        * (factorial(h(two_j + two_m))
            * factorial(h(two_j - two_m))
            * factorial(h(two_j1 - two_m1))
            * factorial(h(two_j1 + two_m1))
            * factorial(h(two_j2 - two_m2))
            * factorial(h(two_j2 + two_m2)))
        .sqrt();

    let a = h(two_j1 + two_j2 - two_j);
    let b = h(two_j1 - two_m1);
    let c = h(two_j2 + two_m2);
    let d = h(two_j - two_j2 + two_m1);
    let e = h(two_j - two_j1 - two_m2);
    let k_min = 0.max(-d).max(-e);
    let k_max = a.min(b).min(c);
    let sum: f64 = (k_min..=k_max)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign / (factorial(k) * factorial(a - k) * factorial(b - k) * factorial(c - k) * factorial(d + k) * factorial(e + k))
        })
        .sum();
    prefactor * sum
}

fn check_dipole_pair(lower: ZeemanState, upper: ZeemanState) -> Result<()> {
    match (lower.manifold, upper.manifold) {
        (Manifold::SHalf, Manifold::PHalf) | (Manifold::DThreeHalf, Manifold::PHalf) => Ok(()),
        (l, u) => Err(Error::domain(format!(
            "no electric-dipole coupling modelled from {l:?} to {u:?}"
        ))),
    }
}

/// Signed coupling amplitude ⟨J_l m_l; 1 q | J_u m_u⟩ for absorption from
/// `lower` to `upper` with polarization `pol`.
pub fn cg_amplitude(lower: ZeemanState, upper: ZeemanState, pol: Polarization) -> Result<f64> {
    check_dipole_pair(lower, upper)?;
    if upper.two_mj - lower.two_mj != pol.delta_two_m() {
        return Ok(0.0);
    }
    Ok(clebsch_gordan(
        lower.manifold.two_j(),
        lower.two_mj,
        2,
        pol.delta_two_m(),
        upper.manifold.two_j(),
        upper.two_mj,
    ))
}

/// Relative line strength, normalized so that the weights from one upper
/// sublevel into all sublevels of one lower manifold sum to 1.
pub fn cg_weight(lower: ZeemanState, upper: ZeemanState, pol: Polarization) -> Result<f64> {
    cg_amplitude(lower, upper, pol).map(|a| a * a)
}

/// J_z eigenvalues in the ascending-m_J D3/2 basis, in units of ħ.
pub const JZ_DIAGONAL: [f64; 4] = [-1.5, -0.5, 0.5, 1.5];

fn check_unit(v: &[Complex64; 4], name: &str) -> Result<()> {
    let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::domain(format!("`{name}` has norm {norm}, expected 1")));
    }
    Ok(())
}

/// ⟨a|J_z|b⟩ over D3/2 amplitudes, in units of ħ.
pub fn jz_expectation(a: &[Complex64; 4], b: &[Complex64; 4]) -> Result<Complex64> {
    check_unit(a, "a")?;
    check_unit(b, "b")?;
    Ok(a.iter()
        .zip(b)
        .zip(JZ_DIAGONAL)
        .map(|((x, y), m)| x.conj() * y * m)
        .sum())
}

/// The two endpoints of a qubit whose field sensitivity is requested.
#[derive(Clone, Debug)]
pub enum QubitPair {
    Zeeman(ZeemanState, ZeemanState),
    Quartet(QuartetState, QuartetState),
}

/// Linear field sensitivity of the qubit transition frequency, in kHz/mG.
pub fn qubit_sensitivity(constants: &AtomConstants, pair: &QubitPair) -> Result<f64> {
    // 1 Hz/G = 1e-6 kHz/mG
    const HZ_PER_G_TO_KHZ_PER_MG: f64 = 1e-6;
    let (g, delta_mj) = match pair {
        QubitPair::Zeeman(a, b) => {
            if a.manifold != b.manifold || a.manifold == Manifold::PHalf {
                return Err(Error::domain(format!(
                    "sensitivity defined for S or D sublevel pairs, got {a} and {b}"
                )));
            }
            (constants.g_factor(a.manifold), a.mj() - b.mj())
        }
        QubitPair::Quartet(a, b) => {
            let ja = jz_expectation(a.amplitudes(), a.amplitudes())?.re;
            let jb = jz_expectation(b.amplitudes(), b.amplitudes())?.re;
            // Differences at round-off level are an exact cancellation.
            let d = ja - jb;
            (constants.g_d, if d.abs() < 1e-12 { 0.0 } else { d })
        }
    };
    Ok((g * constants.mu_b * delta_mj).abs() * HZ_PER_G_TO_KHZ_PER_MG)
}
