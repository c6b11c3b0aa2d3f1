use serde::{Deserialize, Serialize};

use crate::atomic::{AtomConstants, Manifold, Polarization, ZeemanState};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    /// 493 nm, S1/2 ↔ P1/2.
    Blue493,
    /// 650 nm, D3/2 ↔ P1/2.
    Red650,
}

impl Color {
    /// Lower manifold addressed by this color.
    pub fn lower(self) -> Manifold {
        match self {
            Color::Blue493 => Manifold::SHalf,
            Color::Red650 => Manifold::DThreeHalf,
        }
    }
}

/// Light of one color, split into polarization components.
///
/// `saturation[pol.index()]` is the saturation parameter I/I_sat of each
/// component; `offset[pol.index()]` is that component's laser frequency
/// offset from the zero-field line center, in Hz. All-zero offsets describe a
/// single laser at line center: the π component is then resonant and the σ
/// components sit one Zeeman splitting away from their shifted lines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub color: Color,
    pub saturation: [f64; 3],
    pub offset: [f64; 3],
}

impl BeamConfig {
    pub fn dark(color: Color) -> Self {
        BeamConfig {
            color,
            saturation: [0.0; 3],
            offset: [0.0; 3],
        }
    }

    /// Equal-intensity components at line center.
    pub fn line_center(color: Color, pols: &[Polarization], saturation: f64) -> Self {
        pols.iter().fold(Self::dark(color), |b, &p| b.with(p, saturation, 0.0))
    }

    pub fn all_polarizations(color: Color, saturation: f64) -> Self {
        Self::line_center(color, &Polarization::ALL, saturation)
    }

    pub fn with(mut self, pol: Polarization, saturation: f64, offset_hz: f64) -> Self {
        self.saturation[pol.index()] = saturation;
        self.offset[pol.index()] = offset_hz;
        self
    }

    pub fn is_on(&self, pol: Polarization) -> bool {
        self.saturation[pol.index()] > 0.0
    }

    pub fn active(&self) -> impl Iterator<Item = Polarization> + '_ {
        Polarization::ALL.into_iter().filter(|&p| self.is_on(p))
    }

    pub fn validate(&self) -> Result<()> {
        for p in Polarization::ALL {
            let s = self.saturation[p.index()];
            let o = self.offset[p.index()];
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::domain(format!("{:?} {p} saturation must be finite and ≥ 0, got {s}", self.color)));
            }
            if !o.is_finite() {
                return Err(Error::domain(format!("{:?} {p} offset must be finite", self.color)));
            }
        }
        if self.active().next().is_none() {
            return Err(Error::domain(format!("{:?} beam has no component switched on", self.color)));
        }
        Ok(())
    }

    /// Reflected configuration under m_J → −m_J: σ+ and σ− swap and every
    /// frequency offset changes sign.
    pub fn mirrored(&self) -> Self {
        let mut out = Self::dark(self.color);
        for p in Polarization::ALL {
            out.saturation[p.mirrored().index()] = self.saturation[p.index()];
            out.offset[p.mirrored().index()] = -self.offset[p.index()];
        }
        out
    }

    /// Mean Zeeman shift (Hz) of the lines this polarization drives.
    pub fn line_centroid(&self, pol: Polarization, constants: &AtomConstants, b_gauss: f64) -> f64 {
        let shifts: Vec<f64> = self
            .color
            .lower()
            .states()
            .filter_map(|l| {
                ZeemanState::new(Manifold::PHalf, l.two_mj() + pol.delta_two_m())
                    .ok()
                    .map(|p| constants.zeeman_shift(p, b_gauss) - constants.zeeman_shift(l, b_gauss))
            })
            .collect();
        shifts.iter().sum::<f64>() / shifts.len() as f64
    }

    /// Laser offset from the polarization's Zeeman-shifted line centroid, in Hz.
    pub fn detuning_from_resonance(&self, pol: Polarization, constants: &AtomConstants, b_gauss: f64) -> f64 {
        self.offset[pol.index()] - self.line_centroid(pol, constants, b_gauss)
    }
}
