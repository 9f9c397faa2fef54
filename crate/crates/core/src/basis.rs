//! Measurement bases used by the protocols.

use core::fmt;

use crate::qmath::BlochVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Basis {
    Z,
    X,
    Y,
    /// `(X + Y)/√2`
    #[cfg_attr(feature = "serde", serde(rename = "M+"))]
    MPlus,
    /// `(X − Y)/√2`
    #[cfg_attr(feature = "serde", serde(rename = "M-"))]
    MMinus,
}

impl Basis {
    pub fn bloch(self) -> BlochVector {
        match self {
            Basis::Z => BlochVector::Z,
            Basis::X => BlochVector::X,
            Basis::Y => BlochVector::Y,
            Basis::MPlus => BlochVector::M_PLUS,
            Basis::MMinus => BlochVector::M_MINUS,
        }
    }

    pub fn is_lgi_test(self) -> bool {
        matches!(self, Basis::MPlus | Basis::MMinus)
    }

    pub fn name(self) -> &'static str {
        match self {
            Basis::Z => "Z",
            Basis::X => "X",
            Basis::Y => "Y",
            Basis::MPlus => "M+",
            Basis::MMinus => "M-",
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The two conjugate bases a BB84-style run encodes key bits in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BasisPair {
    /// `Z` and `X`, the textbook BB84 choice.
    ZX,
    /// `X` and `Y`, used by LG-BB84 so that `M±` sit between them.
    XY,
}

impl BasisPair {
    pub fn bases(self) -> [Basis; 2] {
        match self {
            BasisPair::ZX => [Basis::Z, Basis::X],
            BasisPair::XY => [Basis::X, Basis::Y],
        }
    }

    /// Position of `b` in [`BasisPair::bases`].
    pub fn position(self, b: Basis) -> Option<usize> {
        self.bases().iter().position(|&x| x == b)
    }
}
