use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Named color ramps. Colors are linear interpolations between anchors given
/// as 8-bit sRGB triples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Colormap {
    /// Perceptually uniform dark blue → green → yellow.
    #[default]
    Viridis,
    Gray,
    /// Diverging blue → white → red.
    CoolWarm,
}

const VIRIDIS: [[u8; 3]; 11] = [
    [68, 1, 84],
    [72, 35, 116],
    [64, 67, 135],
    [52, 94, 141],
    [41, 120, 142],
    [32, 144, 140],
    [34, 167, 132],
    [68, 190, 112],
    [121, 209, 81],
    [189, 222, 38],
    [253, 231, 37],
];

const GRAY: [[u8; 3]; 2] = [[0, 0, 0], [255, 255, 255]];

const COOLWARM: [[u8; 3]; 5] = [[59, 76, 192], [141, 176, 254], [221, 221, 221], [244, 154, 123], [180, 4, 38]];

impl Colormap {
    pub const ALL: [Colormap; 3] = [Colormap::Viridis, Colormap::Gray, Colormap::CoolWarm];

    pub fn name(self) -> &'static str {
        match self {
            Colormap::Viridis => "viridis",
            Colormap::Gray => "gray",
            Colormap::CoolWarm => "coolwarm",
        }
    }

    fn anchors(self) -> &'static [[u8; 3]] {
        match self {
            Colormap::Viridis => &VIRIDIS,
            Colormap::Gray => &GRAY,
            Colormap::CoolWarm => &COOLWARM,
        }
    }

    /// Color at `t ∈ [0, 1]` as RGB in `[0, 1]`; `t` is clamped.
    pub fn color(self, t: f64) -> [f64; 3] {
        let anchors = self.anchors();
        let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
        let pos = t * (anchors.len() - 1) as f64;
        let i = (pos.floor() as usize).min(anchors.len() - 2);
        let f = pos - i as f64;
        let (a, b) = (anchors[i], anchors[i + 1]);
        std::array::from_fn(|c| (a[c] as f64 + f * (b[c] as f64 - a[c] as f64)) / 255.0)
    }
}

impl fmt::Display for Colormap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Colormap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Colormap::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown colormap {s:?} (viridis, gray, coolwarm)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_match_anchors() {
        assert_eq!(Colormap::Gray.color(0.0), [0.0; 3]);
        assert_eq!(Colormap::Gray.color(1.0), [1.0; 3]);
        let lo = Colormap::Viridis.color(-3.0);
        assert_eq!(lo, [68.0 / 255.0, 1.0 / 255.0, 84.0 / 255.0]);
        let hi = Colormap::Viridis.color(1.0);
        assert_eq!(hi, [253.0 / 255.0, 231.0 / 255.0, 37.0 / 255.0]);
    }

    #[test]
    fn names_parse() {
        for c in Colormap::ALL {
            assert_eq!(c.name().parse::<Colormap>().unwrap(), c);
        }
        assert!("jet".parse::<Colormap>().is_err());
    }
}
