//! Procedural ground-truth textures for oracle runs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::image_buf::{ColorImage, Rgb};
use crate::texture::TextureMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TexturePattern {
    Checker,
    Stripes,
    Solid,
}

const CHECKER_CELLS: usize = 8;
const STRIPE_COUNT: usize = 16;

const PALETTE: [Rgb; 4] = [
    [0.85, 0.20, 0.15],
    [0.15, 0.35, 0.80],
    [0.95, 0.80, 0.20],
    [0.20, 0.65, 0.30],
];

impl TexturePattern {
    pub fn render(self, size: usize) -> TextureMap {
        let cell = (size / CHECKER_CELLS).max(1);
        let stripe = (size / STRIPE_COUNT).max(1);
        TextureMap::from_image(ColorImage::from_fn(size, size, |x, y| match self {
            // Two-tone checker with a per-row palette shift so that mirrored
            // placements are distinguishable.
            TexturePattern::Checker => {
                let (cx, cy) = (x / cell, y / cell);
                if (cx + cy) % 2 == 0 {
                    PALETTE[cy % 2 * 2]
                } else {
                    PALETTE[1 + cy % 2 * 2]
                }
            }
            TexturePattern::Stripes => PALETTE[(x / stripe) % PALETTE.len()],
            TexturePattern::Solid => [0.2, 0.6, 0.4],
        }))
    }
}

impl FromStr for TexturePattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "checker" => Ok(Self::Checker),
            "stripes" => Ok(Self::Stripes),
            "solid" => Ok(Self::Solid),
            other => Err(Error::Config(format!(
                "unknown texture pattern {other:?} (expected checker, stripes or solid)"
            ))),
        }
    }
}

impl fmt::Display for TexturePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Checker => "checker",
            Self::Stripes => "stripes",
            Self::Solid => "solid",
        })
    }
}
