//! Fixed text prompts for the diffusion backend.

/// Prompt for the initial back view.
pub const BACK_INIT_PROMPT: &str =
    "back view of a person wearing nice clothes in front of a solid gray background, best quality";

const FRONT_TEMPLATE_HEAD: &str = "a person wearing nice clothes in front of a solid white background, ";
const FRONT_TEMPLATE_TAIL: &str = " view, best quality, extremely detailed";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PromptStyle {
    FrontPipeline,
    BackInit,
}

/// Wraps any azimuth into `(-180, 180]`.
pub fn normalize_azimuth(azimuth: f64) -> f64 {
    let mut a = azimuth % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

/// `front` strictly inside ±45°, otherwise the label of the nearest 45° grid
/// azimuth (ties resolve away from the front).
pub fn view_label(azimuth: f64) -> &'static str {
    let a = normalize_azimuth(azimuth);
    if a.abs() < 45.0 {
        return "front";
    }
    let grid = (a / 45.0).round() as i64 * 45;
    match grid {
        0 => "front",
        45 => "left",
        -45 => "right",
        90 | -90 => "side",
        _ => "back",
    }
}

pub fn view_prompt(azimuth: f64, style: PromptStyle) -> String {
    match style {
        PromptStyle::FrontPipeline => {
            format!("{FRONT_TEMPLATE_HEAD}{}{FRONT_TEMPLATE_TAIL}", view_label(azimuth))
        }
        PromptStyle::BackInit => BACK_INIT_PROMPT.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_labels() {
        let cases = [
            (0.0, "front"),
            (45.0, "left"),
            (-45.0, "right"),
            (90.0, "side"),
            (-90.0, "side"),
            (135.0, "back"),
            (-135.0, "back"),
            (180.0, "back"),
            (-180.0, "back"),
            (315.0, "right"),
            (10.0, "front"),
            (44.9, "front"),
            (-30.0, "front"),
            (50.0, "left"),
            (67.5, "side"),
            (112.5, "back"),
        ];
        for (az, label) in cases {
            assert_eq!(view_label(az), label, "azimuth {az}");
        }
    }

    #[test]
    fn prompt_strings_exact() {
        assert_eq!(
            view_prompt(45.0, PromptStyle::FrontPipeline),
            "a person wearing nice clothes in front of a solid white background, left view, best quality, extremely detailed"
        );
        assert!(view_prompt(-90.0, PromptStyle::FrontPipeline).contains("side view"));
        assert_eq!(
            view_prompt(180.0, PromptStyle::BackInit),
            "back view of a person wearing nice clothes in front of a solid gray background, best quality"
        );
    }

    #[test]
    fn grid_prompts_unique() {
        // Eight grid views, five labels; prompts are unique per label.
        let labels: std::collections::BTreeSet<String> = [0.0, 45.0, -45.0, 90.0, -90.0, 135.0, -135.0, 180.0]
            .iter()
            .map(|&a| view_prompt(a, PromptStyle::FrontPipeline))
            .collect();
        assert_eq!(labels.len(), 5);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_azimuth(-180.0), 180.0);
        assert_eq!(normalize_azimuth(540.0), 180.0);
        assert_eq!(normalize_azimuth(-190.0), 170.0);
    }
}
