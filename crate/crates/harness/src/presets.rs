//! Canned experiment configurations for the reference studies: spike
//! signals, decaying exponentials, the HardEM benchmark and the refinement
//! study. Trial counts default to 100 per cell.

use crate::config::ExperimentConfig;

/// A named study: some presets expand into more than one experiment run.
pub struct Preset {
    pub name: &'static str,
    pub runs: Vec<(String, ExperimentConfig)>,
}

fn parse(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text).expect("preset config is valid")
}

pub fn preset(name: &str, trials: usize, seed: u64) -> Option<Preset> {
    let runs = match name {
        "fig4" => vec![(
            "fig4".to_string(),
            parse(&format!(
                r#"
experiment = "spikes"
n = 121
k1 = 2
k2 = 2
snr_db = [-10.0, 0.0, 10.0, 20.0, 30.0, 40.0, 50.0]
shuffle_fractions = [0.25, 0.33, 0.5]
trials = {trials}
seed = {seed}
"#
            )),
        )],
        "fig5" => vec![(
            "fig5".to_string(),
            parse(&format!(
                r#"
experiment = "decaying"
n = 121
k1 = 2
k2 = 2
alpha = 11.18
snr_db = [-10.0, 0.0, 10.0, 20.0, 30.0, 40.0, 50.0]
shuffle_fractions = [0.25, 0.33, 0.5]
trials = {trials}
seed = {seed}
"#
            )),
        )],
        "fig6" => vec![
            (
                "fig6_snrsweep".to_string(),
                parse(&format!(
                    r#"
experiment = "benchmark"
n = 121
k1 = 2
k2 = 2
alpha = 11.18
snr_db = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0]
shuffle_counts = [12]
trials = {trials}
seed = {seed}
"#
                )),
            ),
            (
                "fig6_shufflesweep".to_string(),
                parse(&format!(
                    r#"
experiment = "benchmark"
n = 121
k1 = 2
k2 = 2
alpha = 11.18
snr_db = [30.0]
shuffle_counts = [1, 5, 9, 13, 17, 21, 25, 29, 33, 37, 41, 45, 49, 53, 57]
trials = {trials}
seed = {seed}
"#
                )),
            ),
        ],
        "fig7" => vec![(
            "fig7".to_string(),
            parse(&format!(
                r#"
experiment = "refinement"
n = 121
k1 = 2
k2 = 2
alpha = 11.18
snr_db = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0]
shuffle_counts = [40]
trials = {trials}
seed = {seed}
"#
            )),
        )],
        _ => return None,
    };
    Some(Preset {
        name: match name {
            "fig4" => "fig4",
            "fig5" => "fig5",
            "fig6" => "fig6",
            _ => "fig7",
        },
        runs,
    })
}
