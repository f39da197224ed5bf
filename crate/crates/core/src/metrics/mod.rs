//! Filtered-signal SNR, SDR, STOI and the per-method report.

mod report;
mod sdr;
mod snr;
mod stoi;

pub use report::{
    evaluate, evaluate_outputs, score_utterance, FilteredEnergies, MetricReport, UtteranceScores,
};
pub use sdr::{sdr, DISTORTION_FILTER_LEN};
pub use snr::{filtered_energies, snr_filtered, snr_from_energies};
pub use stoi::stoi;

/// Bound applied to every dB figure before it enters a table.
pub const DB_CAP: f64 = 60.0;

pub(crate) fn cap_db(x: f64) -> f64 {
    if x.is_nan() {
        x
    } else {
        x.clamp(-DB_CAP, DB_CAP)
    }
}
