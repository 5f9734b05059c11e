//! Daily records in, normalized lookback windows and split indices out.

mod ingest;
mod norm;
mod split;
mod synth;
mod window;

pub use ingest::{load_csv, parse_csv, write_csv, DailyRecord, Gap, LoadedSeries, Schema};
pub use norm::{denormalize_target, normalize_apply, normalize_fit, NormStats};
pub use split::{repeated_splits, split_712, split_chronological, Split, SplitMode};
pub use synth::{synth_generate, SynthConfig};
pub use window::{make_windows, window_rows, Sample, WindowedDataset};
