pub mod classify;
pub mod embed;
pub mod eval;
pub mod fit;
pub mod matching;
pub mod roc;
pub mod synth;

use std::path::{Path, PathBuf};

/// File name of a category's prototype; characters outside
/// `[A-Za-z0-9_-]` become `_`.
pub fn model_file_name(category: &str) -> String {
    let safe: String = category
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("model-{safe}.json")
}

pub fn in_dir(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

/// Progress goes to stderr so stdout stays machine-readable.
macro_rules! note {
    ($($arg:tt)*) => { eprintln!("[ragkit] {}", format_args!($($arg)*)) };
}
pub(crate) use note;
