use std::path::Path;

use super::checkpoint::write_atomic;
use super::train::LossRecord;

pub const LOSS_CSV_HEADER: &str = "step,total,fm,stop";

/// Loss history as CSV. Values use the shortest representation that parses back exactly.
pub fn loss_csv(history: &[LossRecord]) -> String {
    let mut out = String::from(LOSS_CSV_HEADER);
    out.push('\n');
    for r in history {
        out.push_str(&format!("{},{},{},{}\n", r.step, r.total, r.fm, r.stop));
    }
    out
}

pub fn write_loss_csv(path: &Path, history: &[LossRecord]) -> std::io::Result<()> {
    write_atomic(path, loss_csv(history).as_bytes())
}
