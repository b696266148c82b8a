use std::ops::Range;
use std::thread;

use volwarp_core::warp::RowExecutor;

/// Splits output rows into `threads` contiguous blocks rendered on scoped
/// threads. Rows are independent, so the result equals the sequential one
/// bit for bit.
#[derive(Debug, Clone, Copy)]
pub struct Threads(pub usize);

impl RowExecutor for Threads {
    fn run(&self, rows: usize, row_len: usize, out: &mut [f32], kernel: &(dyn Fn(Range<usize>, &mut [f32]) + Sync)) {
        let n = self.0.clamp(1, rows.max(1));
        if n == 1 || row_len == 0 {
            kernel(0..rows, out);
            return;
        }
        let per = rows.div_ceil(n);
        thread::scope(|s| {
            for (i, chunk) in out.chunks_mut(per * row_len).enumerate() {
                let start = i * per;
                let end = (start + per).min(rows);
                s.spawn(move || kernel(start..end, chunk));
            }
        });
    }
}
