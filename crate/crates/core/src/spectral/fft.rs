//! Separable n-dimensional complex FFT built from cached 1-D `rustfft` plans.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    let forward = matches!(direction, FftDirection::Forward);
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry((len, forward))
            .or_insert_with(|| planner.plan_fft(len, direction))
            .clone()
    })
}

/// Unnormalized in-place transform of a row-major `points^dim` array.
pub(crate) fn transform(data: &mut [Complex64], dim: usize, points: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), points.pow(dim as u32));
    let fft = plan(points, direction);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    // last axis is contiguous
    fft.process_with_scratch(data, &mut scratch);

    let mut line = vec![Complex64::new(0.0, 0.0); points];
    for axis in 0..dim.saturating_sub(1) {
        let stride = points.pow((dim - 1 - axis) as u32);
        let block = stride * points;
        for base in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, value) in line.iter().enumerate() {
                    data[start + j * stride] = *value;
                }
            }
        }
    }
}
