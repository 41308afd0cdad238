//! Multi-dimensional FFTs over row-major arrays and the wavenumber lattice
//! of a periodic box.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

pub struct FftNd {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("shape", &self.shape).finish()
    }
}

impl FftNd {
    pub fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            shape: shape.to_vec(),
            forward: shape.iter().map(|&n| planner.plan_fft(n, FftDirection::Forward)).collect(),
            inverse: shape.iter().map(|&n| planner.plan_fft(n, FftDirection::Inverse)).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform including the `1/len` normalisation.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(data.len(), self.len());
        let d = self.shape.len();
        let mut stride = 1;
        for axis in (0..d).rev() {
            let n = self.shape[axis];
            let plan = &plans[axis];
            if stride == 1 {
                plan.process(data);
            } else {
                let block = n * stride;
                let mut line = vec![Complex64::default(); n];
                let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
                for start in (0..data.len()).step_by(block) {
                    for offset in 0..stride {
                        let base = start + offset;
                        for (k, v) in line.iter_mut().enumerate() {
                            *v = data[base + k * stride];
                        }
                        plan.process_with_scratch(&mut line, &mut scratch);
                        for (k, v) in line.iter().enumerate() {
                            data[base + k * stride] = *v;
                        }
                    }
                }
            }
            stride *= n;
        }
    }
}

/// Angular wavenumbers `2π m / L` for an axis of `n` points and length `length`,
/// in FFT order.
pub fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let m = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
            std::f64::consts::TAU * m / length
        })
        .collect()
}

/// Wavenumbers for first derivatives: the unpaired Nyquist mode of an even
/// axis is zeroed so that derivatives of real data stay real.
pub fn derivative_wavenumbers(n: usize, length: f64) -> Vec<f64> {
    let mut k = wavenumbers(n, length);
    if n.is_multiple_of(2) {
        k[n / 2] = 0.0;
    }
    k
}

pub fn to_complex(values: &[f64]) -> Vec<Complex64> {
    values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}
