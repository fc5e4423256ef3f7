//! Readout curve fitting, variance maps and squeezing extraction.

mod curve;
mod map;
mod stretched;
mod xi;

pub use curve::{shift_curve, DecayCurve};
pub use map::{build_variance_map, slice_maps, slice_overlap_error, MapPoint, VarianceMap};
pub use stretched::{fit_stretched, CurveFit, FitResult, FitWindow, PMode, WindowStart};
pub use xi::{extract_xi2, sinusoid_minimum, MeasuredT2, Sinusoid, XiInput, XiPoint};
