//! Shoebox room simulation, scene sampling and rendering.

mod render;
mod rir;
mod sampler;

pub use render::{noise_segment, render_scene, RenderedScene, Scene, SOURCE_RMS};
pub use rir::{
    image_sources, reflection_coefficient, reflection_order_for, sabine_absorption, simulate_rir,
    ImageSource, KERNEL_TAPS, MAX_ORDER_CAP, SPEED_OF_SOUND,
};
pub use sampler::{sample_scene, MAX_ATTEMPTS};
