pub mod batch;
pub mod compositor;
pub mod config;
pub mod filter;
pub mod glyph_shaper;
pub mod layer;
pub mod pipeline;
pub mod postprocessor;
pub mod resources;
pub mod rng;
pub mod span;
pub mod text_sampler;
pub mod transformer;
pub mod styler;
