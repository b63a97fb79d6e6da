pub mod dialogue;
pub mod eval;
pub mod geometry;
pub mod grasp;
pub mod llm;
pub mod perception;
pub mod pipeline;
pub mod scene;
pub mod seed;
