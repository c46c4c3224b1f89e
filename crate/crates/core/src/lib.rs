//! Suspicious-activity (loitering) scoring pipeline: edge-side movement
//! features from object tracks, edge-to-fog feature streaming, fog-side
//! contextualization and fuzzy decision making.

pub mod context;
pub mod fuzzy;
pub mod harness;
pub mod track;
pub mod transport;
