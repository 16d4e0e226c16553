pub mod error;
pub mod lti;
pub mod models;
pub mod ni;
pub mod numerics;
pub mod sdp;
pub mod stability;
