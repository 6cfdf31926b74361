pub mod credential;
pub mod crypto;
pub mod disclosure;
pub mod encoding;
pub mod keys;
pub mod par;
pub mod presentation;
pub mod wire;
