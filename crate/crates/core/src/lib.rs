pub mod gf256;
pub mod sss;
pub mod password;
pub mod envelope;
pub mod fabric;
pub mod server;
pub mod client;
pub mod threat;
pub mod survey;
