//! The transport contract over real sockets, for multi-process runs.
//!
//! Sends to a dead peer are silently dropped, never reported. A closed
//! connection only raises suspicion; a peer counts as failed once it stops
//! answering liveness probes, and a receive reports the failure only after
//! every connection from that peer has been read to the end.

mod frame;
mod net;
mod registry;

pub use frame::{decode_frame, encode_frame, read_frame, Frame, FrameKind, MAX_FRAME, VERSION};
pub use net::{block_on, probe_liveness, unix_micros, TcpConfig, TcpNet};
pub use registry::Registry;
