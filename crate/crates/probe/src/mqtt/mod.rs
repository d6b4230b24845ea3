pub mod broker;
pub mod codec;

pub use broker::{start_broker, BrokerConfig, BrokerHandle, BrokerStats};
pub use codec::{Packet, Publish};
