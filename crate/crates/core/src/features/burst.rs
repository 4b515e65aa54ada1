use serde::{Deserialize, Serialize};

use super::DirectionFilter;
use crate::flow::{Direction, Flow};

/// Maximal run of consecutive same-direction packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Burst {
    pub direction: Direction,
    pub packet_count: u32,
    pub byte_total: u64,
}

/// Groups the flow into bursts. One-sided filters group on the full packet
/// sequence and then drop the other direction's bursts.
pub fn compute_bursts(flow: &Flow, filter: DirectionFilter) -> Vec<Burst> {
    let mut bursts: Vec<Burst> = Vec::new();
    for p in &flow.packets {
        match bursts.last_mut() {
            Some(b) if b.direction == p.direction => {
                b.packet_count += 1;
                b.byte_total += p.size as u64;
            }
            _ => bursts.push(Burst {
                direction: p.direction,
                packet_count: 1,
                byte_total: p.size as u64,
            }),
        }
    }
    bursts.retain(|b| filter.keeps(b.direction));
    bursts
}
