//! Bounded per-subscriber outbound queue.
//!
//! When full, an UPDATE replaces the queued UPDATE for the same object and
//! attribute set by removing it and appending the newer one at the back,
//! so a publisher's updates may show gaps but never arrive out of order.
//! Without such a candidate the oldest queued UPDATE is dropped. Anything
//! else that does not fit is an overflow and the connection is closed.

use std::collections::VecDeque;

use thiserror::Error;

use super::message::{FedMessage, MsgType};

pub const DEFAULT_QUEUE_BOUND: usize = 256;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("outbound queue overflow ({0} messages)")]
pub struct Overflow(pub usize);

#[derive(Debug)]
pub struct OutboundQueue {
    bound: usize,
    items: VecDeque<FedMessage>,
    coalesced: u64,
}

fn update_key(msg: &FedMessage) -> Option<(String, Vec<String>)> {
    if msg.msg_type != MsgType::Update {
        return None;
    }
    let object = msg.str_field("object")?.to_string();
    let attrs = msg
        .payload
        .get("attributes")
        .and_then(|a| a.as_object())
        .map(|m| m.keys().cloned().collect())
        .unwrap_or_default();
    Some((object, attrs))
}

impl OutboundQueue {
    pub fn new(bound: usize) -> Self {
        OutboundQueue {
            bound: bound.max(1),
            items: VecDeque::new(),
            coalesced: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// UPDATEs replaced or dropped so far.
    pub fn coalesced(&self) -> u64 {
        self.coalesced
    }

    pub fn push(&mut self, msg: FedMessage) -> Result<(), Overflow> {
        if self.items.len() < self.bound {
            self.items.push_back(msg);
            return Ok(());
        }
        let Some(key) = update_key(&msg) else {
            return Err(Overflow(self.items.len()));
        };
        let victim = self
            .items
            .iter()
            .position(|m| m.federate_id == msg.federate_id && update_key(m).as_ref() == Some(&key))
            .or_else(|| {
                self.items
                    .iter()
                    .position(|m| m.msg_type == MsgType::Update)
            });
        match victim {
            Some(i) => {
                self.items.remove(i);
                self.items.push_back(msg);
                self.coalesced += 1;
                Ok(())
            }
            None => Err(Overflow(self.items.len())),
        }
    }

    pub fn pop(&mut self) -> Option<FedMessage> {
        self.items.pop_front()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    fn update(from: &str, object: &str, seq: u64) -> FedMessage {
        FedMessage::new(MsgType::Update, from, seq as f64, seq)
            .with("object", object)
            .with("attributes", json!({"x": seq}))
    }

    #[test]
    fn interactions_overflow() {
        let mut q = OutboundQueue::new(2);
        q.push(FedMessage::new(MsgType::Interaction, "a", 0.0, 1))
            .unwrap();
        q.push(FedMessage::new(MsgType::Interaction, "a", 0.0, 2))
            .unwrap();
        assert_eq!(
            q.push(FedMessage::new(MsgType::Interaction, "a", 0.0, 3)),
            Err(Overflow(2))
        );
    }

    #[test]
    fn coalescing_keeps_latest_at_back() {
        let mut q = OutboundQueue::new(2);
        q.push(update("p", "a", 1)).unwrap();
        q.push(update("p", "b", 2)).unwrap();
        q.push(update("p", "a", 3)).unwrap();
        assert_eq!(q.pop().unwrap().seq, 2);
        assert_eq!(q.pop().unwrap().seq, 3);
        assert_eq!(q.coalesced(), 1);
    }

    proptest! {
        #[test]
        fn per_publisher_order_survives_pressure(
            ops in proptest::collection::vec((0usize..3, 0usize..4, proptest::bool::ANY), 1..2000),
            bound in 1usize..32,
        ) {
            let mut q = OutboundQueue::new(bound);
            let mut seqs = [0u64; 3];
            let mut delivered: Vec<FedMessage> = Vec::new();
            for (publisher, object, drain) in ops {
                seqs[publisher] += 1;
                let id = format!("p{publisher}");
                q.push(update(&id, &format!("o{object}"), seqs[publisher])).unwrap();
                if drain {
                    if let Some(m) = q.pop() {
                        delivered.push(m);
                    }
                }
            }
            while let Some(m) = q.pop() {
                delivered.push(m);
            }
            for p in 0..3 {
                let id = format!("p{p}");
                let got: Vec<u64> = delivered.iter().filter(|m| m.federate_id == id).map(|m| m.seq).collect();
                prop_assert!(got.windows(2).all(|w| w[0] < w[1]));
                if seqs[p] > 0 && bound >= 12 {
                    // with room for every (publisher, object) key the newest
                    // update always survives
                    prop_assert_eq!(got.last().copied(), Some(seqs[p]));
                }
            }
        }
    }
}
