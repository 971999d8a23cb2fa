//! Per-connection work queue with latest-wins cage updates.

use std::collections::VecDeque;
use std::sync::Mutex;

use tokio::sync::Notify;

use crate::protocol::ClientMessage;

#[derive(Default)]
pub struct WorkQueue {
    items: Mutex<VecDeque<ClientMessage>>,
    closed: Mutex<bool>,
    notify: Notify,
}

impl WorkQueue {
    /// A cage update replaces a cage update still waiting at the back of the
    /// queue. Other messages keep their order.
    pub fn push(&self, msg: ClientMessage) {
        let mut items = self.items.lock().unwrap();
        if let (ClientMessage::CageUpdate { .. }, Some(ClientMessage::CageUpdate { .. })) = (&msg, items.back()) {
            log::debug!("superseding a queued cage update");
            items.pop_back();
        }
        items.push_back(msg);
        drop(items);
        self.notify.notify_one();
    }

    pub fn try_pop(&self) -> Option<ClientMessage> {
        self.items.lock().unwrap().pop_front()
    }

    pub fn close(&self) {
        *self.closed.lock().unwrap() = true;
        self.notify.notify_one();
    }

    /// Next message, or `None` once closed and drained.
    pub async fn pop(&self) -> Option<ClientMessage> {
        loop {
            if let Some(m) = self.try_pop() {
                return Some(m);
            }
            if *self.closed.lock().unwrap() {
                return None;
            }
            self.notify.notified().await;
        }
    }

    pub fn len(&self) -> usize {
        self.items.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
