//! Event fan-out to subscribers.
//!
//! Every event goes to the log sink. Webhook subscribers each get their own
//! delivery thread fed by a queue, so a slow or dead endpoint never blocks
//! the writer and events reach each endpoint in publication order. Failed
//! posts are retried with backoff, which makes delivery at-least-once up to
//! the retry limit.

use std::sync::mpsc::{self, Sender};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::orchestrator::SliceEvent;

const MAX_ATTEMPTS: u32 = 8;

/// Message delivered to subscribers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Notification {
    Slice(SliceEvent),
    ScenarioCompleted { scenario_id: u64, passed: bool },
    ScenarioFailed { scenario_id: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subscription {
    pub subscription_id: u64,
    pub callback_url: String,
}

struct Subscriber {
    info: Subscription,
    queue: Sender<Notification>,
}

#[derive(Default)]
pub struct Notifier {
    subscribers: Mutex<Vec<Subscriber>>,
    next_id: Mutex<u64>,
}

impl Notifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&self, callback_url: String) -> Subscription {
        let id = {
            let mut next = self.next_id.lock().unwrap();
            *next += 1;
            *next
        };
        let info = Subscription {
            subscription_id: id,
            callback_url: callback_url.clone(),
        };
        let (tx, rx) = mpsc::channel::<Notification>();
        thread::Builder::new()
            .name(format!("notify-{id}"))
            .spawn(move || {
                let agent: ureq::Agent = ureq::Agent::config_builder()
                    .timeout_global(Some(Duration::from_secs(5)))
                    .build()
                    .into();
                for msg in rx {
                    deliver(&agent, &callback_url, &msg);
                }
            })
            .expect("spawn delivery thread");
        self.subscribers.lock().unwrap().push(Subscriber {
            info: info.clone(),
            queue: tx,
        });
        info
    }

    pub fn subscriptions(&self) -> Vec<Subscription> {
        self.subscribers.lock().unwrap().iter().map(|s| s.info.clone()).collect()
    }

    pub fn publish_events(&self, events: &[SliceEvent]) {
        for e in events {
            tracing::info!(
                target: "s3::events",
                slice = %e.slice_id,
                kind = ?e.kind,
                old = ?e.old_state,
                new = ?e.new_state,
                ts = e.timestamp,
                "slice event"
            );
        }
        self.publish(events.iter().cloned().map(Notification::Slice));
    }

    pub fn publish(&self, msgs: impl IntoIterator<Item = Notification>) {
        let subs = self.subscribers.lock().unwrap();
        for msg in msgs {
            for s in subs.iter() {
                // A closed queue means the delivery thread is gone; nothing
                // else depends on it.
                let _ = s.queue.send(msg.clone());
            }
        }
    }
}

fn deliver(agent: &ureq::Agent, url: &str, msg: &Notification) {
    let mut backoff = Duration::from_millis(50);
    for attempt in 1..=MAX_ATTEMPTS {
        match agent.post(url).send_json(msg) {
            Ok(_) => return,
            Err(e) => {
                tracing::warn!(url, attempt, error = %e, "notification delivery failed");
                thread::sleep(backoff);
                backoff = (backoff * 2).min(Duration::from_secs(5));
            }
        }
    }
    tracing::error!(url, "giving up on notification after {MAX_ATTEMPTS} attempts");
}
