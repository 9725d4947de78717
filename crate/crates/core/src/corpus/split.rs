use std::collections::BTreeSet;

use super::Post;
use crate::error::{Error, Result};

pub const TASK_TRAIN_LAST_EVENT: u32 = 11;

/// Events 1-11 train, 12-17 test.
pub fn task_split(posts: &[Post]) -> Result<(Vec<&Post>, Vec<&Post>)> {
    if let Some(p) = posts.iter().find(|p| !(1..=17).contains(&p.event_id)) {
        return Err(Error::arg(format!(
            "post {} has event id {} outside 1..17",
            p.post_id, p.event_id
        )));
    }
    Ok(posts
        .iter()
        .partition(|p| p.event_id <= TASK_TRAIN_LAST_EVENT))
}

#[derive(Debug, Clone)]
pub struct Fold<'a> {
    pub held_out: u32,
    pub train: Vec<&'a Post>,
    pub test: Vec<&'a Post>,
}

/// One fold per event present, in event-id order.
pub fn loeo_splits(posts: &[Post]) -> Result<Vec<Fold<'_>>> {
    let events: BTreeSet<u32> = posts.iter().map(|p| p.event_id).collect();
    if events.len() < 2 {
        return Err(Error::arg(format!(
            "leave-one-event-out needs at least 2 events, found {}",
            events.len()
        )));
    }
    Ok(events
        .into_iter()
        .map(|held_out| {
            let (test, train) = posts.iter().partition(|p| p.event_id == held_out);
            Fold {
                held_out,
                train,
                test,
            }
        })
        .collect())
}
