use std::collections::BTreeSet;

use super::ActionEvent;

/// Bot rule: API account type `Bot`, a `[bot]` login suffix, or a denylisted
/// login (case-insensitive).
pub fn is_bot(login: &str, api_bot_type: bool, denylist: &BTreeSet<String>) -> bool {
    api_bot_type
        || login.to_ascii_lowercase().ends_with("[bot]")
        || denylist.iter().any(|d| d.eq_ignore_ascii_case(login))
}

/// Drop bot actions; everything else passes through unchanged and in order.
pub fn filter_bots(events: Vec<ActionEvent>, denylist: &BTreeSet<String>) -> Vec<ActionEvent> {
    events
        .into_iter()
        .filter(|e| !is_bot(&e.actor, e.actor_is_bot, denylist))
        .collect()
}
