use serde::Serialize;

use super::query::CompiledQuery;
use crate::bytecode::{CaptureSite, SiteId};

/// One observed string value at a capture site.
#[derive(Debug, Clone, Copy)]
pub struct CaptureEvent<'a> {
    pub site: &'a CaptureSite,
    pub value: &'a str,
    pub sequence_no: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Continue,
    PauseAtMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SessionState {
    NotStarted,
    Running,
    PausedAtMatch,
    PausedAtStep,
    Terminated,
}

impl SessionState {
    pub fn is_paused(self) -> bool {
        matches!(
            self,
            SessionState::PausedAtMatch | SessionState::PausedAtStep
        )
    }
}

/// Search half of a debug session: the active query and the bookkeeping the
/// capture hook needs.
#[derive(Debug, Default)]
pub struct SearchController {
    query: Option<CompiledQuery>,
    searching: bool,
    last_match_site: Option<SiteId>,
    match_count: u64,
    sequence_no: u64,
}

impl SearchController {
    pub fn new() -> Self {
        SearchController::default()
    }

    /// Installs a new query and turns matching on. The skip-repeats anchor is
    /// reset, so the first match of a new query is its first occurrence.
    pub fn set_query(&mut self, query: CompiledQuery) {
        self.query = Some(query);
        self.searching = true;
        self.last_match_site = None;
    }

    /// Turns matching back on for the current query. Returns false if there
    /// is no query.
    pub fn resume_search(&mut self) -> bool {
        self.searching = self.query.is_some();
        self.searching
    }

    /// Stops matching without forgetting the query.
    pub fn suspend(&mut self) {
        self.searching = false;
    }

    pub fn query(&self) -> Option<&CompiledQuery> {
        self.query.as_ref()
    }

    pub fn searching(&self) -> bool {
        self.searching
    }

    pub fn last_match_site(&self) -> Option<SiteId> {
        self.last_match_site
    }

    pub fn match_count(&self) -> u64 {
        self.match_count
    }

    /// Numbers the next capture event.
    pub fn next_sequence(&mut self) -> u64 {
        self.sequence_no += 1;
        self.sequence_no
    }

    pub fn on_capture(&mut self, event: &CaptureEvent<'_>) -> Verdict {
        if !self.searching {
            return Verdict::Continue;
        }
        let Some(query) = &self.query else {
            return Verdict::Continue;
        };
        if query.query().skip_repeated_site && self.last_match_site == Some(event.site.id) {
            return Verdict::Continue;
        }
        if !query.matches(event.value) {
            return Verdict::Continue;
        }
        self.last_match_site = Some(event.site.id);
        self.match_count += 1;
        Verdict::PauseAtMatch
    }
}
