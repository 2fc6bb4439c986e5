//! One interactive simulation: a loaded model and the run stepped so far.

use crate::error::ApiError;
use masgraph::kernel::{GlobalState, TransitionLabel};
use masgraph::textlang::Model;
use masgraph::votecorpus::Config;
use std::collections::BTreeMap;
use std::sync::Arc;

pub struct Session {
    pub model: Arc<Model>,
    /// Set for sessions created from the postal-vote corpus.
    pub corpus: Option<Config>,
    /// `states[0]` is the initial state; the last entry is the current one.
    states: Vec<GlobalState>,
    /// Transition `i` leads from `states[i]` to `states[i + 1]`, fired at
    /// the given revision.
    fired: Vec<(u64, TransitionLabel)>,
    revision: u64,
    enabled: Vec<TransitionLabel>,
    bookmarks: BTreeMap<String, usize>,
}

impl Session {
    pub fn new(model: Model, corpus: Option<Config>) -> Result<Session, ApiError> {
        let init = model.graph.initial_state()?;
        let enabled = model.graph.enabled(&init)?;
        Ok(Session {
            model: Arc::new(model),
            corpus,
            states: vec![init],
            fired: Vec::new(),
            revision: 0,
            enabled,
            bookmarks: BTreeMap::new(),
        })
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn current(&self) -> &GlobalState {
        self.states.last().expect("a session always holds its initial state")
    }

    pub fn enabled(&self) -> &[TransitionLabel] {
        &self.enabled
    }

    pub fn states(&self) -> &[GlobalState] {
        &self.states
    }

    pub fn fired(&self) -> &[(u64, TransitionLabel)] {
        &self.fired
    }

    pub fn bookmarks(&self) -> &BTreeMap<String, usize> {
        &self.bookmarks
    }

    fn refresh(&mut self) -> Result<(), ApiError> {
        self.enabled = self.model.graph.enabled(self.current())?;
        self.revision += 1;
        Ok(())
    }

    /// Fire entry `index` of the enabled list published at `revision`.
    pub fn step(&mut self, revision: u64, index: usize) -> Result<(), ApiError> {
        if revision != self.revision {
            return Err(ApiError::Conflict(format!(
                "transition listing is from revision {revision}, session is at {}",
                self.revision
            )));
        }
        let t = self
            .enabled
            .get(index)
            .cloned()
            .ok_or_else(|| ApiError::invalid(format!("transition index {index} outside 0..{}", self.enabled.len())))?;
        let next = self.model.graph.step(self.current(), &t)?;
        self.fired.push((self.revision, t));
        self.states.push(next);
        self.refresh()
    }

    pub fn undo(&mut self) -> Result<(), ApiError> {
        if self.fired.is_empty() {
            return Err(ApiError::Conflict("nothing to undo".into()));
        }
        self.fired.pop();
        self.states.pop();
        self.bookmarks.retain(|_, &mut at| at < self.states.len());
        self.refresh()
    }

    pub fn reset(&mut self) -> Result<(), ApiError> {
        self.states.truncate(1);
        self.fired.clear();
        self.bookmarks.clear();
        self.refresh()
    }

    /// Replace the run by `labels` replayed from the initial state. On
    /// failure the session is unchanged.
    pub fn install(&mut self, labels: &[TransitionLabel]) -> Result<(), ApiError> {
        let g = &self.model.graph;
        let mut states = vec![self.states[0].clone()];
        for (i, t) in labels.iter().enumerate() {
            let cur = states.last().expect("nonempty");
            if !g.enabled(cur)?.contains(t) {
                return Err(ApiError::invalid(format!("trace step {i} is not enabled")));
            }
            states.push(g.step(cur, t)?);
        }
        let base = self.revision + 1;
        self.fired = labels.iter().map(|t| (base, t.clone())).collect();
        self.states = states;
        self.bookmarks.clear();
        self.refresh()
    }

    pub fn bookmark(&mut self, name: &str) {
        self.bookmarks.insert(name.to_string(), self.states.len() - 1);
    }

    /// Cut the run back to a bookmarked position.
    pub fn goto(&mut self, name: &str) -> Result<(), ApiError> {
        let at = *self
            .bookmarks
            .get(name)
            .ok_or_else(|| ApiError::NotFound(format!("bookmark '{name}'")))?;
        self.states.truncate(at + 1);
        self.fired.truncate(at);
        self.refresh()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOGGLE: &str = "int[0,3] x;
process P {
    state a, b;
    init a;
    trans a -> b { guard x < 3; assign x = x + 1; },
          b -> a { };
}
system P;
";

    fn session() -> Session {
        Session::new(masgraph::textlang::load_model(TOGGLE).unwrap(), None).unwrap()
    }

    #[test]
    fn step_undo_restores_state_and_bumps_revision() {
        let mut s = session();
        let before = s.current().clone();
        s.step(0, 0).unwrap();
        assert_ne!(*s.current(), before);
        s.undo().unwrap();
        assert_eq!(*s.current(), before);
        assert_eq!(s.revision(), 2);
    }

    #[test]
    fn stale_revision_is_a_conflict() {
        let mut s = session();
        s.step(0, 0).unwrap();
        assert!(matches!(s.step(0, 0), Err(ApiError::Conflict(_))));
        assert!(matches!(s.step(1, 7), Err(ApiError::Invalid { .. })));
    }

    #[test]
    fn failed_install_leaves_session_alone() {
        let mut s = session();
        s.step(0, 0).unwrap();
        let t = s.fired()[0].1.clone();
        let rev = s.revision();
        assert!(s.install(&[t.clone(), t]).is_err());
        assert_eq!(s.revision(), rev);
        assert_eq!(s.states().len(), 2);
    }

    #[test]
    fn goto_truncates_to_bookmark() {
        let mut s = session();
        s.step(0, 0).unwrap();
        s.bookmark("one");
        s.step(1, 0).unwrap();
        s.goto("one").unwrap();
        assert_eq!(s.states().len(), 2);
        assert!(s.goto("none").is_err());
    }
}
