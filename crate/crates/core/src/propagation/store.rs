use crate::model::{Constraint, ConstraintId};

/// Where a stored constraint came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Initial,
    Learned,
    /// The current objective strengthening constraint.
    Objective,
}

/// Propagation tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    General,
    Clause,
    Binary,
}

#[derive(Debug, Clone)]
pub struct StoredConstraint {
    pub constraint: Constraint,
    pub origin: Origin,
    pub tier: Tier,
    /// Number of times the constraint took part in a conflict since the
    /// last cleanup (halved at every cleanup).
    pub counter: u32,
}

impl StoredConstraint {
    pub fn is_removable(&self) -> bool {
        self.origin == Origin::Learned
    }
}

/// All constraints known to the solver, addressed by stable ids. Removed
/// constraints leave an empty slot so that ids are never reused.
#[derive(Debug, Clone, Default)]
pub struct ConstraintStore {
    slots: Vec<Option<StoredConstraint>>,
    live_learned: usize,
    learned_monomials: usize,
}

impl ConstraintStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn insert(&mut self, constraint: Constraint, origin: Origin, tier: Tier) -> ConstraintId {
        if origin == Origin::Learned {
            self.live_learned += 1;
            self.learned_monomials += constraint.len();
        }
        self.slots.push(Some(StoredConstraint { constraint, origin, tier, counter: 0 }));
        ConstraintId(self.slots.len() as u32 - 1)
    }

    pub(crate) fn remove(&mut self, id: ConstraintId) -> Option<StoredConstraint> {
        let s = self.slots.get_mut(id.index())?.take()?;
        if s.origin == Origin::Learned {
            self.live_learned -= 1;
            self.learned_monomials -= s.constraint.len();
        }
        Some(s)
    }

    pub(crate) fn set_origin(&mut self, id: ConstraintId, origin: Origin) {
        if let Some(s) = self.slots[id.index()].as_mut() {
            if s.origin == Origin::Learned {
                self.live_learned -= 1;
                self.learned_monomials -= s.constraint.len();
            }
            if origin == Origin::Learned {
                self.live_learned += 1;
                self.learned_monomials += s.constraint.len();
            }
            s.origin = origin;
        }
    }

    pub fn get(&self, id: ConstraintId) -> Option<&StoredConstraint> {
        self.slots.get(id.index()).and_then(Option::as_ref)
    }

    pub(crate) fn get_mut(&mut self, id: ConstraintId) -> Option<&mut StoredConstraint> {
        self.slots.get_mut(id.index()).and_then(Option::as_mut)
    }

    /// The constraint with the given id. Panics if it was removed.
    pub fn constraint(&self, id: ConstraintId) -> &Constraint {
        &self.get(id).expect("constraint was removed").constraint
    }

    /// Number of ids handed out so far, including removed ones.
    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ConstraintId, &StoredConstraint)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_ref().map(|s| (ConstraintId(i as u32), s)))
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn live_learned(&self) -> usize {
        self.live_learned
    }

    /// Rough memory held by learned constraints, in bytes.
    pub fn learned_bytes(&self) -> usize {
        self.learned_monomials * std::mem::size_of::<crate::model::Monomial>()
            + self.live_learned * std::mem::size_of::<StoredConstraint>()
    }

    /// Constraints every solution must satisfy: the input plus the current
    /// objective bound. Learned constraints are consequences of these.
    pub fn base_constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.iter()
            .filter(|(_, s)| s.origin != Origin::Learned)
            .map(|(_, s)| &s.constraint)
    }

    pub(crate) fn bump(&mut self, id: ConstraintId) {
        if let Some(s) = self.get_mut(id) {
            s.counter = s.counter.saturating_add(1);
        }
    }
}
