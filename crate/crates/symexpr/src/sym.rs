//! Process-wide symbol registry.
//!
//! A [`Sym`] is a 32-bit id. Ids below [`FREE_BASE`] are *structured*: the
//! caller chooses the id (for example by packing a jet multi-index into it) so
//! that the variable order, and hence every printed form, does not depend on
//! the order in which threads happen to create symbols. Ids at or above
//! `FREE_BASE` are handed out by a counter for ad-hoc names.

use std::collections::HashMap;
use std::fmt;

use once_cell::sync::Lazy;
use parking_lot::RwLock;

use crate::ExprError;

/// First id of the free (counter-allocated) range.
pub const FREE_BASE: u32 = 3 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymKind {
    Base,
    Jet,
    Param,
    Free,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(u32);

struct Registry {
    info: HashMap<u32, (String, SymKind)>,
    by_name: HashMap<String, u32>,
    next_free: u32,
}

static REGISTRY: Lazy<RwLock<Registry>> = Lazy::new(|| {
    RwLock::new(Registry {
        info: HashMap::new(),
        by_name: HashMap::new(),
        next_free: FREE_BASE,
    })
});

impl Sym {
    /// Registers (or re-fetches) a structured symbol with a caller-chosen id.
    pub fn declare(id: u32, name: &str, kind: SymKind) -> Result<Sym, ExprError> {
        if id >= FREE_BASE {
            return Err(ExprError::SymbolConflict(name.to_string()));
        }
        {
            let reg = REGISTRY.read();
            if let Some((n, _)) = reg.info.get(&id) {
                return if n == name {
                    Ok(Sym(id))
                } else {
                    Err(ExprError::SymbolConflict(name.to_string()))
                };
            }
        }
        let mut reg = REGISTRY.write();
        if let Some((n, _)) = reg.info.get(&id) {
            return if n == name {
                Ok(Sym(id))
            } else {
                Err(ExprError::SymbolConflict(name.to_string()))
            };
        }
        if let Some(&other) = reg.by_name.get(name) {
            if other != id {
                return Err(ExprError::SymbolConflict(name.to_string()));
            }
        }
        reg.info.insert(id, (name.to_string(), kind));
        reg.by_name.insert(name.to_string(), id);
        Ok(Sym(id))
    }

    /// Reconstructs a symbol from a previously declared structured id without a
    /// registry round trip. The id must already be declared.
    pub fn from_raw(id: u32) -> Sym {
        Sym(id)
    }

    /// Returns the symbol with this display name, creating a free one if absent.
    pub fn named(name: &str) -> Sym {
        if let Some(s) = Sym::lookup(name) {
            return s;
        }
        let mut reg = REGISTRY.write();
        if let Some(&id) = reg.by_name.get(name) {
            return Sym(id);
        }
        let id = reg.next_free;
        reg.next_free += 1;
        reg.info.insert(id, (name.to_string(), SymKind::Free));
        reg.by_name.insert(name.to_string(), id);
        Sym(id)
    }

    pub fn lookup(name: &str) -> Option<Sym> {
        REGISTRY.read().by_name.get(name).map(|&id| Sym(id))
    }

    pub fn id(self) -> u32 {
        self.0
    }

    pub fn name(self) -> String {
        REGISTRY
            .read()
            .info
            .get(&self.0)
            .map(|(n, _)| n.clone())
            .unwrap_or_else(|| format!("#{}", self.0))
    }

    pub fn kind(self) -> SymKind {
        REGISTRY
            .read()
            .info
            .get(&self.0)
            .map(|(_, k)| *k)
            .unwrap_or(SymKind::Free)
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_is_idempotent() {
        let a = Sym::named("sym_test_alpha");
        let b = Sym::named("sym_test_alpha");
        assert_eq!(a, b);
        assert_eq!(a.name(), "sym_test_alpha");
        assert_eq!(a.kind(), SymKind::Free);
    }

    #[test]
    fn structured_ids_conflict_on_rename() {
        let id = 0x2fff_fff0;
        let s = Sym::declare(id, "sym_test_structured", SymKind::Param).unwrap();
        assert_eq!(s.id(), id);
        assert!(Sym::declare(id, "other_name", SymKind::Param).is_err());
        assert_eq!(Sym::declare(id, "sym_test_structured", SymKind::Param).unwrap(), s);
    }
}
