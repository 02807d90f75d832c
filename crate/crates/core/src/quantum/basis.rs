use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::spectrum::n_bound;
use crate::error::{Error, Result};
use crate::params::ModelParameters;

/// Label of a product state |n⟩ ⊗ |l m⟩. Ordering is lexicographic in (n, l, m).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisIndex {
    pub n: u32,
    pub l: u32,
    pub m: i32,
}

impl BasisIndex {
    pub fn new(n: u32, l: u32, m: i32) -> Result<Self> {
        if m.unsigned_abs() > l {
            return Err(Error::Basis(format!("|m| > l in ({n},{l},{m})")));
        }
        Ok(Self { n, l, m })
    }

    pub fn k_class(self) -> i64 {
        k_class(self)
    }
}

impl fmt::Display for BasisIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}_{}", self.n, self.l, self.m)
    }
}

/// Integer label m − n of the conserved quantity; the physical value is
/// this minus 1/2.
pub fn k_class(idx: BasisIndex) -> i64 {
    idx.m as i64 - idx.n as i64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    states: Vec<BasisIndex>,
    lookup: HashMap<BasisIndex, usize>,
    n_max: u32,
    l_max: u32,
}

impl Basis {
    /// Basis over an explicit set of states, sorted into canonical order.
    pub fn from_states(mut states: Vec<BasisIndex>, params: &ModelParameters) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Basis("empty basis".into()));
        }
        states.sort();
        if let Some(w) = states.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Basis(format!("duplicate state {}", w[0])));
        }
        let bound = n_bound(params);
        for s in &states {
            if s.m.unsigned_abs() > s.l {
                return Err(Error::Basis(format!("|m| > l in {s}")));
            }
            if s.n > bound {
                return Err(Error::Basis(format!(
                    "n = {} exceeds the bound {bound}",
                    s.n
                )));
            }
        }
        let n_max = states.iter().map(|s| s.n).max().unwrap_or(0);
        let l_max = states.iter().map(|s| s.l).max().unwrap_or(0);
        let lookup = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Ok(Self {
            states,
            lookup,
            n_max,
            l_max,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[BasisIndex] {
        &self.states
    }

    pub fn index_of(&self, idx: BasisIndex) -> Option<usize> {
        self.lookup.get(&idx).copied()
    }

    pub fn state(&self, i: usize) -> BasisIndex {
        self.states[i]
    }

    /// `(n_max, l_max)` over the retained states.
    pub fn caps(&self) -> (u32, u32) {
        (self.n_max, self.l_max)
    }

    /// True for states on the highest retained n or l shell.
    pub fn on_boundary(&self, idx: BasisIndex) -> bool {
        idx.n == self.n_max || idx.l == self.l_max
    }
}

/// All (n, l, m) with n ≤ n_max, l ≤ l_max, optionally keeping only the
/// states whose m − n lies in `k_filter`.
pub fn build_basis(
    n_max: u32,
    l_max: u32,
    params: &ModelParameters,
    k_filter: Option<&[i64]>,
) -> Result<Basis> {
    let bound = n_bound(params);
    if n_max > bound {
        return Err(Error::Basis(format!(
            "n_max = {n_max} exceeds the bound {bound}"
        )));
    }
    let states: Vec<BasisIndex> = (0..=n_max)
        .flat_map(|n| {
            (0..=l_max)
                .flat_map(move |l| (-(l as i32)..=l as i32).map(move |m| BasisIndex { n, l, m }))
        })
        .filter(|s| k_filter.is_none_or(|ks| ks.contains(&k_class(*s))))
        .collect();
    let mut basis = Basis::from_states(states, params)?;
    // Caps reflect the request, not what survived the filter.
    basis.n_max = n_max;
    basis.l_max = l_max;
    Ok(basis)
}
