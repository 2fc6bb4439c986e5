//! Visited-state storage. States are packed into fixed-width byte records
//! using the slot domains, and indexed by an open-addressing hash table.

use crate::kernel::{GlobalState, MasGraph};
use hashbrown::HashTable;
use rustc_hash::FxHasher;
use std::hash::Hasher;

#[derive(Clone, Debug)]
pub(crate) struct Packer {
    loc_width: usize,
    slots: Vec<(i32, usize)>,
    n_locs: usize,
    pub stride: usize,
}

fn width_for(size: u64) -> usize {
    if size <= 1 << 8 {
        1
    } else if size <= 1 << 16 {
        2
    } else {
        4
    }
}

impl Packer {
    pub fn new(m: &MasGraph) -> Packer {
        let max_locs = m.agents.iter().map(|a| a.locations.len()).max().unwrap_or(1) as u64;
        let loc_width = width_for(max_locs);
        let slots: Vec<(i32, usize)> = m.slots.iter().map(|s| (s.domain.lo, width_for(s.domain.size()))).collect();
        let stride = loc_width * m.agents.len() + slots.iter().map(|(_, w)| w).sum::<usize>();
        Packer {
            loc_width,
            slots,
            n_locs: m.agents.len(),
            stride,
        }
    }

    fn put(out: &mut Vec<u8>, v: u32, w: usize) {
        out.extend_from_slice(&v.to_le_bytes()[..w]);
    }

    fn get(b: &[u8], w: usize) -> u32 {
        let mut buf = [0u8; 4];
        buf[..w].copy_from_slice(&b[..w]);
        u32::from_le_bytes(buf)
    }

    pub fn pack(&self, s: &GlobalState, out: &mut Vec<u8>) {
        for l in &s.locs {
            Self::put(out, *l, self.loc_width);
        }
        for (v, (lo, w)) in s.vals.iter().zip(&self.slots) {
            Self::put(out, v.wrapping_sub(*lo) as u32, *w);
        }
    }

    pub fn unpack(&self, b: &[u8]) -> GlobalState {
        let mut pos = 0;
        let mut locs = Vec::with_capacity(self.n_locs);
        for _ in 0..self.n_locs {
            locs.push(Self::get(&b[pos..], self.loc_width));
            pos += self.loc_width;
        }
        let mut vals = Vec::with_capacity(self.slots.len());
        for (lo, w) in &self.slots {
            vals.push((Self::get(&b[pos..], *w) as i32).wrapping_add(*lo));
            pos += w;
        }
        GlobalState { locs, vals }
    }
}

fn hash_bytes(b: &[u8]) -> u64 {
    let mut h = FxHasher::default();
    h.write(b);
    h.finish()
}

/// Append-only set of packed states with dense indices.
pub(crate) struct Store {
    pub packer: Packer,
    data: Vec<u8>,
    table: HashTable<u32>,
    scratch: Vec<u8>,
}

impl Store {
    pub fn new(m: &MasGraph) -> Store {
        let packer = Packer::new(m);
        Store {
            packer,
            data: Vec::new(),
            table: HashTable::new(),
            scratch: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    fn record(&self, i: u32) -> &[u8] {
        let st = self.packer.stride;
        &self.data[i as usize * st..(i as usize + 1) * st]
    }

    /// Insert a state; returns its index and whether it was new.
    pub fn insert(&mut self, s: &GlobalState) -> (u32, bool) {
        self.scratch.clear();
        self.packer.pack(s, &mut self.scratch);
        let h = hash_bytes(&self.scratch);
        let st = self.packer.stride;
        let data = &self.data;
        let key = &self.scratch;
        if let Some(&i) = self.table.find(h, |&i| &data[i as usize * st..(i as usize + 1) * st] == key.as_slice()) {
            return (i, false);
        }
        let i = self.table.len() as u32;
        self.data.extend_from_slice(&self.scratch);
        let data = &self.data;
        self.table
            .insert_unique(h, i, |&j| hash_bytes(&data[j as usize * st..(j as usize + 1) * st]));
        (i, true)
    }

    #[cfg(test)]
    pub fn find(&mut self, s: &GlobalState) -> Option<u32> {
        self.scratch.clear();
        self.packer.pack(s, &mut self.scratch);
        let h = hash_bytes(&self.scratch);
        let st = self.packer.stride;
        let data = &self.data;
        let key = &self.scratch;
        self.table
            .find(h, |&i| &data[i as usize * st..(i as usize + 1) * st] == key.as_slice())
            .copied()
    }

    pub fn get(&self, i: u32) -> GlobalState {
        self.packer.unpack(self.record(i))
    }

    /// Approximate heap footprint in bytes.
    pub fn bytes(&self) -> usize {
        self.data.capacity() + self.table.capacity() * (std::mem::size_of::<u32>() + 1)
    }

    /// Footprint per additional stored state, for budget projections.
    pub fn bytes_per_state(&self) -> usize {
        self.packer.stride + 2 * std::mem::size_of::<u32>() + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textlang::load_model;

    #[test]
    fn pack_round_trip_and_dedup() {
        let m = load_model("int[-5,300] x; bool b; int[-100000,100000] big;").unwrap().graph;
        let mut st = Store::new(&m);
        let a = GlobalState {
            locs: vec![],
            vals: vec![-5, 1, -100000],
        };
        let b = GlobalState {
            locs: vec![],
            vals: vec![300, 0, 99999],
        };
        assert_eq!(st.insert(&a), (0, true));
        assert_eq!(st.insert(&b), (1, true));
        assert_eq!(st.insert(&a), (0, false));
        assert_eq!(st.get(1), b);
        assert_eq!(st.find(&b), Some(1));
        assert_eq!(st.len(), 2);
    }
}
