//! Sorted key index stored as flat arrays.
//!
//! Keys live back to back in one string, postings in one vector. A snapshot
//! stores the same four arrays, so loading an index is a bulk copy rather
//! than one allocation and hash insert per key.

/// Map from string keys to lists of `u32` postings, searched by binary search.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct KeyIndex {
    pub(crate) arena: String,
    /// End of key `i` in `arena`.
    pub(crate) key_ends: Vec<u32>,
    /// End of key `i`'s postings in `postings`.
    pub(crate) post_ends: Vec<u32>,
    pub(crate) postings: Vec<u32>,
}

impl KeyIndex {
    /// Builds from `(key, posting)` pairs in any order. Postings of one key
    /// keep ascending order; duplicates are kept.
    pub(crate) fn build(mut pairs: Vec<(String, u32)>) -> Self {
        pairs.sort_unstable();
        let mut ix = KeyIndex::default();
        let mut last: Option<&str> = None;
        for (key, posting) in &pairs {
            if last != Some(key.as_str()) {
                if last.is_some() {
                    ix.post_ends.push(ix.postings.len() as u32);
                }
                ix.arena.push_str(key);
                ix.key_ends.push(ix.arena.len() as u32);
                last = Some(key);
            }
            ix.postings.push(*posting);
        }
        if last.is_some() {
            ix.post_ends.push(ix.postings.len() as u32);
        }
        ix
    }

    pub(crate) fn len(&self) -> usize {
        self.key_ends.len()
    }

    pub(crate) fn key(&self, i: usize) -> &str {
        let start = if i == 0 { 0 } else { self.key_ends[i - 1] as usize };
        &self.arena[start..self.key_ends[i] as usize]
    }

    pub(crate) fn postings_at(&self, i: usize) -> &[u32] {
        let start = if i == 0 { 0 } else { self.post_ends[i - 1] as usize };
        &self.postings[start..self.post_ends[i] as usize]
    }

    pub(crate) fn get(&self, key: &str) -> &[u32] {
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.key(mid).cmp(key) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return self.postings_at(mid),
            }
        }
        &[]
    }

    /// Structural check for arrays read from untrusted bytes. Keys must be
    /// strictly ascending and postings below `limit`.
    pub(crate) fn validate(&self, limit: usize) -> Result<(), String> {
        if self.key_ends.len() != self.post_ends.len() {
            return Err("key and posting tables differ in length".into());
        }
        let ascending = |v: &[u32], end: usize| {
            v.windows(2).all(|w| w[0] <= w[1]) && v.last().is_none_or(|&e| e as usize == end)
        };
        if !ascending(&self.key_ends, self.arena.len()) || !ascending(&self.post_ends, self.postings.len()) {
            return Err("index offsets out of order".into());
        }
        if !self.key_ends.iter().all(|&e| self.arena.is_char_boundary(e as usize)) {
            return Err("index key splits a character".into());
        }
        if (1..self.len()).any(|i| self.key(i - 1) >= self.key(i)) {
            return Err("index keys not sorted".into());
        }
        if self.postings.iter().any(|&p| p as usize >= limit) {
            return Err("index posting out of range".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_postings_by_key() {
        let ix = KeyIndex::build(vec![("b".into(), 3), ("a".into(), 2), ("b".into(), 1), ("ä".into(), 0)]);
        assert_eq!(ix.len(), 3);
        assert_eq!(ix.get("a"), &[2]);
        assert_eq!(ix.get("b"), &[1, 3]);
        assert_eq!(ix.get("ä"), &[0]);
        assert!(ix.get("c").is_empty());
        assert!(ix.validate(4).is_ok());
        assert!(ix.validate(3).is_err());
    }

    #[test]
    fn empty_index() {
        let ix = KeyIndex::build(Vec::new());
        assert!(ix.get("").is_empty());
        assert!(ix.validate(0).is_ok());
    }
}
