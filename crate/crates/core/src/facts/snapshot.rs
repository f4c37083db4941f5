//! Quick-load binary snapshots of a [`CacheSet`].
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "KBSC" version:u32
//! section*  where section = tag:[u8; 4] len:u64 payload
//! ```
//!
//! Sections appear in the order `PROV ENTS LAST NAME NSPC`.
//!
//! `ENTS` holds a string arena (every distinct string once), a table of
//! record offsets and the records. A record refers to strings by
//! `offset:u64 len:u32`; each referenced string must be valid UTF-8. `LAST` and `NAME` store a [`KeyIndex`] as its four
//! arrays. Loading validates the structure in one pass without allocating per
//! entity, copies the index arrays, and decodes an entity the first time it
//! is accessed. Equal caches produce equal bytes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use super::cache::{unpack_posting, CacheSet, EntityStore, SourceDescriptor};
use super::entity::{Entity, EntityKind};
use super::index::KeyIndex;
use super::FactError;
use crate::date::{DateExpr, Precision};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"KBSC";
pub const SNAPSHOT_VERSION: u32 = 2;

const SECTIONS: [&[u8; 4]; 5] = [b"PROV", b"ENTS", b"LAST", b"NAME", b"NSPC"];

/// Byte offset of the id reference inside a record (after kind and flags).
const ID_REF: usize = 2;
const REF_LEN: usize = 12;

pub fn save_snapshot(cache: &CacheSet, path: &Path) -> Result<(), FactError> {
    let bytes = encode_snapshot(cache);
    std::fs::write(path, bytes).map_err(|source| FactError::Io { path: path.to_path_buf(), source })
}

pub fn load_snapshot(path: &Path) -> Result<CacheSet, FactError> {
    load_snapshot_expecting(path, SNAPSHOT_VERSION)
}

/// Loads a snapshot, requiring the given format version.
pub fn load_snapshot_expecting(path: &Path, version: u32) -> Result<CacheSet, FactError> {
    let bytes = std::fs::read(path).map_err(|source| FactError::Io { path: path.to_path_buf(), source })?;
    decode_snapshot(bytes, version).map_err(|e| e.at(path))
}

pub fn encode_snapshot(cache: &CacheSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + cache.len() * 96);
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());

    section(&mut out, SECTIONS[0], |w| {
        w.u32(cache.provenance.len() as u32);
        for p in &cache.provenance {
            w.str(&p.label);
            w.str(&p.format);
            w.u64(p.entities);
        }
    });
    section(&mut out, SECTIONS[1], |w| {
        let mut strings = Strings::default();
        let mut records = Writer(Vec::new());
        let mut offsets = Vec::with_capacity(cache.len());
        for e in cache.entities() {
            offsets.push(records.0.len() as u64);
            records.record(e, &mut strings);
        }
        w.u32(offsets.len() as u32);
        w.u64(strings.bytes.len() as u64);
        w.0.extend_from_slice(&strings.bytes);
        w.u64(records.0.len() as u64);
        offsets.iter().for_each(|&o| w.u64(o));
        w.0.extend_from_slice(&records.0);
    });
    section(&mut out, SECTIONS[2], |w| w.index(&cache.by_last_name));
    section(&mut out, SECTIONS[3], |w| w.index(&cache.by_name));
    section(&mut out, SECTIONS[4], |w| {
        w.u32(cache.by_namespace.len() as u32);
        for (ns, post) in &cache.by_namespace {
            w.str(ns);
            w.u32(post.len() as u32);
            post.iter().for_each(|&i| w.u32(i));
        }
    });
    out
}

fn section(out: &mut Vec<u8>, tag: &[u8; 4], body: impl FnOnce(&mut Writer)) {
    let mut w = Writer(Vec::new());
    body(&mut w);
    out.extend_from_slice(tag);
    out.extend_from_slice(&(w.0.len() as u64).to_le_bytes());
    out.extend_from_slice(&w.0);
}

/// String arena that stores each distinct string once.
#[derive(Default)]
struct Strings<'a> {
    bytes: Vec<u8>,
    seen: HashMap<&'a str, u64>,
}

impl<'a> Strings<'a> {
    fn offset(&mut self, s: &'a str) -> u64 {
        *self.seen.entry(s).or_insert_with(|| {
            let off = self.bytes.len() as u64;
            self.bytes.extend_from_slice(s.as_bytes());
            off
        })
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn u32s(&mut self, v: &[u32]) {
        v.iter().for_each(|&x| self.u32(x));
    }
    fn index(&mut self, ix: &KeyIndex) {
        self.u32(ix.len() as u32);
        self.str(&ix.arena);
        self.u32s(&ix.key_ends);
        self.u32s(&ix.post_ends);
        self.u64(ix.postings.len() as u64);
        self.u32s(&ix.postings);
    }
    fn sref<'a>(&mut self, s: &'a str, strings: &mut Strings<'a>) {
        let off = strings.offset(s);
        self.u64(off);
        self.u32(s.len() as u32);
    }
    fn list<'a>(&mut self, set: &'a BTreeSet<String>, strings: &mut Strings<'a>) {
        self.u32(set.len() as u32);
        set.iter().for_each(|x| self.sref(x, strings));
    }
    fn date(&mut self, d: Option<DateExpr>) {
        let (tag, year, month, day) = match d {
            None => (0, 0, 0, 0),
            Some(d) => {
                let tag = match d.precision {
                    Precision::Year => 1,
                    Precision::Month => 2,
                    Precision::Day => 3,
                };
                (tag, d.year, d.month.unwrap_or(0), d.day.unwrap_or(0))
            }
        };
        self.u8(tag);
        self.0.extend_from_slice(&year.to_le_bytes());
        self.u8(month);
        self.u8(day);
    }
    fn coord(&mut self, c: Option<f64>) {
        self.u8(c.is_some() as u8);
        self.u64(c.unwrap_or(0.0).to_bits());
    }
    fn record<'a>(&mut self, e: &'a Entity, strings: &mut Strings<'a>) {
        self.u8(match e.kind {
            EntityKind::Person => 0,
            EntityKind::Place => 1,
        });
        self.u8(e.has_wikipedia as u8);
        self.sref(&e.id, strings);
        self.sref(&e.preferred_name, strings);
        self.sref(&e.last_name, strings);
        self.date(e.birth);
        self.date(e.death);
        self.coord(e.latitude);
        self.coord(e.longitude);
        self.list(&e.variant_names, strings);
        self.list(&e.occupations, strings);
        self.list(&e.related_ids, strings);
        self.list(&e.external_links, strings);
    }
}

/// Entity records kept in their encoded form and decoded on first access.
pub(crate) struct PackedEntities {
    buf: Arc<Vec<u8>>,
    strings: Range<usize>,
    records: Range<usize>,
    /// Start of each record, relative to `records`.
    offsets: Vec<u64>,
    slots: Box<[OnceLock<Box<Entity>>]>,
}

impl Clone for PackedEntities {
    fn clone(&self) -> Self {
        PackedEntities {
            buf: self.buf.clone(),
            strings: self.strings.clone(),
            records: self.records.clone(),
            offsets: self.offsets.clone(),
            slots: empty_slots(self.offsets.len()),
        }
    }
}

impl fmt::Debug for PackedEntities {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let decoded = self.slots.iter().filter(|s| s.get().is_some()).count();
        f.debug_struct("PackedEntities").field("len", &self.len()).field("decoded", &decoded).finish()
    }
}

fn empty_slots(n: usize) -> Box<[OnceLock<Box<Entity>>]> {
    (0..n).map(|_| OnceLock::new()).collect()
}

impl PackedEntities {
    pub(crate) fn len(&self) -> usize {
        self.offsets.len()
    }

    fn record(&self, i: usize) -> &[u8] {
        let start = self.records.start + self.offsets[i] as usize;
        let end = self.offsets.get(i + 1).map_or(self.records.end, |&o| self.records.start + o as usize);
        &self.buf[start..end]
    }

    fn string_at(&self, off: u64, len: u32) -> &str {
        let start = self.strings.start + off as usize;
        std::str::from_utf8(&self.buf[start..start + len as usize]).expect("validated when loaded")
    }

    pub(crate) fn id(&self, i: usize) -> &str {
        let r = self.record(i);
        let off = u64::from_le_bytes(r[ID_REF..ID_REF + 8].try_into().expect("8 bytes"));
        let len = u32::from_le_bytes(r[ID_REF + 8..ID_REF + REF_LEN].try_into().expect("4 bytes"));
        self.string_at(off, len)
    }

    pub(crate) fn kind(&self, i: usize) -> EntityKind {
        if self.record(i)[0] == 0 {
            EntityKind::Person
        } else {
            EntityKind::Place
        }
    }

    pub(crate) fn get(&self, i: usize) -> &Entity {
        self.slots[i].get_or_init(|| {
            let strings = &self.buf[self.strings.clone()];
            let mut e = Entity::new(String::new(), EntityKind::Person, String::new());
            walk_record(self.record(i), strings, Some(&mut e)).expect("validated when loaded");
            Box::new(e)
        })
    }
}

/// Reads one record. With `out` it fills the entity; without it only checks
/// the structure, allocating nothing.
fn walk_record(rec: &[u8], strings: &[u8], mut out: Option<&mut Entity>) -> Result<(), DecodeError> {
    let mut r = Reader { b: rec, pos: 0 };
    let kind = match r.u8()? {
        0 => EntityKind::Person,
        1 => EntityKind::Place,
        k => return Err(DecodeError::Corrupt(format!("bad entity kind {k}"))),
    };
    let wiki = r.u8()? != 0;
    let id = r.sref(strings)?;
    let preferred = r.sref(strings)?;
    let last = r.sref(strings)?;
    let (birth, death) = (r.date()?, r.date()?);
    let (lat, lon) = (r.coord()?, r.coord()?);
    if let Some(e) = out.as_deref_mut() {
        e.id = id.to_string();
        e.kind = kind;
        e.has_wikipedia = wiki;
        e.preferred_name = preferred.to_string();
        e.last_name = last.to_string();
        e.birth = birth;
        e.death = death;
        e.latitude = lat;
        e.longitude = lon;
    }
    for field in 0..4 {
        let n = r.u32()?;
        for _ in 0..n {
            let s = r.sref(strings)?;
            if let Some(e) = out.as_deref_mut() {
                let set = match field {
                    0 => &mut e.variant_names,
                    1 => &mut e.occupations,
                    2 => &mut e.related_ids,
                    _ => &mut e.external_links,
                };
                set.insert(s.to_string());
            }
        }
    }
    if r.pos != rec.len() {
        return Err(DecodeError::Corrupt("entity record has trailing bytes".into()));
    }
    Ok(())
}

/// Decoding failure before the path is known.
#[derive(Debug)]
pub(crate) enum DecodeError {
    BadMagic,
    Version(u32, u32),
    Truncated,
    Corrupt(String),
}

impl DecodeError {
    fn at(self, path: &Path) -> FactError {
        let path = path.to_path_buf();
        match self {
            DecodeError::BadMagic => FactError::BadMagic { path },
            DecodeError::Version(found, expected) => FactError::VersionMismatch { path, found, expected },
            DecodeError::Truncated => FactError::TruncatedSnapshot { path },
            DecodeError::Corrupt(message) => FactError::CorruptSnapshot { path, message },
        }
    }
}

pub(crate) fn decode_snapshot(bytes: Vec<u8>, expected: u32) -> Result<CacheSet, DecodeError> {
    if bytes.len() < 4 {
        return Err(if SNAPSHOT_MAGIC.starts_with(&bytes) { DecodeError::Truncated } else { DecodeError::BadMagic });
    }
    if &bytes[..4] != SNAPSHOT_MAGIC {
        return Err(DecodeError::BadMagic);
    }
    let mut r = Reader { b: &bytes, pos: 4 };
    let found = r.u32()?;
    if found != expected {
        return Err(DecodeError::Version(found, expected));
    }
    let mut sections = Vec::with_capacity(SECTIONS.len());
    for tag in SECTIONS {
        let got = r.take(4)?;
        if got != tag {
            return Err(DecodeError::Corrupt(format!(
                "expected section {}, found {}",
                String::from_utf8_lossy(tag),
                String::from_utf8_lossy(got)
            )));
        }
        let len = usize::try_from(r.u64()?).map_err(|_| DecodeError::Truncated)?;
        let start = r.pos;
        r.take(len)?;
        sections.push(start..start + len);
    }
    if r.pos != bytes.len() {
        return Err(DecodeError::Corrupt("trailing bytes after last section".into()));
    }
    let within = |i: usize| Reader { b: &bytes[sections[i].clone()], pos: 0 };

    let mut s = within(0);
    let mut provenance = Vec::new();
    for _ in 0..s.u32()? {
        provenance.push(SourceDescriptor { label: s.string()?, format: s.string()?, entities: s.u64()? });
    }
    s.finish("PROV")?;

    let mut s = within(1);
    let n = s.u32()? as usize;
    let strings_len = s.len_u64()?;
    let strings = sections[1].start + s.pos..sections[1].start + s.pos + strings_len;
    let strings_bytes = s.take(strings_len)?;
    let records_len = s.len_u64()?;
    let offsets: Vec<u64> = s.u64s(n)?;
    let records = sections[1].start + s.pos..sections[1].start + s.pos + records_len;
    let record_bytes = s.take(records_len)?;
    s.finish("ENTS")?;
    if offsets.first().is_some_and(|&o| o != 0) || offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(DecodeError::Corrupt("record offsets out of order".into()));
    }
    if offsets.last().is_some_and(|&o| o as usize > records_len) || (n == 0 && records_len != 0) {
        return Err(DecodeError::Corrupt("record offsets out of range".into()));
    }
    let mut previous_id: Option<&str> = None;
    for i in 0..n {
        let start = offsets[i] as usize;
        let end = offsets.get(i + 1).map_or(records_len, |&o| o as usize);
        let rec = &record_bytes[start..end];
        walk_record(rec, strings_bytes, None)?;
        let id = Reader { b: rec, pos: ID_REF }.sref(strings_bytes)?;
        if previous_id.is_some_and(|p| p >= id) {
            return Err(DecodeError::Corrupt("entity ids not in ascending order".into()));
        }
        previous_id = Some(id);
    }

    let mut s = within(2);
    let by_last_name = s.index()?;
    s.finish("LAST")?;
    by_last_name.validate(n).map_err(DecodeError::Corrupt)?;
    let mut s = within(3);
    let by_name = s.index()?;
    s.finish("NAME")?;
    by_name.validate(n << 2).map_err(DecodeError::Corrupt)?;
    if by_name.postings.iter().any(|&p| unpack_posting(p).1.is_none()) {
        return Err(DecodeError::Corrupt("bad match class".into()));
    }

    let mut s = within(4);
    let mut by_namespace = BTreeMap::new();
    for _ in 0..s.u32()? {
        let ns = s.string()?;
        let m = s.u32()? as usize;
        let post = s.u32s(m)?;
        if post.iter().any(|&i| i as usize >= n) {
            return Err(DecodeError::Corrupt("namespace posting out of range".into()));
        }
        by_namespace.insert(ns, post);
    }
    s.finish("NSPC")?;

    let store = EntityStore::Packed(PackedEntities {
        buf: Arc::new(bytes),
        strings,
        records,
        offsets,
        slots: empty_slots(n),
    });
    Ok(CacheSet::from_parts(store, by_last_name, by_name, by_namespace, provenance))
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.b.len()).ok_or(DecodeError::Truncated)?;
        let s = &self.b[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn finish(&self, tag: &str) -> Result<(), DecodeError> {
        if self.pos == self.b.len() {
            Ok(())
        } else {
            Err(DecodeError::Corrupt(format!("trailing bytes in section {tag}")))
        }
    }
    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len_u64(&mut self) -> Result<usize, DecodeError> {
        usize::try_from(self.u64()?).map_err(|_| DecodeError::Truncated)
    }
    fn u32s(&mut self, n: usize) -> Result<Vec<u32>, DecodeError> {
        let raw = self.take(n.checked_mul(4).ok_or(DecodeError::Truncated)?)?;
        Ok(raw.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }
    fn u64s(&mut self, n: usize) -> Result<Vec<u64>, DecodeError> {
        let raw = self.take(n.checked_mul(8).ok_or(DecodeError::Truncated)?)?;
        Ok(raw.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
    fn string(&mut self) -> Result<String, DecodeError> {
        let n = self.u32()? as usize;
        let raw = self.take(n)?;
        std::str::from_utf8(raw)
            .map(str::to_owned)
            .map_err(|_| DecodeError::Corrupt("invalid UTF-8".into()))
    }
    /// A string reference into the arena `strings`. Only the referenced
    /// bytes are checked, so decoding one entity stays cheap.
    fn sref<'s>(&mut self, strings: &'s [u8]) -> Result<&'s str, DecodeError> {
        let off = usize::try_from(self.u64()?).map_err(|_| DecodeError::Truncated)?;
        let len = self.u32()? as usize;
        let raw = off
            .checked_add(len)
            .and_then(|end| strings.get(off..end))
            .ok_or_else(|| DecodeError::Corrupt("string reference out of range".into()))?;
        std::str::from_utf8(raw).map_err(|_| DecodeError::Corrupt("invalid UTF-8".into()))
    }
    fn index(&mut self) -> Result<KeyIndex, DecodeError> {
        let n = self.u32()? as usize;
        let arena = self.string()?;
        let key_ends = self.u32s(n)?;
        let post_ends = self.u32s(n)?;
        let m = self.len_u64()?;
        let postings = self.u32s(m)?;
        Ok(KeyIndex { arena, key_ends, post_ends, postings })
    }
    fn date(&mut self) -> Result<Option<DateExpr>, DecodeError> {
        let tag = self.u8()?;
        let year = i32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes"));
        let (month, day) = (self.u8()?, self.u8()?);
        let d = match tag {
            0 => return Ok(None),
            1 => Some(DateExpr::year(year)),
            2 => DateExpr::month(year, month),
            3 => DateExpr::day(year, month, day),
            _ => None,
        };
        d.map(Some).ok_or_else(|| DecodeError::Corrupt("invalid date".into()))
    }
    fn coord(&mut self) -> Result<Option<f64>, DecodeError> {
        let present = self.u8()? != 0;
        let v = f64::from_bits(self.u64()?);
        Ok(present.then_some(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> CacheSet {
        CacheSet::from_entities(
            [
                Entity::person("gnd:1", "Gleim, Johann Wilhelm Ludwig")
                    .with_birth(DateExpr::day(1719, 4, 2).unwrap())
                    .with_death(DateExpr::year(1803))
                    .with_occupation("Dichter")
                    .with_wikipedia("https://de.wikipedia.org/wiki/Gleim"),
                Entity::person("gnd:2", "Sulzer, Johann Georg").with_variant("Sultzer").with_related("gnd:1"),
                Entity::place("geo:1", "Zürich").with_variant("Zurich").with_coordinates(47.36667, 8.55),
            ],
            vec![SourceDescriptor { label: "fixture".into(), format: "test".into(), entities: 3 }],
        )
    }

    #[test]
    fn round_trip_preserves_answers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.kbsc");
        let c = fixture();
        save_snapshot(&c, &path).unwrap();
        let d = load_snapshot(&path).unwrap();
        assert!(c.entities().eq(d.entities()));
        assert_eq!(c.provenance(), d.provenance());
        for name in ["Gleim", "gleim", "Sultzer", "Zurich", "Zürich", "Sulzer, Johann Georg"] {
            for kind in EntityKind::ALL {
                let a: Vec<_> = c.lookup_name(name, kind, 5).into_iter().map(|(e, m)| (e.id.clone(), m)).collect();
                let b: Vec<_> = d.lookup_name(name, kind, 5).into_iter().map(|(e, m)| (e.id.clone(), m)).collect();
                assert_eq!(a, b, "{name}");
            }
        }
        assert_eq!(encode_snapshot(&d), encode_snapshot(&c));
    }

    #[test]
    fn bad_magic_and_truncation_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.kbsc");
        std::fs::write(&path, b"XXXX\x01\x00\x00\x00").unwrap();
        let err = load_snapshot(&path).unwrap_err();
        assert!(matches!(err, FactError::BadMagic { .. }));
        assert!(err.to_string().contains("bad.kbsc"));

        let bytes = encode_snapshot(&fixture());
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        let err = load_snapshot(&path).unwrap_err();
        assert!(matches!(err, FactError::TruncatedSnapshot { .. }), "{err}");
        assert!(err.to_string().contains("bad.kbsc"));
    }

    #[test]
    fn newer_reader_rejects_older_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.kbsc");
        save_snapshot(&fixture(), &path).unwrap();
        let err = load_snapshot_expecting(&path, SNAPSHOT_VERSION + 1).unwrap_err();
        match err {
            FactError::VersionMismatch { found, expected, .. } => {
                assert_eq!((found, expected), (SNAPSHOT_VERSION, SNAPSHOT_VERSION + 1))
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn entities_decode_on_first_access() {
        let bytes = encode_snapshot(&fixture());
        let d = decode_snapshot(bytes, SNAPSHOT_VERSION).unwrap();
        let EntityStore::Packed(p) = &d.store else { panic!("loaded cache should be packed") };
        assert!(p.slots.iter().all(|s| s.get().is_none()));
        assert_eq!(d.get_by_id("gnd:2").unwrap().last_name, "Sulzer");
        assert_eq!(p.slots.iter().filter(|s| s.get().is_some()).count(), 1);
        assert_eq!((p.id(0), p.kind(0)), ("geo:1", EntityKind::Place));

        let copy = d.clone();
        assert!(copy.entities().eq(d.entities()));
    }

    #[test]
    fn corrupt_payloads_are_rejected() {
        let good = encode_snapshot(&fixture());
        // Flip each byte after the header in turn. Every result must be
        // an error or a cache that answers like some valid cache would.
        for i in 8..good.len() {
            let mut bad = good.clone();
            bad[i] ^= 0x5a;
            if let Ok(c) = decode_snapshot(bad, SNAPSHOT_VERSION) {
                for e in c.entities() {
                    assert!(c.get_by_id(&e.id).is_some());
                }
                for kind in EntityKind::ALL {
                    let _ = c.lookup_name("Gleim", kind, 5);
                }
            }
        }
    }
}
