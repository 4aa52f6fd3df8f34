//! Standard MIDI File (format 0/1) reading and writing, tempo-map timing, and
//! note-level perturbation.
//!
//! Events are stored with absolute ticks and their complete encoded bytes
//! (status included), so anything that is not a note passes through unchanged.
//! Running status is accepted on input and never produced on output.

use std::collections::{HashMap, VecDeque};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::keyed_rng;

const DEFAULT_TEMPO_US: u32 = 500_000;
const MIN_NOTE_SECONDS: f64 = 0.010;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackEvent {
    pub tick: u64,
    /// Complete event bytes, status byte first.
    pub bytes: Vec<u8>,
}

impl TrackEvent {
    fn status(&self) -> u8 {
        self.bytes[0]
    }

    /// `(channel, pitch, is_on)` for note events; velocity-0 note-ons count as offs.
    fn note(&self) -> Option<(u8, u8, bool)> {
        let kind = self.status() & 0xF0;
        let channel = self.status() & 0x0F;
        match kind {
            0x90 if self.bytes[2] > 0 => Some((channel, self.bytes[1], true)),
            0x90 | 0x80 => Some((channel, self.bytes[1], false)),
            _ => None,
        }
    }

    fn is_end_of_track(&self) -> bool {
        self.bytes.len() >= 2 && self.bytes[0] == 0xFF && self.bytes[1] == 0x2F
    }

    fn tempo(&self) -> Option<u32> {
        match self.bytes.as_slice() {
            [0xFF, 0x51, 0x03, a, b, c] => Some(u32::from_be_bytes([0, *a, *b, *c])),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Chunk {
    Track(Vec<TrackEvent>),
    /// Unrecognised chunk, kept verbatim: 4-byte id plus payload.
    Other([u8; 4], Vec<u8>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    TicksPerQuarter(u16),
    /// Frames per second and ticks per frame.
    Smpte(u8, u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MidiFile {
    pub format: u16,
    pub timing: Timing,
    pub chunks: Vec<Chunk>,
}

/// A paired note-on/note-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Note {
    pub track: usize,
    pub channel: u8,
    pub pitch: u8,
    pub velocity: u8,
    pub on_tick: u64,
    pub off_tick: u64,
    on_event: usize,
    off_event: usize,
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Format("unexpected end of MIDI data".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn byte(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn vlq(&mut self) -> Result<u64> {
        let mut v: u64 = 0;
        for _ in 0..4 {
            let b = self.byte()?;
            v = (v << 7) | (b & 0x7F) as u64;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(Error::Format("variable-length quantity longer than 4 bytes".into()))
    }

    fn done(&self) -> bool {
        self.pos >= self.data.len()
    }
}

fn write_vlq(out: &mut Vec<u8>, mut v: u64) {
    let mut buf = [0u8; 10];
    let mut i = buf.len() - 1;
    buf[i] = (v & 0x7F) as u8;
    v >>= 7;
    while v > 0 {
        i -= 1;
        buf[i] = 0x80 | (v & 0x7F) as u8;
        v >>= 7;
    }
    out.extend_from_slice(&buf[i..]);
}

fn parse_track(data: &[u8]) -> Result<Vec<TrackEvent>> {
    let mut r = Reader { data, pos: 0 };
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    let mut events = Vec::new();
    while !r.done() {
        tick += r.vlq()?;
        let start = r.pos;
        let first = r.byte()?;
        let bytes = match first {
            0xFF => {
                running = None;
                let _kind = r.byte()?;
                let len = r.vlq()? as usize;
                r.take(len)?;
                data[start..r.pos].to_vec()
            }
            0xF0 | 0xF7 => {
                running = None;
                let len = r.vlq()? as usize;
                r.take(len)?;
                data[start..r.pos].to_vec()
            }
            0x80..=0xEF => {
                running = Some(first);
                let n = channel_data_len(first);
                let mut b = vec![first];
                b.extend_from_slice(r.take(n)?);
                b
            }
            0xF1..=0xFE => {
                return Err(Error::Format(format!(
                    "system message 0x{first:02X} is not valid inside a track"
                )))
            }
            _ => {
                let status = running
                    .ok_or_else(|| Error::Format("data byte without running status".into()))?;
                let n = channel_data_len(status);
                let mut b = vec![status, first];
                b.extend_from_slice(r.take(n - 1)?);
                b
            }
        };
        if bytes[0] < 0xF0 && bytes[1..].iter().any(|b| b & 0x80 != 0) {
            return Err(Error::Format("channel message data byte has the high bit set".into()));
        }
        events.push(TrackEvent { tick, bytes });
    }
    Ok(events)
}

fn channel_data_len(status: u8) -> usize {
    match status & 0xF0 {
        0xC0 | 0xD0 => 1,
        _ => 2,
    }
}

impl MidiFile {
    pub fn parse(data: &[u8]) -> Result<MidiFile> {
        let mut r = Reader { data, pos: 0 };
        if r.take(4)? != b"MThd" {
            return Err(Error::Format("missing MThd header".into()));
        }
        let len = u32::from_be_bytes(r.take(4)?.try_into().unwrap()) as usize;
        if len < 6 {
            return Err(Error::Format("MThd chunk too short".into()));
        }
        let header = r.take(len)?;
        let format = u16::from_be_bytes([header[0], header[1]]);
        let ntracks = u16::from_be_bytes([header[2], header[3]]);
        let division = u16::from_be_bytes([header[4], header[5]]);
        if format > 1 {
            return Err(Error::Format(format!("SMF format {format} is not supported")));
        }
        let timing = if division & 0x8000 != 0 {
            let fps = (-((division >> 8) as u8 as i8)) as u8;
            let tpf = (division & 0xFF) as u8;
            if fps == 0 || tpf == 0 {
                return Err(Error::Format("invalid SMPTE division".into()));
            }
            Timing::Smpte(fps, tpf)
        } else {
            if division == 0 {
                return Err(Error::Format("zero ticks per quarter note".into()));
            }
            Timing::TicksPerQuarter(division)
        };

        let mut chunks = Vec::new();
        while !r.done() {
            let id: [u8; 4] = r.take(4)?.try_into().unwrap();
            let len = u32::from_be_bytes(r.take(4)?.try_into().unwrap()) as usize;
            let payload = r.take(len)?;
            if &id == b"MTrk" {
                chunks.push(Chunk::Track(parse_track(payload)?));
            } else {
                chunks.push(Chunk::Other(id, payload.to_vec()));
            }
        }
        let found = chunks.iter().filter(|c| matches!(c, Chunk::Track(_))).count();
        if found != ntracks as usize {
            return Err(Error::Format(format!(
                "header declares {ntracks} tracks, file holds {found}"
            )));
        }
        Ok(MidiFile {
            format,
            timing,
            chunks,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"MThd");
        out.extend_from_slice(&6u32.to_be_bytes());
        out.extend_from_slice(&self.format.to_be_bytes());
        out.extend_from_slice(&(self.tracks().count() as u16).to_be_bytes());
        let division = match self.timing {
            Timing::TicksPerQuarter(t) => t,
            Timing::Smpte(fps, tpf) => (((-(fps as i8)) as u8 as u16) << 8) | tpf as u16,
        };
        out.extend_from_slice(&division.to_be_bytes());
        for chunk in &self.chunks {
            match chunk {
                Chunk::Track(events) => {
                    let mut body = Vec::new();
                    let mut last = 0u64;
                    for e in events {
                        write_vlq(&mut body, e.tick - last);
                        body.extend_from_slice(&e.bytes);
                        last = e.tick;
                    }
                    out.extend_from_slice(b"MTrk");
                    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
                    out.extend_from_slice(&body);
                }
                Chunk::Other(id, payload) => {
                    out.extend_from_slice(id);
                    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
                    out.extend_from_slice(payload);
                }
            }
        }
        out
    }

    pub fn tracks(&self) -> impl Iterator<Item = &Vec<TrackEvent>> {
        self.chunks.iter().filter_map(|c| match c {
            Chunk::Track(t) => Some(t),
            Chunk::Other(..) => None,
        })
    }

    fn tracks_mut(&mut self) -> impl Iterator<Item = &mut Vec<TrackEvent>> {
        self.chunks.iter_mut().filter_map(|c| match c {
            Chunk::Track(t) => Some(t),
            Chunk::Other(..) => None,
        })
    }

    /// Notes paired first-in first-out per (track, channel, pitch).
    pub fn notes(&self) -> Result<Vec<Note>> {
        let mut notes = Vec::new();
        for (t, events) in self.tracks().enumerate() {
            let mut open: HashMap<(u8, u8), VecDeque<usize>> = HashMap::new();
            let mut track_notes = Vec::new();
            for (i, e) in events.iter().enumerate() {
                match e.note() {
                    Some((ch, pitch, true)) => open.entry((ch, pitch)).or_default().push_back(i),
                    Some((ch, pitch, false)) => {
                        let on = open
                            .get_mut(&(ch, pitch))
                            .and_then(VecDeque::pop_front)
                            .ok_or_else(|| {
                                Error::Format(format!(
                                    "track {t}: note-off for pitch {pitch} on channel {ch} at tick {} has no open note-on",
                                    e.tick
                                ))
                            })?;
                        track_notes.push(Note {
                            track: t,
                            channel: ch,
                            pitch,
                            velocity: events[on].bytes[2],
                            on_tick: events[on].tick,
                            off_tick: e.tick,
                            on_event: on,
                            off_event: i,
                        });
                    }
                    None => {}
                }
            }
            if let Some(((ch, pitch), q)) = open.iter().find(|(_, q)| !q.is_empty()) {
                return Err(Error::Format(format!(
                    "track {t}: note-on for pitch {pitch} on channel {ch} at tick {} is never released",
                    events[q[0]].tick
                )));
            }
            track_notes.sort_by_key(|n| n.on_event);
            notes.extend(track_notes);
        }
        Ok(notes)
    }

    pub fn tempo_map(&self) -> TempoMap {
        match self.timing {
            Timing::Smpte(fps, tpf) => TempoMap::Smpte {
                ticks_per_second: fps as f64 * tpf as f64,
            },
            Timing::TicksPerQuarter(tpq) => {
                let mut changes: Vec<(u64, u32)> = self
                    .tracks()
                    .flat_map(|t| t.iter().filter_map(|e| e.tempo().map(|v| (e.tick, v))))
                    .collect();
                changes.sort_by_key(|c| c.0);
                let mut segments = vec![TempoSegment {
                    tick: 0,
                    seconds: 0.0,
                    us_per_quarter: DEFAULT_TEMPO_US,
                }];
                for (tick, tempo) in changes {
                    let last = *segments.last().unwrap();
                    let seconds = last.seconds
                        + (tick - last.tick) as f64 * last.us_per_quarter as f64 / 1e6 / tpq as f64;
                    if tick == last.tick {
                        segments.pop();
                    }
                    segments.push(TempoSegment {
                        tick,
                        seconds,
                        us_per_quarter: tempo,
                    });
                }
                TempoMap::Metrical {
                    ticks_per_quarter: tpq as f64,
                    segments,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempoSegment {
    pub tick: u64,
    pub seconds: f64,
    pub us_per_quarter: u32,
}

/// Piecewise-linear tick/second conversion.
#[derive(Debug, Clone, PartialEq)]
pub enum TempoMap {
    Metrical {
        ticks_per_quarter: f64,
        segments: Vec<TempoSegment>,
    },
    Smpte {
        ticks_per_second: f64,
    },
}

impl TempoMap {
    pub fn seconds(&self, tick: u64) -> f64 {
        match self {
            TempoMap::Smpte { ticks_per_second } => tick as f64 / ticks_per_second,
            TempoMap::Metrical {
                ticks_per_quarter,
                segments,
            } => {
                let s = segments.iter().rev().find(|s| s.tick <= tick).expect("segment at tick 0");
                s.seconds + (tick - s.tick) as f64 * s.us_per_quarter as f64 / 1e6 / ticks_per_quarter
            }
        }
    }

    /// Nearest tick to a time in seconds (clamped at zero).
    pub fn tick(&self, seconds: f64) -> u64 {
        let seconds = seconds.max(0.0);
        let t = match self {
            TempoMap::Smpte { ticks_per_second } => seconds * ticks_per_second,
            TempoMap::Metrical {
                ticks_per_quarter,
                segments,
            } => {
                let s = segments
                    .iter()
                    .rev()
                    .find(|s| s.seconds <= seconds)
                    .expect("segment at time 0");
                s.tick as f64 + (seconds - s.seconds) * 1e6 / s.us_per_quarter as f64 * ticks_per_quarter
            }
        };
        t.round() as u64
    }
}

/// Perturbation ranges for selected notes.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PerturbRanges {
    /// Pitch shift drawn uniformly from the integers in `-pitch..=pitch`.
    pub pitch_semitones: i32,
    /// Onset and offset shifts drawn uniformly from `[-time, time]` seconds.
    pub time_seconds: f64,
}

impl Default for PerturbRanges {
    fn default() -> Self {
        PerturbRanges {
            pitch_semitones: 6,
            time_seconds: 0.2,
        }
    }
}

/// What happened to one note.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoteChange {
    pub selected: bool,
    pub pitch_delta: i32,
    pub onset_delta: f64,
    pub offset_delta: f64,
}

const MIDI_STREAM: u64 = 0x6d69_6469;

/// The random draw for one note, keyed by `(seed, level, clip, note)`.
pub fn draw_note_change(prob: f64, ranges: &PerturbRanges, seed: u64, level: u64, clip: u64, note: u64) -> NoteChange {
    let mut rng = keyed_rng(seed, &[MIDI_STREAM, level, clip, note]);
    let selected = rng.random::<f64>() < prob;
    if !selected {
        return NoteChange {
            selected,
            pitch_delta: 0,
            onset_delta: 0.0,
            offset_delta: 0.0,
        };
    }
    let p = ranges.pitch_semitones;
    let t = ranges.time_seconds;
    NoteChange {
        selected,
        pitch_delta: rng.random_range(-p..=p),
        onset_delta: rng.random_range(-t..=t),
        offset_delta: rng.random_range(-t..=t),
    }
}

/// Perturbs each note independently with probability `prob`.
///
/// Selected notes move in pitch (clamped to 0..=127), onset (clamped at 0 s) and
/// offset (kept at least 10 ms after the onset). Timing shifts happen in seconds
/// through the file's tempo map and are rounded back to the nearest tick.
pub fn perturb_midi(
    midi: &MidiFile,
    prob: f64,
    ranges: &PerturbRanges,
    seed: u64,
    level: u64,
    clip: u64,
) -> Result<(MidiFile, Vec<NoteChange>)> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::Domain(format!("probability must lie in [0, 1], got {prob}")));
    }
    let notes = midi.notes()?;
    let map = midi.tempo_map();
    let mut out = midi.clone();
    let mut changes = Vec::with_capacity(notes.len());
    let mut touched = vec![false; out.tracks().count()];
    {
        let mut tracks: Vec<&mut Vec<TrackEvent>> = out.tracks_mut().collect();
        for (idx, note) in notes.iter().enumerate() {
            let change = draw_note_change(prob, ranges, seed, level, clip, idx as u64);
            changes.push(change);
            if !change.selected {
                continue;
            }
            touched[note.track] = true;
            let pitch = (note.pitch as i32 + change.pitch_delta).clamp(0, 127) as u8;
            let on_s = (map.seconds(note.on_tick) + change.onset_delta).max(0.0);
            let off_s = (map.seconds(note.off_tick) + change.offset_delta).max(on_s + MIN_NOTE_SECONDS);
            let on_tick = map.tick(on_s);
            let off_tick = map.tick(off_s).max(on_tick + 1);
            let events = &mut tracks[note.track];
            events[note.on_event].tick = on_tick;
            events[note.on_event].bytes[1] = pitch;
            events[note.off_event].tick = off_tick;
            events[note.off_event].bytes[1] = pitch;
        }
    }
    for (events, changed) in out.tracks_mut().zip(touched) {
        if changed {
            reorder(events);
        }
    }
    Ok((out, changes))
}

/// Restores tick order after edits; ties keep their original order and
/// end-of-track stays last.
fn reorder(events: &mut Vec<TrackEvent>) {
    let last_tick = events.iter().map(|e| e.tick).max().unwrap_or(0);
    for e in events.iter_mut().filter(|e| e.is_end_of_track()) {
        e.tick = last_tick;
    }
    events.sort_by_key(|e| (e.tick, e.is_end_of_track()));
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Builds a single-track file: tempo + program change, then `n` notes of
    /// 0.5 s spaced 1 s apart at 120 bpm (480 ticks per quarter = 960 ticks per second).
    pub(crate) fn synthetic(n: usize, format: u16) -> MidiFile {
        let mut ev = vec![
            TrackEvent { tick: 0, bytes: vec![0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20] },
            TrackEvent { tick: 0, bytes: vec![0xFF, 0x01, 0x04, b't', b'e', b's', b't'] },
            TrackEvent { tick: 0, bytes: vec![0xC0, 0x05] },
        ];
        for i in 0..n {
            let on = 960 + i as u64 * 960;
            let pitch = 40 + (i % 48) as u8;
            ev.push(TrackEvent { tick: on, bytes: vec![0x90, pitch, 100] });
            ev.push(TrackEvent { tick: on + 480, bytes: vec![0x80, pitch, 0] });
        }
        let end = ev.last().unwrap().tick;
        ev.push(TrackEvent { tick: end, bytes: vec![0xFF, 0x2F, 0x00] });
        MidiFile {
            format,
            timing: Timing::TicksPerQuarter(480),
            chunks: vec![Chunk::Track(ev)],
        }
    }

    fn non_note_events(m: &MidiFile) -> Vec<Vec<u8>> {
        m.tracks()
            .flat_map(|t| t.iter().filter(|e| e.note().is_none()).map(|e| e.bytes.clone()))
            .collect()
    }

    #[test]
    fn running_status_is_read_but_not_written() {
        // note on, running-status note off (vel 0), end of track
        let track = [0x00, 0x90, 0x3C, 0x40, 0x60, 0x3C, 0x00, 0x00, 0xFF, 0x2F, 0x00];
        let mut bytes = b"MThd\x00\x00\x00\x06\x00\x00\x00\x01\x01\xE0MTrk".to_vec();
        bytes.extend_from_slice(&(track.len() as u32).to_be_bytes());
        bytes.extend_from_slice(&track);
        let m = MidiFile::parse(&bytes).unwrap();
        let notes = m.notes().unwrap();
        assert_eq!(notes.len(), 1);
        assert_eq!((notes[0].on_tick, notes[0].off_tick), (0, 0x60));
        let out = m.to_bytes();
        assert_eq!(out.len(), bytes.len() + 1, "status byte is written explicitly");
        assert_eq!(MidiFile::parse(&out).unwrap(), m);
    }

    #[test]
    fn write_then_parse_round_trips() {
        let m = synthetic(30, 1);
        let bytes = m.to_bytes();
        let back = MidiFile::parse(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn unpaired_notes_are_format_errors() {
        let mut m = synthetic(2, 0);
        if let Chunk::Track(ev) = &mut m.chunks[0] {
            ev.retain(|e| e.bytes[0] != 0x80 || e.tick != 960 + 480);
        }
        assert!(matches!(m.notes(), Err(Error::Format(_))));
        let stray = MidiFile {
            format: 0,
            timing: Timing::TicksPerQuarter(96),
            chunks: vec![Chunk::Track(vec![
                TrackEvent { tick: 5, bytes: vec![0x80, 60, 0] },
                TrackEvent { tick: 5, bytes: vec![0xFF, 0x2F, 0x00] },
            ])],
        };
        assert!(matches!(
            perturb_midi(&stray, 0.5, &PerturbRanges::default(), 0, 0, 0),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn tempo_map_converts_both_ways() {
        let mut m = synthetic(1, 0);
        if let Chunk::Track(ev) = &mut m.chunks[0] {
            // switch to 60 bpm at tick 960 (one second in)
            ev.insert(1, TrackEvent { tick: 960, bytes: vec![0xFF, 0x51, 0x03, 0x0F, 0x42, 0x40] });
            ev.sort_by_key(|e| e.tick);
        }
        let map = m.tempo_map();
        assert_eq!(map.seconds(960), 1.0);
        assert_eq!(map.seconds(960 + 480), 2.0);
        assert_eq!(map.tick(2.0), 1440);
        assert_eq!(map.tick(0.5), 480);
    }

    #[test]
    fn zero_probability_is_identity() {
        let m = synthetic(200, 0);
        let (out, changes) = perturb_midi(&m, 0.0, &PerturbRanges::default(), 9, 0, 0).unwrap();
        assert_eq!(out, m);
        assert!(changes.iter().all(|c| !c.selected));
    }

    #[test]
    fn full_probability_respects_ranges() {
        let m = synthetic(10_000, 0);
        let map = m.tempo_map();
        let before = m.notes().unwrap();
        let (out, changes) = perturb_midi(&m, 1.0, &PerturbRanges::default(), 1, 3, 0).unwrap();
        assert!(changes.iter().all(|c| c.selected));
        let after = out.notes().unwrap();
        assert_eq!(after.len(), before.len());
        let half_tick = 0.5 / 960.0;
        for c in &changes {
            assert!((-6..=6).contains(&c.pitch_delta));
            assert!(c.onset_delta.abs() <= 0.2 && c.offset_delta.abs() <= 0.2);
        }
        for (b, c) in before.iter().zip(&changes) {
            let on = map.tick(map.seconds(b.on_tick) + c.onset_delta);
            let off = map.tick(map.seconds(b.off_tick) + c.offset_delta);
            assert!((map.seconds(on) - map.seconds(b.on_tick)).abs() <= 0.2 + half_tick);
            assert!((map.seconds(off) - map.seconds(b.off_tick)).abs() <= 0.2 + half_tick);
        }
        let mut on_ticks: Vec<u64> = after.iter().map(|n| n.on_tick).collect();
        let mut expected: Vec<u64> = before
            .iter()
            .zip(&changes)
            .map(|(b, c)| map.tick(map.seconds(b.on_tick) + c.onset_delta))
            .collect();
        on_ticks.sort_unstable();
        expected.sort_unstable();
        assert_eq!(on_ticks, expected);
        assert_eq!(non_note_events(&out), non_note_events(&m));
        // every pitch delta value is reachable
        let mut seen: Vec<i32> = changes.iter().map(|c| c.pitch_delta).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen, (-6..=6).collect::<Vec<_>>());
    }

    #[test]
    fn selection_rate_is_binomial() {
        let m = synthetic(10_000, 1);
        let prob = 0.3;
        let (_, changes) = perturb_midi(&m, prob, &PerturbRanges::default(), 4, 1, 2).unwrap();
        let n = changes.len() as f64;
        let hits = changes.iter().filter(|c| c.selected).count() as f64;
        let sd = (n * prob * (1.0 - prob)).sqrt();
        assert!((hits - n * prob).abs() <= 3.0 * sd, "{hits}");
    }

    #[test]
    fn clamps_pitch_onset_and_duration() {
        let ev = vec![
            TrackEvent { tick: 0, bytes: vec![0x90, 127, 90] },
            TrackEvent { tick: 2, bytes: vec![0x80, 127, 0] },
            TrackEvent { tick: 2, bytes: vec![0x90, 0, 90] },
            TrackEvent { tick: 4, bytes: vec![0x80, 0, 0] },
            TrackEvent { tick: 4, bytes: vec![0xFF, 0x2F, 0x00] },
        ];
        let m = MidiFile {
            format: 0,
            timing: Timing::TicksPerQuarter(480),
            chunks: vec![Chunk::Track(ev)],
        };
        let map = m.tempo_map();
        for seed in 0..50 {
            let (out, _) = perturb_midi(&m, 1.0, &PerturbRanges::default(), seed, 0, 0).unwrap();
            for n in out.notes().unwrap() {
                assert!(map.seconds(n.off_tick) - map.seconds(n.on_tick) >= MIN_NOTE_SECONDS - 1.0 / 960.0);
                assert!(n.pitch <= 127);
            }
            let last = out.tracks().next().unwrap().last().unwrap();
            assert!(last.is_end_of_track());
        }
    }
}
