//! Bag files: an 8-byte magic followed by `[recv_stamp_ns u64][wire frame]`
//! records with non-decreasing receive stamps.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::broker::{Broker, EndpointId, Envelope, Subscription};
use super::queue::Notify;
use super::BusError;
use crate::msg::{deserialize_frame, wire::frame_len, Frame, Message};

pub const BAG_MAGIC: &[u8; 8] = b"SABAG01\n";

#[derive(Debug, Error)]
pub enum BagError {
    #[error("corrupt bag at byte offset {offset}: {reason}")]
    CorruptBag { offset: u64, reason: String },
    #[error("bag i/o failure: {0}")]
    IoFailure(#[from] io::Error),
}

/// Source of time for recording and paced replay.
pub trait Clock: Send + Sync {
    fn now_ns(&self) -> u64;
    fn sleep_until(&self, t_ns: u64);
}

/// Monotonic wall clock measured from construction.
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now_ns(&self) -> u64 {
        self.origin.elapsed().as_nanos() as u64
    }

    fn sleep_until(&self, t_ns: u64) {
        let now = self.now_ns();
        if t_ns > now {
            std::thread::sleep(Duration::from_nanos(t_ns - now));
        }
    }
}

/// Clock that jumps instead of sleeping; remembers every wake-up time.
#[derive(Default)]
pub struct ManualClock {
    now: Mutex<u64>,
    pub wakeups: Mutex<Vec<u64>>,
}

impl ManualClock {
    pub fn set(&self, t: u64) {
        *self.now.lock().unwrap() = t;
    }
}

impl Clock for ManualClock {
    fn now_ns(&self) -> u64 {
        *self.now.lock().unwrap()
    }

    fn sleep_until(&self, t_ns: u64) {
        let mut now = self.now.lock().unwrap();
        if t_ns > *now {
            *now = t_ns;
        }
        self.wakeups.lock().unwrap().push(*now);
    }
}

pub struct BagWriter<W: Write> {
    out: W,
    last_recv: u64,
    records: u64,
}

impl BagWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, BagError> {
        BagWriter::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> BagWriter<W> {
    pub fn new(mut out: W) -> Result<Self, BagError> {
        out.write_all(BAG_MAGIC)?;
        Ok(BagWriter {
            out,
            last_recv: 0,
            records: 0,
        })
    }

    /// Appends one record. Receive stamps earlier than the previous record's
    /// are raised to keep the file ordered.
    pub fn write_record(&mut self, recv_stamp_ns: u64, frame: &[u8]) -> Result<(), BagError> {
        let recv = recv_stamp_ns.max(self.last_recv);
        self.out.write_all(&recv.to_le_bytes())?;
        self.out.write_all(frame)?;
        self.last_recv = recv;
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn finish(mut self) -> Result<W, BagError> {
        self.out.flush()?;
        Ok(self.out)
    }
}

#[derive(Debug, Clone)]
pub struct BagRecord {
    pub offset: u64,
    pub recv_stamp_ns: u64,
    pub topic: String,
    pub msg: Message,
    pub raw: Arc<[u8]>,
}

pub fn read_bag_file(path: impl AsRef<Path>) -> Result<Vec<BagRecord>, BagError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    parse_bag(&bytes)
}

pub fn parse_bag(bytes: &[u8]) -> Result<Vec<BagRecord>, BagError> {
    let corrupt = |offset: usize, reason: String| BagError::CorruptBag {
        offset: offset as u64,
        reason,
    };
    if bytes.len() < 8 || &bytes[..8] != BAG_MAGIC {
        return Err(corrupt(0, "missing SABAG01 magic".into()));
    }
    let mut out = Vec::new();
    let mut pos = 8;
    let mut last = 0u64;
    while pos < bytes.len() {
        let rest = &bytes[pos..];
        if rest.len() < 12 {
            return Err(corrupt(pos, "truncated record header".into()));
        }
        let recv = u64::from_le_bytes(rest[..8].try_into().unwrap());
        if recv < last {
            return Err(corrupt(pos, "receive stamps decrease".into()));
        }
        let flen = frame_len(&rest[8..]).unwrap() as usize;
        let Some(frame_bytes) = rest.get(8..8 + flen) else {
            return Err(corrupt(pos, "truncated frame".into()));
        };
        match deserialize_frame(frame_bytes) {
            Ok(Frame::Data { topic, msg }) => out.push(BagRecord {
                offset: pos as u64,
                recv_stamp_ns: recv,
                topic,
                msg,
                raw: frame_bytes.into(),
            }),
            Ok(Frame::Control { .. }) => return Err(corrupt(pos, "control frame in bag".into())),
            Err(e) => return Err(corrupt(pos, e.to_string())),
        }
        last = recv;
        pos += 8 + flen;
    }
    Ok(out)
}

/// Taps a broker and appends matching traffic to a bag.
pub struct Recorder<W: Write> {
    sub: Subscription,
    notify: Arc<Notify>,
    writer: BagWriter<W>,
    topics: Vec<String>,
}

/// Queue depth of recorder taps; recording should not lose messages.
pub const RECORDER_CAPACITY: usize = 1 << 16;

impl<W: Write> Recorder<W> {
    /// Records `topics`, or all traffic when `topics` is empty.
    pub fn new(broker: &Broker, topics: &[String], writer: BagWriter<W>) -> Result<Self, BusError> {
        let notify = Notify::new();
        let endpoint: EndpointId = broker.new_endpoint();
        for t in topics {
            super::broker::check_topic_name(t)?;
        }
        // One tap keeps cross-topic publish order; topic filtering happens in pump.
        let sub = broker.tap(endpoint, RECORDER_CAPACITY, notify.clone());
        Ok(Recorder {
            sub,
            notify,
            writer,
            topics: topics.to_vec(),
        })
    }

    fn wanted(&self, env: &Envelope) -> bool {
        self.topics.is_empty() || self.topics.iter().any(|t| **t == *env.topic)
    }

    /// Writes everything queued so far, stamped with `recv_stamp_ns`.
    pub fn pump(&mut self, recv_stamp_ns: u64) -> Result<usize, BagError> {
        let mut n = 0;
        while let Some(env) = self.sub.try_recv() {
            if !self.wanted(&env) {
                continue;
            }
            let raw = env
                .raw()
                .map_err(|e| BagError::IoFailure(io::Error::new(io::ErrorKind::InvalidData, e)))?;
            self.writer.write_record(recv_stamp_ns, &raw)?;
            n += 1;
        }
        Ok(n)
    }

    pub fn records(&self) -> u64 {
        self.writer.records()
    }

    pub fn notifier(&self) -> &Arc<Notify> {
        &self.notify
    }

    pub fn finish(mut self, recv_stamp_ns: u64) -> Result<W, BagError> {
        self.pump(recv_stamp_ns)?;
        self.writer.finish()
    }
}

impl<W: Write + Send + 'static> Recorder<W> {
    /// Drains on a background thread using `clock` for receive stamps.
    pub fn spawn(self, clock: Arc<dyn Clock>) -> RecordingSession<W> {
        let stop = Arc::new(AtomicBool::new(false));
        let stop2 = stop.clone();
        let handle = std::thread::spawn(move || {
            let mut rec = self;
            loop {
                let seen = rec.notify.generation();
                rec.pump(clock.now_ns())?;
                if stop2.load(Ordering::Acquire) {
                    return rec.finish(clock.now_ns());
                }
                rec.notify.wait_past(seen, Duration::from_millis(20));
            }
        });
        RecordingSession { stop, handle }
    }
}

pub struct RecordingSession<W> {
    stop: Arc<AtomicBool>,
    handle: std::thread::JoinHandle<Result<W, BagError>>,
}

impl<W> RecordingSession<W> {
    pub fn close(self) -> Result<W, BagError> {
        self.stop.store(true, Ordering::Release);
        self.handle.join().expect("recorder thread panicked")
    }
}

/// Republishes bag records with their original headers.
pub struct Replayer {
    records: Vec<BagRecord>,
    rate: f64,
    looping: bool,
}

impl Replayer {
    pub fn new(records: Vec<BagRecord>, rate: f64, looping: bool) -> Result<Self, BusError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(BusError::InvalidMessage(format!("replay rate {rate} must be > 0")));
        }
        Ok(Replayer { records, rate, looping })
    }

    pub fn records(&self) -> &[BagRecord] {
        &self.records
    }

    /// Wall-clock offset of record `i` relative to the first one.
    pub fn offset_ns(&self, i: usize) -> u64 {
        let first = self.records.first().map_or(0, |r| r.recv_stamp_ns);
        ((self.records[i].recv_stamp_ns - first) as f64 / self.rate).round() as u64
    }

    /// Runs until the bag is exhausted (or forever when looping), calling
    /// `emit` for each record at its scheduled time. Returns records emitted.
    pub fn run(
        &self,
        clock: &dyn Clock,
        stop: &AtomicBool,
        mut emit: impl FnMut(&BagRecord) -> Result<(), BusError>,
    ) -> Result<u64, BusError> {
        if self.records.is_empty() {
            return Ok(0);
        }
        let last = self.offset_ns(self.records.len() - 1);
        // One nominal inter-record gap between the end of a pass and the next start.
        let pass_gap = if self.records.len() > 1 {
            last / (self.records.len() as u64 - 1)
        } else {
            0
        };
        let mut start = clock.now_ns();
        let mut sent = 0;
        loop {
            for (i, rec) in self.records.iter().enumerate() {
                if stop.load(Ordering::Acquire) {
                    return Ok(sent);
                }
                clock.sleep_until(start + self.offset_ns(i));
                emit(rec)?;
                sent += 1;
            }
            if !self.looping {
                return Ok(sent);
            }
            start += last + pass_gap.max(1);
        }
    }
}
