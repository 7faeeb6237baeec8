use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::runner::{answer, param_publishers};
use super::{NodeRunner, ParamRegistry, RuntimeError};
use crate::bus::broker::EnvelopeQueue;
use crate::bus::{Broker, Notify, Publisher, Subscription, DEFAULT_QUEUE_CAPACITY};
use crate::config::schema::PARAMS_TOPIC;
use crate::config::PipelineConfig;
use crate::msg::{Message, MessageKind};

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Stop after this long. Lockstep runs measure it in stream time.
    pub duration: Option<Duration>,
    /// Pace sources against the wall clock at this speed-up; `None` runs
    /// as fast as possible. The threaded executor always paces (default 1).
    pub rate: Option<f64>,
    /// Keep serving after every source has finished.
    pub linger: bool,
    pub stop: Arc<AtomicBool>,
    pub queue_capacity: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            duration: None,
            rate: None,
            linger: false,
            stop: Arc::new(AtomicBool::new(false)),
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub ticks: u64,
    /// Inputs or outputs dropped because a node rejected them.
    pub warnings: u64,
    /// Stream time of the last source frame.
    pub last_due_ns: u64,
    pub interrupted: bool,
}

/// Called after each lockstep frame once the pipeline is quiescent, with
/// the frame's stream time.
pub type LockstepHook<'a> = &'a mut dyn FnMut(u64) -> Result<(), RuntimeError>;

/// Answers parameter requests addressed to nodes that do not exist, so
/// every request gets exactly one reply.
struct ParamGuard {
    registry: ParamRegistry,
    sub: Subscription,
    ack: Publisher,
    err: Publisher,
}

impl ParamGuard {
    fn new(broker: &Broker, registry: &ParamRegistry, notify: Arc<Notify>) -> Result<Self, RuntimeError> {
        let endpoint = broker.new_endpoint();
        let sub = broker.subscribe_with(endpoint, PARAMS_TOPIC, Some(MessageKind::ParamUpdate), 1024, notify)?;
        let (ack, err) = param_publishers(broker, endpoint)?;
        Ok(ParamGuard {
            registry: registry.clone(),
            sub,
            ack,
            err,
        })
    }

    fn poll(&self) {
        while let Some(env) = self.sub.try_recv() {
            if let Message::ParamUpdate(req) = &*env.msg {
                if !self.registry.contains(&req.node) {
                    answer(&self.ack, &self.err, req, Err(format!("no node named {:?}", req.node)));
                }
            }
        }
    }
}

pub struct Pipeline {
    runners: Vec<NodeRunner>,
    broker: Broker,
    registry: ParamRegistry,
    guard: ParamGuard,
    guard_notify: Arc<Notify>,
}

impl Pipeline {
    /// Instantiates every node. Failures name the node.
    pub fn build(cfg: &PipelineConfig, broker: &Broker, queue_capacity: usize) -> Result<Self, RuntimeError> {
        let registry = ParamRegistry::default();
        let guard_notify = Notify::new();
        let guard = ParamGuard::new(broker, &registry, guard_notify.clone())?;
        let runners = cfg
            .nodes
            .iter()
            .map(|d| NodeRunner::new(d, broker, &registry, queue_capacity))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Pipeline {
            runners,
            broker: broker.clone(),
            registry,
            guard,
            guard_notify,
        })
    }

    pub fn registry(&self) -> ParamRegistry {
        self.registry.clone()
    }

    pub fn broker(&self) -> &Broker {
        &self.broker
    }

    pub fn has_sources(&self) -> bool {
        self.runners.iter().any(NodeRunner::is_source)
    }

    fn drain(&mut self) -> Result<(), RuntimeError> {
        loop {
            self.guard.poll();
            let mut progress = false;
            for r in &mut self.runners {
                while r.step()? {
                    progress = true;
                }
            }
            if !progress {
                return Ok(());
            }
        }
    }

    /// Single-threaded deterministic run. Sources fire in order of their
    /// due times (ties in config order) and the pipeline is drained after
    /// every frame.
    pub fn run_lockstep(
        mut self,
        opts: &RunOptions,
        mut hook: Option<LockstepHook<'_>>,
    ) -> Result<RunSummary, RuntimeError> {
        let start = Instant::now();
        let limit = opts.duration.map(|d| d.as_nanos() as u64);
        let mut summary = RunSummary::default();
        self.drain()?;
        loop {
            if opts.stop.load(Ordering::Acquire) {
                summary.interrupted = true;
                break;
            }
            let next = self
                .runners
                .iter()
                .enumerate()
                .filter_map(|(i, r)| r.next_due().map(|d| (d, i)))
                .filter(|&(d, _)| limit.is_none_or(|l| d < l))
                .min();
            let Some((due, i)) = next else { break };
            if let Some(rate) = opts.rate {
                let at = start + Duration::from_nanos((due as f64 / rate) as u64);
                sleep_until(at, &opts.stop);
            }
            self.runners[i].tick()?;
            self.drain()?;
            summary.ticks += 1;
            summary.last_due_ns = due;
            if let Some(h) = hook.as_mut() {
                h(due)?;
            }
        }
        if (opts.linger || !self.has_sources()) && !summary.interrupted {
            while !opts.stop.load(Ordering::Acquire) && opts.duration.is_none_or(|d| start.elapsed() < d) {
                self.drain()?;
                std::thread::sleep(Duration::from_millis(10));
            }
            summary.interrupted = opts.stop.load(Ordering::Acquire);
        }
        self.drain()?;
        summary.warnings = self.runners.iter().map(NodeRunner::warnings).sum();
        Ok(summary)
    }

    /// Runs every node on its own thread with sources paced in real time.
    pub fn spawn(self, opts: RunOptions) -> RunningPipeline {
        let rate = opts.rate.unwrap_or(1.0);
        let start = Instant::now();
        let stop = opts.stop.clone();
        let first_error: Arc<Mutex<Option<RuntimeError>>> = Arc::default();
        let limit = opts.duration.map(|d| d.as_nanos() as u64);
        let mut watches = Vec::new();
        let mut handles = Vec::new();
        let has_sources = self.has_sources();

        for mut r in self.runners {
            let busy = Arc::new(AtomicBool::new(true));
            let done = Arc::new(AtomicBool::new(!r.is_source()));
            watches.push(Watch {
                busy: busy.clone(),
                done: done.clone(),
                queues: r.queues(),
            });
            let stop = stop.clone();
            let errors = first_error.clone();
            let name = r.name.clone();
            let h = std::thread::Builder::new()
                .name(name)
                .spawn(move || {
                    let mut ticks = (0, 0);
                    let res = node_thread(&mut r, &stop, &busy, &done, start, rate, limit, &mut ticks);
                    busy.store(false, Ordering::Release);
                    done.store(true, Ordering::Release);
                    if let Err(e) = &res {
                        log::error!("{e}");
                        errors
                            .lock()
                            .unwrap()
                            .get_or_insert_with(|| RuntimeError::node(&r.name, e));
                        stop.store(true, Ordering::Release);
                    }
                    (r.warnings(), ticks.0, ticks.1)
                })
                .expect("spawn node thread");
            handles.push(h);
        }
        let guard = self.guard;
        let gnotify = self.guard_notify;
        let gstop = stop.clone();
        handles.push(std::thread::spawn(move || {
            while !gstop.load(Ordering::Acquire) {
                let seen = gnotify.generation();
                guard.poll();
                gnotify.wait_past(seen, Duration::from_millis(50));
            }
            (0, 0, 0)
        }));
        RunningPipeline {
            stop,
            handles,
            watches,
            first_error,
            start,
            duration: opts.duration,
            linger: opts.linger || !has_sources,
        }
    }
}

fn sleep_until(at: Instant, stop: &AtomicBool) {
    while !stop.load(Ordering::Acquire) {
        let now = Instant::now();
        if now >= at {
            return;
        }
        std::thread::sleep((at - now).min(Duration::from_millis(20)));
    }
}

#[allow(clippy::too_many_arguments)]
fn node_thread(
    r: &mut NodeRunner,
    stop: &AtomicBool,
    busy: &AtomicBool,
    done: &AtomicBool,
    start: Instant,
    rate: f64,
    limit: Option<u64>,
    ticks: &mut (u64, u64),
) -> Result<(), RuntimeError> {
    let notify = r.notifier().clone();
    while !stop.load(Ordering::Acquire) {
        let seen = notify.generation();
        busy.store(true, Ordering::Release);
        while r.step()? {}
        let mut wait = Duration::from_millis(50);
        if r.is_source() && !done.load(Ordering::Acquire) {
            match r.next_due().filter(|&d| limit.is_none_or(|l| d < l)) {
                None => done.store(true, Ordering::Release),
                Some(due) => {
                    let at = start + Duration::from_nanos((due as f64 / rate) as u64);
                    let now = Instant::now();
                    if now >= at {
                        r.tick()?;
                        ticks.0 += 1;
                        ticks.1 = ticks.1.max(due);
                        continue;
                    }
                    wait = wait.min(at - now);
                }
            }
        }
        busy.store(false, Ordering::Release);
        notify.wait_past(seen, wait);
    }
    Ok(())
}

struct Watch {
    busy: Arc<AtomicBool>,
    done: Arc<AtomicBool>,
    queues: Vec<Arc<EnvelopeQueue>>,
}

impl Watch {
    fn quiet(&self) -> bool {
        self.done.load(Ordering::Acquire)
            && !self.busy.load(Ordering::Acquire)
            && self.queues.iter().all(|q| q.is_empty())
    }
}

/// Handle to a threaded pipeline.
pub struct RunningPipeline {
    stop: Arc<AtomicBool>,
    handles: Vec<JoinHandle<(u64, u64, u64)>>,
    watches: Vec<Watch>,
    first_error: Arc<Mutex<Option<RuntimeError>>>,
    start: Instant,
    duration: Option<Duration>,
    linger: bool,
}

impl RunningPipeline {
    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        self.stop.clone()
    }

    pub fn stop(&self) {
        self.stop.store(true, Ordering::Release);
    }

    fn finished(&self) -> bool {
        // two looks a little apart, so a message in flight between nodes is seen
        !self.linger
            && (0..2).all(|i| {
                if i > 0 {
                    std::thread::sleep(Duration::from_millis(20));
                }
                self.watches.iter().all(Watch::quiet)
            })
    }

    /// Blocks until the duration passes, every source has finished and the
    /// pipeline is quiet, a node fails, or the stop flag is raised.
    pub fn wait(self) -> Result<RunSummary, RuntimeError> {
        let mut interrupted = false;
        loop {
            if self.stop.load(Ordering::Acquire) {
                interrupted = self.first_error.lock().unwrap().is_none();
                break;
            }
            if self.duration.is_some_and(|d| self.start.elapsed() >= d) || self.finished() {
                break;
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        self.stop.store(true, Ordering::Release);
        let (mut warnings, mut ticks, mut last_due_ns) = (0, 0, 0);
        for h in self.handles {
            let (w, t, d) = h.join().unwrap_or_default();
            warnings += w;
            ticks += t;
            last_due_ns = last_due_ns.max(d);
        }
        if let Some(e) = self.first_error.lock().unwrap().take() {
            return Err(e);
        }
        Ok(RunSummary {
            ticks,
            warnings,
            last_due_ns,
            interrupted,
        })
    }
}
