use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};

use attbus::bus::bag::read_bag_file;
use attbus::bus::tcp::BROKER_ENV;
use attbus::bus::{
    BagWriter, Broker, Publisher, Recorder, Replayer, SystemClock, TcpBrokerServer, TcpBusClient, DEFAULT_BROKER_ADDR,
};
use attbus::config::{load_config, PipelineConfig};
use attbus::eval::{report_csv, report_table, run_comparison, EvalError, GroundTruthSource};
use attbus::gateway::{message_data, Gateway};
use attbus::msg::Message;
use attbus::runtime::{Pipeline, RunOptions, RuntimeError};

#[derive(Parser)]
#[command(
    name = "attbus",
    version,
    about = "Run, record, replay and evaluate attention pipelines"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a pipeline in real time.
    Run {
        config: PathBuf,
        /// Seconds to run; default is until the sources end or Ctrl-C.
        #[arg(long)]
        duration: Option<f64>,
        /// Address to expose the bus on for `topics`, `echo` and `replay`.
        #[arg(long, env = BROKER_ENV, default_value = DEFAULT_BROKER_ADDR)]
        broker: String,
    },
    /// Run a pipeline deterministically and write its traffic to a bag.
    Record {
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Comma-separated topics; default is every topic.
        #[arg(long, value_delimiter = ',')]
        topics: Vec<String>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Publish the contents of a bag on the bus.
    Replay {
        file: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        #[arg(long = "loop")]
        looping: bool,
        #[arg(long, env = BROKER_ENV, default_value = DEFAULT_BROKER_ADDR)]
        broker: String,
    },
    /// Compare attention algorithms on one pipeline against ground truth.
    Eval {
        config: PathBuf,
        /// CSV file of `frame,x,y,w,h`, or `topic:/name` to read it from the bus.
        #[arg(long)]
        gt: GroundTruthSource,
        #[arg(long, value_delimiter = ',', required = true)]
        algorithms: Vec<String>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run a pipeline behind the HTTP/WebSocket gateway.
    Serve {
        config: PathBuf,
        #[arg(long, default_value_t = 8080)]
        http: u16,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, env = BROKER_ENV, default_value = DEFAULT_BROKER_ADDR)]
        broker: String,
    },
    /// List the topics known to a running broker.
    Topics {
        #[arg(long, env = BROKER_ENV, default_value = DEFAULT_BROKER_ADDR)]
        broker: String,
    },
    /// Print messages on a topic as JSON lines.
    Echo {
        topic: String,
        /// Exit after this many messages.
        #[arg(long)]
        count: Option<u64>,
        #[arg(long, env = BROKER_ENV, default_value = DEFAULT_BROKER_ADDR)]
        broker: String,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<RuntimeError> for Failure {
    fn from(e: RuntimeError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            msg: e.to_string(),
        }
    }
}

fn runtime_failure(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        msg: e.to_string(),
    }
}

fn config(path: &Path) -> Result<PipelineConfig, Failure> {
    load_config(path).map_err(|e| Failure {
        code: 1,
        msg: format!("{}: {e}", path.display()),
    })
}

fn seconds(s: Option<f64>) -> Result<Option<Duration>, Failure> {
    s.map(|v| {
        Duration::try_from_secs_f64(v).map_err(|_| Failure {
            code: 1,
            msg: format!("bad duration {v}"),
        })
    })
    .transpose()
}

fn stop_on_interrupt() -> Arc<AtomicBool> {
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::Release)) {
        log::warn!("cannot install Ctrl-C handler: {e}");
    }
    stop
}

/// Exposing the bus over TCP is a convenience; a busy port only warns.
fn host_broker(addr: &str, broker: &Broker) -> Option<TcpBrokerServer> {
    match TcpBrokerServer::bind(addr, broker.clone()) {
        Ok(s) => {
            eprintln!("bus listening on {}", s.local_addr());
            Some(s)
        }
        Err(e) => {
            log::warn!("{e}; continuing without a network bus");
            None
        }
    }
}

fn run(path: &Path, duration: Option<f64>, broker_addr: &str) -> Result<(), Failure> {
    let cfg = config(path)?;
    let opts = RunOptions {
        duration: seconds(duration)?,
        stop: stop_on_interrupt(),
        ..RunOptions::default()
    };
    let broker = Broker::new();
    let pipeline = Pipeline::build(&cfg, &broker, opts.queue_capacity)?;
    let server = host_broker(broker_addr, &broker);
    let summary = pipeline.spawn(opts).wait()?;
    if let Some(s) = server {
        s.shutdown();
    }
    eprintln!(
        "{} ticks, {} warnings{}",
        summary.ticks,
        summary.warnings,
        if summary.interrupted { ", interrupted" } else { "" }
    );
    Ok(())
}

fn record(path: &Path, output: &Path, topics: &[String], duration: Option<f64>) -> Result<(), Failure> {
    let cfg = config(path)?;
    let opts = RunOptions {
        duration: seconds(duration)?,
        stop: stop_on_interrupt(),
        ..RunOptions::default()
    };
    let broker = Broker::new();
    let pipeline = Pipeline::build(&cfg, &broker, opts.queue_capacity)?;
    let writer = BagWriter::create(output).map_err(runtime_failure)?;
    let mut recorder = Recorder::new(&broker, topics, writer).map_err(runtime_failure)?;
    // receive stamps are the frame's stream time, so re-recording is byte-identical
    let mut last = 0;
    let mut hook = |due: u64| {
        last = due;
        recorder.pump(due).map(|_| ()).map_err(RuntimeError::Bag)
    };
    let summary = pipeline.run_lockstep(&opts, Some(&mut hook))?;
    let n = recorder.records();
    recorder.finish(last).map_err(runtime_failure)?;
    eprintln!(
        "{n} records written to {}{}",
        output.display(),
        if summary.interrupted { " (interrupted)" } else { "" }
    );
    Ok(())
}

fn replay(file: &Path, rate: f64, looping: bool, broker_addr: &str) -> Result<(), Failure> {
    let records = read_bag_file(file).map_err(|e| Failure {
        code: 1,
        msg: format!("{}: {e}", file.display()),
    })?;
    let replayer = Replayer::new(records, rate, looping).map_err(|e| Failure {
        code: 1,
        msg: e.to_string(),
    })?;
    let stop = stop_on_interrupt();
    let clock = SystemClock::default();
    let sent = match TcpBusClient::connect(broker_addr) {
        Ok(client) => {
            let n = replayer.run(&clock, &stop, |r| client.publish_raw(&r.raw));
            client.close();
            n
        }
        Err(_) => {
            // nobody is listening: host the bus so `echo` can attach
            let broker = Broker::new();
            let server = host_broker(broker_addr, &broker);
            let endpoint = broker.new_endpoint();
            let mut pubs: HashMap<String, Publisher> = HashMap::new();
            let n = replayer.run(&clock, &stop, |r| {
                if !pubs.contains_key(&r.topic) {
                    pubs.insert(r.topic.clone(), broker.advertise(endpoint, &r.topic, r.msg.kind())?);
                }
                pubs[&r.topic].publish_verbatim(r.msg.clone()).map(|_| ())
            });
            if let Some(s) = server {
                s.shutdown();
            }
            n
        }
    }
    .map_err(runtime_failure)?;
    eprintln!("{sent} records replayed");
    Ok(())
}

fn eval(path: &Path, gt: &GroundTruthSource, algorithms: &[String], report: &Path) -> Result<(), Failure> {
    let cfg = config(path)?;
    let rows = run_comparison(&cfg, algorithms, gt).map_err(|e| Failure {
        code: if matches!(e, EvalError::Pipeline { .. }) { 2 } else { 1 },
        msg: e.to_string(),
    })?;
    std::fs::write(report, report_csv(&rows)).map_err(|e| runtime_failure(format!("{}: {e}", report.display())))?;
    print!("{}", report_table(&rows));
    Ok(())
}

fn serve(path: &Path, http: u16, duration: Option<f64>, broker_addr: &str) -> Result<(), Failure> {
    let cfg = config(path)?;
    let opts = RunOptions {
        duration: seconds(duration)?,
        linger: true,
        stop: stop_on_interrupt(),
        ..RunOptions::default()
    };
    let broker = Broker::new();
    let pipeline = Pipeline::build(&cfg, &broker, opts.queue_capacity)?;
    let gateway = Gateway::new(&broker, &pipeline.registry(), &cfg)
        .start(&format!("127.0.0.1:{http}"))
        .map_err(runtime_failure)?;
    eprintln!("gateway on http://{}", gateway.local_addr());
    let server = host_broker(broker_addr, &broker);
    let result = pipeline.spawn(opts).wait();
    gateway.shutdown();
    if let Some(s) = server {
        s.shutdown();
    }
    result?;
    Ok(())
}

fn connect(addr: &str) -> Result<TcpBusClient, Failure> {
    TcpBusClient::connect(addr).map_err(runtime_failure)
}

fn topics(addr: &str) -> Result<(), Failure> {
    let client = connect(addr)?;
    // the broker announces its topics right after the connection opens
    std::thread::sleep(Duration::from_millis(300));
    let mut list = client.known_topics();
    list.sort();
    for (name, kind) in list {
        println!("{name} {kind}");
    }
    client.close();
    Ok(())
}

fn summary_line(topic: &str, msg: &Message) -> String {
    let mut data = message_data(msg);
    if let Some(o) = data.as_object_mut() {
        o.remove("png");
    }
    let h = msg.header();
    serde_json::json!({
        "topic": topic, "type": msg.kind().name(), "seq": h.seq,
        "stamp_ns": h.stamp_ns, "frame_id": h.frame_id, "data": data,
    })
    .to_string()
}

fn echo(topic: &str, count: Option<u64>, addr: &str) -> Result<(), Failure> {
    let client = connect(addr)?;
    let queue = client.subscribe(topic, None, 256).map_err(|e| Failure {
        code: 1,
        msg: e.to_string(),
    })?;
    let stop = stop_on_interrupt();
    let mut seen = 0;
    while !stop.load(Ordering::Acquire) && count.is_none_or(|c| seen < c) {
        if client.is_closed() {
            return Err(runtime_failure("broker closed the connection"));
        }
        if let Some(env) = queue.pop_timeout(Duration::from_millis(100)) {
            println!("{}", summary_line(&env.topic, &env.msg));
            seen += 1;
        }
    }
    client.close();
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run {
            config,
            duration,
            broker,
        } => run(config, *duration, broker),
        Cmd::Record {
            config,
            output,
            topics,
            duration,
        } => record(config, output, topics, *duration),
        Cmd::Replay {
            file,
            rate,
            looping,
            broker,
        } => replay(file, *rate, *looping, broker),
        Cmd::Eval {
            config,
            gt,
            algorithms,
            report,
        } => eval(config, gt, algorithms, report),
        Cmd::Serve {
            config,
            http,
            duration,
            broker,
        } => serve(config, *http, *duration, broker),
        Cmd::Topics { broker } => topics(broker),
        Cmd::Echo { topic, count, broker } => echo(topic, *count, broker),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
