use std::time::{Duration, Instant};

use attbus::bus::{Broker, Notify, TcpBrokerServer, TcpBusClient};
use attbus::msg::{BoundingBox, Header, Message, MessageKind, ObjectFoa, PointFoa};

fn point(stamp: u64) -> Message {
    Message::PointFoa(PointFoa {
        header: Header::new(0, stamp),
        x: 3,
        y: 4,
        score: 0.5,
    })
}

fn wait_for<T>(timeout: Duration, mut f: impl FnMut() -> Option<T>) -> Option<T> {
    let end = Instant::now() + timeout;
    while Instant::now() < end {
        if let Some(v) = f() {
            return Some(v);
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    None
}

fn server() -> (Broker, TcpBrokerServer) {
    let broker = Broker::new();
    let s = TcpBrokerServer::bind("127.0.0.1:0", broker.clone()).unwrap();
    (broker, s)
}

#[test]
fn local_publisher_reaches_remote_subscriber() {
    let (broker, srv) = server();
    let p = broker
        .advertise(broker.new_endpoint(), "/foa", MessageKind::PointFoa)
        .unwrap();
    let client = TcpBusClient::connect(srv.local_addr()).unwrap();
    let q = client.subscribe("/foa", Some(MessageKind::PointFoa), 64).unwrap();
    // the subscription is registered asynchronously; publish until it lands
    let got = wait_for(Duration::from_secs(5), || {
        p.publish(point(7)).unwrap();
        q.pop()
    })
    .expect("no message over tcp");
    assert_eq!(got.msg.stamp_ns(), 7);
    assert_eq!(&*got.topic, "/foa");
    client.close();
}

#[test]
fn remote_publisher_reaches_local_subscriber_with_header_intact() {
    let (broker, srv) = server();
    let sub = broker
        .subscribe_with(
            broker.new_endpoint(),
            "/obj",
            Some(MessageKind::ObjectFoa),
            64,
            Notify::new(),
        )
        .unwrap();
    let client = TcpBusClient::connect(srv.local_addr()).unwrap();
    let msg = Message::ObjectFoa(ObjectFoa {
        header: Header {
            seq: 41,
            stamp_ns: 99,
            frame_id: "cam".into(),
        },
        bbox: BoundingBox::new(1, 2, 3, 4),
        score: 0.25,
    });
    client.publish("/obj", &msg).unwrap();
    let env = sub.recv_timeout(Duration::from_secs(5)).expect("nothing routed");
    assert_eq!(*env.msg, msg);
    client.close();
}

#[test]
fn clients_learn_topics_and_relay_between_each_other() {
    let (broker, srv) = server();
    broker.bind("/existing", MessageKind::Image).unwrap();
    let a = TcpBusClient::connect(srv.local_addr()).unwrap();
    let b = TcpBusClient::connect(srv.local_addr()).unwrap();
    a.advertise("/pts", MessageKind::PointFoa).unwrap();
    let known = wait_for(Duration::from_secs(5), || {
        let t = b.known_topics();
        (t.len() == 2).then_some(t)
    })
    .expect("topics not announced");
    assert!(known.contains(&("/existing".to_string(), MessageKind::Image)));
    assert!(known.contains(&("/pts".to_string(), MessageKind::PointFoa)));

    let q = b.subscribe("/pts", None, 64).unwrap();
    let got = wait_for(Duration::from_secs(5), || {
        a.publish("/pts", &point(5)).unwrap();
        q.pop()
    });
    assert_eq!(got.unwrap().msg.stamp_ns(), 5);
    a.close();
    b.close();
}

#[test]
fn type_conflict_closes_only_the_offender() {
    let (broker, srv) = server();
    broker.bind("/img", MessageKind::Image).unwrap();
    let bad = TcpBusClient::connect(srv.local_addr()).unwrap();
    bad.advertise("/img", MessageKind::PointFoa).unwrap();
    assert!(wait_for(Duration::from_secs(5), || bad.is_closed().then_some(())).is_some());

    let good = TcpBusClient::connect(srv.local_addr()).unwrap();
    good.advertise("/other", MessageKind::PointFoa).unwrap();
    assert!(wait_for(Duration::from_secs(5), || broker.topic_kind("/other")).is_some());
    assert!(!good.is_closed());
    good.close();
}

#[test]
fn second_bind_on_same_port_fails() {
    let (broker, srv) = server();
    let addr = srv.local_addr().to_string();
    assert!(TcpBrokerServer::bind(&addr, broker).is_err());
}
