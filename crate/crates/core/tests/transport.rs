use std::net::TcpStream;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use isafe::fuzzy::MemoryErrorLog;
use isafe::track::{FeatureRecord, ObjectFeatures};
use isafe::transport::{
    encode_record, latency_csv, loopback_stream, read_frame, write_frame, Delivered, EdgeSender,
    FogServer, FrameKind, Handler, Header, LatencyStats, Mode, Session, TransportConfig,
    TransportError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const T0: f64 = 1_704_067_200.0;

fn records(n: usize, objects: std::ops::RangeInclusive<usize>, seed: u64) -> Vec<FeatureRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let k = rng.gen_range(objects.clone());
            FeatureRecord {
                frame_index: i as u64,
                timestamp: T0 + i as f64 * 0.2,
                people_count: k as u32,
                objects: (0..k)
                    .map(|j| ObjectFeatures {
                        track_id: j as u64 + 1,
                        dwell_time: rng.gen_range(0.0..120.0),
                        speed_changes: rng.gen_range(0..20),
                        direction_changes: rng.gen_range(0..20),
                    })
                    .collect(),
            }
        })
        .collect()
}

fn collector() -> (Handler, Arc<Mutex<Vec<Delivered>>>) {
    let got: Arc<Mutex<Vec<Delivered>>> = Arc::default();
    let sink = got.clone();
    (Arc::new(move |d| sink.lock().unwrap().push(d)), got)
}

#[test]
fn all_modes_deliver_identical_records() {
    let sent = records(1000, 0..=10, 1);
    for mode in Mode::ALL {
        let run = loopback_stream(&TransportConfig::demo(mode), "cam-1", &sent, None).unwrap();
        assert_eq!(run.received.len(), 1000, "{mode}");
        assert!(run
            .received
            .iter()
            .enumerate()
            .all(|(i, (seq, _))| *seq == i as u32));
        let got: Vec<_> = run.received.into_iter().map(|(_, r)| r).collect();
        assert_eq!(got, sent, "{mode}");
        assert_eq!(
            run.setup.round_trips,
            u32::from(mode == Mode::Handshake),
            "{mode}"
        );
        assert_eq!(run.latency.len(), 1000);
        assert_eq!(latency_csv(&run.latency).lines().count(), 1001);
        assert_eq!(run.edge.dropped + run.edge.retransmitted, 0);
    }
}

#[test]
fn larger_records_take_more_bytes() {
    let small = loopback_stream(
        &TransportConfig::plaintext(),
        "c",
        &records(50, 0..=2, 2),
        None,
    )
    .unwrap();
    let large = loopback_stream(
        &TransportConfig::plaintext(),
        "c",
        &records(50, 6..=10, 2),
        None,
    )
    .unwrap();
    let max_small = small.latency.iter().map(|s| s.bytes).max().unwrap();
    let min_large = large.latency.iter().map(|s| s.bytes).min().unwrap();
    assert!(min_large > max_small);
}

#[test]
fn empty_stream_has_empty_stats() {
    let run = loopback_stream(&TransportConfig::plaintext(), "c", &[], None).unwrap();
    assert!(run.received.is_empty());
    assert!(LatencyStats::from_samples(&run.latency).is_empty());
}

#[test]
fn tampered_frames_are_rejected() {
    for mode in [Mode::Symmetric, Mode::Handshake] {
        let config = TransportConfig::demo(mode);
        let (handler, got) = collector();
        let server = FogServer::bind(
            "127.0.0.1:0",
            config.clone(),
            handler,
            Arc::new(MemoryErrorLog::new()),
        )
        .unwrap();
        let mut stream = TcpStream::connect(server.local_addr()).unwrap();
        let session = Session::client(&mut stream, &config).unwrap();

        let body = encode_record("cam", &records(1, 2..=2, 3)[0]).unwrap();
        let h = Header::new(mode, FrameKind::Data, 0);
        write_frame(&mut stream, &h, &session.seal(&h, &body).unwrap()).unwrap();
        let (ack, _) = read_frame(&mut stream).unwrap().unwrap();
        assert_eq!((ack.kind, ack.sequence), (FrameKind::Ack, 0));

        let h = Header::new(mode, FrameKind::Data, 1);
        let mut sealed = session.seal(&h, &body).unwrap();
        sealed[5] ^= 0x80;
        write_frame(&mut stream, &h, &sealed).unwrap();
        let (refusal, reason) = read_frame(&mut stream).unwrap().unwrap();
        assert_eq!(refusal.kind, FrameKind::Refuse, "{mode}");
        assert!(String::from_utf8_lossy(&reason).contains("authentication"));
        assert!(read_frame(&mut stream).map(|f| f.is_none()).unwrap_or(true));

        server.shutdown();
        assert_eq!(got.lock().unwrap().len(), 1, "{mode}");
    }
}

#[test]
fn mismatched_keys_are_refused() {
    let server_cfg = TransportConfig::symmetric([1; 32]);
    let (handler, got) = collector();
    let log = Arc::new(MemoryErrorLog::new());
    let server = FogServer::bind("127.0.0.1:0", server_cfg, handler, log.clone()).unwrap();
    let mut edge = EdgeSender::connect(
        server.local_addr(),
        "cam",
        TransportConfig {
            reconnect_interval_ms: 60_000,
            ..TransportConfig::symmetric([2; 32])
        },
        log.clone(),
    )
    .unwrap();
    edge.send(&records(1, 1..=1, 4)[0]).unwrap();
    let err = edge.finish(Duration::from_millis(500)).unwrap_err();
    assert!(
        matches!(&err, TransportError::Refused(r) if r.contains("authentication")),
        "{err}"
    );
    assert_eq!(server.rejected(), 1);

    let hs = FogServer::bind(
        "127.0.0.1:0",
        TransportConfig::handshake("right"),
        Arc::new(|_| {}),
        Arc::new(MemoryErrorLog::new()),
    )
    .unwrap();
    let err = EdgeSender::connect(
        hs.local_addr(),
        "cam",
        TransportConfig::handshake("wrong"),
        log.clone(),
    )
    .err()
    .unwrap();
    assert!(
        matches!(&err, TransportError::Refused(r) if r.contains("credential")),
        "{err}"
    );

    let err = EdgeSender::connect(hs.local_addr(), "cam", TransportConfig::plaintext(), log)
        .and_then(|mut e| {
            e.send(&FeatureRecord::empty(0, T0))?;
            e.finish(Duration::from_millis(500))
        })
        .unwrap_err();
    assert!(
        matches!(err, TransportError::Refused(_) | TransportError::Timeout(_)),
        "{err}"
    );

    server.shutdown();
    hs.shutdown();
    assert!(got.lock().unwrap().is_empty());
}

#[test]
fn reconnect_resumes_and_logs_the_gap() {
    let config = TransportConfig {
        reconnect_interval_ms: 60_000,
        ..TransportConfig::demo(Mode::Symmetric)
    };
    let (handler, got) = collector();
    let log = Arc::new(MemoryErrorLog::new());
    let server = FogServer::bind("127.0.0.1:0", config.clone(), handler, log.clone()).unwrap();
    let mut edge = EdgeSender::connect(server.local_addr(), "cam", config, log.clone()).unwrap();

    // 150 records at 5 fps = 30 s of record time
    let all = records(150, 1..=3, 5);
    for r in &all[..50] {
        edge.send(r).unwrap();
    }
    while got.lock().unwrap().len() < 50 {
        thread::sleep(Duration::from_millis(5));
    }
    server.disconnect_all();
    thread::sleep(Duration::from_millis(100));
    for r in &all[50..] {
        edge.send(r).unwrap();
    }
    assert!(!edge.is_connected());
    // only the newest 10 s survive: 51 records at 0.2 s spacing
    assert_eq!(edge.buffered(), 51);
    edge.reconnect().unwrap();
    let stats = edge.finish(Duration::from_secs(10)).unwrap();
    assert_eq!(stats.dropped, 49);
    assert_eq!(stats.reconnects, 1);

    let fog = server.stream_stats("cam").unwrap();
    server.shutdown();
    assert_eq!(
        (fog.gaps, fog.missing, fog.last_sequence),
        (1, 49, Some(149))
    );
    let seqs: Vec<u32> = got.lock().unwrap().iter().map(|d| d.sequence).collect();
    assert_eq!(seqs.len(), 101);
    assert!(seqs.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(got.lock().unwrap()[100].record, all[149]);
    let lines = log.lines();
    assert!(lines
        .iter()
        .any(|l| l.contains("sequence gap: expected 50, got 99")));
    assert_eq!(
        lines.iter().filter(|l| l.contains("buffer full")).count(),
        49
    );
}

#[test]
fn duplicate_sequences_are_rejected() {
    let config = TransportConfig::plaintext();
    let (handler, got) = collector();
    let server = FogServer::bind(
        "127.0.0.1:0",
        config,
        handler,
        Arc::new(MemoryErrorLog::new()),
    )
    .unwrap();
    let mut stream = TcpStream::connect(server.local_addr()).unwrap();
    let body = encode_record("cam", &FeatureRecord::empty(0, T0)).unwrap();
    for seq in [0, 1, 1, 0, 2] {
        write_frame(
            &mut stream,
            &Header::new(Mode::Plaintext, FrameKind::Data, seq),
            &body,
        )
        .unwrap();
    }
    let acks: Vec<u32> = (0..5)
        .map(|_| read_frame(&mut stream).unwrap().unwrap().0.sequence)
        .collect();
    assert_eq!(acks, [0, 1, 1, 1, 2]);
    drop(stream);
    let stats = server.stream_stats("cam").unwrap();
    server.shutdown();
    assert_eq!((stats.accepted, stats.duplicates), (3, 2));
    let seqs: Vec<u32> = got.lock().unwrap().iter().map(|d| d.sequence).collect();
    assert_eq!(seqs, [0, 1, 2]);
}

#[test]
fn sender_blocks_when_window_is_full() {
    let config = TransportConfig {
        window: 4,
        queue_capacity: 1,
        ..TransportConfig::plaintext()
    };
    let gate = Arc::new(Mutex::new(()));
    let held = gate.lock().unwrap();
    let handled = Arc::new(AtomicUsize::new(0));
    let handler: Handler = {
        let (gate, handled) = (gate.clone(), handled.clone());
        Arc::new(move |_| {
            let _g = gate.lock().unwrap();
            handled.fetch_add(1, Ordering::SeqCst);
        })
    };
    let server = FogServer::bind(
        "127.0.0.1:0",
        config.clone(),
        handler,
        Arc::new(MemoryErrorLog::new()),
    )
    .unwrap();
    let addr = server.local_addr();
    let progress = Arc::new(AtomicUsize::new(0));
    let sender = {
        let progress = progress.clone();
        thread::spawn(move || {
            let mut edge =
                EdgeSender::connect(addr, "cam", config, Arc::new(MemoryErrorLog::new())).unwrap();
            for r in records(100, 1..=1, 6) {
                edge.send(&r).unwrap();
                progress.fetch_add(1, Ordering::SeqCst);
            }
            edge.finish(Duration::from_secs(10)).unwrap()
        })
    };
    thread::sleep(Duration::from_millis(300));
    // one in the handler, one queued, one blocked on the queue, four in flight
    let stalled = progress.load(Ordering::SeqCst);
    assert!(
        stalled <= 8,
        "sender got {stalled} records out with the fog stalled"
    );
    drop(held);
    sender.join().unwrap();
    server.shutdown();
    assert_eq!(handled.load(Ordering::SeqCst), 100);
}
