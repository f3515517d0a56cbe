//! Shared fixtures for the integration tests: a hand-built six-packet
//! capture with independently derived expected dataset bytes, and helpers
//! for invoking the compiled binary.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use sessnas::pcap::write_capture;
use sessnas::synth;

pub const BIN: &str = env!("CARGO_BIN_EXE_sessnas");

pub struct CmdResult {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run(args: &[&str]) -> CmdResult {
    let out = Command::new(BIN).args(args).output().expect("binary spawns");
    CmdResult {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

// The golden capture: six packets forming three sessions.
//
//   session A (TCP 10.0.0.1:51000 <-> 10.0.0.2:443)
//     pkt 1  t=1.000100  SYN, no payload          -> filtered out
//     pkt 2  t=1.000200  PSH+ACK "hello"           -> kept (45 L3 bytes)
//     pkt 3  t=1.000300  PSH+ACK "world!" reverse  -> kept (46 L3 bytes)
//   session B (UDP 10.0.0.3:40000 <-> 10.0.0.4:9000)
//     pkt 4  t=2.000000  "data"                    -> kept (32 L3 bytes)
//     pkt 6  t=2.000100  "ok" reverse              -> kept (30 L3 bytes)
//   session C (UDP 10.0.0.3:41000 <-> 10.0.0.5:53)
//     pkt 5  t=2.000050  DNS query                 -> filtered out,
//                                                     session dropped
//
// Two samples survive, ordered by first kept packet time: A then B.

fn frames() -> [Vec<u8>; 6] {
    [
        synth::tcp_frame([10, 0, 0, 1], 51000, [10, 0, 0, 2], 443, 0x02, b""),
        synth::tcp_frame([10, 0, 0, 1], 51000, [10, 0, 0, 2], 443, 0x18, b"hello"),
        synth::tcp_frame([10, 0, 0, 2], 443, [10, 0, 0, 1], 51000, 0x18, b"world!"),
        synth::udp_frame([10, 0, 0, 3], 40000, [10, 0, 0, 4], 9000, b"data"),
        synth::udp_frame([10, 0, 0, 3], 41000, [10, 0, 0, 5], 53, b"query"),
        synth::udp_frame([10, 0, 0, 4], 9000, [10, 0, 0, 3], 40000, b"ok"),
    ]
}

pub fn golden_capture() -> Vec<u8> {
    let [p1, p2, p3, p4, p5, p6] = frames();
    write_capture(&[
        (1, 100, p1),
        (1, 200, p2),
        (1, 300, p3),
        (2, 0, p4),
        (2, 50, p5),
        (2, 100, p6),
    ])
}

/// The session tensor contribution of one Ethernet frame: everything from
/// the IP header on, with the source and destination addresses (bytes
/// 12..20 of the IP header) zeroed.
fn l3_zeroed(frame: &[u8]) -> Vec<u8> {
    let mut v = frame[14..].to_vec();
    v[12..20].fill(0);
    v
}

fn padded_sample(parts: &[&[u8]], label: u8) -> Vec<u8> {
    let mut s: Vec<u8> = parts.concat();
    assert!(s.len() <= 784, "fixture session exceeds the sample length");
    s.resize(784, 0x00);
    s.push(label);
    s
}

/// The exact dataset file `preprocess` must write for the golden capture
/// under a single-class labelmap, built here from first principles.
pub fn golden_expected_dataset() -> Vec<u8> {
    let [_, p2, p3, p4, _, p6] = frames();
    let mut out = Vec::new();
    out.extend_from_slice(b"TSD1");
    out.extend_from_slice(&2u32.to_le_bytes()); // samples
    out.extend_from_slice(&784u32.to_le_bytes()); // sample length
    out.extend_from_slice(&1u32.to_le_bytes()); // classes
    out.extend_from_slice(&padded_sample(&[&l3_zeroed(&p2), &l3_zeroed(&p3)], 0));
    out.extend_from_slice(&padded_sample(&[&l3_zeroed(&p4), &l3_zeroed(&p6)], 0));
    out
}

/// Writes the single-class config the golden fixture is preprocessed with.
pub fn golden_config(dir: &Path) -> PathBuf {
    let path = dir.join("golden.toml");
    std::fs::write(
        &path,
        "[labelmap]\nclasses = [\"web\"]\npatterns = [[\"golden\", 0]]\n",
    )
    .unwrap();
    path
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("fixture paths are valid UTF-8")
}
