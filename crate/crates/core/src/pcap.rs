//! Classic pcap decoding.
//!
//! Parses the 24-byte global header (honoring both magic byte orders), walks
//! the record stream, and decodes Ethernet / IPv4 / IPv6 / TCP / UDP headers
//! far enough to recover the five-tuple and the transport payload boundary.
//! Only classic pcap with linktype Ethernet is supported; pcapng and other
//! link types are rejected up front.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use thiserror::Error;

/// Native-order pcap magic.
pub const PCAP_MAGIC: u32 = 0xa1b2_c3d4;
/// Byte-swapped pcap magic.
pub const PCAP_MAGIC_SWAPPED: u32 = 0xd4c3_b2a1;
/// pcapng section header magic, recognized only to produce a clearer error.
const PCAPNG_MAGIC: u32 = 0x0a0d_0d0a;

pub const GLOBAL_HEADER_LEN: usize = 24;
pub const RECORD_HEADER_LEN: usize = 16;
pub const LINKTYPE_ETHERNET: u32 = 1;

const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_VLAN: u16 = 0x8100;
const ETHERTYPE_IPV6: u16 = 0x86dd;
const IPPROTO_TCP: u8 = 6;
const IPPROTO_UDP: u8 = 17;

#[derive(Debug, Error)]
pub enum PcapError {
    #[error("not a classic pcap file: {0}")]
    BadMagic(String),
    #[error("truncated capture: {0}")]
    Truncated(String),
    #[error("unsupported link type {0} (only Ethernet, linktype 1)")]
    UnsupportedLinkType(u32),
    #[error("malformed packet header: {0}")]
    MalformedHeader(String),
}

/// Decoded pcap global header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaptureHeader {
    pub magic: u32,
    pub version_major: u16,
    pub version_minor: u16,
    pub snaplen: u32,
    pub linktype: u32,
    /// True when the file's multi-byte fields are big-endian.
    pub big_endian: bool,
}

/// One capture record: its header fields plus the captured bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Record<'a> {
    pub ts_sec: u32,
    pub ts_usec: u32,
    pub orig_len: u32,
    pub data: &'a [u8],
}

/// Transport protocol of a classifiable packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Transport {
    Tcp,
    Udp,
}

/// A packet decoded down to its transport payload boundary.
///
/// `l3_offset`, `l4_payload_offset` and `total_len` are byte indices into the
/// record the packet was decoded from; `total_len` is the end of the packet
/// per the IP length field, clamped to the captured length, so trailing
/// Ethernet padding is excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPacket {
    pub ts_sec: u32,
    pub ts_usec: u32,
    pub src_ip: IpAddr,
    pub dst_ip: IpAddr,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: Transport,
    /// TCP flag byte; 0 for UDP.
    pub tcp_flags: u8,
    pub l3_offset: usize,
    pub l4_payload_offset: usize,
    pub total_len: usize,
}

impl ParsedPacket {
    pub fn payload_len(&self) -> usize {
        self.total_len - self.l4_payload_offset
    }
}

/// One endpoint of a session, ordered by IP bytes then port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub ip: IpAddr,
    pub port: u16,
}

/// Direction-invariant five-tuple: both packet directions map to the same key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SessionKey {
    pub lo: Endpoint,
    pub hi: Endpoint,
    pub protocol: Transport,
}

/// Canonicalizes a packet's five-tuple: endpoints are sorted by
/// (ip bytes, port), so a packet and its reverse yield the same key.
pub fn canonical_session_key(p: &ParsedPacket) -> SessionKey {
    let a = Endpoint { ip: p.src_ip, port: p.src_port };
    let b = Endpoint { ip: p.dst_ip, port: p.dst_port };
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    SessionKey { lo, hi, protocol: p.protocol }
}

fn read_u16(bytes: &[u8], off: usize, be: bool) -> u16 {
    let raw = [bytes[off], bytes[off + 1]];
    if be { u16::from_be_bytes(raw) } else { u16::from_le_bytes(raw) }
}

fn read_u32(bytes: &[u8], off: usize, be: bool) -> u32 {
    let raw = [bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]];
    if be { u32::from_be_bytes(raw) } else { u32::from_le_bytes(raw) }
}

fn be16(bytes: &[u8], off: usize) -> u16 {
    u16::from_be_bytes([bytes[off], bytes[off + 1]])
}

/// Parses a classic pcap file into its global header and record list.
///
/// Records are returned in file order, borrowing from `raw`. A record whose
/// declared captured length extends past the end of the file is an error
/// rather than being silently dropped.
pub fn read_capture(raw: &[u8]) -> Result<(CaptureHeader, Vec<Record<'_>>), PcapError> {
    if raw.len() < 4 {
        return Err(PcapError::Truncated(format!(
            "file is {} bytes, shorter than the pcap magic",
            raw.len()
        )));
    }
    let magic_le = u32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]);
    let big_endian = match magic_le {
        PCAP_MAGIC => false,
        PCAP_MAGIC_SWAPPED => true,
        PCAPNG_MAGIC => {
            return Err(PcapError::BadMagic(
                "pcapng input detected; only classic pcap is supported".into(),
            ))
        }
        other => {
            return Err(PcapError::BadMagic(format!("unrecognized magic 0x{other:08x}")))
        }
    };
    if raw.len() < GLOBAL_HEADER_LEN {
        return Err(PcapError::Truncated(format!(
            "file is {} bytes, shorter than the {GLOBAL_HEADER_LEN}-byte global header",
            raw.len()
        )));
    }
    let header = CaptureHeader {
        magic: PCAP_MAGIC,
        version_major: read_u16(raw, 4, big_endian),
        version_minor: read_u16(raw, 6, big_endian),
        // thiszone and sigfigs are parsed positionally and ignored
        snaplen: read_u32(raw, 16, big_endian),
        linktype: read_u32(raw, 20, big_endian),
        big_endian,
    };
    if header.linktype != LINKTYPE_ETHERNET {
        return Err(PcapError::UnsupportedLinkType(header.linktype));
    }

    let mut records = Vec::new();
    let mut off = GLOBAL_HEADER_LEN;
    while off < raw.len() {
        if off + RECORD_HEADER_LEN > raw.len() {
            return Err(PcapError::Truncated(format!(
                "record header at offset {off} extends past end of file"
            )));
        }
        let ts_sec = read_u32(raw, off, big_endian);
        let ts_usec = read_u32(raw, off + 4, big_endian);
        let incl_len = read_u32(raw, off + 8, big_endian) as usize;
        let orig_len = read_u32(raw, off + 12, big_endian);
        let data_start = off + RECORD_HEADER_LEN;
        if data_start + incl_len > raw.len() {
            return Err(PcapError::Truncated(format!(
                "record at offset {off} declares {incl_len} captured bytes but only {} remain",
                raw.len() - data_start
            )));
        }
        records.push(Record {
            ts_sec,
            ts_usec,
            orig_len,
            data: &raw[data_start..data_start + incl_len],
        });
        off = data_start + incl_len;
    }
    Ok((header, records))
}

/// Serializes records as a little-endian classic pcap file (linktype Ethernet).
pub fn write_capture(records: &[(u32, u32, Vec<u8>)]) -> Vec<u8> {
    let mut out = Vec::with_capacity(
        GLOBAL_HEADER_LEN + records.iter().map(|r| RECORD_HEADER_LEN + r.2.len()).sum::<usize>(),
    );
    out.extend_from_slice(&PCAP_MAGIC.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes()); // version 2.4
    out.extend_from_slice(&4u16.to_le_bytes());
    out.extend_from_slice(&0i32.to_le_bytes()); // thiszone
    out.extend_from_slice(&0u32.to_le_bytes()); // sigfigs
    out.extend_from_slice(&65535u32.to_le_bytes()); // snaplen
    out.extend_from_slice(&LINKTYPE_ETHERNET.to_le_bytes());
    for (ts_sec, ts_usec, data) in records {
        out.extend_from_slice(&ts_sec.to_le_bytes());
        out.extend_from_slice(&ts_usec.to_le_bytes());
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
    }
    out
}

/// Decodes one Ethernet record down to its transport payload boundary.
///
/// Returns `Ok(None)` for anything that is not IPv4/IPv6 over Ethernet
/// carrying TCP or UDP (ARP, non-initial fragments, IPv6 extension headers,
/// runt frames). Structurally inconsistent headers are errors.
pub fn decode_packet(record: &Record<'_>) -> Result<Option<ParsedPacket>, PcapError> {
    let d = record.data;
    if d.len() < 14 {
        return Ok(None);
    }
    let mut ethertype = be16(d, 12);
    let mut l3 = 14usize;
    if ethertype == ETHERTYPE_VLAN {
        // one 802.1Q tag: 4 extra bytes, real ethertype follows
        if d.len() < 18 {
            return Ok(None);
        }
        ethertype = be16(d, 16);
        l3 = 18;
    }
    match ethertype {
        ETHERTYPE_IPV4 => decode_ipv4(record, l3),
        ETHERTYPE_IPV6 => decode_ipv6(record, l3),
        _ => Ok(None),
    }
}

fn decode_ipv4(record: &Record<'_>, l3: usize) -> Result<Option<ParsedPacket>, PcapError> {
    let d = record.data;
    if l3 + 20 > d.len() {
        return Err(PcapError::MalformedHeader(
            "record too short for an IPv4 header".into(),
        ));
    }
    if d[l3] >> 4 != 4 {
        return Ok(None);
    }
    let ihl = (d[l3] & 0x0f) as usize;
    if ihl < 5 {
        return Err(PcapError::MalformedHeader(format!("IPv4 IHL {ihl} < 5")));
    }
    let header_len = ihl * 4;
    let l4 = l3 + header_len;
    if l4 > d.len() {
        return Err(PcapError::MalformedHeader(format!(
            "IPv4 header of {header_len} bytes exceeds record"
        )));
    }
    let total_field = be16(d, l3 + 2) as usize;
    if total_field < header_len {
        return Err(PcapError::MalformedHeader(format!(
            "IPv4 total length {total_field} shorter than its header {header_len}"
        )));
    }
    let total_len = (l3 + total_field).min(d.len());
    // non-initial fragments carry no transport header
    let frag_offset = be16(d, l3 + 6) & 0x1fff;
    if frag_offset != 0 {
        return Ok(None);
    }
    let src_ip = IpAddr::V4(Ipv4Addr::new(d[l3 + 12], d[l3 + 13], d[l3 + 14], d[l3 + 15]));
    let dst_ip = IpAddr::V4(Ipv4Addr::new(d[l3 + 16], d[l3 + 17], d[l3 + 18], d[l3 + 19]));
    decode_transport(record, d[l3 + 9], l3, l4, total_len, src_ip, dst_ip)
}

fn decode_ipv6(record: &Record<'_>, l3: usize) -> Result<Option<ParsedPacket>, PcapError> {
    let d = record.data;
    if l3 + 40 > d.len() {
        return Err(PcapError::MalformedHeader(
            "record too short for an IPv6 header".into(),
        ));
    }
    if d[l3] >> 4 != 6 {
        return Ok(None);
    }
    let payload_len = be16(d, l3 + 4) as usize;
    let next_header = d[l3 + 6];
    let total_len = (l3 + 40 + payload_len).min(d.len());
    let mut src = [0u8; 16];
    let mut dst = [0u8; 16];
    src.copy_from_slice(&d[l3 + 8..l3 + 24]);
    dst.copy_from_slice(&d[l3 + 24..l3 + 40]);
    // extension headers are not walked; anything but TCP/UDP is skipped
    decode_transport(
        record,
        next_header,
        l3,
        l3 + 40,
        total_len,
        IpAddr::V6(Ipv6Addr::from(src)),
        IpAddr::V6(Ipv6Addr::from(dst)),
    )
}

#[allow(clippy::too_many_arguments)]
fn decode_transport(
    record: &Record<'_>,
    proto: u8,
    l3: usize,
    l4: usize,
    total_len: usize,
    src_ip: IpAddr,
    dst_ip: IpAddr,
) -> Result<Option<ParsedPacket>, PcapError> {
    let d = record.data;
    let (protocol, l4_payload_offset, tcp_flags) = match proto {
        IPPROTO_TCP => {
            if l4 + 20 > total_len {
                return Err(PcapError::MalformedHeader(
                    "packet too short for a TCP header".into(),
                ));
            }
            let data_offset = (d[l4 + 12] >> 4) as usize;
            if data_offset < 5 {
                return Err(PcapError::MalformedHeader(format!(
                    "TCP data offset {data_offset} < 5"
                )));
            }
            let payload_start = l4 + data_offset * 4;
            if payload_start > total_len {
                return Err(PcapError::MalformedHeader(format!(
                    "TCP header of {} bytes exceeds packet",
                    data_offset * 4
                )));
            }
            (Transport::Tcp, payload_start, d[l4 + 13])
        }
        IPPROTO_UDP => {
            if l4 + 8 > total_len {
                return Err(PcapError::MalformedHeader(
                    "packet too short for a UDP header".into(),
                ));
            }
            (Transport::Udp, l4 + 8, 0u8)
        }
        _ => return Ok(None),
    };
    Ok(Some(ParsedPacket {
        ts_sec: record.ts_sec,
        ts_usec: record.ts_usec,
        src_ip,
        dst_ip,
        src_port: be16(d, l4),
        dst_port: be16(d, l4 + 2),
        protocol,
        tcp_flags,
        l3_offset: l3,
        l4_payload_offset,
        total_len,
    }))
}
