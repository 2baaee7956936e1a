//! Client/server messages and their record format.
//!
//! A record is a 4-byte little-endian length `n`, then `n` bytes: one type
//! byte followed by the payload.
//!
//! | type | message            | payload                                   |
//! |------|--------------------|-------------------------------------------|
//! | 1    | `EncryptedBatch`   | purpose byte, matrix `X`, flag, matrix `Y` |
//! | 2    | `EncryptedValLogits` | matrix                                  |
//! | 3    | `StopSignal`       | 0 continue, 1 continue (improved), 2 stop |
//! | 4    | `FinalWeights`     | matrix                                    |
//!
//! A matrix is its shape, padded shape and grid (six `u32`), a tiling byte
//! (0 none, 1 vertical, 2 horizontal) with a `u32` copy count, then the
//! blocks in grid order.

use std::io::{Read, Write};
use std::sync::mpsc::{channel, Receiver, Sender, TryRecvError};

use super::schedule::Decision;
use crate::emulator::{CipherBlock, Context};
use crate::encoding::{EncodedMatrix, Tiling};
use crate::error::{Error, Result};

/// Blocks that can cross the channel.
pub trait WireBlock: Sized {
    fn write(&self, out: &mut Vec<u8>);
    fn read(buf: &mut &[u8], ctx: &Context) -> Result<Self>;
}

impl WireBlock for CipherBlock {
    fn write(&self, out: &mut Vec<u8>) {
        self.write_bytes(out);
    }

    fn read(buf: &mut &[u8], ctx: &Context) -> Result<Self> {
        let b = CipherBlock::read_bytes(buf)?;
        if b.level().is_some_and(|l| l > ctx.max_level) {
            return Err(Error::Protocol("block level above the context maximum".into()));
        }
        let slots = b.slot_count();
        if slots != ctx.slots {
            return Err(Error::ContextMismatch(format!(
                "block has {slots} slots, context {}",
                ctx.slots
            )));
        }
        Ok(b)
    }
}

/// What a batch is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchPurpose {
    Train,
    Validation,
}

#[derive(Debug, Clone)]
pub enum Message<K> {
    EncryptedBatch {
        purpose: BatchPurpose,
        x: EncodedMatrix<K>,
        y: Option<EncodedMatrix<K>>,
    },
    EncryptedValLogits(EncodedMatrix<K>),
    StopSignal(Decision),
    FinalWeights(EncodedMatrix<K>),
}

impl<K> Message<K> {
    pub fn type_byte(&self) -> u8 {
        match self {
            Message::EncryptedBatch { .. } => 1,
            Message::EncryptedValLogits(_) => 2,
            Message::StopSignal(_) => 3,
            Message::FinalWeights(_) => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Message::EncryptedBatch { .. } => "EncryptedBatch",
            Message::EncryptedValLogits(_) => "EncryptedValLogits",
            Message::StopSignal(_) => "StopSignal",
            Message::FinalWeights(_) => "FinalWeights",
        }
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn take<'a>(buf: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if buf.len() < n {
        return Err(Error::Protocol("truncated record".into()));
    }
    let (head, rest) = buf.split_at(n);
    *buf = rest;
    Ok(head)
}

fn get_u32(buf: &mut &[u8]) -> Result<usize> {
    Ok(u32::from_le_bytes(take(buf, 4)?.try_into().expect("4 bytes")) as usize)
}

fn get_u8(buf: &mut &[u8]) -> Result<u8> {
    Ok(take(buf, 1)?[0])
}

fn write_matrix<K: WireBlock>(m: &EncodedMatrix<K>, out: &mut Vec<u8>) {
    for v in [m.shape.0, m.shape.1, m.padded.0, m.padded.1, m.grid.0, m.grid.1] {
        put_u32(out, v);
    }
    let (kind, copies) = match m.tiling {
        Tiling::None => (0, 0),
        Tiling::Vertical { copies } => (1, copies),
        Tiling::Horizontal { copies } => (2, copies),
    };
    out.push(kind);
    put_u32(out, copies);
    for b in &m.blocks {
        b.write(out);
    }
}

fn read_matrix<K: WireBlock>(buf: &mut &[u8], ctx: &Context) -> Result<EncodedMatrix<K>> {
    let mut d = [0usize; 6];
    for v in &mut d {
        *v = get_u32(buf)?;
    }
    let kind = get_u8(buf)?;
    let copies = get_u32(buf)?;
    let tiling = match kind {
        0 => Tiling::None,
        1 => Tiling::Vertical { copies },
        2 => Tiling::Horizontal { copies },
        k => return Err(Error::Protocol(format!("unknown tiling tag {k}"))),
    };
    let (shape, padded, grid) = ((d[0], d[1]), (d[2], d[3]), (d[4], d[5]));
    if padded.0 != grid.0 * ctx.s0 && !matches!(tiling, Tiling::Vertical { .. })
        || padded.1 != grid.1 * ctx.s1 && !matches!(tiling, Tiling::Horizontal { .. })
        || shape.0 > padded.0
        || shape.1 > padded.1
    {
        return Err(Error::Protocol(format!(
            "inconsistent matrix header: shape {shape:?}, padded {padded:?}, grid {grid:?}"
        )));
    }
    let blocks = (0..grid.0 * grid.1)
        .map(|_| K::read(buf, ctx))
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodedMatrix::from_parts(blocks, grid, shape, padded, tiling))
}

/// Serializes `msg` as one framed record.
pub fn encode_message<K: WireBlock>(msg: &Message<K>) -> Vec<u8> {
    let mut body = vec![msg.type_byte()];
    match msg {
        Message::EncryptedBatch { purpose, x, y } => {
            body.push(match purpose {
                BatchPurpose::Train => 0,
                BatchPurpose::Validation => 1,
            });
            write_matrix(x, &mut body);
            body.push(y.is_some() as u8);
            if let Some(y) = y {
                write_matrix(y, &mut body);
            }
        }
        Message::EncryptedValLogits(m) | Message::FinalWeights(m) => write_matrix(m, &mut body),
        Message::StopSignal(d) => body.push(match d {
            Decision::Continue { improved: false } => 0,
            Decision::Continue { improved: true } => 1,
            Decision::Stop => 2,
        }),
    }
    let mut rec = Vec::with_capacity(body.len() + 4);
    put_u32(&mut rec, body.len());
    rec.extend_from_slice(&body);
    rec
}

/// Parses one framed record.
pub fn decode_message<K: WireBlock>(record: &[u8], ctx: &Context) -> Result<Message<K>> {
    let mut buf = record;
    let n = get_u32(&mut buf)?;
    if buf.len() != n || n == 0 {
        return Err(Error::Protocol(format!("record length {n} does not match {} bytes", buf.len())));
    }
    let ty = get_u8(&mut buf)?;
    let msg = match ty {
        1 => {
            let purpose = match get_u8(&mut buf)? {
                0 => BatchPurpose::Train,
                1 => BatchPurpose::Validation,
                p => return Err(Error::Protocol(format!("unknown batch purpose {p}"))),
            };
            let x = read_matrix(&mut buf, ctx)?;
            let y = match get_u8(&mut buf)? {
                0 => None,
                _ => Some(read_matrix(&mut buf, ctx)?),
            };
            Message::EncryptedBatch { purpose, x, y }
        }
        2 => Message::EncryptedValLogits(read_matrix(&mut buf, ctx)?),
        3 => Message::StopSignal(match get_u8(&mut buf)? {
            0 => Decision::Continue { improved: false },
            1 => Decision::Continue { improved: true },
            2 => Decision::Stop,
            d => return Err(Error::Protocol(format!("unknown decision {d}"))),
        }),
        4 => Message::FinalWeights(read_matrix(&mut buf, ctx)?),
        t => return Err(Error::Protocol(format!("unknown message type {t}"))),
    };
    if !buf.is_empty() {
        return Err(Error::Protocol("trailing bytes after message".into()));
    }
    Ok(msg)
}

/// Writes one framed record to a byte stream.
pub fn write_record(w: &mut impl Write, record: &[u8]) -> Result<()> {
    w.write_all(record)?;
    Ok(())
}

/// Reads one framed record from a byte stream.
pub fn read_record(r: &mut impl Read) -> Result<Vec<u8>> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let n = u32::from_le_bytes(len) as usize;
    let mut rec = len.to_vec();
    rec.resize(4 + n, 0);
    r.read_exact(&mut rec[4..])?;
    Ok(rec)
}

/// A bidirectional record transport.
pub trait Channel {
    fn send_record(&mut self, record: Vec<u8>) -> Result<()>;
    fn recv_record(&mut self) -> Result<Vec<u8>>;

    fn send<K: WireBlock>(&mut self, msg: &Message<K>) -> Result<()> {
        self.send_record(encode_message(msg))
    }

    fn recv<K: WireBlock>(&mut self, ctx: &Context) -> Result<Message<K>> {
        decode_message(&self.recv_record()?, ctx)
    }
}

/// One end of an in-process channel. Receiving never blocks: an empty
/// queue is a protocol error, since both roles run on one thread.
#[derive(Debug)]
pub struct Endpoint {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    sent_bytes: usize,
}

impl Endpoint {
    /// Total bytes sent from this end.
    pub fn sent_bytes(&self) -> usize {
        self.sent_bytes
    }
}

/// A connected pair of endpoints.
pub fn duplex() -> (Endpoint, Endpoint) {
    let (a_tx, b_rx) = channel();
    let (b_tx, a_rx) = channel();
    (
        Endpoint { tx: a_tx, rx: a_rx, sent_bytes: 0 },
        Endpoint { tx: b_tx, rx: b_rx, sent_bytes: 0 },
    )
}

impl Channel for Endpoint {
    fn send_record(&mut self, record: Vec<u8>) -> Result<()> {
        self.sent_bytes += record.len();
        self.tx
            .send(record)
            .map_err(|_| Error::Protocol("peer hung up".into()))
    }

    fn recv_record(&mut self) -> Result<Vec<u8>> {
        self.rx.try_recv().map_err(|e| match e {
            TryRecvError::Empty => Error::Protocol("no message waiting".into()),
            TryRecvError::Disconnected => Error::Protocol("peer hung up".into()),
        })
    }
}
