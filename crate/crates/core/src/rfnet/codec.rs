//! Frame integrity layers: a modular-sum checksum for plug monitors and
//! Manchester line coding for clamp transmitters.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum IntegrityError {
    #[error("frame too short")]
    Truncated,
    #[error("checksum mismatch")]
    Checksum,
    #[error("invalid Manchester symbol pair")]
    Manchester,
}

pub fn checksum(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0u8, |acc, &b| acc.wrapping_add(b))
}

/// Payload followed by its checksum byte. `None` for an empty payload.
pub fn encode_iam(payload: &[u8]) -> Option<Vec<u8>> {
    if payload.is_empty() {
        return None;
    }
    let mut frame = payload.to_vec();
    frame.push(checksum(payload));
    Some(frame)
}

pub fn decode_iam(frame: &[u8]) -> Result<&[u8], IntegrityError> {
    match frame {
        [] | [_] => Err(IntegrityError::Truncated),
        [payload @ .., sum] if checksum(payload) == *sum => Ok(payload),
        _ => Err(IntegrityError::Checksum),
    }
}

/// Bit `1` becomes symbols `1 0`, bit `0` becomes `0 1`.
pub fn manchester_encode_bits(bits: &[bool]) -> Vec<bool> {
    bits.iter().flat_map(|&b| [b, !b]).collect()
}

pub fn manchester_decode_bits(symbols: &[bool]) -> Result<Vec<bool>, IntegrityError> {
    if !symbols.len().is_multiple_of(2) {
        return Err(IntegrityError::Truncated);
    }
    symbols
        .chunks_exact(2)
        .map(|pair| match pair {
            [a, b] if a != b => Ok(*a),
            _ => Err(IntegrityError::Manchester),
        })
        .collect()
}

/// Each byte, most significant bit first, becomes two symbol bytes.
pub fn encode_cctx(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() * 2);
    for &byte in payload {
        let mut word = 0u16;
        for k in (0..8).rev() {
            let bit = (byte >> k) & 1;
            word = (word << 2) | if bit == 1 { 0b10 } else { 0b01 };
        }
        out.extend_from_slice(&word.to_be_bytes());
    }
    out
}

pub fn decode_cctx(symbols: &[u8]) -> Result<Vec<u8>, IntegrityError> {
    if !symbols.len().is_multiple_of(2) {
        return Err(IntegrityError::Truncated);
    }
    symbols
        .chunks_exact(2)
        .map(|w| {
            let word = u16::from_be_bytes([w[0], w[1]]);
            let mut byte = 0u8;
            for k in (0..8).rev() {
                byte = (byte << 1)
                    | match (word >> (2 * k)) & 0b11 {
                        0b10 => 1,
                        0b01 => 0,
                        _ => return Err(IntegrityError::Manchester),
                    };
            }
            Ok(byte)
        })
        .collect()
}

/// Poll sent by the base station: target id and a command byte.
pub fn poll_frame(id: u32, command: u8) -> Vec<u8> {
    let mut p = id.to_be_bytes().to_vec();
    p.push(command);
    encode_iam(&p).expect("non-empty")
}

pub fn parse_poll(frame: &[u8]) -> Result<(u32, u8), IntegrityError> {
    match decode_iam(frame)? {
        [a, b, c, d, cmd] => Ok((u32::from_be_bytes([*a, *b, *c, *d]), *cmd)),
        _ => Err(IntegrityError::Truncated),
    }
}

/// Reply: id, power in watts and switch state.
pub fn reply_frame(id: u32, watts: u16, switch_on: bool) -> Vec<u8> {
    let mut p = id.to_be_bytes().to_vec();
    p.extend_from_slice(&watts.to_be_bytes());
    p.push(u8::from(switch_on));
    encode_iam(&p).expect("non-empty")
}

pub fn parse_reply(frame: &[u8]) -> Result<(u32, u16, bool), IntegrityError> {
    match decode_iam(frame)? {
        [a, b, c, d, hi, lo, sw] => Ok((
            u32::from_be_bytes([*a, *b, *c, *d]),
            u16::from_be_bytes([*hi, *lo]),
            *sw != 0,
        )),
        _ => Err(IntegrityError::Truncated),
    }
}

/// Clamp broadcast: 16-bit transmitter id and 16-bit reading, line coded.
pub fn cctx_frame(id: u16, reading: u16) -> Vec<u8> {
    let mut p = id.to_be_bytes().to_vec();
    p.extend_from_slice(&reading.to_be_bytes());
    encode_cctx(&p)
}

pub fn parse_cctx(frame: &[u8]) -> Result<(u16, u16), IntegrityError> {
    match decode_cctx(frame)?.as_slice() {
        [a, b, c, d] => Ok((u16::from_be_bytes([*a, *b]), u16::from_be_bytes([*c, *d]))),
        _ => Err(IntegrityError::Truncated),
    }
}

/// Flip bit `index` of a frame, most significant bit of byte 0 first.
pub fn flip_bit(frame: &mut [u8], index: usize) {
    frame[index / 8] ^= 0x80 >> (index % 8);
}
