//! Deterministic CBOR encoder/decoder for claims and structured assertions.
//!
//! Encoding follows the RFC 8949 core deterministic profile: shortest-form
//! integer heads, definite lengths only, and map keys sorted bytewise by
//! their encoded form. Claims are signed over these bytes, so two encodes
//! of the same value must always be byte-identical.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// A decoded CBOR data item. Floats and indefinite-length items are not
/// part of the claim subset; the decoder rejects them rather than guessing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Int(i128),
    Bytes(Vec<u8>),
    Text(String),
    Array(Vec<Value>),
    Map(Vec<(Value, Value)>),
    Bool(bool),
    Null,
    Tag(u64, Box<Value>),
}

impl Value {
    pub fn text(s: impl Into<String>) -> Value {
        Value::Text(s.into())
    }

    pub fn map(entries: Vec<(&str, Value)>) -> Value {
        Value::Map(
            entries
                .into_iter()
                .map(|(k, v)| (Value::text(k), v))
                .collect(),
        )
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            Value::Bytes(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i128> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&[Value]> {
        match self {
            Value::Array(a) => Some(a),
            _ => None,
        }
    }

    /// Looks up a text key in a map value.
    pub fn get(&self, key: &str) -> Option<&Value> {
        match self {
            Value::Map(entries) => entries
                .iter()
                .find(|(k, _)| k.as_text() == Some(key))
                .map(|(_, v)| v),
            _ => None,
        }
    }
}

const MAJOR_UNSIGNED: u8 = 0;
const MAJOR_NEGATIVE: u8 = 1;
const MAJOR_BYTES: u8 = 2;
const MAJOR_TEXT: u8 = 3;
const MAJOR_ARRAY: u8 = 4;
const MAJOR_MAP: u8 = 5;
const MAJOR_TAG: u8 = 6;
const MAJOR_SIMPLE: u8 = 7;

// Decode recursion limit; claims nest a handful of levels at most.
const MAX_DEPTH: usize = 64;

/// Encodes a value with the deterministic profile.
pub fn encode(value: &Value) -> Vec<u8> {
    let mut out = Vec::new();
    encode_into(value, &mut out);
    out
}

fn encode_into(value: &Value, out: &mut Vec<u8>) {
    match value {
        Value::Int(n) => {
            if *n >= 0 {
                encode_head(MAJOR_UNSIGNED, *n as u64, out);
            } else {
                // -1 - n fits in u64 for the full CBOR negative range
                encode_head(MAJOR_NEGATIVE, (-1 - n) as u64, out);
            }
        }
        Value::Bytes(b) => {
            encode_head(MAJOR_BYTES, b.len() as u64, out);
            out.extend_from_slice(b);
        }
        Value::Text(s) => {
            encode_head(MAJOR_TEXT, s.len() as u64, out);
            out.extend_from_slice(s.as_bytes());
        }
        Value::Array(items) => {
            encode_head(MAJOR_ARRAY, items.len() as u64, out);
            for item in items {
                encode_into(item, out);
            }
        }
        Value::Map(entries) => {
            // Canonical key order: bytewise comparison of encoded keys.
            // Duplicate keys collapse to the last occurrence.
            let mut sorted: BTreeMap<Vec<u8>, &Value> = BTreeMap::new();
            for (k, v) in entries {
                sorted.insert(encode(k), v);
            }
            encode_head(MAJOR_MAP, sorted.len() as u64, out);
            for (key_bytes, v) in sorted {
                out.extend_from_slice(&key_bytes);
                encode_into(v, out);
            }
        }
        Value::Bool(b) => out.push(if *b { 0xf5 } else { 0xf4 }),
        Value::Null => out.push(0xf6),
        Value::Tag(tag, inner) => {
            encode_head(MAJOR_TAG, *tag, out);
            encode_into(inner, out);
        }
    }
}

fn encode_head(major: u8, arg: u64, out: &mut Vec<u8>) {
    let m = major << 5;
    if arg < 24 {
        out.push(m | arg as u8);
    } else if arg <= u8::MAX as u64 {
        out.push(m | 24);
        out.push(arg as u8);
    } else if arg <= u16::MAX as u64 {
        out.push(m | 25);
        out.extend_from_slice(&(arg as u16).to_be_bytes());
    } else if arg <= u32::MAX as u64 {
        out.push(m | 26);
        out.extend_from_slice(&(arg as u32).to_be_bytes());
    } else {
        out.push(m | 27);
        out.extend_from_slice(&arg.to_be_bytes());
    }
}

/// Decodes a single data item, requiring the input to be fully consumed.
pub fn decode(bytes: &[u8]) -> Result<Value> {
    let mut d = Decoder { bytes, pos: 0 };
    let value = d.item(0)?;
    if d.pos != bytes.len() {
        return Err(Error::Cbor(format!(
            "{} trailing bytes after data item",
            bytes.len() - d.pos
        )));
    }
    Ok(value)
}

struct Decoder<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn byte(&mut self) -> Result<u8> {
        let b = *self
            .bytes
            .get(self.pos)
            .ok_or_else(|| Error::Cbor("unexpected end of input".into()))?;
        self.pos += 1;
        Ok(b)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Cbor("length runs past end of input".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn head_arg(&mut self, info: u8) -> Result<u64> {
        match info {
            0..=23 => Ok(info as u64),
            24 => Ok(self.byte()? as u64),
            25 => Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()) as u64),
            26 => Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()) as u64),
            27 => Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap())),
            31 => Err(Error::Cbor("indefinite lengths not supported".into())),
            _ => Err(Error::Cbor(format!("reserved additional info {info}"))),
        }
    }

    fn item(&mut self, depth: usize) -> Result<Value> {
        if depth > MAX_DEPTH {
            return Err(Error::Cbor("nesting too deep".into()));
        }
        let initial = self.byte()?;
        let major = initial >> 5;
        let info = initial & 0x1f;
        match major {
            MAJOR_UNSIGNED => Ok(Value::Int(self.head_arg(info)? as i128)),
            MAJOR_NEGATIVE => Ok(Value::Int(-1 - self.head_arg(info)? as i128)),
            MAJOR_BYTES => {
                let len = self.head_arg(info)?;
                Ok(Value::Bytes(self.take(usize_len(len)?)?.to_vec()))
            }
            MAJOR_TEXT => {
                let len = self.head_arg(info)?;
                let raw = self.take(usize_len(len)?)?;
                let s = std::str::from_utf8(raw)
                    .map_err(|_| Error::Cbor("text string is not valid UTF-8".into()))?;
                Ok(Value::Text(s.to_string()))
            }
            MAJOR_ARRAY => {
                let len = usize_len(self.head_arg(info)?)?;
                // Each element consumes at least one byte.
                if len > self.bytes.len() - self.pos {
                    return Err(Error::Cbor("array length exceeds input".into()));
                }
                let mut items = Vec::with_capacity(len.min(1024));
                for _ in 0..len {
                    items.push(self.item(depth + 1)?);
                }
                Ok(Value::Array(items))
            }
            MAJOR_MAP => {
                let len = usize_len(self.head_arg(info)?)?;
                if len > self.bytes.len() - self.pos {
                    return Err(Error::Cbor("map length exceeds input".into()));
                }
                let mut entries = Vec::with_capacity(len.min(1024));
                for _ in 0..len {
                    let k = self.item(depth + 1)?;
                    let v = self.item(depth + 1)?;
                    entries.push((k, v));
                }
                Ok(Value::Map(entries))
            }
            MAJOR_TAG => {
                let tag = self.head_arg(info)?;
                Ok(Value::Tag(tag, Box::new(self.item(depth + 1)?)))
            }
            MAJOR_SIMPLE => match initial {
                0xf4 => Ok(Value::Bool(false)),
                0xf5 => Ok(Value::Bool(true)),
                0xf6 => Ok(Value::Null),
                _ => Err(Error::Cbor(format!(
                    "unsupported simple/float item 0x{initial:02x}"
                ))),
            },
            _ => unreachable!("major type is 3 bits"),
        }
    }
}

fn usize_len(len: u64) -> Result<usize> {
    usize::try_from(len).map_err(|_| Error::Cbor("length exceeds address space".into()))
}
