//! JUMBF box tree: parsing and serialization of the nested box structure
//! carried in the provenance payload.
//!
//! Grammar: each box is a 4-byte big-endian length (covering the whole
//! box), a 4-byte type code, then content. Length 1 switches to a 64-bit
//! extended length following the type; length 0 means "to end of the
//! enclosing box". A `jumb` superbox's first child is its `jumd`
//! description box carrying a 16-byte UUID, a toggles byte, and an
//! optional null-terminated label.

use crate::error::{Error, Result};

const BOX_HEADER_LEN: usize = 8;
const MAX_DEPTH: usize = 32;

const TOGGLE_REQUESTABLE: u8 = 0x01;
const TOGGLE_LABEL: u8 = 0x02;
const TOGGLE_ID: u8 = 0x04;
const TOGGLE_SIGNATURE: u8 = 0x08;

pub const SUPERBOX_TYPE: [u8; 4] = *b"jumb";
pub const DESCRIPTION_TYPE: [u8; 4] = *b"jumd";
pub const CBOR_TYPE: [u8; 4] = *b"cbor";
pub const JSON_TYPE: [u8; 4] = *b"json";

/// Contents of a `jumd` description box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxDescription {
    pub uuid: [u8; 16],
    pub requestable: bool,
    pub label: Option<String>,
    pub id: Option<u32>,
    pub signature: Option<[u8; 32]>,
    /// Unrecognized trailing description bytes, preserved verbatim.
    pub extra: Vec<u8>,
}

impl BoxDescription {
    pub fn labeled(uuid: [u8; 16], label: &str) -> Self {
        BoxDescription {
            uuid,
            requestable: true,
            label: Some(label.to_string()),
            id: None,
            signature: None,
            extra: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoxContent {
    /// Opaque payload bytes. Unknown box types always land here.
    Leaf(Vec<u8>),
    /// A superbox; its description box is held alongside the remaining
    /// children rather than as child zero.
    Super {
        description: BoxDescription,
        children: Vec<JumbfBox>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JumbfBox {
    pub box_type: [u8; 4],
    pub content: BoxContent,
}

impl JumbfBox {
    pub fn leaf(box_type: [u8; 4], payload: Vec<u8>) -> Self {
        JumbfBox {
            box_type,
            content: BoxContent::Leaf(payload),
        }
    }

    pub fn superbox(description: BoxDescription, children: Vec<JumbfBox>) -> Self {
        JumbfBox {
            box_type: SUPERBOX_TYPE,
            content: BoxContent::Super {
                description,
                children,
            },
        }
    }

    pub fn label(&self) -> Option<&str> {
        match &self.content {
            BoxContent::Super { description, .. } => description.label.as_deref(),
            BoxContent::Leaf(_) => None,
        }
    }

    pub fn uuid(&self) -> Option<&[u8; 16]> {
        match &self.content {
            BoxContent::Super { description, .. } => Some(&description.uuid),
            BoxContent::Leaf(_) => None,
        }
    }

    pub fn children(&self) -> &[JumbfBox] {
        match &self.content {
            BoxContent::Super { children, .. } => children,
            BoxContent::Leaf(_) => &[],
        }
    }

    pub fn payload(&self) -> Option<&[u8]> {
        match &self.content {
            BoxContent::Leaf(payload) => Some(payload),
            BoxContent::Super { .. } => None,
        }
    }

    /// First leaf child carrying the box's content payload, if any.
    pub fn content_leaf(&self) -> Option<&JumbfBox> {
        self.children()
            .iter()
            .find(|c| matches!(c.content, BoxContent::Leaf(_)))
    }
}

/// Parses a complete box tree; the input must be exactly one box.
pub fn parse_box_tree(bytes: &[u8]) -> Result<JumbfBox> {
    if bytes.is_empty() {
        return Err(Error::MalformedBox {
            offset: 0,
            reason: "empty payload".into(),
        });
    }
    let (parsed, consumed) = parse_box(bytes, 0, 0)?;
    if consumed != bytes.len() {
        return Err(Error::MalformedBox {
            offset: consumed,
            reason: format!("{} trailing bytes after root box", bytes.len() - consumed),
        });
    }
    Ok(parsed)
}

/// Parses the box starting at `offset` within `bytes`; the box may extend
/// at most to the end of `bytes` (the enclosing range).
fn parse_box(bytes: &[u8], offset: usize, depth: usize) -> Result<(JumbfBox, usize)> {
    if depth > MAX_DEPTH {
        return Err(Error::MalformedBox {
            offset,
            reason: "box nesting too deep".into(),
        });
    }
    let header = bytes
        .get(offset..offset + BOX_HEADER_LEN)
        .ok_or_else(|| Error::MalformedBox {
            offset,
            reason: "truncated box header".into(),
        })?;
    let lbox = u32::from_be_bytes(header[..4].try_into().unwrap());
    let box_type: [u8; 4] = header[4..8].try_into().unwrap();

    let (total_len, content_start) = match lbox {
        0 => (bytes.len() - offset, offset + BOX_HEADER_LEN),
        1 => {
            let ext = bytes
                .get(offset + 8..offset + 16)
                .ok_or_else(|| Error::MalformedBox {
                    offset,
                    reason: "truncated extended length".into(),
                })?;
            let xl = u64::from_be_bytes(ext.try_into().unwrap());
            let xl = usize::try_from(xl).map_err(|_| Error::MalformedBox {
                offset,
                reason: "extended length exceeds address space".into(),
            })?;
            if xl < 16 {
                return Err(Error::MalformedBox {
                    offset,
                    reason: format!("extended length {xl} below header size"),
                });
            }
            (xl, offset + 16)
        }
        2..=7 => {
            return Err(Error::MalformedBox {
                offset,
                reason: format!("declared length {lbox} below header size"),
            })
        }
        n => (n as usize, offset + BOX_HEADER_LEN),
    };

    let end = offset
        .checked_add(total_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::MalformedBox {
            offset,
            reason: "declared length overruns enclosing box".into(),
        })?;
    let content = &bytes[content_start..end];

    let parsed = if box_type == SUPERBOX_TYPE {
        let mut pos = 0usize;
        let (first, first_len) = parse_box(content, 0, depth + 1).map_err(|e| relocate(e, content_start))?;
        if first.box_type != DESCRIPTION_TYPE {
            return Err(Error::MalformedBox {
                offset,
                reason: "superbox does not start with a description box".into(),
            });
        }
        let desc_payload = match &first.content {
            BoxContent::Leaf(p) => p,
            BoxContent::Super { .. } => unreachable!("jumd parses as leaf"),
        };
        let description = parse_description(desc_payload, content_start)?;
        pos += first_len;

        let mut children = Vec::new();
        while pos < content.len() {
            let (child, len) =
                parse_box(content, pos, depth + 1).map_err(|e| relocate(e, content_start))?;
            children.push(child);
            pos += len;
        }
        JumbfBox::superbox(description, children)
    } else {
        JumbfBox::leaf(box_type, content.to_vec())
    };

    Ok((parsed, total_len))
}

fn relocate(err: Error, base: usize) -> Error {
    match err {
        Error::MalformedBox { offset, reason } => Error::MalformedBox {
            offset: offset + base,
            reason,
        },
        other => other,
    }
}

fn parse_description(payload: &[u8], offset: usize) -> Result<BoxDescription> {
    let malformed = |reason: &str| Error::MalformedBox {
        offset,
        reason: reason.into(),
    };
    if payload.len() < 17 {
        return Err(malformed("description box shorter than uuid + toggles"));
    }
    let uuid: [u8; 16] = payload[..16].try_into().unwrap();
    let toggles = payload[16];
    let mut pos = 17usize;

    let label = if toggles & TOGGLE_LABEL != 0 {
        let nul = payload[pos..]
            .iter()
            .position(|&b| b == 0)
            .ok_or_else(|| malformed("unterminated description label"))?;
        let s = std::str::from_utf8(&payload[pos..pos + nul])
            .map_err(|_| malformed("description label is not UTF-8"))?;
        pos += nul + 1;
        Some(s.to_string())
    } else {
        None
    };

    let id = if toggles & TOGGLE_ID != 0 {
        let raw = payload
            .get(pos..pos + 4)
            .ok_or_else(|| malformed("truncated description id"))?;
        pos += 4;
        Some(u32::from_be_bytes(raw.try_into().unwrap()))
    } else {
        None
    };

    let signature = if toggles & TOGGLE_SIGNATURE != 0 {
        let raw = payload
            .get(pos..pos + 32)
            .ok_or_else(|| malformed("truncated description signature"))?;
        pos += 32;
        Some(<[u8; 32]>::try_from(raw).unwrap())
    } else {
        None
    };

    Ok(BoxDescription {
        uuid,
        requestable: toggles & TOGGLE_REQUESTABLE != 0,
        label,
        id,
        signature,
        extra: payload[pos..].to_vec(),
    })
}

/// Serializes a box tree; `parse_box_tree` of the output is structurally
/// equal to the input.
pub fn serialize_box_tree(root: &JumbfBox) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    serialize_box(root, &mut out)?;
    Ok(out)
}

fn serialize_box(node: &JumbfBox, out: &mut Vec<u8>) -> Result<()> {
    let content = match &node.content {
        BoxContent::Leaf(payload) => {
            if node.box_type == SUPERBOX_TYPE {
                return Err(Error::InvalidTree(
                    "a jumb box must carry a description and children, not raw payload".into(),
                ));
            }
            payload.clone()
        }
        BoxContent::Super {
            description,
            children,
        } => {
            if node.box_type != SUPERBOX_TYPE {
                return Err(Error::InvalidTree(format!(
                    "box type {:?} cannot contain children",
                    String::from_utf8_lossy(&node.box_type)
                )));
            }
            let mut content = Vec::new();
            let desc_payload = serialize_description(description)?;
            write_header(desc_payload.len(), &DESCRIPTION_TYPE, &mut content);
            content.extend_from_slice(&desc_payload);
            for child in children {
                serialize_box(child, &mut content)?;
            }
            content
        }
    };
    write_header(content.len(), &node.box_type, out);
    out.extend_from_slice(&content);
    Ok(())
}

fn write_header(content_len: usize, box_type: &[u8; 4], out: &mut Vec<u8>) {
    // Extended length only when the 32-bit form cannot express the total.
    let total = content_len as u64 + BOX_HEADER_LEN as u64;
    if total <= u32::MAX as u64 {
        out.extend_from_slice(&(total as u32).to_be_bytes());
        out.extend_from_slice(box_type);
    } else {
        out.extend_from_slice(&1u32.to_be_bytes());
        out.extend_from_slice(box_type);
        out.extend_from_slice(&(total + 8).to_be_bytes());
    }
}

fn serialize_description(desc: &BoxDescription) -> Result<Vec<u8>> {
    let mut toggles = 0u8;
    if desc.requestable {
        toggles |= TOGGLE_REQUESTABLE;
    }
    let mut out = Vec::with_capacity(17);
    out.extend_from_slice(&desc.uuid);
    out.push(0); // toggles placeholder
    if let Some(label) = &desc.label {
        if label.as_bytes().contains(&0) {
            return Err(Error::InvalidTree("label contains a NUL byte".into()));
        }
        toggles |= TOGGLE_LABEL;
        out.extend_from_slice(label.as_bytes());
        out.push(0);
    }
    if let Some(id) = desc.id {
        toggles |= TOGGLE_ID;
        out.extend_from_slice(&id.to_be_bytes());
    }
    if let Some(sig) = &desc.signature {
        toggles |= TOGGLE_SIGNATURE;
        out.extend_from_slice(sig);
    }
    out.extend_from_slice(&desc.extra);
    out[16] = toggles;
    Ok(out)
}

/// Resolves nested superboxes by description label, one path element per
/// level. The empty path returns `root` itself.
pub fn find_box<'a>(root: &'a JumbfBox, label_path: &[&str]) -> Option<&'a JumbfBox> {
    let mut node = root;
    for step in label_path {
        node = node
            .children()
            .iter()
            .find(|child| child.label() == Some(*step))?;
    }
    Some(node)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_bytes() -> Vec<u8> {
        // Hand-assembled: superbox (54 bytes) holding a description box
        // labeled "test.golden" and an empty-map cbor leaf.
        hex::decode(concat!(
            "000000366a756d62",
            "000000256a756d64",
            "00112233445566778899aabbccddeeff",
            "03",
            "746573742e676f6c64656e00",
            "0000000963626f72",
            "a0",
        ))
        .unwrap()
    }

    #[test]
    fn golden_tree_parses_and_reserializes_byte_exact() {
        let bytes = golden_bytes();
        let root = parse_box_tree(&bytes).unwrap();
        assert_eq!(root.label(), Some("test.golden"));
        assert_eq!(root.children().len(), 1);
        assert_eq!(root.children()[0].box_type, CBOR_TYPE);
        assert_eq!(root.children()[0].payload(), Some(&[0xA0u8][..]));
        assert_eq!(serialize_box_tree(&root).unwrap(), bytes);
    }

    #[test]
    fn golden_fixture_file_matches() {
        let file = include_bytes!("../tests/fixtures/minimal_tree.jumbf");
        assert_eq!(file.as_slice(), golden_bytes().as_slice());
        let root = parse_box_tree(file).unwrap();
        assert_eq!(root.label(), Some("test.golden"));
    }

    #[test]
    fn bare_leaf_parses() {
        // 8-byte box, type "free", empty payload.
        let bytes = hex::decode("0000000866726565").unwrap();
        let root = parse_box_tree(&bytes).unwrap();
        assert_eq!(&root.box_type, b"free");
        assert_eq!(root.payload(), Some(&[][..]));
    }

    #[test]
    fn empty_superbox_with_label() {
        let root = JumbfBox::superbox(BoxDescription::labeled([9; 16], "c2pa"), vec![]);
        let bytes = serialize_box_tree(&root).unwrap();
        let reparsed = parse_box_tree(&bytes).unwrap();
        assert_eq!(reparsed.label(), Some("c2pa"));
        assert!(reparsed.children().is_empty());
        assert_eq!(reparsed, root);
    }

    #[test]
    fn declared_length_below_header_is_malformed() {
        let bytes = hex::decode("0000000466726565").unwrap();
        assert!(matches!(
            parse_box_tree(&bytes),
            Err(Error::MalformedBox { .. })
        ));
    }

    #[test]
    fn overrun_is_malformed() {
        let bytes = hex::decode("000000ff66726565").unwrap();
        assert!(matches!(
            parse_box_tree(&bytes),
            Err(Error::MalformedBox { .. })
        ));
    }

    #[test]
    fn superbox_without_description_is_malformed() {
        // jumb directly containing a free box.
        let bytes = hex::decode("000000106a756d620000000866726565").unwrap();
        let err = parse_box_tree(&bytes).unwrap_err();
        assert!(matches!(err, Error::MalformedBox { .. }), "{err}");
    }

    #[test]
    fn leaf_jumb_fails_serialization() {
        let bad = JumbfBox::leaf(SUPERBOX_TYPE, vec![1, 2, 3]);
        assert!(matches!(
            serialize_box_tree(&bad),
            Err(Error::InvalidTree(_))
        ));
    }

    #[test]
    fn label_with_nul_fails_serialization() {
        let bad = JumbfBox::superbox(BoxDescription::labeled([0; 16], "a\0b"), vec![]);
        assert!(matches!(
            serialize_box_tree(&bad),
            Err(Error::InvalidTree(_))
        ));
    }

    #[test]
    fn extended_length_parses() {
        // Same free box, written with the 64-bit length form.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&1u32.to_be_bytes());
        bytes.extend_from_slice(b"free");
        bytes.extend_from_slice(&19u64.to_be_bytes());
        bytes.extend_from_slice(&[0xAA, 0xBB, 0xCC]);
        let root = parse_box_tree(&bytes).unwrap();
        assert_eq!(root.payload(), Some(&[0xAA, 0xBB, 0xCC][..]));
    }

    #[test]
    fn length_zero_extends_to_end() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&0u32.to_be_bytes());
        bytes.extend_from_slice(b"free");
        bytes.extend_from_slice(&[1, 2, 3, 4]);
        let root = parse_box_tree(&bytes).unwrap();
        assert_eq!(root.payload(), Some(&[1, 2, 3, 4][..]));
    }

    #[test]
    fn find_box_resolves_label_paths() {
        let tree = JumbfBox::superbox(
            BoxDescription::labeled([1; 16], "store"),
            vec![
                JumbfBox::superbox(
                    BoxDescription::labeled([2; 16], "assertions"),
                    vec![JumbfBox::superbox(
                        BoxDescription::labeled([3; 16], "hash.data"),
                        vec![JumbfBox::leaf(CBOR_TYPE, vec![0xA0])],
                    )],
                ),
                JumbfBox::superbox(BoxDescription::labeled([4; 16], "claim"), vec![]),
            ],
        );
        assert_eq!(find_box(&tree, &[]).unwrap().label(), Some("store"));
        let binding = find_box(&tree, &["assertions", "hash.data"]).unwrap();
        assert_eq!(binding.label(), Some("hash.data"));
        assert!(find_box(&tree, &["assertions", "nope"]).is_none());
    }

    #[test]
    fn description_roundtrips_id_and_signature() {
        let desc = BoxDescription {
            uuid: [7; 16],
            requestable: false,
            label: Some("x".into()),
            id: Some(0xDEADBEEF),
            signature: Some([0x42; 32]),
            extra: vec![1, 2],
        };
        let root = JumbfBox::superbox(desc.clone(), vec![]);
        let reparsed = parse_box_tree(&serialize_box_tree(&root).unwrap()).unwrap();
        match reparsed.content {
            BoxContent::Super { description, .. } => assert_eq!(description, desc),
            BoxContent::Leaf(_) => panic!("expected superbox"),
        }
    }

    proptest::proptest! {
        #[test]
        fn round_trip_structural_equality(tree in arb_tree()) {
            let bytes = serialize_box_tree(&tree).unwrap();
            let reparsed = parse_box_tree(&bytes).unwrap();
            proptest::prop_assert_eq!(reparsed, tree);
        }

        #[test]
        fn parse_is_total_on_arbitrary_bytes(
            bytes in proptest::collection::vec(proptest::prelude::any::<u8>(), 0..512)
        ) {
            let _ = parse_box_tree(&bytes);
        }

        #[test]
        fn parse_is_total_on_mutated_trees(
            tree in arb_tree(),
            flips in proptest::collection::vec((proptest::prelude::any::<proptest::sample::Index>(), proptest::prelude::any::<u8>()), 1..4),
        ) {
            let mut bytes = serialize_box_tree(&tree).unwrap();
            for (index, value) in flips {
                let at = index.index(bytes.len());
                bytes[at] = value;
            }
            let _ = parse_box_tree(&bytes);
        }
    }

    fn arb_tree() -> impl proptest::strategy::Strategy<Value = JumbfBox> {
        use proptest::prelude::*;
        let leaf = (
            proptest::array::uniform4(any::<u8>()),
            proptest::collection::vec(any::<u8>(), 0..32),
        )
            .prop_map(|(mut t, payload)| {
                if t == SUPERBOX_TYPE {
                    t = *b"free";
                }
                JumbfBox::leaf(t, payload)
            });
        leaf.prop_recursive(4, 24, 8, |inner| {
            (
                proptest::array::uniform16(any::<u8>()),
                proptest::option::of("[a-z.]{1,12}"),
                any::<bool>(),
                proptest::collection::vec(inner, 0..8),
            )
                .prop_map(|(uuid, label, requestable, children)| {
                    JumbfBox::superbox(
                        BoxDescription {
                            uuid,
                            requestable,
                            label,
                            id: None,
                            signature: None,
                            extra: Vec::new(),
                        },
                        children,
                    )
                })
        })
    }
}
