//! Minimal XML reader/writer for XDF header and footer metadata.
//!
//! XDF metadata is element-and-text only. Attributes are kept as synthetic
//! children named `@attr:<name>` so the tree stays lossless for display.
//! Whitespace-only text runs are dropped; other text runs of an element are
//! concatenated into its `text`.

use serde::Serialize;

use super::error::{FormatError, Result};

pub const ATTR_PREFIX: &str = "@attr:";
const MAX_DEPTH: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct XmlNode {
    pub name: String,
    pub text: String,
    pub children: Vec<XmlNode>,
}

impl XmlNode {
    pub fn new(name: impl Into<String>) -> Self {
        XmlNode {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn with_text(name: impl Into<String>, text: impl Into<String>) -> Self {
        XmlNode {
            name: name.into(),
            text: text.into(),
            children: Vec::new(),
        }
    }

    pub fn push(&mut self, child: XmlNode) -> &mut Self {
        self.children.push(child);
        self
    }

    /// First child with the given name.
    pub fn child(&self, name: &str) -> Option<&XmlNode> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn child_text(&self, name: &str) -> Option<&str> {
        self.child(name).map(|c| c.text.trim())
    }

    /// Replaces the text of the first child named `name`, appending it if absent.
    pub fn set_child_text(&mut self, name: &str, text: impl Into<String>) {
        match self.children.iter_mut().find(|c| c.name == name) {
            Some(c) => c.text = text.into(),
            None => self.children.push(XmlNode::with_text(name, text)),
        }
    }

    /// Serializes this node compactly (no declaration, no indentation).
    pub fn to_xml(&self) -> String {
        let mut out = String::new();
        write_node(self, &mut out);
        out
    }

    /// Serializes with a leading `<?xml version="1.0"?>` declaration.
    pub fn to_document(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\"?>");
        write_node(self, &mut out);
        out
    }
}

fn write_node(node: &XmlNode, out: &mut String) {
    out.push('<');
    out.push_str(&node.name);
    for attr in node.children.iter().filter(|c| c.name.starts_with(ATTR_PREFIX)) {
        out.push(' ');
        out.push_str(&attr.name[ATTR_PREFIX.len()..]);
        out.push_str("=\"");
        escape_into(&attr.text, out, true);
        out.push('"');
    }
    let elements = node
        .children
        .iter()
        .filter(|c| !c.name.starts_with(ATTR_PREFIX));
    if node.text.is_empty() && elements.clone().next().is_none() {
        out.push_str("/>");
        return;
    }
    out.push('>');
    escape_into(&node.text, out, false);
    for child in elements {
        write_node(child, out);
    }
    out.push_str("</");
    out.push_str(&node.name);
    out.push('>');
}

fn escape_into(text: &str, out: &mut String, attribute: bool) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attribute => out.push_str("&quot;"),
            '\r' => out.push_str("&#13;"),
            '\t' if attribute => out.push_str("&#9;"),
            '\n' if attribute => out.push_str("&#10;"),
            _ => out.push(c),
        }
    }
}

/// Parses a single-rooted XML document into a tree.
pub fn parse_xml(text: &str) -> Result<XmlNode> {
    Parser {
        src: text.as_bytes(),
        text,
        pos: 0,
    }
    .document()
}

struct Parser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(FormatError::Xml {
            position: self.pos,
            message: message.into(),
        })
    }

    fn rest(&self) -> &'a [u8] {
        &self.src[self.pos..]
    }

    fn starts_with(&self, s: &str) -> bool {
        self.rest().starts_with(s.as_bytes())
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Advances past the next occurrence of `end`.
    fn skip_past(&mut self, end: &str, what: &str) -> Result<&'a str> {
        let start = self.pos;
        match find(self.rest(), end.as_bytes()) {
            Some(i) => {
                self.pos += i + end.len();
                Ok(&self.text[start..start + i])
            }
            None => self.err(format!("unterminated {what}")),
        }
    }

    /// Skips comments, processing instructions and doctype declarations.
    fn skip_misc(&mut self) -> Result<()> {
        loop {
            self.skip_ws();
            if self.starts_with("<?") {
                self.skip_past("?>", "processing instruction")?;
            } else if self.starts_with("<!--") {
                self.skip_past("-->", "comment")?;
            } else if self.starts_with("<!DOCTYPE") {
                self.skip_past(">", "doctype")?;
            } else {
                return Ok(());
            }
        }
    }

    fn document(mut self) -> Result<XmlNode> {
        if self.starts_with("\u{feff}") {
            self.pos += 3;
        }
        self.skip_misc()?;
        if !self.starts_with("<") {
            return self.err("expected root element");
        }
        let root = self.element()?;
        self.skip_misc()?;
        if self.pos != self.src.len() {
            return self.err("content after root element");
        }
        Ok(root)
    }

    fn name(&mut self) -> Result<&'a str> {
        let start = self.pos;
        while self.pos < self.src.len() {
            let b = self.src[self.pos];
            if b.is_ascii_whitespace() || matches!(b, b'/' | b'>' | b'=' | b'<' | b'"' | b'\'') {
                break;
            }
            self.pos += 1;
        }
        if self.pos == start {
            return self.err("expected a name");
        }
        Ok(&self.text[start..self.pos])
    }

    /// Parses one element starting at `<`, iteratively over its descendants.
    fn element(&mut self) -> Result<XmlNode> {
        let mut stack: Vec<XmlNode> = Vec::new();
        loop {
            // at '<' of an opening tag
            self.pos += 1;
            let name = self.name()?;
            let mut node = XmlNode::new(name);
            let self_closing = self.attributes(&mut node)?;
            if self_closing {
                match stack.last_mut() {
                    Some(parent) => parent.children.push(node),
                    None => return Ok(node),
                }
            } else {
                if stack.len() >= MAX_DEPTH {
                    return self.err("element nesting too deep");
                }
                stack.push(node);
            }
            // content until the next opening tag, or close completed elements
            loop {
                self.content(stack.last_mut().expect("open element"))?;
                if self.starts_with("</") {
                    self.pos += 2;
                    let close = self.name()?;
                    self.skip_ws();
                    if !self.starts_with(">") {
                        return self.err("expected '>' after closing tag name");
                    }
                    let done = stack.pop().expect("open element");
                    if close != done.name {
                        self.pos -= close.len() + 2;
                        return self.err(format!(
                            "mismatched closing tag </{close}> for <{}>",
                            done.name
                        ));
                    }
                    self.pos += 1;
                    match stack.last_mut() {
                        Some(parent) => parent.children.push(done),
                        None => return Ok(done),
                    }
                } else {
                    break;
                }
            }
        }
    }

    /// Reads attributes up to `>` or `/>`; returns true for self-closing tags.
    fn attributes(&mut self, node: &mut XmlNode) -> Result<bool> {
        loop {
            self.skip_ws();
            if self.starts_with("/>") {
                self.pos += 2;
                return Ok(true);
            }
            if self.starts_with(">") {
                self.pos += 1;
                return Ok(false);
            }
            if self.pos >= self.src.len() {
                return self.err("unterminated start tag");
            }
            let key = self.name()?;
            self.skip_ws();
            if !self.starts_with("=") {
                return self.err(format!("attribute {key} has no value"));
            }
            self.pos += 1;
            self.skip_ws();
            let quote = match self.src.get(self.pos) {
                Some(&q @ (b'"' | b'\'')) => q,
                _ => return self.err("expected quoted attribute value"),
            };
            self.pos += 1;
            let start = self.pos;
            let Some(len) = self.rest().iter().position(|&b| b == quote) else {
                return self.err("unterminated attribute value");
            };
            self.pos += len + 1;
            let value = decode_entities(&self.text[start..start + len], start)?;
            node.children
                .push(XmlNode::with_text(format!("{ATTR_PREFIX}{key}"), value));
        }
    }

    /// Consumes text, comments and CDATA until the next tag; appends text to `node`.
    fn content(&mut self, node: &mut XmlNode) -> Result<()> {
        loop {
            let start = self.pos;
            let len = self.rest().iter().position(|&b| b == b'<');
            let Some(len) = len else {
                return self.err(format!("unclosed element <{}>", node.name));
            };
            self.pos += len;
            let raw = &self.text[start..start + len];
            if !raw.trim().is_empty() {
                node.text.push_str(&decode_entities(raw, start)?);
            }
            if self.starts_with("<!--") {
                self.skip_past("-->", "comment")?;
            } else if self.starts_with("<![CDATA[") {
                self.pos += 9;
                let data = self.skip_past("]]>", "CDATA section")?;
                node.text.push_str(data);
            } else if self.starts_with("<?") {
                self.skip_past("?>", "processing instruction")?;
            } else {
                return Ok(());
            }
        }
    }
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

fn decode_entities(raw: &str, base: usize) -> Result<String> {
    if !raw.contains('&') {
        return Ok(raw.to_owned());
    }
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let after = &rest[amp + 1..];
        let Some(semi) = after.find(';') else {
            return Err(FormatError::Xml {
                position: base + (raw.len() - rest.len()) + amp,
                message: "unterminated entity".into(),
            });
        };
        let entity = &after[..semi];
        let decoded = match entity {
            "lt" => Some('<'),
            "gt" => Some('>'),
            "amp" => Some('&'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            _ => entity
                .strip_prefix("#x")
                .or_else(|| entity.strip_prefix("#X"))
                .map(|hex| u32::from_str_radix(hex, 16))
                .or_else(|| entity.strip_prefix('#').map(|dec| dec.parse::<u32>()))
                .and_then(|r| r.ok())
                .and_then(char::from_u32),
        };
        match decoded {
            Some(c) => out.push(c),
            None => {
                return Err(FormatError::Xml {
                    position: base + (raw.len() - rest.len()) + amp,
                    message: format!("unknown entity &{entity};"),
                })
            }
        }
        rest = &after[semi + 1..];
    }
    out.push_str(rest);
    Ok(out)
}
